#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace aed {

inline constexpr int kSampleRate = 16000;

using Vector = std::vector<double>;
using Matrix = std::vector<Vector>;  // row-major list of feature vectors

/// Mono PCM signal at kSampleRate, amplitudes in [-1, 1].
struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = kSampleRate;
  std::string session_id;

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }

  std::size_t to_index(double seconds) const;

  /// Copy of the samples covering [onset, offset), clamped to the signal.
  AudioSignal slice(double onset, double offset) const;
};

/// Reference event. Labels are indices into a ClassInventory.
struct EventAnnotation {
  double onset = 0.0;
  double offset = 0.0;
  int label = 0;

  double duration() const { return offset - onset; }
  double center() const { return 0.5 * (onset + offset); }
  friend bool operator==(const EventAnnotation&, const EventAnnotation&) = default;
};

/// Detector output (label is c_detected).
struct Hypothesis {
  double onset = 0.0;
  double offset = 0.0;
  int label = 0;
  double score = 0.0;

  double duration() const { return offset - onset; }
  double center() const { return 0.5 * (onset + offset); }
  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

/// Ordered list of event class names; background is not part of it.
class ClassInventory {
 public:
  ClassInventory() = default;
  explicit ClassInventory(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::string& name(int label) const;
  /// Index of `name`, or -1 when it is not a target class.
  int find(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const ClassInventory&, const ClassInventory&) = default;

 private:
  std::vector<std::string> names_;
};

/// One recording session: audio plus its reference annotations.
struct Session {
  AudioSignal audio;
  std::vector<EventAnnotation> events;
};

double overlap(double a_on, double a_off, double b_on, double b_off);

}  // namespace aed
