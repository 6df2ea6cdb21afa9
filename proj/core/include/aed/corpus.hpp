#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "aed/types.hpp"

namespace aed {

// ---------------------------------------------------------------------------
// Audio I/O
// ---------------------------------------------------------------------------

/// Reads a RIFF/WAVE file (8/16/24/32-bit integer PCM, 32/64-bit float),
/// keeps the first channel, scales integers by full scale and resamples to
/// kSampleRate. Throws Error{io | parse | unsupported_encoding}.
AudioSignal load_audio(const std::filesystem::path& path);

enum class WavEncoding { pcm16, float32 };

void write_wav(const std::filesystem::path& path, const AudioSignal& signal,
               WavEncoding encoding = WavEncoding::float32);

/// Windowed-sinc polyphase resampling by the rational factor to/from.
std::vector<double> resample(const std::vector<double>& samples, int from_rate,
                             int to_rate);

// ---------------------------------------------------------------------------
// Annotations
// ---------------------------------------------------------------------------

struct AnnotationFile {
  std::vector<EventAnnotation> events;  // sorted by onset
  std::size_t dropped = 0;              // rows whose label is not a target class
};

/// Parses the `onset<TAB>offset<TAB>label` TSV format.
AnnotationFile load_annotations(const std::filesystem::path& path,
                                const ClassInventory& classes);
AnnotationFile parse_annotations(const std::string& text,
                                 const ClassInventory& classes);

std::string format_annotations(const std::vector<EventAnnotation>& events,
                               const ClassInventory& classes);
void write_annotations(const std::filesystem::path& path,
                       const std::vector<EventAnnotation>& events,
                       const ClassInventory& classes);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_seconds(double value);

// ---------------------------------------------------------------------------
// Sessions and splits
// ---------------------------------------------------------------------------

struct CorpusSplit {
  std::set<std::string> train_sessions;
  std::set<std::string> test_sessions;

  /// Throws Error{config} when the sets intersect.
  void validate() const;
};

/// A collection of sessions sharing one class inventory.
struct Corpus {
  ClassInventory classes;
  std::vector<Session> sessions;

  std::vector<const Session*> select(const std::set<std::string>& ids) const;
};

/// Writes `<dir>/<session>.wav`, `<dir>/<session>.tsv` and `<dir>/classes.txt`.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus read_corpus(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

enum class SynthKind { tone_burst, chirp, noise_burst, click_train, harmonic_stack };

const char* to_string(SynthKind kind);
SynthKind synth_kind_from_string(const std::string& name);

struct SynthClass {
  std::string name;
  SynthKind kind = SynthKind::tone_burst;
  // Meaning depends on kind:
  //   tone_burst      f1 = frequency
  //   chirp           f1 -> f2 linear sweep
  //   noise_burst     [f1, f2] pass band
  //   click_train     f1 = clicks per second, f2 = click resonance
  //   harmonic_stack  f1 = fundamental, harmonics = partial count
  double f1 = 1000.0;
  double f2 = 2000.0;
  int harmonics = 5;
};

struct SynthConfig {
  std::vector<SynthClass> classes;
  int sessions = 9;
  int events_per_class = 10;           // per session
  double session_seconds = 60.0;
  double min_event_seconds = 0.5;
  double max_event_seconds = 1.0;
  double min_gap_seconds = 0.2;        // never below 0.2
  double snr_db = 15.0;                // event RMS relative to background RMS
  double background_level = 0.02;      // background noise RMS
  int distractors_per_session = 0;     // unlabeled background bursts
  double frequency_jitter = 0.05;      // relative per-instance variation

  ClassInventory inventory() const;
  /// Throws Error{config} naming the offending field.
  void validate() const;
};

SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthConfig& config);

/// Desk-scale default: five classes, one per palette kind.
SynthConfig default_synth_config();

/// Deterministic in (config, seed). Sessions are named session_00, ...
Corpus synth_corpus(const SynthConfig& config, std::uint64_t seed);

}  // namespace aed
