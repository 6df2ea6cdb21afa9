#include "aed/types.hpp"

#include <algorithm>
#include <cmath>

#include "aed/error.hpp"

namespace aed {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::io: return "io";
    case Errc::unsupported_encoding: return "unsupported_encoding";
    case Errc::parse: return "parse";
    case Errc::empty_input: return "empty_input";
    case Errc::config: return "config";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::missing_component: return "missing_component";
    case Errc::out_of_range: return "out_of_range";
  }
  return "unknown";
}

std::size_t AudioSignal::to_index(double seconds) const {
  if (seconds <= 0.0) return 0;
  const auto idx = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  return std::min(idx, samples.size());
}

AudioSignal AudioSignal::slice(double onset, double offset) const {
  AudioSignal out;
  out.sample_rate = sample_rate;
  out.session_id = session_id;
  const std::size_t a = to_index(onset);
  const std::size_t b = std::max(a, to_index(offset));
  out.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(a),
                     samples.begin() + static_cast<std::ptrdiff_t>(b));
  return out;
}

ClassInventory::ClassInventory(std::vector<std::string> names)
    : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    require(!names_[i].empty(), Errc::config, "class names must be non-empty");
    for (std::size_t j = 0; j < i; ++j)
      require(names_[i] != names_[j], Errc::config,
              "duplicate class name '" + names_[i] + "'");
  }
}

const std::string& ClassInventory::name(int label) const {
  require(label >= 0 && static_cast<std::size_t>(label) < names_.size(),
          Errc::invalid_argument, "label index out of range");
  return names_[static_cast<std::size_t>(label)];
}

int ClassInventory::find(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
}

double overlap(double a_on, double a_off, double b_on, double b_off) {
  return std::max(0.0, std::min(a_off, b_off) - std::max(a_on, b_on));
}

}  // namespace aed
