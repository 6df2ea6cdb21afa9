#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "aed/corpus.hpp"
#include "aed/detmath.hpp"
#include "aed/error.hpp"

namespace aed {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559005768;
constexpr double kRampSeconds = 0.01;

using detmath::Rng;

double jittered(Rng& rng, double value, double jitter) {
  return value * (1.0 + jitter * rng.uniform(-1.0, 1.0));
}

// RBJ band-pass biquad (0 dB peak), direct form I.
void bandpass(std::vector<double>& x, double low, double high) {
  const double center = std::sqrt(low * high);
  const double q = center / (high - low);
  const double w0 = kTwoPi * center / kSampleRate;
  const double alpha = detmath::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0;
  const double b2 = -alpha / a0;
  const double a1 = -2.0 * detmath::cos(w0) / a0;
  const double a2 = (1.0 - alpha) / a0;
  double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
  for (double& v : x) {
    const double y = b0 * v + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = v;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

void normalize_rms(std::vector<double>& x) {
  double energy = 0.0;
  for (double v : x) energy += v * v;
  if (energy <= 0.0) return;
  const double scale = 1.0 / std::sqrt(energy / static_cast<double>(x.size()));
  for (double& v : x) v *= scale;
}

void apply_ramps(std::vector<double>& x) {
  const std::size_t ramp = std::min<std::size_t>(
      x.size() / 2, static_cast<std::size_t>(kRampSeconds * kSampleRate));
  for (std::size_t i = 0; i < ramp; ++i) {
    const double g = 0.5 * (1.0 - detmath::cos(M_PI * static_cast<double>(i) /
                                                static_cast<double>(ramp)));
    x[i] *= g;
    x[x.size() - 1 - i] *= g;
  }
}

std::vector<double> render_event(const SynthClass& cls, std::size_t length, double jitter,
                                 Rng& rng) {
  std::vector<double> x(length, 0.0);
  const double fs = kSampleRate;
  switch (cls.kind) {
    case SynthKind::tone_burst: {
      const double f = jittered(rng, cls.f1, jitter);
      const double phase = kTwoPi * rng.uniform();
      for (std::size_t i = 0; i < length; ++i)
        x[i] = detmath::sin(kTwoPi * f * static_cast<double>(i) / fs + phase);
      break;
    }
    case SynthKind::chirp: {
      const double f_start = jittered(rng, cls.f1, jitter);
      const double f_end = jittered(rng, cls.f2, jitter);
      const double duration = static_cast<double>(length) / fs;
      const double phase = kTwoPi * rng.uniform();
      for (std::size_t i = 0; i < length; ++i) {
        const double t = static_cast<double>(i) / fs;
        x[i] = detmath::sin(kTwoPi * (f_start * t + 0.5 * (f_end - f_start) * t * t / duration) +
                            phase);
      }
      break;
    }
    case SynthKind::noise_burst: {
      const double low = jittered(rng, cls.f1, jitter);
      const double high = jittered(rng, cls.f2, jitter);
      for (double& v : x) v = rng.normal();
      bandpass(x, low, high);
      bandpass(x, low, high);
      break;
    }
    case SynthKind::click_train: {
      const double rate = jittered(rng, cls.f1, jitter);
      const double resonance = jittered(rng, cls.f2, jitter);
      const double decay = detmath::exp(-1.0 / (0.003 * fs));
      const auto period = static_cast<std::size_t>(fs / rate);
      std::size_t next = static_cast<std::size_t>(rng.uniform() * static_cast<double>(period));
      double amplitude = 0.0;
      std::size_t since = 0;
      for (std::size_t i = 0; i < length; ++i) {
        if (i == next) {
          amplitude = 1.0;
          since = 0;
          next += period;
        }
        x[i] = amplitude * detmath::sin(kTwoPi * resonance * static_cast<double>(since) / fs);
        amplitude *= decay;
        ++since;
      }
      break;
    }
    case SynthKind::harmonic_stack: {
      const double f0 = jittered(rng, cls.f1, jitter);
      std::vector<double> phases(static_cast<std::size_t>(cls.harmonics));
      for (double& p : phases) p = kTwoPi * rng.uniform();
      for (int h = 1; h <= cls.harmonics; ++h) {
        if (h * f0 >= fs / 2.0) break;
        for (std::size_t i = 0; i < length; ++i)
          x[i] += detmath::sin(kTwoPi * h * f0 * static_cast<double>(i) / fs +
                               phases[static_cast<std::size_t>(h - 1)]) / h;
      }
      break;
    }
  }
  normalize_rms(x);
  apply_ramps(x);
  return x;
}

// Low-passed noise burst with a decaying envelope; never annotated.
std::vector<double> render_distractor(std::size_t length, Rng& rng) {
  std::vector<double> x(length);
  double state = 0.0;
  for (double& v : x) {
    state = 0.97 * state + rng.normal();
    v = state;
  }
  normalize_rms(x);
  const double decay = detmath::exp(-4.0 / static_cast<double>(length));
  double env = 1.0;
  for (double& v : x) {
    v *= env;
    env *= decay;
  }
  apply_ramps(x);
  return x;
}

Session synth_session(const SynthConfig& config, int index, std::uint64_t seed) {
  Rng rng(detmath::mix_seed(seed, static_cast<std::uint64_t>(index)));
  const auto fs = static_cast<double>(kSampleRate);
  const auto total = static_cast<std::size_t>(std::floor(config.session_seconds * fs));

  // -1 marks a distractor.
  std::vector<int> items;
  for (std::size_t c = 0; c < config.classes.size(); ++c)
    for (int k = 0; k < config.events_per_class; ++k) items.push_back(static_cast<int>(c));
  for (int k = 0; k < config.distractors_per_session; ++k) items.push_back(-1);
  for (std::size_t i = items.size(); i > 1; --i)
    std::swap(items[i - 1], items[rng.below(i)]);

  std::vector<std::size_t> lengths(items.size());
  std::size_t occupied = 0;
  for (auto& len : lengths) {
    len = static_cast<std::size_t>(
        std::floor(rng.uniform(config.min_event_seconds, config.max_event_seconds) * fs));
    occupied += len;
  }
  const auto min_gap = static_cast<std::size_t>(std::ceil(config.min_gap_seconds * fs));
  occupied += (items.size() + 1) * min_gap;
  if (occupied > total)
    fail(Errc::config, "infeasible packing: " + std::to_string(items.size()) +
                           " events need more than session_seconds = " +
                           std::to_string(config.session_seconds));

  const std::size_t slack = total - occupied;
  std::vector<double> weights(items.size() + 1);
  double weight_sum = 0.0;
  for (double& w : weights) {
    w = rng.uniform();
    weight_sum += w;
  }

  Session session;
  char name[32];
  std::snprintf(name, sizeof(name), "session_%02d", index);
  session.audio.session_id = name;
  session.audio.sample_rate = kSampleRate;
  auto& out = session.audio.samples;
  out.assign(total, 0.0);

  // Background: one-pole coloured Gaussian noise at the configured RMS.
  constexpr double kColour = 0.5;
  const double bg_scale = config.background_level * std::sqrt(1.0 - kColour * kColour);
  double state = 0.0;
  for (double& v : out) {
    state = kColour * state + rng.normal();
    v = bg_scale * state;
  }

  const double gain = config.background_level * detmath::db_to_gain(config.snr_db);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto extra = weight_sum > 0.0
                           ? static_cast<std::size_t>(std::floor(static_cast<double>(slack) *
                                                                 weights[i] / weight_sum))
                           : 0;
    cursor += min_gap + extra;
    const std::size_t len = lengths[i];
    const std::vector<double> wave =
        items[i] >= 0 ? render_event(config.classes[static_cast<std::size_t>(items[i])], len,
                                     config.frequency_jitter, rng)
                      : render_distractor(len, rng);
    for (std::size_t k = 0; k < len; ++k) out[cursor + k] += gain * wave[k];
    if (items[i] >= 0)
      session.events.push_back({static_cast<double>(cursor) / fs,
                                static_cast<double>(cursor + len) / fs, items[i]});
    cursor += len;
  }
  // Stored as float32 WAV, so keep the in-memory corpus at float precision.
  for (double& v : out) v = static_cast<float>(std::clamp(v, -1.0, 1.0));
  return session;
}

}  // namespace

const char* to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::tone_burst: return "tone_burst";
    case SynthKind::chirp: return "chirp";
    case SynthKind::noise_burst: return "noise_burst";
    case SynthKind::click_train: return "click_train";
    case SynthKind::harmonic_stack: return "harmonic_stack";
  }
  return "unknown";
}

SynthKind synth_kind_from_string(const std::string& name) {
  for (auto kind : {SynthKind::tone_burst, SynthKind::chirp, SynthKind::noise_burst,
                    SynthKind::click_train, SynthKind::harmonic_stack})
    if (name == to_string(kind)) return kind;
  fail(Errc::config, "unknown synthetic kind '" + name + "'");
}

ClassInventory SynthConfig::inventory() const {
  std::vector<std::string> names;
  for (const auto& c : classes) names.push_back(c.name);
  return ClassInventory(std::move(names));
}

void SynthConfig::validate() const {
  auto check = [](bool ok, const std::string& field, const std::string& why) {
    if (!ok) fail(Errc::config, "synth config field '" + field + "': " + why);
  };
  check(classes.size() >= 2, "classes", "at least two classes are required");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto& c = classes[i];
    const std::string field = "classes[" + std::to_string(i) + "]";
    check(!c.name.empty(), field + ".name", "must be non-empty");
    for (std::size_t j = 0; j < i; ++j)
      check(classes[j].name != c.name, field + ".name", "duplicate name '" + c.name + "'");
    check(c.f1 > 0.0 && c.f1 < kSampleRate / 2.0, field + ".f1", "must lie in (0, 8000) Hz");
    check(c.f2 > 0.0 && c.f2 < kSampleRate / 2.0, field + ".f2", "must lie in (0, 8000) Hz");
    if (c.kind == SynthKind::noise_burst)
      check(c.f2 > c.f1, field + ".f2", "pass band needs f2 > f1");
    if (c.kind == SynthKind::harmonic_stack)
      check(c.harmonics >= 1, field + ".harmonics", "must be >= 1");
  }
  check(sessions >= 1, "sessions", "must be >= 1");
  check(events_per_class >= 0, "events_per_class", "must be >= 0");
  check(distractors_per_session >= 0, "distractors_per_session", "must be >= 0");
  check(session_seconds > 0.0, "session_seconds", "must be positive");
  check(min_event_seconds > 0.0 && max_event_seconds >= min_event_seconds, "event_seconds",
        "need 0 < min <= max");
  check(min_gap_seconds >= 0.2, "min_gap_seconds", "must be >= 0.2");
  check(background_level >= 0.0 && background_level < 1.0, "background_level",
        "must lie in [0, 1)");
  check(frequency_jitter >= 0.0 && frequency_jitter < 0.5, "frequency_jitter",
        "must lie in [0, 0.5)");
}

SynthConfig default_synth_config() {
  SynthConfig c;
  c.classes = {
      {"tone", SynthKind::tone_burst, 1000.0, 0.0, 0},
      {"chirp", SynthKind::chirp, 400.0, 3200.0, 0},
      {"noise", SynthKind::noise_burst, 3000.0, 6000.0, 0},
      {"clicks", SynthKind::click_train, 20.0, 2000.0, 0},
      {"harmonic", SynthKind::harmonic_stack, 220.0, 0.0, 6},
  };
  // f2 is unused by these kinds but must still be a valid frequency.
  c.classes[0].f2 = 1000.0;
  c.classes[4].f2 = 220.0;
  return c;
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  auto field = [&](const char* key, auto& target) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(target);
    } catch (const nlohmann::json::exception&) {
      fail(Errc::config, std::string("synth config field '") + key + "': wrong type");
    }
  };
  if (!j.is_object()) fail(Errc::config, "synth config must be a JSON object");
  if (j.contains("format_version") && j.at("format_version") != 1)
    fail(Errc::config, "synth config field 'format_version': only version 1 is supported");
  field("sessions", c.sessions);
  field("events_per_class", c.events_per_class);
  field("session_seconds", c.session_seconds);
  field("min_gap_seconds", c.min_gap_seconds);
  field("snr_db", c.snr_db);
  field("background_level", c.background_level);
  field("distractors_per_session", c.distractors_per_session);
  field("frequency_jitter", c.frequency_jitter);
  if (j.contains("event_seconds")) {
    const auto& range = j.at("event_seconds");
    if (!range.is_array() || range.size() != 2 || !range[0].is_number() || !range[1].is_number())
      fail(Errc::config, "synth config field 'event_seconds': expected [min, max]");
    c.min_event_seconds = range[0].get<double>();
    c.max_event_seconds = range[1].get<double>();
  }
  if (!j.contains("classes") || !j.at("classes").is_array())
    fail(Errc::config, "synth config field 'classes': expected an array");
  for (std::size_t i = 0; i < j.at("classes").size(); ++i) {
    const auto& e = j.at("classes")[i];
    const std::string where = "classes[" + std::to_string(i) + "]";
    if (!e.is_object() || !e.contains("name") || !e.at("name").is_string())
      fail(Errc::config, "synth config field '" + where + ".name': expected a string");
    if (!e.contains("kind") || !e.at("kind").is_string())
      fail(Errc::config, "synth config field '" + where + ".kind': expected a string");
    SynthClass sc;
    sc.name = e.at("name").get<std::string>();
    try {
      sc.kind = synth_kind_from_string(e.at("kind").get<std::string>());
    } catch (const Error& err) {
      fail(Errc::config, "synth config field '" + where + ".kind': " + err.what());
    }
    sc.f1 = e.value("f1", sc.f1);
    sc.f2 = e.value("f2", sc.kind == SynthKind::noise_burst ? sc.f1 * 2.0 : sc.f1);
    sc.harmonics = e.value("harmonics", sc.harmonics);
    c.classes.push_back(sc);
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const SynthConfig& c) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& sc : c.classes)
    classes.push_back({{"name", sc.name}, {"kind", to_string(sc.kind)}, {"f1", sc.f1},
                       {"f2", sc.f2}, {"harmonics", sc.harmonics}});
  return {{"format_version", 1},
          {"classes", classes},
          {"sessions", c.sessions},
          {"events_per_class", c.events_per_class},
          {"session_seconds", c.session_seconds},
          {"event_seconds", {c.min_event_seconds, c.max_event_seconds}},
          {"min_gap_seconds", c.min_gap_seconds},
          {"snr_db", c.snr_db},
          {"background_level", c.background_level},
          {"distractors_per_session", c.distractors_per_session},
          {"frequency_jitter", c.frequency_jitter}};
}

Corpus synth_corpus(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  Corpus corpus;
  corpus.classes = config.inventory();
  for (int s = 0; s < config.sessions; ++s) corpus.sessions.push_back(synth_session(config, s, seed));
  return corpus;
}

// ---------------------------------------------------------------------------

void CorpusSplit::validate() const {
  for (const auto& id : train_sessions)
    if (test_sessions.count(id))
      fail(Errc::config, "session '" + id + "' is in both train and test sets");
}

std::vector<const Session*> Corpus::select(const std::set<std::string>& ids) const {
  std::vector<const Session*> out;
  for (const auto& s : sessions)
    if (ids.count(s.audio.session_id)) out.push_back(&s);
  if (out.size() != ids.size()) {
    for (const auto& id : ids) {
      const bool found = std::any_of(sessions.begin(), sessions.end(), [&](const Session& s) {
        return s.audio.session_id == id;
      });
      if (!found) fail(Errc::config, "unknown session '" + id + "'");
    }
  }
  return out;
}

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "classes.txt", std::ios::binary);
    if (!out) fail(Errc::io, "cannot write " + (dir / "classes.txt").string());
    for (const auto& n : corpus.classes.names()) out << n << '\n';
  }
  for (const auto& s : corpus.sessions) {
    write_wav(dir / (s.audio.session_id + ".wav"), s.audio, WavEncoding::float32);
    write_annotations(dir / (s.audio.session_id + ".tsv"), s.events, corpus.classes);
  }
}

Corpus read_corpus(const std::filesystem::path& dir) {
  std::ifstream in(dir / "classes.txt");
  if (!in) fail(Errc::io, "cannot open " + (dir / "classes.txt").string());
  std::vector<std::string> names;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) names.push_back(line);
  Corpus corpus;
  corpus.classes = ClassInventory(std::move(names));

  std::vector<std::filesystem::path> wavs;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".wav") wavs.push_back(entry.path());
  std::sort(wavs.begin(), wavs.end());
  for (const auto& wav : wavs) {
    Session s;
    s.audio = load_audio(wav);
    auto tsv = wav;
    tsv.replace_extension(".tsv");
    if (std::filesystem::exists(tsv)) s.events = load_annotations(tsv, corpus.classes).events;
    corpus.sessions.push_back(std::move(s));
  }
  return corpus;
}

}  // namespace aed
