#include "aed/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "aed/detmath.hpp"
#include "aed/error.hpp"
#include "aed/serialization.hpp"

namespace aed {

using nlohmann::json;

namespace {

std::string lowercase(const std::string& s) {
  std::string out;
  for (char ch : s) out += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

// Seed streams for the independently trained components.
constexpr std::uint64_t kDbcStream = 1;
constexpr std::uint64_t kAsrStream = 2;
constexpr std::uint64_t kRegStream = 3;
constexpr std::uint64_t kVerifierStream = 16;

// Reads the keys of one config object; every key must be known.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(Errc::config, "config field '" + path_ + "': expected an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <class T>
  void get(const char* key, T& out) {
    if (!has(key)) return;
    try {
      j_.at(key).get_to(out);
    } catch (const json::exception&) {
      fail(Errc::config, "config field '" + name(key) + "': wrong type");
    }
  }

  const json& at(const char* key) const { return j_.at(key); }
  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) fail(Errc::config, "config field '" + name(key.c_str()) + "': unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_grid(Section& s, const char* key, SegmentGrid& grid) {
  if (!s.has(key)) return;
  Section g(s.at(key), s.name(key));
  g.get("length", grid.length);
  g.get("hop", grid.hop);
  g.finish();
}

void read_dbc(const json& j, DbcParams& p) {
  Section s(j, "dbc");
  read_grid(s, "window", p.window);
  s.get("filter_width", p.filter_width);
  s.get("c_grid", p.c_grid);
  s.get("gamma_grid", p.gamma_grid);
  s.get("folds", p.folds);
  s.get("train_stride", p.train_stride);
  s.get("tolerance", p.tolerance);
  s.finish();
}

void read_asr(const json& j, AsrParams& p) {
  Section s(j, "asr");
  if (s.has("spec")) {
    Section f(s.at("spec"), "asr.spec");
    f.get("frame_len", p.spec.frame_len);
    f.get("hop", p.spec.hop);
    f.get("fft_size", p.spec.fft_size);
    f.finish();
  }
  s.get("states", p.states);
  s.get("mixtures", p.mixtures);
  s.get("background_mixtures", p.background_mixtures);
  s.get("max_iterations", p.max_iterations);
  s.finish();
}

void read_regression(const json& j, RegParams& p) {
  Section s(j, "regression");
  read_grid(s, "segment", p.segment);
  s.get("bg_trees", p.bg_trees);
  s.get("ev_trees", p.ev_trees);
  s.get("reg_trees", p.reg_trees);
  s.get("cv_trees", p.cv_trees);
  s.get("train_stride", p.train_stride);
  s.get("cv_folds", p.cv_folds);
  s.get("theta_grid", p.theta_grid);
  s.get("grid_step", p.grid_step);
  s.get("smooth_width", p.smooth_width);
  s.finish();
}

void read_verifier(const json& j, VerifierParams& p) {
  Section s(j, "verifier");
  s.get("codebook_sizes", p.codebook_sizes);
  s.get("pyramid_levels", p.pyramid_levels);
  s.get("c_grid", p.c_grid);
  s.get("folds", p.folds);
  s.get("tolerance", p.tolerance);
  s.get("codebook_sample", p.codebook_sample);
  s.get("kmeans_iterations", p.kmeans.max_iterations);
  s.finish();
}

void read_match(const json& j, MatchOptions& m) {
  Section s(j, "match");
  std::string rule = m.rule == MatchRule::center ? "center" : "overlap_ratio";
  s.get("rule", rule);
  if (rule == "center")
    m.rule = MatchRule::center;
  else if (rule == "overlap_ratio")
    m.rule = MatchRule::overlap_ratio;
  else
    fail(Errc::config, "config field 'match.rule': expected 'center' or 'overlap_ratio'");
  s.get("min_ratio", m.min_ratio);
  s.finish();
}

void require_positive(bool ok, const std::string& field) {
  if (!ok) fail(Errc::config, "config field '" + field + "': must be positive");
}

std::string fixed3(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

}  // namespace

const char* to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::dbc: return "dbc";
    case DetectorKind::asr: return "asr";
    case DetectorKind::regression: return "regression";
  }
  return "unknown";
}

DetectorKind detector_kind_from_string(const std::string& name) {
  const std::string lower = lowercase(name);
  for (DetectorKind k : kAllDetectorKinds)
    if (lower == to_string(k)) return k;
  fail(Errc::config, "unknown detector kind '" + name + "' (expected dbc, asr, regression)");
}

DetectorKind kind_of(const TrainedDetector& detector) {
  return static_cast<DetectorKind>(detector.index());
}

std::vector<Hypothesis> detect(const TrainedDetector& detector, const AudioSignal& signal) {
  return std::visit(
      [&](const auto& d) -> std::vector<Hypothesis> {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, DbcDetector>)
          return dbc_detect(d, signal);
        else if constexpr (std::is_same_v<T, AsrDetector>)
          return asr_detect(d, signal);
        else
          return reg_detect(d, signal);
      },
      detector);
}

json detector_to_json(const TrainedDetector& detector) {
  return std::visit([&](const auto& d) { return wrap_model(to_string(kind_of(detector)), json(d)); },
                    detector);
}

TrainedDetector detector_from_json(const json& container) {
  const DetectorKind kind = detector_kind_from_string(container_kind(container));
  const json& payload = unwrap_model(container, to_string(kind));
  switch (kind) {
    case DetectorKind::dbc: return payload.get<DbcDetector>();
    case DetectorKind::asr: return payload.get<AsrDetector>();
    case DetectorKind::regression: return payload.get<RegDetector>();
  }
  fail(Errc::parse, "unknown detector kind");
}

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (!corpus_dir) synth.validate();
  if (train_sessions.empty() != test_sessions.empty())
    fail(Errc::config, "config field 'split': give both 'train' and 'test' or neither");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    fail(Errc::config, "config field 'split.train_fraction': must lie in (0, 1)");
  if (detectors.empty()) fail(Errc::config, "config field 'detectors': empty list");
  require_positive(dbc.folds >= 2, "dbc.folds");
  require_positive(dbc.train_stride >= 1, "dbc.train_stride");
  require_positive(dbc.filter_width >= 1 && dbc.filter_width % 2 == 1,
                              "dbc.filter_width (odd)");
  if (dbc.c_grid.empty() || dbc.gamma_grid.empty())
    fail(Errc::config, "config field 'dbc.c_grid/gamma_grid': empty grid");
  require_positive(asr.states >= 1, "asr.states");
  require_positive(asr.mixtures >= 1, "asr.mixtures");
  require_positive(asr.background_mixtures >= 1, "asr.background_mixtures");
  asr.spec.validate();
  require_positive(regression.bg_trees >= 1, "regression.bg_trees");
  require_positive(regression.ev_trees >= 1, "regression.ev_trees");
  require_positive(regression.reg_trees >= 1, "regression.reg_trees");
  require_positive(regression.train_stride >= 1, "regression.train_stride");
  require_positive(regression.cv_folds >= 2, "regression.cv_folds");
  require_positive(regression.smooth_width >= 1, "regression.smooth_width");
  if (regression.theta_grid.empty())
    fail(Errc::config, "config field 'regression.theta_grid': empty grid");
  require_positive(verifier.folds >= 2, "verifier.folds");
  if (verifier.codebook_sizes.empty() || verifier.pyramid_levels.empty() || verifier.c_grid.empty())
    fail(Errc::config, "config field 'verifier': empty search grid");
  if (!(match.min_ratio > 0.0 && match.min_ratio <= 1.0))
    fail(Errc::config, "config field 'match.min_ratio': must lie in (0, 1]");
}

ExperimentConfig paper_scale_config() {
  ExperimentConfig c;
  c.synth = default_synth_config();
  return c;
}

ExperimentConfig desk_scale_config() {
  ExperimentConfig c;
  c.seed = 7;
  c.synth = default_synth_config();
  c.synth.min_event_seconds = 1.0;
  c.synth.max_event_seconds = 2.0;
  c.synth.session_seconds = 120.0;
  c.synth.sessions = 9;
  c.synth.events_per_class = 10;

  c.dbc.train_stride = 3;
  c.dbc.folds = 3;
  c.dbc.c_grid = pow2_grid(-3, 7, 2);
  c.dbc.gamma_grid = pow2_grid(-7, 3, 2);

  c.asr.mixtures = 8;
  c.asr.background_mixtures = 8;

  c.regression.bg_trees = 30;
  c.regression.ev_trees = 30;
  c.regression.reg_trees = 30;
  c.regression.cv_trees = 15;
  c.regression.train_stride = 4;

  c.verifier.codebook_sizes = {50, 150, 250};
  c.verifier.folds = 5;
  c.verifier.c_grid = pow2_grid(-3, 7, 2);
  c.verifier.codebook_sample = 3000;
  c.verifier.kmeans.max_iterations = 30;
  return c;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  Section s(j, "");
  if (s.has("schema_version")) {
    int version = 0;
    s.get("schema_version", version);
    if (version != kConfigSchemaVersion)
      fail(Errc::config, "config field 'schema_version': only version " +
                             std::to_string(kConfigSchemaVersion) + " is supported");
  }
  std::string preset = "desk";
  s.get("preset", preset);
  ExperimentConfig c;
  if (preset == "desk")
    c = desk_scale_config();
  else if (preset == "paper")
    c = paper_scale_config();
  else
    fail(Errc::config, "config field 'preset': expected 'desk' or 'paper'");

  s.get("seed", c.seed);
  if (s.has("synth")) c.synth = synth_config_from_json(s.at("synth"));
  if (s.has("corpus_dir")) {
    std::string dir;
    s.get("corpus_dir", dir);
    c.corpus_dir = dir;
  }
  if (s.has("split")) {
    Section sp(s.at("split"), "split");
    sp.get("train", c.train_sessions);
    sp.get("test", c.test_sessions);
    sp.get("train_fraction", c.train_fraction);
    sp.finish();
  }
  if (s.has("detectors")) {
    std::vector<std::string> names;
    s.get("detectors", names);
    c.detectors.clear();
    for (const auto& n : names) {
      try {
        c.detectors.push_back(detector_kind_from_string(n));
      } catch (const Error& e) {
        fail(Errc::config, std::string("config field 'detectors': ") + e.what());
      }
    }
  }
  if (s.has("verifiers")) {
    std::vector<std::string> names;
    s.get("verifiers", names);
    c.verifiers.clear();
    for (const auto& n : names) {
      try {
        c.verifiers.push_back(verifier_kind_from_string(n));
      } catch (const Error& e) {
        fail(Errc::config, std::string("config field 'verifiers': ") + e.what());
      }
    }
  }
  if (s.has("dbc")) read_dbc(s.at("dbc"), c.dbc);
  if (s.has("asr")) read_asr(s.at("asr"), c.asr);
  if (s.has("regression")) read_regression(s.at("regression"), c.regression);
  if (s.has("verifier")) read_verifier(s.at("verifier"), c.verifier);
  if (s.has("match")) read_match(s.at("match"), c.match);
  s.finish();
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json detectors = json::array(), verifiers = json::array();
  for (auto k : c.detectors) detectors.push_back(to_string(k));
  for (auto k : c.verifiers) verifiers.push_back(to_string(k));
  json split{{"train_fraction", c.train_fraction}};
  if (!c.train_sessions.empty()) {
    split["train"] = c.train_sessions;
    split["test"] = c.test_sessions;
  }
  json j{
      {"schema_version", kConfigSchemaVersion},
      {"seed", c.seed},
      {"split", split},
      {"detectors", detectors},
      {"verifiers", verifiers},
      {"dbc",
       {{"window", c.dbc.window},
        {"filter_width", c.dbc.filter_width},
        {"c_grid", c.dbc.c_grid},
        {"gamma_grid", c.dbc.gamma_grid},
        {"folds", c.dbc.folds},
        {"train_stride", c.dbc.train_stride},
        {"tolerance", c.dbc.tolerance}}},
      {"asr",
       {{"spec", c.asr.spec},
        {"states", c.asr.states},
        {"mixtures", c.asr.mixtures},
        {"background_mixtures", c.asr.background_mixtures},
        {"max_iterations", c.asr.max_iterations}}},
      {"regression",
       {{"segment", c.regression.segment},
        {"bg_trees", c.regression.bg_trees},
        {"ev_trees", c.regression.ev_trees},
        {"reg_trees", c.regression.reg_trees},
        {"cv_trees", c.regression.cv_trees},
        {"train_stride", c.regression.train_stride},
        {"cv_folds", c.regression.cv_folds},
        {"theta_grid", c.regression.theta_grid},
        {"grid_step", c.regression.grid_step},
        {"smooth_width", c.regression.smooth_width}}},
      {"verifier",
       {{"codebook_sizes", c.verifier.codebook_sizes},
        {"pyramid_levels", c.verifier.pyramid_levels},
        {"c_grid", c.verifier.c_grid},
        {"folds", c.verifier.folds},
        {"tolerance", c.verifier.tolerance},
        {"codebook_sample", c.verifier.codebook_sample},
        {"kmeans_iterations", c.verifier.kmeans.max_iterations}}},
      {"match",
       {{"rule", c.match.rule == MatchRule::center ? "center" : "overlap_ratio"},
        {"min_ratio", c.match.min_ratio}}},
  };
  if (c.corpus_dir)
    j["corpus_dir"] = c.corpus_dir->string();
  else
    j["synth"] = to_json(c.synth);
  return j;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  json j;
  try {
    j = load_json(path);
  } catch (const Error& e) {
    fail(Errc::config, std::string("config: ") + e.what());
  }
  return experiment_config_from_json(j);
}

CorpusSplit resolve_split(const ExperimentConfig& config, const Corpus& corpus) {
  CorpusSplit split;
  std::set<std::string> ids;
  for (const auto& s : corpus.sessions) ids.insert(s.audio.session_id);
  if (!config.train_sessions.empty()) {
    for (const auto& id : config.train_sessions) split.train_sessions.insert(id);
    for (const auto& id : config.test_sessions) split.test_sessions.insert(id);
    for (const auto* set : {&split.train_sessions, &split.test_sessions})
      for (const auto& id : *set)
        if (!ids.count(id)) fail(Errc::config, "config field 'split': unknown session '" + id + "'");
  } else {
    if (ids.size() < 2) fail(Errc::config, "corpus needs at least two sessions to split");
    auto n_train = static_cast<std::size_t>(
        std::llround(config.train_fraction * static_cast<double>(ids.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, ids.size() - 1);
    std::size_t i = 0;
    for (const auto& id : ids) (i++ < n_train ? split.train_sessions : split.test_sessions).insert(id);
  }
  split.validate();
  return split;
}

// ---------------------------------------------------------------------------

TrainedDetector train_detector(DetectorKind kind, const SessionList& train, std::size_t n_classes,
                               const ExperimentConfig& config) {
  switch (kind) {
    case DetectorKind::dbc: {
      DbcParams p = config.dbc;
      p.seed = detmath::mix_seed(config.seed, kDbcStream);
      return dbc_train(train, n_classes, p);
    }
    case DetectorKind::asr: {
      AsrParams p = config.asr;
      p.seed = detmath::mix_seed(config.seed, kAsrStream);
      return asr_train(train, n_classes, p);
    }
    case DetectorKind::regression: {
      RegParams p = config.regression;
      p.seed = detmath::mix_seed(config.seed, kRegStream);
      return reg_train(train, n_classes, p);
    }
  }
  fail(Errc::invalid_argument, "unknown detector kind");
}

Verifier train_verifier(VerifierKind kind, const SessionList& train, std::size_t n_classes,
                        const ExperimentConfig& config,
                        std::shared_ptr<const RegDetector> components) {
  VerifierParams p = config.verifier;
  p.seed = detmath::mix_seed(config.seed, kVerifierStream + static_cast<std::uint64_t>(kind));
  return verifier_train(kind, train, n_classes, p, std::move(components));
}

SessionHypotheses detect_sessions(const TrainedDetector& detector, const SessionList& sessions) {
  SessionHypotheses out;
  for (const Session* s : sessions) out.push_back(detect(detector, s->audio));
  return out;
}

SessionHypotheses verify_sessions(const SessionHypotheses& hyps, const SpanClassifier& classify,
                                  const SessionList& sessions, VerifyStats* stats) {
  require(hyps.size() == sessions.size(), Errc::dimension_mismatch,
          "verify: one hypothesis list per session required");
  SessionHypotheses out;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    VerifyStats st;
    out.push_back(verify(hyps[i], classify, sessions[i]->audio, &st));
    if (stats) {
      stats->kept += st.kept;
      stats->rejected += st.rejected;
      stats->unverifiable += st.unverifiable;
    }
  }
  return out;
}

DetectionReport evaluate_sessions(const ClassInventory& classes, const SessionHypotheses& hyps,
                                  const SessionList& sessions, const MatchOptions& match) {
  require(hyps.size() == sessions.size(), Errc::dimension_mismatch,
          "evaluate: one hypothesis list per session required");
  DetectionReport r = make_report(classes);
  for (std::size_t i = 0; i < sessions.size(); ++i) r.add(hyps[i], sessions[i]->events, match);
  r.finalize();
  return r;
}

const MatrixRow& MatrixResult::baseline(DetectorKind detector) const {
  for (const auto& row : baselines)
    if (row.detector == detector) return row;
  fail(Errc::invalid_argument, std::string("no baseline row for detector ") + to_string(detector));
}

double MatrixResult::mean_f1_delta() const {
  if (verified.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& row : verified) sum += row.report.overall.f1 - baseline(row.detector).report.overall.f1;
  return sum / static_cast<double>(verified.size());
}

MatrixResult run_matrix(const Corpus& corpus, const CorpusSplit& split,
                        const ExperimentConfig& config, const ProgressLog& log) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const auto note = [&](const std::string& msg) {
    if (log) log(msg);
  };
  const SessionList train = corpus.select(split.train_sessions);
  const SessionList test = corpus.select(split.test_sessions);
  const std::size_t n_classes = corpus.classes.size();

  std::shared_ptr<const RegDetector> components;
  std::vector<std::pair<DetectorKind, SessionHypotheses>> detected;
  MatrixResult result;
  for (DetectorKind kind : config.detectors) {
    note(std::string("training detector ") + to_string(kind));
    TrainedDetector d = train_detector(kind, train, n_classes, config);
    note(std::string("detecting with ") + to_string(kind));
    SessionHypotheses hyps = detect_sessions(d, test);
    result.baselines.push_back({kind, std::nullopt, evaluate_sessions(corpus.classes, hyps, test, config.match), {}});
    if (kind == DetectorKind::regression)
      components = std::make_shared<const RegDetector>(std::get<RegDetector>(std::move(d)));
    detected.emplace_back(kind, std::move(hyps));
  }
  const bool need_components = std::any_of(config.verifiers.begin(), config.verifiers.end(),
                                           needs_regression_components);
  if (need_components && !components) {
    note("training regression components for the verifiers");
    components = std::make_shared<const RegDetector>(
        std::get<RegDetector>(train_detector(DetectorKind::regression, train, n_classes, config)));
  }

  std::vector<MatrixRow> rows;
  for (VerifierKind vk : config.verifiers) {
    note(std::string("training verifier ") + to_string(vk));
    const Verifier v = train_verifier(vk, train, n_classes, config, components);
    result.verifier_accuracy.emplace_back(vk, verifier_accuracy(v, test));
    const SpanClassifier classify = span_classifier(v);
    for (const auto& [dk, hyps] : detected) {
      MatrixRow row{dk, vk, {}, {}};
      const SessionHypotheses kept = verify_sessions(hyps, classify, test, &row.stats);
      row.report = evaluate_sessions(corpus.classes, kept, test, config.match);
      rows.push_back(std::move(row));
    }
  }
  // Detector-major order.
  for (DetectorKind dk : config.detectors)
    for (const auto& row : rows)
      if (row.detector == dk) result.verified.push_back(row);
  result.seconds = std::chrono::duration<double>(clock::now() - start).count();
  return result;
}

std::string format_matrix(const MatrixResult& result) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "detector" << std::setw(10) << "verifier" << std::setw(8)
     << "F1" << std::setw(8) << "P" << std::setw(8) << "R" << std::setw(8) << "FP"
     << std::setw(9) << "rejected"
     << "delta F1, P, R\n";
  const auto line = [&](const MatrixRow& row) {
    const Scores& s = row.report.overall;
    os << std::left << std::setw(12) << to_string(row.detector) << std::setw(10)
       << (row.verifier ? to_string(*row.verifier) : "-") << std::setw(8) << fixed3(s.f1)
       << std::setw(8) << fixed3(s.precision) << std::setw(8) << fixed3(s.recall) << std::setw(8)
       << s.fp;
    if (!row.verifier) {
      os << std::setw(9) << "-" << "\n";
      return;
    }
    const Scores& b = result.baseline(row.detector).report.overall;
    os << std::setw(9) << row.stats.rejected << format_delta(s.f1 - b.f1) << "  "
       << format_delta(s.precision - b.precision) << "  " << format_delta(s.recall - b.recall)
       << "\n";
  };
  for (const auto& b : result.baselines) {
    line(b);
    for (const auto& row : result.verified)
      if (row.detector == b.detector) line(row);
  }
  if (!result.verifier_accuracy.empty()) {
    os << "\nverifier accuracy on test events:";
    for (const auto& [k, acc] : result.verifier_accuracy) os << "  " << to_string(k) << " " << fixed3(acc);
    os << "\n";
  }
  os << "mean F1 delta over " << result.verified.size()
     << " verified rows: " << format_delta(result.mean_f1_delta()) << "\n";
  return os.str();
}

json to_json(const MatrixResult& result) {
  const auto row_json = [](const MatrixRow& row) {
    json j{{"detector", to_string(row.detector)}, {"report", to_json(row.report)}};
    if (row.verifier) {
      j["verifier"] = to_string(*row.verifier);
      j["verify_stats"] = {{"kept", row.stats.kept},
                           {"rejected", row.stats.rejected},
                           {"unverifiable", row.stats.unverifiable}};
    }
    return j;
  };
  json baselines = json::array(), verified = json::array(), acc = json::object();
  for (const auto& r : result.baselines) baselines.push_back(row_json(r));
  for (const auto& r : result.verified) {
    json j = row_json(r);
    const Scores& b = result.baseline(r.detector).report.overall;
    const Scores& s = r.report.overall;
    j["delta"] = {{"f1", s.f1 - b.f1}, {"precision", s.precision - b.precision},
                  {"recall", s.recall - b.recall}};
    verified.push_back(std::move(j));
  }
  for (const auto& [k, a] : result.verifier_accuracy) acc[to_string(k)] = a;
  return {{"baselines", baselines},
          {"verified", verified},
          {"verifier_accuracy", acc},
          {"mean_f1_delta", result.mean_f1_delta()}};
}

}  // namespace aed
