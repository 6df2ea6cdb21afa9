#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include "aed/detectors/common.hpp"
#include "aed/error.hpp"
#include "aed/serialization.hpp"

namespace aedtool {

using aed::DetectorKind;
using aed::Errc;
using aed::VerifierKind;
using nlohmann::json;

fs::path ExperimentDir::detector_model(DetectorKind k) const {
  return models() / (std::string(aed::to_string(k)) + ".json");
}

fs::path ExperimentDir::verifier_model(VerifierKind k) const {
  return models() / (std::string("verifier_") + aed::to_string(k) + ".json");
}

std::string ExperimentDir::system_name(DetectorKind d, const std::optional<std::string>& verifier) {
  std::string name = aed::to_string(d);
  if (verifier) name += "." + *verifier;
  return name;
}

namespace {

// A loaded experiment: effective config, corpus and split.
struct Workspace {
  ExperimentDir dir;
  aed::ExperimentConfig config;
  aed::Corpus corpus;
  aed::CorpusSplit split;

  aed::SessionList train() const { return corpus.select(split.train_sessions); }
  aed::SessionList test() const { return corpus.select(split.test_sessions); }
};

fs::path corpus_location(const ExperimentDir& dir, const aed::ExperimentConfig& cfg) {
  return cfg.corpus_dir ? *cfg.corpus_dir : dir.corpus();
}

Workspace open_workspace(const Options& opt) {
  Workspace ws{ExperimentDir{opt.out}, resolve_config(opt), {}, {}};
  const fs::path where = corpus_location(ws.dir, ws.config);
  if (!fs::exists(where / "classes.txt"))
    aed::fail(Errc::io, "no corpus at " + where.string() + " (run 'aedtool synth' first)");
  ws.corpus = aed::read_corpus(where);
  ws.split = aed::resolve_split(ws.config, ws.corpus);
  return ws;
}

std::vector<DetectorKind> chosen_detectors(const Options& opt, const aed::ExperimentConfig& cfg) {
  if (opt.detectors.empty()) return cfg.detectors;
  std::vector<DetectorKind> out;
  for (const auto& n : opt.detectors) out.push_back(aed::detector_kind_from_string(n));
  return out;
}

std::vector<std::string> chosen_verifiers(const Options& opt, const aed::ExperimentConfig& cfg) {
  if (!opt.verifiers.empty()) {
    for (const auto& n : opt.verifiers)
      if (n != kOracleVerifier) aed::verifier_kind_from_string(n);
    return opt.verifiers;
  }
  std::vector<std::string> out;
  for (VerifierKind k : cfg.verifiers) out.emplace_back(aed::to_string(k));
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) aed::fail(Errc::io, "cannot write " + path.string());
  out << text;
}

void update_manifest(const Workspace& ws, const std::string& key, const fs::path& file) {
  const fs::path path = ws.dir.models() / "manifest.json";
  json m = fs::exists(path) ? aed::load_json(path) : json::object();
  m["format_version"] = aed::kFormatVersion;
  m["seed"] = ws.config.seed;
  m["classes"] = ws.corpus.classes.names();
  m["train_sessions"] = ws.split.train_sessions;
  m["models"][key] = file.filename().string();
  aed::save_json(path, m);
}

aed::TrainedDetector load_detector(const Workspace& ws, DetectorKind k) {
  const fs::path path = ws.dir.detector_model(k);
  if (!fs::exists(path))
    aed::fail(Errc::io, "missing model file " + path.string() + " (run 'aedtool train')");
  return aed::detector_from_json(aed::load_json(path));
}

std::shared_ptr<const aed::RegDetector> regression_components(const Workspace& ws,
                                                              std::ostream& log) {
  const fs::path path = ws.dir.detector_model(DetectorKind::regression);
  if (!fs::exists(path)) {
    log << "training regression detector (needed by the verifier)\n";
    const auto d = aed::train_detector(DetectorKind::regression, ws.train(),
                                       ws.corpus.classes.size(), ws.config);
    aed::save_json(path, aed::detector_to_json(d));
    update_manifest(ws, "regression", path);
  }
  return std::make_shared<const aed::RegDetector>(
      std::get<aed::RegDetector>(aed::detector_from_json(aed::load_json(path))));
}

aed::SessionHypotheses read_system(const Workspace& ws, const fs::path& dir) {
  aed::SessionHypotheses hyps;
  for (const aed::Session* s : ws.test()) {
    const fs::path file = dir / (s->audio.session_id + ".tsv");
    if (!fs::exists(file))
      aed::fail(Errc::io, "missing hypothesis file " + file.string());
    hyps.push_back(aed::read_hypotheses(file, ws.corpus.classes));
  }
  return hyps;
}

void write_system(const Workspace& ws, const std::string& name, const aed::SessionHypotheses& hyps) {
  const auto test = ws.test();
  fs::create_directories(ws.dir.hyps() / name);
  for (std::size_t i = 0; i < test.size(); ++i)
    aed::write_hypotheses(ws.dir.hyps() / name / (test[i]->audio.session_id + ".tsv"), hyps[i],
                          ws.corpus.classes);
}

void train_into(const Workspace& ws, const std::vector<DetectorKind>& detectors,
                const std::vector<VerifierKind>& verifiers, bool skip_existing, std::ostream& log) {
  const auto train = ws.train();
  const std::size_t n = ws.corpus.classes.size();
  for (DetectorKind k : detectors) {
    const fs::path path = ws.dir.detector_model(k);
    if (skip_existing && fs::exists(path)) continue;
    log << "training detector " << aed::to_string(k) << "\n";
    aed::save_json(path, aed::detector_to_json(aed::train_detector(k, train, n, ws.config)));
    update_manifest(ws, aed::to_string(k), path);
  }
  for (VerifierKind k : verifiers) {
    const fs::path path = ws.dir.verifier_model(k);
    if (skip_existing && fs::exists(path)) continue;
    std::shared_ptr<const aed::RegDetector> components;
    if (aed::needs_regression_components(k)) components = regression_components(ws, log);
    log << "training verifier " << aed::to_string(k) << "\n";
    const aed::Verifier v = aed::train_verifier(k, train, n, ws.config, components);
    const std::string ref =
        components ? ws.dir.detector_model(DetectorKind::regression).filename().string() : "";
    aed::save_verifier(path, v, ref);
    update_manifest(ws, std::string("verifier_") + aed::to_string(k), path);
    log << "  cross-validated accuracy " << v.cv_accuracy;
    if (k == VerifierKind::bow || k == VerifierKind::pbow) log << ", codebook " << v.codebook.size();
    if (k == VerifierKind::pbow) log << ", levels " << v.levels;
    log << "\n";
  }
}

void detect_into(const Workspace& ws, DetectorKind k, std::ostream& log) {
  const auto detector = load_detector(ws, k);
  log << "detecting with " << aed::to_string(k) << "\n";
  write_system(ws, ExperimentDir::system_name(k, std::nullopt),
               aed::detect_sessions(detector, ws.test()));
}

// Classifier stub that confirms every hypothesis of `hyps`, in order.
aed::SpanClassifier oracle_classifier(const std::vector<aed::Hypothesis>& hyps) {
  auto next = std::make_shared<std::size_t>(0);
  return [&hyps, next](const aed::AudioSignal&, double, double) -> std::optional<int> {
    return hyps.at((*next)++).label;
  };
}

aed::VerifyStats verify_into(const Workspace& ws, DetectorKind d, const std::string& verifier,
                             std::ostream& log) {
  const auto input = read_system(ws, ws.dir.hyps() / ExperimentDir::system_name(d, std::nullopt));
  const auto test = ws.test();
  aed::VerifyStats stats;
  aed::SessionHypotheses output;
  if (verifier == kOracleVerifier) {
    for (std::size_t i = 0; i < test.size(); ++i)
      output.push_back(aed::verify(input[i], oracle_classifier(input[i]), test[i]->audio, &stats));
  } else {
    const VerifierKind vk = aed::verifier_kind_from_string(verifier);
    const fs::path path = ws.dir.verifier_model(vk);
    if (!fs::exists(path))
      aed::fail(Errc::io, "missing model file " + path.string() + " (run 'aedtool train')");
    const aed::Verifier v = aed::load_verifier(path);
    output = aed::verify_sessions(input, aed::span_classifier(v), test, &stats);
  }
  write_system(ws, ExperimentDir::system_name(d, verifier), output);
  log << "verified " << aed::to_string(d) << " with " << verifier << ": kept " << stats.kept
      << ", rejected " << stats.rejected << ", too short to verify " << stats.unverifiable << "\n";
  return stats;
}

aed::DetectionReport evaluate_into(const Workspace& ws, const std::string& name,
                                   const fs::path& hyps_dir, const aed::DetectionReport* baseline,
                                   std::ostream& out) {
  const auto report =
      aed::evaluate_sessions(ws.corpus.classes, read_system(ws, hyps_dir), ws.test(), ws.config.match);
  json j = aed::to_json(report);
  if (baseline) {
    const auto delta = aed::compare_reports(report, *baseline);
    j["delta"] = {{"f1", delta.overall.f1},
                  {"precision", delta.overall.precision},
                  {"recall", delta.overall.recall}};
  }
  aed::save_json(ws.dir.reports() / (name + ".json"), j);
  const std::string text = aed::format_report(report, baseline);
  write_text(ws.dir.reports() / (name + ".txt"), text);
  out << name << "\n" << text << "\n";
  return report;
}

std::vector<VerifierKind> to_kinds(const std::vector<std::string>& names) {
  std::vector<VerifierKind> out;
  for (const auto& n : names) {
    if (n == kOracleVerifier)
      aed::fail(Errc::config, "the oracle verifier is only available to 'aedtool verify'");
    out.push_back(aed::verifier_kind_from_string(n));
  }
  return out;
}

}  // namespace

aed::ExperimentConfig resolve_config(const Options& opt) {
  aed::ExperimentConfig cfg;
  const ExperimentDir dir{opt.out};
  if (opt.config)
    cfg = aed::load_experiment_config(*opt.config);
  else if (fs::exists(dir.config_file()))
    cfg = aed::load_experiment_config(dir.config_file());
  else
    cfg = aed::desk_scale_config();
  if (opt.seed) cfg.seed = *opt.seed;
  return cfg;
}

void cmd_synth(const Options& opt, std::ostream& log) {
  const aed::ExperimentConfig cfg = resolve_config(opt);
  if (cfg.corpus_dir)
    aed::fail(Errc::config, "config field 'corpus_dir': synth writes its own corpus; remove it");
  const ExperimentDir dir{opt.out};
  const aed::Corpus corpus = aed::synth_corpus(cfg.synth, cfg.seed);
  aed::write_corpus(dir.corpus(), corpus);
  aed::save_json(dir.config_file(), aed::to_json(cfg));
  log << "wrote " << corpus.sessions.size() << " sessions (" << corpus.classes.size()
      << " classes, seed " << cfg.seed << ") to " << dir.corpus().string() << "\n";
}

void cmd_train(const Options& opt, std::ostream& log) {
  const Workspace ws = open_workspace(opt);
  std::vector<DetectorKind> detectors;
  std::vector<VerifierKind> verifiers;
  if (opt.detectors.empty() && opt.verifiers.empty()) {
    detectors = ws.config.detectors;
    verifiers = ws.config.verifiers;
  } else {
    for (const auto& n : opt.detectors) detectors.push_back(aed::detector_kind_from_string(n));
    verifiers = to_kinds(opt.verifiers);
  }
  aed::save_json(ws.dir.config_file(), aed::to_json(ws.config));
  train_into(ws, detectors, verifiers, false, log);
}

void cmd_detect(const Options& opt, std::ostream& log) {
  const Workspace ws = open_workspace(opt);
  for (DetectorKind k : chosen_detectors(opt, ws.config)) detect_into(ws, k, log);
}

void cmd_verify(const Options& opt, std::ostream& log) {
  const Workspace ws = open_workspace(opt);
  for (DetectorKind d : chosen_detectors(opt, ws.config))
    for (const auto& v : chosen_verifiers(opt, ws.config)) verify_into(ws, d, v, log);
}

void cmd_evaluate(const Options& opt, std::ostream& out, std::ostream& /*log*/) {
  const Workspace ws = open_workspace(opt);
  std::optional<aed::DetectionReport> baseline;
  if (opt.baseline) baseline = aed::report_from_json(aed::load_json(*opt.baseline));
  const aed::DetectionReport* base = baseline ? &*baseline : nullptr;
  if (opt.hyps) {
    evaluate_into(ws, opt.hyps->filename().string(), *opt.hyps, base, out);
    return;
  }
  for (DetectorKind d : chosen_detectors(opt, ws.config)) {
    if (opt.verifiers.empty()) {
      const std::string name = ExperimentDir::system_name(d, std::nullopt);
      evaluate_into(ws, name, ws.dir.hyps() / name, base, out);
    }
    for (const auto& v : opt.verifiers) {
      const std::string name = ExperimentDir::system_name(d, v);
      evaluate_into(ws, name, ws.dir.hyps() / name, base, out);
    }
  }
}

void cmd_matrix(const Options& opt, std::ostream& out, std::ostream& log) {
  aed::ExperimentConfig cfg = resolve_config(opt);
  const ExperimentDir dir{opt.out};
  if (!cfg.corpus_dir && !fs::exists(dir.corpus() / "classes.txt")) cmd_synth(opt, log);
  const Workspace ws = open_workspace(opt);
  const std::vector<DetectorKind> detectors = chosen_detectors(opt, ws.config);
  const std::vector<VerifierKind> verifiers = to_kinds(chosen_verifiers(opt, ws.config));
  aed::save_json(ws.dir.config_file(), aed::to_json(ws.config));
  train_into(ws, detectors, verifiers, true, log);

  std::ostringstream sink;
  aed::MatrixResult result;
  for (DetectorKind d : detectors) {
    detect_into(ws, d, log);
    const std::string name = ExperimentDir::system_name(d, std::nullopt);
    result.baselines.push_back(
        {d, std::nullopt, evaluate_into(ws, name, ws.dir.hyps() / name, nullptr, sink), {}});
  }
  for (DetectorKind d : detectors)
    for (VerifierKind v : verifiers) {
      aed::MatrixRow row{d, v, {}, {}};
      row.stats = verify_into(ws, d, aed::to_string(v), log);
      const std::string name = ExperimentDir::system_name(d, std::string(aed::to_string(v)));
      row.report = evaluate_into(ws, name, ws.dir.hyps() / name, &result.baseline(d).report, sink);
      result.verified.push_back(std::move(row));
    }
  for (VerifierKind v : verifiers)
    result.verifier_accuracy.emplace_back(
        v, aed::verifier_accuracy(aed::load_verifier(ws.dir.verifier_model(v)), ws.test()));

  const std::string table = aed::format_matrix(result);
  write_text(ws.dir.reports() / "matrix.txt", table);
  aed::save_json(ws.dir.reports() / "matrix.json", aed::to_json(result));
  out << table;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audio event detection with hypothesis verification", "aedtool"};
  app.require_subcommand(1);

  Options opt;
  std::string config, baseline, hyps, out_dir = ".";
  std::uint64_t seed = 0;
  const auto common = [&](CLI::App* sc) {
    sc->add_option("--config", config, "Experiment config (JSON)");
    sc->add_option("--seed", seed, "Seed (overrides the config)");
    sc->add_option("--out", out_dir, "Experiment directory")->capture_default_str();
  };
  CLI::App* synth = app.add_subcommand("synth", "Synthesize a corpus into <out>/corpus");
  CLI::App* train = app.add_subcommand("train", "Train detectors and verifiers into <out>/models");
  CLI::App* detect = app.add_subcommand("detect", "Write detector hypotheses for the test sessions");
  CLI::App* verify = app.add_subcommand("verify", "Filter hypotheses with a verifier");
  CLI::App* evaluate = app.add_subcommand("evaluate", "Score hypotheses against the references");
  CLI::App* matrix =
      app.add_subcommand("matrix", "Run every detector with and without every verifier");
  for (CLI::App* sc : {synth, train, detect, verify, evaluate, matrix}) common(sc);
  for (CLI::App* sc : {train, detect, verify, evaluate, matrix})
    sc->add_option("--detector", opt.detectors, "dbc | asr | regression (repeatable)");
  for (CLI::App* sc : {train, verify, evaluate, matrix})
    sc->add_option("--verifier", opt.verifiers, "bow | pbow | bor | hodw | bor+hodw (repeatable)");
  evaluate->add_option("--baseline", baseline, "Report (JSON) to print deltas against");
  evaluate->add_option("--hyps", hyps, "Hypothesis directory to score");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  for (CLI::App* sc : {synth, train, detect, verify, evaluate, matrix})
    if (sc->parsed() && sc->count("--seed") > 0) opt.seed = seed;
  if (!config.empty()) opt.config = config;
  if (!baseline.empty()) opt.baseline = baseline;
  if (!hyps.empty()) opt.hyps = hyps;
  opt.out = out_dir;

  try {
    if (synth->parsed()) cmd_synth(opt, err);
    if (train->parsed()) cmd_train(opt, err);
    if (detect->parsed()) cmd_detect(opt, err);
    if (verify->parsed()) cmd_verify(opt, err);
    if (evaluate->parsed()) cmd_evaluate(opt, out, err);
    if (matrix->parsed()) cmd_matrix(opt, out, err);
  } catch (const aed::Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == Errc::config || e.code() == Errc::invalid_argument ? kUsage : kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}

}  // namespace aedtool
