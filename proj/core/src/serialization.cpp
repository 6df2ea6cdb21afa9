#include "aed/serialization.hpp"

#include <fstream>
#include <sstream>

#include "aed/error.hpp"

namespace aed {

using nlohmann::json;

namespace {

template <class T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    fail(Errc::parse, std::string("model file: missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(Errc::parse, std::string("model file: field '") + key + "': " + e.what());
  }
}

const char* kernel_name(KernelKind k) { return to_string(k); }

KernelKind kernel_from_name(const std::string& s) {
  if (s == "rbf") return KernelKind::rbf;
  if (s == "chi2") return KernelKind::chi2;
  if (s == "combined") return KernelKind::combined;
  fail(Errc::parse, "model file: unknown kernel '" + s + "'");
}

}  // namespace

void to_json(json& j, const Codebook& v) { j = json{{"centroids", v.centroids}}; }
void from_json(const json& j, Codebook& v) { v.centroids = field<Matrix>(j, "centroids"); }

void to_json(json& j, const KernelSpec& v) {
  j = json{{"kind", kernel_name(v.kind)}};
  switch (v.kind) {
    case KernelKind::rbf: j["gamma"] = v.gamma; break;
    case KernelKind::chi2: j["a"] = v.a_phi; break;
    case KernelKind::combined:
      j["a_phi"] = v.a_phi;
      j["a_varphi"] = v.a_varphi;
      j["split"] = v.split;
      break;
  }
}

void from_json(const json& j, KernelSpec& v) {
  switch (kernel_from_name(field<std::string>(j, "kind"))) {
    case KernelKind::rbf: v = KernelSpec::rbf(field<double>(j, "gamma")); break;
    case KernelKind::chi2: v = KernelSpec::chi2(field<double>(j, "a")); break;
    case KernelKind::combined:
      v = KernelSpec::combined(field<double>(j, "a_phi"), field<double>(j, "a_varphi"),
                               field<std::size_t>(j, "split"));
      break;
  }
}

void to_json(json& j, const SvmModel& v) {
  json machines = json::array();
  for (const auto& m : v.machines)
    machines.push_back({{"pos", m.pos}, {"neg", m.neg}, {"sv", m.sv}, {"coef", m.coef},
                        {"bias", m.bias}});
  j = json{{"kernel", v.kernel}, {"classes", v.classes}, {"support", v.support},
           {"machines", machines}, {"c_reg", v.c_reg}};
}

void from_json(const json& j, SvmModel& v) {
  v.kernel = field<KernelSpec>(j, "kernel");
  v.classes = field<std::vector<int>>(j, "classes");
  v.support = field<Matrix>(j, "support");
  v.c_reg = field<double>(j, "c_reg");
  v.machines.clear();
  const std::size_t k = v.classes.size();
  for (const auto& m : field<json>(j, "machines")) {
    PairMachine pm;
    pm.pos = field<int>(m, "pos");
    pm.neg = field<int>(m, "neg");
    pm.sv = field<std::vector<std::size_t>>(m, "sv");
    pm.coef = field<std::vector<double>>(m, "coef");
    pm.bias = field<double>(m, "bias");
    require(pm.pos >= 0 && pm.neg >= 0 && static_cast<std::size_t>(pm.pos) < k &&
                static_cast<std::size_t>(pm.neg) < k && pm.sv.size() == pm.coef.size(),
            Errc::parse, "model file: malformed SVM machine");
    for (std::size_t s : pm.sv)
      require(s < v.support.size(), Errc::parse, "model file: support index out of range");
    v.machines.push_back(std::move(pm));
  }
  require(v.machines.size() == k * (k - 1) / 2, Errc::parse,
          "model file: SVM needs one machine per class pair");
}

void to_json(json& j, const SvmSelection& v) {
  j = json{{"c_reg", v.c_reg}, {"gamma", v.gamma}, {"accuracy", v.accuracy},
           {"candidates", v.candidates}};
}

void from_json(const json& j, SvmSelection& v) {
  v.c_reg = field<double>(j, "c_reg");
  v.gamma = field<double>(j, "gamma");
  v.accuracy = field<double>(j, "accuracy");
  v.candidates = field<std::size_t>(j, "candidates");
}

// Nodes as parallel arrays to keep forest files compact.
void to_json(json& j, const Tree& v) {
  std::vector<int> feature, left, right, value;
  std::vector<double> threshold;
  for (const auto& n : v.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  j = json{{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right},
           {"value", value},     {"values", v.values},     {"value_dim", v.value_dim}};
}

void from_json(const json& j, Tree& v) {
  const auto feature = field<std::vector<int>>(j, "feature");
  const auto threshold = field<std::vector<double>>(j, "threshold");
  const auto left = field<std::vector<int>>(j, "left");
  const auto right = field<std::vector<int>>(j, "right");
  const auto value = field<std::vector<int>>(j, "value");
  v.values = field<std::vector<double>>(j, "values");
  v.value_dim = field<int>(j, "value_dim");
  const std::size_t n = feature.size();
  require(threshold.size() == n && left.size() == n && right.size() == n && value.size() == n &&
              n > 0 && v.value_dim > 0,
          Errc::parse, "model file: malformed tree");
  v.nodes.resize(n);
  const auto in_range = [n](int i) { return i > 0 && static_cast<std::size_t>(i) < n; };
  for (std::size_t i = 0; i < n; ++i) {
    v.nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i]};
    if (feature[i] >= 0)
      require(in_range(left[i]) && in_range(right[i]), Errc::parse,
              "model file: tree child index out of range");
    else
      require(value[i] >= 0 &&
                  static_cast<std::size_t>(value[i]) + static_cast<std::size_t>(v.value_dim) <=
                      v.values.size(),
              Errc::parse, "model file: tree leaf offset out of range");
  }
}

void to_json(json& j, const ForestCls& v) {
  j = json{{"n_classes", v.n_classes}, {"n_features", v.n_features}, {"trees", v.trees}};
}

void from_json(const json& j, ForestCls& v) {
  v.n_classes = field<int>(j, "n_classes");
  v.n_features = field<int>(j, "n_features");
  v.trees = field<std::vector<Tree>>(j, "trees");
}

void to_json(json& j, const ForestReg& v) {
  j = json{{"n_features", v.n_features}, {"trees", v.trees}};
}

void from_json(const json& j, ForestReg& v) {
  v.n_features = field<int>(j, "n_features");
  v.trees = field<std::vector<Tree>>(j, "trees");
}

void to_json(json& j, const DiagGmm& v) {
  j = json{{"weights", v.weights}, {"means", v.means}, {"variances", v.variances}};
}

void from_json(const json& j, DiagGmm& v) {
  v.weights = field<Vector>(j, "weights");
  v.means = field<Matrix>(j, "means");
  v.variances = field<Matrix>(j, "variances");
  require(v.means.size() == v.weights.size() && v.variances.size() == v.weights.size(),
          Errc::parse, "model file: malformed mixture");
}

void to_json(json& j, const HmmModel& v) {
  j = json{{"self", v.self}, {"states", v.states}, {"log_likelihoods", v.log_likelihoods}};
}

void from_json(const json& j, HmmModel& v) {
  v.self = field<Vector>(j, "self");
  v.states = field<std::vector<DiagGmm>>(j, "states");
  v.log_likelihoods = field<Vector>(j, "log_likelihoods");
  require(v.self.size() == v.states.size() && !v.states.empty(), Errc::parse,
          "model file: malformed HMM");
}

void to_json(json& j, const SegmentGrid& v) { j = json{{"length", v.length}, {"hop", v.hop}}; }
void from_json(const json& j, SegmentGrid& v) {
  v.length = field<double>(j, "length");
  v.hop = field<double>(j, "hop");
}

void to_json(json& j, const FrameSpec& v) {
  j = json{{"frame_len", v.frame_len}, {"hop", v.hop}, {"fft_size", v.fft_size}};
}
void from_json(const json& j, FrameSpec& v) {
  v.frame_len = field<double>(j, "frame_len");
  v.hop = field<double>(j, "hop");
  v.fft_size = field<int>(j, "fft_size");
  v.validate();
}

void to_json(json& j, const Standardizer& v) { j = json{{"mean", v.mean}, {"scale", v.scale}}; }
void from_json(const json& j, Standardizer& v) {
  v.mean = field<Vector>(j, "mean");
  v.scale = field<Vector>(j, "scale");
}

void to_json(json& j, const DbcDetector& v) {
  const auto& p = v.params;
  j = json{{"params",
            {{"window", p.window},
             {"filter_width", p.filter_width},
             {"c_grid", p.c_grid},
             {"gamma_grid", p.gamma_grid},
             {"folds", p.folds},
             {"train_stride", p.train_stride},
             {"tolerance", p.tolerance},
             {"seed", p.seed}}},
           {"n_classes", v.n_classes},
           {"scaler", v.scaler},
           {"binary", v.binary},
           {"events", v.events},
           {"min_duration", v.min_duration},
           {"binary_selection", v.binary_selection},
           {"event_selection", v.event_selection}};
}

void from_json(const json& j, DbcDetector& v) {
  const json& p = field<json>(j, "params");
  v.params.window = field<SegmentGrid>(p, "window");
  v.params.filter_width = field<int>(p, "filter_width");
  v.params.c_grid = field<std::vector<double>>(p, "c_grid");
  v.params.gamma_grid = field<std::vector<double>>(p, "gamma_grid");
  v.params.folds = field<int>(p, "folds");
  v.params.train_stride = field<std::size_t>(p, "train_stride");
  v.params.tolerance = field<double>(p, "tolerance");
  v.params.seed = field<std::uint64_t>(p, "seed");
  v.n_classes = field<std::size_t>(j, "n_classes");
  v.scaler = field<Standardizer>(j, "scaler");
  v.binary = field<SvmModel>(j, "binary");
  v.events = field<SvmModel>(j, "events");
  v.min_duration = field<Vector>(j, "min_duration");
  v.binary_selection = field<SvmSelection>(j, "binary_selection");
  v.event_selection = field<SvmSelection>(j, "event_selection");
}

void to_json(json& j, const AsrDetector& v) {
  const auto& p = v.params;
  j = json{{"params",
            {{"spec", p.spec},
             {"states", p.states},
             {"mixtures", p.mixtures},
             {"background_mixtures", p.background_mixtures},
             {"max_iterations", p.max_iterations},
             {"seed", p.seed}}},
           {"events", v.events},
           {"background", v.background}};
}

void from_json(const json& j, AsrDetector& v) {
  const json& p = field<json>(j, "params");
  v.params.spec = field<FrameSpec>(p, "spec");
  v.params.states = field<int>(p, "states");
  v.params.mixtures = field<int>(p, "mixtures");
  v.params.background_mixtures = field<int>(p, "background_mixtures");
  v.params.max_iterations = field<int>(p, "max_iterations");
  v.params.seed = field<std::uint64_t>(p, "seed");
  v.events = field<std::vector<HmmModel>>(j, "events");
  v.background = field<HmmModel>(j, "background");
}

void to_json(json& j, const RegDetector& v) {
  const auto& p = v.params;
  j = json{{"params",
            {{"segment", p.segment},
             {"bg_trees", p.bg_trees},
             {"ev_trees", p.ev_trees},
             {"reg_trees", p.reg_trees},
             {"cv_trees", p.cv_trees},
             {"train_stride", p.train_stride},
             {"cv_folds", p.cv_folds},
             {"theta_grid", p.theta_grid},
             {"grid_step", p.grid_step},
             {"smooth_width", p.smooth_width},
             {"seed", p.seed}}},
           {"n_classes", v.n_classes},
           {"m_bg", v.bg},
           {"m_ev", v.ev},
           {"forests", v.forests},
           {"theta", v.theta},
           {"theta_fraction", v.theta_fraction},
           {"theta_scale", v.theta_scale}};
}

void from_json(const json& j, RegDetector& v) {
  const json& p = field<json>(j, "params");
  v.params.segment = field<SegmentGrid>(p, "segment");
  v.params.bg_trees = field<int>(p, "bg_trees");
  v.params.ev_trees = field<int>(p, "ev_trees");
  v.params.reg_trees = field<int>(p, "reg_trees");
  v.params.cv_trees = field<int>(p, "cv_trees");
  v.params.train_stride = field<std::size_t>(p, "train_stride");
  v.params.cv_folds = field<int>(p, "cv_folds");
  v.params.theta_grid = field<std::vector<double>>(p, "theta_grid");
  v.params.grid_step = field<double>(p, "grid_step");
  v.params.smooth_width = field<int>(p, "smooth_width");
  v.params.seed = field<std::uint64_t>(p, "seed");
  v.n_classes = field<std::size_t>(j, "n_classes");
  v.bg = field<ForestCls>(j, "m_bg");
  v.ev = field<ForestCls>(j, "m_ev");
  v.forests = field<std::vector<ForestReg>>(j, "forests");
  v.theta = field<Vector>(j, "theta");
  v.theta_fraction = field<Vector>(j, "theta_fraction");
  v.theta_scale = field<Vector>(j, "theta_scale");
  require(v.forests.size() == v.n_classes && v.theta.size() == v.n_classes, Errc::parse,
          "model file: regression detector needs one forest and one threshold per class");
}

json wrap_model(std::string_view kind, json payload) {
  return json{{"format_version", kFormatVersion}, {"kind", kind}, {"model", std::move(payload)}};
}

std::string container_kind(const json& container) {
  const int version = field<int>(container, "format_version");
  if (version != kFormatVersion)
    fail(Errc::parse, "model file: format_version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kFormatVersion) + ")");
  return field<std::string>(container, "kind");
}

const json& unwrap_model(const json& container, std::string_view kind) {
  const std::string found = container_kind(container);
  if (found != kind)
    fail(Errc::parse, "model file holds a '" + found + "' model, expected '" +
                          std::string(kind) + "'");
  return container.at("model");
}

json verifier_to_json(const Verifier& v, const std::string& components_file) {
  json candidates = json::array();
  for (const auto& c : v.candidates)
    candidates.push_back({{"codebook_size", c.codebook_size},
                          {"levels", c.levels},
                          {"c_reg", c.c_reg},
                          {"accuracy", c.accuracy}});
  json j{{"kind", to_string(v.kind)},
         {"n_classes", v.n_classes},
         {"svm", v.svm},
         {"candidates", candidates},
         {"cv_accuracy", v.cv_accuracy}};
  if (v.kind == VerifierKind::bow || v.kind == VerifierKind::pbow) {
    j["codebook"] = v.codebook;
    j["codebook_size"] = v.codebook.size();
    j["levels"] = v.levels;
  }
  if (needs_regression_components(v.kind)) {
    require(!components_file.empty(), Errc::invalid_argument,
            "verifier: a regression model file reference is required");
    j["components_file"] = components_file;
  }
  if (!v.max_phi.empty()) j["max_phi"] = v.max_phi;
  return j;
}

Verifier verifier_from_json(const json& payload, std::shared_ptr<const RegDetector> components) {
  Verifier v;
  v.kind = verifier_kind_from_string(field<std::string>(payload, "kind"));
  v.n_classes = field<std::size_t>(payload, "n_classes");
  v.svm = field<SvmModel>(payload, "svm");
  v.cv_accuracy = field<double>(payload, "cv_accuracy");
  for (const auto& c : field<json>(payload, "candidates"))
    v.candidates.push_back({field<int>(c, "codebook_size"), field<int>(c, "levels"),
                            field<double>(c, "c_reg"), field<double>(c, "accuracy")});
  if (v.kind == VerifierKind::bow || v.kind == VerifierKind::pbow) {
    v.codebook = field<Codebook>(payload, "codebook");
    v.levels = field<int>(payload, "levels");
  }
  if (payload.contains("max_phi")) v.max_phi = field<Vector>(payload, "max_phi");
  if (needs_regression_components(v.kind)) {
    if (!components)
      fail(Errc::missing_component, std::string("verifier '") + to_string(v.kind) +
                                        "' needs the regression detector model");
    require(components->n_classes == v.n_classes, Errc::config,
            "verifier and regression detector disagree on the class count");
    v.components = std::move(components);
  }
  return v;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

void save_json(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out << dump_json(j);
  if (!out) fail(Errc::io, "write failed: " + path.string());
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    fail(Errc::parse, path.string() + ": " + e.what());
  }
}

void save_verifier(const std::filesystem::path& path, const Verifier& v,
                   const std::string& components_file) {
  save_json(path, wrap_model("verifier", verifier_to_json(v, components_file)));
}

Verifier load_verifier(const std::filesystem::path& path) {
  const json container = load_json(path);
  const json& payload = unwrap_model(container, "verifier");
  std::shared_ptr<const RegDetector> components;
  if (payload.contains("components_file")) {
    const auto ref = path.parent_path() / field<std::string>(payload, "components_file");
    components = std::make_shared<RegDetector>(
        unwrap_model(load_json(ref), "regression").get<RegDetector>());
  }
  return verifier_from_json(payload, std::move(components));
}

}  // namespace aed
