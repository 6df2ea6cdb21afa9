#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "aed/corpus.hpp"
#include "aed/pipeline.hpp"

namespace aed_test {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("aed_" + tag + "_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

/// Three well-separated classes, three 40 s sessions.
inline aed::SynthConfig tiny_synth_config() {
  aed::SynthConfig c = aed::default_synth_config();
  c.classes = {c.classes[0], c.classes[1], c.classes[2]};
  c.sessions = 3;
  c.events_per_class = 4;
  c.session_seconds = 40.0;
  c.min_event_seconds = 1.0;
  c.max_event_seconds = 2.0;
  return c;
}

/// Small models that train in a few seconds on the tiny corpus.
inline aed::ExperimentConfig tiny_experiment_config() {
  aed::ExperimentConfig c = aed::desk_scale_config();
  c.seed = 3;
  c.synth = tiny_synth_config();
  c.dbc.folds = 2;
  c.dbc.train_stride = 6;
  c.dbc.c_grid = {1.0, 16.0};
  c.dbc.gamma_grid = {0.01, 0.1};
  c.asr.mixtures = 2;
  c.asr.background_mixtures = 2;
  c.asr.max_iterations = 5;
  c.regression.bg_trees = 5;
  c.regression.ev_trees = 5;
  c.regression.reg_trees = 5;
  c.regression.cv_trees = 3;
  c.regression.train_stride = 8;
  c.regression.cv_folds = 2;
  c.verifier.codebook_sizes = {20};
  c.verifier.pyramid_levels = {2};
  c.verifier.folds = 2;
  c.verifier.c_grid = {1.0, 16.0};
  c.verifier.codebook_sample = 500;
  c.verifier.kmeans.max_iterations = 10;
  return c;
}

inline nlohmann::json tiny_config_json() { return aed::to_json(tiny_experiment_config()); }

/// The tiny corpus, generated once per process.
inline const aed::Corpus& tiny_corpus() {
  static const aed::Corpus corpus = aed::synth_corpus(tiny_synth_config(), 3);
  return corpus;
}

inline aed::SessionList tiny_train() { return {&tiny_corpus().sessions[0], &tiny_corpus().sessions[1]}; }
inline aed::SessionList tiny_test() { return {&tiny_corpus().sessions[2]}; }

}  // namespace aed_test
