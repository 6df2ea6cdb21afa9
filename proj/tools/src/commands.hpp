#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "aed/pipeline.hpp"

namespace aedtool {

namespace fs = std::filesystem;

/// Exit codes shared by every command.
enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

struct Options {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> detectors;
  std::vector<std::string> verifiers;
  std::optional<fs::path> baseline;
  std::optional<fs::path> hyps;  // evaluate: explicit hypothesis directory
  fs::path out = ".";
};

/// <root>/{config.json, corpus/, models/, hyps/, reports/}
struct ExperimentDir {
  fs::path root;

  fs::path config_file() const { return root / "config.json"; }
  fs::path corpus() const { return root / "corpus"; }
  fs::path models() const { return root / "models"; }
  fs::path hyps() const { return root / "hyps"; }
  fs::path reports() const { return root / "reports"; }
  fs::path detector_model(aed::DetectorKind k) const;
  fs::path verifier_model(aed::VerifierKind k) const;
  /// "<detector>" or "<detector>.<verifier>".
  static std::string system_name(aed::DetectorKind d, const std::optional<std::string>& verifier);
};

/// Name of the stub verifier that always confirms the detector label.
inline constexpr const char* kOracleVerifier = "oracle";

/// Effective configuration: --config, else <out>/config.json, else the desk
/// preset; --seed overrides the seed.
aed::ExperimentConfig resolve_config(const Options& opt);

void cmd_synth(const Options& opt, std::ostream& log);
void cmd_train(const Options& opt, std::ostream& log);
void cmd_detect(const Options& opt, std::ostream& log);
void cmd_verify(const Options& opt, std::ostream& log);
void cmd_evaluate(const Options& opt, std::ostream& out, std::ostream& log);
void cmd_matrix(const Options& opt, std::ostream& out, std::ostream& log);

/// Parses argv, runs one command and maps errors to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace aedtool
