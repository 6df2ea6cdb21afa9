#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "aed/detectors/asr.hpp"
#include "aed/detectors/dbc.hpp"
#include "aed/detectors/regression.hpp"
#include "aed/learners/forest.hpp"
#include "aed/learners/hmm.hpp"
#include "aed/learners/kmeans.hpp"
#include "aed/learners/svm.hpp"
#include "aed/verifiers.hpp"

namespace aed {

/// Version of the model container written by this library.
inline constexpr int kFormatVersion = 1;

// nlohmann adapters (found by ADL through `json::get<T>()` and `json(x)`).
void to_json(nlohmann::json& j, const Codebook& v);
void from_json(const nlohmann::json& j, Codebook& v);
void to_json(nlohmann::json& j, const KernelSpec& v);
void from_json(const nlohmann::json& j, KernelSpec& v);
void to_json(nlohmann::json& j, const SvmModel& v);
void from_json(const nlohmann::json& j, SvmModel& v);
void to_json(nlohmann::json& j, const SvmSelection& v);
void from_json(const nlohmann::json& j, SvmSelection& v);
void to_json(nlohmann::json& j, const Tree& v);
void from_json(const nlohmann::json& j, Tree& v);
void to_json(nlohmann::json& j, const ForestCls& v);
void from_json(const nlohmann::json& j, ForestCls& v);
void to_json(nlohmann::json& j, const ForestReg& v);
void from_json(const nlohmann::json& j, ForestReg& v);
void to_json(nlohmann::json& j, const DiagGmm& v);
void from_json(const nlohmann::json& j, DiagGmm& v);
void to_json(nlohmann::json& j, const HmmModel& v);
void from_json(const nlohmann::json& j, HmmModel& v);
void to_json(nlohmann::json& j, const SegmentGrid& v);
void from_json(const nlohmann::json& j, SegmentGrid& v);
void to_json(nlohmann::json& j, const FrameSpec& v);
void from_json(const nlohmann::json& j, FrameSpec& v);
void to_json(nlohmann::json& j, const Standardizer& v);
void from_json(const nlohmann::json& j, Standardizer& v);
void to_json(nlohmann::json& j, const DbcDetector& v);
void from_json(const nlohmann::json& j, DbcDetector& v);
void to_json(nlohmann::json& j, const AsrDetector& v);
void from_json(const nlohmann::json& j, AsrDetector& v);
void to_json(nlohmann::json& j, const RegDetector& v);
void from_json(const nlohmann::json& j, RegDetector& v);

/// {"format_version": 1, "kind": kind, "model": payload}
nlohmann::json wrap_model(std::string_view kind, nlohmann::json payload);
/// Returns the payload; throws Error{parse} on a version or kind mismatch.
const nlohmann::json& unwrap_model(const nlohmann::json& container, std::string_view kind);
std::string container_kind(const nlohmann::json& container);

/// Verifier payload. Kinds built on the regression detector store
/// `components_file` (a path relative to the verifier file) instead of
/// embedding the forests.
nlohmann::json verifier_to_json(const Verifier& v, const std::string& components_file = {});
Verifier verifier_from_json(const nlohmann::json& payload,
                            std::shared_ptr<const RegDetector> components = nullptr);

/// Deterministic text (sorted keys, two-space indent, trailing newline).
std::string dump_json(const nlohmann::json& j);
void save_json(const std::filesystem::path& path, const nlohmann::json& j);
/// Throws Error{io} or Error{parse}.
nlohmann::json load_json(const std::filesystem::path& path);

void save_verifier(const std::filesystem::path& path, const Verifier& v,
                   const std::string& components_file = {});
/// Loads the referenced regression detector when the kind needs it.
Verifier load_verifier(const std::filesystem::path& path);

}  // namespace aed
