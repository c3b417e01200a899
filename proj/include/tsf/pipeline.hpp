#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tsf/dataset.hpp"
#include "tsf/error.hpp"
#include "tsf/evaluation.hpp"
#include "tsf/llm_gateway.hpp"
#include "tsf/prompting.hpp"

namespace tsf {

inline constexpr std::size_t kDefaultContextLen = 96;
inline constexpr std::size_t kDefaultEvalStride = 96;
inline constexpr std::size_t kDefaultMaxWindows = 100;

struct RunConfig {
  std::filesystem::path dataset_path;
  std::filesystem::path schema_path;
  std::vector<std::string> features;  // empty selects every series
  std::size_t context_len = kDefaultContextLen;
  std::vector<std::size_t> horizons = {1, 2, 3, 4, 5, 6, 12};
  std::size_t stride = kDefaultEvalStride;
  std::vector<PromptStrategy> strategies = {PromptStrategy::PatchInstruct};
  std::size_t patch_window = kDefaultPatchWindow;
  std::size_t patch_stride = kDefaultPatchStride;
  std::size_t k = kDefaultNeighbors;
  BackendConfig backend;
  std::size_t max_windows = kDefaultMaxWindows;  // 0 keeps every window
  std::uint64_t seed = 0;
  bool lenient = false;
  bool znorm_neighbors = false;
  bool neighbor_continuation = false;
  bool generic_zeroshot = false;
  std::filesystem::path out;
  std::filesystem::path templates_dir;

  /// ConfigError on bad values, including a missing api key for Http.
  void validate() const;
  /// Everything that shapes the reports. The output path is left out.
  std::map<std::string, std::string> snapshot() const;
};

/// The windows a run scores for one series and horizon: contexts that start
/// at or after context_len (so every target has neighbor history), thinned
/// to max_windows by a seeded uniform draw and kept in time order.
std::vector<EvalWindow> select_windows(const Series& series, const RunConfig& cfg, std::size_t horizon);

struct WindowFailure {
  std::string series_id;
  std::string strategy;
  std::size_t horizon = 0;
  std::string window_id;
  ErrorCode code = ErrorCode::ConfigError;
  std::string message;

  std::string describe() const;
};

struct RunOutcome {
  std::vector<RunReport> reports;
  std::vector<WindowFailure> failures;  // fatal: assembly, backend or aggregation errors
  std::vector<std::string> template_versions;

  bool ok() const { return failures.empty(); }
};

/// Dataset label used in reports: the dataset name, suffixed with the series
/// id when the dataset holds several series.
std::string report_dataset_label(const Dataset& dataset, const Series& series);

/// slice -> neighbors -> assemble -> complete -> parse -> score -> aggregate,
/// for every (feature, horizon, strategy). Reports come out in that order.
RunOutcome run_pipeline(const Dataset& dataset, const RunConfig& cfg, std::shared_ptr<Backend> backend,
                        const TemplateLibrary& templates);

Dataset load_dataset(const RunConfig& cfg);
TemplateLibrary load_templates(const RunConfig& cfg);

/// Config snapshot, template versions, backend id and a dataset digest, as JSON.
std::string render_manifest(const RunConfig& cfg, const RunOutcome& outcome, const std::string& backend_id);
std::filesystem::path manifest_path(const std::filesystem::path& report_path);

}  // namespace tsf
