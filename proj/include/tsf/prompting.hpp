#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tsf/dataset.hpp"
#include "tsf/neighbors.hpp"
#include "tsf/patching.hpp"

namespace tsf {

enum class PromptStrategy {
  Zeroshot,
  PatchInstruct,
  Neighs,
  PatchInstructNeighs,
  BasicPI,
  NonOverlappingPI,
  StrDecomposePI,
  ReverseOrderedPI,
  MetaTokensPI,
};

inline constexpr PromptStrategy kAllStrategies[] = {
    PromptStrategy::Zeroshot,         PromptStrategy::PatchInstruct,  PromptStrategy::Neighs,
    PromptStrategy::PatchInstructNeighs, PromptStrategy::BasicPI,     PromptStrategy::NonOverlappingPI,
    PromptStrategy::StrDecomposePI,   PromptStrategy::ReverseOrderedPI, PromptStrategy::MetaTokensPI,
};

/// CLI / asset name, e.g. "reverse-patch".
std::string_view strategy_name(PromptStrategy strategy);
/// Accepts every strategy_name plus the aliases listed in the README.
std::optional<PromptStrategy> parse_strategy(std::string_view name);

bool uses_neighbors(PromptStrategy strategy);
/// Whether the strategy's output contract asks for a "Patches:" echo.
bool echoes_patches(PromptStrategy strategy);

struct PromptTemplate {
  std::string name;  // asset name
  std::string system_text;
  std::string version;
};

/// Immutable set of system prompt templates keyed by asset name.
class TemplateLibrary {
 public:
  /// Templates compiled into the binary.
  static const TemplateLibrary& builtin();
  /// One `<name>.txt` per asset. Missing assets fall back to the builtin copy.
  static TemplateLibrary from_directory(const std::filesystem::path& dir);
  /// Asset text: an optional `# version: X` first line, then the body.
  static PromptTemplate parse_asset(std::string name, std::string_view text);

  const PromptTemplate& get(std::string_view name) const;
  const PromptTemplate& for_strategy(PromptStrategy strategy, bool generic_zeroshot = false) const;
  void put(PromptTemplate tmpl);

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Substitutes `{name}` markers. Any marker without a binding raises
/// UnboundPlaceholder.
std::string build_system_prompt(const PromptTemplate& tmpl, const Bindings& bindings);

/// The horizon prompt: `Continue the following sequence ... Sequence: <...>. Predict the next h values.`
std::string build_user_prompt(const EvalWindow& window);

/// One `Neighbor i: <...>` line per entry, newline separated. With
/// include_continuation each line also carries the neighbor's known next values.
std::string render_neighbor_block(const NeighborSet& ns, bool include_continuation = false);

struct PromptParams {
  std::string series_description = "the series";
  std::string interval_description = "every 10 minutes";
  std::string series_label = "Value";
  std::string cadence = "10-min cadence";
  std::size_t patch_window = kDefaultPatchWindow;
  std::size_t patch_stride = kDefaultPatchStride;
  std::size_t trend_window = kDefaultTrendWindow;
  int utc_offset_minutes = 0;
  bool generic_zeroshot_system = false;
  bool pre_decomposed = false;
  bool neighbor_continuation = false;

  /// Fills the descriptive fields from a series.
  static PromptParams for_series(const Series& series, int utc_offset_minutes = 0);
};

struct PromptBundle {
  std::string system;
  std::string user;
  PromptStrategy strategy = PromptStrategy::Zeroshot;
  std::string template_version;
  std::string window_id;
  std::size_t horizon = 0;
  std::size_t context_len = 0;
  std::size_t neighbor_count = 0;

  /// SHA-256 (hex) over template version, system and user text.
  std::string content_hash() const;
};

Bindings make_bindings(PromptStrategy strategy, const EvalWindow& window, const PromptParams& params,
                       std::size_t k);

PromptBundle assemble(PromptStrategy strategy, const EvalWindow& window, const PromptParams& params,
                      const std::optional<NeighborSet>& neighbors,
                      const TemplateLibrary& templates = TemplateLibrary::builtin());

/// The patches an LLM is asked to echo for a strategy, used to score the
/// echo. Empty for strategies without a "Patches:" contract.
std::optional<PatchSet> reference_patches(PromptStrategy strategy, const EvalWindow& window,
                                          const PromptParams& params);

}  // namespace tsf
