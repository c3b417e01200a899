#include "tsf/prompting.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "detail/sha256.hpp"
#include "detail/template_assets.hpp"
#include "tsf/error.hpp"

namespace tsf {

namespace {

constexpr std::string_view kVersionPrefix = "# version:";
constexpr std::string_view kSequenceLead = "Continue the following sequence without producing any additional text. Sequence: <";

bool is_placeholder_name(std::string_view name) {
  return !name.empty() &&
         std::all_of(name.begin(), name.end(), [](char c) { return (c >= 'a' && c <= 'z') || c == '_'; });
}

std::string prediction_slots(std::size_t horizon) {
  std::string out;
  for (std::size_t i = 1; i <= horizon; ++i) {
    if (i > 1) out += ", ";
    out += "y" + std::to_string(i);
  }
  return out;
}

// Illustrative first/second/last patch lines for token-pair strategies.
std::string patch_layout(PromptStrategy strategy, std::size_t context_len, std::size_t window, std::size_t stride) {
  if (strategy != PromptStrategy::StrDecomposePI && strategy != PromptStrategy::MetaTokensPI) return {};
  if (window == 0 || stride == 0 || window > context_len) return {};
  auto token = [&](std::size_t i) {
    const auto n = std::to_string(i);
    return strategy == PromptStrategy::StrDecomposePI ? "[T" + n + ",R" + n + "]" : "(v" + n + ";slot" + n + ")";
  };
  auto line = [&](std::size_t patch) {
    std::string out = "[";
    for (std::size_t j = 0; j < window; ++j) {
      if (j) out += ", ";
      out += token(patch * stride + j + 1);
    }
    return out + "]";
  };
  const std::size_t count = (context_len - window) / stride + 1;
  std::string out = line(0);
  if (count > 1) out += "\n" + line(1);
  if (count > 3) out += "\n…";
  if (count > 2) out += "\n" + line(count - 1);
  return out;
}

std::string clock_label(EpochSeconds ts, int utc_offset_minutes) {
  constexpr EpochSeconds kDay = 86400;
  const EpochSeconds local = ts + static_cast<EpochSeconds>(utc_offset_minutes) * 60;
  const EpochSeconds sod = ((local % kDay) + kDay) % kDay;
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d:%02d", static_cast<int>(sod / 3600), static_cast<int>((sod % 3600) / 60));
  return buf;
}

// Largest odd window no wider than the context.
std::size_t effective_trend_window(const PromptParams& params, std::size_t context_len) {
  return std::min(params.trend_window, context_len - (context_len + 1) % 2);
}

}  // namespace

std::string_view strategy_name(PromptStrategy strategy) {
  switch (strategy) {
    case PromptStrategy::Zeroshot: return "zeroshot";
    case PromptStrategy::PatchInstruct: return "patch-instruct";
    case PromptStrategy::Neighs: return "neighs";
    case PromptStrategy::PatchInstructNeighs: return "patch-neighs";
    case PromptStrategy::BasicPI: return "basic-patch";
    case PromptStrategy::NonOverlappingPI: return "nonoverlap-patch";
    case PromptStrategy::StrDecomposePI: return "str-patch";
    case PromptStrategy::ReverseOrderedPI: return "reverse-patch";
    case PromptStrategy::MetaTokensPI: return "meta-patch";
  }
  return "unknown";
}

std::optional<PromptStrategy> parse_strategy(std::string_view name) {
  for (auto s : kAllStrategies) {
    if (strategy_name(s) == name) return s;
  }
  if (name == "zero-shot") return PromptStrategy::Zeroshot;
  if (name == "patchinstruct") return PromptStrategy::PatchInstruct;
  if (name == "patch-instruct-neighs" || name == "patchinstruct+neighs") return PromptStrategy::PatchInstructNeighs;
  if (name == "reverse-ordered") return PromptStrategy::ReverseOrderedPI;
  return std::nullopt;
}

bool uses_neighbors(PromptStrategy strategy) {
  return strategy == PromptStrategy::Neighs || strategy == PromptStrategy::PatchInstructNeighs;
}

bool echoes_patches(PromptStrategy strategy) {
  switch (strategy) {
    case PromptStrategy::PatchInstruct:
    case PromptStrategy::PatchInstructNeighs:
    case PromptStrategy::BasicPI:
    case PromptStrategy::ReverseOrderedPI: return true;
    default: return false;
  }
}

PromptTemplate TemplateLibrary::parse_asset(std::string name, std::string_view text) {
  PromptTemplate tmpl;
  tmpl.name = std::move(name);
  tmpl.version = "unversioned";
  if (text.substr(0, kVersionPrefix.size()) == kVersionPrefix) {
    const auto eol = text.find('\n');
    std::string_view v = text.substr(kVersionPrefix.size(), eol == std::string_view::npos ? text.npos : eol - kVersionPrefix.size());
    while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
    while (!v.empty() && (v.back() == ' ' || v.back() == '\r')) v.remove_suffix(1);
    tmpl.version = std::string(v);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
  }
  if (!text.empty() && text.back() == '\n') text.remove_suffix(1);
  if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
  tmpl.system_text = std::string(text);
  return tmpl;
}

const TemplateLibrary& TemplateLibrary::builtin() {
  static const TemplateLibrary lib = [] {
    TemplateLibrary l;
    for (std::size_t i = 0; i < detail::kTemplateAssetCount; ++i) {
      const auto& asset = detail::kTemplateAssets[i];
      l.put(parse_asset(std::string(asset.name), asset.text));
    }
    return l;
  }();
  return lib;
}

TemplateLibrary TemplateLibrary::from_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::IoError, "template directory not found: " + dir.string());
  TemplateLibrary lib = builtin();
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    lib.put(parse_asset(entry.path().stem().string(), text.str()));
  }
  return lib;
}

const PromptTemplate& TemplateLibrary::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw Error(ErrorCode::ConfigError, "no template named '" + std::string(name) + "'");
  return it->second;
}

const PromptTemplate& TemplateLibrary::for_strategy(PromptStrategy strategy, bool generic_zeroshot) const {
  if (strategy == PromptStrategy::Zeroshot && generic_zeroshot) return get("zeroshot-generic");
  return get(strategy_name(strategy));
}

void TemplateLibrary::put(PromptTemplate tmpl) {
  auto name = tmpl.name;
  templates_.insert_or_assign(std::move(name), std::move(tmpl));
}

std::string build_system_prompt(const PromptTemplate& tmpl, const Bindings& bindings) {
  const std::string_view text = tmpl.system_text;
  std::string out;
  out.reserve(text.size() + 64);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    const auto close = text.find('}', open + 1);
    const std::string_view name =
        close == std::string_view::npos ? std::string_view{} : text.substr(open + 1, close - open - 1);
    if (!is_placeholder_name(name)) {
      out.append(text.substr(pos, open + 1 - pos));
      pos = open + 1;
      continue;
    }
    auto it = bindings.find(name);
    if (it == bindings.end()) {
      throw Error(ErrorCode::UnboundPlaceholder,
                  "template '" + tmpl.name + "' needs a binding for {" + std::string(name) + "}");
    }
    out.append(text.substr(pos, open - pos));
    out.append(it->second);
    pos = close + 1;
  }
  return out;
}

std::string build_user_prompt(const EvalWindow& window) {
  std::string out(kSequenceLead);
  out += join_values(window.context);
  out += ">. Predict the next " + std::to_string(window.horizon) + " values.";
  return out;
}

std::string render_neighbor_block(const NeighborSet& ns, bool include_continuation) {
  if (ns.entries.empty()) throw Error(ErrorCode::EmptyNeighborSet, "no neighbors to render");
  std::string out;
  for (std::size_t i = 0; i < ns.entries.size(); ++i) {
    if (i) out += '\n';
    const auto& w = ns.entries[i].window;
    out += "Neighbor " + std::to_string(i + 1) + ": <" + join_values(w.values) + ">";
    if (include_continuation && !w.continuation.empty()) out += " followed by <" + join_values(w.continuation) + ">";
  }
  return out;
}

PromptParams PromptParams::for_series(const Series& series, int utc_offset_minutes) {
  PromptParams p;
  p.series_description = series.description;
  p.series_label = series.label;
  p.interval_description = describe_interval(series.interval_seconds);
  p.cadence = describe_cadence(series.interval_seconds);
  p.utc_offset_minutes = utc_offset_minutes;
  return p;
}

std::string PromptBundle::content_hash() const {
  std::string material;
  material.reserve(template_version.size() + system.size() + user.size() + 2);
  material.append(template_version).push_back('\x1f');
  material.append(system).push_back('\x1f');
  material.append(user);
  return detail::sha256_hex(material);
}

Bindings make_bindings(PromptStrategy strategy, const EvalWindow& window, const PromptParams& params, std::size_t k) {
  return Bindings{
      {"series_description", params.series_description},
      {"interval_description", params.interval_description},
      {"series_label", params.series_label},
      {"cadence", params.cadence},
      {"window", std::to_string(params.patch_window)},
      {"stride", std::to_string(params.patch_stride)},
      {"horizon", std::to_string(window.horizon)},
      {"k", std::to_string(k)},
      {"context_len", std::to_string(window.context_len())},
      {"prediction_slots", prediction_slots(window.horizon)},
      {"patch_layout", patch_layout(strategy, window.context_len(), params.patch_window, params.patch_stride)},
  };
}

PromptBundle assemble(PromptStrategy strategy, const EvalWindow& window, const PromptParams& params,
                      const std::optional<NeighborSet>& neighbors, const TemplateLibrary& templates) {
  if (uses_neighbors(strategy) && !neighbors) {
    throw Error(ErrorCode::MissingNeighbors, std::string(strategy_name(strategy)) + " needs a neighbor set");
  }
  if (!uses_neighbors(strategy) && neighbors) {
    throw Error(ErrorCode::UnexpectedNeighbors, std::string(strategy_name(strategy)) + " takes no neighbors");
  }
  const PromptTemplate& tmpl = templates.for_strategy(strategy, params.generic_zeroshot_system);
  const std::size_t k = neighbors ? neighbors->entries.size() : 0;

  PromptBundle bundle;
  bundle.strategy = strategy;
  bundle.template_version = tmpl.version;
  bundle.window_id = window.id();
  bundle.horizon = window.horizon;
  bundle.context_len = window.context_len();
  bundle.neighbor_count = k;
  bundle.system = build_system_prompt(tmpl, make_bindings(strategy, window, params, k));

  std::string prefix;
  if (neighbors) {
    prefix = render_neighbor_block(*neighbors, params.neighbor_continuation) + "\n";
  } else if (strategy == PromptStrategy::MetaTokensPI && !window.context_timestamps.empty()) {
    const EpochSeconds first = window.context_timestamps.front();
    prefix = "First value measured at " + clock_label(first, params.utc_offset_minutes) + " (slot " +
             std::to_string(slot_of(first, params.utc_offset_minutes)) + ").\n";
  } else if (strategy == PromptStrategy::StrDecomposePI && params.pre_decomposed) {
    const std::size_t tw = effective_trend_window(params, window.context_len());
    const auto tokens = composite_tokens(str_decompose(window.context, tw));
    prefix = "Decomposed tokens: ";
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) prefix += ", ";
      prefix += "(" + format_value(tokens[i].trend) + ", " + format_value(tokens[i].residual) + ")";
    }
    prefix += "\n";
  }
  bundle.user = prefix + build_user_prompt(window);
  return bundle;
}

std::optional<PatchSet> reference_patches(PromptStrategy strategy, const EvalWindow& window,
                                          const PromptParams& params) {
  switch (strategy) {
    case PromptStrategy::PatchInstruct:
    case PromptStrategy::PatchInstructNeighs:
    case PromptStrategy::BasicPI:
    case PromptStrategy::ReverseOrderedPI:
      return reverse_patches(overlapping_patches(window.context, params.patch_window, params.patch_stride));
    case PromptStrategy::NonOverlappingPI: return nonoverlapping_patches(window.context, window.horizon);
    case PromptStrategy::StrDecomposePI: {
      const std::size_t tw = effective_trend_window(params, window.context_len());
      return str_patches(window.context, params.patch_window, params.patch_stride, tw);
    }
    case PromptStrategy::MetaTokensPI:
      return meta_patches(window.context, window.context_timestamps, params.utc_offset_minutes, params.patch_window,
                          params.patch_stride);
    case PromptStrategy::Zeroshot:
    case PromptStrategy::Neighs: return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace tsf
