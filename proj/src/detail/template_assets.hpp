#pragma once

#include <cstddef>
#include <string_view>

namespace tsf::detail {

struct TemplateAsset {
  std::string_view name;
  std::string_view text;
};

// Generated at configure time from templates/*.txt.
extern const TemplateAsset kTemplateAssets[];
extern const std::size_t kTemplateAssetCount;

}  // namespace tsf::detail
