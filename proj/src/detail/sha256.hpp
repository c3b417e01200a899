#pragma once

#include <string>
#include <string_view>

namespace tsf::detail {

// Lower-case hex digest.
std::string sha256_hex(std::string_view data);

}  // namespace tsf::detail
