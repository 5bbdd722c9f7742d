#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace labelrefine {

std::vector<std::string> split_lines(std::string_view text);

/// Line-based unified diff with `context` lines around each hunk. Identical
/// inputs give an empty string.
std::string unified_diff(std::string_view before, std::string_view after, std::string_view before_name = "a",
                         std::string_view after_name = "b", int context = 3);

}  // namespace labelrefine
