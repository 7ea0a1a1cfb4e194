#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hwhelp::text {

/// One physical line of a source text. `body` excludes the terminator,
/// `full` includes it ("\n", "\r\n" or nothing for a final unterminated line).
struct Line {
  std::string_view body;
  std::string_view full;
  std::size_t offset = 0;
};

std::vector<Line> split_lines(std::string_view source);

std::string_view trim(std::string_view s);
std::string_view rtrim(std::string_view s);
std::string to_lower(std::string_view s);

bool starts_with_ws(std::string_view line);
bool is_blank(std::string_view line);

/// Unifies line endings, strips trailing whitespace per line and drops
/// trailing empty lines.
std::string normalize_output(std::string_view s);

/// Replaces every occurrence of `from` with `to` in a single left-to-right pass.
std::string replace_all(std::string_view s, std::string_view from, std::string_view to);

/// Name of the function defined by a top-level `def name(` line, if any.
std::string_view top_level_def_name(std::string_view line);

std::string sha256_hex(std::string_view data);

}  // namespace hwhelp::text
