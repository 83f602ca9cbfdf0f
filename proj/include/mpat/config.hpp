#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mpat::config {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines. '#' starts a comment, blank lines are skipped,
/// values may be wrapped in double quotes, and `[section]` headers prefix the
/// following keys with "section.". Later duplicates override earlier ones.
KeyValues parse(std::string_view text);
KeyValues load(const std::filesystem::path& path);

std::size_t to_size(const std::string& key, const std::string& value);
std::uint64_t to_u64(const std::string& key, const std::string& value);
double to_double(const std::string& key, const std::string& value);
std::vector<std::size_t> to_size_list(const std::string& key, const std::string& value);

}  // namespace mpat::config
