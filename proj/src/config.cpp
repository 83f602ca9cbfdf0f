#include "mpat/config.hpp"

#include <charconv>
#include <cstdint>

#include "mpat/common.hpp"

namespace mpat::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <class T>
T parse_integer(const std::string& key, std::string_view value) {
  value = trim(value);
  T v{};
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size()) {
    throw DataError("config key '" + key + "': expected a non-negative integer, got '" + std::string(value) + "'");
  }
  return v;
}

}  // namespace

KeyValues parse(std::string_view text) {
  KeyValues out;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_quotes = !in_quotes;
      if (line[i] == '#' && !in_quotes) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw DataError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw DataError("config line " + std::to_string(line_no) + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (!section.empty()) key = section + "." + key;
    std::erase_if(out, [&](const auto& kv) { return kv.first == key; });
    out.emplace_back(std::move(key), std::string(value));
  }
  return out;
}

KeyValues load(const std::filesystem::path& path) {
  try {
    return parse(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::size_t to_size(const std::string& key, const std::string& value) {
  return parse_integer<std::size_t>(key, value);
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  return parse_integer<std::uint64_t>(key, value);
}

double to_double(const std::string& key, const std::string& value) {
  const auto v = trim(value);
  double d = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw DataError("config key '" + key + "': expected a number, got '" + value + "'");
  }
  return d;
}

std::vector<std::size_t> to_size_list(const std::string& key, const std::string& value) {
  std::string_view v = trim(value);
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    auto comma = v.find(',', pos);
    if (comma == std::string_view::npos) comma = v.size();
    out.push_back(parse_integer<std::size_t>(key, v.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

}  // namespace mpat::config
