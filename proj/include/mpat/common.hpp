#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mpat {

/// Presentation condition of a pair: bare sentences or embedded in a document context.
enum class Condition { OutOfContext, InContext };

std::string_view to_string(Condition c);
/// Accepts "ooc"/"ic" and the long forms "out-of-context"/"in-context".
Condition parse_condition(std::string_view s);

/// Raised on malformed input data (files, records, configuration).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seeded 64-bit generator with portable derived distributions.
///
/// std::uniform_*_distribution output is implementation-defined, so the
/// helpers here draw directly from the mt19937_64 stream, which the standard
/// fixes bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  /// Standard normal via Box-Muller.
  double normal();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

/// Writes `contents` to a temporary sibling of `path` and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace mpat
