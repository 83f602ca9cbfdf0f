#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mpat/nn/tensor.hpp"

namespace mpat {

/// Token to dense vector map, kept in file order.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dimension = 1);

  /// Returns false (and stores nothing) when the token is already present.
  bool add(std::string token, std::span<const float> vector);

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  /// nullptr for out-of-vocabulary tokens.
  const float* lookup(std::string_view token) const;
  std::span<const float> vector(std::size_t index) const {
    return {values_.data() + index * dimension_, dimension_};
  }

  /// Duplicate tokens dropped at load time (first occurrence kept).
  std::size_t duplicates_skipped = 0;

 private:
  std::size_t dimension_;
  std::vector<std::string> tokens_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class EmbeddingFormat { Binary, Text };
EmbeddingFormat parse_embedding_format(std::string_view s);
/// ".txt" and ".vec" are text; everything else is treated as binary.
EmbeddingFormat guess_embedding_format(const std::filesystem::path& path);

/// Reads a word2vec file. When `keep` is given, only those tokens are stored.
EmbeddingTable load_word2vec(const std::filesystem::path& path, EmbeddingFormat format,
                             const std::unordered_set<std::string>* keep = nullptr);
EmbeddingTable parse_word2vec(std::string_view bytes, EmbeddingFormat format,
                              const std::unordered_set<std::string>* keep = nullptr);
/// Binary output writes "\n" after each vector, as the reference word2vec tool does.
std::string serialize_word2vec(const EmbeddingTable& table, EmbeddingFormat format);
void write_word2vec(const EmbeddingTable& table, const std::filesystem::path& path, EmbeddingFormat format);

/// Lowercase, split on whitespace, strip leading/trailing ASCII punctuation.
std::vector<std::string> tokenize(std::string_view text);

struct EncodedSentence {
  nn::Tensor matrix;  // max_len x dimension
  std::size_t valid_length = 0;
};

/// Embeds the first max_len tokens; OOV tokens become zero rows and the tail is zero padding.
EncodedSentence encode(std::span<const std::string> tokens, const EmbeddingTable& table, std::size_t max_len);

}  // namespace mpat
