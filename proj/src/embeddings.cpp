#include "mpat/embeddings.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <iostream>

#include "mpat/common.hpp"

namespace mpat {

EmbeddingTable::EmbeddingTable(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw DataError("embedding dimension must be positive");
}

bool EmbeddingTable::add(std::string token, std::span<const float> vector) {
  if (token.empty()) throw DataError("empty embedding token");
  if (vector.size() != dimension_) {
    throw DataError("embedding for '" + token + "' has " + std::to_string(vector.size()) + " entries, expected " +
                    std::to_string(dimension_));
  }
  if (index_.contains(token)) return false;
  index_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
  values_.insert(values_.end(), vector.begin(), vector.end());
  return true;
}

const float* EmbeddingTable::lookup(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? nullptr : values_.data() + it->second * dimension_;
}

EmbeddingFormat parse_embedding_format(std::string_view s) {
  if (s == "binary" || s == "bin") return EmbeddingFormat::Binary;
  if (s == "text" || s == "txt") return EmbeddingFormat::Text;
  throw DataError("unknown embedding format '" + std::string(s) + "' (expected binary or text)");
}

EmbeddingFormat guess_embedding_format(const std::filesystem::path& path) {
  const auto ext = path.extension();
  return ext == ".txt" || ext == ".vec" ? EmbeddingFormat::Text : EmbeddingFormat::Binary;
}

namespace {

struct Header {
  std::size_t vocab = 0;
  std::size_t dim = 0;
  std::size_t end = 0;  // offset just past the header newline
};

std::size_t parse_size(std::string_view s, const char* what) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw DataError(std::string("word2vec header: bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

Header parse_header(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw DataError("word2vec: truncated header");
  std::string_view line = bytes.substr(0, nl);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto sp = line.find(' ');
  if (sp == std::string_view::npos) throw DataError("word2vec header must be '<vocab_size> <dimension>'");
  Header h;
  h.vocab = parse_size(line.substr(0, sp), "vocabulary size");
  h.dim = parse_size(line.substr(sp + 1), "dimension");
  if (h.dim == 0) throw DataError("word2vec header: dimension must be positive");
  h.end = nl + 1;
  return h;
}

float read_le_float(const char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  return std::bit_cast<float>(bits);
}

void append_le_float(std::string& out, float f) {
  auto bits = std::bit_cast<std::uint32_t>(f);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  char raw[4];
  std::memcpy(raw, &bits, 4);
  out.append(raw, 4);
}

void store(EmbeddingTable& table, std::string token, std::span<const float> v,
           const std::unordered_set<std::string>* keep) {
  if (keep && !keep->contains(token)) return;
  if (!table.add(token, v)) {
    ++table.duplicates_skipped;
    std::clog << "warning: duplicate embedding token '" << token << "' ignored\n";
  }
}

std::string truncated(std::size_t declared, std::size_t found) {
  return "word2vec: truncated file, header declares " + std::to_string(declared) + " words but only " +
         std::to_string(found) + " could be read";
}

EmbeddingTable parse_binary(std::string_view bytes, const std::unordered_set<std::string>* keep) {
  const Header h = parse_header(bytes);
  EmbeddingTable table(h.dim);
  std::size_t pos = h.end;
  std::vector<float> v(h.dim);
  for (std::size_t w = 0; w < h.vocab; ++w) {
    if (pos < bytes.size() && bytes[pos] == '\n') ++pos;
    const auto sp = bytes.find(' ', pos);
    if (sp == std::string_view::npos || sp == pos) {
      if (pos >= bytes.size()) throw DataError(truncated(h.vocab, w));
      throw DataError("word2vec: entry " + std::to_string(w) + " has no token");
    }
    std::string token(bytes.substr(pos, sp - pos));
    pos = sp + 1;
    if (bytes.size() - pos < 4 * h.dim) throw DataError(truncated(h.vocab, w));
    for (std::size_t d = 0; d < h.dim; ++d) v[d] = read_le_float(bytes.data() + pos + 4 * d);
    pos += 4 * h.dim;
    store(table, std::move(token), v, keep);
  }
  return table;
}

EmbeddingTable parse_text(std::string_view bytes, const std::unordered_set<std::string>* keep) {
  const Header h = parse_header(bytes);
  EmbeddingTable table(h.dim);
  std::size_t pos = h.end;
  std::vector<float> v(h.dim);
  std::size_t w = 0;
  while (w < h.vocab) {
    if (pos >= bytes.size()) throw DataError(truncated(h.vocab, w));
    auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) nl = bytes.size();
    std::string_view line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string_view::npos) {
      throw DataError("word2vec: entry " + std::to_string(w) + " has no vector (dimension mismatch)");
    }
    std::string token(line.substr(0, sp));
    const char* p = line.data() + sp;
    const char* end = line.data() + line.size();
    std::size_t d = 0;
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      if (d == h.dim) {
        throw DataError("word2vec: entry '" + token + "' has more than " + std::to_string(h.dim) +
                        " values (dimension mismatch)");
      }
      auto [q, ec] = std::from_chars(p, end, v[d]);
      if (ec != std::errc()) throw DataError("word2vec: bad number in entry '" + token + "'");
      p = q;
      ++d;
    }
    if (d != h.dim) {
      throw DataError("word2vec: entry '" + token + "' has " + std::to_string(d) + " values, expected " +
                      std::to_string(h.dim) + " (dimension mismatch)");
    }
    store(table, std::move(token), v, keep);
    ++w;
  }
  return table;
}

}  // namespace

EmbeddingTable parse_word2vec(std::string_view bytes, EmbeddingFormat format,
                              const std::unordered_set<std::string>* keep) {
  return format == EmbeddingFormat::Binary ? parse_binary(bytes, keep) : parse_text(bytes, keep);
}

EmbeddingTable load_word2vec(const std::filesystem::path& path, EmbeddingFormat format,
                             const std::unordered_set<std::string>* keep) {
  try {
    return parse_word2vec(read_file(path), format, keep);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string serialize_word2vec(const EmbeddingTable& table, EmbeddingFormat format) {
  std::string out = std::to_string(table.size()) + " " + std::to_string(table.dimension()) + "\n";
  char buf[64];
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += table.tokens()[i];
    const auto v = table.vector(i);
    if (format == EmbeddingFormat::Binary) {
      out += ' ';
      for (float f : v) append_le_float(out, f);
    } else {
      for (float f : v) {
        auto [p, ec] = std::to_chars(buf, buf + sizeof buf, f);
        out += ' ';
        out.append(buf, p);
      }
    }
    out += '\n';
  }
  return out;
}

void write_word2vec(const EmbeddingTable& table, const std::filesystem::path& path, EmbeddingFormat format) {
  write_file_atomic(path, serialize_word2vec(table, format));
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  auto is_punct = [](unsigned char c) { return std::ispunct(c) != 0; };
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t a = i, b = j;
    while (a < b && is_punct(static_cast<unsigned char>(text[a]))) ++a;
    while (b > a && is_punct(static_cast<unsigned char>(text[b - 1]))) --b;
    if (a < b) {
      std::string tok(text.substr(a, b - a));
      for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

EncodedSentence encode(std::span<const std::string> tokens, const EmbeddingTable& table, std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("encode: max_len must be >= 1");
  EncodedSentence s{nn::Tensor({max_len, table.dimension()}), std::min(tokens.size(), max_len)};
  for (std::size_t t = 0; t < s.valid_length; ++t) {
    if (const float* v = table.lookup(tokens[t])) {
      auto row = s.matrix.row(t);
      for (std::size_t d = 0; d < row.size(); ++d) row[d] = static_cast<double>(v[d]);
    }
  }
  return s;
}

}  // namespace mpat
