#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "radsprl/preprocess.hpp"
#include "radsprl/rng.hpp"
#include "radsprl/tensor.hpp"

namespace radsprl {

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();
  // `tokens` excludes the reserved entries; duplicates are rejected.
  explicit Vocabulary(const std::vector<std::string>& tokens);

  int add(const std::string& token);
  int index(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(int index) const { return tokens_.at(static_cast<std::size_t>(index)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Lowercases and maps ASCII digits to '0' ("7th" -> "0th").
std::string normalize_word(std::string_view token);

// Splits UTF-8 text into code-point strings; invalid bytes become single-byte units.
std::vector<std::string> utf8_chars(std::string_view text);

struct Vocabularies {
  Vocabulary words;
  Vocabulary chars;
};

// Words ordered by frequency (desc) then lexicographically; characters from
// every training token.
Vocabularies build_vocab(const std::vector<Instance>& instances, int min_freq = 1);

struct EmbeddingTable {
  nn::Param weights;  // |vocab| x dim
  bool trainable = true;

  Eigen::Index dim() const { return weights.value.cols(); }
  Eigen::Index rows() const { return weights.value.rows(); }
};

// Rows uniform in [-sqrt(3/dim), sqrt(3/dim)], row 0 (PAD) zero when `pad_row`.
EmbeddingTable random_embeddings(std::string name, std::size_t rows, int dim, Rng& rng,
                                 bool pad_row = true);

struct PretrainedLoadReport {
  std::size_t copied = 0;
  std::size_t malformed_lines = 0;
  std::vector<std::string> warnings;
};

// word2vec-style text: optional "count dim" header, then "token v1 ... vdim".
// Words are matched after normalize_word. Throws ShapeError on dimension mismatch.
EmbeddingTable load_pretrained(const std::filesystem::path& path, const Vocabulary& vocab, int dim,
                               Rng& rng, PretrainedLoadReport* report = nullptr);

struct TokenEncoding {
  int word_index = Vocabulary::kUnk;
  std::vector<int> char_indices;
  int indicator_flag = 0;

  friend bool operator==(const TokenEncoding&, const TokenEncoding&) = default;
};

std::vector<TokenEncoding> encode_instance(const Instance& instance, const Vocabularies& vocabs);

}  // namespace radsprl
