#include "radsprl/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "radsprl/error.hpp"

namespace radsprl {

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) : Vocabulary() {
  for (const auto& t : tokens) {
    if (contains(t)) throw ValidationError("duplicate vocabulary entry \"" + t + "\"");
    add(t);
  }
}

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] = index_.emplace(token, static_cast<int>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

int Vocabulary::index(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

nlohmann::json Vocabulary::to_json() const {
  return nlohmann::json(std::vector<std::string>(tokens_.begin() + 2, tokens_.end()));
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ParseError(0, "vocabulary must be a JSON list of tokens");
  return Vocabulary(j.get<std::vector<std::string>>());
}

std::string normalize_word(std::string_view token) {
  std::string out(token);
  for (char& c : out) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isdigit(u)) {
      c = '0';
    } else if (u < 0x80) {
      c = static_cast<char>(std::tolower(u));
    }
  }
  return out;
}

std::vector<std::string> utf8_chars(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xF0 && lead < 0xF8) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    if (lead >= 0xF8 || i + len > text.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

namespace {

std::vector<std::string> by_frequency(const std::map<std::string, int>& counts, int min_freq) {
  std::vector<std::pair<std::string, int>> items;
  for (const auto& [k, v] : counts) {
    if (v >= min_freq) items.emplace_back(k, v);
  }
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  out.reserve(items.size());
  for (auto& [k, v] : items) out.push_back(std::move(k));
  return out;
}

}  // namespace

Vocabularies build_vocab(const std::vector<Instance>& instances, int min_freq) {
  if (min_freq < 1) throw ValidationError("min_freq must be >= 1");
  if (instances.empty()) throw ValidationError("cannot build vocabulary from an empty training set");
  std::map<std::string, int> words, chars;
  for (const auto& inst : instances) {
    for (const auto& tok : inst.tokens) {
      ++words[normalize_word(tok.text)];
      for (auto& c : utf8_chars(tok.text)) ++chars[c];
    }
  }
  return {Vocabulary(by_frequency(words, min_freq)), Vocabulary(by_frequency(chars, 1))};
}

EmbeddingTable random_embeddings(std::string name, std::size_t rows, int dim, Rng& rng,
                                 bool pad_row) {
  if (dim <= 0) throw ShapeError("embedding dim must be positive");
  const double bound = std::sqrt(3.0 / dim);
  nn::Matrix m(static_cast<Eigen::Index>(rows), dim);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = uniform(rng, -bound, bound);
  }
  if (pad_row && rows > 0) m.row(Vocabulary::kPad).setZero();
  return EmbeddingTable{nn::Param(std::move(name), std::move(m)), true};
}

EmbeddingTable load_pretrained(const std::filesystem::path& path, const Vocabulary& vocab, int dim,
                               Rng& rng, PretrainedLoadReport* report) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embeddings file " + path.string());
  EmbeddingTable table = random_embeddings("word_embeddings", vocab.size(), dim, rng);
  PretrainedLoadReport local;
  PretrainedLoadReport& rep = report ? *report : local;
  std::vector<bool> filled(vocab.size(), false);
  std::string line;
  std::size_t line_no = 0;
  bool saw_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> fields;
    for (std::string f; ls >> f;) fields.push_back(f);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2 &&
        std::all_of(fields[0].begin(), fields[0].end(), ::isdigit) &&
        std::all_of(fields[1].begin(), fields[1].end(), ::isdigit)) {
      if (std::stoi(fields[1]) != dim) {
        throw ShapeError("embedding file declares dimension " + fields[1] + " but " +
                         std::to_string(dim) + " was requested");
      }
      continue;
    }
    std::vector<double> values;
    bool ok = fields.size() >= 2;
    for (std::size_t i = 1; ok && i < fields.size(); ++i) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(fields[i], &used));
        ok = used == fields[i].size() && std::isfinite(values.back());
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (ok && static_cast<int>(values.size()) != dim && !saw_data) {
      throw ShapeError("line " + std::to_string(line_no) + ": embedding has " +
                       std::to_string(values.size()) + " values but dimension " +
                       std::to_string(dim) + " was requested");
    }
    if (!ok || static_cast<int>(values.size()) != dim) {
      ++rep.malformed_lines;
      rep.warnings.push_back("line " + std::to_string(line_no) + ": malformed embedding, skipped");
      continue;
    }
    saw_data = true;
    const std::string word = normalize_word(fields[0]);
    if (!vocab.contains(word)) continue;
    const int idx = vocab.index(word);
    if (idx == Vocabulary::kPad || filled[static_cast<std::size_t>(idx)]) continue;
    filled[static_cast<std::size_t>(idx)] = true;
    for (int c = 0; c < dim; ++c) table.weights.value(idx, c) = values[static_cast<std::size_t>(c)];
    ++rep.copied;
  }
  return table;
}

std::vector<TokenEncoding> encode_instance(const Instance& instance, const Vocabularies& vocabs) {
  std::vector<TokenEncoding> out;
  out.reserve(instance.tokens.size());
  for (std::size_t i = 0; i < instance.tokens.size(); ++i) {
    const auto& tok = instance.tokens[i];
    TokenEncoding enc;
    enc.word_index = vocabs.words.index(normalize_word(tok.text));
    for (const auto& c : utf8_chars(tok.text)) enc.char_indices.push_back(vocabs.chars.index(c));
    enc.indicator_flag = i < instance.indicator_flags.size() ? instance.indicator_flags[i] : 0;
    out.push_back(std::move(enc));
  }
  return out;
}

}  // namespace radsprl
