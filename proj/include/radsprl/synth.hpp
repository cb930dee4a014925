#pragma once

// Seeded template-grammar generator of annotated radiology-style sentences.
// The generator keeps its own tally of everything it emits, which serves as
// ground truth for the corpus statistics.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "radsprl/corpus.hpp"

namespace radsprl::synth {

// Either a lexicon draw or literal text. Punctuation segments hold one
// character from ".,;:()/?" and attach to the previous segment.
struct Segment {
  std::string lexicon;  // empty for literals
  std::string text;
  std::string span;     // span id; consecutive segments with one id form one span
  double probability = 1.0;
  bool punct = false;
};

struct SpanTarget {
  std::string role;  // "indicator", "trajector", "landmark", "diagnosis" or "hedge"
  int relation = 0;
};

struct Template {
  std::string name;
  double weight = 1.0;
  std::vector<Segment> segments;
  std::map<std::string, std::vector<SpanTarget>> spans;

  int relation_count() const;
};

struct TemplateGrammar {
  std::map<std::string, std::vector<std::string>> lexicons;
  std::vector<Template> templates;
  int sentences_per_report = 3;

  static TemplateGrammar default_grammar();
  static TemplateGrammar from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // Throws ValidationError on unknown lexicons, bad punctuation, split
  // spans, relations without an indicator or non-positive total weight.
  void validate() const;
  // Replaces template weights; templates not named get weight 0.
  void set_weights(const std::map<std::string, double>& weights);
};

struct Tally {
  CorpusStats stats;
  std::size_t n_sentences = 0;
  std::map<std::string, long> template_counts;

  nlohmann::json to_json() const;
};

struct Generated {
  Corpus corpus;
  Tally tally;
};

Generated generate(std::size_t n_sentences, std::uint64_t seed,
                   const TemplateGrammar& grammar = TemplateGrammar::default_grammar());

// Draws sentences in stream order, skipping any that would overshoot, until
// exactly n relations are held.
Generated generate_relations(std::size_t n_relations, std::uint64_t seed,
                             const TemplateGrammar& grammar = TemplateGrammar::default_grammar());

}  // namespace radsprl::synth
