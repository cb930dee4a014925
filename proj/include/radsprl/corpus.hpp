#pragma once

// Rad-SpRL corpus data model: standoff spans keyed by byte offsets into the
// sentence text, one SpatialRelation per spatial indicator.

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace radsprl {

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string text;

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span& a, const Span& b) {
    if (auto c = a.start <=> b.start; c != 0) return c;
    return a.end <=> b.end;
  }
};

enum class RoleLabel { Trajector, Landmark, Diagnosis, Hedge };

inline constexpr std::array<RoleLabel, 4> kAllRoles = {
    RoleLabel::Trajector, RoleLabel::Landmark, RoleLabel::Diagnosis, RoleLabel::Hedge};

std::string_view role_name(RoleLabel role);          // "TRAJECTOR", ...
std::string_view role_display_name(RoleLabel role);  // "Trajector", ...
std::optional<RoleLabel> parse_role(std::string_view name);

struct SpatialRelation {
  Span indicator;
  std::vector<Span> trajectors;
  std::vector<Span> landmarks;
  std::vector<Span> diagnoses;
  std::vector<Span> hedges;

  const std::vector<Span>& spans(RoleLabel role) const;
  std::vector<Span>& spans(RoleLabel role);

  friend bool operator==(const SpatialRelation&, const SpatialRelation&) = default;
};

struct AnnotatedSentence {
  std::string report_id;
  std::string sentence_id;
  std::string text;
  std::vector<SpatialRelation> relations;

  friend bool operator==(const AnnotatedSentence&, const AnnotatedSentence&) = default;
};

struct Corpus {
  std::vector<AnnotatedSentence> sentences;
  std::set<std::string> report_ids;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Builds a Corpus from sentences, filling report_ids and checking every
// invariant. Throws ValidationError.
Corpus make_corpus(std::vector<AnnotatedSentence> sentences);

// Checks span bounds, text consistency, intra-role overlap and duplicate
// indicators. Throws ValidationError naming report_id/sentence_id.
void validate_sentence(const AnnotatedSentence& sentence);

Span make_span(std::string_view text, std::size_t start, std::size_t end);

// JSON-lines IO. Span "text" is omitted on disk and rebuilt on load.
Corpus read_corpus(std::istream& in);
Corpus load_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

std::string format_sentence_json(const AnnotatedSentence& sentence);
AnnotatedSentence parse_sentence_json(std::string_view line, std::size_t line_no);

struct Token;
using Tokenizer = std::function<std::vector<Token>(std::string_view)>;

struct CorpusStats {
  long n_relations = 0;
  long n_trajectors = 0;
  long n_landmarks = 0;
  long n_diagnoses = 0;
  long n_hedges = 0;
  long n_sentences_with_indicator = 0;
  long max_indicators_per_sentence = 0;
  long n_rel_traj_land_only = 0;
  long n_rel_with_diag_no_hedge = 0;
  long n_rel_with_hedge_no_diag = 0;
  long n_rel_all_four = 0;
  long n_rel_multi_diagnosis = 0;
  long max_diagnoses_per_relation = 0;
  // Token total over sentences with at least one relation; the average is
  // total / n_sentences_with_indicator.
  long total_tokens_in_relation_sentences = 0;

  double avg_sentence_length_tokens() const;

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

CorpusStats compute_stats(const Corpus& corpus, const Tokenizer& tokenizer);
void print_stats_table(std::ostream& out, const CorpusStats& stats);

// Preposition lexicon used to define the indicator candidate set for kappa.
std::set<std::string> default_preposition_lexicon();
std::set<std::string> load_lexicon(const std::filesystem::path& path);

double cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b);
double pairwise_role_f1(const Corpus& a, const Corpus& b, RoleLabel role);

// Candidate decisions: for each token whose lowercase form is in the lexicon,
// whether it lies inside an indicator span. Corpora must cover the same
// sentences.
std::pair<std::vector<bool>, std::vector<bool>> indicator_decisions(
    const Corpus& a, const Corpus& b, const std::set<std::string>& lexicon,
    const Tokenizer& tokenizer);

struct AgreementReport {
  std::optional<double> kappa_indicator;  // empty when no candidate tokens
  std::size_t n_candidates = 0;
  std::map<RoleLabel, double> role_f1;
};

AgreementReport compute_agreement(const Corpus& a, const Corpus& b,
                                  const std::set<std::string>& lexicon,
                                  const Tokenizer& tokenizer);
void print_agreement_table(std::ostream& out, const AgreementReport& report);

}  // namespace radsprl
