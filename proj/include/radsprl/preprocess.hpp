#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "radsprl/corpus.hpp"

namespace radsprl {

struct Token {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

// Whitespace split, then leading/trailing characters from ".,;:()/?" are
// detached one per token. Offsets index into `text`.
std::vector<Token> tokenize(std::string_view text);
bool is_detachable_punct(char c);

struct SentenceSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string text;

  friend bool operator==(const SentenceSpan&, const SentenceSpan&) = default;
};

// Splits after '.' or '?' when followed by whitespace and an uppercase letter
// or digit, unless the word ending there is a known abbreviation.
std::vector<SentenceSpan> split_sentences(std::string_view report_text);

enum class Task { Roles, Indicator };

std::string_view task_name(Task task);
std::optional<Task> parse_task(std::string_view name);

enum class Tag : unsigned char {
  O,
  Indicator,
  BTrajector,
  ITrajector,
  BLandmark,
  ILandmark,
  BDiagnosis,
  IDiagnosis,
  BHedge,
  IHedge,
  BIndicator,
  IIndicator,
};

std::string_view tag_name(Tag tag);
std::optional<Tag> parse_tag(std::string_view name);

// Output space of each task; positions define the model's label indices.
const std::vector<Tag>& task_labels(Task task);
std::size_t num_labels(Task task);
int label_index(Task task, Tag tag);  // -1 when the tag is outside the task

Tag begin_tag(RoleLabel role);
Tag inside_tag(RoleLabel role);
std::optional<RoleLabel> tag_role(Tag tag);
bool is_begin(Tag tag);

struct InstanceSource {
  std::string report_id;
  std::string sentence_id;
  std::optional<Span> indicator;  // absent for indicator-task instances

  friend bool operator==(const InstanceSource&, const InstanceSource&) = default;
};

struct Instance {
  Task task = Task::Roles;
  std::string text;
  std::vector<Token> tokens;
  std::vector<Tag> labels;
  std::vector<int> indicator_flags;
  InstanceSource source;

  friend bool operator==(const Instance&, const Instance&) = default;
};

// Counts spans whose boundaries were snapped outward to token boundaries.
struct AlignmentLog {
  std::size_t snapped = 0;
};

// Token index range [first, last] covered by a span, snapping outward.
// Throws ValidationError when the span touches no token.
std::pair<std::size_t, std::size_t> align_span(const std::vector<Token>& tokens, const Span& span,
                                               AlignmentLog* log = nullptr);

std::vector<Tag> bio_encode(const std::vector<Token>& tokens, const SpatialRelation& relation,
                            AlignmentLog* log = nullptr);

struct DecodedSpans {
  std::map<RoleLabel, std::vector<Span>> roles;
  std::vector<Span> indicators;
};

// Inverse of bio_encode. An I-X that does not continue an X run opens a new
// span. Both INDICATOR and B-/I-INDICATOR runs go to `indicators`.
DecodedSpans bio_decode(std::string_view text, const std::vector<Token>& tokens,
                        const std::vector<Tag>& labels);

// Rebuilds a relation from decoded spans and the indicator given by flags.
SpatialRelation relation_from_decoded(std::string_view text, const DecodedSpans& decoded,
                                      const Span& indicator);

// One roles-task Instance per relation of the sentence.
std::vector<Instance> expand_instances(const AnnotatedSentence& sentence,
                                       const Tokenizer& tokenizer = tokenize,
                                       AlignmentLog* log = nullptr);
std::vector<Instance> expand_corpus(const Corpus& corpus, const Tokenizer& tokenizer = tokenize,
                                    AlignmentLog* log = nullptr);

// One indicator-task Instance per sentence, B-/I-INDICATOR on every indicator.
Instance indicator_instance(const AnnotatedSentence& sentence,
                            const Tokenizer& tokenizer = tokenize, AlignmentLog* log = nullptr);

// Roles-task input for a raw sentence and a supplied indicator (labels all O
// except INDICATOR); used at prediction time.
Instance roles_query(const std::string& report_id, const std::string& sentence_id,
                     std::string_view text, const Span& indicator,
                     const Tokenizer& tokenizer = tokenize);

bool is_bio_consistent(const std::vector<Tag>& labels);

// Two-column debug format: "#indicator=<start>,<end>", then "token\tlabel"
// lines, blank line between instances.
void write_two_column(std::ostream& out, const std::vector<Instance>& instances);

}  // namespace radsprl
