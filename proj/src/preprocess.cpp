#include "radsprl/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <ostream>

#include "radsprl/error.hpp"

namespace radsprl {

bool is_detachable_punct(char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '(': case ')': case '/': case '?':
      return true;
    default:
      return false;
  }
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && is_space(text[i])) ++i;
    if (i >= n) break;
    std::size_t j = i;
    while (j < n && !is_space(text[j])) ++j;
    std::size_t b = i, e = j;
    while (b < e && is_detachable_punct(text[b])) ++b;
    while (e > b && is_detachable_punct(text[e - 1])) --e;
    for (std::size_t k = i; k < b; ++k) out.push_back({std::string(1, text[k]), k, k + 1});
    if (b < e) out.push_back({std::string(text.substr(b, e - b)), b, e});
    for (std::size_t k = e; k < j; ++k) out.push_back({std::string(1, text[k]), k, k + 1});
    i = j;
  }
  return out;
}

namespace {

constexpr std::array<std::string_view, 18> kAbbreviations = {
    "dr.", "mr.", "mrs.", "ms.", "a.m.", "p.m.", "e.g.", "i.e.", "vs.",
    "approx.", "no.", "fig.", "st.", "etc.", "cf.", "min.", "max.", "resp."};

}  // namespace

std::vector<SentenceSpan> split_sentences(std::string_view text) {
  std::vector<SentenceSpan> out;
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  auto emit = [&](std::size_t b, std::size_t e) {
    while (b < e && is_space(text[b])) ++b;
    while (e > b && is_space(text[e - 1])) --e;
    if (b < e) out.push_back({b, e, std::string(text.substr(b, e - b))});
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '?') continue;
    std::size_t j = i + 1;
    if (j >= text.size() || !is_space(text[j])) continue;
    while (j < text.size() && is_space(text[j])) ++j;
    if (j >= text.size()) continue;
    const unsigned char next = static_cast<unsigned char>(text[j]);
    if (!std::isupper(next) && !std::isdigit(next)) continue;
    if (c == '.') {
      std::size_t w = i;
      while (w > start && !is_space(text[w - 1])) --w;
      std::string word(text.substr(w, i + 1 - w));
      std::transform(word.begin(), word.end(), word.begin(),
                     [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
      if (std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end()) {
        continue;
      }
    }
    emit(start, i + 1);
    start = j;
  }
  emit(start, text.size());
  return out;
}

std::string_view task_name(Task task) { return task == Task::Roles ? "roles" : "indicator"; }

std::optional<Task> parse_task(std::string_view name) {
  if (name == "roles") return Task::Roles;
  if (name == "indicator") return Task::Indicator;
  return std::nullopt;
}

std::string_view tag_name(Tag tag) {
  switch (tag) {
    case Tag::O: return "O";
    case Tag::Indicator: return "INDICATOR";
    case Tag::BTrajector: return "B-TRAJECTOR";
    case Tag::ITrajector: return "I-TRAJECTOR";
    case Tag::BLandmark: return "B-LANDMARK";
    case Tag::ILandmark: return "I-LANDMARK";
    case Tag::BDiagnosis: return "B-DIAGNOSIS";
    case Tag::IDiagnosis: return "I-DIAGNOSIS";
    case Tag::BHedge: return "B-HEDGE";
    case Tag::IHedge: return "I-HEDGE";
    case Tag::BIndicator: return "B-INDICATOR";
    case Tag::IIndicator: return "I-INDICATOR";
  }
  return "?";
}

std::optional<Tag> parse_tag(std::string_view name) {
  for (int t = 0; t <= static_cast<int>(Tag::IIndicator); ++t) {
    if (tag_name(static_cast<Tag>(t)) == name) return static_cast<Tag>(t);
  }
  return std::nullopt;
}

const std::vector<Tag>& task_labels(Task task) {
  static const std::vector<Tag> roles = {Tag::O,         Tag::Indicator,  Tag::BTrajector,
                                         Tag::ITrajector, Tag::BLandmark,  Tag::ILandmark,
                                         Tag::BDiagnosis, Tag::IDiagnosis, Tag::BHedge,
                                         Tag::IHedge};
  static const std::vector<Tag> indicator = {Tag::O, Tag::BIndicator, Tag::IIndicator};
  return task == Task::Roles ? roles : indicator;
}

std::size_t num_labels(Task task) { return task_labels(task).size(); }

int label_index(Task task, Tag tag) {
  const auto& labels = task_labels(task);
  auto it = std::find(labels.begin(), labels.end(), tag);
  return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
}

Tag begin_tag(RoleLabel role) {
  switch (role) {
    case RoleLabel::Trajector: return Tag::BTrajector;
    case RoleLabel::Landmark: return Tag::BLandmark;
    case RoleLabel::Diagnosis: return Tag::BDiagnosis;
    case RoleLabel::Hedge: return Tag::BHedge;
  }
  return Tag::O;
}

Tag inside_tag(RoleLabel role) {
  return static_cast<Tag>(static_cast<int>(begin_tag(role)) + 1);
}

std::optional<RoleLabel> tag_role(Tag tag) {
  switch (tag) {
    case Tag::BTrajector: case Tag::ITrajector: return RoleLabel::Trajector;
    case Tag::BLandmark: case Tag::ILandmark: return RoleLabel::Landmark;
    case Tag::BDiagnosis: case Tag::IDiagnosis: return RoleLabel::Diagnosis;
    case Tag::BHedge: case Tag::IHedge: return RoleLabel::Hedge;
    default: return std::nullopt;
  }
}

bool is_begin(Tag tag) {
  return tag == Tag::BTrajector || tag == Tag::BLandmark || tag == Tag::BDiagnosis ||
         tag == Tag::BHedge || tag == Tag::BIndicator;
}

std::pair<std::size_t, std::size_t> align_span(const std::vector<Token>& tokens, const Span& span,
                                               AlignmentLog* log) {
  std::size_t first = tokens.size(), last = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].start < span.end && span.start < tokens[i].end) {
      first = std::min(first, i);
      last = i;
    }
  }
  if (first == tokens.size()) {
    throw ValidationError("span [" + std::to_string(span.start) + ", " + std::to_string(span.end) +
                          ") \"" + span.text + "\" overlaps no token");
  }
  if (log && (tokens[first].start != span.start || tokens[last].end != span.end)) ++log->snapped;
  return {first, last};
}

std::vector<Tag> bio_encode(const std::vector<Token>& tokens, const SpatialRelation& relation,
                            AlignmentLog* log) {
  std::vector<Tag> labels(tokens.size(), Tag::O);
  std::vector<bool> claimed(tokens.size(), false);
  auto claim = [&](const Span& span, Tag first_tag, Tag rest_tag) {
    auto [first, last] = align_span(tokens, span, log);
    for (std::size_t i = first; i <= last; ++i) {
      if (claimed[i]) {
        throw ValidationError("overlapping roles: token \"" + tokens[i].text + "\" at offset " +
                              std::to_string(tokens[i].start) + " claimed twice");
      }
      claimed[i] = true;
      labels[i] = i == first ? first_tag : rest_tag;
    }
  };
  claim(relation.indicator, Tag::Indicator, Tag::Indicator);
  for (RoleLabel role : kAllRoles) {
    for (const Span& s : relation.spans(role)) claim(s, begin_tag(role), inside_tag(role));
  }
  return labels;
}

namespace {

Span token_range_span(std::string_view text, const std::vector<Token>& tokens, std::size_t first,
                      std::size_t last) {
  return make_span(text, tokens[first].start, tokens[last].end);
}

}  // namespace

DecodedSpans bio_decode(std::string_view text, const std::vector<Token>& tokens,
                        const std::vector<Tag>& labels) {
  if (tokens.size() != labels.size()) throw ShapeError("bio_decode: tokens/labels length mismatch");
  DecodedSpans out;
  for (RoleLabel r : kAllRoles) out.roles[r];
  std::size_t i = 0;
  const std::size_t n = labels.size();
  while (i < n) {
    const Tag t = labels[i];
    if (t == Tag::O) {
      ++i;
      continue;
    }
    if (t == Tag::Indicator || t == Tag::BIndicator || t == Tag::IIndicator) {
      std::size_t j = i + 1;
      if (t == Tag::Indicator) {
        while (j < n && labels[j] == Tag::Indicator) ++j;
      } else {
        while (j < n && labels[j] == Tag::IIndicator) ++j;
      }
      out.indicators.push_back(token_range_span(text, tokens, i, j - 1));
      i = j;
      continue;
    }
    const RoleLabel role = *tag_role(t);
    std::size_t j = i + 1;
    while (j < n && labels[j] == inside_tag(role)) ++j;
    out.roles[role].push_back(token_range_span(text, tokens, i, j - 1));
    i = j;
  }
  return out;
}

SpatialRelation relation_from_decoded(std::string_view text, const DecodedSpans& decoded,
                                      const Span& indicator) {
  SpatialRelation rel;
  rel.indicator = indicator;
  if (rel.indicator.text.empty()) rel.indicator = make_span(text, indicator.start, indicator.end);
  for (RoleLabel r : kAllRoles) {
    auto it = decoded.roles.find(r);
    if (it != decoded.roles.end()) rel.spans(r) = it->second;
  }
  return rel;
}

namespace {

std::vector<int> flags_for(const std::vector<Token>& tokens, const Span& indicator,
                           AlignmentLog* log) {
  std::vector<int> flags(tokens.size(), 0);
  auto [first, last] = align_span(tokens, indicator, log);
  for (std::size_t i = first; i <= last; ++i) flags[i] = 1;
  return flags;
}

}  // namespace

std::vector<Instance> expand_instances(const AnnotatedSentence& sentence,
                                       const Tokenizer& tokenizer, AlignmentLog* log) {
  std::vector<Instance> out;
  if (sentence.relations.empty()) return out;
  const std::vector<Token> tokens = tokenizer(sentence.text);
  for (const auto& rel : sentence.relations) {
    Instance inst;
    inst.task = Task::Roles;
    inst.text = sentence.text;
    inst.tokens = tokens;
    try {
      inst.labels = bio_encode(tokens, rel, log);
      inst.indicator_flags = flags_for(tokens, rel.indicator, nullptr);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(e.what()) + " (report_id=" + sentence.report_id +
                            " sentence_id=" + sentence.sentence_id + ")");
    }
    inst.source = {sentence.report_id, sentence.sentence_id, rel.indicator};
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<Instance> expand_corpus(const Corpus& corpus, const Tokenizer& tokenizer,
                                    AlignmentLog* log) {
  std::vector<Instance> out;
  for (const auto& s : corpus.sentences) {
    auto part = expand_instances(s, tokenizer, log);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

Instance indicator_instance(const AnnotatedSentence& sentence, const Tokenizer& tokenizer,
                            AlignmentLog* log) {
  Instance inst;
  inst.task = Task::Indicator;
  inst.text = sentence.text;
  inst.tokens = tokenizer(sentence.text);
  inst.labels.assign(inst.tokens.size(), Tag::O);
  inst.indicator_flags.assign(inst.tokens.size(), 0);
  std::vector<const SpatialRelation*> rels;
  for (const auto& r : sentence.relations) rels.push_back(&r);
  std::sort(rels.begin(), rels.end(), [](auto* a, auto* b) { return a->indicator < b->indicator; });
  for (const auto* r : rels) {
    auto [first, last] = align_span(inst.tokens, r->indicator, log);
    for (std::size_t i = first; i <= last; ++i) {
      if (inst.labels[i] != Tag::O) {
        throw ValidationError("overlapping indicators at report_id=" + sentence.report_id +
                              " sentence_id=" + sentence.sentence_id);
      }
      inst.labels[i] = i == first ? Tag::BIndicator : Tag::IIndicator;
    }
  }
  inst.source = {sentence.report_id, sentence.sentence_id, std::nullopt};
  return inst;
}

Instance roles_query(const std::string& report_id, const std::string& sentence_id,
                     std::string_view text, const Span& indicator, const Tokenizer& tokenizer) {
  Instance inst;
  inst.task = Task::Roles;
  inst.text = std::string(text);
  inst.tokens = tokenizer(text);
  inst.indicator_flags = flags_for(inst.tokens, indicator, nullptr);
  inst.labels.assign(inst.tokens.size(), Tag::O);
  for (std::size_t i = 0; i < inst.tokens.size(); ++i) {
    if (inst.indicator_flags[i]) inst.labels[i] = Tag::Indicator;
  }
  Span ind = indicator;
  if (ind.text.empty()) ind = make_span(text, indicator.start, indicator.end);
  inst.source = {report_id, sentence_id, ind};
  return inst;
}

bool is_bio_consistent(const std::vector<Tag>& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Tag t = labels[i];
    const bool inside = t == Tag::ITrajector || t == Tag::ILandmark || t == Tag::IDiagnosis ||
                        t == Tag::IHedge || t == Tag::IIndicator;
    if (!inside) continue;
    if (i == 0) return false;
    const Tag prev = labels[i - 1];
    const Tag begin = static_cast<Tag>(static_cast<int>(t) - 1);
    if (prev != t && prev != begin) return false;
  }
  return true;
}

void write_two_column(std::ostream& out, const std::vector<Instance>& instances) {
  bool first = true;
  for (const auto& inst : instances) {
    if (!first) out << '\n';
    first = false;
    if (inst.source.indicator) {
      out << "#indicator=" << inst.source.indicator->start << ',' << inst.source.indicator->end
          << '\n';
    } else {
      out << "#indicator=none\n";
    }
    for (std::size_t i = 0; i < inst.tokens.size(); ++i) {
      out << inst.tokens[i].text << '\t' << tag_name(inst.labels[i]) << '\n';
    }
  }
}

}  // namespace radsprl
