#include "radsprl/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "radsprl/error.hpp"
#include "radsprl/preprocess.hpp"

namespace radsprl {

using nlohmann::json;

std::string_view role_name(RoleLabel role) {
  switch (role) {
    case RoleLabel::Trajector: return "TRAJECTOR";
    case RoleLabel::Landmark: return "LANDMARK";
    case RoleLabel::Diagnosis: return "DIAGNOSIS";
    case RoleLabel::Hedge: return "HEDGE";
  }
  return "?";
}

std::string_view role_display_name(RoleLabel role) {
  switch (role) {
    case RoleLabel::Trajector: return "Trajector";
    case RoleLabel::Landmark: return "Landmark";
    case RoleLabel::Diagnosis: return "Diagnosis";
    case RoleLabel::Hedge: return "Hedge";
  }
  return "?";
}

std::optional<RoleLabel> parse_role(std::string_view name) {
  for (RoleLabel r : kAllRoles) {
    if (role_name(r) == name) return r;
  }
  return std::nullopt;
}

const std::vector<Span>& SpatialRelation::spans(RoleLabel role) const {
  switch (role) {
    case RoleLabel::Trajector: return trajectors;
    case RoleLabel::Landmark: return landmarks;
    case RoleLabel::Diagnosis: return diagnoses;
    case RoleLabel::Hedge: return hedges;
  }
  return trajectors;
}

std::vector<Span>& SpatialRelation::spans(RoleLabel role) {
  return const_cast<std::vector<Span>&>(std::as_const(*this).spans(role));
}

Span make_span(std::string_view text, std::size_t start, std::size_t end) {
  if (start >= end || end > text.size()) {
    throw ValidationError("span [" + std::to_string(start) + ", " + std::to_string(end) +
                          ") out of bounds for text of length " + std::to_string(text.size()));
  }
  return Span{start, end, std::string(text.substr(start, end - start))};
}

namespace {

std::string where(const AnnotatedSentence& s) {
  return "report_id=" + s.report_id + " sentence_id=" + s.sentence_id;
}

void check_span(const AnnotatedSentence& s, const Span& span, std::string_view what) {
  if (span.start >= span.end || span.end > s.text.size()) {
    throw ValidationError(std::string(what) + " span [" + std::to_string(span.start) + ", " +
                          std::to_string(span.end) + ") out of bounds (text length " +
                          std::to_string(s.text.size()) + ") at " + where(s));
  }
  if (s.text.compare(span.start, span.end - span.start, span.text) != 0) {
    throw ValidationError(std::string(what) + " span text \"" + span.text +
                          "\" does not match sentence text at " + where(s));
  }
}

}  // namespace

void validate_sentence(const AnnotatedSentence& s) {
  std::set<std::pair<std::size_t, std::size_t>> indicators;
  for (const auto& rel : s.relations) {
    check_span(s, rel.indicator, "indicator");
    if (!indicators.emplace(rel.indicator.start, rel.indicator.end).second) {
      throw ValidationError("duplicate indicator span [" + std::to_string(rel.indicator.start) +
                            ", " + std::to_string(rel.indicator.end) + ") at " + where(s));
    }
    for (RoleLabel role : kAllRoles) {
      std::vector<Span> sorted = rel.spans(role);
      for (const auto& span : sorted) check_span(s, span, role_name(role));
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i].start < sorted[i - 1].end) {
          throw ValidationError("overlapping " + std::string(role_name(role)) + " spans at " +
                                where(s));
        }
      }
    }
  }
}

Corpus make_corpus(std::vector<AnnotatedSentence> sentences) {
  Corpus corpus;
  std::set<std::pair<std::string, std::string>> ids;
  for (const auto& s : sentences) {
    validate_sentence(s);
    if (!ids.emplace(s.report_id, s.sentence_id).second) {
      throw ValidationError("duplicate sentence_id at " + where(s));
    }
    corpus.report_ids.insert(s.report_id);
  }
  corpus.sentences = std::move(sentences);
  return corpus;
}

namespace {

json span_to_json(const Span& s) { return json{{"start", s.start}, {"end", s.end}}; }

json spans_to_json(const std::vector<Span>& spans) {
  json arr = json::array();
  for (const auto& s : spans) arr.push_back(span_to_json(s));
  return arr;
}

Span span_from_json(const json& j, const std::string& text, std::size_t line_no) {
  if (!j.is_object() || !j.contains("start") || !j.contains("end") ||
      !j["start"].is_number_unsigned() || !j["end"].is_number_unsigned()) {
    throw ParseError(line_no, "span must be an object with non-negative integer start/end");
  }
  Span s;
  s.start = j["start"].get<std::size_t>();
  s.end = j["end"].get<std::size_t>();
  // Text is rebuilt here only when in bounds; validation reports the rest.
  if (s.start < s.end && s.end <= text.size()) {
    s.text = text.substr(s.start, s.end - s.start);
  }
  if (j.contains("text")) {
    if (!j["text"].is_string() || j["text"].get<std::string>() != s.text) {
      throw ParseError(line_no, "span text does not match sentence text");
    }
  }
  return s;
}

std::vector<Span> spans_from_json(const json& j, const char* key, const std::string& text,
                                  std::size_t line_no) {
  std::vector<Span> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) throw ParseError(line_no, std::string("\"") + key + "\" must be a list");
  for (const auto& e : j[key]) out.push_back(span_from_json(e, text, line_no));
  return out;
}

std::string required_string(const json& j, const char* key, std::size_t line_no) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw ParseError(line_no, std::string("missing string field \"") + key + "\"");
  }
  return j[key].get<std::string>();
}

}  // namespace

std::string format_sentence_json(const AnnotatedSentence& s) {
  json rels = json::array();
  for (const auto& r : s.relations) {
    rels.push_back(json{{"indicator", span_to_json(r.indicator)},
                        {"trajectors", spans_to_json(r.trajectors)},
                        {"landmarks", spans_to_json(r.landmarks)},
                        {"diagnoses", spans_to_json(r.diagnoses)},
                        {"hedges", spans_to_json(r.hedges)}});
  }
  json j;
  j["report_id"] = s.report_id;
  j["sentence_id"] = s.sentence_id;
  j["text"] = s.text;
  j["relations"] = std::move(rels);
  return j.dump();
}

AnnotatedSentence parse_sentence_json(std::string_view line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line_no, "expected a JSON object");
  AnnotatedSentence s;
  s.report_id = required_string(j, "report_id", line_no);
  s.sentence_id = required_string(j, "sentence_id", line_no);
  s.text = required_string(j, "text", line_no);
  if (j.contains("relations")) {
    if (!j["relations"].is_array()) throw ParseError(line_no, "\"relations\" must be a list");
    for (const auto& rj : j["relations"]) {
      if (!rj.is_object() || !rj.contains("indicator")) {
        throw ParseError(line_no, "relation without indicator");
      }
      SpatialRelation r;
      r.indicator = span_from_json(rj["indicator"], s.text, line_no);
      r.trajectors = spans_from_json(rj, "trajectors", s.text, line_no);
      r.landmarks = spans_from_json(rj, "landmarks", s.text, line_no);
      r.diagnoses = spans_from_json(rj, "diagnoses", s.text, line_no);
      r.hedges = spans_from_json(rj, "hedges", s.text, line_no);
      s.relations.push_back(std::move(r));
    }
  }
  return s;
}

Corpus read_corpus(std::istream& in) {
  std::vector<AnnotatedSentence> sentences;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::pair<std::string, std::string>> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    AnnotatedSentence s = parse_sentence_json(line, line_no);
    try {
      validate_sentence(s);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!ids.emplace(s.report_id, s.sentence_id).second) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate sentence_id at " +
                            where(s));
    }
    sentences.push_back(std::move(s));
  }
  return make_corpus(std::move(sentences));
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file " + path.string());
  return read_corpus(in);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& s : corpus.sentences) out << format_sentence_json(s) << '\n';
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_corpus(out, corpus);
}

double CorpusStats::avg_sentence_length_tokens() const {
  if (n_sentences_with_indicator == 0) return 0.0;
  return static_cast<double>(total_tokens_in_relation_sentences) /
         static_cast<double>(n_sentences_with_indicator);
}

CorpusStats compute_stats(const Corpus& corpus, const Tokenizer& tokenizer) {
  CorpusStats st;
  for (const auto& s : corpus.sentences) {
    if (s.relations.empty()) continue;
    ++st.n_sentences_with_indicator;
    st.total_tokens_in_relation_sentences += static_cast<long>(tokenizer(s.text).size());
    st.max_indicators_per_sentence =
        std::max(st.max_indicators_per_sentence, static_cast<long>(s.relations.size()));
    for (const auto& r : s.relations) {
      ++st.n_relations;
      const long nt = static_cast<long>(r.trajectors.size());
      const long nl = static_cast<long>(r.landmarks.size());
      const long nd = static_cast<long>(r.diagnoses.size());
      const long nh = static_cast<long>(r.hedges.size());
      st.n_trajectors += nt;
      st.n_landmarks += nl;
      st.n_diagnoses += nd;
      st.n_hedges += nh;
      const bool tl = nt > 0 && nl > 0;
      if (tl && nd == 0 && nh == 0) ++st.n_rel_traj_land_only;
      if (tl && nd > 0 && nh == 0) ++st.n_rel_with_diag_no_hedge;
      if (tl && nh > 0 && nd == 0) ++st.n_rel_with_hedge_no_diag;
      if (tl && nd > 0 && nh > 0) ++st.n_rel_all_four;
      if (nd > 1) ++st.n_rel_multi_diagnosis;
      st.max_diagnoses_per_relation = std::max(st.max_diagnoses_per_relation, nd);
    }
  }
  return st;
}

void print_stats_table(std::ostream& out, const CorpusStats& st) {
  const std::vector<std::pair<std::string, std::string>> rows = {
      {"Average length of sentence containing spatial relation",
       [&] {
         std::ostringstream os;
         os << std::fixed << std::setprecision(2) << st.avg_sentence_length_tokens();
         return os.str();
       }()},
      {"Spatial Indicator", std::to_string(st.n_relations)},
      {"Trajector", std::to_string(st.n_trajectors)},
      {"Landmark", std::to_string(st.n_landmarks)},
      {"Diagnosis", std::to_string(st.n_diagnoses)},
      {"Hedge", std::to_string(st.n_hedges)},
      {"Sentences containing at least 1 Spatial Indicator",
       std::to_string(st.n_sentences_with_indicator)},
      {"Maximum number of Spatial Indicator in any sentence",
       std::to_string(st.max_indicators_per_sentence)},
      {"Spatial relations containing only Trajector and Landmark",
       std::to_string(st.n_rel_traj_land_only)},
      {"Spatial relations containing only Trajector, Landmark, and Diagnosis",
       std::to_string(st.n_rel_with_diag_no_hedge)},
      {"Spatial relations containing only Trajector, Landmark, and Hedge",
       std::to_string(st.n_rel_with_hedge_no_diag)},
      {"Spatial relations containing all 4 spatial roles", std::to_string(st.n_rel_all_four)},
      {"Spatial relations containing more than 1 Diagnosis",
       std::to_string(st.n_rel_multi_diagnosis)},
      {"Maximum Diagnosis terms associated with any spatial relation",
       std::to_string(st.max_diagnoses_per_relation)},
  };
  std::size_t width = std::string("Parameter").size();
  for (const auto& [k, v] : rows) width = std::max(width, k.size());
  out << std::left << std::setw(static_cast<int>(width)) << "Parameter" << " | Frequency\n";
  out << std::string(width, '-') << "-+----------\n";
  for (const auto& [k, v] : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << k << " | " << v << '\n';
  }
}

}  // namespace radsprl
