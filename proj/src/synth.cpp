#include "radsprl/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>

#include "radsprl/error.hpp"
#include "radsprl/preprocess.hpp"
#include "radsprl/rng.hpp"

namespace radsprl::synth {

namespace {

constexpr const char* kDefaultGrammar = R"json({
  "sentences_per_report": 3,
  "lexicons": {
    "DESCRIPTOR": ["mild", "mild streaky", "minimal", "minimal degenerative", "stable",
                   "stable peripheral", "patchy", "small", "focal", "linear", "subtle",
                   "bibasilar", "increased", "irregular", "chronic"],
    "FINDING": ["opacities", "opacity", "scarring", "atelectasis", "changes", "nodule",
                "calcification", "consolidation", "airspace disease", "granuloma",
                "densities", "infiltrate", "effusion", "thickening", "lucency"],
    "ANATOMY": ["left lung base", "right lung base", "right lung apex", "left apex",
                "thoracic spine", "right lower lobe", "left upper lobe", "lingula",
                "right hilum", "left costophrenic angle", "anterior 7th and 8th right ribs",
                "right middle lobe", "lateral left base", "retrocardiac region",
                "right upper lobe", "left midlung", "right perihilar region", "aortic arch"],
    "REGION": ["pleural surface", "minor fissure", "chest wall", "diaphragm", "lung periphery",
               "hemidiaphragm", "cardiac border", "major fissure"],
    "VERB": ["are present", "is present", "is seen", "are seen", "are noted", "is noted",
             "seen", "noted", "persists", "remain"],
    "BE": ["is", "are"],
    "PREP": ["in", "within", "at", "near", "along", "of"],
    "CHAIN_PREP": ["near", "along", "at"],
    "HEDGE": ["may represent", "could represent", "could be", "likely representing",
              "may reflect", "possibly representing"],
    "HEDGE_ADV": ["probably", "possibly", "likely"],
    "DIAGNOSIS": ["pleural reaction", "small pulmonary nodules", "pneumonia", "infection",
                  "cavitary lesion", "bronchovascular crowding", "aspiration", "edema",
                  "granulomatous disease", "malignancy", "subsegmental atelectasis",
                  "pulmonary fibrosis", "emphysema"]
  },
  "templates": [
    {"name": "tl_only", "weight": 0.55,
     "segments": [{"lexicon": "DESCRIPTOR", "span": "T", "probability": 0.6},
                  {"lexicon": "FINDING", "span": "T"}, {"lexicon": "VERB"},
                  {"lexicon": "PREP", "span": "I"}, {"text": "the"},
                  {"lexicon": "ANATOMY", "span": "L"}, {"text": ".", "punct": true}],
     "spans": {"T": [{"role": "trajector", "relation": 0}],
               "I": [{"role": "indicator", "relation": 0}],
               "L": [{"role": "landmark", "relation": 0}]}},
    {"name": "tl_there", "weight": 0.12,
     "segments": [{"text": "there"}, {"lexicon": "BE"},
                  {"lexicon": "DESCRIPTOR", "span": "T", "probability": 0.6},
                  {"lexicon": "FINDING", "span": "T"}, {"lexicon": "PREP", "span": "I"},
                  {"text": "the"}, {"lexicon": "ANATOMY", "span": "L"},
                  {"text": ".", "punct": true}],
     "spans": {"T": [{"role": "trajector", "relation": 0}],
               "I": [{"role": "indicator", "relation": 0}],
               "L": [{"role": "landmark", "relation": 0}]}},
    {"name": "all_four", "weight": 0.1,
     "segments": [{"lexicon": "DESCRIPTOR", "span": "T", "probability": 0.6},
                  {"lexicon": "FINDING", "span": "T"}, {"lexicon": "VERB", "probability": 0.5},
                  {"lexicon": "PREP", "span": "I"}, {"text": "the"},
                  {"lexicon": "ANATOMY", "span": "L"}, {"text": "which"},
                  {"lexicon": "HEDGE", "span": "H"}, {"lexicon": "DIAGNOSIS", "span": "D"},
                  {"text": ".", "punct": true}],
     "spans": {"T": [{"role": "trajector", "relation": 0}],
               "I": [{"role": "indicator", "relation": 0}],
               "L": [{"role": "landmark", "relation": 0}],
               "H": [{"role": "hedge", "relation": 0}],
               "D": [{"role": "diagnosis", "relation": 0}]}},
    {"name": "multi_diagnosis", "weight": 0.05,
     "segments": [{"lexicon": "DESCRIPTOR", "span": "T", "probability": 0.6},
                  {"lexicon": "FINDING", "span": "T"}, {"lexicon": "VERB"},
                  {"lexicon": "PREP", "span": "I"}, {"text": "the"},
                  {"lexicon": "ANATOMY", "span": "L"}, {"text": "which"},
                  {"lexicon": "HEDGE", "span": "H"}, {"lexicon": "DIAGNOSIS", "span": "D1"},
                  {"text": "or"}, {"lexicon": "DIAGNOSIS", "span": "D2"},
                  {"text": ".", "punct": true}],
     "spans": {"T": [{"role": "trajector", "relation": 0}],
               "I": [{"role": "indicator", "relation": 0}],
               "L": [{"role": "landmark", "relation": 0}],
               "H": [{"role": "hedge", "relation": 0}],
               "D1": [{"role": "diagnosis", "relation": 0}],
               "D2": [{"role": "diagnosis", "relation": 0}]}},
    {"name": "diagnosis_only", "weight": 0.03,
     "segments": [{"lexicon": "DESCRIPTOR", "span": "T", "probability": 0.6},
                  {"lexicon": "FINDING", "span": "T"}, {"lexicon": "PREP", "span": "I"},
                  {"text": "the"}, {"lexicon": "ANATOMY", "span": "L"},
                  {"text": ","}, {"text": "consistent with"},
                  {"lexicon": "DIAGNOSIS", "span": "D"}, {"text": ".", "punct": true}],
     "spans": {"T": [{"role": "trajector", "relation": 0}],
               "I": [{"role": "indicator", "relation": 0}],
               "L": [{"role": "landmark", "relation": 0}],
               "D": [{"role": "diagnosis", "relation": 0}]}},
    {"name": "hedge_only", "weight": 0.05,
     "segments": [{"lexicon": "HEDGE_ADV", "span": "H"}, {"lexicon": "FINDING", "span": "T"},
                  {"lexicon": "PREP", "span": "I"}, {"text": "the"},
                  {"lexicon": "ANATOMY", "span": "L"}, {"text": ".", "punct": true}],
     "spans": {"T": [{"role": "trajector", "relation": 0}],
               "I": [{"role": "indicator", "relation": 0}],
               "L": [{"role": "landmark", "relation": 0}],
               "H": [{"role": "hedge", "relation": 0}]}},
    {"name": "chained", "weight": 0.05,
     "segments": [{"lexicon": "DESCRIPTOR", "span": "T", "probability": 0.6},
                  {"lexicon": "FINDING", "span": "T"}, {"lexicon": "PREP", "span": "I1"},
                  {"text": "the"}, {"lexicon": "ANATOMY", "span": "A"},
                  {"lexicon": "CHAIN_PREP", "span": "I2"}, {"text": "the"},
                  {"lexicon": "REGION", "span": "R"}, {"text": ".", "punct": true}],
     "spans": {"T": [{"role": "trajector", "relation": 0}],
               "I1": [{"role": "indicator", "relation": 0}],
               "A": [{"role": "landmark", "relation": 0}, {"role": "trajector", "relation": 1}],
               "I2": [{"role": "indicator", "relation": 1}],
               "R": [{"role": "landmark", "relation": 1}]}}
  ]
})json";

const std::set<std::string> kRoles = {"indicator", "trajector", "landmark", "diagnosis", "hedge"};

bool plain_words(const std::string& s) {
  if (s.empty() || s.front() == ' ' || s.back() == ' ') return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c == ' ') {
      if (s[i - 1] == ' ') return false;
    } else if (!std::isalnum(c) && c != '-' && c != '\'') {
      return false;
    }
  }
  return true;
}

long word_count(const std::string& s) {
  return 1 + static_cast<long>(std::count(s.begin(), s.end(), ' '));
}

}  // namespace

int Template::relation_count() const {
  int n = 0;
  for (const auto& [id, targets] : spans) {
    for (const auto& t : targets) n = std::max(n, t.relation + 1);
  }
  return n;
}

TemplateGrammar TemplateGrammar::default_grammar() {
  return from_json(nlohmann::json::parse(kDefaultGrammar));
}

TemplateGrammar TemplateGrammar::from_json(const nlohmann::json& j) {
  TemplateGrammar g;
  try {
    g.sentences_per_report = j.value("sentences_per_report", 3);
    for (const auto& [name, entries] : j.at("lexicons").items()) {
      g.lexicons[name] = entries.get<std::vector<std::string>>();
    }
    for (const auto& tj : j.at("templates")) {
      Template t;
      t.name = tj.at("name").get<std::string>();
      t.weight = tj.value("weight", 1.0);
      for (const auto& sj : tj.at("segments")) {
        Segment s;
        s.lexicon = sj.value("lexicon", "");
        s.text = sj.value("text", "");
        s.span = sj.value("span", "");
        s.probability = sj.value("probability", 1.0);
        s.punct = sj.value("punct", false);
        t.segments.push_back(std::move(s));
      }
      for (const auto& [id, targets] : tj.at("spans").items()) {
        for (const auto& target : targets) {
          t.spans[id].push_back({target.at("role").get<std::string>(), target.at("relation").get<int>()});
        }
      }
      g.templates.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad grammar: ") + e.what());
  }
  g.validate();
  return g;
}

nlohmann::json TemplateGrammar::to_json() const {
  nlohmann::json j;
  j["sentences_per_report"] = sentences_per_report;
  j["lexicons"] = lexicons;
  j["templates"] = nlohmann::json::array();
  for (const auto& t : templates) {
    nlohmann::json tj;
    tj["name"] = t.name;
    tj["weight"] = t.weight;
    tj["segments"] = nlohmann::json::array();
    for (const auto& s : t.segments) {
      nlohmann::json sj;
      if (!s.lexicon.empty()) sj["lexicon"] = s.lexicon;
      if (!s.text.empty()) sj["text"] = s.text;
      if (!s.span.empty()) sj["span"] = s.span;
      if (s.probability != 1.0) sj["probability"] = s.probability;
      if (s.punct) sj["punct"] = true;
      tj["segments"].push_back(std::move(sj));
    }
    for (const auto& [id, targets] : t.spans) {
      for (const auto& target : targets) {
        tj["spans"][id].push_back({{"role", target.role}, {"relation", target.relation}});
      }
    }
    j["templates"].push_back(std::move(tj));
  }
  return j;
}

void TemplateGrammar::validate() const {
  if (sentences_per_report < 1) throw ValidationError("sentences_per_report must be positive");
  for (const auto& [name, entries] : lexicons) {
    if (entries.empty()) throw ValidationError("lexicon " + name + " is empty");
    for (const auto& e : entries) {
      if (!plain_words(e)) throw ValidationError("lexicon " + name + " entry \"" + e + "\" is not plain words");
    }
  }
  double total = 0.0;
  for (const auto& t : templates) {
    if (t.weight < 0.0) throw ValidationError("template " + t.name + " has a negative weight");
    total += t.weight;
    std::set<std::string> closed;
    std::string open;
    bool first_word = true;
    for (const auto& s : t.segments) {
      if (!s.lexicon.empty() == !s.text.empty()) {
        throw ValidationError("template " + t.name + ": a segment needs exactly one of lexicon/text");
      }
      if (!s.lexicon.empty() && !lexicons.count(s.lexicon)) {
        throw ValidationError("template " + t.name + ": unknown lexicon " + s.lexicon);
      }
      if (s.punct) {
        if (s.text.size() != 1 || !is_detachable_punct(s.text[0]) || !s.span.empty()) {
          throw ValidationError("template " + t.name + ": punctuation segments hold one character and no span");
        }
        if (first_word) throw ValidationError("template " + t.name + ": punctuation cannot start a sentence");
      } else if (!s.text.empty() && !plain_words(s.text) &&
                 !(s.text.size() == 1 && is_detachable_punct(s.text[0]) && s.span.empty())) {
        throw ValidationError("template " + t.name + ": literal \"" + s.text + "\" is not plain words");
      }
      first_word = false;
      if (s.span != open) {
        if (!open.empty()) closed.insert(open);
        if (!s.span.empty() && closed.count(s.span)) {
          throw ValidationError("template " + t.name + ": span " + s.span + " is not contiguous");
        }
        open = s.span;
      }
      if (!s.span.empty() && !t.spans.count(s.span)) {
        throw ValidationError("template " + t.name + ": span " + s.span + " has no role");
      }
    }
    std::set<int> with_indicator;
    for (const auto& [id, targets] : t.spans) {
      bool required = false;
      for (const auto& seg : t.segments) {
        if (seg.span == id && seg.probability >= 1.0) required = true;
      }
      for (const auto& target : targets) {
        if (!kRoles.count(target.role)) throw ValidationError("template " + t.name + ": unknown role " + target.role);
        if (target.relation < 0) throw ValidationError("template " + t.name + ": negative relation index");
        if (target.role == "indicator" && required) with_indicator.insert(target.relation);
      }
    }
    for (int r = 0; r < t.relation_count(); ++r) {
      if (!with_indicator.count(r)) {
        throw ValidationError("template " + t.name + ": relation " + std::to_string(r) + " lacks a required indicator");
      }
    }
  }
  if (!(total > 0.0)) throw ValidationError("template weights sum to zero");
}

void TemplateGrammar::set_weights(const std::map<std::string, double>& weights) {
  for (auto& t : templates) {
    auto it = weights.find(t.name);
    t.weight = it == weights.end() ? 0.0 : it->second;
  }
  for (const auto& [name, w] : weights) {
    if (std::none_of(templates.begin(), templates.end(), [&](const Template& t) { return t.name == name; })) {
      throw ValidationError("no template named " + name);
    }
  }
  validate();
}

nlohmann::json Tally::to_json() const {
  const auto& s = stats;
  return {{"n_sentences", n_sentences},
          {"n_relations", s.n_relations},
          {"n_trajectors", s.n_trajectors},
          {"n_landmarks", s.n_landmarks},
          {"n_diagnoses", s.n_diagnoses},
          {"n_hedges", s.n_hedges},
          {"n_sentences_with_indicator", s.n_sentences_with_indicator},
          {"max_indicators_per_sentence", s.max_indicators_per_sentence},
          {"n_rel_traj_land_only", s.n_rel_traj_land_only},
          {"n_rel_with_diag_no_hedge", s.n_rel_with_diag_no_hedge},
          {"n_rel_with_hedge_no_diag", s.n_rel_with_hedge_no_diag},
          {"n_rel_all_four", s.n_rel_all_four},
          {"n_rel_multi_diagnosis", s.n_rel_multi_diagnosis},
          {"max_diagnoses_per_relation", s.max_diagnoses_per_relation},
          {"total_tokens", s.total_tokens_in_relation_sentences},
          {"template_counts", template_counts}};
}

namespace {

struct RoleCounts {
  long traj = 0, land = 0, diag = 0, hedge = 0;
};

struct Draft {
  AnnotatedSentence sentence;
  std::string template_name;
  std::vector<RoleCounts> per_relation;
  long tokens = 0;
};

const Template& pick_template(const TemplateGrammar& g, Rng& rng) {
  double total = 0.0;
  for (const auto& t : g.templates) total += t.weight;
  double u = uniform01(rng) * total;
  for (const auto& t : g.templates) {
    if (t.weight <= 0.0) continue;
    if (u < t.weight) return t;
    u -= t.weight;
  }
  for (auto it = g.templates.rbegin(); it != g.templates.rend(); ++it) {
    if (it->weight > 0.0) return *it;
  }
  return g.templates.back();
}

Draft draft_sentence(const TemplateGrammar& g, Rng& rng, std::size_t index) {
  const Template& t = pick_template(g, rng);
  Draft d;
  d.template_name = t.name;
  std::string text;
  std::map<std::string, std::pair<std::size_t, std::size_t>> span_pos;
  for (const auto& seg : t.segments) {
    if (seg.probability < 1.0 && uniform01(rng) >= seg.probability) continue;
    std::string piece = seg.lexicon.empty()
                            ? seg.text
                            : g.lexicons.at(seg.lexicon)[uniform_index(rng, g.lexicons.at(seg.lexicon).size())];
    const bool punct = seg.punct || (piece.size() == 1 && is_detachable_punct(piece[0]));
    if (!text.empty() && !punct) text += ' ';
    const std::size_t start = text.size();
    text += piece;
    d.tokens += punct ? 1 : word_count(piece);
    if (!seg.span.empty()) {
      auto [it, inserted] = span_pos.emplace(seg.span, std::make_pair(start, text.size()));
      if (!inserted) it->second.second = text.size();
    }
  }
  if (!text.empty()) text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));

  const int n_rel = t.relation_count();
  d.sentence.relations.resize(static_cast<std::size_t>(n_rel));
  d.per_relation.resize(static_cast<std::size_t>(n_rel));
  for (const auto& [id, targets] : t.spans) {
    auto it = span_pos.find(id);
    if (it == span_pos.end()) continue;
    const Span span = make_span(text, it->second.first, it->second.second);
    for (const auto& target : targets) {
      auto& rel = d.sentence.relations[static_cast<std::size_t>(target.relation)];
      auto& counts = d.per_relation[static_cast<std::size_t>(target.relation)];
      if (target.role == "indicator") {
        rel.indicator = span;
      } else if (target.role == "trajector") {
        rel.trajectors.push_back(span);
        ++counts.traj;
      } else if (target.role == "landmark") {
        rel.landmarks.push_back(span);
        ++counts.land;
      } else if (target.role == "diagnosis") {
        rel.diagnoses.push_back(span);
        ++counts.diag;
      } else {
        rel.hedges.push_back(span);
        ++counts.hedge;
      }
    }
  }
  for (auto& rel : d.sentence.relations) {
    for (RoleLabel r : kAllRoles) std::sort(rel.spans(r).begin(), rel.spans(r).end());
  }
  char rid[32], sid[32];
  std::snprintf(rid, sizeof rid, "R%05zu", index / static_cast<std::size_t>(g.sentences_per_report));
  std::snprintf(sid, sizeof sid, "S%zu", index % static_cast<std::size_t>(g.sentences_per_report));
  d.sentence.report_id = rid;
  d.sentence.sentence_id = sid;
  d.sentence.text = std::move(text);
  return d;
}

void record(Tally& tally, const Draft& d) {
  ++tally.n_sentences;
  ++tally.template_counts[d.template_name];
  auto& s = tally.stats;
  if (d.per_relation.empty()) return;
  ++s.n_sentences_with_indicator;
  s.total_tokens_in_relation_sentences += d.tokens;
  s.max_indicators_per_sentence =
      std::max(s.max_indicators_per_sentence, static_cast<long>(d.per_relation.size()));
  for (const auto& c : d.per_relation) {
    ++s.n_relations;
    s.n_trajectors += c.traj;
    s.n_landmarks += c.land;
    s.n_diagnoses += c.diag;
    s.n_hedges += c.hedge;
    const bool tl = c.traj > 0 && c.land > 0;
    s.n_rel_traj_land_only += tl && c.diag == 0 && c.hedge == 0;
    s.n_rel_with_diag_no_hedge += tl && c.diag > 0 && c.hedge == 0;
    s.n_rel_with_hedge_no_diag += tl && c.hedge > 0 && c.diag == 0;
    s.n_rel_all_four += tl && c.diag > 0 && c.hedge > 0;
    s.n_rel_multi_diagnosis += c.diag > 1;
    s.max_diagnoses_per_relation = std::max(s.max_diagnoses_per_relation, c.diag);
  }
}

}  // namespace

Generated generate(std::size_t n_sentences, std::uint64_t seed, const TemplateGrammar& grammar) {
  grammar.validate();
  Rng rng(seed);
  Generated out;
  std::vector<AnnotatedSentence> sentences;
  sentences.reserve(n_sentences);
  for (std::size_t i = 0; i < n_sentences; ++i) {
    Draft d = draft_sentence(grammar, rng, i);
    record(out.tally, d);
    sentences.push_back(std::move(d.sentence));
  }
  out.corpus = make_corpus(std::move(sentences));
  return out;
}

Generated generate_relations(std::size_t n_relations, std::uint64_t seed,
                             const TemplateGrammar& grammar) {
  grammar.validate();
  Rng rng(seed);
  Generated out;
  std::vector<AnnotatedSentence> sentences;
  std::size_t held = 0;
  std::size_t attempts = 0;
  while (held < n_relations) {
    if (++attempts > 100 * (n_relations + 10)) {
      throw ValidationError("grammar cannot produce exactly " + std::to_string(n_relations) + " relations");
    }
    Draft d = draft_sentence(grammar, rng, sentences.size());
    const std::size_t k = d.sentence.relations.size();
    if (k == 0 || held + k > n_relations) continue;
    held += k;
    record(out.tally, d);
    sentences.push_back(std::move(d.sentence));
  }
  out.corpus = make_corpus(std::move(sentences));
  return out;
}

}  // namespace radsprl::synth
