#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "radsprl/corpus.hpp"
#include "radsprl/error.hpp"
#include "radsprl/preprocess.hpp"

namespace radsprl {

std::set<std::string> default_preposition_lexicon() {
  return {"about", "above", "across", "adjacent", "along", "around", "at",
          "behind", "below", "beneath", "between", "beyond", "by", "from",
          "in", "inside", "into", "near", "of", "on", "outside", "over",
          "overlying", "through", "throughout", "to", "under", "underlying", "with", "within"};
}

std::set<std::string> load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open lexicon " + path.string());
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    std::size_t b = 0;
    while (b < line.size() && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
    if (b == line.size() || line[b] == '#') continue;
    std::string word = line.substr(b);
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.insert(std::move(word));
  }
  return out;
}

double cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b) {
  if (a.size() != b.size()) throw ValidationError("kappa: decision lists differ in length");
  if (a.empty()) throw ValidationError("kappa: empty decision lists");
  const double n = static_cast<double>(a.size());
  double agree = 0, yes_a = 0, yes_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += (a[i] == b[i]);
    yes_a += a[i];
    yes_b += b[i];
  }
  const double p_o = agree / n;
  const double p_e = (yes_a / n) * (yes_b / n) + (1 - yes_a / n) * (1 - yes_b / n);
  if (p_e == 1.0) return a == b ? 1.0 : 0.0;
  return (p_o - p_e) / (1 - p_e);
}

namespace {

using SentenceKey = std::pair<std::string, std::string>;

std::map<SentenceKey, const AnnotatedSentence*> index_sentences(const Corpus& c) {
  std::map<SentenceKey, const AnnotatedSentence*> idx;
  for (const auto& s : c.sentences) idx[{s.report_id, s.sentence_id}] = &s;
  return idx;
}

void require_same_sentences(const std::map<SentenceKey, const AnnotatedSentence*>& a,
                            const std::map<SentenceKey, const AnnotatedSentence*>& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end() && ib != b.end(); ++ia, ++ib) {
    if (ia->first != ib->first) break;
    if (ia->second->text != ib->second->text) {
      throw ValidationError("sentence text differs for report_id=" + ia->first.first +
                            " sentence_id=" + ia->first.second);
    }
  }
  if (ia != a.end() || ib != b.end()) {
    throw ValidationError("sentence set mismatch: the two corpora annotate different sentences");
  }
}

// (sentence, indicator start, indicator end, span start, span end)
using SpanKey = std::tuple<std::string, std::string, std::size_t, std::size_t, std::size_t,
                           std::size_t>;

std::set<SpanKey> role_spans(const Corpus& c, RoleLabel role) {
  std::set<SpanKey> out;
  for (const auto& s : c.sentences) {
    for (const auto& r : s.relations) {
      for (const auto& sp : r.spans(role)) {
        out.emplace(s.report_id, s.sentence_id, r.indicator.start, r.indicator.end, sp.start,
                    sp.end);
      }
    }
  }
  return out;
}

}  // namespace

double pairwise_role_f1(const Corpus& a, const Corpus& b, RoleLabel role) {
  require_same_sentences(index_sentences(a), index_sentences(b));
  const auto gold = role_spans(a, role);
  const auto pred = role_spans(b, role);
  if (gold.empty() && pred.empty()) return 1.0;
  std::size_t tp = 0;
  for (const auto& k : pred) tp += gold.count(k);
  if (tp == 0) return 0.0;
  const double p = static_cast<double>(tp) / static_cast<double>(pred.size());
  const double r = static_cast<double>(tp) / static_cast<double>(gold.size());
  return 2 * p * r / (p + r);
}

std::pair<std::vector<bool>, std::vector<bool>> indicator_decisions(
    const Corpus& a, const Corpus& b, const std::set<std::string>& lexicon,
    const Tokenizer& tokenizer) {
  const auto ia = index_sentences(a);
  const auto ib = index_sentences(b);
  require_same_sentences(ia, ib);
  auto covered = [](const AnnotatedSentence& s, const Token& t) {
    return std::any_of(s.relations.begin(), s.relations.end(), [&](const SpatialRelation& r) {
      return t.start < r.indicator.end && r.indicator.start < t.end;
    });
  };
  std::vector<bool> da, db;
  for (const auto& [key, sa] : ia) {
    const AnnotatedSentence& sb = *ib.at(key);
    for (const Token& t : tokenizer(sa->text)) {
      std::string lower = t.text;
      std::transform(lower.begin(), lower.end(), lower.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      if (!lexicon.count(lower)) continue;
      da.push_back(covered(*sa, t));
      db.push_back(covered(sb, t));
    }
  }
  return {std::move(da), std::move(db)};
}

AgreementReport compute_agreement(const Corpus& a, const Corpus& b,
                                  const std::set<std::string>& lexicon,
                                  const Tokenizer& tokenizer) {
  AgreementReport rep;
  auto [da, db] = indicator_decisions(a, b, lexicon, tokenizer);
  rep.n_candidates = da.size();
  if (!da.empty()) rep.kappa_indicator = cohen_kappa(da, db);
  for (RoleLabel r : kAllRoles) rep.role_f1[r] = pairwise_role_f1(a, b, r);
  return rep;
}

void print_agreement_table(std::ostream& out, const AgreementReport& rep) {
  out << std::left << std::setw(20) << "Kappa" << " | Overall F1\n";
  out << std::setw(20) << "Spatial Indicator";
  for (RoleLabel r : kAllRoles) out << " | " << std::setw(10) << role_display_name(r);
  out << '\n' << std::string(20 + 4 * 13, '-') << '\n';
  out << std::setw(20);
  if (rep.kappa_indicator) {
    std::ostringstream k;
    k << std::fixed << std::setprecision(2) << *rep.kappa_indicator;
    out << k.str();
  } else {
    out << "n/a";
  }
  for (RoleLabel r : kAllRoles) {
    std::ostringstream f;
    f << std::fixed << std::setprecision(2) << rep.role_f1.at(r);
    out << " | " << std::setw(10) << f.str();
  }
  out << '\n';
}

}  // namespace radsprl
