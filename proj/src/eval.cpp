#include "radsprl/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "radsprl/error.hpp"
#include "radsprl/rng.hpp"

namespace radsprl {

double PRF::precision() const {
  if (tp + fp == 0) return tp + fn == 0 ? 1.0 : 0.0;
  return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double PRF::recall() const {
  if (tp + fn == 0) return tp + fp == 0 ? 1.0 : 0.0;
  return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double PRF::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2 * p * r / (p + r);
}

nlohmann::json prf_json(const PRF& prf) {
  return {{"tp", prf.tp},
          {"fp", prf.fp},
          {"fn", prf.fn},
          {"precision", prf.precision()},
          {"recall", prf.recall()},
          {"f1", prf.f1()},
          {"defined", !prf.undefined()}};
}

namespace {

using SpanKey = std::tuple<std::string, std::string, std::size_t, std::size_t, std::size_t,
                           std::size_t>;

std::map<RoleLabel, std::set<SpanKey>> collect(const std::vector<KeyedRelation>& rels) {
  std::map<RoleLabel, std::set<SpanKey>> out;
  for (RoleLabel r : kAllRoles) out[r];
  for (const auto& kr : rels) {
    for (RoleLabel r : kAllRoles) {
      for (const auto& s : kr.relation.spans(r)) {
        out[r].emplace(kr.report_id, kr.sentence_id, kr.relation.indicator.start,
                       kr.relation.indicator.end, s.start, s.end);
      }
    }
  }
  return out;
}

template <class Key>
PRF count(const std::set<Key>& gold, const std::set<Key>& pred) {
  PRF prf;
  for (const auto& k : pred) prf.tp += static_cast<long>(gold.count(k));
  prf.fp = static_cast<long>(pred.size()) - prf.tp;
  prf.fn = static_cast<long>(gold.size()) - prf.tp;
  return prf;
}

}  // namespace

MatchReport exact_match(const std::vector<KeyedRelation>& gold,
                        const std::vector<KeyedRelation>& pred) {
  const auto g = collect(gold);
  const auto p = collect(pred);
  MatchReport rep;
  for (RoleLabel r : kAllRoles) {
    rep.roles[r] = count(g.at(r), p.at(r));
    rep.overall += rep.roles[r];
  }
  return rep;
}

MatchReport exact_match(const std::vector<SpatialRelation>& gold,
                        const std::vector<SpatialRelation>& pred) {
  std::vector<KeyedRelation> g, p;
  for (const auto& r : gold) g.push_back({"", "", r});
  for (const auto& r : pred) p.push_back({"", "", r});
  return exact_match(g, p);
}

PRF indicator_match(const std::vector<KeyedSpan>& gold, const std::vector<KeyedSpan>& pred) {
  using Key = std::tuple<std::string, std::string, std::size_t, std::size_t>;
  std::set<Key> g, p;
  for (const auto& k : gold) g.emplace(k.report_id, k.sentence_id, k.span.start, k.span.end);
  for (const auto& k : pred) p.emplace(k.report_id, k.sentence_id, k.span.start, k.span.end);
  return count(g, p);
}

FoldPlan::FoldPlan(int k, std::uint64_t seed, std::vector<std::vector<std::size_t>> folds)
    : k_(k), seed_(seed), folds_(std::move(folds)) {}

std::vector<std::size_t> FoldPlan::test(int i) const { return folds_.at(static_cast<std::size_t>(i)); }

std::vector<std::size_t> FoldPlan::val(int i) const {
  return folds_.at(static_cast<std::size_t>((i + 1) % k_));
}

std::vector<std::size_t> FoldPlan::train(int i) const {
  std::vector<std::size_t> out;
  for (int f = 0; f < k_; ++f) {
    if (f == i || f == (i + 1) % k_) continue;
    const auto& fold = folds_[static_cast<std::size_t>(f)];
    out.insert(out.end(), fold.begin(), fold.end());
  }
  return out;
}

std::vector<int> FoldPlan::assignment(std::size_t n_items) const {
  std::vector<int> out(n_items, -1);
  for (std::size_t f = 0; f < folds_.size(); ++f) {
    for (std::size_t idx : folds_[f]) out.at(idx) = static_cast<int>(f);
  }
  return out;
}

FoldPlan make_folds(std::size_t n_items, int k, std::uint64_t seed) {
  if (k < 3) throw ValidationError("k must be at least 3 (test, validation and training folds)");
  if (n_items < static_cast<std::size_t>(k)) {
    throw ValidationError("too few instances (" + std::to_string(n_items) + ") for " +
                          std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order(n_items);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  const std::size_t base = n_items / static_cast<std::size_t>(k);
  const std::size_t extra = n_items % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return FoldPlan(k, seed, std::move(folds));
}

FoldPlan make_grouped_folds(const std::vector<std::string>& groups, int k, std::uint64_t seed) {
  if (k < 3) throw ValidationError("k must be at least 3 (test, validation and training folds)");
  std::vector<std::string> keys;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto& m = members[groups[i]];
    if (m.empty()) keys.push_back(groups[i]);
    m.push_back(i);
  }
  if (keys.size() < static_cast<std::size_t>(k)) {
    throw ValidationError("too few groups (" + std::to_string(keys.size()) + ") for " +
                          std::to_string(k) + " folds");
  }
  Rng rng(seed);
  shuffle(keys.begin(), keys.end(), rng);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  const double target = static_cast<double>(groups.size()) / k;
  std::size_t f = 0, assigned = 0;
  for (std::size_t g = 0; g < keys.size(); ++g) {
    const auto& m = members[keys[g]];
    folds[f].insert(folds[f].end(), m.begin(), m.end());
    assigned += m.size();
    const std::size_t groups_left = keys.size() - g - 1;
    const std::size_t folds_left = folds.size() - f - 1;
    if (folds_left > 0 &&
        (static_cast<double>(assigned) >= target * static_cast<double>(f + 1) ||
         groups_left == folds_left)) {
      ++f;
    }
  }
  return FoldPlan(k, seed, std::move(folds));
}

namespace {

struct Accumulator {
  double p = 0, r = 0, f = 0;
  int n = 0;
  void add(double precision, double recall, double f1) {
    p += precision;
    r += recall;
    f += f1;
    ++n;
  }
  void add(const PRF& prf) {
    if (!prf.undefined()) add(prf.precision(), prf.recall(), prf.f1());
  }
  MeanPRF mean() const {
    if (n == 0) return {};
    return {p / n, r / n, f / n, n};
  }
};

nlohmann::json mean_json(const MeanPRF& m) {
  if (m.folds == 0) return nullptr;
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"folds", m.folds}};
}

}  // namespace

std::map<RoleLabel, MeanPRF> MetricReport::role_means() const {
  std::map<RoleLabel, MeanPRF> out;
  for (RoleLabel r : kAllRoles) {
    Accumulator acc;
    for (const auto& f : folds) {
      if (!f.error) acc.add(f.roles.at(r));
    }
    out[r] = acc.mean();
  }
  return out;
}

MeanPRF MetricReport::overall_mean() const {
  Accumulator acc;
  for (const auto& f : folds) {
    if (!f.error) acc.add(f.overall);
  }
  return acc.mean();
}

MeanPRF MetricReport::macro_mean() const {
  Accumulator acc;
  for (const auto& f : folds) {
    if (f.error) continue;
    Accumulator per_fold;
    for (RoleLabel r : kAllRoles) per_fold.add(f.roles.at(r));
    if (per_fold.n > 0) {
      const MeanPRF m = per_fold.mean();
      acc.add(m.precision, m.recall, m.f1);
    }
  }
  return acc.mean();
}

std::optional<MeanPRF> MetricReport::indicator_mean() const {
  Accumulator acc;
  bool any = false;
  for (const auto& f : folds) {
    if (f.indicator) {
      any = true;
      acc.add(*f.indicator);
    }
  }
  if (!any) return std::nullopt;
  return acc.mean();
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json fj = nlohmann::json::array();
  for (const auto& f : folds) {
    nlohmann::json j;
    j["fold"] = f.fold;
    j["n_train"] = f.n_train;
    j["n_val"] = f.n_val;
    j["n_test"] = f.n_test;
    if (f.error) {
      j["error"] = *f.error;
    } else {
      for (RoleLabel r : kAllRoles) j["roles"][std::string(role_name(r))] = prf_json(f.roles.at(r));
      j["overall"] = prf_json(f.overall);
      j["best_epoch"] = f.best_epoch;
    }
    if (f.indicator) {
      j["indicator"] = prf_json(*f.indicator);
      j["indicator_best_epoch"] = f.indicator_best_epoch;
    }
    fj.push_back(std::move(j));
  }
  nlohmann::json means;
  for (const auto& [r, m] : role_means()) means["roles"][std::string(role_name(r))] = mean_json(m);
  means["overall_micro"] = mean_json(overall_mean());
  means["overall_macro"] = mean_json(macro_mean());
  if (auto ind = indicator_mean()) means["indicator"] = mean_json(*ind);
  return {{"n_instances", n_instances},
          {"n_sentences", n_sentences},
          {"k", folds.size()},
          {"folds", std::move(fj)},
          {"means", std::move(means)}};
}

void MetricReport::print_table(std::ostream& out) const {
  const auto roles = role_means();
  std::vector<std::pair<std::string, std::optional<MeanPRF>>> cols;
  cols.emplace_back("Sp-In", indicator_mean());
  for (RoleLabel r : kAllRoles) cols.emplace_back(std::string(role_display_name(r)), roles.at(r));
  cols.emplace_back("Overall", overall_mean());
  auto cell = [](const std::optional<MeanPRF>& m, double MeanPRF::*field) {
    if (!m || m->folds == 0) return std::string("-");
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << 100.0 * ((*m).*field);
    return os.str();
  };
  out << std::left << std::setw(15) << "Metrics";
  for (const auto& [name, m] : cols) out << std::right << std::setw(11) << name;
  out << '\n' << std::string(15 + 11 * cols.size(), '-') << '\n';
  const std::vector<std::pair<std::string, double MeanPRF::*>> rows = {
      {"Precision (%)", &MeanPRF::precision},
      {"Recall (%)", &MeanPRF::recall},
      {"F1 (%)", &MeanPRF::f1}};
  for (const auto& [label, field] : rows) {
    out << std::left << std::setw(15) << label;
    for (const auto& [name, m] : cols) out << std::right << std::setw(11) << cell(m, field);
    out << '\n';
  }
  const MeanPRF macro = macro_mean();
  if (macro.folds > 0) {
    out << "Overall (macro over roles): P " << cell(macro, &MeanPRF::precision) << "  R "
        << cell(macro, &MeanPRF::recall) << "  F1 " << cell(macro, &MeanPRF::f1) << '\n';
  }
}

}  // namespace radsprl
