#include <doctest.h>

#include <numeric>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "radsprl/error.hpp"
#include "radsprl/eval.hpp"
#include "radsprl/synth.hpp"
#include "radsprl/tagger.hpp"

using namespace radsprl;
using fixtures::span_of;

namespace {

const std::string kText = "Mild streaky opacities and nodules in the left lung base and apex.";

SpatialRelation gold_relation() {
  SpatialRelation r;
  r.indicator = span_of(kText, "in");
  r.trajectors = {span_of(kText, "Mild streaky opacities"), span_of(kText, "nodules")};
  r.landmarks = {span_of(kText, "left lung base")};
  return r;
}

void check_partition(const FoldPlan& plan, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& f : plan.folds()) {
    for (auto i : f) ++seen.at(i);
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  for (int i = 0; i < plan.k(); ++i) {
    const auto test = plan.test(i), val = plan.val(i), train = plan.train(i);
    CHECK(test.size() + val.size() + train.size() == n);
    std::set<std::size_t> all(test.begin(), test.end());
    all.insert(val.begin(), val.end());
    all.insert(train.begin(), train.end());
    CHECK(all.size() == n);
  }
}

}  // namespace

TEST_CASE("prf conventions") {
  PRF p{2, 1, 1};
  CHECK(p.precision() == doctest::Approx(2.0 / 3));
  CHECK(p.recall() == doctest::Approx(2.0 / 3));
  CHECK(p.f1() == doctest::Approx(2.0 / 3));
  CHECK(PRF{}.undefined());
  CHECK(PRF{0, 0, 3}.precision() == 0.0);
  CHECK(PRF{}.precision() == 1.0);
  CHECK(PRF{0, 0, 3}.recall() == 0.0);
  CHECK(PRF{0, 0, 3}.f1() == 0.0);
}

TEST_CASE("identical prediction scores one") {
  const auto g = gold_relation();
  const auto m = exact_match(std::vector{g}, std::vector{g});
  CHECK(m.overall.tp == 3);
  CHECK(m.overall.f1() == 1.0);
  CHECK(m.roles.at(RoleLabel::Trajector).f1() == 1.0);
  CHECK(m.roles.at(RoleLabel::Diagnosis).undefined());
}

TEST_CASE("boundary mismatch is one false positive and one false negative") {
  SpatialRelation g, p;
  g.indicator = p.indicator = span_of(kText, "in");
  g.trajectors = {span_of(kText, "Mild streaky opacities")};
  p.trajectors = {span_of(kText, "streaky opacities")};
  const auto m = exact_match(std::vector{g}, std::vector{p});
  CHECK(m.roles.at(RoleLabel::Trajector) == PRF{0, 1, 1});
}

TEST_CASE("two of three right") {
  const auto g = gold_relation();
  auto p = g;
  p.landmarks = {span_of(kText, "lung base")};
  const auto m = exact_match(std::vector{g}, std::vector{p});
  CHECK(m.overall == PRF{2, 1, 1});
  CHECK(m.overall.precision() == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(m.overall.recall() == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(m.overall.f1() == doctest::Approx(2.0 / 3).epsilon(1e-15));
}

TEST_CASE("matches are keyed by sentence and indicator") {
  const auto g = gold_relation();
  std::vector<KeyedRelation> gold{{"R1", "S1", g}};
  std::vector<KeyedRelation> other_sentence{{"R1", "S2", g}};
  CHECK(exact_match(gold, other_sentence).overall == PRF{0, 3, 3});
  auto moved = g;
  moved.indicator = span_of(kText, "and");
  std::vector<KeyedRelation> other_indicator{{"R1", "S1", moved}};
  CHECK(exact_match(gold, other_indicator).overall.tp == 0);
}

TEST_CASE("indicator matching") {
  std::vector<KeyedSpan> gold{{"R", "S", span_of(kText, "in")}};
  std::vector<KeyedSpan> pred{{"R", "S", span_of(kText, "in")}, {"R", "S", span_of(kText, "and")}};
  CHECK(indicator_match(gold, pred) == PRF{1, 1, 0});
}

TEST_CASE("folds") {
  const auto plan = make_folds(1867, 10, 42);
  for (const auto& f : plan.folds()) CHECK((f.size() == 186 || f.size() == 187));
  CHECK(plan.train(0).size() >= 1493);
  CHECK(plan.train(0).size() <= 1495);
  CHECK(plan == make_folds(1867, 10, 42));
  CHECK_FALSE(plan == make_folds(1867, 10, 43));

  const auto ten = make_folds(10, 10, 1);
  for (int i = 0; i < 10; ++i) {
    CHECK(ten.test(i).size() == 1);
    CHECK(ten.val(i).size() == 1);
    CHECK(ten.train(i).size() == 8);
  }
  CHECK_THROWS_AS(make_folds(10, 2, 1), ValidationError);
  CHECK_THROWS_AS(make_folds(5, 10, 1), ValidationError);
}

TEST_CASE("folds partition the items for many sizes") {
  Rng rng(10);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 10 + uniform_index(rng, 4991);
    const auto plan = make_folds(n, 10, rng());
    check_partition(plan, n);
    std::size_t lo = n, hi = 0;
    for (const auto& f : plan.folds()) {
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
    }
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("grouped folds keep groups together") {
  std::vector<std::string> groups;
  for (int i = 0; i < 200; ++i) groups.push_back("R" + std::to_string(i / 3));
  const auto plan = make_grouped_folds(groups, 5, 7);
  check_partition(plan, groups.size());
  const auto assign = plan.assignment(groups.size());
  for (std::size_t i = 1; i < groups.size(); ++i) {
    if (groups[i] == groups[i - 1]) CHECK(assign[i] == assign[i - 1]);
  }
}

TEST_CASE("undefined folds are excluded from means") {
  MetricReport rep;
  FoldMetrics a, b;
  a.fold = 0;
  b.fold = 1;
  for (RoleLabel r : kAllRoles) {
    a.roles[r] = PRF{4, 0, 0};
    b.roles[r] = PRF{1, 1, 0};
  }
  a.roles[RoleLabel::Diagnosis] = PRF{};
  a.overall = PRF{12, 0, 0};
  b.overall = PRF{4, 4, 0};
  rep.folds = {a, b};
  const auto means = rep.role_means();
  CHECK(means.at(RoleLabel::Diagnosis).folds == 1);
  CHECK(means.at(RoleLabel::Diagnosis).precision == doctest::Approx(0.5));
  CHECK(means.at(RoleLabel::Trajector).folds == 2);
  CHECK(means.at(RoleLabel::Trajector).precision == doctest::Approx(0.75));
  CHECK(rep.overall_mean().precision == doctest::Approx(0.75));
  std::ostringstream table;
  rep.print_table(table);
  CHECK(table.str().find("Diagnosis") != std::string::npos);
  CHECK(rep.to_json().at("folds").size() == 2);
}

TEST_CASE("cross validation on a small synthetic corpus") {
  const auto corpus = synth::generate_relations(40, 12).corpus;
  TaggerConfig cfg;
  cfg.word_dim = 12;
  cfg.char_dim = 6;
  cfg.char_hidden = 4;
  cfg.ind_dim = 3;
  cfg.lstm_hidden = 12;
  cfg.max_epochs = 2;
  CvOptions opt;
  opt.k = 4;
  opt.indicator_task = true;
  const auto r1 = cross_validate(corpus, cfg, opt);
  CHECK(r1.folds.size() == 4);
  CHECK(r1.n_instances == 40);
  for (const auto& f : r1.folds) {
    CHECK_FALSE(f.error.has_value());
    CHECK(f.n_test == 10);
    CHECK(f.indicator.has_value());
  }
  CHECK(r1.indicator_mean().has_value());
  opt.jobs = 2;
  const auto r2 = cross_validate(corpus, cfg, opt);
  CHECK(r1.to_json().dump() == r2.to_json().dump());

  opt.jobs = 1;
  opt.indicator_task = false;
  opt.split_by = SplitBy::Report;
  const auto r3 = cross_validate(corpus, cfg, opt);
  CHECK(r3.folds.size() == 4);
}
