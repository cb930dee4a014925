// Acceptance gate: one PASS/FAIL line per primary criterion. Exit status is
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "radsprl/corpus.hpp"
#include "radsprl/crf.hpp"
#include "radsprl/eval.hpp"
#include "radsprl/preprocess.hpp"
#include "radsprl/rng.hpp"
#include "radsprl/synth.hpp"
#include "radsprl/tagger.hpp"

using namespace radsprl;
using fixtures::span_of;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s  %-28s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

double elapsed(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

nn::Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  nn::Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -3, 3);
  return m;
}

nn::Matrix random_transitions(std::size_t L, Rng& rng) {
  nn::Matrix T = crf::make_transitions(L);
  const auto n = static_cast<Eigen::Index>(L);
  T.topLeftCorner(n, n) = random_matrix(n, n, rng);
  T.block(n, 0, 1, n) = random_matrix(1, n, rng);
  T.block(0, n + 1, n, 1) = random_matrix(n, 1, rng);
  return T;
}


Outcome crf_oracle() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(1, "crf-oracle"));
  double worst_z = 0, worst_v = 0;
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 1 + uniform_index(rng, 6), L = 1 + uniform_index(rng, 10);
    const auto E = random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(L), rng);
    const auto T = random_transitions(L, rng);
    worst_z = std::max(worst_z, std::abs(crf::log_partition(E, T) - crf::brute_force_partition(E, T)));
    worst_v = std::max(worst_v, std::abs(crf::viterbi(E, T).score - crf::brute_force_decode(E, T).score));
  }
  const double secs = elapsed(t0);
  return {worst_z < 1e-6 && worst_v < 1e-9 && secs < 30,
          fmt("500 cases, max |logZ err| %.2e, max |viterbi err| %.2e", worst_z, worst_v)};
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  const std::string text = "Scarring in left apex";
  AnnotatedSentence s{"R", "S", text, {}};
  SpatialRelation r;
  r.indicator = span_of(text, "in");
  r.trajectors = {span_of(text, "Scarring")};
  r.landmarks = {span_of(text, "left apex")};
  s.relations.push_back(r);
  const Instance inst = expand_instances(s).front();
  TaggerConfig cfg;
  cfg.dropout = 0.0;
  TaggerModel model = TaggerModel::create(cfg, build_vocab({inst}, 1));
  Rng rng(derive_seed(cfg.seed, "gradcheck"));
  const auto res = check_model_gradients(model, inst, rng, 1e-5, 200);
  double full = 0;
  std::string worst;
  std::size_t min_checked = SIZE_MAX;
  for (const auto& g : res) {
    if (g.max_rel_error > full) {
      full = g.max_rel_error;
      worst = g.name;
    }
    min_checked = std::min(min_checked, g.checked);
  }

  // CRF loss alone, on the emissions and transitions of the same instance.
  Rng crng(derive_seed(cfg.seed, "gradcheck-crf"));
  nn::Param E("emissions", emissions(model, inst));
  nn::Param T("transitions", model.transitions.value);
  const auto gold = gold_label_indices(inst);
  const auto lg = crf::nll_loss_grad(E.value, T.value, gold);
  E.grad = lg.dE;
  T.grad = lg.dT;
  const double crf_err = nn::max_rel_error(
      nn::grad_check([&] { return crf::nll_loss(E.value, T.value, gold); }, {&E, &T}, crng));
  const double secs = elapsed(t0);

  // diagnostic only: the same check with a wider step
  Rng wide_rng(derive_seed(cfg.seed, "gradcheck"));
  const double wide = nn::max_rel_error(check_model_gradients(model, inst, wide_rng, 1e-3, 200));

  std::ostringstream d;
  d << "full model max rel err " << fmt("%.2e", full) << " (" << worst << "), CRF-only "
    << fmt("%.2e", crf_err) << ", groups " << res.size() << ", min coords/group " << min_checked
    << " (smaller groups checked exhaustively); eps 1e-3 gives " << fmt("%.2e", wide);
  return {full < 1e-4 && crf_err < 1e-6 && secs < 120, d.str()};
}

Outcome bio_round_trip() {
  Rng rng(derive_seed(2, "bio"));
  const std::vector<std::string> words = {"left", "base", "opacity", "is", "the", "of", "minimal", "7th",
                                          "scarring", "in", "apex", "(", ")", ",", "lung", "."};
  int failures_here = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 20);
    std::string text;
    std::vector<std::pair<std::size_t, std::size_t>> offs;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) text += ' ';
      const auto& w = words[uniform_index(rng, words.size())];
      offs.emplace_back(text.size(), text.size() + w.size());
      text += w;
    }
    std::vector<int> owner(n, -1);
    SpatialRelation rel;
    const std::size_t ia = uniform_index(rng, n);
    const std::size_t ib = std::min(n - 1, ia + uniform_index(rng, 2));
    for (std::size_t k = ia; k <= ib; ++k) owner[k] = 9;
    rel.indicator = make_span(text, offs[ia].first, offs[ib].second);
    for (int attempt = 0; attempt < 8; ++attempt) {
      const std::size_t a = uniform_index(rng, n), len = 1 + uniform_index(rng, 4);
      if (a + len > n) continue;
      bool free = true;
      for (std::size_t k = a; k < a + len; ++k) free = free && owner[k] == -1;
      const RoleLabel role = kAllRoles[uniform_index(rng, 4)];
      // a same-role neighbour would merge under BIO only if it were I-tagged; keep one token apart
      if (a > 0 && owner[a - 1] == static_cast<int>(role)) free = false;
      if (a + len < n && owner[a + len] == static_cast<int>(role)) free = false;
      if (!free) continue;
      for (std::size_t k = a; k < a + len; ++k) owner[k] = static_cast<int>(role);
      rel.spans(role).push_back(make_span(text, offs[a].first, offs[a + len - 1].second));
    }
    for (RoleLabel role : kAllRoles) std::sort(rel.spans(role).begin(), rel.spans(role).end());
    const auto toks = tokenize(text);
    const auto back = relation_from_decoded(text, bio_decode(text, toks, bio_encode(toks, rel)), rel.indicator);
    failures_here += !(back == rel);
  }
  return {failures_here == 0, std::to_string(failures_here) + " failures in 1000 relations"};
}

Outcome scorer_fixtures() {
  const std::string t = "Mild streaky opacities and nodules in the left lung base.";
  SpatialRelation one;
  one.indicator = span_of(t, "in");
  one.trajectors = {span_of(t, "Mild streaky opacities")};
  one.landmarks = {span_of(t, "left lung base")};
  one.hedges = {span_of(t, "nodules")};
  const auto same = exact_match(std::vector{one}, std::vector{one});
  const bool a = same.overall == PRF{3, 0, 0} && same.overall.f1() == 1.0;

  SpatialRelation g = one, p = one;
  g.hedges.clear();
  p.hedges.clear();
  p.trajectors = {span_of(t, "streaky opacities")};
  const auto boundary = exact_match(std::vector{g}, std::vector{p}).roles.at(RoleLabel::Trajector);
  const bool b = boundary == PRF{0, 1, 1};

  SpatialRelation g3 = g, p3 = g;
  g3.trajectors = {span_of(t, "Mild streaky opacities"), span_of(t, "nodules")};
  p3.trajectors = g3.trajectors;
  p3.landmarks = {span_of(t, "lung base")};
  const auto third = exact_match(std::vector{g3}, std::vector{p3}).overall;
  const bool c = third == PRF{2, 1, 1} && std::abs(third.precision() - 2.0 / 3) < 1e-15 &&
                 std::abs(third.recall() - 2.0 / 3) < 1e-15 && std::abs(third.f1() - 2.0 / 3) < 1e-15;

  const auto corpus = synth::generate(500, 77).corpus;
  std::vector<KeyedRelation> keyed;
  for (const auto& s : corpus.sentences) {
    for (const auto& r : s.relations) keyed.push_back({s.report_id, s.sentence_id, r});
  }
  const auto self = exact_match(keyed, keyed);
  bool d = self.overall.f1() == 1.0;
  for (RoleLabel r : kAllRoles) d = d && !self.roles.at(r).undefined() && self.roles.at(r).f1() == 1.0;

  std::ostringstream detail;
  detail << "identical " << (a ? "ok" : "bad") << ", boundary " << (b ? "ok" : "bad") << ", 2/3 case "
         << (c ? "ok" : "bad") << ", gold-vs-gold all roles " << (d ? "1.0" : "not 1.0");
  return {a && b && c && d, detail.str()};
}

Outcome kappa_fixtures() {
  const double k1 = cohen_kappa({true, false, true, false}, {true, false, true, false});
  const double k0 = cohen_kappa({true, true, false, false}, {true, false, true, false});
  const double kh = cohen_kappa({true, true, true, false}, {true, true, false, false});
  const bool ok = std::abs(k1 - 1.0) < 1e-12 && std::abs(k0) < 1e-12 && std::abs(kh - 0.5) < 1e-12;
  return {ok, fmt("kappa = %.15g, %.15g, %.15g (want 1, 0, 0.5)", k1, k0, kh)};
}

Outcome memorization() {
  const auto t0 = Clock::now();
  auto inst = expand_corpus(synth::generate_relations(10, derive_seed(42, "memorize")).corpus);
  TaggerConfig cfg;
  cfg.max_epochs = 200;
  cfg.lr = 0.01;
  int reached = -1;
  train(inst, {}, cfg, std::nullopt, [&](const EpochLog& e, const TaggerModel& m) {
    const bool all = std::all_of(inst.begin(), inst.end(), [&](const Instance& x) { return decode(m, x) == x.labels; });
    if (all) reached = e.epoch;
    return !all;
  });
  const double secs = elapsed(t0);
  const bool ok = reached > 0 && secs < 60;
  return {ok, reached > 0 ? "all 10 reproduced exactly after epoch " + std::to_string(reached)
                          : std::string("not memorised within 200 epochs")};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct CvRuns {
  fs::path dir;
  double first_secs = 0;
  int first_code = -1, second_code = -1;
};

CvRuns& cv_runs() {
  static CvRuns runs = [] {
    CvRuns r;
    r.dir = fs::temp_directory_path() / "radsprl_acceptance";
    fs::create_directories(r.dir);
    const std::string cli = RADSPRL_CLI_PATH;
    const auto corpus = r.dir / "synthetic600.jsonl";
    synth::Generated g = synth::generate_relations(600, 42);
    save_corpus(corpus, g.corpus);
    const auto t0 = Clock::now();
    r.first_code = run(cli + " cv --corpus " + corpus.string() + " --seed 42 --out " + (r.dir / "a.json").string() +
                       " > " + (r.dir / "a.txt").string() + " 2>&1");
    r.first_secs = elapsed(t0);
    r.second_code = run(cli + " cv --corpus " + corpus.string() + " --seed 42 --out " + (r.dir / "b.json").string() +
                        " > /dev/null 2>&1");
    return r;
  }();
  return runs;
}

Outcome synthetic_cv() {
  auto& r = cv_runs();
  if (r.first_code != 0) return {false, "cv exited with " + std::to_string(r.first_code)};
  const auto j = nlohmann::json::parse(slurp(r.dir / "a.json"));
  const auto& means = j.at("means");
  const double overall = means.at("overall_micro").at("f1").get<double>();
  const double traj = means.at("roles").at("TRAJECTOR").at("f1").get<double>();
  const double land = means.at("roles").at("LANDMARK").at("f1").get<double>();
  std::size_t n = j.at("n_instances").get<std::size_t>();
  const bool ok = n == 600 && overall >= 0.95 && traj >= 0.90 && land >= 0.90 && r.first_secs < 900;
  return {ok, fmt("600 instances, overall F1 %.4f, trajector %.4f, landmark %.4f", overall, traj, land) +
                  fmt(", cv wall time %.0fs", r.first_secs)};
}

Outcome stats_oracle() {
  Rng rng(derive_seed(3, "stats"));
  int mismatches = 0;
  long relations = 0;
  for (int i = 0; i < 10; ++i) {
    const auto g = synth::generate(200 + uniform_index(rng, 800), rng());
    mismatches += !(compute_stats(g.corpus, tokenize) == g.tally.stats);
    relations += g.tally.stats.n_relations;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches over 10 seeds (" + std::to_string(relations) +
                               " relations)"};
}

Outcome determinism() {
  auto& r = cv_runs();
  if (r.first_code != 0 || r.second_code != 0) return {false, "cv run failed"};
  const auto a = slurp(r.dir / "a.json"), b = slurp(r.dir / "b.json");
  return {!a.empty() && a == b, a == b ? "two cv runs, " + std::to_string(a.size()) + " identical bytes"
                                       : std::string("reports differ")};
}

// Paper reference values (percent) for the conditional real-corpus check.
Outcome real_corpus(const char* path) {
  const Corpus corpus = load_corpus(path);
  const auto instances = expand_corpus(corpus);
  const auto stats = compute_stats(corpus, tokenize);
  TaggerConfig cfg;
  CvOptions opt;
  opt.indicator_task = true;
  const auto rep = cross_validate(corpus, cfg, opt);
  const auto roles = rep.role_means();
  const std::map<RoleLabel, double> target = {{RoleLabel::Trajector, 90.28},
                                              {RoleLabel::Landmark, 94.61},
                                              {RoleLabel::Diagnosis, 71.47},
                                              {RoleLabel::Hedge, 73.27}};
  bool ok = true;
  std::ostringstream d;
  d << instances.size() << " instances from " << stats.n_relations << " relations (paper: 1867 / 1972);";
  for (const auto& [role, want] : target) {
    const double got = 100 * roles.at(role).f1;
    ok = ok && std::abs(got - want) <= 3.0;
    d << ' ' << role_display_name(role) << ' ' << fmt("%.2f", got);
  }
  const double overall = 100 * rep.overall_mean().f1;
  ok = ok && std::abs(overall - 89.22) <= 3.0;
  d << " overall " << fmt("%.2f", overall);
  if (auto ind = rep.indicator_mean()) {
    ok = ok && std::abs(100 * ind->f1 - 87.82) <= 3.0;
    d << " indicator " << fmt("%.2f", 100 * ind->f1);
  }
  return {ok, d.str()};
}

}  // namespace

int main() {
  report("crf-oracle", crf_oracle);
  report("gradient-check", gradient_check);
  report("bio-round-trip", bio_round_trip);
  report("scorer-fixtures", scorer_fixtures);
  report("kappa-fixtures", kappa_fixtures);
  report("memorization", memorization);
  report("synthetic-cv", synthetic_cv);
  report("stats-oracle", stats_oracle);
  report("cv-determinism", determinism);
  if (const char* path = std::getenv("RADSPRL_CORPUS")) {
    report("real-corpus", [&] { return real_corpus(path); });
  } else {
    std::printf("SKIP  %-28s RADSPRL_CORPUS not set; the annotated corpus is not distributed\n", "real-corpus");
  }
  fs::remove_all(fs::temp_directory_path() / "radsprl_acceptance");
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
