#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "radsprl/rng.hpp"
#include "radsprl/corpus.hpp"
#include "radsprl/preprocess.hpp"
#include "radsprl/synth.hpp"

using namespace radsprl;
using fixtures::span_of;

namespace {

// Kappa from its definition, on counts.
double kappa_oracle(const std::vector<bool>& a, const std::vector<bool>& b) {
  double n = static_cast<double>(a.size()), agree = 0, a_yes = 0, b_yes = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i];
    a_yes += a[i];
    b_yes += b[i];
  }
  const double po = agree / n;
  const double pe = (a_yes / n) * (b_yes / n) + (1 - a_yes / n) * (1 - b_yes / n);
  return (po - pe) / (1 - pe);
}

}  // namespace

TEST_CASE("kappa fixtures") {
  CHECK(cohen_kappa({true, false, true, false}, {true, false, true, false}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(cohen_kappa({true, true, false, false}, {true, false, true, false})) < 1e-12);
  CHECK(std::abs(cohen_kappa({true, true, true, false}, {true, true, false, false}) - 0.5) < 1e-12);
}

TEST_CASE("kappa degenerate inputs") {
  CHECK_THROWS_AS(cohen_kappa({}, {}), ValidationError);
  CHECK_THROWS_AS(cohen_kappa({true}, {true, false}), ValidationError);
  CHECK(cohen_kappa({true, true}, {true, true}) == 1.0);
}

TEST_CASE("kappa is symmetric and matches the count formula") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 40);
    std::vector<bool> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = uniform01(rng) < 0.6;
      b[i] = uniform01(rng) < 0.5 ? a[i] : uniform01(rng) < 0.5;
    }
    a[0] = true;
    a[1] = false;
    CHECK(cohen_kappa(a, b) == doctest::Approx(cohen_kappa(b, a)).epsilon(1e-12));
    CHECK(cohen_kappa(a, b) == doctest::Approx(kappa_oracle(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("role f1 between annotators") {
  const std::string text = "Opacities and nodules in the left base and right base.";
  auto a = fixtures::tl_sentence("R", "S", text, "Opacities", "in", "left base");
  a.relations[0].trajectors.push_back(span_of(text, "nodules"));
  Corpus ca = make_corpus({a});
  CHECK(pairwise_role_f1(ca, ca, RoleLabel::Trajector) == 1.0);
  CHECK(pairwise_role_f1(ca, ca, RoleLabel::Diagnosis) == 1.0);

  auto b = a;
  b.relations[0].trajectors.push_back(span_of(text, "right base"));
  CHECK(pairwise_role_f1(ca, make_corpus({b}), RoleLabel::Trajector) == doctest::Approx(0.8));

  auto shifted = a;
  for (auto& sp : shifted.relations[0].trajectors) sp = make_span(text, sp.start + 1, sp.end);
  CHECK(pairwise_role_f1(ca, make_corpus({shifted}), RoleLabel::Trajector) == 0.0);
}

TEST_CASE("different sentence sets cannot be compared") {
  auto a = fixtures::tl_sentence("R1", "S1", "Scarring in the apex.", "Scarring", "in", "apex");
  auto b = fixtures::tl_sentence("R2", "S1", "Scarring in the apex.", "Scarring", "in", "apex");
  CHECK_THROWS_AS(pairwise_role_f1(make_corpus({a}), make_corpus({b}), RoleLabel::Trajector),
                  ValidationError);
}

TEST_CASE("indicator decisions come from lexicon tokens") {
  const std::string text = "Scarring in the apex and at the base.";
  auto a = fixtures::tl_sentence("R", "S", text, "Scarring", "in", "apex");
  auto b = a;
  SpatialRelation second;
  second.indicator = span_of(text, "at");
  b.relations.push_back(second);
  const auto [da, db] = indicator_decisions(make_corpus({a}), make_corpus({b}),
                                            default_preposition_lexicon(), tokenize);
  CHECK(da == std::vector<bool>{true, false});
  CHECK(db == std::vector<bool>{true, true});
}

TEST_CASE("agreement of a corpus with itself") {
  const auto g = synth::generate(60, 8);
  const auto rep = compute_agreement(g.corpus, g.corpus, default_preposition_lexicon(), tokenize);
  REQUIRE(rep.kappa_indicator.has_value());
  CHECK(*rep.kappa_indicator == 1.0);
  for (RoleLabel r : kAllRoles) CHECK(rep.role_f1.at(r) == 1.0);
  std::ostringstream out;
  print_agreement_table(out, rep);
  CHECK(out.str().find("Trajector") != std::string::npos);
}

TEST_CASE("default lexicon holds the common prepositions") {
  const auto lex = default_preposition_lexicon();
  for (const char* p : {"in", "within", "at", "near", "of", "around"}) CHECK(lex.count(p) == 1);
}

TEST_CASE("lexicon file is lowercased and skips blanks and comments") {
  const auto path = std::filesystem::temp_directory_path() / "radsprl_lexicon_test.txt";
  {
    std::ofstream f(path);
    f << "# prepositions\nIn\n\n  beneath \n";
  }
  CHECK(load_lexicon(path) == std::set<std::string>{"in", "beneath"});
  std::filesystem::remove(path);
}
