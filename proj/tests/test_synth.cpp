#include <doctest.h>

#include "radsprl/error.hpp"
#include "radsprl/preprocess.hpp"
#include "radsprl/synth.hpp"

using namespace radsprl;
using namespace radsprl::synth;

TEST_CASE("zero sentences") {
  const auto g = generate(0, 1);
  CHECK(g.corpus.sentences.empty());
  CHECK(g.tally.n_sentences == 0);
}

TEST_CASE("same seed same corpus") {
  CHECK(generate(100, 9).corpus == generate(100, 9).corpus);
  CHECK_FALSE(generate(100, 9).corpus == generate(100, 10).corpus);
}

TEST_CASE("tally matches recomputed statistics under custom weights") {
  auto grammar = TemplateGrammar::default_grammar();
  grammar.set_weights({{"tl_only", 0.8}, {"all_four", 0.15}, {"chained", 0.05}});
  const auto g = generate(1000, 21, grammar);
  CHECK(compute_stats(g.corpus, tokenize) == g.tally.stats);
  CHECK(g.tally.template_counts.count("hedge_only") == 0);
  CHECK(g.tally.template_counts.at("tl_only") > 700);
}

TEST_CASE("default grammar covers every template kind") {
  const auto g = generate(2000, 4);
  const auto& s = g.tally.stats;
  CHECK(s.n_rel_traj_land_only > 0);
  CHECK(s.n_rel_all_four > 0);
  CHECK(s.n_rel_with_diag_no_hedge > 0);
  CHECK(s.n_rel_with_hedge_no_diag > 0);
  CHECK(s.n_rel_multi_diagnosis > 0);
  CHECK(s.max_indicators_per_sentence == 2);
  CHECK(compute_stats(g.corpus, tokenize) == s);
}

TEST_CASE("chained sentences share the middle phrase") {
  auto grammar = TemplateGrammar::default_grammar();
  grammar.set_weights({{"chained", 1.0}});
  const auto g = generate(20, 3, grammar);
  for (const auto& s : g.corpus.sentences) {
    REQUIRE(s.relations.size() == 2);
    CHECK(s.relations[0].landmarks.at(0) == s.relations[1].trajectors.at(0));
  }
}

TEST_CASE("exact relation count") {
  for (std::size_t n : {1u, 7u, 600u}) {
    const auto g = generate_relations(n, 42);
    CHECK(g.tally.stats.n_relations == static_cast<long>(n));
    CHECK(expand_corpus(g.corpus).size() == n);
  }
}

TEST_CASE("grammar json round trip and validation") {
  const auto g = TemplateGrammar::default_grammar();
  const auto again = TemplateGrammar::from_json(g.to_json());
  CHECK(again.to_json() == g.to_json());
  CHECK(generate(50, 2, again).corpus == generate(50, 2, g).corpus);

  auto bad = g.to_json();
  bad["templates"][0]["segments"][0]["lexicon"] = "NOPE";
  CHECK_THROWS_AS(TemplateGrammar::from_json(bad), ValidationError);

  auto split = g.to_json();
  split["templates"][0]["segments"][4]["span"] = "T";
  CHECK_THROWS_AS(TemplateGrammar::from_json(split), ValidationError);

  auto no_ind = g.to_json();
  no_ind["templates"][0]["spans"].erase("I");
  no_ind["templates"][0]["segments"][3].erase("span");
  CHECK_THROWS_AS(TemplateGrammar::from_json(no_ind), ValidationError);

  auto weights = g;
  CHECK_THROWS_AS(weights.set_weights({{"missing", 1.0}}), ValidationError);
  CHECK_THROWS_AS(weights.set_weights({}), ValidationError);
}

TEST_CASE("ids group sentences into reports") {
  const auto g = generate(7, 1);
  CHECK(g.corpus.sentences[0].report_id == g.corpus.sentences[2].report_id);
  CHECK(g.corpus.sentences[2].report_id != g.corpus.sentences[3].report_id);
  CHECK(g.corpus.report_ids.size() == 3);
}
