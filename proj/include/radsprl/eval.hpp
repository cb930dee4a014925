#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "radsprl/corpus.hpp"
#include "radsprl/preprocess.hpp"

namespace radsprl {

struct TaggerConfig;

struct PRF {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  // No gold and no predicted spans: nothing to score.
  bool undefined() const { return tp + fp + fn == 0; }
  double precision() const;
  double recall() const;
  double f1() const;

  PRF& operator+=(const PRF& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const PRF&, const PRF&) = default;
};

nlohmann::json prf_json(const PRF& prf);

// A relation together with the sentence it belongs to.
struct KeyedRelation {
  std::string report_id;
  std::string sentence_id;
  SpatialRelation relation;
};

struct MatchReport {
  std::map<RoleLabel, PRF> roles;
  PRF overall;  // micro: sums of the role counts
};

// A predicted span is a true positive when a gold span of the same role under
// the same (sentence, indicator) has identical boundaries.
MatchReport exact_match(const std::vector<KeyedRelation>& gold,
                        const std::vector<KeyedRelation>& pred);
// Both lists describe relations of one sentence.
MatchReport exact_match(const std::vector<SpatialRelation>& gold,
                        const std::vector<SpatialRelation>& pred);

struct KeyedSpan {
  std::string report_id;
  std::string sentence_id;
  Span span;
};

PRF indicator_match(const std::vector<KeyedSpan>& gold, const std::vector<KeyedSpan>& pred);

class FoldPlan {
 public:
  FoldPlan() = default;
  FoldPlan(int k, std::uint64_t seed, std::vector<std::vector<std::size_t>> folds);

  int k() const { return k_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<std::vector<std::size_t>>& folds() const { return folds_; }

  // Fold i tests on fold i, validates on fold (i+1) mod k, trains on the rest.
  std::vector<std::size_t> test(int i) const;
  std::vector<std::size_t> val(int i) const;
  std::vector<std::size_t> train(int i) const;
  // Fold holding each item in its test split.
  std::vector<int> assignment(std::size_t n_items) const;

  friend bool operator==(const FoldPlan&, const FoldPlan&) = default;

 private:
  int k_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::vector<std::size_t>> folds_;
};

// Seeded shuffle of [0, n) cut into k contiguous folds whose sizes differ by at most one.
FoldPlan make_folds(std::size_t n_items, int k, std::uint64_t seed);
// Same, but items sharing a group key always land in the same fold.
FoldPlan make_grouped_folds(const std::vector<std::string>& groups, int k, std::uint64_t seed);

struct FoldMetrics {
  int fold = 0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  std::map<RoleLabel, PRF> roles;
  PRF overall;
  std::optional<PRF> indicator;
  int best_epoch = 0;
  int indicator_best_epoch = 0;
  std::optional<std::string> error;
};

struct MeanPRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int folds = 0;  // folds contributing; 0 means the metric was never defined
};

struct MetricReport {
  std::vector<FoldMetrics> folds;
  std::size_t n_instances = 0;
  std::size_t n_sentences = 0;

  std::map<RoleLabel, MeanPRF> role_means() const;
  MeanPRF overall_mean() const;
  MeanPRF macro_mean() const;  // per fold: mean over defined roles
  std::optional<MeanPRF> indicator_mean() const;

  nlohmann::json to_json() const;
  void print_table(std::ostream& out) const;
};

enum class SplitBy { Instance, Report };

struct CvOptions {
  int k = 10;
  SplitBy split_by = SplitBy::Instance;
  bool indicator_task = false;
  int jobs = 1;
  std::optional<std::filesystem::path> pretrained;
  std::ostream* progress = nullptr;
};

MetricReport cross_validate(const Corpus& corpus, const TaggerConfig& config,
                            const CvOptions& options = {});

}  // namespace radsprl
