#include <algorithm>
#include <atomic>
#include <mutex>
#include <ostream>
#include <thread>

#include "radsprl/error.hpp"
#include "radsprl/eval.hpp"
#include "radsprl/tagger.hpp"

namespace radsprl {

namespace {

template <class T>
std::vector<T> pick(const std::vector<T>& items, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(items[i]);
  return out;
}

// Indicator-task folds follow the roles folds: a sentence goes to the fold of
// its first relation; sentences without relations are dealt round-robin.
FoldPlan sentence_folds(const Corpus& corpus, const std::vector<std::size_t>& first_instance,
                        const FoldPlan& plan, std::size_t n_instances) {
  const auto assign = plan.assignment(n_instances);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(plan.k()));
  std::vector<std::size_t> loose;
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    if (corpus.sentences[s].relations.empty()) {
      loose.push_back(s);
    } else {
      folds[static_cast<std::size_t>(assign[first_instance[s]])].push_back(s);
    }
  }
  Rng rng(derive_seed(plan.seed(), "sentences-without-relations"));
  shuffle(loose.begin(), loose.end(), rng);
  for (std::size_t i = 0; i < loose.size(); ++i) folds[i % folds.size()].push_back(loose[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return FoldPlan(plan.k(), plan.seed(), std::move(folds));
}

}  // namespace

MetricReport cross_validate(const Corpus& corpus, const TaggerConfig& config,
                            const CvOptions& options) {
  config.validate();
  if (config.task != Task::Roles) throw ValidationError("cross_validate drives the roles task");

  std::vector<Instance> instances;
  std::vector<KeyedRelation> gold;
  std::vector<std::size_t> first_instance(corpus.sentences.size(), 0);
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    const auto& sent = corpus.sentences[s];
    first_instance[s] = instances.size();
    auto part = expand_instances(sent);
    for (std::size_t r = 0; r < part.size(); ++r) {
      gold.push_back({sent.report_id, sent.sentence_id, sent.relations[r]});
      instances.push_back(std::move(part[r]));
    }
  }

  const std::uint64_t fold_seed = derive_seed(config.seed, "folds");
  FoldPlan plan;
  if (options.split_by == SplitBy::Report) {
    std::vector<std::string> groups;
    for (const auto& inst : instances) groups.push_back(inst.source.report_id);
    plan = make_grouped_folds(groups, options.k, fold_seed);
  } else {
    plan = make_folds(instances.size(), options.k, fold_seed);
  }

  std::vector<Instance> sentence_instances;
  FoldPlan sentence_plan;
  if (options.indicator_task) {
    for (const auto& s : corpus.sentences) sentence_instances.push_back(indicator_instance(s));
    sentence_plan = sentence_folds(corpus, first_instance, plan, instances.size());
  }

  MetricReport report;
  report.n_instances = instances.size();
  report.n_sentences = corpus.sentences.size();
  report.folds.resize(static_cast<std::size_t>(options.k));
  std::mutex log_mutex;

  auto run_fold = [&](int i) {
    FoldMetrics& fm = report.folds[static_cast<std::size_t>(i)];
    fm.fold = i + 1;
    const auto train_idx = plan.train(i), val_idx = plan.val(i), test_idx = plan.test(i);
    fm.n_train = train_idx.size();
    fm.n_val = val_idx.size();
    fm.n_test = test_idx.size();
    try {
      TaggerConfig cfg = config;
      cfg.seed = derive_seed(config.seed, "fold-" + std::to_string(i));
      TrainResult tr = train(pick(instances, train_idx), pick(instances, val_idx), cfg,
                             options.pretrained);
      fm.best_epoch = tr.log.best_epoch;
      std::vector<KeyedRelation> pred, g;
      for (std::size_t idx : test_idx) {
        const Instance& inst = instances[idx];
        pred.push_back({inst.source.report_id, inst.source.sentence_id,
                        predict_instance(tr.model, inst)});
        g.push_back(gold[idx]);
      }
      const MatchReport m = exact_match(g, pred);
      fm.roles = m.roles;
      fm.overall = m.overall;
    } catch (const std::exception& e) {
      fm.error = e.what();
    }
    if (options.indicator_task) {
      try {
        TaggerConfig cfg = config;
        cfg.task = Task::Indicator;
        cfg.seed = derive_seed(config.seed, "indicator-fold-" + std::to_string(i));
        TrainResult tr = train(pick(sentence_instances, sentence_plan.train(i)),
                               pick(sentence_instances, sentence_plan.val(i)), cfg,
                               options.pretrained);
        fm.indicator_best_epoch = tr.log.best_epoch;
        std::vector<KeyedSpan> g, p;
        for (std::size_t s : sentence_plan.test(i)) {
          const auto& sent = corpus.sentences[s];
          for (const auto& r : sent.relations) g.push_back({sent.report_id, sent.sentence_id, r.indicator});
          for (auto& span : predict_indicators(tr.model, sent.text)) {
            p.push_back({sent.report_id, sent.sentence_id, std::move(span)});
          }
        }
        fm.indicator = indicator_match(g, p);
      } catch (const std::exception& e) {
        const std::string msg = std::string("indicator task: ") + e.what();
        fm.error = fm.error ? *fm.error + "; " + msg : msg;
      }
    }
    if (options.progress) {
      std::lock_guard<std::mutex> lock(log_mutex);
      *options.progress << "fold " << fm.fold << "/" << options.k << ": train " << fm.n_train
                        << ", val " << fm.n_val << ", test " << fm.n_test;
      if (fm.error) {
        *options.progress << ", error: " << *fm.error;
      } else {
        *options.progress << ", best epoch " << fm.best_epoch << ", overall F1 "
                          << fm.overall.f1();
      }
      if (fm.indicator) *options.progress << ", indicator F1 " << fm.indicator->f1();
      *options.progress << '\n' << std::flush;
    }
  };

  const int jobs = std::max(1, std::min(options.jobs, options.k));
  if (jobs == 1) {
    for (int i = 0; i < options.k; ++i) run_fold(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (int i = next++; i < options.k; i = next++) run_fold(i);
      });
    }
    for (auto& t : workers) t.join();
  }
  return report;
}

}  // namespace radsprl
