#include "radsprl/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "radsprl/corpus.hpp"
#include "radsprl/error.hpp"
#include "radsprl/eval.hpp"
#include "radsprl/preprocess.hpp"
#include "radsprl/rng.hpp"
#include "radsprl/synth.hpp"
#include "radsprl/tagger.hpp"

namespace radsprl {

namespace fs = std::filesystem;

namespace {

// Writes go to a sibling temp file that replaces the target on commit and is
// deleted otherwise.
class PendingFile {
 public:
  explicit PendingFile(fs::path target) : target_(std::move(target)) {
    tmp_ = target_;
    tmp_ += ".partial";
  }
  PendingFile(const PendingFile&) = delete;
  PendingFile& operator=(const PendingFile&) = delete;
  ~PendingFile() {
    if (!committed_) {
      if (stream_.is_open()) stream_.close();
      std::error_code ec;
      fs::remove(tmp_, ec);
    }
  }

  const fs::path& tmp_path() const { return tmp_; }

  std::ostream& stream() {
    if (!stream_.is_open()) {
      stream_.open(tmp_, std::ios::binary | std::ios::trunc);
      if (!stream_) throw Error("cannot open " + tmp_.string() + " for writing");
    }
    return stream_;
  }

  void commit() {
    if (stream_.is_open()) {
      stream_.close();
      if (!stream_) throw Error("failed writing " + target_.string());
    }
    fs::rename(tmp_, target_);
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path tmp_;
  std::ofstream stream_;
  bool committed_ = false;
};

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// Config flags collected before the config file is known; applied last.
struct ConfigFlags {
  std::optional<std::string> config_path;
  std::optional<int> word_dim, char_dim, char_hidden, ind_dim, lstm_hidden, max_epochs,
      batch_size, min_freq;
  std::optional<double> dropout, lr, lr_decay, clip_norm;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> task;
  bool bio_constraints = false;
  std::optional<bool> stop_at_perfect_val;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON file of tagger settings");
    app->add_option("--word-dim", word_dim, "word embedding size");
    app->add_option("--char-dim", char_dim, "character embedding size");
    app->add_option("--char-hidden", char_hidden, "character LSTM size per direction");
    app->add_option("--ind-dim", ind_dim, "indicator embedding size");
    app->add_option("--lstm-hidden", lstm_hidden, "sentence LSTM size per direction");
    app->add_option("--dropout", dropout, "dropout probability");
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--lr-decay", lr_decay, "per-epoch learning rate decay");
    app->add_option("--max-epochs", max_epochs, "training epochs");
    app->add_option("--batch-size", batch_size, "instances per update");
    app->add_option("--min-freq", min_freq, "minimum word frequency for the vocabulary");
    app->add_option("--clip-norm", clip_norm, "global gradient norm limit");
    app->add_option("--seed", seed, "root random seed");
    app->add_option("--task", task, "roles or indicator")->check(CLI::IsMember({"roles", "indicator"}));
    app->add_flag("--bio-constraints", bio_constraints, "forbid invalid BIO transitions");
    app->add_option("--stop-at-perfect-val", stop_at_perfect_val,
                    "stop once validation F1 reaches 1 (true/false)");
  }

  TaggerConfig resolve() const {
    TaggerConfig config;
    if (config_path) config.merge_json(read_json_file(*config_path));
    nlohmann::json j = nlohmann::json::object();
    if (word_dim) j["word_dim"] = *word_dim;
    if (char_dim) j["char_dim"] = *char_dim;
    if (char_hidden) j["char_hidden"] = *char_hidden;
    if (ind_dim) j["ind_dim"] = *ind_dim;
    if (lstm_hidden) j["lstm_hidden"] = *lstm_hidden;
    if (dropout) j["dropout"] = *dropout;
    if (lr) j["lr"] = *lr;
    if (lr_decay) j["lr_decay"] = *lr_decay;
    if (max_epochs) j["max_epochs"] = *max_epochs;
    if (batch_size) j["batch_size"] = *batch_size;
    if (min_freq) j["min_freq"] = *min_freq;
    if (clip_norm) j["clip_norm"] = *clip_norm;
    if (seed) j["seed"] = *seed;
    if (task) j["task"] = *task;
    if (bio_constraints) j["bio_constraints"] = true;
    if (stop_at_perfect_val) j["stop_at_perfect_val"] = *stop_at_perfect_val;
    config.merge_json(j);
    config.validate();
    return config;
  }
};

std::vector<Instance> task_instances(const Corpus& corpus, Task task) {
  if (task == Task::Roles) return expand_corpus(corpus);
  std::vector<Instance> out;
  out.reserve(corpus.sentences.size());
  for (const auto& s : corpus.sentences) out.push_back(indicator_instance(s));
  return out;
}

void print_epoch(std::ostream& err, const EpochLog& e) {
  std::ostringstream line;
  line.setf(std::ios::fixed);
  line.precision(4);
  line << "epoch " << e.epoch << " loss " << e.mean_loss << " val_f1 " << e.val_f1 << " lr "
       << e.learning_rate << '\n';
  err << line.str();
}

int cmd_stats(const std::string& corpus_path, bool as_json, std::ostream& out) {
  const Corpus corpus = load_corpus(corpus_path);
  const CorpusStats stats = compute_stats(corpus, tokenize);
  if (as_json) {
    synth::Tally t;
    t.stats = stats;
    t.n_sentences = corpus.sentences.size();
    auto j = t.to_json();
    j.erase("template_counts");
    out << j.dump(2) << '\n';
  } else {
    print_stats_table(out, stats);
  }
  return 0;
}

int cmd_agreement(const std::string& a_path, const std::string& b_path,
                  const std::optional<std::string>& lexicon_path, std::ostream& out) {
  const Corpus a = load_corpus(a_path);
  const Corpus b = load_corpus(b_path);
  const auto lexicon = lexicon_path ? load_lexicon(*lexicon_path) : default_preposition_lexicon();
  print_agreement_table(out, compute_agreement(a, b, lexicon, tokenize));
  return 0;
}

struct TrainArgs {
  std::string corpus;
  std::optional<std::string> val;
  std::optional<std::string> embeddings;
  std::string model;
  std::optional<std::string> log;
};

int cmd_train(const TrainArgs& args, const TaggerConfig& config, bool verbose, std::ostream& out,
              std::ostream& err) {
  const Corpus corpus = load_corpus(args.corpus);
  std::vector<Instance> train_set = task_instances(corpus, config.task);
  std::vector<Instance> val_set;
  if (args.val) {
    val_set = task_instances(load_corpus(*args.val), config.task);
  } else {
    if (train_set.size() < 3) throw ValidationError("need at least 3 instances to hold out validation data");
    const int k = static_cast<int>(std::min<std::size_t>(10, train_set.size()));
    const FoldPlan plan = make_folds(train_set.size(), k, derive_seed(config.seed, "holdout"));
    std::vector<Instance> kept;
    const auto& held = plan.folds().front();
    std::vector<bool> is_val(train_set.size(), false);
    for (auto i : held) is_val[i] = true;
    for (std::size_t i = 0; i < train_set.size(); ++i) {
      (is_val[i] ? val_set : kept).push_back(std::move(train_set[i]));
    }
    train_set = std::move(kept);
  }

  EpochCallback cb;
  if (verbose) cb = [&](const EpochLog& e, const TaggerModel&) { print_epoch(err, e); return true; };
  std::optional<fs::path> pretrained;
  if (args.embeddings) pretrained = *args.embeddings;
  TrainResult result = train(train_set, val_set, config, pretrained, cb);

  PendingFile model_file(args.model);
  std::optional<PendingFile> log_file;
  if (args.log) {
    log_file.emplace(*args.log);
    log_file->stream() << result.log.to_json().dump(2) << '\n';
  }
  save_model(result.model, model_file.tmp_path());
  model_file.commit();
  if (log_file) log_file->commit();
  out << "trained " << result.log.epochs.size() << " epochs on " << train_set.size()
      << " instances; best epoch " << result.log.best_epoch << " val F1 " << result.log.best_val_f1
      << '\n';
  return 0;
}

struct PredictArgs {
  std::string model;
  std::optional<std::string> indicator_model;
  std::string corpus;
  std::string out;
};

int cmd_predict(const PredictArgs& args, std::ostream& out) {
  const TaggerModel model = load_model(args.model);
  std::optional<TaggerModel> indicator_model;
  if (args.indicator_model) {
    indicator_model = load_model(*args.indicator_model);
    if (indicator_model->config().task != Task::Indicator) {
      throw ValidationError(*args.indicator_model + " is not an indicator-task model");
    }
  }
  const Corpus corpus = load_corpus(args.corpus);
  PendingFile file(args.out);
  std::size_t n_relations = 0;
  for (const auto& sentence : corpus.sentences) {
    AnnotatedSentence pred;
    pred.report_id = sentence.report_id;
    pred.sentence_id = sentence.sentence_id;
    pred.text = sentence.text;
    if (model.config().task == Task::Indicator) {
      for (const Span& ind : predict_indicators(model, sentence.text)) {
        SpatialRelation r;
        r.indicator = ind;
        pred.relations.push_back(std::move(r));
      }
    } else {
      std::vector<Span> indicators;
      if (indicator_model) {
        indicators = predict_indicators(*indicator_model, sentence.text);
      } else {
        for (const auto& r : sentence.relations) indicators.push_back(r.indicator);
      }
      if (!indicators.empty()) pred.relations = predict_relations(model, sentence.text, indicators);
    }
    n_relations += pred.relations.size();
    file.stream() << format_sentence_json(pred) << '\n';
  }
  file.commit();
  out << "wrote " << corpus.sentences.size() << " sentences, " << n_relations << " relations to "
      << args.out << '\n';
  return 0;
}

struct CvArgs {
  std::string corpus;
  std::optional<std::string> embeddings;
  std::optional<std::string> out;
  int k = 10;
  int jobs = 1;
  std::string split_by = "instance";
  bool indicator_task = false;
};

int cmd_cv(const CvArgs& args, const TaggerConfig& config, bool verbose, std::ostream& out,
           std::ostream& err) {
  const Corpus corpus = load_corpus(args.corpus);
  CvOptions options;
  options.k = args.k;
  options.jobs = args.jobs;
  options.split_by = args.split_by == "report" ? SplitBy::Report : SplitBy::Instance;
  options.indicator_task = args.indicator_task;
  if (args.embeddings) options.pretrained = *args.embeddings;
  if (verbose) options.progress = &err;
  const MetricReport report = cross_validate(corpus, config, options);
  if (args.out) {
    PendingFile file(*args.out);
    file.stream() << report.to_json().dump(2) << '\n';
    file.commit();
  }
  report.print_table(out);
  for (const auto& f : report.folds) {
    if (f.error) err << "fold " << f.fold << " failed: " << *f.error << '\n';
  }
  return 0;
}

struct SynthArgs {
  std::optional<std::size_t> n;
  std::optional<std::size_t> n_relations;
  std::uint64_t seed = 42;
  std::optional<std::string> grammar;
  std::vector<std::string> weights;
  std::string out;
  std::optional<std::string> tally;
  std::optional<std::string> dump_grammar;
};

int cmd_synth(const SynthArgs& args, std::ostream& out) {
  if (args.n.has_value() == args.n_relations.has_value()) {
    throw ValidationError("give exactly one of --n and --n-relations");
  }
  synth::TemplateGrammar grammar = args.grammar
                                       ? synth::TemplateGrammar::from_json(read_json_file(*args.grammar))
                                       : synth::TemplateGrammar::default_grammar();
  if (!args.weights.empty()) {
    std::map<std::string, double> w;
    for (const auto& item : args.weights) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ValidationError("weight \"" + item + "\" is not name=value");
      try {
        w[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
      } catch (const std::exception&) {
        throw ValidationError("weight \"" + item + "\" is not name=value");
      }
    }
    grammar.set_weights(w);
  }
  const synth::Generated g = args.n ? synth::generate(*args.n, args.seed, grammar)
                                    : synth::generate_relations(*args.n_relations, args.seed, grammar);
  PendingFile corpus_file(args.out);
  write_corpus(corpus_file.stream(), g.corpus);
  std::optional<PendingFile> tally_file;
  if (args.tally) {
    tally_file.emplace(*args.tally);
    tally_file->stream() << g.tally.to_json().dump(2) << '\n';
  }
  std::optional<PendingFile> grammar_file;
  if (args.dump_grammar) {
    grammar_file.emplace(*args.dump_grammar);
    grammar_file->stream() << grammar.to_json().dump(2) << '\n';
  }
  corpus_file.commit();
  if (tally_file) tally_file->commit();
  if (grammar_file) grammar_file->commit();
  out << "wrote " << g.corpus.sentences.size() << " sentences, " << g.tally.stats.n_relations
      << " relations to " << args.out << '\n';
  return 0;
}

struct GradcheckArgs {
  double threshold = 1e-4;
  std::size_t samples = 200;
  double eps = 1e-5;
};

int cmd_gradcheck(const GradcheckArgs& args, TaggerConfig config, std::ostream& out) {
  config.dropout = 0.0;
  AnnotatedSentence s;
  s.report_id = "R0";
  s.sentence_id = "S0";
  s.text = "Scarring in left apex";
  SpatialRelation r;
  r.indicator = make_span(s.text, 9, 11);
  r.trajectors.push_back(make_span(s.text, 0, 8));
  r.landmarks.push_back(make_span(s.text, 12, 21));
  s.relations.push_back(r);
  validate_sentence(s);
  const Instance inst = config.task == Task::Roles ? expand_instances(s).front() : indicator_instance(s);
  TaggerModel model = TaggerModel::create(config, build_vocab({inst}, 1));
  Rng rng(derive_seed(config.seed, "gradcheck"));
  const auto results = check_model_gradients(model, inst, rng, args.eps, args.samples);
  std::ostringstream table;
  table.setf(std::ios::scientific);
  table.precision(3);
  double worst = 0.0;
  for (const auto& g : results) {
    table << g.name << "  checked " << g.checked << "  max_rel_error " << g.max_rel_error << '\n';
    worst = std::max(worst, g.max_rel_error);
  }
  table << "overall max_rel_error " << worst << " (threshold " << args.threshold << ")\n";
  out << table.str();
  return worst < args.threshold ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatial role labeling for radiology sentences"};
  app.name("radsprl");
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "print per-epoch and per-fold progress to stderr");

  std::string corpus_path;
  bool stats_json = false;
  auto* stats = app.add_subcommand("stats", "corpus statistics table");
  stats->add_option("--corpus", corpus_path, "corpus JSONL")->required();
  stats->add_flag("--json", stats_json, "print JSON instead of the table");

  std::string a_path, b_path;
  std::optional<std::string> lexicon_path;
  auto* agreement = app.add_subcommand("agreement", "inter-annotator agreement");
  agreement->add_option("--corpus-a", a_path, "first annotator's corpus")->required();
  agreement->add_option("--corpus-b", b_path, "second annotator's corpus")->required();
  agreement->add_option("--lexicon", lexicon_path, "preposition list, one per line");

  TrainArgs train_args;
  ConfigFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train a tagger");
  train_cmd->add_option("--corpus", train_args.corpus, "training corpus JSONL")->required();
  train_cmd->add_option("--val", train_args.val, "validation corpus (default: hold out a tenth)");
  train_cmd->add_option("--embeddings", train_args.embeddings, "pretrained word vectors (text format)");
  train_cmd->add_option("--model", train_args.model, "checkpoint to write")->required();
  train_cmd->add_option("--log", train_args.log, "training log JSON to write");
  train_flags.attach(train_cmd);

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "tag a corpus with a trained model");
  predict->add_option("--model", predict_args.model, "checkpoint")->required();
  predict->add_option("--indicator-model", predict_args.indicator_model,
                      "indicator checkpoint; otherwise indicators come from the corpus");
  predict->add_option("--corpus", predict_args.corpus, "input corpus JSONL")->required();
  predict->add_option("--out", predict_args.out, "predictions JSONL to write")->required();

  CvArgs cv_args;
  ConfigFlags cv_flags;
  auto* cv = app.add_subcommand("cv", "k-fold cross validation");
  cv->add_option("--corpus", cv_args.corpus, "corpus JSONL")->required();
  cv->add_option("--embeddings", cv_args.embeddings, "pretrained word vectors (text format)");
  cv->add_option("--out", cv_args.out, "metric report JSON to write");
  cv->add_option("--k", cv_args.k, "number of folds")->check(CLI::Range(3, 1000));
  cv->add_option("--jobs", cv_args.jobs, "folds run in parallel")->check(CLI::Range(1, 256));
  cv->add_option("--split-by", cv_args.split_by, "instance or report")
      ->check(CLI::IsMember({"instance", "report"}));
  cv->add_flag("--indicator-task", cv_args.indicator_task, "also train and score indicator detection");
  cv_flags.attach(cv);

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus");
  synth_cmd->add_option("--n", synth_args.n, "number of sentences");
  synth_cmd->add_option("--n-relations", synth_args.n_relations, "number of relations");
  synth_cmd->add_option("--seed", synth_args.seed, "random seed");
  synth_cmd->add_option("--grammar", synth_args.grammar, "grammar JSON (default: built in)");
  synth_cmd->add_option("--weight", synth_args.weights, "template weight as name=value; repeatable");
  synth_cmd->add_option("--out", synth_args.out, "corpus JSONL to write")->required();
  synth_cmd->add_option("--tally", synth_args.tally, "generator tally JSON to write");
  synth_cmd->add_option("--dump-grammar", synth_args.dump_grammar, "write the grammar in use as JSON");

  GradcheckArgs gc_args;
  ConfigFlags gc_flags;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck->add_option("--threshold", gc_args.threshold, "maximum allowed relative error");
  gradcheck->add_option("--samples", gc_args.samples, "coordinates per parameter group");
  gradcheck->add_option("--eps", gc_args.eps, "finite-difference step");
  gc_flags.attach(gradcheck);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (stats->parsed()) return cmd_stats(corpus_path, stats_json, out);
    if (agreement->parsed()) return cmd_agreement(a_path, b_path, lexicon_path, out);
    if (train_cmd->parsed()) return cmd_train(train_args, train_flags.resolve(), verbose, out, err);
    if (predict->parsed()) return cmd_predict(predict_args, out);
    if (cv->parsed()) return cmd_cv(cv_args, cv_flags.resolve(), verbose, out, err);
    if (synth_cmd->parsed()) return cmd_synth(synth_args, out);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_args, gc_flags.resolve(), out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace radsprl
