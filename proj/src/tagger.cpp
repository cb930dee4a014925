#include "radsprl/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "radsprl/error.hpp"
#include "radsprl/eval.hpp"

namespace radsprl {

using nn::Matrix;
using nn::Param;
using nn::Vector;

void TaggerConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ValidationError(std::string(name) + " must be positive");
  };
  positive(word_dim, "word_dim");
  positive(char_dim, "char_dim");
  positive(char_hidden, "char_hidden");
  positive(ind_dim, "ind_dim");
  positive(lstm_hidden, "lstm_hidden");
  positive(batch_size, "batch_size");
  positive(min_freq, "min_freq");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must be in [0, 1)");
  if (!(lr > 0.0)) throw ValidationError("lr must be positive");
  if (!(lr_decay > 0.0)) throw ValidationError("lr_decay must be positive");
  if (max_epochs < 0) throw ValidationError("max_epochs must be non-negative");
  if (!(clip_norm > 0.0)) throw ValidationError("clip_norm must be positive");
}

nlohmann::json TaggerConfig::to_json() const {
  return {{"word_dim", word_dim},       {"char_dim", char_dim},
          {"char_hidden", char_hidden}, {"ind_dim", ind_dim},
          {"lstm_hidden", lstm_hidden}, {"dropout", dropout},
          {"lr", lr},                   {"lr_decay", lr_decay},
          {"max_epochs", max_epochs},   {"batch_size", batch_size},
          {"seed", seed},               {"task", std::string(task_name(task))},
          {"bio_constraints", bio_constraints}, {"min_freq", min_freq},
          {"clip_norm", clip_norm},     {"stop_at_perfect_val", stop_at_perfect_val}};
}

void TaggerConfig::merge_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "word_dim") word_dim = value.get<int>();
      else if (key == "char_dim") char_dim = value.get<int>();
      else if (key == "char_hidden") char_hidden = value.get<int>();
      else if (key == "ind_dim") ind_dim = value.get<int>();
      else if (key == "lstm_hidden") lstm_hidden = value.get<int>();
      else if (key == "dropout") dropout = value.get<double>();
      else if (key == "lr") lr = value.get<double>();
      else if (key == "lr_decay") lr_decay = value.get<double>();
      else if (key == "max_epochs") max_epochs = value.get<int>();
      else if (key == "batch_size") batch_size = value.get<int>();
      else if (key == "seed") seed = value.get<std::uint64_t>();
      else if (key == "task") {
        auto t = parse_task(value.get<std::string>());
        if (!t) throw ValidationError("unknown task \"" + value.get<std::string>() + "\"");
        task = *t;
      } else if (key == "bio_constraints") bio_constraints = value.get<bool>();
      else if (key == "min_freq") min_freq = value.get<int>();
      else if (key == "clip_norm") clip_norm = value.get<double>();
      else if (key == "stop_at_perfect_val") stop_at_perfect_val = value.get<bool>();
      else throw ValidationError("unknown config key \"" + key + "\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }
}

Matrix bio_constraint_mask(Task task) {
  const auto& labels = task_labels(task);
  const auto L = static_cast<Eigen::Index>(labels.size());
  Matrix mask = Matrix::Zero(L + 2, L + 2);
  mask.col(L).setOnes();      // into START
  mask.row(L + 1).setOnes();  // out of STOP
  for (Eigen::Index b = 0; b < L; ++b) {
    const Tag to = labels[static_cast<std::size_t>(b)];
    const bool inside = !is_begin(to) && to != Tag::O && to != Tag::Indicator;
    if (!inside) continue;
    const Tag begin = static_cast<Tag>(static_cast<int>(to) - 1);
    for (Eigen::Index a = 0; a < L; ++a) {
      const Tag from = labels[static_cast<std::size_t>(a)];
      if (from != to && from != begin) mask(a, b) = 1.0;
    }
    mask(L, b) = 1.0;  // START -> I-X
  }
  return mask;
}

Eigen::Index TaggerModel::input_dim() const {
  return config_.word_dim + 2 * config_.char_hidden +
         (uses_indicator_embedding() ? config_.ind_dim : 0);
}

TaggerModel TaggerModel::create(const TaggerConfig& config, Vocabularies vocabs,
                                std::optional<EmbeddingTable> word_table) {
  config.validate();
  TaggerModel m;
  m.config_ = config;
  m.vocabs_ = std::move(vocabs);
  Rng rng(derive_seed(config.seed, "init"));
  if (word_table) {
    if (word_table->rows() != static_cast<Eigen::Index>(m.vocabs_.words.size()) ||
        word_table->dim() != config.word_dim) {
      throw ShapeError("pretrained word table does not match vocabulary size / word_dim");
    }
    m.word_emb = std::move(*word_table);
    m.word_emb.weights.name = "word_embeddings";
  } else {
    m.word_emb = random_embeddings("word_embeddings", m.vocabs_.words.size(), config.word_dim, rng);
  }
  m.char_emb = random_embeddings("char_embeddings", m.vocabs_.chars.size(), config.char_dim, rng);
  if (m.uses_indicator_embedding()) {
    m.ind_emb = random_embeddings("indicator_embeddings", 2, config.ind_dim, rng, false);
  }
  m.char_lstm = nn::BiLstmParams::init("char_lstm", config.char_dim, config.char_hidden, rng);
  m.sent_lstm = nn::BiLstmParams::init("sentence_lstm", m.input_dim(), config.lstm_hidden, rng);
  m.proj = nn::Linear::init("projection", 2 * config.lstm_hidden,
                            static_cast<Eigen::Index>(m.num_labels()), rng);
  m.transitions = Param("transitions", crf::make_transitions(m.num_labels()));
  m.rebuild_mask();
  m.apply_constraints();
  return m;
}

void TaggerModel::rebuild_mask() {
  constraint_mask_ = config_.bio_constraints ? bio_constraint_mask(config_.task) : Matrix();
}

void TaggerModel::apply_constraints() { crf::apply_mask(transitions.value, constraint_mask_); }

std::vector<Param*> TaggerModel::params() {
  std::vector<Param*> out = {&word_emb.weights, &char_emb.weights};
  if (uses_indicator_embedding()) out.push_back(&ind_emb.weights);
  for (Param* p : char_lstm.params()) out.push_back(p);
  for (Param* p : sent_lstm.params()) out.push_back(p);
  out.push_back(&proj.W);
  out.push_back(&proj.b);
  out.push_back(&transitions);
  return out;
}

std::vector<const Param*> TaggerModel::params() const {
  auto mut = const_cast<TaggerModel*>(this)->params();
  return {mut.begin(), mut.end()};
}

int CharEncoder::encode(const std::vector<int>& chars) {
  if (chars.empty()) throw ShapeError("character representation of an empty token");
  auto it = index_.find(chars);
  if (it != index_.end()) return it->second;
  const auto& table = model_->char_emb.weights.value;
  Matrix X(table.cols(), static_cast<Eigen::Index>(chars.size()));
  for (std::size_t j = 0; j < chars.size(); ++j) {
    X.col(static_cast<Eigen::Index>(j)) = table.row(chars[j]).transpose();
  }
  nn::BiLstmTrace trace;
  const Matrix out = nn::bilstm_forward(model_->char_lstm, X, trace);
  const Eigen::Index h = model_->char_lstm.fwd.hidden_size();
  Vector rep(2 * h);
  rep.head(h) = out.topRows(h).col(out.cols() - 1);
  rep.tail(h) = out.bottomRows(h).col(0);
  const int col = static_cast<int>(forms_.size());
  index_.emplace(chars, col);
  forms_.push_back(chars);
  traces_.push_back(std::move(trace));
  if (reps_.cols() == 0) reps_.resize(2 * h, 0);
  reps_.conservativeResize(Eigen::NoChange, col + 1);
  reps_.col(col) = rep;
  dreps_.conservativeResize(2 * h, col + 1);
  dreps_.col(col).setZero();
  return col;
}

void CharEncoder::add_grad(int column, const Vector& grad) { dreps_.col(column) += grad; }

void CharEncoder::backward(TaggerModel& model) {
  const Eigen::Index h = model.char_lstm.fwd.hidden_size();
  for (std::size_t f = 0; f < forms_.size(); ++f) {
    const auto col = static_cast<Eigen::Index>(f);
    if (dreps_.col(col).isZero(0.0)) continue;
    const auto m = static_cast<Eigen::Index>(forms_[f].size());
    Matrix dOut = Matrix::Zero(2 * h, m);
    dOut.block(0, m - 1, h, 1) = dreps_.col(col).head(h);
    dOut.block(h, 0, h, 1) = dreps_.col(col).tail(h);
    const Matrix dX = nn::bilstm_backward(model.char_lstm, traces_[f], dOut);
    if (!model.char_emb.trainable) continue;
    for (Eigen::Index j = 0; j < m; ++j) {
      model.char_emb.weights.grad.row(forms_[f][static_cast<std::size_t>(j)]) += dX.col(j).transpose();
    }
  }
  dreps_.setZero();
}

Vector char_representation(const std::vector<int>& chars, const EmbeddingTable& table,
                           const nn::BiLstmParams& lstm) {
  if (chars.empty()) throw ShapeError("character representation of an empty token");
  Matrix X(table.dim(), static_cast<Eigen::Index>(chars.size()));
  for (std::size_t j = 0; j < chars.size(); ++j) {
    X.col(static_cast<Eigen::Index>(j)) = table.weights.value.row(chars[j]).transpose();
  }
  nn::BiLstmTrace trace;
  const Matrix out = nn::bilstm_forward(lstm, X, trace);
  const Eigen::Index h = lstm.fwd.hidden_size();
  Vector rep(2 * h);
  rep.head(h) = out.topRows(h).col(out.cols() - 1);
  rep.tail(h) = out.bottomRows(h).col(0);
  return rep;
}

Matrix forward(const TaggerModel& model, const std::vector<TokenEncoding>& enc, CharEncoder& chars,
               bool training, Rng& rng, ForwardTrace* trace) {
  const auto n = static_cast<Eigen::Index>(enc.size());
  if (n == 0) throw ShapeError("forward: empty sentence");
  const auto& cfg = model.config();
  const Eigen::Index wd = cfg.word_dim;
  const Eigen::Index cd = 2 * cfg.char_hidden;
  ForwardTrace local;
  ForwardTrace& tr = trace ? *trace : local;
  tr.enc = enc;
  tr.char_column.resize(enc.size());
  Matrix X(model.input_dim(), n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& e = enc[static_cast<std::size_t>(t)];
    if (e.word_index < 0 || e.word_index >= model.word_emb.rows()) {
      throw ShapeError("forward: word index out of range");
    }
    X.block(0, t, wd, 1) = model.word_emb.weights.value.row(e.word_index).transpose();
    const int col = chars.encode(e.char_indices);
    tr.char_column[static_cast<std::size_t>(t)] = col;
    X.block(wd, t, cd, 1) = chars.reps().col(col);
    if (model.uses_indicator_embedding()) {
      X.block(wd + cd, t, cfg.ind_dim, 1) =
          model.ind_emb.weights.value.row(e.indicator_flag ? 1 : 0).transpose();
    }
  }
  tr.x = nn::dropout(X, cfg.dropout, training, rng, &tr.x_mask);
  const Matrix H = nn::bilstm_forward(model.sent_lstm, tr.x, tr.sent);
  tr.h = nn::dropout(H, cfg.dropout, training, rng, &tr.h_mask);
  tr.emissions = model.proj.forward(tr.h).transpose();
  return tr.emissions;
}

Matrix emissions(const TaggerModel& model, const Instance& instance) {
  CharEncoder chars(model);
  Rng rng(0);
  return forward(model, encode_instance(instance, model.vocabs()), chars, false, rng);
}

std::vector<int> gold_label_indices(const Instance& instance) {
  std::vector<int> out;
  out.reserve(instance.labels.size());
  for (Tag t : instance.labels) {
    const int idx = label_index(instance.task, t);
    if (idx < 0) {
      throw ValidationError("label " + std::string(tag_name(t)) + " is not valid for the " +
                            std::string(task_name(instance.task)) + " task");
    }
    out.push_back(idx);
  }
  return out;
}

double loss_and_backward(TaggerModel& model, const Instance& instance, CharEncoder& chars,
                         bool training, Rng& rng) {
  if (instance.task != model.config().task) throw ValidationError("instance task differs from model task");
  const auto gold = gold_label_indices(instance);
  ForwardTrace tr;
  const Matrix E = forward(model, encode_instance(instance, model.vocabs()), chars, training, rng, &tr);
  crf::LossAndGrad g = crf::nll_loss_grad(E, model.transitions.value, gold);
  if (model.constraint_mask().size() != 0) {
    g.dT = (model.constraint_mask().array() != 0.0).select(0.0, g.dT);
  }
  model.transitions.grad += g.dT;

  const Matrix dY = g.dE.transpose();
  Matrix dH = model.proj.backward(tr.h, dY);
  if (tr.h_mask.size() != 0) dH.array() *= tr.h_mask.array();
  Matrix dX = nn::bilstm_backward(model.sent_lstm, tr.sent, dH);
  if (tr.x_mask.size() != 0) dX.array() *= tr.x_mask.array();

  const auto& cfg = model.config();
  const Eigen::Index wd = cfg.word_dim;
  const Eigen::Index cd = 2 * cfg.char_hidden;
  for (Eigen::Index t = 0; t < dX.cols(); ++t) {
    const auto& e = tr.enc[static_cast<std::size_t>(t)];
    if (model.word_emb.trainable) {
      model.word_emb.weights.grad.row(e.word_index) += dX.block(0, t, wd, 1).transpose();
    }
    chars.add_grad(tr.char_column[static_cast<std::size_t>(t)], dX.block(wd, t, cd, 1));
    if (model.uses_indicator_embedding() && model.ind_emb.trainable) {
      model.ind_emb.weights.grad.row(e.indicator_flag ? 1 : 0) +=
          dX.block(wd + cd, t, cfg.ind_dim, 1).transpose();
    }
  }
  return g.loss;
}

double instance_loss(const TaggerModel& model, const Instance& instance) {
  const Matrix E = emissions(model, instance);
  return crf::nll_loss(E, model.transitions.value, gold_label_indices(instance));
}

std::vector<Tag> decode(const TaggerModel& model, const Instance& instance) {
  if (instance.tokens.empty()) return {};
  const Matrix E = emissions(model, instance);
  const auto path = crf::viterbi(E, model.transitions.value);
  const auto& labels = task_labels(model.config().task);
  std::vector<Tag> out;
  out.reserve(path.labels.size());
  for (int y : path.labels) out.push_back(labels[static_cast<std::size_t>(y)]);
  return out;
}

SpatialRelation predict_instance(const TaggerModel& model, const Instance& instance) {
  if (model.config().task != Task::Roles) throw ValidationError("predict_instance needs a roles model");
  Span indicator;
  if (instance.source.indicator) {
    indicator = *instance.source.indicator;
  } else {
    std::size_t first = instance.tokens.size(), last = 0;
    for (std::size_t i = 0; i < instance.indicator_flags.size(); ++i) {
      if (instance.indicator_flags[i]) {
        first = std::min(first, i);
        last = i;
      }
    }
    if (first == instance.tokens.size()) throw ValidationError("instance has no indicator");
    indicator = make_span(instance.text, instance.tokens[first].start, instance.tokens[last].end);
  }
  const auto tags = decode(model, instance);
  return relation_from_decoded(instance.text, bio_decode(instance.text, instance.tokens, tags),
                               indicator);
}

std::vector<SpatialRelation> predict_relations(const TaggerModel& model, const std::string& text,
                                               const std::vector<Span>& indicators,
                                               const Tokenizer& tokenizer) {
  if (model.config().task != Task::Roles) throw ValidationError("predict_relations needs a roles model");
  if (tokenizer(text).empty()) return {};
  if (indicators.empty()) throw ValidationError("roles prediction requires at least one indicator");
  std::vector<SpatialRelation> out;
  for (const Span& ind : indicators) {
    out.push_back(predict_instance(model, roles_query("", "", text, ind, tokenizer)));
  }
  return out;
}

std::vector<Span> predict_indicators(const TaggerModel& model, const std::string& text,
                                     const Tokenizer& tokenizer) {
  if (model.config().task != Task::Indicator) {
    throw ValidationError("predict_indicators needs an indicator model");
  }
  Instance inst;
  inst.task = Task::Indicator;
  inst.text = text;
  inst.tokens = tokenizer(text);
  if (inst.tokens.empty()) return {};
  inst.labels.assign(inst.tokens.size(), Tag::O);
  inst.indicator_flags.assign(inst.tokens.size(), 0);
  return bio_decode(text, inst.tokens, decode(model, inst)).indicators;
}

double evaluate_f1(const TaggerModel& model, const std::vector<Instance>& instances) {
  if (model.config().task == Task::Roles) {
    std::vector<KeyedRelation> gold, pred;
    for (const auto& inst : instances) {
      const Span ind = inst.source.indicator.value_or(Span{});
      const auto g = bio_decode(inst.text, inst.tokens, inst.labels);
      gold.push_back({inst.source.report_id, inst.source.sentence_id,
                      relation_from_decoded(inst.text, g, ind)});
      pred.push_back({inst.source.report_id, inst.source.sentence_id, predict_instance(model, inst)});
    }
    const PRF overall = exact_match(gold, pred).overall;
    return overall.undefined() ? 1.0 : overall.f1();
  }
  std::vector<KeyedSpan> gold, pred;
  for (const auto& inst : instances) {
    for (auto& s : bio_decode(inst.text, inst.tokens, inst.labels).indicators) {
      gold.push_back({inst.source.report_id, inst.source.sentence_id, std::move(s)});
    }
    for (auto& s : bio_decode(inst.text, inst.tokens, decode(model, inst)).indicators) {
      pred.push_back({inst.source.report_id, inst.source.sentence_id, std::move(s)});
    }
  }
  const PRF prf = indicator_match(gold, pred);
  return prf.undefined() ? 1.0 : prf.f1();
}

nlohmann::json TrainingLog::to_json() const {
  nlohmann::json ep = nlohmann::json::array();
  for (const auto& e : epochs) {
    ep.push_back({{"epoch", e.epoch},
                  {"mean_loss", e.mean_loss},
                  {"val_f1", e.val_f1},
                  {"learning_rate", e.learning_rate},
                  {"max_grad_norm", e.max_grad_norm}});
  }
  return {{"epochs", ep},
          {"best_epoch", best_epoch},
          {"best_val_f1", best_val_f1},
          {"stopped_early", stopped_early}};
}

TrainResult train(const std::vector<Instance>& train_set, const std::vector<Instance>& val_set,
                  const TaggerConfig& config, std::optional<std::filesystem::path> pretrained,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (config.max_epochs == 0) throw ValidationError("no training performed (max_epochs = 0)");
  if (train_set.empty()) throw ValidationError("empty training set");
  for (const auto& inst : train_set) {
    if (inst.task != config.task) throw ValidationError("training instance task differs from config task");
  }

  Vocabularies vocabs = build_vocab(train_set, config.min_freq);
  std::optional<EmbeddingTable> words;
  if (pretrained) {
    Rng prng(derive_seed(config.seed, "pretrained"));
    words = load_pretrained(*pretrained, vocabs.words, config.word_dim, prng);
  }
  TrainResult result{TaggerModel::create(config, std::move(vocabs), std::move(words)), {}};
  TaggerModel& model = result.model;

  Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
  Rng dropout_rng(derive_seed(config.seed, "dropout"));
  nn::AdamState adam;
  adam.config.lr = config.lr;
  adam.config.decay = config.lr_decay;
  const auto params = model.params();

  std::vector<Matrix> best;
  double best_f1 = -1.0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    shuffle(order.begin(), order.end(), shuffle_rng);
    double total_loss = 0.0;
    double max_norm = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t e = std::min(order.size(), b + batch);
      for (Param* p : params) p->zero_grad();
      CharEncoder chars(model);
      for (std::size_t k = b; k < e; ++k) {
        const double loss = loss_and_backward(model, train_set[order[k]], chars, true, dropout_rng);
        if (!std::isfinite(loss)) {
          throw NumericError("training diverged: non-finite loss at epoch " +
                             std::to_string(epoch + 1));
        }
        total_loss += loss;
      }
      chars.backward(model);
      const double scale = 1.0 / static_cast<double>(e - b);
      for (Param* p : params) p->grad *= scale;
      max_norm = std::max(max_norm, nn::clip_global_norm(params, config.clip_norm));
      nn::adam_step(params, adam, epoch);
      model.apply_constraints();
    }

    EpochLog log;
    log.epoch = epoch + 1;
    log.mean_loss = total_loss / static_cast<double>(train_set.size());
    log.learning_rate = adam.learning_rate(epoch);
    log.max_grad_norm = max_norm;
    log.val_f1 = val_set.empty() ? 0.0 : evaluate_f1(model, val_set);
    result.log.epochs.push_back(log);

    if (val_set.empty() || log.val_f1 > best_f1) {
      best_f1 = log.val_f1;
      result.log.best_epoch = log.epoch;
      result.log.best_val_f1 = log.val_f1;
      best.clear();
      for (const Param* p : params) best.push_back(p->value);
    }
    const bool keep_going = !on_epoch || on_epoch(log, model);
    if (!keep_going ||
        (config.stop_at_perfect_val && !val_set.empty() && best_f1 >= 1.0)) {
      result.log.stopped_early = epoch + 1 < config.max_epochs;
      break;
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    params[k]->value = std::move(best[k]);
    params[k]->zero_grad();
  }
  return result;
}

std::vector<nn::GradCheckResult> check_model_gradients(TaggerModel& model, const Instance& instance,
                                                       Rng& rng, double eps,
                                                       std::size_t samples_per_group) {
  const auto params = model.params();
  for (Param* p : params) p->zero_grad();
  CharEncoder chars(model);
  Rng unused(0);
  loss_and_backward(model, instance, chars, false, unused);
  chars.backward(model);
  return nn::grad_check([&] { return instance_loss(model, instance); }, params, rng, eps,
                        samples_per_group);
}

}  // namespace radsprl
