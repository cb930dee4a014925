#pragma once

// Bi-LSTM-CRF tagger: character Bi-LSTM word representations concatenated
// with word and indicator embeddings, a sentence Bi-LSTM, a linear emission
// layer and a linear-chain CRF.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "radsprl/crf.hpp"
#include "radsprl/nn.hpp"
#include "radsprl/preprocess.hpp"
#include "radsprl/vocab.hpp"

namespace radsprl {

struct TaggerConfig {
  int word_dim = 100;
  int char_dim = 100;
  int char_hidden = 50;   // per direction
  int ind_dim = 5;
  int lstm_hidden = 250;  // per direction
  double dropout = 0.5;
  double lr = 0.01;
  double lr_decay = 0.99;
  int max_epochs = 20;
  int batch_size = 16;
  std::uint64_t seed = 42;
  Task task = Task::Roles;
  bool bio_constraints = false;
  int min_freq = 1;
  double clip_norm = 5.0;
  // Stop once validation F1 reaches 1.0; later epochs cannot be selected.
  bool stop_at_perfect_val = true;

  void validate() const;  // throws ValidationError
  nlohmann::json to_json() const;
  // Applies keys from j over *this; unknown keys are rejected.
  void merge_json(const nlohmann::json& j);
};

class TaggerModel {
 public:
  TaggerModel() = default;
  // Random initialisation from config.seed. A supplied word table replaces
  // the random one (it must match the vocabulary and word_dim).
  static TaggerModel create(const TaggerConfig& config, Vocabularies vocabs,
                            std::optional<EmbeddingTable> word_table = std::nullopt);

  const TaggerConfig& config() const { return config_; }
  const Vocabularies& vocabs() const { return vocabs_; }
  std::size_t num_labels() const { return radsprl::num_labels(config_.task); }
  bool uses_indicator_embedding() const { return config_.task == Task::Roles; }
  Eigen::Index input_dim() const;

  // All trainable parameters in declaration (checkpoint) order.
  std::vector<nn::Param*> params();
  std::vector<const nn::Param*> params() const;

  EmbeddingTable word_emb;
  EmbeddingTable char_emb;
  EmbeddingTable ind_emb;  // 2 x ind_dim; empty for the indicator task
  nn::BiLstmParams char_lstm;
  nn::BiLstmParams sent_lstm;
  nn::Linear proj;
  nn::Param transitions;

  // Cells of `transitions` pinned to crf::kForbidden (empty when unconstrained).
  const nn::Matrix& constraint_mask() const { return constraint_mask_; }
  void apply_constraints();

 private:
  friend TaggerModel load_model(const std::filesystem::path& path);
  void rebuild_mask();

  TaggerConfig config_;
  Vocabularies vocabs_;
  nn::Matrix constraint_mask_;
};

// BIO constraint mask over the task's labels plus START/STOP.
nn::Matrix bio_constraint_mask(Task task);

// Character representations shared by every token with the same spelling
// within one forward/backward group (a mini-batch or a single sentence).
class CharEncoder {
 public:
  explicit CharEncoder(const TaggerModel& model) : model_(&model) {}
  int encode(const std::vector<int>& chars);  // returns a column in reps()
  const nn::Matrix& reps() const { return reps_; }
  void add_grad(int column, const nn::Vector& grad);
  // Back-propagates accumulated gradients into the char LSTM and char table.
  void backward(TaggerModel& model);

 private:
  const TaggerModel* model_;
  std::map<std::vector<int>, int> index_;
  std::vector<std::vector<int>> forms_;
  std::vector<nn::BiLstmTrace> traces_;
  nn::Matrix reps_;
  nn::Matrix dreps_;
};

// [last forward h ; last backward h] of the char Bi-LSTM over one token.
nn::Vector char_representation(const std::vector<int>& chars, const EmbeddingTable& table,
                               const nn::BiLstmParams& lstm);

struct ForwardTrace {
  std::vector<TokenEncoding> enc;
  std::vector<int> char_column;
  nn::Matrix x;       // input_dim x n, after dropout
  nn::Matrix x_mask;  // empty when dropout was not applied
  nn::BiLstmTrace sent;
  nn::Matrix h;       // 2*lstm_hidden x n, after dropout
  nn::Matrix h_mask;
  nn::Matrix emissions;  // n x L
};

// Emission scores for one encoded sentence. Dropout is applied only when
// `training` is true.
nn::Matrix forward(const TaggerModel& model, const std::vector<TokenEncoding>& enc,
                   CharEncoder& chars, bool training, Rng& rng, ForwardTrace* trace = nullptr);
nn::Matrix emissions(const TaggerModel& model, const Instance& instance);

std::vector<int> gold_label_indices(const Instance& instance);

// Mean-free CRF NLL of one instance; accumulates gradients into the model
// (char gradients are parked in `chars` until CharEncoder::backward).
double loss_and_backward(TaggerModel& model, const Instance& instance, CharEncoder& chars,
                         bool training, Rng& rng);

double instance_loss(const TaggerModel& model, const Instance& instance);

std::vector<Tag> decode(const TaggerModel& model, const Instance& instance);

// Roles: one relation per supplied indicator. Indicator: decoded indicator spans.
std::vector<SpatialRelation> predict_relations(const TaggerModel& model, const std::string& text,
                                               const std::vector<Span>& indicators,
                                               const Tokenizer& tokenizer = tokenize);
std::vector<Span> predict_indicators(const TaggerModel& model, const std::string& text,
                                     const Tokenizer& tokenizer = tokenize);
// Predicted relation for a roles-task instance; flags define the indicator.
SpatialRelation predict_instance(const TaggerModel& model, const Instance& instance);

struct EpochLog {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double val_f1 = 0.0;
  double learning_rate = 0.0;
  double max_grad_norm = 0.0;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  double best_val_f1 = 0.0;
  bool stopped_early = false;

  nlohmann::json to_json() const;
};

struct TrainResult {
  TaggerModel model;
  TrainingLog log;
};

// Called after every epoch with the current (not the best) parameters;
// returning false stops training.
using EpochCallback = std::function<bool(const EpochLog&, const TaggerModel&)>;

TrainResult train(const std::vector<Instance>& train_set, const std::vector<Instance>& val_set,
                  const TaggerConfig& config,
                  std::optional<std::filesystem::path> pretrained = std::nullopt,
                  const EpochCallback& on_epoch = {});

// Overall exact-match F1 of the model on instances (roles: micro over the four
// roles given gold indicators; indicator task: indicator spans).
double evaluate_f1(const TaggerModel& model, const std::vector<Instance>& instances);

// Finite-difference check of the full model loss with dropout disabled.
std::vector<nn::GradCheckResult> check_model_gradients(TaggerModel& model, const Instance& instance,
                                                       Rng& rng, double eps = 1e-5,
                                                       std::size_t samples_per_group = 200);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_model(const TaggerModel& model, const std::filesystem::path& path);
TaggerModel load_model(const std::filesystem::path& path);

}  // namespace radsprl
