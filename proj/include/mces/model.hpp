#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mces/features.hpp"
#include "mces/interact.hpp"
#include "mces/lstm.hpp"
#include "mces/optim.hpp"

namespace mces {

struct ModelConfig {
  Index embed_dim = 15;
  Index hidden = 32;
  AdamConfig adam;
  GrdaConfig grda_alpha;
  GrdaConfig grda_beta;
  double divergence_limit = 1e6;
};

// Equal-length windows evaluated together; rows are laid out time-major
// (row = t * B + b).
using Batch = std::vector<const Window*>;

enum class LossKind { kSimulated, kRefine };

struct LossSpec {
  LossKind kind = LossKind::kSimulated;
  Task task = Task::kEpi;
  double rho = 0.1;  // weight of simulated labels on unobserved days (refine only)
};

// Relevance-gated LSTM regressor: embeddings -> [alpha f, beta g(f)] -> LSTM
// -> linear head. Dense weights train with Adam, relevance with gRDA.
class Predictor {
 public:
  Predictor() = default;
  Predictor(const FeatureSchema& schema, Genome genome, const ModelConfig& config, Rng& rng);

  const Genome& genome() const { return genome_; }
  Genome& genome() { return genome_; }
  const ModelConfig& config() const { return config_; }
  std::uint64_t schema_hash() const { return schema_hash_; }
  std::size_t fields() const { return genome_.fields; }
  Index input_size() const;

  EmbeddingTable& embeddings() { return embeddings_; }
  const EmbeddingTable& embeddings() const { return embeddings_; }
  OperationParams& operations() { return operations_; }
  const OperationParams& operations() const { return operations_; }
  LstmParams& lstm() { return lstm_; }
  const LstmParams& lstm() const { return lstm_; }
  Tensor& head_weight() { return head_weight_; }
  const Tensor& head_weight() const { return head_weight_; }
  Tensor& head_bias() { return head_bias_; }
  const Tensor& head_bias() const { return head_bias_; }
  GrdaState& alpha_state() { return alpha_state_; }
  const GrdaState& alpha_state() const { return alpha_state_; }
  GrdaState& beta_state() { return beta_state_; }
  const GrdaState& beta_state() const { return beta_state_; }
  std::vector<AdamState>& adam_states() { return adam_; }
  const std::vector<AdamState>& adam_states() const { return adam_; }

  // Embedding tables, operation projections, LSTM and head, in a fixed order.
  std::vector<Tensor*> dense_parameters();
  std::vector<const Tensor*> dense_parameters() const;

  void set_output_bias(double value) { head_bias_.value.setConstant(value); }

  std::optional<double> fitness;
  std::uint64_t lineage = 0;

  // Refinement freezes relevance; inactive entries are skipped in forward.
  bool frozen() const { return frozen_; }
  const ActiveSet& active() const { return active_; }
  void freeze();

  // Records predictions (N x 1, N = L * B) for a batch. Every dense
  // parameter receives gradients on backward; `alpha` and `beta`, when
  // non-null, are bound as trainable relevance leaves, otherwise the genome
  // values enter as constants.
  Var forward(Tape& tape, const Batch& batch, Tensor* alpha, Tensor* beta);
  // Inference only: nothing receives gradients.
  Var forward(Tape& tape, const Batch& batch) const;

 private:
  template <typename Self>
  static Var forward_impl(Self& self, Tape& tape, const Batch& batch, Tensor* alpha, Tensor* beta);

  ModelConfig config_;
  std::uint64_t schema_hash_ = 0;
  Genome genome_;
  EmbeddingTable embeddings_;
  OperationParams operations_;
  LstmParams lstm_;
  Tensor head_weight_;  // 1 x H
  Tensor head_bias_;    // 1 x 1
  std::vector<AdamState> adam_;
  GrdaState alpha_state_;
  GrdaState beta_state_;
  bool frozen_ = false;
  ActiveSet active_;

  friend void save_checkpoint(const std::filesystem::path&, const Predictor&);
  friend Predictor load_checkpoint(const std::filesystem::path&, const FeatureSchema&);
};

// Predictions for one window, starting from zero hidden state.
std::vector<double> predict(const Predictor& model, const Window& window);

// Mean squared error over all entries.
double loss_sim(std::span<const double> predicted, std::span<const double> simulated);

// mean_t [ mask (y - yhat)^2 + rho (1 - mask) (ysim - yhat)^2 ]
double loss_refine(std::span<const double> predicted, std::span<const double> observed,
                   std::span<const std::uint8_t> mask, std::span<const double> simulated, double rho);

// One forward/backward/update. Returns the batch loss before the update.
double train_step(Predictor& model, const Batch& batch, const LossSpec& loss);

// Batch loss without updating anything.
double evaluate_loss(const Predictor& model, const Batch& batch, const LossSpec& loss);

// loss_sim over every window in `validation`; stored in model.fitness.
double fitness(Predictor& model, std::span<const Batch> validation, Task task);

// Groups windows into consecutive batches of at most `batch_size`.
std::vector<Batch> make_batches(std::span<const Window> windows, std::size_t batch_size);

// `batch_size` distinct windows drawn uniformly (all when fewer).
Batch sample_batch(std::span<const Window> windows, std::size_t batch_size, Rng& rng);

struct RefineConfig {
  double rho = 0.1;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
};

// Fine-tunes a copy of `model` on observed labels with frozen relevance.
// Returns the input unchanged (with a warning) when no window holds an
// observation for the task.
Predictor refine(const Predictor& model, std::span<const Window> windows, Task task, const RefineConfig& config,
                 Rng& rng);

// Per-day predictions for day indices [first, last) of one lake. Each day
// takes its prediction from the covering window (length `window`, stride
// window/2, allowed to start before `first`) in which it has the most
// history.
std::vector<double> predict_series(const Predictor& model, const LakeDataset& data, std::span<const int> encoded,
                                   std::size_t first, std::size_t last, std::size_t window);

// Versioned text checkpoint; load rejects a schema whose hash differs.
void save_checkpoint(const std::filesystem::path& path, const Predictor& model);
Predictor load_checkpoint(const std::filesystem::path& path, const FeatureSchema& schema);

}  // namespace mces
