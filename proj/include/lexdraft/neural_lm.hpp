#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lexdraft/langmodel.hpp"

namespace lexdraft {

struct NeuralDims {
  size_t context_len = 8;
  size_t embed_dim = 32;
  size_t hidden_dim = 64;
};

// All trainable parameters, row-major.
//   embed  |V| x d
//   w1     h x (m*d)
//   b1     h
//   w2     |V| x h
//   b2     |V|
struct NeuralParams {
  std::vector<double> embed, w1, b1, w2, b2;

  static constexpr std::array<const char*, 5> kGroupNames = {"embed", "w1", "b1", "w2", "b2"};
  std::array<std::span<double>, 5> groups();
  std::array<std::span<const double>, 5> groups() const;
  size_t size() const;
  bool operator==(const NeuralParams&) const = default;
};

// Fixed-window feed-forward character model:
//   x = [E[c_1]; ...; E[c_m]], a = tanh(W1 x + b1), p = softmax(W2 a + b2).
class NeuralLm final : public LanguageModel {
 public:
  NeuralLm(Vocabulary vocab, NeuralDims dims, NeuralParams params);

  std::string_view kind() const override { return "neural"; }
  const Vocabulary& vocabulary() const override { return vocab_; }
  NextTokenDistribution next(std::span<const TokenId> context) const override;

  const NeuralDims& dims() const { return dims_; }
  const NeuralParams& params() const { return params_; }
  NeuralParams& mutable_params() { return params_; }

 private:
  Vocabulary vocab_;
  NeuralDims dims_;
  NeuralParams params_;
};

// Parameters uniform in (-0.1, 0.1) from splitmix64(seed), filled in the
// order embed, w1, b1, w2, b2.
NeuralLm nn_init(const Vocabulary& vocab, size_t context_len, size_t embed_dim,
                 size_t hidden_dim, std::uint64_t seed);

// All parameters zero: the forward pass is uniform.
NeuralLm nn_zero(const Vocabulary& vocab, NeuralDims dims);

NextTokenDistribution nn_forward(const NeuralLm& model, std::span<const TokenId> context);

// Every (window, next token) pair of the texts, EOS targets included.
struct TrainingExamples {
  size_t context_len = 0;
  std::vector<TokenId> windows;  // size() * context_len ids
  std::vector<TokenId> targets;

  size_t size() const { return targets.size(); }
  std::span<const TokenId> window(size_t i) const {
    return {windows.data() + i * context_len, context_len};
  }
};

TrainingExamples make_examples(const NeuralLm& model, const std::vector<std::string>& texts);

// Mean NLL over `indices` of `examples` and, when `grad` is given, its exact
// gradient (shaped like the model parameters).
double nn_loss_and_gradient(const NeuralLm& model, const TrainingExamples& examples,
                            std::span<const size_t> indices, NeuralParams* grad);

struct TrainConfig {
  size_t epochs = 10;
  size_t batch_size = 32;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

struct EpochResult {
  NeuralLm model;
  double training_loss;  // mean over the epoch's examples, pre-update per batch
};

// One pass of mini-batch gradient descent (p <- p - lr * grad) in an order
// shuffled by splitmix64(config.seed). Throws kNonFiniteLoss on divergence.
EpochResult nn_train_epoch(NeuralLm model, const std::vector<std::string>& texts,
                           const TrainConfig& config);

struct EpochRow {
  size_t epoch = 0;
  double training_loss = 0.0;
  double validation_loss = 0.0;
  double training_perplexity = 0.0;
  double validation_perplexity = 0.0;

  bool operator==(const EpochRow&) const = default;
};

struct TrainReport {
  std::vector<EpochRow> rows;
  size_t best_epoch = 0;  // argmin of validation loss, first on ties
  double final_training_perplexity = 0.0;
  double final_validation_perplexity = 0.0;

  bool operator==(const TrainReport&) const = default;
};

struct TrainOutcome {
  TrainReport report;
  NeuralLm final_model;
  NeuralLm best_model;  // snapshot at report.best_epoch
};

TrainOutcome train_loop(NeuralLm model, const std::vector<std::string>& train,
                        const std::vector<std::string>& validation, const TrainConfig& config);

std::string format_train_report_tsv(const TrainReport& report);

}  // namespace lexdraft
