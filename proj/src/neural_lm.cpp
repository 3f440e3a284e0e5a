#include "lexdraft/neural_lm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lexdraft/error.hpp"
#include "lexdraft/random.hpp"

namespace lexdraft {
namespace {

// Buffers for one forward/backward pass.
struct Workspace {
  std::vector<double> x, pre, act, logits, probs;
  std::vector<double> dlogits, dact, dpre, dx;

  explicit Workspace(const NeuralLm& m) {
    const auto& d = m.dims();
    const size_t v = m.vocabulary().size();
    x.resize(d.context_len * d.embed_dim);
    pre.resize(d.hidden_dim);
    act.resize(d.hidden_dim);
    logits.resize(v);
    probs.resize(v);
    dlogits.resize(v);
    dact.resize(d.hidden_dim);
    dpre.resize(d.hidden_dim);
    dx.resize(x.size());
  }
};

void forward(const NeuralLm& m, std::span<const TokenId> window, Workspace& ws) {
  const auto& d = m.dims();
  const auto& p = m.params();
  const size_t v = m.vocabulary().size();
  const size_t in = d.context_len * d.embed_dim;
  for (size_t j = 0; j < d.context_len; ++j) {
    std::copy_n(p.embed.begin() + static_cast<std::ptrdiff_t>(window[j] * d.embed_dim),
                d.embed_dim, ws.x.begin() + static_cast<std::ptrdiff_t>(j * d.embed_dim));
  }
  for (size_t r = 0; r < d.hidden_dim; ++r) {
    const double* row = p.w1.data() + r * in;
    double s = p.b1[r];
    for (size_t c = 0; c < in; ++c) s += row[c] * ws.x[c];
    ws.pre[r] = s;
    ws.act[r] = std::tanh(s);
  }
  double max_logit = -INFINITY;
  for (size_t r = 0; r < v; ++r) {
    const double* row = p.w2.data() + r * d.hidden_dim;
    double s = p.b2[r];
    for (size_t c = 0; c < d.hidden_dim; ++c) s += row[c] * ws.act[c];
    ws.logits[r] = s;
    max_logit = std::max(max_logit, s);
  }
  double z = 0.0;
  for (size_t r = 0; r < v; ++r) {
    ws.probs[r] = std::exp(ws.logits[r] - max_logit);
    z += ws.probs[r];
  }
  for (double& q : ws.probs) q /= z;
}

// Adds scale * d(-ln p[target])/d(params) into grad.
void backward(const NeuralLm& m, std::span<const TokenId> window, TokenId target,
              double scale, Workspace& ws, NeuralParams& grad) {
  const auto& d = m.dims();
  const auto& p = m.params();
  const size_t v = m.vocabulary().size();
  const size_t in = d.context_len * d.embed_dim;

  for (size_t r = 0; r < v; ++r) ws.dlogits[r] = scale * ws.probs[r];
  ws.dlogits[target] -= scale;

  std::fill(ws.dact.begin(), ws.dact.end(), 0.0);
  for (size_t r = 0; r < v; ++r) {
    const double g = ws.dlogits[r];
    grad.b2[r] += g;
    double* grow = grad.w2.data() + r * d.hidden_dim;
    const double* prow = p.w2.data() + r * d.hidden_dim;
    for (size_t c = 0; c < d.hidden_dim; ++c) {
      grow[c] += g * ws.act[c];
      ws.dact[c] += g * prow[c];
    }
  }
  for (size_t r = 0; r < d.hidden_dim; ++r) {
    ws.dpre[r] = ws.dact[r] * (1.0 - ws.act[r] * ws.act[r]);
  }
  std::fill(ws.dx.begin(), ws.dx.end(), 0.0);
  for (size_t r = 0; r < d.hidden_dim; ++r) {
    const double g = ws.dpre[r];
    grad.b1[r] += g;
    double* grow = grad.w1.data() + r * in;
    const double* prow = p.w1.data() + r * in;
    for (size_t c = 0; c < in; ++c) {
      grow[c] += g * ws.x[c];
      ws.dx[c] += g * prow[c];
    }
  }
  for (size_t j = 0; j < d.context_len; ++j) {
    double* erow = grad.embed.data() + window[j] * d.embed_dim;
    const double* dxj = ws.dx.data() + j * d.embed_dim;
    for (size_t c = 0; c < d.embed_dim; ++c) erow[c] += dxj[c];
  }
}

NeuralParams zero_params(size_t v, const NeuralDims& d) {
  NeuralParams p;
  p.embed.assign(v * d.embed_dim, 0.0);
  p.w1.assign(d.hidden_dim * d.context_len * d.embed_dim, 0.0);
  p.b1.assign(d.hidden_dim, 0.0);
  p.w2.assign(v * d.hidden_dim, 0.0);
  p.b2.assign(v, 0.0);
  return p;
}

}  // namespace

std::array<std::span<double>, 5> NeuralParams::groups() {
  return {std::span<double>(embed), std::span<double>(w1), std::span<double>(b1),
          std::span<double>(w2), std::span<double>(b2)};
}

std::array<std::span<const double>, 5> NeuralParams::groups() const {
  return {std::span<const double>(embed), std::span<const double>(w1),
          std::span<const double>(b1), std::span<const double>(w2),
          std::span<const double>(b2)};
}

size_t NeuralParams::size() const {
  return embed.size() + w1.size() + b1.size() + w2.size() + b2.size();
}

NeuralLm::NeuralLm(Vocabulary vocab, NeuralDims dims, NeuralParams params)
    : vocab_(std::move(vocab)), dims_(dims), params_(std::move(params)) {
  if (dims_.context_len == 0 || dims_.embed_dim == 0 || dims_.hidden_dim == 0) {
    throw Error(ErrorCode::kBadConfig, "neural model dimensions must be at least 1");
  }
  const NeuralParams expected = zero_params(vocab_.size(), dims_);
  const auto want = expected.groups();
  const auto have = params_.groups();
  for (size_t g = 0; g < want.size(); ++g) {
    if (want[g].size() != have[g].size()) {
      throw Error(ErrorCode::kBadFormat, std::string("parameter group ") +
                                             NeuralParams::kGroupNames[g] +
                                             " has the wrong size");
    }
  }
}

NextTokenDistribution NeuralLm::next(std::span<const TokenId> context) const {
  Workspace ws(*this);
  const std::vector<TokenId> window = padded_window(context, dims_.context_len);
  forward(*this, window, ws);
  return {ws.probs};
}

NeuralLm nn_init(const Vocabulary& vocab, size_t context_len, size_t embed_dim,
                 size_t hidden_dim, std::uint64_t seed) {
  const NeuralDims dims{context_len, embed_dim, hidden_dim};
  if (context_len == 0 || embed_dim == 0 || hidden_dim == 0) {
    throw Error(ErrorCode::kBadConfig, "neural model dimensions must be at least 1");
  }
  NeuralParams params = zero_params(vocab.size(), dims);
  SplitMix64 rng(seed);
  for (auto group : params.groups()) {
    for (double& w : group) w = rng.uniform(-0.1, 0.1);
  }
  return NeuralLm(vocab, dims, std::move(params));
}

NeuralLm nn_zero(const Vocabulary& vocab, NeuralDims dims) {
  return NeuralLm(vocab, dims, zero_params(vocab.size(), dims));
}

NextTokenDistribution nn_forward(const NeuralLm& model, std::span<const TokenId> context) {
  return model.next(context);
}

TrainingExamples make_examples(const NeuralLm& model, const std::vector<std::string>& texts) {
  TrainingExamples ex;
  const size_t m = model.dims().context_len;
  ex.context_len = m;
  for (const auto& text : texts) {
    std::vector<TokenId> ids(m, Vocabulary::kBos);
    const std::vector<TokenId> body = model.vocabulary().encode(text);
    ids.insert(ids.end(), body.begin(), body.end());
    ids.push_back(Vocabulary::kEos);
    for (size_t i = m; i < ids.size(); ++i) {
      ex.windows.insert(ex.windows.end(), ids.begin() + static_cast<std::ptrdiff_t>(i - m),
                        ids.begin() + static_cast<std::ptrdiff_t>(i));
      ex.targets.push_back(ids[i]);
    }
  }
  return ex;
}

double nn_loss_and_gradient(const NeuralLm& model, const TrainingExamples& examples,
                            std::span<const size_t> indices, NeuralParams* grad) {
  if (indices.empty()) return 0.0;
  Workspace ws(model);
  if (grad != nullptr) *grad = zero_params(model.vocabulary().size(), model.dims());
  const double scale = 1.0 / static_cast<double>(indices.size());
  double loss = 0.0;
  for (size_t i : indices) {
    const auto window = examples.window(i);
    const TokenId target = examples.targets[i];
    forward(model, window, ws);
    loss -= std::log(ws.probs[target]);
    if (grad != nullptr) backward(model, window, target, scale, ws, *grad);
  }
  return loss * scale;
}

EpochResult nn_train_epoch(NeuralLm model, const std::vector<std::string>& texts,
                           const TrainConfig& config) {
  if (config.batch_size == 0) throw Error(ErrorCode::kBadConfig, "batch_size must be >= 1");
  if (!(config.learning_rate >= 0.0)) {
    throw Error(ErrorCode::kBadConfig, "learning_rate must be non-negative");
  }
  const TrainingExamples examples = make_examples(model, texts);
  if (examples.size() == 0) throw Error(ErrorCode::kEmptyCorpus, "no training texts");

  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  SplitMix64 rng(config.seed);
  for (size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[rng.below(i + 1)]);
  }

  NeuralParams grad;
  double total = 0.0;
  for (size_t start = 0; start < order.size(); start += config.batch_size) {
    const size_t len = std::min(config.batch_size, order.size() - start);
    const std::span<const size_t> batch(order.data() + start, len);
    const double loss = nn_loss_and_gradient(model, examples, batch, &grad);
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::kNonFiniteLoss, "training loss diverged");
    }
    total += loss * static_cast<double>(len);
    auto params = model.mutable_params().groups();
    const auto grads = grad.groups();
    for (size_t g = 0; g < params.size(); ++g) {
      for (size_t k = 0; k < params[g].size(); ++k) {
        params[g][k] -= config.learning_rate * grads[g][k];
      }
    }
  }
  return {std::move(model), total / static_cast<double>(examples.size())};
}

TrainOutcome train_loop(NeuralLm model, const std::vector<std::string>& train,
                        const std::vector<std::string>& validation, const TrainConfig& config) {
  if (config.epochs == 0) throw Error(ErrorCode::kBadConfig, "epochs must be >= 1");
  if (!(config.learning_rate > 0.0)) {
    throw Error(ErrorCode::kBadConfig, "learning_rate must be positive");
  }
  TrainOutcome outcome{{}, model, model};
  double best_loss = INFINITY;
  for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    TrainConfig epoch_config = config;
    epoch_config.seed = SplitMix64::mix(config.seed + epoch);
    EpochResult result = nn_train_epoch(std::move(model), train, epoch_config);
    model = std::move(result.model);
    const double val_loss = evaluate_loss(model, validation);
    outcome.report.rows.push_back({epoch, result.training_loss, val_loss,
                                   perplexity(result.training_loss), perplexity(val_loss)});
    if (val_loss < best_loss) {
      best_loss = val_loss;
      outcome.report.best_epoch = epoch;
      outcome.best_model = model;
    }
  }
  outcome.report.final_training_perplexity = outcome.report.rows.back().training_perplexity;
  outcome.report.final_validation_perplexity = outcome.report.rows.back().validation_perplexity;
  outcome.final_model = std::move(model);
  return outcome;
}

std::string format_train_report_tsv(const TrainReport& report) {
  std::string out =
      "epoch\ttraining_loss\tvalidation_loss\ttraining_perplexity\tvalidation_perplexity\n";
  char buf[160];
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.6f\t%.6f\t%.6f\n", row.epoch,
                  row.training_loss, row.validation_loss, row.training_perplexity,
                  row.validation_perplexity);
    out += buf;
  }
  return out;
}

}  // namespace lexdraft
