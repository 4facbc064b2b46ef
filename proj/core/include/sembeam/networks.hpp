#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "sembeam/nn.hpp"
#include "sembeam/tensor.hpp"
#include "sembeam/util.hpp"

namespace sembeam::nn {

enum class LossKind : std::uint8_t { kCrossEntropy = 0, kMse = 1 };
enum class ModelKind : std::uint8_t { kFcnn = 0, kLeNet = 1, kBBoxLstm = 2, kMaskLstm = 3 };

/// Gathers rows of a [N, ...] tensor into a [idx.size(), ...] batch.
Tensor gather_rows(const Tensor& all, std::span<const int> idx);

// ---------------------------------------------------------------------------
// Architectures. Parameters are Tensor blocks; block order is fixed and is
// the serialization order. Initialization draws uniform +-1/sqrt(fan_in) per
// block from the construction seed, in block order.
// ---------------------------------------------------------------------------

/// Two hidden layers of 512 with ReLU, linear output. Used for the power and
/// position regressors (MSE) and the single-box classifier (cross-entropy).
class Fcnn {
 public:
  struct Spec {
    int in = 2;
    int hidden1 = 512;
    int hidden2 = 512;
    int out = 2;
    LossKind loss = LossKind::kMse;
  };

  Fcnn(const Spec& spec, std::uint64_t init_seed);
  const Spec& spec() const { return spec_; }

  Tensor forward(const Tensor& x) const;
  double loss(const Tensor& x, const Tensor& targets) const;
  double loss(const Tensor& x, std::span<const int> labels) const;
  double loss_and_grad(const Tensor& x, const Tensor& targets);
  double loss_and_grad(const Tensor& x, std::span<const int> labels);

  std::vector<Tensor*> param_blocks();
  std::vector<Tensor*> grad_blocks();
  void zero_grads();

 private:
  Tensor grad_from_output(const Tensor& out, const Tensor* targets,
                          std::span<const int> labels) const;
  double backward(const Tensor& x, const Tensor* targets, std::span<const int> labels);

  Spec spec_;
  Tensor W1_, b1_, W2_, b2_, W3_, b3_;
  Tensor gW1_, gb1_, gW2_, gb2_, gW3_, gb3_;
};

/// Two 5x5 convolutions with 2x2 max pooling, then two dense layers; ReLU
/// after every convolution and dense layer. With a classification head this
/// is the single-mask classifier; without it the trunk embeds a mask into an
/// embed_dim vector.
class LeNetTrunk {
 public:
  struct Spec {
    int in_h = 64;
    int in_w = 64;
    int conv1 = 6;
    int conv2 = 16;
    int kernel = 5;
    int fc1 = 120;
    int embed = 84;
  };

  struct Cache {
    Tensor x, c1, p1, c2, flat, z1, a1, z2;
    std::vector<std::int64_t> am1, am2;
  };

  LeNetTrunk(const Spec& spec, Rng& rng);
  const Spec& spec() const { return spec_; }
  int flat_dim() const;
  static int pooled_dim(int d, int kernel);

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
  /// Returns nothing (input gradient unused); parameter grads accumulate.
  void backward(const Cache& cache, const Tensor& d_embed);

  void collect_params(std::vector<Tensor*>& out);
  void collect_grads(std::vector<Tensor*>& out);

 private:
  Spec spec_;
  Tensor cW1_, cb1_, cW2_, cb2_, W1_, b1_, W2_, b2_;
  Tensor gcW1_, gcb1_, gcW2_, gcb2_, gW1_, gb1_, gW2_, gb2_;
};

/// Mask classifier: LeNet trunk (embed 84) plus a dense head to out logits.
class LeNet {
 public:
  struct Spec {
    int in_h = 64;
    int in_w = 64;
    int out = 64;
  };

  LeNet(const Spec& spec, std::uint64_t init_seed);
  const Spec& spec() const { return spec_; }

  Tensor forward(const Tensor& x) const;  // x [B,1,H,W] -> logits [B,out]
  double loss(const Tensor& x, std::span<const int> labels) const;
  double loss_and_grad(const Tensor& x, std::span<const int> labels);

  std::vector<Tensor*> param_blocks();
  std::vector<Tensor*> grad_blocks();
  void zero_grads();

 private:
  LeNet(const Spec& spec, Rng rng);

  Spec spec_;
  LeNetTrunk trunk_;
  Tensor Wh_, bh_, gWh_, gbh_;
};

/// Sequence classifier over r bbox vectors: LSTM with zero-initialized
/// states, classification head on the final hidden state.
class BBoxLstm {
 public:
  struct Spec {
    int in = 4;
    int nu = 64;
    int steps = 5;
    int out = 64;
  };

  BBoxLstm(const Spec& spec, std::uint64_t init_seed);
  const Spec& spec() const { return spec_; }

  Tensor forward(const Tensor& x) const;  // x [B,steps,in] -> logits [B,out]
  double loss(const Tensor& x, std::span<const int> labels) const;
  double loss_and_grad(const Tensor& x, std::span<const int> labels);

  std::vector<Tensor*> param_blocks();
  std::vector<Tensor*> grad_blocks();
  void zero_grads();

 private:
  Tensor final_hidden(const Tensor& x, std::vector<LstmCache>* caches) const;

  Spec spec_;
  Tensor Wx_, Wh_, b_, Wo_, bo_;
  Tensor gWx_, gWh_, gb_, gWo_, gbo_;
};

/// Sequence classifier over r masks: a shared LeNet trunk embeds each mask
/// into a nu-vector (the prefinal dense layer is sized to the LSTM hidden
/// state), then an LSTM and a classification head as in BBoxLstm.
class MaskLstm {
 public:
  struct Spec {
    int in_h = 64;
    int in_w = 64;
    int nu = 64;
    int steps = 5;
    int out = 64;
  };

  MaskLstm(const Spec& spec, std::uint64_t init_seed);
  const Spec& spec() const { return spec_; }

  Tensor forward(const Tensor& x) const;  // x [B,steps,H,W] -> logits [B,out]
  double loss(const Tensor& x, std::span<const int> labels) const;
  double loss_and_grad(const Tensor& x, std::span<const int> labels);

  std::vector<Tensor*> param_blocks();
  std::vector<Tensor*> grad_blocks();
  void zero_grads();

 private:
  MaskLstm(const Spec& spec, Rng rng);
  Tensor final_hidden(const Tensor& x, LeNetTrunk::Cache* trunk_cache,
                      std::vector<LstmCache>* caches) const;

  Spec spec_;
  LeNetTrunk trunk_;
  Tensor Wx_, Wh_, b_, Wo_, bo_;
  Tensor gWx_, gWh_, gb_, gWo_, gbo_;
};

// ---------------------------------------------------------------------------
// Flat parameter access, optimizer, checkpointing.
// ---------------------------------------------------------------------------

std::size_t total_size(const std::vector<Tensor*>& blocks);
std::vector<double> flatten(const std::vector<Tensor*>& blocks);
void unflatten(std::span<const double> flat, const std::vector<Tensor*>& blocks);

/// Adam over a network's parameter blocks.
class Optimizer {
 public:
  explicit Optimizer(const std::vector<Tensor*>& params);
  void step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads, double lr);

  std::vector<double> flatten_state() const;  // m blocks then v blocks
  void load_state(std::span<const double> flat, std::int64_t step);
  std::int64_t step_count() const { return states_.empty() ? 0 : states_.front().step; }

 private:
  std::vector<AdamState> states_;
};

/// Versioned binary model container: kind + architecture dims + named scalar
/// metadata + flat parameters + optional optimizer state. Round-trips
/// byte-exactly.
struct Checkpoint {
  ModelKind kind = ModelKind::kFcnn;
  std::vector<std::int64_t> dims;
  std::vector<std::pair<std::string, double>> meta;
  std::vector<double> params;
  bool has_opt = false;
  std::vector<double> opt_m, opt_v;
  std::int64_t opt_step = 0;

  std::optional<double> find_meta(const std::string& key) const;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c);
Checkpoint deserialize_checkpoint(const std::uint8_t* data, std::size_t size);
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Training loop.
// ---------------------------------------------------------------------------

struct TrainSpec {
  int batch_size = 8;
  double lr = 1e-2;
  std::vector<int> decay_epochs;
  double decay_factor = 0.1;
  int epochs = 50;
  std::uint64_t shuffle_seed = 1;
};

struct TrainLog {
  std::vector<double> train_loss;
  std::vector<double> val_loss;  // empty when no validation set given
};

template <class Model, class DS>
double evaluate_loss(const Model& model, const DS& ds, int batch_size) {
  const int n = static_cast<int>(ds.size());
  double total = 0.0;
  std::vector<int> idx;
  for (int start = 0; start < n; start += batch_size) {
    const int bs = std::min(batch_size, n - start);
    idx.resize(static_cast<std::size_t>(bs));
    for (int i = 0; i < bs; ++i) idx[static_cast<std::size_t>(i)] = start + i;
    total += model.batch_loss(ds, idx) * bs;
  }
  return n > 0 ? total / n : 0.0;
}

/// Shared epoch loop: seeded shuffle, minibatches (last batch may be short),
/// Adam with the decayed learning rate. Throws NumericError on a non-finite
/// loss or when an epoch loss exceeds 10x the best of the previous 10 epochs.
/// Model must provide batch_grad(ds, idx) (zeroing handled here) and
/// batch_loss(ds, idx); DS must provide size().
template <class Model, class DS>
TrainLog train_model(Model& model, Optimizer& opt, const DS& train_set,
                     const std::type_identity_t<DS>* val_set, const TrainSpec& spec) {
  const int n = static_cast<int>(train_set.size());
  if (n == 0) throw ConfigError("empty training set");
  if (spec.batch_size <= 0 || spec.epochs <= 0) throw ConfigError("bad training spec");

  Rng rng(spec.shuffle_seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  TrainLog log;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    const double lr = lr_schedule(spec.lr, spec.decay_epochs, spec.decay_factor, epoch);
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += spec.batch_size) {
      const int bs = std::min(spec.batch_size, n - start);
      std::span<const int> idx(order.data() + start, static_cast<std::size_t>(bs));
      model.zero_grads();
      const double loss = model.batch_grad(train_set, idx);
      if (!std::isfinite(loss)) throw NumericError("training loss is not finite");
      opt.step(model.param_blocks(), model.grad_blocks(), lr);
      epoch_loss += loss * bs;
    }
    epoch_loss /= n;
    log.train_loss.push_back(epoch_loss);

    const std::size_t e = log.train_loss.size();
    if (e > 1) {
      double best = epoch_loss;
      const std::size_t from = e >= 11 ? e - 11 : 0;
      for (std::size_t i = from; i + 1 < e; ++i) best = std::min(best, log.train_loss[i]);
      if (epoch_loss > 10.0 * best + 1e-9) {
        throw NumericError("training diverged: epoch loss grew more than 10x");
      }
    }

    if (val_set != nullptr) {
      log.val_loss.push_back(evaluate_loss(model, *val_set, spec.batch_size));
    }
  }
  return log;
}

/// Central differences over every parameter of a network against its
/// analytic gradient on one batch.
template <class Network, class X, class Y>
GradCheckResult check_network_gradients(Network& net, const X& x, const Y& y, double eps_fd,
                                        double tol) {
  auto blocks = net.param_blocks();
  GradCheckResult res;
  net.zero_grads();
  net.loss_and_grad(x, y);
  const std::vector<double> analytic = flatten(net.grad_blocks());
  std::size_t offset = 0;
  for (Tensor* block : blocks) {
    for (std::size_t i = 0; i < block->numel(); ++i, ++offset) {
      const double saved = block->v[i];
      block->v[i] = saved + eps_fd;
      const double lp = net.loss(x, y);
      block->v[i] = saved - eps_fd;
      const double lm = net.loss(x, y);
      block->v[i] = saved;
      const double num = (lp - lm) / (2.0 * eps_fd);
      const double den = std::max({1.0, std::abs(num), std::abs(analytic[offset])});
      res.max_rel_err = std::max(res.max_rel_err, std::abs(num - analytic[offset]) / den);
    }
  }
  res.checked = offset;
  res.pass = res.max_rel_err < tol;
  return res;
}

}  // namespace sembeam::nn
