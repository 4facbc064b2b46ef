#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sembeam/rng.hpp"
#include "sembeam/tensor.hpp"

namespace sembeam::nn {

// ---------------------------------------------------------------------------
// Batched primitives. The leading tensor dimension is always the batch.
// ---------------------------------------------------------------------------

/// y = x W + b with x [B,in], W [in,out], b [out].
Tensor dense_forward(const Tensor& x, const Tensor& W, const Tensor& b);

/// Gradients of a dense layer; parameter gradients accumulate into grad_W/grad_b.
void dense_backward(const Tensor& x, const Tensor& W, const Tensor& grad_y,
                    Tensor* grad_x, Tensor* grad_W, Tensor* grad_b);

/// Valid convolution, stride 1, channels first: x [B,C,H,W], W [OC,C,k,k], b [OC].
Tensor conv2d_forward(const Tensor& x, const Tensor& W, const Tensor& b);
void conv2d_backward(const Tensor& x, const Tensor& W, const Tensor& grad_y,
                     Tensor* grad_x, Tensor* grad_W, Tensor* grad_b);

/// 2x2 max pooling with stride 2; argmax holds the flat input index per output
/// cell for the backward pass. Input spatial dims must be even.
Tensor maxpool2_forward(const Tensor& x, std::vector<std::int64_t>* argmax);
Tensor maxpool2_backward(const Tensor& grad_y, const std::vector<std::int64_t>& argmax,
                         const std::vector<int>& x_shape);

Tensor relu(const Tensor& x);
/// grad_x = grad_y where x > 0, else 0.
Tensor relu_backward(const Tensor& x, const Tensor& grad_y);

/// Row-wise softmax with max subtraction.
Tensor softmax(const Tensor& logits);

/// Mean over the batch of -log softmax(logits)[label].
double cross_entropy(const Tensor& logits, std::span<const int> labels);
/// d loss / d logits = (softmax - onehot) / B.
Tensor cross_entropy_grad(const Tensor& logits, std::span<const int> labels);

/// Mean over the batch of the squared Euclidean distance between rows.
double mse(const Tensor& pred, const Tensor& target);
Tensor mse_grad(const Tensor& pred, const Tensor& target);

// ---------------------------------------------------------------------------
// LSTM cell. Gate packing order in the 4*nu parameter columns: i, f, g, o.
// ---------------------------------------------------------------------------

struct LstmCache {
  Tensor x, h_prev, c_prev;
  Tensor i, f, g, o, c, tanh_c;
};

/// One step: gates = x Wx + h_prev Wh + b; returns (h, c). Shapes:
/// x [B,in], h/c [B,nu], Wx [in,4nu], Wh [nu,4nu], b [4nu].
std::pair<Tensor, Tensor> lstm_cell_forward(const Tensor& x, const Tensor& h_prev,
                                            const Tensor& c_prev, const Tensor& Wx,
                                            const Tensor& Wh, const Tensor& b,
                                            LstmCache* cache);

/// Backward through one step. dh/dc are the gradients flowing into (h, c);
/// parameter gradients accumulate, dx/dh_prev/dc_prev are written out.
void lstm_cell_backward(const LstmCache& cache, const Tensor& Wx, const Tensor& Wh,
                        const Tensor& dh, const Tensor& dc, Tensor* dWx, Tensor* dWh,
                        Tensor* db, Tensor* dx, Tensor* dh_prev, Tensor* dc_prev);

// ---------------------------------------------------------------------------
// Optimization.
// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<double> m, v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam update in place. A zero gradient leaves parameters
/// with zero accumulated moments unchanged.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr);

/// base * factor^(number of decay epochs passed); decay applies from its
/// epoch onward, epochs counted from 0.
double lr_schedule(double base, std::span<const int> decay_epochs, double factor, int epoch);

/// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], applied to weights and
/// biases alike.
void init_uniform(std::span<double> w, int fan_in, Rng& rng);

// ---------------------------------------------------------------------------
// Gradient verification.
// ---------------------------------------------------------------------------

struct GradCheckResult {
  bool pass = false;
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

/// Central differences on every parameter against the analytic gradient.
/// loss() evaluates the scalar objective at the current parameters; grad()
/// returns the analytic gradient at the unperturbed point. Relative error
/// uses max(1, |num|, |ana|) as the denominator.
GradCheckResult finite_difference_check(std::span<double> params,
                                        const std::function<double()>& loss,
                                        const std::function<std::vector<double>()>& grad,
                                        double eps_fd, double tol);

}  // namespace sembeam::nn
