#include "sembeam/nn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace sembeam::nn {
namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EMat>;
using CMap = Eigen::Map<const EMat>;

CMap as_mat(const Tensor& t, int rows, int cols) {
  return CMap(t.v.data(), rows, cols);
}
Map as_mat(Tensor& t, int rows, int cols) {
  return Map(t.v.data(), rows, cols);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Adds per-column sums of a [rows, cols] row-major block into out[0..cols).
/// Eigen's partial reductions pick their summation order from the buffer's
/// runtime alignment, so the same numbers at different heap addresses round
/// differently; a fixed row-by-row order keeps training bit-reproducible.
void add_colwise_sums(const double* m, int rows, int cols, double* out) {
  for (int r = 0; r < rows; ++r) {
    const double* row = m + static_cast<std::size_t>(r) * cols;
    for (int j = 0; j < cols; ++j) out[j] += row[j];
  }
}

void check_rank2(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw ConfigError(std::string(what) + " must be rank 2");
}

/// im2col for valid stride-1 convolution: output rows = B*oh*ow in batch-major
/// order, columns = C*k*k.
Tensor im2col(const Tensor& x, int k) {
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int oh = H - k + 1, ow = W - k + 1;
  Tensor cols({B * oh * ow, C * k * k});
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::size_t row = 0;
  for (int b = 0; b < B; ++b) {
    const double* xb = x.v.data() + static_cast<std::size_t>(b) * C * plane;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double* dst = cols.v.data() + row * static_cast<std::size_t>(C * k * k);
        for (int c = 0; c < C; ++c) {
          const double* src = xb + static_cast<std::size_t>(c) * plane +
                              static_cast<std::size_t>(oy) * W + ox;
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) *dst++ = src[static_cast<std::size_t>(ky) * W + kx];
          }
        }
        ++row;
      }
    }
  }
  return cols;
}

void col2im_accumulate(const Tensor& cols, int B, int C, int H, int W, int k, Tensor* x_grad) {
  const int oh = H - k + 1, ow = W - k + 1;
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::size_t row = 0;
  for (int b = 0; b < B; ++b) {
    double* xb = x_grad->v.data() + static_cast<std::size_t>(b) * C * plane;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const double* src = cols.v.data() + row * static_cast<std::size_t>(C * k * k);
        for (int c = 0; c < C; ++c) {
          double* dst = xb + static_cast<std::size_t>(c) * plane +
                        static_cast<std::size_t>(oy) * W + ox;
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) dst[static_cast<std::size_t>(ky) * W + kx] += *src++;
          }
        }
        ++row;
      }
    }
  }
}

}  // namespace

Tensor dense_forward(const Tensor& x, const Tensor& W, const Tensor& b) {
  check_rank2(x, "dense input");
  check_rank2(W, "dense weight");
  const int B = x.dim(0), in = x.dim(1), out = W.dim(1);
  if (W.dim(0) != in) throw ConfigError("dense weight shape mismatch");
  if (static_cast<int>(b.numel()) != out) throw ConfigError("dense bias shape mismatch");
  Tensor y({B, out});
  as_mat(y, B, out).noalias() = as_mat(x, B, in) * as_mat(W, in, out);
  auto ym = as_mat(y, B, out);
  const Eigen::Map<const Eigen::RowVectorXd> bv(b.v.data(), out);
  ym.rowwise() += bv;
  return y;
}

void dense_backward(const Tensor& x, const Tensor& W, const Tensor& grad_y,
                    Tensor* grad_x, Tensor* grad_W, Tensor* grad_b) {
  const int B = x.dim(0), in = x.dim(1), out = W.dim(1);
  if (grad_x != nullptr) {
    if (grad_x->shape != x.shape) *grad_x = Tensor(x.shape);
    as_mat(*grad_x, B, in).noalias() = as_mat(grad_y, B, out) * as_mat(W, in, out).transpose();
  }
  if (grad_W != nullptr) {
    as_mat(*grad_W, in, out).noalias() +=
        as_mat(x, B, in).transpose() * as_mat(grad_y, B, out);
  }
  if (grad_b != nullptr) add_colwise_sums(grad_y.v.data(), B, out, grad_b->v.data());
}

Tensor conv2d_forward(const Tensor& x, const Tensor& W, const Tensor& b) {
  if (x.rank() != 4 || W.rank() != 4) throw ConfigError("conv input and weight must be rank 4");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), Wd = x.dim(3);
  const int OC = W.dim(0), k = W.dim(2);
  if (W.dim(1) != C || W.dim(3) != k) throw ConfigError("conv weight shape mismatch");
  if (H < k || Wd < k) throw ConfigError("conv input smaller than kernel");
  const int oh = H - k + 1, ow = Wd - k + 1;

  const Tensor cols = im2col(x, k);
  Tensor gemm({B * oh * ow, OC});
  as_mat(gemm, B * oh * ow, OC).noalias() =
      as_mat(cols, B * oh * ow, C * k * k) * as_mat(W, OC, C * k * k).transpose();

  Tensor y({B, OC, oh, ow});
  const std::size_t spatial = static_cast<std::size_t>(oh) * ow;
  for (int bi = 0; bi < B; ++bi) {
    for (int oc = 0; oc < OC; ++oc) {
      double* dst = y.v.data() + (static_cast<std::size_t>(bi) * OC + oc) * spatial;
      const double* src = gemm.v.data() + static_cast<std::size_t>(bi) * spatial * OC + oc;
      const double bias = b.v[static_cast<std::size_t>(oc)];
      for (std::size_t s = 0; s < spatial; ++s) dst[s] = src[s * OC] + bias;
    }
  }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& W, const Tensor& grad_y,
                     Tensor* grad_x, Tensor* grad_W, Tensor* grad_b) {
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), Wd = x.dim(3);
  const int OC = W.dim(0), k = W.dim(2);
  const int oh = H - k + 1, ow = Wd - k + 1;
  const std::size_t spatial = static_cast<std::size_t>(oh) * ow;

  // Gather grad_y into GEMM layout: rows (b, oy, ox), cols oc.
  Tensor gy({B * oh * ow, OC});
  for (int bi = 0; bi < B; ++bi) {
    for (int oc = 0; oc < OC; ++oc) {
      const double* src = grad_y.v.data() + (static_cast<std::size_t>(bi) * OC + oc) * spatial;
      double* dst = gy.v.data() + static_cast<std::size_t>(bi) * spatial * OC + oc;
      for (std::size_t s = 0; s < spatial; ++s) dst[s * OC] = src[s];
    }
  }

  const Tensor cols = im2col(x, k);
  if (grad_W != nullptr) {
    as_mat(*grad_W, OC, C * k * k).noalias() +=
        as_mat(gy, B * oh * ow, OC).transpose() * as_mat(cols, B * oh * ow, C * k * k);
  }
  if (grad_b != nullptr) add_colwise_sums(gy.v.data(), B * oh * ow, OC, grad_b->v.data());
  if (grad_x != nullptr) {
    if (grad_x->shape != x.shape) *grad_x = Tensor(x.shape);
    grad_x->fill(0.0);
    Tensor dcols({B * oh * ow, C * k * k});
    as_mat(dcols, B * oh * ow, C * k * k).noalias() =
        as_mat(gy, B * oh * ow, OC) * as_mat(W, OC, C * k * k);
    col2im_accumulate(dcols, B, C, H, Wd, k, grad_x);
  }
}

Tensor maxpool2_forward(const Tensor& x, std::vector<std::int64_t>* argmax) {
  if (x.rank() != 4) throw ConfigError("maxpool input must be rank 4");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 2 != 0 || W % 2 != 0) throw ConfigError("maxpool input dims must be even");
  const int oh = H / 2, ow = W / 2;
  Tensor y({B, C, oh, ow});
  if (argmax != nullptr) argmax->assign(y.numel(), 0);
  std::size_t oi = 0;
  for (int bc = 0; bc < B * C; ++bc) {
    const double* plane = x.v.data() + static_cast<std::size_t>(bc) * H * W;
    const std::size_t base = static_cast<std::size_t>(bc) * H * W;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const int iy = oy * 2, ix = ox * 2;
        std::size_t best = static_cast<std::size_t>(iy) * W + ix;
        double bv = plane[best];
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx = static_cast<std::size_t>(iy + dy) * W + (ix + dx);
            if (plane[idx] > bv) {
              bv = plane[idx];
              best = idx;
            }
          }
        }
        y.v[oi] = bv;
        if (argmax != nullptr) (*argmax)[oi] = static_cast<std::int64_t>(base + best);
        ++oi;
      }
    }
  }
  return y;
}

Tensor maxpool2_backward(const Tensor& grad_y, const std::vector<std::int64_t>& argmax,
                         const std::vector<int>& x_shape) {
  Tensor gx(x_shape);
  for (std::size_t i = 0; i < grad_y.numel(); ++i) {
    gx.v[static_cast<std::size_t>(argmax[i])] += grad_y.v[i];
  }
  return gx;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.v) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_y) {
  Tensor gx = grad_y;
  for (std::size_t i = 0; i < gx.numel(); ++i) {
    if (x.v[i] <= 0.0) gx.v[i] = 0.0;
  }
  return gx;
}

Tensor softmax(const Tensor& logits) {
  check_rank2(logits, "softmax input");
  const int B = logits.dim(0), n = logits.dim(1);
  Tensor p = logits;
  for (int b = 0; b < B; ++b) {
    double* row = p.v.data() + static_cast<std::size_t>(b) * n;
    const double mx = *std::max_element(row, row + n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      row[i] = std::exp(row[i] - mx);
      sum += row[i];
    }
    for (int i = 0; i < n; ++i) row[i] /= sum;
  }
  return p;
}

double cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const int B = logits.dim(0), n = logits.dim(1);
  if (static_cast<int>(labels.size()) != B) throw ConfigError("label count mismatch");
  const Tensor p = softmax(logits);
  double loss = 0.0;
  for (int b = 0; b < B; ++b) {
    const int y = labels[static_cast<std::size_t>(b)];
    if (y < 0 || y >= n) throw ConfigError("label out of range");
    loss -= std::log(std::max(p.v[static_cast<std::size_t>(b) * n + y], 1e-300));
  }
  return loss / B;
}

Tensor cross_entropy_grad(const Tensor& logits, std::span<const int> labels) {
  const int B = logits.dim(0), n = logits.dim(1);
  Tensor g = softmax(logits);
  for (int b = 0; b < B; ++b) {
    g.v[static_cast<std::size_t>(b) * n + labels[static_cast<std::size_t>(b)]] -= 1.0;
  }
  for (auto& v : g.v) v /= B;
  return g;
}

double mse(const Tensor& pred, const Tensor& target) {
  if (pred.shape != target.shape) throw ConfigError("mse shape mismatch");
  const int B = pred.dim(0);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = pred.v[i] - target.v[i];
    s += d * d;
  }
  return s / B;
}

Tensor mse_grad(const Tensor& pred, const Tensor& target) {
  const int B = pred.dim(0);
  Tensor g = pred;
  for (std::size_t i = 0; i < g.numel(); ++i) g.v[i] = 2.0 * (pred.v[i] - target.v[i]) / B;
  return g;
}

std::pair<Tensor, Tensor> lstm_cell_forward(const Tensor& x, const Tensor& h_prev,
                                            const Tensor& c_prev, const Tensor& Wx,
                                            const Tensor& Wh, const Tensor& b,
                                            LstmCache* cache) {
  const int B = x.dim(0), in = x.dim(1);
  const int nu = h_prev.dim(1);
  if (Wx.dim(0) != in || Wx.dim(1) != 4 * nu || Wh.dim(0) != nu || Wh.dim(1) != 4 * nu) {
    throw ConfigError("lstm parameter shape mismatch");
  }
  Tensor z({B, 4 * nu});
  as_mat(z, B, 4 * nu).noalias() = as_mat(x, B, in) * as_mat(Wx, in, 4 * nu);
  as_mat(z, B, 4 * nu).noalias() += as_mat(h_prev, B, nu) * as_mat(Wh, nu, 4 * nu);
  auto zm = as_mat(z, B, 4 * nu);
  zm.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.v.data(), 4 * nu);

  Tensor i({B, nu}), f({B, nu}), g({B, nu}), o({B, nu}), c({B, nu}), h({B, nu}), tc({B, nu});
  for (int bi = 0; bi < B; ++bi) {
    const double* zr = z.v.data() + static_cast<std::size_t>(bi) * 4 * nu;
    const std::size_t r = static_cast<std::size_t>(bi) * nu;
    for (int j = 0; j < nu; ++j) {
      const double iv = sigmoid(zr[j]);
      const double fv = sigmoid(zr[nu + j]);
      const double gv = std::tanh(zr[2 * nu + j]);
      const double ov = sigmoid(zr[3 * nu + j]);
      const double cv = fv * c_prev.v[r + j] + iv * gv;
      const double tcv = std::tanh(cv);
      i.v[r + j] = iv;
      f.v[r + j] = fv;
      g.v[r + j] = gv;
      o.v[r + j] = ov;
      c.v[r + j] = cv;
      tc.v[r + j] = tcv;
      h.v[r + j] = ov * tcv;
    }
  }
  if (cache != nullptr) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->c_prev = c_prev;
    cache->i = i;
    cache->f = f;
    cache->g = g;
    cache->o = o;
    cache->c = c;
    cache->tanh_c = tc;
  }
  return {std::move(h), std::move(c)};
}

void lstm_cell_backward(const LstmCache& cache, const Tensor& Wx, const Tensor& Wh,
                        const Tensor& dh, const Tensor& dc, Tensor* dWx, Tensor* dWh,
                        Tensor* db, Tensor* dx, Tensor* dh_prev, Tensor* dc_prev) {
  const int B = cache.x.dim(0), in = cache.x.dim(1), nu = cache.h_prev.dim(1);
  Tensor dz({B, 4 * nu});
  if (dc_prev != nullptr && dc_prev->shape != cache.c_prev.shape) *dc_prev = Tensor(cache.c_prev.shape);
  for (int bi = 0; bi < B; ++bi) {
    const std::size_t r = static_cast<std::size_t>(bi) * nu;
    double* dzr = dz.v.data() + static_cast<std::size_t>(bi) * 4 * nu;
    for (int j = 0; j < nu; ++j) {
      const double iv = cache.i.v[r + j], fv = cache.f.v[r + j], gv = cache.g.v[r + j],
                   ov = cache.o.v[r + j], tcv = cache.tanh_c.v[r + j];
      const double dhv = dh.v[r + j];
      const double dcv = dc.v[r + j] + dhv * ov * (1.0 - tcv * tcv);
      const double dov = dhv * tcv;
      const double div = dcv * gv;
      const double dgv = dcv * iv;
      const double dfv = dcv * cache.c_prev.v[r + j];
      if (dc_prev != nullptr) dc_prev->v[r + j] = dcv * fv;
      dzr[j] = div * iv * (1.0 - iv);
      dzr[nu + j] = dfv * fv * (1.0 - fv);
      dzr[2 * nu + j] = dgv * (1.0 - gv * gv);
      dzr[3 * nu + j] = dov * ov * (1.0 - ov);
    }
  }
  if (dWx != nullptr) {
    as_mat(*dWx, in, 4 * nu).noalias() +=
        as_mat(cache.x, B, in).transpose() * as_mat(dz, B, 4 * nu);
  }
  if (dWh != nullptr) {
    as_mat(*dWh, nu, 4 * nu).noalias() +=
        as_mat(cache.h_prev, B, nu).transpose() * as_mat(dz, B, 4 * nu);
  }
  if (db != nullptr) add_colwise_sums(dz.v.data(), B, 4 * nu, db->v.data());
  if (dx != nullptr) {
    if (dx->shape != cache.x.shape) *dx = Tensor(cache.x.shape);
    as_mat(*dx, B, in).noalias() = as_mat(dz, B, 4 * nu) * as_mat(Wx, in, 4 * nu).transpose();
  }
  if (dh_prev != nullptr) {
    if (dh_prev->shape != cache.h_prev.shape) *dh_prev = Tensor(cache.h_prev.shape);
    as_mat(*dh_prev, B, nu).noalias() =
        as_mat(dz, B, 4 * nu) * as_mat(Wh, nu, 4 * nu).transpose();
  }
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ConfigError("adam state size mismatch");
  }
  ++state.step;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  // Coordinates with persistently zero gradients decay m and v geometrically;
  // flush them before they underflow into denormals, which stall sqrt/divide.
  constexpr double kMomentFloor = 1e-300;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double m = b1 * state.m[i] + (1.0 - b1) * g;
    double v = b2 * state.v[i] + (1.0 - b2) * g * g;
    if (std::abs(m) < kMomentFloor) m = 0.0;
    if (v < kMomentFloor) v = 0.0;
    state.m[i] = m;
    state.v[i] = v;
    params[i] -= lr * (m / c1) / (std::sqrt(v / c2) + state.eps);
  }
}

double lr_schedule(double base, std::span<const int> decay_epochs, double factor, int epoch) {
  double lr = base;
  for (int d : decay_epochs) {
    if (epoch >= d) lr *= factor;
  }
  return lr;
}

void init_uniform(std::span<double> w, int fan_in, Rng& rng) {
  if (fan_in <= 0) throw ConfigError("fan_in must be positive");
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& x : w) x = rng.uniform(-s, s);
}

GradCheckResult finite_difference_check(std::span<double> params,
                                        const std::function<double()>& loss,
                                        const std::function<std::vector<double>()>& grad,
                                        double eps_fd, double tol) {
  GradCheckResult res;
  res.checked = params.size();
  const std::vector<double> analytic = grad();
  if (analytic.size() != params.size()) throw ConfigError("gradient size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps_fd;
    const double lp = loss();
    params[i] = saved - eps_fd;
    const double lm = loss();
    params[i] = saved;
    const double num = (lp - lm) / (2.0 * eps_fd);
    const double den = std::max({1.0, std::abs(num), std::abs(analytic[i])});
    res.max_rel_err = std::max(res.max_rel_err, std::abs(num - analytic[i]) / den);
  }
  res.pass = res.max_rel_err < tol;
  return res;
}

}  // namespace sembeam::nn
