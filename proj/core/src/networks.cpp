#include "sembeam/networks.hpp"

#include <bit>
#include <cstring>

namespace sembeam::nn {

Tensor gather_rows(const Tensor& all, std::span<const int> idx) {
  if (all.rank() < 1 || all.dim(0) <= 0) throw ConfigError("gather_rows on empty tensor");
  const int n = all.dim(0);
  const std::size_t stride = all.numel() / static_cast<std::size_t>(n);
  std::vector<int> shape = all.shape;
  shape[0] = static_cast<int>(idx.size());
  Tensor out(shape);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const int i = idx[r];
    if (i < 0 || i >= n) throw ConfigError("gather_rows index out of range");
    std::memcpy(out.v.data() + r * stride, all.v.data() + static_cast<std::size_t>(i) * stride,
                stride * sizeof(double));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fcnn
// ---------------------------------------------------------------------------

Fcnn::Fcnn(const Spec& spec, std::uint64_t init_seed)
    : spec_(spec),
      W1_({spec.in, spec.hidden1}),
      b1_({spec.hidden1}),
      W2_({spec.hidden1, spec.hidden2}),
      b2_({spec.hidden2}),
      W3_({spec.hidden2, spec.out}),
      b3_({spec.out}),
      gW1_(W1_.shape),
      gb1_(b1_.shape),
      gW2_(W2_.shape),
      gb2_(b2_.shape),
      gW3_(W3_.shape),
      gb3_(b3_.shape) {
  if (spec.in <= 0 || spec.hidden1 <= 0 || spec.hidden2 <= 0 || spec.out <= 0) {
    throw ConfigError("bad dense network dimensions");
  }
  Rng rng(init_seed);
  init_uniform(W1_.v, spec.in, rng);
  init_uniform(b1_.v, spec.in, rng);
  init_uniform(W2_.v, spec.hidden1, rng);
  init_uniform(b2_.v, spec.hidden1, rng);
  init_uniform(W3_.v, spec.hidden2, rng);
  init_uniform(b3_.v, spec.hidden2, rng);
}

Tensor Fcnn::forward(const Tensor& x) const {
  Tensor a1 = relu(dense_forward(x, W1_, b1_));
  Tensor a2 = relu(dense_forward(a1, W2_, b2_));
  return dense_forward(a2, W3_, b3_);
}

double Fcnn::loss(const Tensor& x, const Tensor& targets) const {
  if (spec_.loss != LossKind::kMse) throw ConfigError("network was built for classification");
  return mse(forward(x), targets);
}

double Fcnn::loss(const Tensor& x, std::span<const int> labels) const {
  if (spec_.loss != LossKind::kCrossEntropy) throw ConfigError("network was built for regression");
  return cross_entropy(forward(x), labels);
}

double Fcnn::backward(const Tensor& x, const Tensor* targets, std::span<const int> labels) {
  Tensor z1 = dense_forward(x, W1_, b1_);
  Tensor a1 = relu(z1);
  Tensor z2 = dense_forward(a1, W2_, b2_);
  Tensor a2 = relu(z2);
  Tensor out = dense_forward(a2, W3_, b3_);

  double total;
  Tensor g_out;
  if (targets != nullptr) {
    total = mse(out, *targets);
    g_out = mse_grad(out, *targets);
  } else {
    total = cross_entropy(out, labels);
    g_out = cross_entropy_grad(out, labels);
  }

  Tensor ga2;
  dense_backward(a2, W3_, g_out, &ga2, &gW3_, &gb3_);
  Tensor gz2 = relu_backward(z2, ga2);
  Tensor ga1;
  dense_backward(a1, W2_, gz2, &ga1, &gW2_, &gb2_);
  Tensor gz1 = relu_backward(z1, ga1);
  dense_backward(x, W1_, gz1, nullptr, &gW1_, &gb1_);
  return total;
}

double Fcnn::loss_and_grad(const Tensor& x, const Tensor& targets) {
  if (spec_.loss != LossKind::kMse) throw ConfigError("network was built for classification");
  return backward(x, &targets, {});
}

double Fcnn::loss_and_grad(const Tensor& x, std::span<const int> labels) {
  if (spec_.loss != LossKind::kCrossEntropy) throw ConfigError("network was built for regression");
  return backward(x, nullptr, labels);
}

std::vector<Tensor*> Fcnn::param_blocks() { return {&W1_, &b1_, &W2_, &b2_, &W3_, &b3_}; }
std::vector<Tensor*> Fcnn::grad_blocks() { return {&gW1_, &gb1_, &gW2_, &gb2_, &gW3_, &gb3_}; }

void Fcnn::zero_grads() {
  for (Tensor* g : grad_blocks()) g->fill(0.0);
}

// ---------------------------------------------------------------------------
// LeNetTrunk
// ---------------------------------------------------------------------------

int LeNetTrunk::pooled_dim(int d, int kernel) {
  const int conv = d - kernel + 1;
  if (conv <= 0 || conv % 2 != 0) throw ConfigError("mask size incompatible with architecture");
  return conv / 2;
}

LeNetTrunk::LeNetTrunk(const Spec& spec, Rng& rng)
    : spec_(spec),
      cW1_({spec.conv1, 1, spec.kernel, spec.kernel}),
      cb1_({spec.conv1}),
      cW2_({spec.conv2, spec.conv1, spec.kernel, spec.kernel}),
      cb2_({spec.conv2}),
      W1_({flat_dim(), spec.fc1}),
      b1_({spec.fc1}),
      W2_({spec.fc1, spec.embed}),
      b2_({spec.embed}),
      gcW1_(cW1_.shape),
      gcb1_(cb1_.shape),
      gcW2_(cW2_.shape),
      gcb2_(cb2_.shape),
      gW1_(W1_.shape),
      gb1_(b1_.shape),
      gW2_(W2_.shape),
      gb2_(b2_.shape) {
  const int k2 = spec.kernel * spec.kernel;
  init_uniform(cW1_.v, k2, rng);
  init_uniform(cb1_.v, k2, rng);
  init_uniform(cW2_.v, spec.conv1 * k2, rng);
  init_uniform(cb2_.v, spec.conv1 * k2, rng);
  init_uniform(W1_.v, flat_dim(), rng);
  init_uniform(b1_.v, flat_dim(), rng);
  init_uniform(W2_.v, spec.fc1, rng);
  init_uniform(b2_.v, spec.fc1, rng);
}

int LeNetTrunk::flat_dim() const {
  const int h = pooled_dim(pooled_dim(spec_.in_h, spec_.kernel), spec_.kernel);
  const int w = pooled_dim(pooled_dim(spec_.in_w, spec_.kernel), spec_.kernel);
  return spec_.conv2 * h * w;
}

Tensor LeNetTrunk::forward(const Tensor& x, Cache* cache) const {
  const int B = x.dim(0);
  Tensor c1 = conv2d_forward(x, cW1_, cb1_);
  Tensor r1 = relu(c1);
  std::vector<std::int64_t> am1;
  Tensor p1 = maxpool2_forward(r1, &am1);
  Tensor c2 = conv2d_forward(p1, cW2_, cb2_);
  Tensor r2 = relu(c2);
  std::vector<std::int64_t> am2;
  Tensor p2 = maxpool2_forward(r2, &am2);
  Tensor flat = p2.reshaped({B, flat_dim()});
  Tensor z1 = dense_forward(flat, W1_, b1_);
  Tensor a1 = relu(z1);
  Tensor z2 = dense_forward(a1, W2_, b2_);
  Tensor out = relu(z2);
  if (cache != nullptr) {
    cache->x = x;
    cache->c1 = std::move(c1);
    cache->p1 = std::move(p1);
    cache->c2 = std::move(c2);
    cache->flat = std::move(flat);
    cache->z1 = std::move(z1);
    cache->a1 = std::move(a1);
    cache->z2 = std::move(z2);
    cache->am1 = std::move(am1);
    cache->am2 = std::move(am2);
  }
  return out;
}

void LeNetTrunk::backward(const Cache& cache, const Tensor& d_embed) {
  const int B = cache.x.dim(0);
  Tensor gz2 = relu_backward(cache.z2, d_embed);
  Tensor ga1;
  dense_backward(cache.a1, W2_, gz2, &ga1, &gW2_, &gb2_);
  Tensor gz1 = relu_backward(cache.z1, ga1);
  Tensor gflat;
  dense_backward(cache.flat, W1_, gz1, &gflat, &gW1_, &gb1_);

  const int ph2 = cache.c2.dim(2) / 2;
  const int pw2 = cache.c2.dim(3) / 2;
  Tensor gp2 = gflat.reshaped({B, spec_.conv2, ph2, pw2});
  Tensor gr2 = maxpool2_backward(gp2, cache.am2, cache.c2.shape);
  Tensor gc2 = relu_backward(cache.c2, gr2);
  Tensor gp1;
  conv2d_backward(cache.p1, cW2_, gc2, &gp1, &gcW2_, &gcb2_);
  Tensor gr1 = maxpool2_backward(gp1, cache.am1, cache.c1.shape);
  Tensor gc1 = relu_backward(cache.c1, gr1);
  conv2d_backward(cache.x, cW1_, gc1, nullptr, &gcW1_, &gcb1_);
}

void LeNetTrunk::collect_params(std::vector<Tensor*>& out) {
  for (Tensor* t : {&cW1_, &cb1_, &cW2_, &cb2_, &W1_, &b1_, &W2_, &b2_}) out.push_back(t);
}

void LeNetTrunk::collect_grads(std::vector<Tensor*>& out) {
  for (Tensor* t : {&gcW1_, &gcb1_, &gcW2_, &gcb2_, &gW1_, &gb1_, &gW2_, &gb2_}) out.push_back(t);
}

// ---------------------------------------------------------------------------
// LeNet classifier
// ---------------------------------------------------------------------------

namespace {

LeNetTrunk::Spec classifier_trunk_spec(const LeNet::Spec& s) {
  LeNetTrunk::Spec t;
  t.in_h = s.in_h;
  t.in_w = s.in_w;
  return t;  // fc1 120, embed 84
}

}  // namespace

LeNet::LeNet(const Spec& spec, std::uint64_t init_seed) : LeNet(spec, Rng(init_seed)) {}

LeNet::LeNet(const Spec& spec, Rng rng)
    : spec_(spec),
      trunk_(classifier_trunk_spec(spec), rng),
      Wh_({trunk_.spec().embed, spec.out}),
      bh_({spec.out}),
      gWh_(Wh_.shape),
      gbh_(bh_.shape) {
  init_uniform(Wh_.v, trunk_.spec().embed, rng);
  init_uniform(bh_.v, trunk_.spec().embed, rng);
}

Tensor LeNet::forward(const Tensor& x) const {
  return dense_forward(trunk_.forward(x), Wh_, bh_);
}

double LeNet::loss(const Tensor& x, std::span<const int> labels) const {
  return cross_entropy(forward(x), labels);
}

double LeNet::loss_and_grad(const Tensor& x, std::span<const int> labels) {
  LeNetTrunk::Cache cache;
  Tensor embed = trunk_.forward(x, &cache);
  Tensor logits = dense_forward(embed, Wh_, bh_);
  const double total = cross_entropy(logits, labels);
  Tensor g_logits = cross_entropy_grad(logits, labels);
  Tensor g_embed;
  dense_backward(embed, Wh_, g_logits, &g_embed, &gWh_, &gbh_);
  trunk_.backward(cache, g_embed);
  return total;
}

std::vector<Tensor*> LeNet::param_blocks() {
  std::vector<Tensor*> out;
  trunk_.collect_params(out);
  out.push_back(&Wh_);
  out.push_back(&bh_);
  return out;
}

std::vector<Tensor*> LeNet::grad_blocks() {
  std::vector<Tensor*> out;
  trunk_.collect_grads(out);
  out.push_back(&gWh_);
  out.push_back(&gbh_);
  return out;
}

void LeNet::zero_grads() {
  for (Tensor* g : grad_blocks()) g->fill(0.0);
}

// ---------------------------------------------------------------------------
// BBoxLstm
// ---------------------------------------------------------------------------

BBoxLstm::BBoxLstm(const Spec& spec, std::uint64_t init_seed)
    : spec_(spec),
      Wx_({spec.in, 4 * spec.nu}),
      Wh_({spec.nu, 4 * spec.nu}),
      b_({4 * spec.nu}),
      Wo_({spec.nu, spec.out}),
      bo_({spec.out}),
      gWx_(Wx_.shape),
      gWh_(Wh_.shape),
      gb_(b_.shape),
      gWo_(Wo_.shape),
      gbo_(bo_.shape) {
  if (spec.in <= 0 || spec.nu <= 0 || spec.steps <= 0 || spec.out <= 0) {
    throw ConfigError("bad sequence network dimensions");
  }
  Rng rng(init_seed);
  init_uniform(Wx_.v, spec.in, rng);
  init_uniform(Wh_.v, spec.nu, rng);
  init_uniform(b_.v, spec.nu, rng);
  init_uniform(Wo_.v, spec.nu, rng);
  init_uniform(bo_.v, spec.nu, rng);
}

Tensor BBoxLstm::final_hidden(const Tensor& x, std::vector<LstmCache>* caches) const {
  if (x.rank() != 3 || x.dim(1) != spec_.steps || x.dim(2) != spec_.in) {
    throw ConfigError("sequence input shape mismatch");
  }
  const int B = x.dim(0);
  Tensor h({B, spec_.nu});
  Tensor c({B, spec_.nu});
  Tensor xt({B, spec_.in});
  for (int t = 0; t < spec_.steps; ++t) {
    for (int bi = 0; bi < B; ++bi) {
      std::memcpy(xt.v.data() + static_cast<std::size_t>(bi) * spec_.in,
                  x.v.data() + (static_cast<std::size_t>(bi) * spec_.steps + t) * spec_.in,
                  static_cast<std::size_t>(spec_.in) * sizeof(double));
    }
    LstmCache* cache = caches != nullptr ? &caches->emplace_back() : nullptr;
    auto [h_next, c_next] = lstm_cell_forward(xt, h, c, Wx_, Wh_, b_, cache);
    h = std::move(h_next);
    c = std::move(c_next);
  }
  return h;
}

Tensor BBoxLstm::forward(const Tensor& x) const {
  return dense_forward(final_hidden(x, nullptr), Wo_, bo_);
}

double BBoxLstm::loss(const Tensor& x, std::span<const int> labels) const {
  return cross_entropy(forward(x), labels);
}

double BBoxLstm::loss_and_grad(const Tensor& x, std::span<const int> labels) {
  const int B = x.dim(0);
  std::vector<LstmCache> caches;
  caches.reserve(static_cast<std::size_t>(spec_.steps));
  Tensor h = final_hidden(x, &caches);
  Tensor logits = dense_forward(h, Wo_, bo_);
  const double total = cross_entropy(logits, labels);
  Tensor g_logits = cross_entropy_grad(logits, labels);
  Tensor dh;
  dense_backward(h, Wo_, g_logits, &dh, &gWo_, &gbo_);
  Tensor dc({B, spec_.nu});
  for (int t = spec_.steps - 1; t >= 0; --t) {
    Tensor dx, dh_prev, dc_prev;
    lstm_cell_backward(caches[static_cast<std::size_t>(t)], Wx_, Wh_, dh, dc, &gWx_, &gWh_, &gb_,
                       &dx, &dh_prev, &dc_prev);
    dh = std::move(dh_prev);
    dc = std::move(dc_prev);
  }
  return total;
}

std::vector<Tensor*> BBoxLstm::param_blocks() { return {&Wx_, &Wh_, &b_, &Wo_, &bo_}; }
std::vector<Tensor*> BBoxLstm::grad_blocks() { return {&gWx_, &gWh_, &gb_, &gWo_, &gbo_}; }

void BBoxLstm::zero_grads() {
  for (Tensor* g : grad_blocks()) g->fill(0.0);
}

// ---------------------------------------------------------------------------
// MaskLstm
// ---------------------------------------------------------------------------

namespace {

LeNetTrunk::Spec embedding_trunk_spec(const MaskLstm::Spec& s) {
  LeNetTrunk::Spec t;
  t.in_h = s.in_h;
  t.in_w = s.in_w;
  t.embed = s.nu;  // the embedded vector feeds the recurrent state directly
  return t;
}

}  // namespace

MaskLstm::MaskLstm(const Spec& spec, std::uint64_t init_seed) : MaskLstm(spec, Rng(init_seed)) {}

MaskLstm::MaskLstm(const Spec& spec, Rng rng)
    : spec_(spec),
      trunk_(embedding_trunk_spec(spec), rng),
      Wx_({spec.nu, 4 * spec.nu}),
      Wh_({spec.nu, 4 * spec.nu}),
      b_({4 * spec.nu}),
      Wo_({spec.nu, spec.out}),
      bo_({spec.out}),
      gWx_(Wx_.shape),
      gWh_(Wh_.shape),
      gb_(b_.shape),
      gWo_(Wo_.shape),
      gbo_(bo_.shape) {
  init_uniform(Wx_.v, spec.nu, rng);
  init_uniform(Wh_.v, spec.nu, rng);
  init_uniform(b_.v, spec.nu, rng);
  init_uniform(Wo_.v, spec.nu, rng);
  init_uniform(bo_.v, spec.nu, rng);
}

Tensor MaskLstm::final_hidden(const Tensor& x, LeNetTrunk::Cache* trunk_cache,
                              std::vector<LstmCache>* caches) const {
  if (x.rank() != 4 || x.dim(1) != spec_.steps || x.dim(2) != spec_.in_h ||
      x.dim(3) != spec_.in_w) {
    throw ConfigError("mask sequence input shape mismatch");
  }
  const int B = x.dim(0);
  // All B*steps frames go through the trunk as one batch; frame (b, t) is
  // row b*steps + t of the embedding matrix.
  Tensor frames = x.reshaped({B * spec_.steps, 1, spec_.in_h, spec_.in_w});
  Tensor embed = trunk_.forward(frames, trunk_cache);

  Tensor h({B, spec_.nu});
  Tensor c({B, spec_.nu});
  Tensor xt({B, spec_.nu});
  for (int t = 0; t < spec_.steps; ++t) {
    for (int bi = 0; bi < B; ++bi) {
      std::memcpy(xt.v.data() + static_cast<std::size_t>(bi) * spec_.nu,
                  embed.v.data() + (static_cast<std::size_t>(bi) * spec_.steps + t) * spec_.nu,
                  static_cast<std::size_t>(spec_.nu) * sizeof(double));
    }
    LstmCache* cache = caches != nullptr ? &caches->emplace_back() : nullptr;
    auto [h_next, c_next] = lstm_cell_forward(xt, h, c, Wx_, Wh_, b_, cache);
    h = std::move(h_next);
    c = std::move(c_next);
  }
  return h;
}

Tensor MaskLstm::forward(const Tensor& x) const {
  return dense_forward(final_hidden(x, nullptr, nullptr), Wo_, bo_);
}

double MaskLstm::loss(const Tensor& x, std::span<const int> labels) const {
  return cross_entropy(forward(x), labels);
}

double MaskLstm::loss_and_grad(const Tensor& x, std::span<const int> labels) {
  const int B = x.dim(0);
  LeNetTrunk::Cache trunk_cache;
  std::vector<LstmCache> caches;
  caches.reserve(static_cast<std::size_t>(spec_.steps));
  Tensor h = final_hidden(x, &trunk_cache, &caches);
  Tensor logits = dense_forward(h, Wo_, bo_);
  const double total = cross_entropy(logits, labels);
  Tensor g_logits = cross_entropy_grad(logits, labels);
  Tensor dh;
  dense_backward(h, Wo_, g_logits, &dh, &gWo_, &gbo_);

  Tensor d_embed({B * spec_.steps, spec_.nu});
  Tensor dc({B, spec_.nu});
  for (int t = spec_.steps - 1; t >= 0; --t) {
    Tensor dx, dh_prev, dc_prev;
    lstm_cell_backward(caches[static_cast<std::size_t>(t)], Wx_, Wh_, dh, dc, &gWx_, &gWh_, &gb_,
                       &dx, &dh_prev, &dc_prev);
    for (int bi = 0; bi < B; ++bi) {
      std::memcpy(d_embed.v.data() + (static_cast<std::size_t>(bi) * spec_.steps + t) * spec_.nu,
                  dx.v.data() + static_cast<std::size_t>(bi) * spec_.nu,
                  static_cast<std::size_t>(spec_.nu) * sizeof(double));
    }
    dh = std::move(dh_prev);
    dc = std::move(dc_prev);
  }
  trunk_.backward(trunk_cache, d_embed);
  return total;
}

std::vector<Tensor*> MaskLstm::param_blocks() {
  std::vector<Tensor*> out;
  trunk_.collect_params(out);
  for (Tensor* t : {&Wx_, &Wh_, &b_, &Wo_, &bo_}) out.push_back(t);
  return out;
}

std::vector<Tensor*> MaskLstm::grad_blocks() {
  std::vector<Tensor*> out;
  trunk_.collect_grads(out);
  for (Tensor* t : {&gWx_, &gWh_, &gb_, &gWo_, &gbo_}) out.push_back(t);
  return out;
}

void MaskLstm::zero_grads() {
  for (Tensor* g : grad_blocks()) g->fill(0.0);
}

// ---------------------------------------------------------------------------
// Flat parameter helpers and optimizer
// ---------------------------------------------------------------------------

std::size_t total_size(const std::vector<Tensor*>& blocks) {
  std::size_t n = 0;
  for (const Tensor* b : blocks) n += b->numel();
  return n;
}

std::vector<double> flatten(const std::vector<Tensor*>& blocks) {
  std::vector<double> out;
  out.reserve(total_size(blocks));
  for (const Tensor* b : blocks) out.insert(out.end(), b->v.begin(), b->v.end());
  return out;
}

void unflatten(std::span<const double> flat, const std::vector<Tensor*>& blocks) {
  if (flat.size() != total_size(blocks)) throw ConfigError("parameter count mismatch");
  std::size_t off = 0;
  for (Tensor* b : blocks) {
    std::memcpy(b->v.data(), flat.data() + off, b->numel() * sizeof(double));
    off += b->numel();
  }
}

Optimizer::Optimizer(const std::vector<Tensor*>& params) {
  states_.reserve(params.size());
  for (const Tensor* p : params) states_.emplace_back(p->numel());
}

void Optimizer::step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads,
                     double lr) {
  if (params.size() != states_.size() || grads.size() != states_.size()) {
    throw ConfigError("optimizer block count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_step(params[i]->v, grads[i]->v, states_[i], lr);
  }
}

std::vector<double> Optimizer::flatten_state() const {
  std::vector<double> out;
  for (const AdamState& s : states_) out.insert(out.end(), s.m.begin(), s.m.end());
  for (const AdamState& s : states_) out.insert(out.end(), s.v.begin(), s.v.end());
  return out;
}

void Optimizer::load_state(std::span<const double> flat, std::int64_t step) {
  std::size_t n = 0;
  for (const AdamState& s : states_) n += s.m.size();
  if (flat.size() != 2 * n) throw ConfigError("optimizer state size mismatch");
  std::size_t off = 0;
  for (AdamState& s : states_) {
    std::memcpy(s.m.data(), flat.data() + off, s.m.size() * sizeof(double));
    off += s.m.size();
  }
  for (AdamState& s : states_) {
    std::memcpy(s.v.data(), flat.data() + off, s.v.size() * sizeof(double));
    off += s.v.size();
  }
  for (AdamState& s : states_) s.step = step;
}

// ---------------------------------------------------------------------------
// Checkpoint container
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x50434253;  // "SBCP" little-endian
constexpr std::uint8_t kCheckpointVersion = 1;

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

struct Reader {
  const std::uint8_t* p;
  std::size_t left;

  void need(std::size_t n) const {
    if (left < n) throw ConfigError("truncated model file");
  }
  std::uint8_t u8() {
    need(1);
    --left;
    return *p++;
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    p += 2;
    left -= 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    p += 4;
    left -= 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    p += 8;
    left -= 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    left -= n;
    return s;
  }
};

}  // namespace

std::optional<double> Checkpoint::find_meta(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c) {
  std::vector<std::uint8_t> out;
  put_u32(out, kCheckpointMagic);
  put_u8(out, kCheckpointVersion);
  put_u8(out, static_cast<std::uint8_t>(c.kind));
  if (c.dims.size() > 0xffff || c.meta.size() > 0xffff) throw ConfigError("model file too large");
  put_u16(out, static_cast<std::uint16_t>(c.dims.size()));
  for (std::int64_t d : c.dims) put_u64(out, static_cast<std::uint64_t>(d));
  put_u16(out, static_cast<std::uint16_t>(c.meta.size()));
  for (const auto& [k, v] : c.meta) {
    if (k.size() > 0xffff) throw ConfigError("metadata key too long");
    put_u16(out, static_cast<std::uint16_t>(k.size()));
    out.insert(out.end(), k.begin(), k.end());
    put_f64(out, v);
  }
  put_u64(out, c.params.size());
  for (double v : c.params) put_f64(out, v);
  put_u8(out, c.has_opt ? 1 : 0);
  if (c.has_opt) {
    if (c.opt_m.size() != c.params.size() || c.opt_v.size() != c.params.size()) {
      throw ConfigError("optimizer state size mismatch");
    }
    put_u64(out, static_cast<std::uint64_t>(c.opt_step));
    for (double v : c.opt_m) put_f64(out, v);
    for (double v : c.opt_v) put_f64(out, v);
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::uint8_t* data, std::size_t size) {
  Reader r{data, size};
  if (r.u32() != kCheckpointMagic) throw ConfigError("not a model file");
  if (r.u8() != kCheckpointVersion) throw ConfigError("unsupported model file version");
  Checkpoint c;
  const std::uint8_t kind = r.u8();
  if (kind > static_cast<std::uint8_t>(ModelKind::kMaskLstm)) {
    throw ConfigError("unknown model kind");
  }
  c.kind = static_cast<ModelKind>(kind);
  const std::uint16_t nd = r.u16();
  c.dims.reserve(nd);
  for (int i = 0; i < nd; ++i) c.dims.push_back(static_cast<std::int64_t>(r.u64()));
  const std::uint16_t nm = r.u16();
  c.meta.reserve(nm);
  for (int i = 0; i < nm; ++i) {
    const std::uint16_t len = r.u16();
    std::string key = r.str(len);
    const double val = r.f64();
    c.meta.emplace_back(std::move(key), val);
  }
  const std::uint64_t np = r.u64();
  r.need(np * 8);
  c.params.reserve(np);
  for (std::uint64_t i = 0; i < np; ++i) c.params.push_back(r.f64());
  c.has_opt = r.u8() != 0;
  if (c.has_opt) {
    c.opt_step = static_cast<std::int64_t>(r.u64());
    r.need(2 * np * 8);
    c.opt_m.reserve(np);
    for (std::uint64_t i = 0; i < np; ++i) c.opt_m.push_back(r.f64());
    c.opt_v.reserve(np);
    for (std::uint64_t i = 0; i < np; ++i) c.opt_v.push_back(r.f64());
  }
  if (r.left != 0) throw ConfigError("trailing bytes in model file");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(c);
  write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string bytes = read_file(path);
  return deserialize_checkpoint(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size());
}

}  // namespace sembeam::nn
