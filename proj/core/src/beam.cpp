#include "sembeam/beam.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace sembeam::beam {

const char* kind_name(BeamModelKind kind) {
  switch (kind) {
    case BeamModelKind::kBBoxFcnn: return "bbox-fcnn";
    case BeamModelKind::kMaskLeNet: return "mask-lenet";
    case BeamModelKind::kBBoxLstm: return "bbox-lstm";
    case BeamModelKind::kMaskLstm: return "mask-lstm";
  }
  throw ConfigError("unknown beam model kind");
}

BeamModelKind kind_from_name(const std::string& name) {
  for (BeamModelKind k : {BeamModelKind::kBBoxFcnn, BeamModelKind::kMaskLeNet,
                          BeamModelKind::kBBoxLstm, BeamModelKind::kMaskLstm}) {
    if (name == kind_name(k)) return k;
  }
  throw ConfigError("unknown beam model '" + name + "'");
}

bool kind_uses_masks(BeamModelKind kind) {
  return kind == BeamModelKind::kMaskLeNet || kind == BeamModelKind::kMaskLstm;
}

bool kind_uses_sequence(BeamModelKind kind) {
  return kind == BeamModelKind::kBBoxLstm || kind == BeamModelKind::kMaskLstm;
}

nn::TrainSpec default_train_spec(BeamModelKind kind) {
  nn::TrainSpec spec;
  if (kind_uses_masks(kind)) {
    spec.batch_size = 5;
    spec.lr = 1e-3;
    spec.epochs = 50;
  } else {
    spec.batch_size = 8;
    spec.lr = 1e-2;
    spec.decay_epochs = {20};
    spec.decay_factor = 0.1;
    spec.epochs = 50;
  }
  return spec;
}

namespace {

std::variant<nn::Fcnn, nn::LeNet, nn::BBoxLstm, nn::MaskLstm> make_net(
    BeamModelKind kind, const BeamModelMeta& meta, std::uint64_t seed) {
  switch (kind) {
    case BeamModelKind::kBBoxFcnn:
      return nn::Fcnn(nn::Fcnn::Spec{2, 512, 512, meta.q, nn::LossKind::kCrossEntropy}, seed);
    case BeamModelKind::kMaskLeNet:
      return nn::LeNet(nn::LeNet::Spec{meta.mask_h, meta.mask_w, meta.q}, seed);
    case BeamModelKind::kBBoxLstm:
      return nn::BBoxLstm(nn::BBoxLstm::Spec{4, 64, meta.r, meta.q}, seed);
    case BeamModelKind::kMaskLstm:
      return nn::MaskLstm(nn::MaskLstm::Spec{meta.mask_h, meta.mask_w, 64, meta.r, meta.q}, seed);
  }
  throw ConfigError("unknown beam model kind");
}

void copy_mask(const semantics::MaskGrid& mask, int mask_w, int mask_h, double* dst) {
  if (mask.width != mask_w || mask.height != mask_h) {
    throw ConfigError("sample mask dimensions do not match the model");
  }
  const std::size_t cells = static_cast<std::size_t>(mask_w) * static_cast<std::size_t>(mask_h);
  for (std::size_t i = 0; i < cells; ++i) dst[i] = mask.bits[i];
}

}  // namespace

BeamModel::BeamModel(BeamModelKind kind, const BeamModelMeta& meta, std::uint64_t init_seed)
    : kind_(kind), meta_(meta), net_(make_net(kind, meta, init_seed)) {
  if (meta.q < 1 || meta.r < 1 || meta.img_w <= 0 || meta.img_h <= 0) {
    throw ConfigError("bad beam model geometry");
  }
}

void BeamModel::check_sample(const dataset::SequenceSample& s) const {
  if (s.steps() != meta_.r) throw ConfigError("sample window length does not match the model");
  if (s.label < 0 || s.label >= meta_.q) throw ConfigError("sample label out of beam range");
}

nn::Tensor BeamModel::batch_inputs(std::span<const dataset::SequenceSample> samples,
                                   std::span<const int> idx) const {
  const int B = static_cast<int>(idx.size());
  const int r = meta_.r;
  switch (kind_) {
    case BeamModelKind::kBBoxFcnn: {
      nn::Tensor x({B, 2});
      for (int b = 0; b < B; ++b) {
        const auto& s = samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
        check_sample(s);
        const auto& bbox = s.frames.back().bbox;
        x.v[static_cast<std::size_t>(b) * 2] = bbox[0] / meta_.img_w;
        x.v[static_cast<std::size_t>(b) * 2 + 1] = bbox[1] / meta_.img_h;
      }
      return x;
    }
    case BeamModelKind::kBBoxLstm: {
      nn::Tensor x({B, r, 4});
      for (int b = 0; b < B; ++b) {
        const auto& s = samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
        check_sample(s);
        for (int t = 0; t < r; ++t) {
          const auto& bbox = s.frames[static_cast<std::size_t>(t)].bbox;
          double* row = x.v.data() + (static_cast<std::size_t>(b) * r + t) * 4;
          row[0] = bbox[0] / meta_.img_w;
          row[1] = bbox[1] / meta_.img_h;
          row[2] = bbox[2] / meta_.img_w;
          row[3] = bbox[3] / meta_.img_h;
        }
      }
      return x;
    }
    case BeamModelKind::kMaskLeNet: {
      nn::Tensor x({B, 1, meta_.mask_h, meta_.mask_w});
      const std::size_t cells =
          static_cast<std::size_t>(meta_.mask_w) * static_cast<std::size_t>(meta_.mask_h);
      for (int b = 0; b < B; ++b) {
        const auto& s = samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
        check_sample(s);
        copy_mask(s.frames.back().mask, meta_.mask_w, meta_.mask_h,
                  x.v.data() + static_cast<std::size_t>(b) * cells);
      }
      return x;
    }
    case BeamModelKind::kMaskLstm: {
      nn::Tensor x({B, r, meta_.mask_h, meta_.mask_w});
      const std::size_t cells =
          static_cast<std::size_t>(meta_.mask_w) * static_cast<std::size_t>(meta_.mask_h);
      for (int b = 0; b < B; ++b) {
        const auto& s = samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
        check_sample(s);
        for (int t = 0; t < r; ++t) {
          copy_mask(s.frames[static_cast<std::size_t>(t)].mask, meta_.mask_w, meta_.mask_h,
                    x.v.data() + (static_cast<std::size_t>(b) * r + t) * cells);
        }
      }
      return x;
    }
  }
  throw ConfigError("unknown beam model kind");
}

std::vector<int> BeamModel::batch_labels(std::span<const dataset::SequenceSample> samples,
                                         std::span<const int> idx) {
  std::vector<int> labels(idx.size());
  for (std::size_t b = 0; b < idx.size(); ++b) {
    labels[b] = samples[static_cast<std::size_t>(idx[b])].label;
  }
  return labels;
}

nn::Tensor BeamModel::scores_batch(std::span<const dataset::SequenceSample> samples,
                                   std::span<const int> idx) const {
  const nn::Tensor x = batch_inputs(samples, idx);
  return std::visit([&](const auto& net) { return net.forward(x); }, net_);
}

std::vector<double> BeamModel::scores(const dataset::SequenceSample& s) const {
  const int zero = 0;
  const nn::Tensor out = scores_batch({&s, 1}, {&zero, 1});
  return out.v;
}

std::vector<nn::Tensor*> BeamModel::param_blocks() {
  return std::visit([](auto& net) { return net.param_blocks(); }, net_);
}

std::vector<nn::Tensor*> BeamModel::grad_blocks() {
  return std::visit([](auto& net) { return net.grad_blocks(); }, net_);
}

void BeamModel::zero_grads() {
  std::visit([](auto& net) { net.zero_grads(); }, net_);
}

double BeamModel::batch_grad(std::span<const dataset::SequenceSample> samples,
                             std::span<const int> idx) {
  const nn::Tensor x = batch_inputs(samples, idx);
  const std::vector<int> labels = batch_labels(samples, idx);
  return std::visit([&](auto& net) { return net.loss_and_grad(x, labels); }, net_);
}

double BeamModel::batch_loss(std::span<const dataset::SequenceSample> samples,
                             std::span<const int> idx) const {
  const nn::Tensor x = batch_inputs(samples, idx);
  const std::vector<int> labels = batch_labels(samples, idx);
  return std::visit([&](const auto& net) { return net.loss(x, labels); }, net_);
}

nn::Checkpoint BeamModel::to_checkpoint() const {
  nn::Checkpoint c;
  switch (kind_) {
    case BeamModelKind::kBBoxFcnn: c.kind = nn::ModelKind::kFcnn; break;
    case BeamModelKind::kMaskLeNet: c.kind = nn::ModelKind::kLeNet; break;
    case BeamModelKind::kBBoxLstm: c.kind = nn::ModelKind::kBBoxLstm; break;
    case BeamModelKind::kMaskLstm: c.kind = nn::ModelKind::kMaskLstm; break;
  }
  c.dims = {static_cast<std::int64_t>(kind_)};
  c.meta = {{"node", static_cast<double>(meta_.node)},
            {"ula", static_cast<double>(meta_.ula)},
            {"q", static_cast<double>(meta_.q)},
            {"r", static_cast<double>(meta_.r)},
            {"mask_w", static_cast<double>(meta_.mask_w)},
            {"mask_h", static_cast<double>(meta_.mask_h)},
            {"img_w", meta_.img_w},
            {"img_h", meta_.img_h}};
  c.params = nn::flatten(const_cast<BeamModel*>(this)->param_blocks());
  return c;
}

BeamModel BeamModel::from_checkpoint(const nn::Checkpoint& c) {
  if (c.dims.size() != 1) throw ConfigError("not a beam model file");
  const auto need = [&](const std::string& key) {
    const auto v = c.find_meta(key);
    if (!v) throw ConfigError("beam model file lacks " + key);
    return *v;
  };
  BeamModelMeta meta;
  meta.node = static_cast<int>(need("node"));
  meta.ula = static_cast<int>(need("ula"));
  meta.q = static_cast<int>(need("q"));
  meta.r = static_cast<int>(need("r"));
  meta.mask_w = static_cast<int>(need("mask_w"));
  meta.mask_h = static_cast<int>(need("mask_h"));
  meta.img_w = need("img_w");
  meta.img_h = need("img_h");
  const auto kind = static_cast<BeamModelKind>(c.dims[0]);
  (void)kind_name(kind);  // rejects unknown kind ids
  BeamModel m(kind, meta, 0);
  nn::unflatten(c.params, m.param_blocks());
  return m;
}

nn::TrainLog train_beam_model(BeamModel& model, std::span<const dataset::SequenceSample> train,
                              std::span<const dataset::SequenceSample> val,
                              const nn::TrainSpec& spec) {
  struct Adapter {
    BeamModel* m;
    std::vector<nn::Tensor*> param_blocks() { return m->param_blocks(); }
    std::vector<nn::Tensor*> grad_blocks() { return m->grad_blocks(); }
    void zero_grads() { m->zero_grads(); }
    double batch_grad(const std::span<const dataset::SequenceSample>& ds,
                      std::span<const int> idx) {
      return m->batch_grad(ds, idx);
    }
    double batch_loss(const std::span<const dataset::SequenceSample>& ds,
                      std::span<const int> idx) const {
      return m->batch_loss(ds, idx);
    }
  };
  Adapter adapter{&model};
  nn::Optimizer opt(model.param_blocks());
  const std::span<const dataset::SequenceSample>* val_ptr = val.empty() ? nullptr : &val;
  return nn::train_model(adapter, opt, train, val_ptr, spec);
}

std::vector<int> top_k(std::span<const double> scores, int k) {
  const int q = static_cast<int>(scores.size());
  if (k < 1 || k > q) throw ConfigError("top-k out of range");
  std::vector<int> order(static_cast<std::size_t>(q));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

void write_predictions(const std::string& path,
                       std::span<const dataset::SequenceSample> samples,
                       const std::vector<std::vector<int>>& top3) {
  if (samples.size() != top3.size()) throw ConfigError("prediction row count mismatch");
  std::ostringstream out;
  out << "sequence,label,top1,top2,top3\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& t = top3[i];
    out << i << ',' << samples[i].label;
    for (int j = 0; j < 3; ++j) {
      out << ',' << (j < static_cast<int>(t.size()) ? t[static_cast<std::size_t>(j)] : -1);
    }
    out << '\n';
  }
  write_file(path, out.str());
}

}  // namespace sembeam::beam
