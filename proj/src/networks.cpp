#include "deepcontext/networks.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "deepcontext/util.hpp"

namespace deepcontext {

using nn::Tensor;

void TrunkConfig::validate() const {
  for (int c : channels)
    if (c < 1) throw std::invalid_argument("trunk channels must be positive");
  if (hidden < 1) throw std::invalid_argument("trunk hidden size must be positive");
}

void ContextConfig::validate() const {
  for (int c : roi_channels)
    if (c < 1) throw std::invalid_argument("object pathway channels must be positive");
  if (hidden < 1) throw std::invalid_argument("context hidden size must be positive");
}

nlohmann::json to_json(const TrunkConfig& c) { return {{"channels", c.channels}, {"hidden", c.hidden}}; }

TrunkConfig trunk_config_from_json(const nlohmann::json& j) {
  TrunkConfig c;
  if (j.contains("channels")) c.channels = j.at("channels").get<std::array<int, 3>>();
  c.hidden = j.value("hidden", c.hidden);
  c.validate();
  return c;
}

nlohmann::json to_json(const ContextConfig& c) { return {{"roi_channels", c.roi_channels}, {"hidden", c.hidden}}; }

ContextConfig context_config_from_json(const nlohmann::json& j) {
  ContextConfig c;
  if (j.contains("roi_channels")) c.roi_channels = j.at("roi_channels").get<std::array<int, 2>>();
  c.hidden = j.value("hidden", c.hidden);
  c.validate();
  return c;
}

namespace {

constexpr nn::Conv3dParams kConv{1, 1};
constexpr nn::PoolParams kPool{2, 2};

template <class T>
void init_conv(Tensor<T>& w, Tensor<T>& b, int out, int in, std::mt19937_64& rng) {
  w = Tensor<T>({out, in, 3, 3, 3});
  b = Tensor<T>({out});
  nn::init_uniform_fan_in(w, in * 27, rng, 6.0);
}

// Layers feeding a relu use He scaling; output layers the plain fan-in bound.
template <class T>
void init_dense(Tensor<T>& w, Tensor<T>& b, int out, int in, std::mt19937_64& rng, double scale = 6.0) {
  w = Tensor<T>({out, in});
  b = Tensor<T>({out});
  nn::init_uniform_fan_in(w, in, rng, scale);
}

template <class T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.values[i] += src.values[i];
}

// conv -> pool -> relu
template <class T>
Tensor<T> block_forward(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& b, nn::PoolParams pool,
                        std::vector<int>& in_shape, std::vector<T>& col, std::vector<int>& conv_shape,
                        std::vector<int>& pool_arg) {
  in_shape = in.shape;
  Tensor<T> conv = nn::detail::conv3d_forward_col(in, w, b, kConv, col);
  conv_shape = conv.shape;
  return nn::relu_forward(nn::maxpool3d_forward(conv, pool, pool_arg));
}

template <class T>
void block_backward(const Tensor<T>& act, const Tensor<T>& d_act, Tensor<T>& w, Tensor<T>& b,
                    const std::vector<int>& in_shape, const std::vector<T>& col, const std::vector<int>& conv_shape,
                    const std::vector<int>& pool_arg, Tensor<T>* d_in) {
  const Tensor<T> d_pool = nn::relu_backward(act, d_act);
  Tensor<T> d_conv(conv_shape);
  nn::maxpool_backward(d_pool, pool_arg, d_conv);
  w.ensure_grad();
  b.ensure_grad();
  nn::detail::conv3d_backward_col(in_shape, col, w, d_conv, kConv, d_in, w.grad, b.grad);
}

std::uint64_t hash_mask(std::uint64_t h, const auto& values) {
  std::uint64_t bits = 0;
  int n = 0;
  for (auto v : values) {
    bits = (bits << 1) | (v > 0 ? 1u : 0u);
    if (++n == 64) {
      h = mix_seed(h, bits);
      bits = 0;
      n = 0;
    }
  }
  return mix_seed(h, bits ^ static_cast<std::uint64_t>(n));
}

std::uint64_t hash_ints(std::uint64_t h, const std::vector<int>& v) {
  for (int x : v) h = mix_seed(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(x)));
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// Trunk

template <class T>
Trunk<T>::Trunk(const GridConfig& grid, const TrunkConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
  cfg.validate();
  input_dims_ = {grid.dims[2], grid.dims[1], grid.dims[0]};
  for (int a = 0; a < 3; ++a) {
    if (input_dims_[a] % kStride != 0)
      throw nn::ShapeError("grid dims must be multiples of 8 for the three pooling stages");
    feature_dims_[a] = input_dims_[a] / kStride;
  }
  int in = 1;
  for (int k = 0; k < 3; ++k) {
    init_conv(conv_w[k], conv_b[k], cfg.channels[k], in, rng);
    in = cfg.channels[k];
  }
  const int flat = cfg.channels[2] * feature_dims_[0] * feature_dims_[1] * feature_dims_[2];
  init_dense(fc1_w, fc1_b, cfg.hidden, flat, rng);
  init_dense(fc2_w, fc2_b, cfg.hidden, cfg.hidden, rng);
}

template <class T>
void Trunk<T>::forward(const Tensor<T>& input, Cache& c) const {
  if (input.shape != std::vector<int>{1, input_dims_[0], input_dims_[1], input_dims_[2]})
    throw nn::ShapeError("trunk input " + nn::shape_string(input.shape) + " does not match the configured grid");
  const Tensor<T>* x = &input;
  for (int k = 0; k < 3; ++k) {
    c.act[k] = block_forward(*x, conv_w[k], conv_b[k], kPool, c.in_shape[k], c.col[k], c.conv_shape[k], c.pool_arg[k]);
    x = &c.act[k];
  }
  c.h1 = nn::relu_forward(nn::dense_forward(c.act[2], fc1_w, fc1_b));
  c.global = nn::relu_forward(nn::dense_forward(c.h1, fc2_w, fc2_b));
}

template <class T>
void Trunk<T>::backward(const Cache& c, const Tensor<T>& d_global, const Tensor<T>* d_spatial) {
  fc2_w.ensure_grad();
  fc2_b.ensure_grad();
  fc1_w.ensure_grad();
  fc1_b.ensure_grad();
  Tensor<T> d_h1, d_flat;
  nn::dense_backward(c.h1, fc2_w, nn::relu_backward(c.global, d_global), &d_h1, fc2_w.grad, fc2_b.grad);
  nn::dense_backward(c.act[2], fc1_w, nn::relu_backward(c.h1, d_h1), &d_flat, fc1_w.grad, fc1_b.grad);
  Tensor<T> d_act = std::move(d_flat);
  d_act.shape = c.act[2].shape;
  if (d_spatial) add_into(d_act, *d_spatial);
  for (int k = 2; k >= 0; --k) {
    Tensor<T> d_in;
    block_backward(c.act[k], d_act, conv_w[k], conv_b[k], c.in_shape[k], c.col[k], c.conv_shape[k], c.pool_arg[k],
                   k > 0 ? &d_in : nullptr);
    d_act = std::move(d_in);
  }
}

template <class T>
void Trunk<T>::collect(std::vector<Param<T>>& out, const std::string& prefix) {
  for (int k = 0; k < 3; ++k) {
    const std::string n = prefix + "conv" + std::to_string(k + 1);
    out.push_back({n + ".weight", "conv3d", &conv_w[k]});
    out.push_back({n + ".bias", "conv3d", &conv_b[k]});
  }
  out.push_back({prefix + "fc1.weight", "dense", &fc1_w});
  out.push_back({prefix + "fc1.bias", "dense", &fc1_b});
  out.push_back({prefix + "fc2.weight", "dense", &fc2_w});
  out.push_back({prefix + "fc2.bias", "dense", &fc2_b});
}

template <class T>
std::uint64_t Trunk<T>::signature(const Cache& c) const {
  std::uint64_t h = 0;
  for (int k = 0; k < 3; ++k) {
    h = hash_ints(h, c.pool_arg[k]);
    h = hash_mask(h, c.act[k].values);
  }
  h = hash_mask(h, c.h1.values);
  return hash_mask(h, c.global.values);
}

// ---------------------------------------------------------------------------
// ClassifierNet

template <class T>
ClassifierNet<T>::ClassifierNet(const GridConfig& grid, const TrunkConfig& cfg, int classes, std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("classifier needs at least two classes");
  std::mt19937_64 rng(seed);
  trunk = Trunk<T>(grid, cfg, rng);
  init_dense(head_w, head_b, classes, cfg.hidden, rng, 1.0);
}

template <class T>
void ClassifierNet<T>::forward(const Tensor<T>& input, Cache& c) const {
  trunk.forward(input, c.trunk);
  c.logits = nn::dense_forward(c.trunk.global, head_w, head_b);
}

template <class T>
void ClassifierNet<T>::backward(const Cache& c, const Tensor<T>& d_logits) {
  head_w.ensure_grad();
  head_b.ensure_grad();
  Tensor<T> d_global;
  nn::dense_backward(c.trunk.global, head_w, d_logits, &d_global, head_w.grad, head_b.grad);
  trunk.backward(c.trunk, d_global, nullptr);
}

template <class T>
std::vector<Param<T>> ClassifierNet<T>::params() {
  std::vector<Param<T>> out;
  trunk.collect(out, "trunk.");
  out.push_back({"head.weight", "dense", &head_w});
  out.push_back({"head.bias", "dense", &head_b});
  return out;
}

// ---------------------------------------------------------------------------
// ContextNet

nn::RoiBox anchor_roi(const OrientedBox3& box, const GridConfig& grid, int stride) {
  nn::RoiBox r;
  Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
  for (const auto& c : box.footprint()) {
    lo.x() = std::min(lo.x(), c.x());
    lo.y() = std::min(lo.y(), c.y());
    hi.x() = std::max(hi.x(), c.x());
    hi.y() = std::max(hi.y(), c.y());
  }
  lo.z() = box.center.z() - box.size.z() / 2;
  hi.z() = box.center.z() + box.size.z() / 2;
  const double cell = grid.voxel_size * stride;
  for (int a = 0; a < 3; ++a) {
    r.lo[static_cast<std::size_t>(a)] = (lo[a] - grid.origin[a]) / cell;
    r.hi[static_cast<std::size_t>(a)] = (hi[a] - grid.origin[a]) / cell;
  }
  return r;
}

template <class T>
ContextNet<T>::ContextNet(const GridConfig& grid, const SceneTemplate& tmpl, const TrunkConfig& trunk_cfg,
                          const ContextConfig& cfg, std::uint64_t seed)
    : cfg_(cfg) {
  cfg.validate();
  if (tmpl.anchors.empty()) throw std::invalid_argument("template '" + tmpl.name + "' has no anchors");
  if (nn::kRoiCells % 2 != 0) throw nn::ShapeError("ROI cell count must be even");
  std::mt19937_64 rng(seed);
  trunk = Trunk<T>(grid, trunk_cfg, rng);
  init_conv(conv_w[0], conv_b[0], cfg.roi_channels[0], trunk_cfg.channels[2], rng);
  init_conv(conv_w[1], conv_b[1], cfg.roi_channels[1], cfg.roi_channels[0], rng);
  init_dense(fc_w, fc_b, cfg.hidden, cfg.roi_channels[1] + trunk_cfg.hidden, rng);
  const int a = static_cast<int>(tmpl.anchors.size());
  init_dense(head_w, head_b, a * kAnchorOutputs, cfg.hidden, rng, 1.0);
  for (const auto& anchor : tmpl.anchors) rois_.push_back(anchor_roi(anchor.box, grid, Trunk<T>::kStride));
}

template <class T>
void ContextNet<T>::forward(const Tensor<T>& input, Cache& c) const {
  trunk.forward(input, c.trunk);
  const Tensor<T>& feature = c.trunk.act[2];
  const int h = cfg_.hidden;
  const int c2 = cfg_.roi_channels[1];
  const nn::PoolParams second{nn::kRoiCells / 2, nn::kRoiCells / 2};
  c.anchors.resize(rois_.size());
  for (std::size_t a = 0; a < rois_.size(); ++a) {
    AnchorCache& ac = c.anchors[a];
    ac.roi = nn::roi_maxpool3d_forward(feature, rois_[a], ac.roi_arg, &ac.outside);
    ac.out.fill(T(0));
    if (ac.outside) continue;
    std::vector<int> in_shape;
    ac.act[0] = block_forward(ac.roi, conv_w[0], conv_b[0], kPool, in_shape, ac.col[0], ac.conv_shape[0],
                              ac.pool_arg[0]);
    ac.act[1] = block_forward(ac.act[0], conv_w[1], conv_b[1], second, in_shape, ac.col[1], ac.conv_shape[1],
                              ac.pool_arg[1]);
    ac.concat = Tensor<T>({c2 + trunk.config().hidden});
    std::copy(ac.act[1].values.begin(), ac.act[1].values.end(), ac.concat.values.begin());
    std::copy(c.trunk.global.values.begin(), c.trunk.global.values.end(), ac.concat.values.begin() + c2);
    ac.hidden = nn::relu_forward(nn::dense_forward(ac.concat, fc_w, fc_b));
    for (int o = 0; o < kAnchorOutputs; ++o) {
      const std::size_t row = a * kAnchorOutputs + static_cast<std::size_t>(o);
      const T* w = head_w.data() + row * static_cast<std::size_t>(h);
      T s = head_b.values[row];
      for (int i = 0; i < h; ++i) s += w[i] * ac.hidden.values[static_cast<std::size_t>(i)];
      ac.out[static_cast<std::size_t>(o)] = s;
    }
  }
}

template <class T>
void ContextNet<T>::backward(const Cache& c, const std::vector<std::array<T, kAnchorOutputs>>& d_out) {
  if (d_out.size() != rois_.size()) throw nn::ShapeError("context gradient count does not match anchors");
  for (auto* t : {&head_w, &head_b, &fc_w, &fc_b, &conv_w[0], &conv_b[0], &conv_w[1], &conv_b[1]}) t->ensure_grad();
  const int h = cfg_.hidden;
  const int c2 = cfg_.roi_channels[1];
  const int g = trunk.config().hidden;
  Tensor<T> d_global({g});
  Tensor<T> d_spatial(c.trunk.act[2].shape);
  for (std::size_t a = 0; a < rois_.size(); ++a) {
    const AnchorCache& ac = c.anchors[a];
    if (ac.outside) continue;
    Tensor<T> d_hidden({h});
    for (int o = 0; o < kAnchorOutputs; ++o) {
      const T d = d_out[a][static_cast<std::size_t>(o)];
      if (d == T(0)) continue;
      const std::size_t row = a * kAnchorOutputs + static_cast<std::size_t>(o);
      const T* w = head_w.data() + row * static_cast<std::size_t>(h);
      T* gw = head_w.grad.data() + row * static_cast<std::size_t>(h);
      head_b.grad[row] += d;
      for (int i = 0; i < h; ++i) {
        gw[i] += d * ac.hidden.values[static_cast<std::size_t>(i)];
        d_hidden.values[static_cast<std::size_t>(i)] += d * w[i];
      }
    }
    Tensor<T> d_concat;
    nn::dense_backward(ac.concat, fc_w, nn::relu_backward(ac.hidden, d_hidden), &d_concat, fc_w.grad, fc_b.grad);
    for (int i = 0; i < g; ++i) d_global.values[static_cast<std::size_t>(i)] += d_concat.values[static_cast<std::size_t>(c2 + i)];
    Tensor<T> d_act1(ac.act[1].shape);
    std::copy(d_concat.values.begin(), d_concat.values.begin() + c2, d_act1.values.begin());
    Tensor<T> d_act0, d_roi;
    block_backward(ac.act[1], d_act1, conv_w[1], conv_b[1], ac.act[0].shape, ac.col[1], ac.conv_shape[1],
                   ac.pool_arg[1], &d_act0);
    block_backward(ac.act[0], d_act0, conv_w[0], conv_b[0], ac.roi.shape, ac.col[0], ac.conv_shape[0],
                   ac.pool_arg[0], &d_roi);
    nn::maxpool_backward(d_roi, ac.roi_arg, d_spatial);
  }
  trunk.backward(c.trunk, d_global, &d_spatial);
}

template <class T>
std::vector<Param<T>> ContextNet<T>::params() {
  std::vector<Param<T>> out;
  trunk.collect(out, "trunk.");
  out.push_back({"object.conv1.weight", "conv3d", &conv_w[0]});
  out.push_back({"object.conv1.bias", "conv3d", &conv_b[0]});
  out.push_back({"object.conv2.weight", "conv3d", &conv_w[1]});
  out.push_back({"object.conv2.bias", "conv3d", &conv_b[1]});
  out.push_back({"object.fc.weight", "dense", &fc_w});
  out.push_back({"object.fc.bias", "dense", &fc_b});
  out.push_back({"object.head.weight", "dense", &head_w});
  out.push_back({"object.head.bias", "dense", &head_b});
  return out;
}

template <class T>
std::uint64_t ContextNet<T>::signature(const Cache& c) const {
  std::uint64_t h = trunk.signature(c.trunk);
  for (const auto& ac : c.anchors) {
    h = hash_ints(h, ac.roi_arg);
    if (ac.outside) continue;
    for (int k = 0; k < 2; ++k) {
      h = hash_ints(h, ac.pool_arg[k]);
      h = hash_mask(h, ac.act[k].values);
    }
    h = hash_mask(h, ac.hidden.values);
  }
  return h;
}

std::vector<nn::NamedTensor> named_tensors(const std::vector<Param<float>>& params) {
  std::vector<nn::NamedTensor> out;
  for (const auto& p : params) out.push_back({p.name, p.kind, p.tensor});
  return out;
}

template <class To, class From>
void copy_params(std::vector<Param<To>> dst, std::vector<Param<From>> src) {
  std::map<std::string, nn::Tensor<From>*> by_name;
  for (auto& p : src) by_name[p.name] = p.tensor;
  for (auto& p : dst) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw std::invalid_argument("copy_params: missing tensor '" + p.name + "'");
    if (it->second->shape != p.tensor->shape) throw nn::ShapeError("copy_params: shape mismatch for '" + p.name + "'");
    for (std::size_t i = 0; i < p.tensor->size(); ++i) p.tensor->values[i] = static_cast<To>(it->second->values[i]);
  }
}

template class Trunk<float>;
template class Trunk<double>;
template class ClassifierNet<float>;
template class ClassifierNet<double>;
template class ContextNet<float>;
template class ContextNet<double>;
template void copy_params<float, float>(std::vector<Param<float>>, std::vector<Param<float>>);
template void copy_params<double, float>(std::vector<Param<double>>, std::vector<Param<float>>);
template void copy_params<float, double>(std::vector<Param<float>>, std::vector<Param<double>>);

}  // namespace deepcontext
