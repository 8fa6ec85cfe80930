#pragma once
// The scene-pathway trunk shared by all networks, the classifier heads
// (template, rotation, translation) and the two-pathway context network.
// Every network is templated on the scalar type so the double instance can
// be finite-difference checked.

#include <array>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <random>
#include <string>
#include <vector>

#include "deepcontext/templates.hpp"
#include "deepcontext/tensor_nn.hpp"
#include "deepcontext/tsdf.hpp"

namespace deepcontext {

struct TrunkConfig {
  std::array<int, 3> channels{16, 32, 64};
  int hidden = 512;  // both fully connected layers; also the global feature size
  void validate() const;
};

struct ContextConfig {
  std::array<int, 2> roi_channels{16, 32};
  int hidden = 128;
  void validate() const;
};

nlohmann::json to_json(const TrunkConfig& c);
TrunkConfig trunk_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ContextConfig& c);
ContextConfig context_config_from_json(const nlohmann::json& j);

template <class T>
struct Param {
  std::string name;
  std::string kind;
  nn::Tensor<T>* tensor;
};

// Three conv(3^3, pad 1) + maxpool(2) + relu blocks followed by two
// relu dense layers.
template <class T>
class Trunk {
 public:
  struct Cache {
    std::array<std::vector<int>, 3> in_shape;
    std::array<std::vector<T>, 3> col;
    std::array<std::vector<int>, 3> conv_shape;
    std::array<std::vector<int>, 3> pool_arg;
    std::array<nn::Tensor<T>, 3> act;  // block outputs; act[2] is the spatial feature
    nn::Tensor<T> h1;
    nn::Tensor<T> global;
  };

  Trunk() = default;
  Trunk(const GridConfig& grid, const TrunkConfig& cfg, std::mt19937_64& rng);

  // input: [1, dz, dy, dx] TSDF values.
  void forward(const nn::Tensor<T>& input, Cache& c) const;
  // Accumulates parameter gradients; d_spatial (shaped like act[2]) may be
  // null.
  void backward(const Cache& c, const nn::Tensor<T>& d_global, const nn::Tensor<T>* d_spatial);

  void collect(std::vector<Param<T>>& out, const std::string& prefix);
  std::uint64_t signature(const Cache& c) const;

  const TrunkConfig& config() const { return cfg_; }
  int feature_channels() const { return cfg_.channels[2]; }
  // Spatial feature dims as (z, y, x).
  std::array<int, 3> feature_dims() const { return feature_dims_; }
  static constexpr int kStride = 8;

  std::array<nn::Tensor<T>, 3> conv_w, conv_b;
  nn::Tensor<T> fc1_w, fc1_b, fc2_w, fc2_b;

 private:
  TrunkConfig cfg_;
  std::array<int, 3> input_dims_{};
  std::array<int, 3> feature_dims_{};
};

// Trunk + one dense head producing `classes` logits.
template <class T>
class ClassifierNet {
 public:
  struct Cache {
    typename Trunk<T>::Cache trunk;
    nn::Tensor<T> logits;
  };

  ClassifierNet() = default;
  ClassifierNet(const GridConfig& grid, const TrunkConfig& cfg, int classes, std::uint64_t seed);

  void forward(const nn::Tensor<T>& input, Cache& c) const;
  void backward(const Cache& c, const nn::Tensor<T>& d_logits);
  std::vector<Param<T>> params();
  std::uint64_t signature(const Cache& c) const { return trunk.signature(c.trunk); }
  int classes() const { return head_w.dim(0); }

  Trunk<T> trunk;
  nn::Tensor<T> head_w, head_b;
};

// Per-anchor outputs: 2 existence logits (absent, present) then 6 box
// offset values (dcenter, dlog_size).
inline constexpr int kAnchorOutputs = 8;

// Scene pathway (trunk) plus object pathway: ROI pooling of the trunk's
// spatial feature over each anchor, two conv blocks, concatenation with the
// global feature, a shared dense layer and a per-anchor output layer.
template <class T>
class ContextNet {
 public:
  struct AnchorCache {
    bool outside = false;
    std::vector<int> roi_arg;
    nn::Tensor<T> roi;
    std::array<std::vector<T>, 2> col;
    std::array<std::vector<int>, 2> conv_shape;
    std::array<std::vector<int>, 2> pool_arg;
    std::array<nn::Tensor<T>, 2> act;
    nn::Tensor<T> concat;
    nn::Tensor<T> hidden;
    std::array<T, kAnchorOutputs> out{};
  };
  struct Cache {
    typename Trunk<T>::Cache trunk;
    std::vector<AnchorCache> anchors;
  };

  ContextNet() = default;
  ContextNet(const GridConfig& grid, const SceneTemplate& tmpl, const TrunkConfig& trunk_cfg,
             const ContextConfig& cfg, std::uint64_t seed);

  void forward(const nn::Tensor<T>& input, Cache& c) const;
  // d_out[a] is ignored for anchors flagged outside.
  void backward(const Cache& c, const std::vector<std::array<T, kAnchorOutputs>>& d_out);
  std::vector<Param<T>> params();
  std::uint64_t signature(const Cache& c) const;

  std::size_t anchor_count() const { return rois_.size(); }
  const nn::RoiBox& roi(std::size_t a) const { return rois_[a]; }

  Trunk<T> trunk;
  std::array<nn::Tensor<T>, 2> conv_w, conv_b;
  nn::Tensor<T> fc_w, fc_b;
  nn::Tensor<T> head_w, head_b;  // [anchors * 8, hidden], [anchors * 8]

 private:
  ContextConfig cfg_;
  std::vector<nn::RoiBox> rois_;
};

// Feature-grid ROI of an anchor box given in the grid's working frame.
nn::RoiBox anchor_roi(const OrientedBox3& box, const GridConfig& grid, int stride);

std::vector<nn::NamedTensor> named_tensors(const std::vector<Param<float>>& params);

// Float weights copied into a double network (or back), matched by name.
template <class To, class From>
void copy_params(std::vector<Param<To>> dst, std::vector<Param<From>> src);

}  // namespace deepcontext
