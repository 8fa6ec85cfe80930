#pragma once
// Minimal deterministic tensor engine with hand-written reverse-mode
// gradients for every layer the pipeline uses. Layers are free functions
// with explicit caches, so a layer's weights can be applied several times
// in one forward pass (the object pathway does this once per anchor).
//
// Layout is x-fastest: a [C, D, H, W] tensor stores W contiguously.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace deepcontext::nn {

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

template <class T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until ensure_grad()

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, T fill = T(0));

  std::size_t size() const { return values.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  T* data() { return values.data(); }
  const T* data() const { return values.data(); }
  T& operator[](std::size_t i) { return values[i]; }
  const T& operator[](std::size_t i) const { return values[i]; }

  void ensure_grad();
  void zero_grad();
  bool has_grad() const { return grad.size() == values.size(); }
  // Same storage viewed with a new shape of equal element count.
  Tensor reshaped(std::vector<int> dims) const;
};

std::size_t shape_size(const std::vector<int>& shape);
std::string shape_string(const std::vector<int>& shape);

// Centered uniform init with magnitude sqrt(scale / fan_in); bias stays 0.
// scale 6 keeps activation variance through relu layers (He init).
template <class T>
void init_uniform_fan_in(Tensor<T>& weight, int fan_in, std::mt19937_64& rng, double scale = 1.0);

// ---------------------------------------------------------------------------
// conv3d: input [C,D,H,W], weight [K,C,kd,kh,kw], bias [K] -> [K,D',H',W']

struct Conv3dParams {
  int stride = 1;
  int padding = 0;
};

std::array<int, 3> conv3d_output_dims(const std::vector<int>& in_shape, const std::vector<int>& w_shape,
                                      Conv3dParams p);

template <class T>
Tensor<T> conv3d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, Conv3dParams p);

// Accumulates into weight_grad / bias_grad; overwrites *input_grad when
// non-null.
template <class T>
void conv3d_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& out_grad, Conv3dParams p,
                     Tensor<T>* input_grad, std::vector<T>& weight_grad, std::vector<T>& bias_grad);

namespace detail {
// Variants that keep the im2col buffer so backward can reuse it.
template <class T>
Tensor<T> conv3d_forward_col(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                             Conv3dParams p, std::vector<T>& col);
template <class T>
void conv3d_backward_col(const std::vector<int>& in_shape, const std::vector<T>& col, const Tensor<T>& weight,
                         const Tensor<T>& out_grad, Conv3dParams p, Tensor<T>* input_grad,
                         std::vector<T>& weight_grad, std::vector<T>& bias_grad);
}  // namespace detail

// ---------------------------------------------------------------------------
// maxpool3d over [C,D,H,W]; argmax holds flat input indices (first index
// wins on ties).

struct PoolParams {
  int window = 2;
  int stride = 2;
};

template <class T>
Tensor<T> maxpool3d_forward(const Tensor<T>& input, PoolParams p, std::vector<int>& argmax);

template <class T>
void maxpool_backward(const Tensor<T>& out_grad, const std::vector<int>& argmax, Tensor<T>& input_grad);

// ---------------------------------------------------------------------------
// 3D ROI max pooling to a fixed cube of cells.

// Region in feature-grid coordinates (voxel i spans [i, i+1)).
struct RoiBox {
  std::array<double, 3> lo{};  // x, y, z
  std::array<double, 3> hi{};
};

inline constexpr int kRoiCells = 6;

// Output [C, cells, cells, cells]. Bins follow 2D ROI pooling: the ROI
// covers integer voxels floor(lo)..ceil(hi)-1 and bin b spans
// [floor(b*n/cells), ceil((b+1)*n/cells)) of them. Cells falling outside
// the grid are 0 with argmax -1. Sets *outside when the ROI misses the grid
// entirely.
template <class T>
Tensor<T> roi_maxpool3d_forward(const Tensor<T>& feature, const RoiBox& roi, std::vector<int>& argmax,
                                bool* outside = nullptr, int cells = kRoiCells);

// ---------------------------------------------------------------------------
// dense: input [n], weight [m,n], bias [m] -> [m]

template <class T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <class T>
void dense_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& out_grad,
                    Tensor<T>* input_grad, std::vector<T>& weight_grad, std::vector<T>& bias_grad);

// ---------------------------------------------------------------------------
// relu (subgradient 0 at exactly 0)

template <class T>
Tensor<T> relu_forward(const Tensor<T>& input);

// Gradient w.r.t. the input, given the relu output.
template <class T>
Tensor<T> relu_backward(const Tensor<T>& output, const Tensor<T>& out_grad);

// ---------------------------------------------------------------------------
// Losses

template <class T>
struct LossResult {
  T loss = T(0);
  std::vector<T> grad;
  std::vector<T> probs;  // softmax only
};

template <class T>
std::vector<T> softmax(std::span<const T> logits);

// Max-subtracted softmax; loss = -log p[label], grad = p - onehot(label).
template <class T>
LossResult<T> softmax_cross_entropy(std::span<const T> logits, int label);

// Sum over elements of 0.5 x^2 (|x| < 1) or |x| - 0.5.
template <class T>
LossResult<T> smooth_l1(std::span<const T> pred, std::span<const T> target);

// ---------------------------------------------------------------------------
// Optimizer

template <class T>
struct SgdState {
  std::vector<std::vector<T>> velocity;
};

// Averages accumulated gradients over accum_count micro-batches, applies
// one momentum update, then zeroes the gradients.
template <class T>
void sgd_step(std::span<Tensor<T>* const> params, SgdState<T>& state, double lr, double momentum, int accum_count);

// ---------------------------------------------------------------------------
// Finite-difference verification

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose perturbation crossed a kink
};

struct GradCheckOptions {
  double epsilon = 1e-3;
  // Coordinates checked per tensor; all when 0. A deterministic sample
  // otherwise.
  std::size_t max_per_tensor = 0;
  std::uint64_t seed = 0;
  // Gradient magnitudes below this are compared absolutely.
  double abs_floor = 1e-6;
};

// `loss` runs a forward pass and returns the scalar loss. `backward` runs
// forward + backward and leaves analytic gradients in each tensor's grad.
// `kink_signature`, when given, fingerprints the active pieces of the
// piecewise-linear layers (relu masks, pooling argmaxes); coordinates whose
// +eps and -eps evaluations differ in signature are skipped.
GradCheckResult grad_check(const std::function<double()>& loss, const std::function<void()>& backward,
                           std::span<Tensor<double>* const> tensors, const GradCheckOptions& options,
                           const std::function<std::uint64_t()>& kink_signature = {});

// ---------------------------------------------------------------------------
// Weight files: manifest.json (layer list + shapes) plus one little-endian
// float32 blob per tensor.

struct NamedTensor {
  std::string name;
  std::string kind;  // conv3d, dense, ...
  Tensor<float>* tensor;
};

void save_weights(const std::filesystem::path& dir, std::span<const NamedTensor> tensors,
                  const nlohmann::json& extra = {});
// Loads into already-shaped tensors; shapes must match the manifest.
nlohmann::json load_weights(const std::filesystem::path& dir, std::span<const NamedTensor> tensors);
// FNV-1a over names, shapes and raw float bytes.
std::uint64_t weights_digest(std::span<const NamedTensor> tensors);

}  // namespace deepcontext::nn
