#include "deepcontext/tensor_nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "deepcontext/io.hpp"
#include "deepcontext/kernels.hpp"
#include "deepcontext/util.hpp"

namespace deepcontext::nn {

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor dims must be positive, got " + shape_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

template <class T>
Tensor<T>::Tensor(std::vector<int> dims, T fill) : shape(std::move(dims)), values(shape_size(shape), fill) {}

template <class T>
void Tensor<T>::ensure_grad() {
  if (grad.size() != values.size()) grad.assign(values.size(), T(0));
}

template <class T>
void Tensor<T>::zero_grad() {
  grad.assign(values.size(), T(0));
}

template <class T>
Tensor<T> Tensor<T>::reshaped(std::vector<int> dims) const {
  if (shape_size(dims) != values.size()) throw ShapeError("reshape changes element count");
  Tensor<T> out;
  out.shape = std::move(dims);
  out.values = values;
  return out;
}

template <class T>
void init_uniform_fan_in(Tensor<T>& weight, int fan_in, std::mt19937_64& rng, double scale) {
  const double bound = std::sqrt(scale / std::max(1, fan_in));
  for (auto& v : weight.values) v = static_cast<T>(uniform(rng, -bound, bound));
}

// ---------------------------------------------------------------------------
// conv3d

namespace {

void require_rank(const std::vector<int>& shape, int rank, const char* what) {
  if (static_cast<int>(shape.size()) != rank)
    throw ShapeError(std::string(what) + " must have rank " + std::to_string(rank) + ", got " + shape_string(shape));
}

int pooled_extent(int in, int window, int stride, int padding, const char* what) {
  const int span = in + 2 * padding - window;
  if (stride < 1) throw ShapeError(std::string(what) + ": stride must be >= 1");
  if (span < 0) throw ShapeError(std::string(what) + ": window larger than padded input");
  if (span % stride != 0) throw ShapeError(std::string(what) + ": output size is not integral");
  return span / stride + 1;
}

struct ConvGeom {
  int c, d, h, w;     // input
  int k, kd, kh, kw;  // kernel
  int od, oh, ow;     // output
  int stride, pad;
  int col_rows() const { return c * kd * kh * kw; }
  int col_cols() const { return od * oh * ow; }
};

ConvGeom conv_geom(const std::vector<int>& in, const std::vector<int>& w, Conv3dParams p) {
  require_rank(in, 4, "conv3d input");
  require_rank(w, 5, "conv3d weight");
  if (w[1] != in[0]) throw ShapeError("conv3d weight channels do not match input");
  ConvGeom g{in[0], in[1], in[2], in[3], w[0], w[2], w[3], w[4], 0, 0, 0, p.stride, p.padding};
  g.od = pooled_extent(g.d, g.kd, p.stride, p.padding, "conv3d");
  g.oh = pooled_extent(g.h, g.kh, p.stride, p.padding, "conv3d");
  g.ow = pooled_extent(g.w, g.kw, p.stride, p.padding, "conv3d");
  return g;
}

template <class T>
void im2col(const ConvGeom& g, const T* in, std::vector<T>& col) {
  const std::size_t cols = static_cast<std::size_t>(g.col_cols());
  col.assign(static_cast<std::size_t>(g.col_rows()) * cols, T(0));
  std::size_t row = 0;
  for (int c = 0; c < g.c; ++c)
    for (int a = 0; a < g.kd; ++a)
      for (int b = 0; b < g.kh; ++b)
        for (int e = 0; e < g.kw; ++e, ++row) {
          T* dst = col.data() + row * cols;
          for (int z = 0; z < g.od; ++z) {
            const int iz = z * g.stride - g.pad + a;
            if (iz < 0 || iz >= g.d) continue;
            for (int y = 0; y < g.oh; ++y) {
              const int iy = y * g.stride - g.pad + b;
              if (iy < 0 || iy >= g.h) continue;
              const T* src = in + ((static_cast<std::size_t>(c) * g.d + iz) * g.h + iy) * g.w;
              T* out = dst + (static_cast<std::size_t>(z) * g.oh + y) * g.ow;
              for (int x = 0; x < g.ow; ++x) {
                const int ix = x * g.stride - g.pad + e;
                if (ix >= 0 && ix < g.w) out[x] = src[ix];
              }
            }
          }
        }
}

template <class T>
void col2im(const ConvGeom& g, const std::vector<T>& col, T* in_grad) {
  const std::size_t cols = static_cast<std::size_t>(g.col_cols());
  std::fill_n(in_grad, static_cast<std::size_t>(g.c) * g.d * g.h * g.w, T(0));
  std::size_t row = 0;
  for (int c = 0; c < g.c; ++c)
    for (int a = 0; a < g.kd; ++a)
      for (int b = 0; b < g.kh; ++b)
        for (int e = 0; e < g.kw; ++e, ++row) {
          const T* src = col.data() + row * cols;
          for (int z = 0; z < g.od; ++z) {
            const int iz = z * g.stride - g.pad + a;
            if (iz < 0 || iz >= g.d) continue;
            for (int y = 0; y < g.oh; ++y) {
              const int iy = y * g.stride - g.pad + b;
              if (iy < 0 || iy >= g.h) continue;
              T* dst = in_grad + ((static_cast<std::size_t>(c) * g.d + iz) * g.h + iy) * g.w;
              const T* s = src + (static_cast<std::size_t>(z) * g.oh + y) * g.ow;
              for (int x = 0; x < g.ow; ++x) {
                const int ix = x * g.stride - g.pad + e;
                if (ix >= 0 && ix < g.w) dst[ix] += s[x];
              }
            }
          }
        }
}

}  // namespace

std::array<int, 3> conv3d_output_dims(const std::vector<int>& in_shape, const std::vector<int>& w_shape,
                                      Conv3dParams p) {
  const ConvGeom g = conv_geom(in_shape, w_shape, p);
  return {g.od, g.oh, g.ow};
}

namespace detail {

template <class T>
Tensor<T> conv3d_forward_col(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                             Conv3dParams p, std::vector<T>& col) {
  const ConvGeom g = conv_geom(input.shape, weight.shape, p);
  if (bias.size() != static_cast<std::size_t>(g.k)) throw ShapeError("conv3d bias size mismatch");
  im2col(g, input.data(), col);
  Tensor<T> out({g.k, g.od, g.oh, g.ow});
  const int n = g.col_cols();
  kernels::gemm(false, false, g.k, n, g.col_rows(), weight.data(), g.col_rows(), col.data(), n, T(0), out.data(), n);
  for (int k = 0; k < g.k; ++k) {
    T* row = out.data() + static_cast<std::size_t>(k) * n;
    const T b = bias[static_cast<std::size_t>(k)];
    for (int i = 0; i < n; ++i) row[i] += b;
  }
  return out;
}

template <class T>
void conv3d_backward_col(const std::vector<int>& in_shape, const std::vector<T>& col, const Tensor<T>& weight,
                         const Tensor<T>& out_grad, Conv3dParams p, Tensor<T>* input_grad,
                         std::vector<T>& weight_grad, std::vector<T>& bias_grad) {
  const ConvGeom g = conv_geom(in_shape, weight.shape, p);
  const int n = g.col_cols();
  const int rows = g.col_rows();
  if (out_grad.size() != static_cast<std::size_t>(g.k) * n) throw ShapeError("conv3d output gradient mismatch");
  weight_grad.resize(weight.size(), T(0));
  bias_grad.resize(static_cast<std::size_t>(g.k), T(0));
  kernels::gemm(false, true, g.k, rows, n, out_grad.data(), n, col.data(), n, T(1), weight_grad.data(), rows);
  for (int k = 0; k < g.k; ++k) {
    const T* row = out_grad.data() + static_cast<std::size_t>(k) * n;
    T s = T(0);
    for (int i = 0; i < n; ++i) s += row[i];
    bias_grad[static_cast<std::size_t>(k)] += s;
  }
  if (input_grad) {
    thread_local std::vector<T> dcol;
    dcol.resize(static_cast<std::size_t>(rows) * n);
    kernels::gemm(true, false, rows, n, g.k, weight.data(), rows, out_grad.data(), n, T(0), dcol.data(), n);
    input_grad->shape = in_shape;
    input_grad->values.resize(shape_size(in_shape));
    col2im(g, dcol, input_grad->data());
  }
}

}  // namespace detail

template <class T>
Tensor<T> conv3d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, Conv3dParams p) {
  std::vector<T> col;
  return detail::conv3d_forward_col(input, weight, bias, p, col);
}

template <class T>
void conv3d_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& out_grad, Conv3dParams p,
                     Tensor<T>* input_grad, std::vector<T>& weight_grad, std::vector<T>& bias_grad) {
  const ConvGeom g = conv_geom(input.shape, weight.shape, p);
  std::vector<T> col;
  im2col(g, input.data(), col);
  detail::conv3d_backward_col(input.shape, col, weight, out_grad, p, input_grad, weight_grad, bias_grad);
}

// ---------------------------------------------------------------------------
// pooling

template <class T>
Tensor<T> maxpool3d_forward(const Tensor<T>& input, PoolParams p, std::vector<int>& argmax) {
  require_rank(input.shape, 4, "maxpool3d input");
  const int c = input.dim(0), d = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int od = pooled_extent(d, p.window, p.stride, 0, "maxpool3d");
  const int oh = pooled_extent(h, p.window, p.stride, 0, "maxpool3d");
  const int ow = pooled_extent(w, p.window, p.stride, 0, "maxpool3d");
  Tensor<T> out({c, od, oh, ow});
  argmax.assign(out.size(), -1);
  std::size_t o = 0;
  for (int ch = 0; ch < c; ++ch)
    for (int z = 0; z < od; ++z)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          int best_idx = -1;
          for (int a = 0; a < p.window; ++a)
            for (int b = 0; b < p.window; ++b) {
              const std::size_t base =
                  ((static_cast<std::size_t>(ch) * d + z * p.stride + a) * h + y * p.stride + b) * w + x * p.stride;
              for (int e = 0; e < p.window; ++e) {
                const T v = input.values[base + e];
                if (best_idx < 0 || v > best) {
                  best = v;
                  best_idx = static_cast<int>(base + e);
                }
              }
            }
          out.values[o] = best;
          argmax[o] = best_idx;
        }
  return out;
}

template <class T>
void maxpool_backward(const Tensor<T>& out_grad, const std::vector<int>& argmax, Tensor<T>& input_grad) {
  if (argmax.size() != out_grad.size()) throw ShapeError("pooling gradient / argmax size mismatch");
  for (std::size_t i = 0; i < argmax.size(); ++i)
    if (argmax[i] >= 0) input_grad.values[static_cast<std::size_t>(argmax[i])] += out_grad.values[i];
}

template <class T>
Tensor<T> roi_maxpool3d_forward(const Tensor<T>& feature, const RoiBox& roi, std::vector<int>& argmax, bool* outside,
                                int cells) {
  require_rank(feature.shape, 4, "roi_maxpool3d feature");
  if (cells < 1) throw ShapeError("roi_maxpool3d needs at least one cell");
  const int c = feature.dim(0);
  // Grid dims in x, y, z order.
  const std::array<int, 3> grid{feature.dim(3), feature.dim(2), feature.dim(1)};
  std::array<int, 3> start{}, count{};
  bool miss = false;
  for (int a = 0; a < 3; ++a) {
    if (!(roi.hi[a] >= roi.lo[a])) throw ShapeError("roi_maxpool3d: inverted ROI");
    start[a] = static_cast<int>(std::floor(roi.lo[a]));
    const int end = std::max(start[a], static_cast<int>(std::ceil(roi.hi[a])) - 1);
    count[a] = end - start[a] + 1;
    if (end < 0 || start[a] >= grid[a]) miss = true;
  }
  if (outside) *outside = miss;

  Tensor<T> out({c, cells, cells, cells});
  argmax.assign(out.size(), -1);
  if (miss) return out;

  // Bin edges along each axis, clipped to the grid.
  std::array<std::vector<std::pair<int, int>>, 3> bins;
  for (int a = 0; a < 3; ++a) {
    bins[a].resize(static_cast<std::size_t>(cells));
    for (int b = 0; b < cells; ++b) {
      const int lo = start[a] + static_cast<int>(std::floor(static_cast<double>(b) * count[a] / cells));
      const int hi = start[a] + static_cast<int>(std::ceil(static_cast<double>(b + 1) * count[a] / cells));
      bins[a][static_cast<std::size_t>(b)] = {std::clamp(lo, 0, grid[a]), std::clamp(hi, 0, grid[a])};
    }
  }
  const int fd = feature.dim(1), fh = feature.dim(2), fw = feature.dim(3);
  std::size_t o = 0;
  for (int ch = 0; ch < c; ++ch)
    for (int bz = 0; bz < cells; ++bz)
      for (int by = 0; by < cells; ++by)
        for (int bx = 0; bx < cells; ++bx, ++o) {
          const auto [z0, z1] = bins[2][static_cast<std::size_t>(bz)];
          const auto [y0, y1] = bins[1][static_cast<std::size_t>(by)];
          const auto [x0, x1] = bins[0][static_cast<std::size_t>(bx)];
          int best_idx = -1;
          T best = T(0);
          for (int z = z0; z < z1; ++z)
            for (int y = y0; y < y1; ++y)
              for (int x = x0; x < x1; ++x) {
                const std::size_t idx = ((static_cast<std::size_t>(ch) * fd + z) * fh + y) * fw + x;
                const T v = feature.values[idx];
                if (best_idx < 0 || v > best) {
                  best = v;
                  best_idx = static_cast<int>(idx);
                }
              }
          out.values[o] = best_idx < 0 ? T(0) : best;
          argmax[o] = best_idx;
        }
  return out;
}

// ---------------------------------------------------------------------------
// dense / relu

template <class T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(weight.shape, 2, "dense weight");
  const int m = weight.dim(0), n = weight.dim(1);
  if (input.size() != static_cast<std::size_t>(n)) throw ShapeError("dense input size mismatch");
  if (bias.size() != static_cast<std::size_t>(m)) throw ShapeError("dense bias size mismatch");
  Tensor<T> out({m});
  kernels::gemm(false, false, m, 1, n, weight.data(), n, input.data(), 1, T(0), out.data(), 1);
  for (int i = 0; i < m; ++i) out.values[static_cast<std::size_t>(i)] += bias.values[static_cast<std::size_t>(i)];
  return out;
}

template <class T>
void dense_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& out_grad,
                    Tensor<T>* input_grad, std::vector<T>& weight_grad, std::vector<T>& bias_grad) {
  const int m = weight.dim(0), n = weight.dim(1);
  if (out_grad.size() != static_cast<std::size_t>(m)) throw ShapeError("dense output gradient mismatch");
  weight_grad.resize(weight.size(), T(0));
  bias_grad.resize(static_cast<std::size_t>(m), T(0));
  // dW += dy x^T as an m x n rank-one update.
  kernels::gemm(false, false, m, n, 1, out_grad.data(), 1, input.data(), n, T(1), weight_grad.data(), n);
  for (int i = 0; i < m; ++i) bias_grad[static_cast<std::size_t>(i)] += out_grad.values[static_cast<std::size_t>(i)];
  if (input_grad) {
    input_grad->shape = input.shape;
    input_grad->values.resize(input.size());
    // dx^T = dy^T W, a 1 x n row.
    kernels::gemm(false, false, 1, n, m, out_grad.data(), m, weight.data(), n, T(0), input_grad->data(), n);
  }
}

template <class T>
Tensor<T> relu_forward(const Tensor<T>& input) {
  Tensor<T> out = input;
  for (auto& v : out.values) v = v > T(0) ? v : T(0);
  return out;
}

template <class T>
Tensor<T> relu_backward(const Tensor<T>& output, const Tensor<T>& out_grad) {
  Tensor<T> g = out_grad;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(output.values[i] > T(0))) g.values[i] = T(0);
  return g;
}

// ---------------------------------------------------------------------------
// losses

template <class T>
std::vector<T> softmax(std::span<const T> logits) {
  if (logits.empty()) throw ShapeError("softmax of an empty vector");
  const T mx = *std::max_element(logits.begin(), logits.end());
  std::vector<T> p(logits.size());
  T sum = T(0);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

template <class T>
LossResult<T> softmax_cross_entropy(std::span<const T> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw std::out_of_range("softmax_cross_entropy: label out of range");
  const T mx = *std::max_element(logits.begin(), logits.end());
  T sum = T(0);
  for (T v : logits) sum += std::exp(v - mx);
  LossResult<T> r;
  r.loss = -(logits[static_cast<std::size_t>(label)] - mx - std::log(sum));
  r.probs.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) r.probs[i] = std::exp(logits[i] - mx) / sum;
  r.grad = r.probs;
  r.grad[static_cast<std::size_t>(label)] -= T(1);
  return r;
}

template <class T>
LossResult<T> smooth_l1(std::span<const T> pred, std::span<const T> target) {
  if (pred.size() != target.size()) throw ShapeError("smooth_l1: shape mismatch");
  LossResult<T> r;
  r.grad.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T x = pred[i] - target[i];
    if (std::abs(x) < T(1)) {
      r.loss += T(0.5) * x * x;
      r.grad[i] = x;
    } else {
      r.loss += std::abs(x) - T(0.5);
      r.grad[i] = x > T(0) ? T(1) : T(-1);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// optimizer

template <class T>
void sgd_step(std::span<Tensor<T>* const> params, SgdState<T>& state, double lr, double momentum, int accum_count) {
  if (accum_count < 1) throw std::invalid_argument("sgd_step: accum_count must be >= 1");
  if (state.velocity.size() != params.size()) state.velocity.assign(params.size(), {});
  const T inv = T(1) / static_cast<T>(accum_count);
  const T mu = static_cast<T>(momentum);
  const T rate = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    auto& vel = state.velocity[i];
    if (vel.size() != p.size()) vel.assign(p.size(), T(0));
    if (!p.has_grad()) {
      p.zero_grad();
      continue;
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      vel[j] = mu * vel[j] + p.grad[j] * inv;
      p.values[j] -= rate * vel[j];
      p.grad[j] = T(0);
    }
  }
}

// ---------------------------------------------------------------------------
// grad check

GradCheckResult grad_check(const std::function<double()>& loss, const std::function<void()>& backward,
                           std::span<Tensor<double>* const> tensors, const GradCheckOptions& options,
                           const std::function<std::uint64_t()>& kink_signature) {
  for (auto* t : tensors) t->zero_grad();
  backward();
  std::vector<std::vector<double>> analytic;
  for (auto* t : tensors) analytic.push_back(t->grad);

  loss();
  const std::uint64_t base_sig = kink_signature ? kink_signature() : 0;

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    Tensor<double>& t = *tensors[ti];
    std::vector<std::size_t> coords(t.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_per_tensor > 0 && coords.size() > options.max_per_tensor) {
      for (std::size_t i = 0; i < options.max_per_tensor; ++i)
        std::swap(coords[i], coords[i + uniform_index(rng, coords.size() - i)]);
      coords.resize(options.max_per_tensor);
    }
    for (std::size_t idx : coords) {
      const double orig = t.values[idx];
      t.values[idx] = orig + options.epsilon;
      const double lp = loss();
      const std::uint64_t sp = kink_signature ? kink_signature() : 0;
      t.values[idx] = orig - options.epsilon;
      const double lm = loss();
      const std::uint64_t sm = kink_signature ? kink_signature() : 0;
      t.values[idx] = orig;
      if (sp != base_sig || sm != base_sig) {
        ++result.skipped;
        continue;
      }
      const double numeric = (lp - lm) / (2 * options.epsilon);
      const double a = analytic[ti][idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
      ++result.checked;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// weight files

void save_weights(const std::filesystem::path& dir, std::span<const NamedTensor> tensors, const nlohmann::json& extra) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "deepcontext-weights-v1";
  manifest["layers"] = nlohmann::json::array();
  for (const auto& nt : tensors) {
    const std::string file = nt.name + ".bin";
    manifest["layers"].push_back({{"name", nt.name}, {"kind", nt.kind}, {"shape", nt.tensor->shape}, {"file", file}});
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw io::IoError("cannot write " + (dir / file).string());
    out.write(reinterpret_cast<const char*>(nt.tensor->data()),
              static_cast<std::streamsize>(nt.tensor->size() * sizeof(float)));
  }
  if (!extra.is_null()) manifest["extra"] = extra;
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

nlohmann::json load_weights(const std::filesystem::path& dir, std::span<const NamedTensor> tensors) {
  const auto manifest = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
  const auto& layers = manifest.at("layers");
  for (const auto& nt : tensors) {
    const auto it = std::find_if(layers.begin(), layers.end(),
                                 [&](const nlohmann::json& l) { return l.at("name").get<std::string>() == nt.name; });
    if (it == layers.end()) throw io::IoError("weights in " + dir.string() + " lack tensor '" + nt.name + "'");
    const auto shape = it->at("shape").get<std::vector<int>>();
    if (shape != nt.tensor->shape)
      throw ShapeError("tensor '" + nt.name + "' has shape " + shape_string(shape) + ", expected " +
                       shape_string(nt.tensor->shape));
    std::ifstream in(dir / it->at("file").get<std::string>(), std::ios::binary);
    in.read(reinterpret_cast<char*>(nt.tensor->data()), static_cast<std::streamsize>(nt.tensor->size() * sizeof(float)));
    if (!in) throw io::IoError("truncated weight blob for '" + nt.name + "'");
  }
  return manifest.value("extra", nlohmann::json{});
}

std::uint64_t weights_digest(std::span<const NamedTensor> tensors) {
  std::uint64_t h = fnv1a64("");
  for (const auto& nt : tensors) {
    h = fnv1a64(nt.name, h);
    h = fnv1a64(shape_string(nt.tensor->shape), h);
    h = fnv1a64_bytes(std::as_bytes(std::span<const float>(nt.tensor->values)), h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// instantiations

#define DC_INSTANTIATE(T)                                                                                        \
  template struct Tensor<T>;                                                                                     \
  template void init_uniform_fan_in<T>(Tensor<T>&, int, std::mt19937_64&, double);                               \
  template Tensor<T> detail::conv3d_forward_col<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                                   Conv3dParams, std::vector<T>&);                               \
  template void detail::conv3d_backward_col<T>(const std::vector<int>&, const std::vector<T>&, const Tensor<T>&, \
                                               const Tensor<T>&, Conv3dParams, Tensor<T>*, std::vector<T>&,      \
                                               std::vector<T>&);                                                 \
  template Tensor<T> conv3d_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Conv3dParams);      \
  template void conv3d_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Conv3dParams,           \
                                   Tensor<T>*, std::vector<T>&, std::vector<T>&);                                \
  template Tensor<T> maxpool3d_forward<T>(const Tensor<T>&, PoolParams, std::vector<int>&);                      \
  template void maxpool_backward<T>(const Tensor<T>&, const std::vector<int>&, Tensor<T>&);                      \
  template Tensor<T> roi_maxpool3d_forward<T>(const Tensor<T>&, const RoiBox&, std::vector<int>&, bool*, int);  \
  template Tensor<T> dense_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                     \
  template void dense_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*,              \
                                  std::vector<T>&, std::vector<T>&);                                             \
  template Tensor<T> relu_forward<T>(const Tensor<T>&);                                                          \
  template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);                                       \
  template std::vector<T> softmax<T>(std::span<const T>);                                                        \
  template LossResult<T> softmax_cross_entropy<T>(std::span<const T>, int);                                      \
  template LossResult<T> smooth_l1<T>(std::span<const T>, std::span<const T>);                                   \
  template void sgd_step<T>(std::span<Tensor<T>* const>, SgdState<T>&, double, double, int);

DC_INSTANTIATE(float)
DC_INSTANTIATE(double)

#undef DC_INSTANTIATE

}  // namespace deepcontext::nn
