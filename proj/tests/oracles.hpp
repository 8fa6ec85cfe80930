#pragma once
// Brute-force reference implementations shared by the unit tests and the
// acceptance binary. Each one follows the definition directly, without the
// tricks (im2col, gemm, precomputed bins, assignment solvers) of the code
// under test.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "deepcontext/geometry.hpp"
#include "deepcontext/templates.hpp"
#include "deepcontext/tensor_nn.hpp"
#include "deepcontext/util.hpp"

namespace oracle {

using deepcontext::nn::Tensor;

// Direct 7-deep loop, zero padding.
inline Tensor<double> conv3d(const Tensor<double>& in, const Tensor<double>& w, const Tensor<double>& b, int stride,
                             int pad) {
  const int C = in.dim(0), D = in.dim(1), H = in.dim(2), W = in.dim(3);
  const int K = w.dim(0), kd = w.dim(2), kh = w.dim(3), kw = w.dim(4);
  const int od = (D + 2 * pad - kd) / stride + 1, oh = (H + 2 * pad - kh) / stride + 1,
            ow = (W + 2 * pad - kw) / stride + 1;
  Tensor<double> out({K, od, oh, ow});
  for (int k = 0; k < K; ++k)
    for (int z = 0; z < od; ++z)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          double s = b[static_cast<std::size_t>(k)];
          for (int c = 0; c < C; ++c)
            for (int dz = 0; dz < kd; ++dz)
              for (int dy = 0; dy < kh; ++dy)
                for (int dx = 0; dx < kw; ++dx) {
                  const int iz = z * stride - pad + dz, iy = y * stride - pad + dy, ix = x * stride - pad + dx;
                  if (iz < 0 || iy < 0 || ix < 0 || iz >= D || iy >= H || ix >= W) continue;
                  s += in[((static_cast<std::size_t>(c) * D + iz) * H + iy) * W + ix] *
                       w[(((static_cast<std::size_t>(k) * C + c) * kd + dz) * kh + dy) * kw + dx];
                }
          out[((static_cast<std::size_t>(k) * od + z) * oh + y) * ow + x] = s;
        }
  return out;
}

inline Tensor<double> maxpool3d(const Tensor<double>& in, int window, int stride) {
  const int C = in.dim(0), D = in.dim(1), H = in.dim(2), W = in.dim(3);
  const int od = (D - window) / stride + 1, oh = (H - window) / stride + 1, ow = (W - window) / stride + 1;
  Tensor<double> out({C, od, oh, ow});
  for (int c = 0; c < C; ++c)
    for (int z = 0; z < od; ++z)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          double m = -std::numeric_limits<double>::infinity();
          for (int dz = 0; dz < window; ++dz)
            for (int dy = 0; dy < window; ++dy)
              for (int dx = 0; dx < window; ++dx)
                m = std::max(m, in[((static_cast<std::size_t>(c) * D + z * stride + dz) * H + y * stride + dy) * W +
                                   x * stride + dx]);
          out[((static_cast<std::size_t>(c) * od + z) * oh + y) * ow + x] = m;
        }
  return out;
}

// Scans every voxel and tests bin membership from the definition: the ROI
// spans integer voxels floor(lo)..max(floor(lo), ceil(hi)-1); bin b of n
// voxels covers [floor(b n / cells), ceil((b+1) n / cells)).
inline Tensor<double> roi_maxpool3d(const Tensor<double>& f, const deepcontext::nn::RoiBox& roi, int cells) {
  const int C = f.dim(0), D = f.dim(1), H = f.dim(2), W = f.dim(3);
  const int dims[3] = {W, H, D};
  int start[3], n[3];
  for (int a = 0; a < 3; ++a) {
    start[a] = static_cast<int>(std::floor(roi.lo[a]));
    n[a] = std::max(start[a], static_cast<int>(std::ceil(roi.hi[a])) - 1) - start[a] + 1;
  }
  const auto in_bin = [&](int a, int b, int v) {
    const int rel = v - start[a];
    return rel >= static_cast<int>(std::floor(double(b) * n[a] / cells)) &&
           rel < static_cast<int>(std::ceil(double(b + 1) * n[a] / cells)) && v >= 0 && v < dims[a];
  };
  Tensor<double> out({C, cells, cells, cells});
  for (int c = 0; c < C; ++c)
    for (int bz = 0; bz < cells; ++bz)
      for (int by = 0; by < cells; ++by)
        for (int bx = 0; bx < cells; ++bx) {
          bool any = false;
          double m = 0.0;
          for (int z = 0; z < D; ++z)
            for (int y = 0; y < H; ++y)
              for (int x = 0; x < W; ++x) {
                if (!in_bin(0, bx, x) || !in_bin(1, by, y) || !in_bin(2, bz, z)) continue;
                const double v = f[((static_cast<std::size_t>(c) * D + z) * H + y) * W + x];
                if (!any || v > m) m = v;
                any = true;
              }
          out[((static_cast<std::size_t>(c) * cells + bz) * cells + by) * cells + bx] = any ? m : 0.0;
        }
  return out;
}

inline Tensor<double> dense(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b) {
  const int m = w.dim(0), n = w.dim(1);
  Tensor<double> out({m});
  for (int i = 0; i < m; ++i) {
    double s = b[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) s += w[static_cast<std::size_t>(i) * n + j] * x[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = s;
  }
  return out;
}

// Minimum total cost of assigning rows to columns (every row of the smaller
// side matched), by enumerating all permutations of the larger side.
inline double assignment_min(const std::vector<std::vector<double>>& cost) {
  const std::size_t r = cost.size(), c = r ? cost[0].size() : 0;
  if (r == 0 || c == 0) return 0.0;
  const bool rows_small = r <= c;
  const std::size_t small = rows_small ? r : c, large = rows_small ? c : r;
  std::vector<std::size_t> perm(large);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < small; ++i) s += rows_small ? cost[i][perm[i]] : cost[perm[i]][i];
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Fraction of uniform samples in the union bounding region inside both
// boxes, scaled to IoU.
inline double iou_monte_carlo(const deepcontext::OrientedBox3& a, const deepcontext::OrientedBox3& b, int samples,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  deepcontext::Vec3 lo = deepcontext::Vec3::Constant(1e9), hi = deepcontext::Vec3::Constant(-1e9);
  for (const auto* box : {&a, &b}) {
    const double r = 0.5 * std::hypot(box->size.x(), box->size.y());
    lo = lo.cwiseMin(box->center - deepcontext::Vec3(r, r, box->size.z() / 2));
    hi = hi.cwiseMax(box->center + deepcontext::Vec3(r, r, box->size.z() / 2));
  }
  long in_a = 0, in_b = 0, in_both = 0;
  for (int i = 0; i < samples; ++i) {
    deepcontext::Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = deepcontext::uniform(rng, lo[k], hi[k]);
    const bool ia = a.contains(p), ib = b.contains(p);
    in_a += ia;
    in_b += ib;
    in_both += ia && ib;
  }
  const double uni = static_cast<double>(in_a + in_b - in_both);
  return uni > 0 ? in_both / uni : 0.0;
}

// Symmetric mean-of-min distance with two plain loops.
inline double shape_distance(const deepcontext::PointCloud& p, const deepcontext::PointCloud& q) {
  const auto one_way = [](const deepcontext::PointCloud& from, const deepcontext::PointCloud& to) {
    double sum = 0.0;
    for (const auto& x : from.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : to.points) {
        const double dx = x.x() - y.x(), dy = x.y() - y.y(), dz = x.z() - y.z();
        best = std::min(best, (dx * dx + dy * dy) + dz * dz);
      }
      sum += std::sqrt(best);
    }
    return sum / static_cast<double>(from.size());
  };
  return one_way(p, q) + one_way(q, p);
}

// All-points AP written out from the ranked list: for each recall level
// reached by a true positive, the best precision at that recall or later.
inline double average_precision(const std::vector<bool>& tp, int num_gt) {
  if (num_gt == 0) return 0.0;
  double ap = 0.0;
  int hits = 0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    if (!tp[i]) continue;
    ++hits;
    double best = 0.0;
    int h = hits - 1;
    for (std::size_t j = i; j < tp.size(); ++j) {
      if (tp[j]) ++h;
      best = std::max(best, static_cast<double>(h) / static_cast<double>(j + 1));
    }
    ap += best / num_gt;
  }
  return ap;
}

inline Tensor<double> random_tensor(std::vector<int> shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values) v = deepcontext::uniform(rng, lo, hi);
  return t;
}

}  // namespace oracle
