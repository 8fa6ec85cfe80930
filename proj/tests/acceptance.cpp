// Acceptance checks. One PASS/FAIL line per criterion, numbered 1-9.
//   acceptance [--work DIR] [criteria...]
// With no criteria listed, all nine run. 7 and 9 train the full desk-scale
// model (9 does it twice) and take a while. --informational N prints N but
// keeps it out of the exit status.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "deepcontext/encoders.hpp"
#include "deepcontext/eval.hpp"
#include "deepcontext/hybrid_synth.hpp"
#include "deepcontext/io.hpp"
#include "deepcontext/kernels.hpp"
#include "deepcontext/networks.hpp"
#include "deepcontext/pipeline.hpp"
#include "deepcontext/scene_gen.hpp"
#include "deepcontext/training.hpp"
#include "deepcontext/tsdf.hpp"
#include "oracles.hpp"

using namespace deepcontext;
namespace fs = std::filesystem;
using nn::Tensor;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0, double e = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d, e);
  return buf;
}

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  if (a.shape != b.shape) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

int rand_int(std::mt19937_64& rng, int lo, int hi) { return lo + static_cast<int>(uniform_index(rng, hi - lo + 1)); }

// ---------------------------------------------------------------------------
// 1. layer oracles

Outcome criterion1() {
  const auto start = Clock::now();
  std::mt19937_64 rng(1001);
  const int cases = 100;
  double worst = 0.0;
  for (int t = 0; t < cases; ++t) {
    const int c = rand_int(rng, 1, 3), k = rand_int(rng, 1, 4), ks = rand_int(rng, 1, 3);
    const int stride = rand_int(rng, 1, 2), pad = rand_int(rng, 0, 1);
    const int base = ks - 2 * pad, m0 = base >= 1 ? 0 : (1 - base + stride - 1) / stride;
    const auto ext = [&] { return base + stride * (m0 + rand_int(rng, 0, 4)); };
    const int d = ext(), h = ext(), w = ext();
    auto in = oracle::random_tensor({c, d, h, w}, rng);
    auto wt = oracle::random_tensor({k, c, ks, ks, ks}, rng);
    auto b = oracle::random_tensor({k}, rng);
    worst = std::max(worst, max_abs_diff(nn::conv3d_forward(in, wt, b, {stride, pad}),
                                         oracle::conv3d(in, wt, b, stride, pad)));
  }
  for (int t = 0; t < cases; ++t) {
    const int win = rand_int(rng, 1, 3);
    auto in = oracle::random_tensor(
        {rand_int(rng, 1, 3), win * rand_int(rng, 1, 3), win * rand_int(rng, 1, 3), win * rand_int(rng, 1, 3)}, rng);
    std::vector<int> arg;
    worst = std::max(worst, max_abs_diff(nn::maxpool3d_forward(in, {win, win}, arg), oracle::maxpool3d(in, win, win)));
  }
  int roi_cases = 0;
  while (roi_cases < cases) {
    auto f = oracle::random_tensor({2, rand_int(rng, 1, 5), rand_int(rng, 1, 6), rand_int(rng, 1, 6)}, rng);
    nn::RoiBox roi;
    for (std::size_t a = 0; a < 3; ++a) {
      roi.lo[a] = uniform(rng, -2.0, 4.0);
      roi.hi[a] = roi.lo[a] + uniform(rng, 0.0, 5.0);
    }
    std::vector<int> arg;
    bool outside = false;
    const auto got = nn::roi_maxpool3d_forward(f, roi, arg, &outside, nn::kRoiCells);
    if (outside) continue;
    worst = std::max(worst, max_abs_diff(got, oracle::roi_maxpool3d(f, roi, nn::kRoiCells)));
    ++roi_cases;
  }
  for (int t = 0; t < cases; ++t) {
    const int n = rand_int(rng, 1, 60), m = rand_int(rng, 1, 40);
    auto x = oracle::random_tensor({n}, rng), w = oracle::random_tensor({m, n}, rng), b = oracle::random_tensor({m}, rng);
    worst = std::max(worst, max_abs_diff(nn::dense_forward(x, w, b), oracle::dense(x, w, b)));
  }
  const double secs = seconds_since(start);
  return {worst < 1e-10 && secs < 60.0, fmt("400 cases, max abs error %.3g, %.1f s", worst, secs)};
}

// ---------------------------------------------------------------------------
// 2. gradient checks

nn::GradCheckResult check_chain(const std::function<double()>& loss, const std::function<void()>& backward,
                                std::vector<Tensor<double>*> tensors, const std::function<std::uint64_t()>& sig,
                                std::size_t per_tensor) {
  for (auto* t : tensors) t->ensure_grad();
  nn::GradCheckOptions opt;
  opt.epsilon = 1e-3;
  opt.max_per_tensor = per_tensor;
  return nn::grad_check(loss, backward, tensors, opt, sig);
}

Outcome criterion2() {
  std::mt19937_64 rng(2002);
  double worst = 0.0;
  std::size_t checked = 0;
  std::ostringstream parts;
  const auto record = [&](const char* name, const nn::GradCheckResult& r) {
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    parts << " " << name << "=" << fmt("%.1e", r.max_rel_error);
  };

  {  // conv3d, strided and padded, with a linear read-out
    auto x = oracle::random_tensor({2, 5, 5, 5}, rng), w = oracle::random_tensor({3, 2, 3, 3, 3}, rng),
         b = oracle::random_tensor({3}, rng);
    const nn::Conv3dParams p{2, 1};
    const auto probe = nn::conv3d_forward(x, w, b, p);
    const auto r = oracle::random_tensor(probe.shape, rng);
    const auto loss = [&] {
      const auto y = nn::conv3d_forward(x, w, b, p);
      double s = 0;
      for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
      return s;
    };
    const auto back = [&] {
      w.zero_grad();
      b.zero_grad();
      Tensor<double> dx;
      nn::conv3d_backward(x, w, r, p, &dx, w.grad, b.grad);
      x.grad = dx.values;
    };
    record("conv3d", check_chain(loss, back, {&x, &w, &b}, {}, 0));
  }
  {  // dense
    auto x = oracle::random_tensor({17}, rng), w = oracle::random_tensor({9, 17}, rng), b = oracle::random_tensor({9}, rng);
    const auto r = oracle::random_tensor({9}, rng);
    const auto loss = [&] {
      const auto y = nn::dense_forward(x, w, b);
      double s = 0;
      for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
      return s;
    };
    const auto back = [&] {
      w.zero_grad();
      b.zero_grad();
      Tensor<double> dx;
      nn::dense_backward(x, w, r, &dx, w.grad, b.grad);
      x.grad = dx.values;
    };
    record("dense", check_chain(loss, back, {&x, &w, &b}, {}, 0));
  }
  {  // maxpool, relu, roi pooling and cross entropy on a learned feature
    auto x = oracle::random_tensor({2, 6, 6, 6}, rng), w = oracle::random_tensor({2, 2, 3, 3, 3}, rng, -0.5, 0.5),
         b = oracle::random_tensor({2}, rng);
    auto w2 = oracle::random_tensor({4, 2 * 27 + 2 * 27}, rng, -0.3, 0.3), b2 = oracle::random_tensor({4}, rng);
    const nn::RoiBox roi{{0.3, 0.2, 0.1}, {2.6, 2.9, 2.2}};
    struct F {
      Tensor<double> conv, act, pooled, roi;
      std::vector<int> pool_arg, roi_arg;
      Tensor<double> cat, out;
    };
    const auto fwd = [&](F& f) {
      f.conv = nn::conv3d_forward(x, w, b, {1, 1});
      f.act = nn::relu_forward(f.conv);
      f.roi = nn::roi_maxpool3d_forward(f.act, roi, f.roi_arg, nullptr, 3);
      f.pooled = nn::maxpool3d_forward(f.act, {2, 2}, f.pool_arg);
      f.cat = Tensor<double>({static_cast<int>(f.pooled.size() + f.roi.size())});
      std::copy(f.pooled.values.begin(), f.pooled.values.end(), f.cat.values.begin());
      std::copy(f.roi.values.begin(), f.roi.values.end(), f.cat.values.begin() + static_cast<long>(f.pooled.size()));
      f.out = nn::dense_forward(f.cat, w2, b2);
      return nn::softmax_cross_entropy<double>(f.out.values, 1);
    };
    const auto loss = [&] {
      F f;
      return fwd(f).loss;
    };
    const auto back = [&] {
      for (auto* t : {&x, &w, &b, &w2, &b2}) t->zero_grad();
      F f;
      const auto ce = fwd(f);
      Tensor<double> dout({4});
      dout.values = ce.grad;
      Tensor<double> dcat;
      nn::dense_backward(f.cat, w2, dout, &dcat, w2.grad, b2.grad);
      Tensor<double> dpool(f.pooled.shape), droi(f.roi.shape);
      std::copy(dcat.values.begin(), dcat.values.begin() + static_cast<long>(f.pooled.size()), dpool.values.begin());
      std::copy(dcat.values.begin() + static_cast<long>(f.pooled.size()), dcat.values.end(), droi.values.begin());
      Tensor<double> dact(f.act.shape);
      nn::maxpool_backward(dpool, f.pool_arg, dact);
      nn::maxpool_backward(droi, f.roi_arg, dact);
      const auto dconv = nn::relu_backward(f.act, dact);
      Tensor<double> dx;
      nn::conv3d_backward(x, w, dconv, {1, 1}, &dx, w.grad, b.grad);
      x.grad = dx.values;
    };
    const auto sig = [&] {
      F f;
      fwd(f);
      std::uint64_t h = 1;
      for (int a : f.pool_arg) h = mix_seed(h, static_cast<std::uint64_t>(a));
      for (int a : f.roi_arg) h = mix_seed(h, static_cast<std::uint64_t>(a + 1));
      for (double v : f.conv.values) h = mix_seed(h, v > 0);
      return h;
    };
    record("pool+relu+roi", check_chain(loss, back, {&x, &w, &b, &w2, &b2}, sig, 60));
  }
  {  // composed context network with its training loss
    GridConfig g;
    g.dims = {16, 16, 8};
    g.voxel_size = 0.4;
    g.origin = Vec3(-3.2, -3.2, -0.9);
    SceneTemplate t;
    t.name = "office_area";
    t.major_category = "desk";
    t.anchors.push_back({0, "desk", OrientedBox3(Vec3(0, 0, 0), Vec3(1.4, 0.7, 0.75), 0.0)});
    t.anchors.push_back({1, "chair", OrientedBox3(Vec3(0.1, -0.8, -0.1), Vec3(0.5, 0.5, 0.9), 0.0)});
    t.anchors.push_back({2, "lamp", OrientedBox3(Vec3(9, 9, 0), Vec3(0.3, 0.3, 0.5), 0.0)});  // off the grid
    TrunkConfig tc;
    tc.channels = {2, 3, 3};
    tc.hidden = 6;
    ContextConfig cc;
    cc.roi_channels = {2, 2};
    cc.hidden = 5;
    ContextNet<double> net(g, t, tc, cc, 3);
    auto x = oracle::random_tensor({1, 8, 16, 16}, rng);
    ContextTargets targets;
    targets.exists = {true, false, true};
    targets.offsets = {{0.1, -0.2, 0.05, 0.1, 0.0, -0.1}, {}, {0.3, 0.2, 0.1, 0, 0, 0}};
    std::vector<Tensor<double>*> tensors;
    for (auto& p : net.params()) tensors.push_back(p.tensor);
    const auto run = [&](typename ContextNet<double>::Cache& c, std::vector<std::array<double, kAnchorOutputs>>& grad) {
      net.forward(x, c);
      std::vector<std::array<double, kAnchorOutputs>> out;
      std::vector<bool> outside;
      for (const auto& a : c.anchors) {
        out.push_back(a.out);
        outside.push_back(a.outside);
      }
      return context_loss<double>(out, outside, targets, 1.0, grad);
    };
    const auto loss = [&] {
      typename ContextNet<double>::Cache c;
      std::vector<std::array<double, kAnchorOutputs>> grad;
      return run(c, grad);
    };
    const auto back = [&] {
      for (auto* p : tensors) p->zero_grad();
      typename ContextNet<double>::Cache c;
      std::vector<std::array<double, kAnchorOutputs>> grad;
      run(c, grad);
      net.backward(c, grad);
    };
    const auto sig = [&] {
      typename ContextNet<double>::Cache c;
      net.forward(x, c);
      std::uint64_t h = net.signature(c);
      for (std::size_t a = 0; a < c.anchors.size(); ++a)
        if (targets.exists[a])
          for (std::size_t k = 0; k < 6; ++k) h = mix_seed(h, std::abs(c.anchors[a].out[2 + k] - targets.offsets[a][k]) < 1.0);
      return h;
    };
    record("context_net", check_chain(loss, back, tensors, sig, 40));
  }
  return {worst < 1e-4 && checked > 500,
          fmt("%.0f coordinates, max rel error %.3g;", static_cast<double>(checked), worst) + parts.str()};
}

// ---------------------------------------------------------------------------
// 3. matching

Outcome criterion3() {
  std::mt19937_64 rng(3003);
  const std::vector<std::string> pool{"bed", "chair", "lamp", "nightstand", "wall"};
  int exact = 0;
  const int instances = 500;
  for (int n = 0; n < instances; ++n) {
    SceneTemplate t;
    t.name = "sleeping_area";
    t.major_category = "bed";
    SceneAnnotation a;
    int id = 0;
    for (const auto& cat : pool) {
      const int na = rand_int(rng, cat == "bed" ? 1 : 0, 7), no = rand_int(rng, cat == "bed" ? 1 : 0, 7);
      for (int i = 0; i < na; ++i)
        t.anchors.push_back({id++, cat,
                             OrientedBox3(Vec3(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, 0, 1)),
                                          Vec3(uniform(rng, 0.2, 2), uniform(rng, 0.2, 2), uniform(rng, 0.2, 1)), 0.0)});
      for (int i = 0; i < no; ++i)
        a.objects.push_back({cat, OrientedBox3(Vec3(uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, 0, 1)),
                                               Vec3(uniform(rng, 0.2, 2), uniform(rng, 0.2, 2), uniform(rng, 0.2, 1)),
                                               uniform(rng, -kPi, kPi))});
    }
    const TemplateGroundTruth gt = match_annotation_to_template(a, t);

    // Exhaustive minimum per category; the winning pairs are then summed in
    // category-name order, object order, as the matcher does.
    double total = 0.0;
    std::vector<std::string> cats = pool;
    std::sort(cats.begin(), cats.end());
    for (const auto& cat : cats) {
      std::vector<int> objs, anchors;
      for (std::size_t i = 0; i < a.objects.size(); ++i)
        if (a.objects[i].category == cat) objs.push_back(static_cast<int>(i));
      for (std::size_t j = 0; j < t.anchors.size(); ++j)
        if (t.anchors[j].category == cat) anchors.push_back(static_cast<int>(j));
      if (objs.empty() || anchors.empty()) continue;
      std::vector<std::vector<double>> cost(objs.size(), std::vector<double>(anchors.size()));
      for (std::size_t r = 0; r < objs.size(); ++r) {
        const OrientedBox3 b = canonicalize_box(gt.alignment.apply(a.objects[static_cast<std::size_t>(objs[r])].box));
        for (std::size_t c = 0; c < anchors.size(); ++c) {
          const auto& an = t.anchors[static_cast<std::size_t>(anchors[c])].box;
          cost[r][c] = (b.center - an.center).norm() + (b.size - an.size).norm();
        }
      }
      // permutation over the larger side; remember the best pairing
      const bool rows_small = objs.size() <= anchors.size();
      const std::size_t small = rows_small ? objs.size() : anchors.size(), large = rows_small ? anchors.size() : objs.size();
      std::vector<std::size_t> perm(large), best_perm;
      std::iota(perm.begin(), perm.end(), 0);
      double best = std::numeric_limits<double>::infinity();
      do {
        double s = 0.0;
        for (std::size_t i = 0; i < small; ++i) s += rows_small ? cost[i][perm[i]] : cost[perm[i]][i];
        if (s < best) {
          best = s;
          best_perm = perm;
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
      std::vector<int> col_of(objs.size(), -1);
      for (std::size_t i = 0; i < small; ++i) {
        if (rows_small)
          col_of[i] = static_cast<int>(best_perm[i]);
        else
          col_of[best_perm[i]] = static_cast<int>(i);
      }
      for (std::size_t r = 0; r < objs.size(); ++r)
        if (col_of[r] >= 0) total += cost[r][static_cast<std::size_t>(col_of[r])];
    }
    exact += gt.total_cost == total;
  }
  return {exact == instances, fmt("%.0f of %.0f instances equal", exact, instances)};
}

// ---------------------------------------------------------------------------
// 4. geometry

Outcome criterion4() {
  std::mt19937_64 rng(4004);
  double worst_iou = 0.0;
  int pairs = 0;
  while (pairs < 50) {
    const OrientedBox3 a(Vec3(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3), uniform(rng, 0, 0.3)),
                         Vec3(uniform(rng, 0.4, 2), uniform(rng, 0.4, 2), uniform(rng, 0.4, 1.5)), uniform(rng, -kPi, kPi));
    const OrientedBox3 b(Vec3(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3), uniform(rng, 0, 0.3)),
                         Vec3(uniform(rng, 0.4, 2), uniform(rng, 0.4, 2), uniform(rng, 0.4, 1.5)), uniform(rng, -kPi, kPi));
    const double exact = box_iou_3d(a, b);
    if (exact <= 0.0) continue;
    worst_iou = std::max(worst_iou, std::abs(exact - oracle::iou_monte_carlo(a, b, 1000000, 5000 + pairs)));
    ++pairs;
  }

  bool shape_exact = true;
  for (int t = 0; t < 50; ++t) {
    PointCloud p, q;
    for (int i = rand_int(rng, 1, 300); i > 0; --i) p.points.emplace_back(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 0, 2));
    for (int i = rand_int(rng, 1, 300); i > 0; --i) q.points.emplace_back(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 0, 2));
    for (auto isa : {kernels::Isa::scalar, kernels::Isa::avx2}) {
      if (!kernels::isa_supported(isa)) continue;
      const auto before = kernels::active_isa();
      kernels::force_isa(isa);
      shape_exact &= shape_distance(p, q) == oracle::shape_distance(p, q);
      kernels::force_isa(before);
    }
  }

  // Planted planes: axis aligned and slanted, rendered then back-projected.
  const CameraIntrinsics cam = CameraIntrinsics::desk_default();
  double worst_plane = 0.0;
  for (int t = 0; t < 10; ++t) {
    const double z0 = uniform(rng, 1.0, 5.0), sx = uniform(rng, -0.5, 0.5), sy = uniform(rng, -0.5, 0.5);
    const auto zf = [&](double x, double y) { return z0 + sx * x + sy * y; };
    TriMesh m;
    const double r = 8.0;
    m.vertices = {Vec3(-r, -r, zf(-r, -r)), Vec3(r, -r, zf(r, -r)), Vec3(r, r, zf(r, r)), Vec3(-r, r, zf(-r, r))};
    m.triangles = {{0, 1, 2}, {0, 2, 3}};
    for (const auto& p : backproject_depth(render_mesh_depth(m, cam), cam).points)
      worst_plane = std::max(worst_plane, std::abs(p.z() - zf(p.x(), p.y())));
  }
  const bool pass = worst_iou <= 5e-3 && shape_exact && worst_plane <= 1e-6;
  return {pass, fmt("iou vs Monte Carlo %.2e over 50 pairs; shape distance exact %.0f; plane round trip %.2e m", worst_iou,
                    shape_exact, worst_plane)};
}

// ---------------------------------------------------------------------------
// 5. encoders

Outcome criterion5() {
  double worst_yaw = 0.0;
  for (int i = 0; i <= 720000; ++i) {
    const double yaw = -2 * kPi + i * (4 * kPi / 720000);
    worst_yaw = std::max(worst_yaw, angle_distance(bin_to_yaw(yaw_to_bin(yaw)), yaw));
  }
  std::mt19937_64 rng(5005);
  double worst_axis = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const Vec3 o(uniform(rng, -2.5, 2.5), uniform(rng, -2.5, 2.5), uniform(rng, -1.5, 1.0));
    worst_axis = std::max(worst_axis, (cell_to_offset(offset_to_cell(o)) - o).cwiseAbs().maxCoeff());
  }
  std::set<int> cells;
  for (int c = 0; c < kTranslationCells; ++c) cells.insert(offset_to_cell(cell_to_offset(c)));
  const int zero = offset_to_cell(Vec3::Zero());
  const bool pass = worst_yaw <= 5.0 * kPi / 180 + 1e-12 && worst_axis <= 0.25 + 1e-12 && zero == 363 &&
                    kTranslationCells == 726 && cells.size() == 726;
  return {pass, fmt("max yaw error %.4f deg, max axis error %.4f m, zero offset cell %.0f, %.0f distinct cells",
                    worst_yaw * 180 / kPi, worst_axis, zero, static_cast<double>(cells.size()))};
}

// ---------------------------------------------------------------------------
// 6. tsdf on the full-resolution grid

Outcome criterion6() {
  const CameraIntrinsics cam = CameraIntrinsics::desk_default();
  const GridConfig base = default_grid();
  const auto plane = [&](double z0, double slope) {
    TriMesh m;
    m.vertices = {Vec3(-6, -6, z0 - 6 * slope), Vec3(6, -6, z0 + 6 * slope), Vec3(6, 6, z0 + 6 * slope),
                  Vec3(-6, 6, z0 - 6 * slope)};
    m.triangles = {{0, 1, 2}, {0, 2, 3}};
    return render_mesh_depth(m, cam);
  };
  const auto in_view = [&](const Vec3& c) {
    const double u = cam.fx * c.x() / c.z() + cam.cx, w = cam.fy * c.y() / c.z() + cam.cy;
    return c.z() > 0 && u >= -0.5 && w >= -0.5 && u < cam.width - 0.5 && w < cam.height - 0.5;
  };
  bool in_range = true, saturated = true;
  long beyond = 0, crossings = 0;
  double worst_cross = 0.0;
  for (const double z0 : {1.5, 2.5, 3.5}) {
    const GridConfig g = base.centered_at(Vec3(0, 0, 2.5));
    const TsdfVolume v = compute_tsdf(plane(z0, 0.0), cam, Rigid3::Identity(), g);
    for (int z = 0; z < g.dims[2]; ++z)
      for (int y = 0; y < g.dims[1]; ++y)
        for (int x = 0; x < g.dims[0]; ++x) {
          const float s = v.at(x, y, z);
          in_range &= s >= -1.0f && s <= 1.0f;
          const double gap = z0 - g.voxel_center(x, y, z).z();
          if (std::abs(gap) > g.truncation + 1e-9) {
            // only voxels that project into the image see the plane
            if (!in_view(g.voxel_center(x, y, z))) continue;
            saturated &= s == (gap > 0 ? 1.0f : -1.0f);
            ++beyond;
          }
        }
  }
  for (const double slope : {0.2, -0.4, 0.6}) {
    const double z0 = 2.4;
    const GridConfig g = base.centered_at(Vec3(0, 0, 2.5));
    const TsdfVolume v = compute_tsdf(plane(z0, slope), cam, Rigid3::Identity(), g);
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x)
        for (int z = 0; z + 1 < g.dims[2]; ++z) {
          const float a = v.at(x, y, z), b = v.at(x, y, z + 1);
          in_range &= a >= -1.0f && a <= 1.0f;
          if (!(a > 0 && b <= 0)) continue;
          // +1 -> -1 steps where the column enters the view frustum are not surfaces
          if (!in_view(g.voxel_center(x, y, z)) || !in_view(g.voxel_center(x, y, z + 1))) continue;
          const Vec3 ca = g.voxel_center(x, y, z);
          const double za = ca.z(), zb = g.voxel_center(x, y, z + 1).z();
          const double crossing = za + (zb - za) * a / (a - b);
          worst_cross = std::max(worst_cross, std::abs(crossing - (z0 + slope * ca.x())));
          ++crossings;
          break;
        }
  }
  const bool pass = in_range && saturated && beyond > 0 && crossings > 1000 && worst_cross <= base.voxel_size;
  return {pass, fmt("grid 128x128x64 at 0.05 m; range ok %.0f; %.0f voxels beyond truncation all saturated %.0f; "
                    "%.0f zero crossings, worst %.4f m",
                    in_range, static_cast<double>(beyond), saturated, static_cast<double>(crossings), worst_cross)};
}

// ---------------------------------------------------------------------------
// 8. inference time on the desk grid

Outcome criterion8() {
  const TrainingConfig tc = desk_training_config();
  GeneratorConfig gen;
  gen.seed = 8008;
  std::vector<GeneratedScene> scenes;
  std::vector<SceneAnnotation> anns;
  for (std::size_t i = 0; i < 40; ++i) {
    scenes.push_back(generate_scene(gen, scene_seed(gen.seed, i)));
    anns.push_back(scenes.back().annotation);
  }
  ModelSet m;
  m.grid = tc.grid;
  m.templates = learn_templates(anns, 8);
  for (const auto& t : m.templates) m.context.emplace(t.name, ContextNet<float>(context_grid(m.grid), t, tc.trunk, tc.context, 5));
  m.classifier = ClassifierNet<float>(m.grid, tc.trunk, 4, 1);
  m.rotation = ClassifierNet<float>(m.grid, tc.trunk, kRotationBins, 2);
  m.translation = ClassifierNet<float>(m.grid, tc.trunk, kTranslationCells, 3);
  m.classifier.head_b.values[0] = 50.0f;  // always accept, so the context net runs

  double worst = 0.0, total = 0.0;
  int accepted = 0;
  const int n = 10;
  for (int i = 0; i < n; ++i) {
    const auto& s = scenes[static_cast<std::size_t>(i)];
    const auto t0 = Clock::now();
    const SceneParse p = parse_depth_image(s.depth, s.annotation.camera, s.annotation.world_from_camera, m);
    const double secs = seconds_since(t0);
    worst = std::max(worst, secs);
    total += secs;
    accepted += !p.rejected;
  }
  return {worst <= 2.0 && accepted == n,
          fmt("%.0f scenes, all accepted %.0f, mean %.3f s, max %.3f s per scene", n, accepted == n, total / n, worst)};
}

// ---------------------------------------------------------------------------
// 7 and 9. full pipeline

struct E2eRun {
  EvalReport report;
  std::uint64_t digest = 0;
  std::string report_json;
  double seconds = 0.0;
};

constexpr std::uint64_t kE2eSeed = 11;
constexpr std::size_t kE2eScenes = 500;

E2eRun run_e2e(const fs::path& work) {
  const auto start = Clock::now();
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path data = work / "data", models = work / "models";
  fs::create_directories(data);
  fs::create_directories(models);

  GeneratorConfig gen;
  gen.seed = kE2eSeed;
  generate_dataset(gen, kE2eScenes, data, 1);

  auto train = load_splits(data, {"train", "val"}, 1);
  std::vector<SceneAnnotation> anns;
  for (const auto& s : train) anns.push_back(s.annotation);
  const auto templates = learn_templates(anns, kE2eSeed);

  TrainingConfig cfg = desk_training_config();
  cfg.seed = kE2eSeed;
  cfg.synthesis.seed = kE2eSeed;
  const ModelRepository repo = procedural_repository(4, mix_seed(kE2eSeed, 1));
  std::vector<TrainingScene> scenes;
  for (auto& s : train) scenes.push_back({s.id, std::move(s.depth), std::move(s.annotation)});
  const TrainingData td = prepare_training_data(std::move(scenes), &repo, cfg.synthesis, 1);
  E2eRun run;
  run.digest = train_staged(td, templates, cfg, models).digest;

  std::vector<EvalScene> test;
  for (auto& s : load_splits(data, {"test"}, 1)) test.push_back({s.id, std::move(s.depth), std::move(s.annotation)});
  const ModelSet loaded = load_models(models, templates);
  const auto parses = run_inference(loaded, test, 1);
  run.report = evaluate_parses(parses, test, templates);
  run.report_json = to_json(run.report).dump(2);
  io::write_text(work / "report.json", run.report_json + "\n");
  run.seconds = seconds_since(start);
  return run;
}

Outcome criterion7(const E2eRun& r) {
  const EvalReport& e = r.report;
  const AlignmentStats& a = e.alignment.at("all");
  const bool pass = e.num_scenes == 100 && e.template_accuracy >= 0.95 && a.rotation_accuracy_sym >= 0.90 &&
                    a.translation_error <= 0.5 && e.map >= 0.70 && e.understanding.rr <= e.understanding.rg &&
                    r.seconds <= 30 * 60;
  std::ostringstream os;
  os << fmt("%.0f test scenes; template acc %.3f; rotation sym %.3f; translation %.3f m; ", e.num_scenes,
            e.template_accuracy, a.rotation_accuracy_sym, a.translation_error)
     << fmt("mAP@0.25 %.3f; Rr %.3f <= Rg %.3f; rejection %.2f; %.1f min", e.map, e.understanding.rr,
            e.understanding.rg, e.rejection_rate, r.seconds / 60);
  return {pass, os.str()};
}

Outcome criterion9(const E2eRun& a, const E2eRun& b) {
  const bool same = a.digest == b.digest && a.report_json == b.report_json;
  char buf[128];
  std::snprintf(buf, sizeof buf, "digests %016llx / %016llx, report json %s", static_cast<unsigned long long>(a.digest),
                static_cast<unsigned long long>(b.digest), a.report_json == b.report_json ? "identical" : "differs");
  return {same, buf};
}

void print(int n, const Outcome& o) {
  std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance checks");
  std::string work = (fs::temp_directory_path() / "deepcontext_acceptance").string();
  std::vector<int> which;
  app.add_option("--work", work, "Scratch directory for the end-to-end runs")->capture_default_str();
  std::vector<int> informational;
  app.add_option("criteria", which, "Criteria to run (1-9); all when omitted")->check(CLI::Range(1, 9));
  app.add_option("--informational", informational, "Criteria printed but left out of the exit status")
      ->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);
  if (which.empty()) which = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  const std::set<int> sel(which.begin(), which.end());

  int failed = 0;
  const std::set<int> info(informational.begin(), informational.end());
  const auto report = [&](int n, const Outcome& o) {
    print(n, o);
    failed += !o.pass && !info.count(n);
  };
  const std::vector<std::pair<int, std::function<Outcome()>>> quick{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
      {5, criterion5}, {6, criterion6}, {8, criterion8}};
  for (const auto& [n, f] : quick)
    if (sel.count(n)) report(n, f());
  if (sel.count(7) || sel.count(9)) {
    const E2eRun first = run_e2e(fs::path(work) / "run1");
    if (sel.count(7)) report(7, criterion7(first));
    if (sel.count(9)) report(9, criterion9(first, run_e2e(fs::path(work) / "run2")));
  }
  return failed == 0 ? 0 : 1;
}
