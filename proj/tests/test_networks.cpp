#include <doctest.h>

#include "deepcontext/networks.hpp"
#include "deepcontext/training.hpp"
#include "oracles.hpp"

using namespace deepcontext;

namespace {

GridConfig tiny_grid() {
  GridConfig g;
  g.dims = {16, 16, 8};
  g.voxel_size = 0.4;
  g.origin = Vec3(-3.2, -3.2, -0.9);
  return g;
}

SceneTemplate tiny_template() {
  SceneTemplate t;
  t.name = "office_area";
  t.major_category = "desk";
  t.anchors.push_back({0, "desk", OrientedBox3(Vec3(0, 0, 0), Vec3(1.4, 0.7, 0.75), 0.0)});
  t.anchors.push_back({1, "chair", OrientedBox3(Vec3(0.1, -0.8, -0.1), Vec3(0.5, 0.5, 0.9), 0.0)});
  t.anchors.push_back({2, "lamp", OrientedBox3(Vec3(9, 9, 0), Vec3(0.3, 0.3, 0.5), 0.0)});  // off the grid
  return t;
}

TrunkConfig tiny_trunk() {
  TrunkConfig c;
  c.channels = {2, 3, 3};
  c.hidden = 6;
  return c;
}

ContextConfig tiny_context() {
  ContextConfig c;
  c.roi_channels = {2, 2};
  c.hidden = 5;
  return c;
}

}  // namespace

TEST_SUITE("networks") {

TEST_CASE("composed context network passes finite differences with its loss") {
  const GridConfig g = tiny_grid();
  ContextNet<double> net(g, tiny_template(), tiny_trunk(), tiny_context(), 3);
  std::mt19937_64 rng(41);
  auto x = oracle::random_tensor({1, 8, 16, 16}, rng);
  ContextTargets targets;
  targets.exists = {true, false, true};
  targets.offsets = {{0.1, -0.2, 0.05, 0.1, 0.0, -0.1}, {}, {0.3, 0.2, 0.1, 0, 0, 0}};
  std::vector<Param<double>> params = net.params();
  std::vector<nn::Tensor<double>*> tensors;
  for (auto& p : params) {
    p.tensor->ensure_grad();
    tensors.push_back(p.tensor);
  }

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
  const auto backward = [&] {
    for (auto* t : tensors) t->zero_grad();
    typename ContextNet<double>::Cache c;
    std::vector<std::array<double, kAnchorOutputs>> grad;
    run(c, grad);
    net.backward(c, grad);
  };
  const auto signature = [&] {
    typename ContextNet<double>::Cache c;
    net.forward(x, c);
    std::uint64_t h = net.signature(c);
    // smooth L1 pieces
    for (std::size_t a = 0; a < c.anchors.size(); ++a)
      if (targets.exists[a])
        for (int k = 0; k < 6; ++k)
          h = mix_seed(h, std::abs(c.anchors[a].out[2 + k] - targets.offsets[a][k]) < 1.0);
    return h;
  };
  typename ContextNet<double>::Cache probe;
  net.forward(x, probe);
  REQUIRE(probe.anchors.size() == 3u);
  CHECK_FALSE(probe.anchors[0].outside);
  CHECK(probe.anchors[2].outside);

  nn::GradCheckOptions opt;
  opt.epsilon = 1e-3;
  opt.max_per_tensor = 40;
  const auto r = nn::grad_check(loss, backward, tensors, opt, signature);
  CHECK(r.checked > 200);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("classifier network passes finite differences") {
  const GridConfig g = tiny_grid();
  ClassifierNet<double> net(g, tiny_trunk(), 5, 9);
  std::mt19937_64 rng(42);
  auto x = oracle::random_tensor({1, 8, 16, 16}, rng);
  std::vector<nn::Tensor<double>*> tensors;
  for (auto& p : net.params()) {
    p.tensor->ensure_grad();
    tensors.push_back(p.tensor);
  }
  const auto loss = [&] {
    typename ClassifierNet<double>::Cache c;
    net.forward(x, c);
    return nn::softmax_cross_entropy<double>(c.logits.values, 3).loss;
  };
  const auto backward = [&] {
    for (auto* t : tensors) t->zero_grad();
    typename ClassifierNet<double>::Cache c;
    net.forward(x, c);
    const auto ce = nn::softmax_cross_entropy<double>(c.logits.values, 3);
    nn::Tensor<double> d({5});
    d.values = ce.grad;
    net.backward(c, d);
  };
  const auto signature = [&] {
    typename ClassifierNet<double>::Cache c;
    net.forward(x, c);
    return net.signature(c);
  };
  nn::GradCheckOptions opt;
  opt.max_per_tensor = 40;
  const auto r = nn::grad_check(loss, backward, tensors, opt, signature);
  CHECK(r.checked > 150);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("same seed, same weights; copy_params moves the trunk") {
  const GridConfig g = tiny_grid();
  ClassifierNet<float> a(g, tiny_trunk(), 4, 1), b(g, tiny_trunk(), 4, 1), c(g, tiny_trunk(), 4, 2);
  CHECK(nn::weights_digest(named_tensors(a.params())) == nn::weights_digest(named_tensors(b.params())));
  CHECK(nn::weights_digest(named_tensors(a.params())) != nn::weights_digest(named_tensors(c.params())));
  ClassifierNet<double> d(g, tiny_trunk(), 4, 3);
  copy_params<double, float>(d.params(), a.params());
  CHECK(static_cast<float>(d.head_w.values[0]) == a.head_w.values[0]);
  ClassifierNet<float> wrong(g, tiny_trunk(), 5, 1);
  CHECK_THROWS(copy_params<float, float>(wrong.params(), a.params()));
}

TEST_CASE("anchor rois are in feature cells") {
  const GridConfig g = tiny_grid();
  const nn::RoiBox r = anchor_roi(OrientedBox3(Vec3(0, 0, 0.1), Vec3(1.6, 0.8, 0.8), 0.0), g, 8);
  // cell = 3.2 m; origin (-3.2, -3.2, -0.9)
  CHECK(r.lo[0] == doctest::Approx((-0.8 + 3.2) / 3.2));
  CHECK(r.hi[1] == doctest::Approx((0.4 + 3.2) / 3.2));
  CHECK(r.lo[2] == doctest::Approx((-0.3 + 0.9) / 3.2));
}

TEST_CASE("configs validate") {
  TrunkConfig t;
  t.hidden = 0;
  CHECK_THROWS(t.validate());
  CHECK(trunk_config_from_json(to_json(tiny_trunk())).channels == tiny_trunk().channels);
  CHECK(context_config_from_json(to_json(tiny_context())).hidden == 5);
}

}
