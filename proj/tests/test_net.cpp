#include <gtest/gtest.h>

#include <random>

#include "nsf/loss.hpp"
#include "nsf/net.hpp"
#include "nsf/volume.hpp"
#include "test_support.hpp"

using namespace nsf;

namespace {

Architecture small_arch(int width = 32) { return {4, width, 30.0}; }

Vec3d random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return {u(rng), u(rng), u(rng)};
}

}  // namespace

TEST(NetInit, SameSeedSameParameters) {
  const auto a = init_stream_net<float>(small_arch(), 7);
  const auto b = init_stream_net<float>(small_arch(), 7);
  EXPECT_TRUE(a == b);
}

TEST(NetInit, DifferentSeedsDiffer) {
  const auto a = init_stream_net<float>(small_arch(), 7);
  const auto b = init_stream_net<float>(small_arch(), 8);
  EXPECT_FALSE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
}

TEST(NetInit, ShapesChain) {
  const Architecture arch{4, 16, 30.0};
  const auto shapes = layer_shapes(arch);
  ASSERT_EQ(shapes.size(), 6u);
  EXPECT_EQ(shapes[0].rows, 16);
  EXPECT_EQ(shapes[0].cols, 3);
  for (int l = 1; l <= 4; ++l) {
    EXPECT_EQ(shapes[static_cast<std::size_t>(l)].rows, 16);
    EXPECT_EQ(shapes[static_cast<std::size_t>(l)].cols, 16);
  }
  EXPECT_EQ(shapes[5].rows, 1);
  EXPECT_EQ(shapes[5].cols, 16);
  EXPECT_EQ(param_count(arch), 16u * 3 + 16 + 4 * (16u * 16 + 16) + 16 + 1);
}

TEST(NetInit, RejectsOddHiddenLayers) {
  EXPECT_THROW(init_stream_net<float>({3, 16, 30.0}, 1), UsageError);
  EXPECT_THROW(init_stream_net<float>({2, 0, 30.0}, 1), UsageError);
}

TEST(NetInit, DefaultArchitectureOutputSpreadIsModerate) {
  const auto net = init_stream_net<float>(Architecture{}, 2024);
  std::mt19937_64 rng(3);
  std::vector<Vec3f> pts(1000);
  for (auto& p : pts) p = random_point(rng).cast<float>();
  std::vector<float> f(pts.size());
  forward_batch<float>(net, pts, f);
  double mean = 0, sq = 0;
  for (float v : f) mean += v;
  mean /= static_cast<double>(f.size());
  for (float v : f) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(f.size()));
  EXPECT_GE(sd, 0.1);
  EXPECT_LE(sd, 3.0);
}

TEST(NetForward, ZeroHeadGivesBias) {
  auto net = init_stream_net<float>(small_arch(), 1);
  const std::size_t head = net.head_index();
  std::fill(net.weights(head), net.weights(head) + net.shapes()[head].weight_count(), 0.0f);
  *net.bias(head) = 0.625f;
  std::mt19937_64 rng(5);
  for (int n = 0; n < 20; ++n) {
    EXPECT_EQ(forward(net, random_point(rng).cast<float>()), 0.625f);
    EXPECT_EQ(forward_with_grad(net, random_point(rng).cast<float>()).grad, Vec3f{});
  }
}

TEST(NetForward, RepeatedEvaluationIsIdentical) {
  const auto net = init_stream_net<float>(small_arch(), 1);
  const Vec3f x{0.1f, -0.4f, 0.7f};
  EXPECT_EQ(forward(net, x), forward(net, x));
}

TEST(NetForward, BatchEqualsPointwiseBitExact) {
  const auto net = init_stream_net<float>(small_arch(48), 11);
  std::mt19937_64 rng(12);
  std::vector<Vec3f> pts(37);
  for (auto& p : pts) p = random_point(rng).cast<float>();
  std::vector<float> f(pts.size()), fg(pts.size());
  std::vector<Vec3f> g(pts.size());
  forward_batch<float>(net, pts, f);
  forward_with_grad_batch<float>(net, pts, fg, g);
  // Reversed order must not matter either.
  std::vector<Vec3f> rev(pts.rbegin(), pts.rend());
  std::vector<float> frev(pts.size());
  forward_batch<float>(net, rev, frev);
  for (std::size_t s = 0; s < pts.size(); ++s) {
    const auto single = forward_with_grad(net, pts[s]);
    EXPECT_EQ(f[s], forward(net, pts[s]));
    EXPECT_EQ(fg[s], f[s]);
    EXPECT_EQ(single.value, f[s]);
    EXPECT_EQ(single.grad, g[s]);
    EXPECT_EQ(frev[pts.size() - 1 - s], f[s]);
  }
}

TEST(NetForward, NonFiniteParametersRaise) {
  auto net = init_stream_net<float>(small_arch(), 1);
  net.params()[5] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(forward(net, Vec3f{0, 0, 0}), NumericError);
}

TEST(NetGradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto net = init_stream_net<double>(small_arch(32 + 8 * trial), 100 + static_cast<std::uint64_t>(trial));
    for (int n = 0; n < 40; ++n) {
      const Vec3d x = random_point(rng);
      const Vec3d fd = testing_support::fd_input_gradient(net, x, 1e-4);
      worst = std::max(worst, testing_support::componentwise_rel_error(forward_with_grad(net, x).grad, fd));
    }
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(NetGradient, TwoLayerClosedForm) {
  // No hidden layers: f = w . sin(omega (W0 x + b0)) + c, so
  // grad f = omega W0^T (w o cos(omega (W0 x + b0))).
  const auto net = init_stream_net<double>({0, 8, 30.0}, 4);
  const Vec3d x{0.3, -0.2, 0.55};
  const double* W0 = net.weights(0);
  const double* b0 = net.bias(0);
  const double* w = net.weights(1);
  Vec3d expect{};
  double value = *net.bias(1);
  for (int i = 0; i < 8; ++i) {
    const double z = 30.0 * (W0[i] * x.x + W0[8 + i] * x.y + W0[16 + i] * x.z + b0[i]);
    value += w[i] * std::sin(z);
    for (std::size_t j = 0; j < 3; ++j) expect[j] += w[i] * std::cos(z) * 30.0 * W0[j * 8 + static_cast<std::size_t>(i)];
  }
  const auto got = forward_with_grad(net, x);
  EXPECT_NEAR(got.value, value, 1e-12);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(got.grad[j], expect[j], 1e-10 * std::max(1.0, std::abs(expect[j])));
}

TEST(NetGradient, GradientFieldIsIrrotational) {
  // A low-frequency net so that a 16^3 grid resolves the gradient field.
  const auto net = init_stream_net<double>({2, 16, 1.0}, 21);
  constexpr int n = 16;
  const Dims d = cube(n);
  Grid<Vec3d> g(d);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) g.at(i, j, k) = forward_with_grad(net, voxel_coord(d, i, j, k)).grad;
  const double h = axis_spacing(n);
  double worst = 0.0;
  for (int k = 1; k < n - 1; ++k)
    for (int j = 1; j < n - 1; ++j)
      for (int i = 1; i < n - 1; ++i) {
        auto d_dx = [&](std::size_t c) { return (g.at(i + 1, j, k)[c] - g.at(i - 1, j, k)[c]) / (2 * h); };
        auto d_dy = [&](std::size_t c) { return (g.at(i, j + 1, k)[c] - g.at(i, j - 1, k)[c]) / (2 * h); };
        auto d_dz = [&](std::size_t c) { return (g.at(i, j, k + 1)[c] - g.at(i, j, k - 1)[c]) / (2 * h); };
        const Vec3d c{d_dy(2) - d_dz(1), d_dz(0) - d_dx(2), d_dx(1) - d_dy(0)};
        worst = std::max(worst, norm(c));
      }
  EXPECT_LE(worst, 5e-3);
}

TEST(NetGradient, ZeroHiddenLayersReduceToTwoLayerForm) {
  // Zero hidden weights and biases make every residual block the identity,
  // leaving f = w . sin(omega (W0 x + b0)) + c.
  auto net = init_stream_net<double>({4, 8, 30.0}, 6);
  for (std::size_t l = 1; l < net.head_index(); ++l) {
    const auto& s = net.shapes()[l];
    std::fill(net.weights(l), net.weights(l) + s.size(), 0.0);
  }
  const Vec3d x{-0.45, 0.1, 0.8};
  const double* W0 = net.weights(0);
  const double* b0 = net.bias(0);
  const double* w = net.weights(net.head_index());
  Vec3d expect{};
  for (int i = 0; i < 8; ++i) {
    const double z = 30.0 * (W0[i] * x.x + W0[8 + i] * x.y + W0[16 + i] * x.z + b0[i]);
    for (std::size_t j = 0; j < 3; ++j) expect[j] += w[i] * std::cos(z) * 30.0 * W0[j * 8 + static_cast<std::size_t>(i)];
  }
  const Vec3d got = forward_with_grad(net, x).grad;
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(got[j], expect[j], 1e-10 * std::max(1.0, std::abs(expect[j])));
}
