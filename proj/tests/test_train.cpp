#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "nsf/analytic.hpp"
#include "nsf/train.hpp"

using namespace nsf;

TEST(Adam, ZeroGradientLeavesParametersButCountsTheStep) {
  std::vector<float> p{1.0f, -2.0f, 3.0f}, g(3, 0.0f);
  AdamState<float> st(3);
  adam_step<float>(p, g, st, 0.1);
  EXPECT_EQ(p, (std::vector<float>{1.0f, -2.0f, 3.0f}));
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> p{0.0}, g{1.0};
  AdamState<double> st(1);
  adam_step<double>(p, g, st, 0.1);
  EXPECT_NEAR(p[0], -0.1 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, IdenticalStatesGiveIdenticalUpdates) {
  std::vector<float> a{0.5f, -0.25f}, b = a, g{0.3f, -0.7f};
  AdamState<float> sa(2), sb(2);
  for (int i = 0; i < 5; ++i) {
    adam_step<float>(a, g, sa, 1e-3);
    adam_step<float>(b, g, sb, 1e-3);
  }
  EXPECT_EQ(a, b);
  std::vector<float> wrong(3);
  EXPECT_THROW(adam_step<float>(a, wrong, sa, 1e-3), UsageError);
}

TEST(Schedule, TenfoldDecayEveryPeriod) {
  const LrSchedule s;
  EXPECT_DOUBLE_EQ(s.at(0), 5e-5);
  EXPECT_DOUBLE_EQ(s.at(3332), 5e-5);
  EXPECT_NEAR(s.at(3333), 5e-6, 1e-20);
  EXPECT_NEAR(s.at(9999), 5e-8, 1e-22);
  double prev = s.at(0);
  for (int it = 1; it < 10000; ++it) {
    EXPECT_LE(s.at(it), prev);
    prev = s.at(it);
  }
}

TEST(Batch, DefaultSizeFollowsVoxelCount) {
  EXPECT_EQ(default_batch_size(128u * 128u * 128u), 10000);
  EXPECT_EQ(default_batch_size(32u * 32u * 32u), 1024);
  EXPECT_EQ(default_batch_size(500000), 5000);
}

TEST(Batch, SingleLiveVoxelIsAlwaysDrawn) {
  VectorField f(cube(3));
  f.at(1, 2, 0) = {0.0f, 0.0f, 1.0f};
  std::mt19937_64 rng(1);
  const auto b = sample_batch<float>(f, rng, 4);
  ASSERT_EQ(b.points.size(), 4u);
  for (std::size_t s = 0; s < 4; ++s) {
    EXPECT_EQ(b.points[s], voxel_coord(f.dims(), 1, 2, 0).cast<float>());
    EXPECT_EQ(b.vectors[s], (Vec3f{0, 0, 1}));
  }
}

TEST(Batch, PointsAreLatticePointsWithStoredVectors) {
  const VectorField f = gen_analytic("abc", cube(6));
  std::mt19937_64 rng(2);
  const auto b = sample_batch<float>(f, rng, 500);
  for (std::size_t s = 0; s < b.points.size(); ++s) {
    bool found = false;
    for (std::size_t n = 0; n < f.size() && !found; ++n)
      found = f.coord(n).cast<float>() == b.points[s] && f[n] == b.vectors[s];
    EXPECT_TRUE(found);
  }
}

TEST(Batch, DegenerateFieldIsDataError) {
  const VectorField f(cube(3));
  std::mt19937_64 rng(1);
  EXPECT_THROW(sample_batch<float>(f, rng, 4), DataError);
}

TEST(Rake, SegmentIsEvenlySpaced) {
  RakeSpec r;
  r.kind = RakeSpec::Kind::segment;
  r.start = {-1, 0, 0};
  r.end = {1, 0, 0};
  r.sample_count = 3;
  const auto pts = sample_rake(r);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[0], (Vec3d{-1, 0, 0}));
  EXPECT_EQ(pts[1], (Vec3d{0, 0, 0}));
  EXPECT_EQ(pts[2], (Vec3d{1, 0, 0}));
}

TEST(Rake, ZeroRadiusCircleCollapsesToCentre) {
  const auto pts = sample_rake(RakeSpec::parse("circle:0.1,0.2,0.3,0,0,1,0,16"));
  ASSERT_EQ(pts.size(), 16u);
  for (const auto& p : pts) EXPECT_EQ(p, (Vec3d{0.1, 0.2, 0.3}));
}

TEST(Rake, CircleLiesOnItsPlane) {
  const auto pts = sample_rake(RakeSpec::parse("circle:0,0,0,1,1,0,0.5,64"));
  for (const auto& p : pts) {
    EXPECT_NEAR(norm(p), 0.5, 1e-12);
    EXPECT_NEAR(p.x + p.y, 0.0, 1e-12);
  }
}

TEST(Rake, OutsideDomainIsUsageError) {
  EXPECT_THROW(sample_rake(RakeSpec::parse("segment:1.5,0,0,0,0,0")), UsageError);
  EXPECT_THROW(sample_rake(RakeSpec::parse("circle:0.9,0,0,0,0,1,0.5")), UsageError);
  EXPECT_THROW(RakeSpec::parse("line:0,0,0"), UsageError);
}

TEST(Rake, JsonAndInlineFormsAgree) {
  const RakeSpec a = RakeSpec::parse("segment:-0.5,0,0,0.5,0.25,0,32");
  const RakeSpec b = RakeSpec::parse(a.to_json().dump());
  EXPECT_EQ(sample_rake(a), sample_rake(b));
  EXPECT_EQ(sample_rake(RakeSpec::parse("segment:0,0,0,1,1,1")).size(), 1024u);
}

TEST(Config, JsonRoundTripAndOverlay) {
  TrainConfig c;
  c.loss = LossKind::pss_seeds;
  c.arch = {2, 64, 15.0};
  c.iterations = 123;
  c.batch_size = 77;
  c.rake = RakeSpec::parse("segment:0,0,0,0.5,0.5,0.5,8");
  c.seed = 42;
  const TrainConfig d = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(d.to_json(), c.to_json());

  TrainConfig e;
  e.merge_json({{"lr", 1e-3}, {"unrelated_key", 1}});
  EXPECT_DOUBLE_EQ(e.schedule.lr0, 1e-3);
  EXPECT_EQ(e.iterations, 10000);
  EXPECT_THROW(e.merge_json({{"loss", "nope"}}), UsageError);
  EXPECT_THROW(e.merge_json({{"iterations", "many"}}), UsageError);
}

TEST(Config, SeedLossWithoutRakeIsRejected) {
  TrainConfig c;
  c.loss = LossKind::perp_seeds;
  EXPECT_THROW(c.validate(), UsageError);
  const VectorField f = gen_analytic("abc", cube(8));
  EXPECT_THROW(train<float>(f, c), UsageError);
}

namespace {

TrainConfig tiny_config(LossKind kind, int iterations) {
  TrainConfig c;
  c.loss = kind;
  c.arch = {2, 16, 30.0};
  c.iterations = iterations;
  c.batch_size = 256;
  c.seed = 3;
  c.log_every = 10;
  if (uses_seeds(kind)) c.rake = RakeSpec::parse("segment:-0.5,0,0,0.5,0,0,16");
  return c;
}

}  // namespace

TEST(Train, SameSeedIsBitIdentical) {
  const VectorField f = gen_analytic("abc", cube(10));
  const auto a = train<float>(f, tiny_config(LossKind::perp_seeds, 30));
  const auto b = train<float>(f, tiny_config(LossKind::perp_seeds, 30));
  EXPECT_TRUE(a.net == b.net);
  auto other = tiny_config(LossKind::perp_seeds, 30);
  other.seed = 4;
  EXPECT_FALSE(train<float>(f, other).net == a.net);
}

TEST(Train, HistoryAndProgress) {
  const VectorField f = gen_analytic("rigid_rotation", cube(10));
  std::vector<int> seen;
  const auto r = train<float>(f, tiny_config(LossKind::pss, 25), nullptr,
                              [&](const StepRecord& s) { seen.push_back(s.iteration); });
  ASSERT_EQ(r.history.size(), 25u);
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    EXPECT_EQ(r.history[i].iteration, static_cast<int>(i));
    EXPECT_GE(r.history[i].loss.main, 0.0);
    EXPECT_LE(r.history[i].loss.main, 1.0);
  }
  EXPECT_EQ(seen, (std::vector<int>{0, 10, 20, 24}));
  const std::string csv = history_csv(r.history);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,lr,loss_total,loss_main,loss_seeds,wall_s");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 26);
}

TEST(Train, PerpLossFallsTenfoldOnRigidRotation) {
  const VectorField f = gen_analytic("rigid_rotation", cube(12));
  auto c = tiny_config(LossKind::perp, 400);
  c.arch = {2, 32, 30.0};
  const auto r = train<float>(f, c);
  EXPECT_LE(r.history.back().loss.main, 0.1 * r.history.front().loss.main);
}

TEST(Train, NonFiniteParametersAbortWithDiagnostics) {
  const VectorField f = gen_analytic("abc", cube(8));
  auto c = tiny_config(LossKind::perp, 5);
  c.schedule.lr0 = 1e30;
  c.adam.epsilon = 0.0;
  try {
    train<float>(f, c);
    FAIL() << "expected a numeric error";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration"), std::string::npos);
  }
}
