#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "nsf/analytic.hpp"
#include "nsf/raw_io.hpp"
#include "nsf/volume.hpp"
#include "test_support.hpp"

using namespace nsf;

namespace {

template <class F>
VectorField make_field(Dims d, F f) {
  VectorField out(d);
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = f(out.coord(n)).template cast<float>();
  return out;
}

std::size_t nearest_voxel(const VectorField& field, const Vec3d& p) {
  std::size_t best = 0;
  double dist = 1e300;
  for (std::size_t n = 0; n < field.size(); ++n) {
    const double d = norm(field.coord(n) - p);
    if (d < dist) dist = d, best = n;
  }
  return best;
}

bool interior(const Dims& d, std::size_t n) {
  const int i = static_cast<int>(n % static_cast<std::size_t>(d.nx));
  const int j = static_cast<int>((n / static_cast<std::size_t>(d.nx)) % static_cast<std::size_t>(d.ny));
  const int k = static_cast<int>(n / (static_cast<std::size_t>(d.nx) * static_cast<std::size_t>(d.ny)));
  return i > 0 && j > 0 && k > 0 && i < d.nx - 1 && j < d.ny - 1 && k < d.nz - 1;
}

}  // namespace

TEST(Lattice, CoordinatesSpanTheCube) {
  EXPECT_DOUBLE_EQ(axis_coord(0, 5), -1.0);
  EXPECT_DOUBLE_EQ(axis_coord(2, 5), 0.0);
  EXPECT_DOUBLE_EQ(axis_coord(4, 5), 1.0);
  EXPECT_DOUBLE_EQ(axis_spacing(5), 0.5);
  EXPECT_EQ(Dims(4, 3, 2).index(1, 2, 1), 1u + 4u * 2u + 12u * 1u);
}

TEST(RawIo, ZeroFileLoadsAsZeroField) {
  const auto dir = testing_support::temp_dir("raw_zero");
  const auto path = dir / "z.raw";
  { std::ofstream(path, std::ios::binary).write(std::string(96, '\0').data(), 96); }
  const VectorField f = load_raw(path, RawMeta{cube(2), 3});
  for (const auto& v : f.data()) EXPECT_EQ(v, Vec3f{});
}

TEST(RawIo, WrongSizeIsFormatError) {
  const auto dir = testing_support::temp_dir("raw_short");
  const auto path = dir / "s.raw";
  { std::ofstream(path, std::ios::binary).write(std::string(95, '\0').data(), 95); }
  EXPECT_THROW(load_raw(path, RawMeta{cube(2), 3}), FormatError);
}

TEST(RawIo, NonFiniteIsDataError) {
  const auto dir = testing_support::temp_dir("raw_nan");
  VectorField f(cube(2));
  f[3] = {0.0f, std::numeric_limits<float>::infinity(), 0.0f};
  save_raw(f, dir / "n.raw");
  EXPECT_THROW(load_raw(dir / "n.raw"), DataError);
}

TEST(RawIo, RoundTripIsBitExact) {
  const auto dir = testing_support::temp_dir("raw_rt");
  const VectorField rot = gen_analytic("rigid_rotation", cube(16));
  save_raw(rot, dir / "rot.raw");
  EXPECT_TRUE(load_raw(dir / "rot.raw") == rot);

  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(-5.0f, 5.0f);
  VectorField rnd(cube(4));
  for (auto& v : rnd.data()) v = {u(rng), u(rng), u(rng)};
  save_raw(rnd, dir / "rnd.raw");
  EXPECT_TRUE(load_raw(dir / "rnd.raw") == rnd);

  ScalarField s(Dims{3, 2, 5});
  for (auto& v : s.data()) v = u(rng);
  save_raw(s, dir / "s.raw");
  EXPECT_TRUE(load_raw_scalar(dir / "s.raw") == s);
}

TEST(RawIo, SingleVoxelFileIsTwelveBytes) {
  const auto dir = testing_support::temp_dir("raw_one");
  save_raw(VectorField(cube(1), Vec3f{1, 2, 3}), dir / "one.raw");
  EXPECT_EQ(std::filesystem::file_size(dir / "one.raw"), 12u);
}

TEST(RawIo, UnwritablePathIsIoError) {
  EXPECT_THROW(save_raw(VectorField(cube(2)), "/nonexistent_dir_nsf/x.raw"), IoError);
}

TEST(RawIo, BadSidecarIsFormatError) {
  EXPECT_THROW(RawMeta::from_json(nlohmann::json{{"dims", {2, 2}}, {"components", 3}}), FormatError);
  EXPECT_THROW(RawMeta::from_json(nlohmann::json{{"dims", {2, 2, 2}}, {"components", 2}}), FormatError);
  EXPECT_THROW(RawMeta::from_json(nlohmann::json{{"dims", {2, 2, 2}}, {"components", 3}, {"dtype", "f64le"}}),
               FormatError);
}

TEST(Trilinear, ExactAtVoxelsAndMidpoints) {
  const Dims d = cube(5);
  VectorField f(d);
  std::mt19937 rng(2);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (auto& v : f.data()) v = {u(rng), u(rng), u(rng)};
  for (std::size_t n = 0; n < f.size(); ++n) EXPECT_EQ(sample_trilinear(f, f.coord(n)), f[n].cast<double>());
  const Vec3d a = f.at(1, 2, 3).cast<double>(), b = f.at(2, 2, 3).cast<double>();
  const Vec3d mid = sample_trilinear(f, (voxel_coord(d, 1, 2, 3) + voxel_coord(d, 2, 2, 3)) * 0.5);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(mid[c], 0.5 * (a[c] + b[c]), 1e-12);
}

TEST(Trilinear, ReproducesAffineFields) {
  // Dyadic coefficients keep every stored sample exact in float.
  auto affine = [](const Vec3d& p) {
    return Vec3d{0.5 * p.x - 0.25 * p.y + 1.0, 0.125 * p.z + 0.75 * p.x, -p.y + 0.5 * p.z - 0.5};
  };
  const VectorField f = make_field(cube(9), affine);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 0; n < 200; ++n) {
    const Vec3d p{u(rng), u(rng), u(rng)};
    const Vec3d got = sample_trilinear(f, p), want = affine(p);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(got[c], want[c], 1e-12);
  }
}

TEST(Trilinear, OutsideDomainThrows) {
  const VectorField f(cube(3));
  EXPECT_THROW(sample_trilinear(f, Vec3d{1.01, 0, 0}), OutOfDomainError);
  EXPECT_FALSE(try_sample_trilinear(f, Vec3d{0, -1.5, 0}).has_value());
  EXPECT_TRUE(try_sample_trilinear(f, Vec3d{1, 1, -1}).has_value());
}

TEST(Jacobian, RigidRotationInterior) {
  const VectorField f = gen_analytic("rigid_rotation", cube(8));
  const JacobianField J = jacobian_central(f);
  const double want[9] = {0, -1, 0, 1, 0, 0, 0, 0, 0};
  for (std::size_t n = 0; n < f.size(); ++n) {
    if (!interior(f.dims(), n)) continue;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(J[n](r, c), want[3 * r + c], 1e-6);
  }
}

TEST(Jacobian, ConstantAndIdentityFields) {
  const VectorField c = make_field(cube(4), [](const Vec3d&) { return Vec3d{0.3, -2.0, 7.0}; });
  const JacobianField Jc = jacobian_central(c);
  for (const auto& m : Jc.data())
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) EXPECT_EQ(m(r, k), 0.0f);
  const VectorField id = make_field(cube(6), [](const Vec3d& p) { return p; });
  const JacobianField J = jacobian_central(id);
  for (std::size_t n = 0; n < id.size(); ++n) {
    if (!interior(id.dims(), n)) continue;
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) EXPECT_NEAR(J[n](r, k), r == k ? 1.0 : 0.0, 1e-6);
  }
}

TEST(Jacobian, NeedsThreeSamplesPerAxis) {
  EXPECT_THROW(jacobian_central(VectorField(Dims{3, 2, 3})), ShapeError);
  EXPECT_THROW(curl(VectorField(Dims{2, 3, 3})), ShapeError);
  EXPECT_THROW(frenet_normal(VectorField(Dims{3, 3, 1})), ShapeError);
}

TEST(Curl, RigidRotationIsTwoZ) {
  const VectorField w = curl(gen_analytic("rigid_rotation", cube(8)));
  for (std::size_t n = 0; n < w.size(); ++n) {
    if (!interior(w.dims(), n)) continue;
    EXPECT_NEAR(w[n].x, 0.0, 1e-5);
    EXPECT_NEAR(w[n].y, 0.0, 1e-5);
    EXPECT_NEAR(w[n].z, 2.0, 1e-5);
  }
}

TEST(Curl, GradientFieldsAreIrrotational) {
  const VectorField g = make_field(cube(10), [](const Vec3d& p) { return p * 2.0; });
  const VectorField wg = curl(g);
  for (const auto& v : wg.data()) EXPECT_LE(norm(v.cast<double>()), 1e-5);
  // Quadratic potential with mixed terms: 0.5x^2 + xy - 0.75z^2 + 0.25yz.
  const VectorField q = make_field(cube(10), [](const Vec3d& p) {
    return Vec3d{p.x + p.y, p.x + 0.25 * p.z, -1.5 * p.z + 0.25 * p.y};
  });
  const VectorField wq = curl(q);
  for (std::size_t n = 0; n < wq.size(); ++n)
    if (interior(wq.dims(), n)) {
      EXPECT_LE(norm(wq[n].cast<double>()), 1e-5);
    }
  const VectorField c = make_field(cube(4), [](const Vec3d&) { return Vec3d{1, 2, 3}; });
  const VectorField wc = curl(c);
  for (const auto& v : wc.data()) EXPECT_EQ(v, Vec3f{});
}

TEST(Frenet, RigidRotationNearUnitX) {
  const VectorField f = gen_analytic("rigid_rotation", cube(9));
  const FrenetFields fr = frenet_normal(f);
  const std::size_t n = nearest_voxel(f, {1, 0, 0});
  const Vec3d b = fr.binormal[n].cast<double>(), nn = fr.normal[n].cast<double>();
  const Vec3d bh = b * (1.0 / norm(b)), nh = nn * (1.0 / norm(nn));
  EXPECT_NEAR(bh.z, -1.0, 1e-6);
  EXPECT_NEAR(nh.x, 1.0, 1e-6);
  // Closed form at an interior voxel: B = (0,0,-r^2), N = r^2 (x, y, 0).
  const std::size_t m = nearest_voxel(f, {0.5, -0.25, 0.0});
  const Vec3d p = f.coord(m);
  const double r2 = p.x * p.x + p.y * p.y;
  const Vec3d bm = fr.binormal[m].cast<double>(), nm = fr.normal[m].cast<double>();
  EXPECT_NEAR(bm.z, -r2, 1e-5);
  EXPECT_NEAR(nm.x, r2 * p.x, 1e-5);
  EXPECT_NEAR(nm.y, r2 * p.y, 1e-5);
}

TEST(Frenet, OrthogonalToVEverywhere) {
  for (const char* name : {"abc", "hill_vortex", "tornado"}) {
    const VectorField f = gen_analytic(name, cube(12));
    const FrenetFields fr = frenet_normal(f);
    for (std::size_t n = 0; n < f.size(); ++n) {
      const Vec3d v = f[n].cast<double>(), nn = fr.normal[n].cast<double>(), b = fr.binormal[n].cast<double>();
      EXPECT_LE(std::abs(dot(nn, v)), 1e-5 * norm(nn) * norm(v) + 1e-30) << name;
      EXPECT_LE(std::abs(dot(b, v)), 1e-5 * norm(b) * norm(v) + 1e-30) << name;
    }
  }
}

TEST(Frenet, ZeroVectorGivesZeroFrame) {
  const VectorField f = gen_analytic("rigid_rotation", cube(5));
  const FrenetFields fr = frenet_normal(f);
  const std::size_t axis = nearest_voxel(f, {0, 0, 0});
  EXPECT_EQ(fr.normal[axis], Vec3f{});
  EXPECT_EQ(fr.binormal[axis], Vec3f{});
}

TEST(Analytic, SpotValues) {
  const VectorField rot = gen_analytic("rigid_rotation", cube(5));
  EXPECT_EQ(rot.at(4, 2, 2), (Vec3f{0, 1, 0}));
  const VectorField abc = gen_analytic("abc", cube(5), {{"A", 1}, {"B", 1}, {"C", 1}});
  EXPECT_EQ(abc.at(0, 0, 0), (Vec3f{1, 1, 1}));
  EXPECT_THROW(gen_analytic("bogus", cube(4)), UsageError);
  EXPECT_THROW(gen_analytic("abc", cube(4), {{"D", 1}}), UsageError);
}

TEST(Analytic, HillVortexSphereIsAStreamSurface) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (int n = 0; n < 100; ++n) {
    Vec3d dir{nd(rng), nd(rng), nd(rng)};
    dir = dir * (0.5 / norm(dir));
    const Vec3d v = analytic::hill_vortex(dir, 1.0, 0.5);
    EXPECT_LE(std::abs(dot(v, dir * 2.0)), 1e-6);
  }
}
