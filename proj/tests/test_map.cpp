// Copyright 2026 BIEVR-LIO Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <unordered_map>

#include "bievr/morton.hpp"
#include "bievr/oracles.hpp"
#include "bievr/voxel.hpp"
#include "bievr/voxel_map.hpp"
#include "test_util.hpp"

using namespace bievr;

namespace {

// Reference bit interleaving, one bit at a time.
std::uint64_t interleave_reference(std::int64_t i, std::int64_t j,
                                   std::int64_t k) {
  const std::uint64_t bi = static_cast<std::uint64_t>(i + kMortonOffset);
  const std::uint64_t bj = static_cast<std::uint64_t>(j + kMortonOffset);
  const std::uint64_t bk = static_cast<std::uint64_t>(k + kMortonOffset);
  std::uint64_t code = 0;
  for (int b = 0; b < 21; ++b) {
    code |= ((bi >> b) & 1ULL) << (3 * b);
    code |= ((bj >> b) & 1ULL) << (3 * b + 1);
    code |= ((bk >> b) & 1ULL) << (3 * b + 2);
  }
  return code;
}

TEST(Morton, GridAssignment) {
  auto g = grid_coords_of(Vec3(0.1, 0.1, 0.1), 0.5);
  EXPECT_EQ(g[0], 0);
  EXPECT_EQ(g[1], 0);
  EXPECT_EQ(g[2], 0);
  // Boundary points belong to the upper cell (floor convention).
  g = grid_coords_of(Vec3(0.5, 0.0, 0.0), 0.5);
  EXPECT_EQ(g[0], 1);
  EXPECT_EQ(g[1], 0);
  EXPECT_EQ(g[2], 0);
}

TEST(Morton, RoundTrip) {
  const auto decoded = morton_decode(morton_encode(-3, 7, 120));
  EXPECT_EQ(decoded[0], -3);
  EXPECT_EQ(decoded[1], 7);
  EXPECT_EQ(decoded[2], 120);

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::int64_t> coord(-kMortonMaxCoord,
                                                    kMortonMaxCoord);
  for (int t = 0; t < 500; ++t) {
    const std::int64_t i = coord(rng), j = coord(rng), k = coord(rng);
    EXPECT_EQ(morton_encode(i, j, k).code, interleave_reference(i, j, k));
    const auto d = morton_decode(morton_encode(i, j, k));
    EXPECT_EQ(d[0], i);
    EXPECT_EQ(d[1], j);
    EXPECT_EQ(d[2], k);
  }
}

TEST(Morton, OutOfRangeThrows) {
  EXPECT_THROW(morton_encode(kMortonMaxCoord + 1, 0, 0), std::out_of_range);
  EXPECT_THROW(voxel_key_of(Vec3(1e9, 0, 0), 0.5), std::out_of_range);
}

// --- plane statistics ---------------------------------------------------------

TEST(PlaneStats, SinglePoint) {
  Voxel v(Vec3::Zero(), 0.5, 0.05);
  const Vec3 p(0.2, 0.3, 0.1);
  const PlaneFit fit = v.update_plane_stats(std::vector<Vec3>{p});
  EXPECT_LT((fit.mu - p).norm(), 1e-12);
  EXPECT_LT(fit.sigma.norm(), 1e-12);
}

TEST(PlaneStats, BatchSplitIsExact) {
  std::mt19937_64 rng(5);
  std::vector<Vec3> batch_a, batch_b, all;
  for (int i = 0; i < 20; ++i) batch_a.push_back(testutil::random_vec3(rng));
  for (int i = 0; i < 30; ++i) batch_b.push_back(testutil::random_vec3(rng));
  all = batch_a;
  all.insert(all.end(), batch_b.begin(), batch_b.end());

  Voxel split(Vec3::Zero(), 0.5, 0.05);
  split.update_plane_stats(batch_a);
  split.update_plane_stats(batch_b);
  Voxel joint(Vec3::Zero(), 0.5, 0.05);
  joint.update_plane_stats(all);

  EXPECT_EQ(split.num_points(), joint.num_points());
  EXPECT_TRUE(split.sum_points() == joint.sum_points());
  EXPECT_TRUE(split.sum_outer() == joint.sum_outer());
}

TEST(PlaneStats, MatchesBatchFormula) {
  std::mt19937_64 rng(9);
  std::vector<Vec3> points;
  for (int i = 0; i < 50; ++i) points.push_back(testutil::random_vec3(rng));

  Voxel v(Vec3::Zero(), 0.5, 0.05);
  PlaneFit fit;
  for (const Vec3& p : points) {
    fit = v.update_plane_stats(std::vector<Vec3>{p});
  }

  Vec3 s = Vec3::Zero();
  Mat3 c = Mat3::Zero();
  for (const Vec3& p : points) {
    s += p;
    c += p * p.transpose();
  }
  const Vec3 mu = s / 50.0;
  const Mat3 sigma = (c - s * mu.transpose()) / 51.0;
  EXPECT_LT((fit.mu - mu).norm(), 1e-9);
  EXPECT_LT((fit.sigma - sigma).norm(), 1e-9);

  const BatchPlaneFit oracle = oracle_pca(points);
  EXPECT_LT((fit.mu - oracle.mu).norm(), 1e-9);
  EXPECT_LT((fit.sigma - oracle.sigma).norm(), 1e-9);
}

// --- normal / frame -----------------------------------------------------------

std::vector<Vec3> plane_patch(std::mt19937_64& rng, const Vec3& origin,
                              const Vec3& axis_a, const Vec3& axis_b, int n,
                              double extent, double noise = 0.0) {
  std::vector<Vec3> out;
  std::uniform_real_distribution<double> u(-extent, extent);
  std::normal_distribution<double> g(0.0, 1.0);
  const Vec3 normal = axis_a.cross(axis_b).normalized();
  for (int i = 0; i < n; ++i) {
    Vec3 p = origin + u(rng) * axis_a + u(rng) * axis_b;
    if (noise > 0.0) p += noise * g(rng) * normal;
    out.push_back(p);
  }
  return out;
}

TEST(NormalFrame, HorizontalPlaneSignTowardSensor) {
  std::mt19937_64 rng(21);
  Voxel v(Vec3(-0.25, -0.25, 1.75), 0.5, 0.05);
  v.update_plane_stats(plane_patch(rng, Vec3(0, 0, 2), Vec3::UnitX(),
                                   Vec3::UnitY(), 40, 0.2));
  const auto event = v.update_normal_frame(Vec3(0, 0, 5), 3 * M_PI / 180);
  EXPECT_EQ(event, Voxel::FrameEvent::kInitialized);
  EXPECT_LT((v.normal() - Vec3(0, 0, 1)).norm(), 1e-9);

  // Sensor below flips the sign.
  Voxel w(Vec3(-0.25, -0.25, 1.75), 0.5, 0.05);
  w.update_plane_stats(plane_patch(rng, Vec3(0, 0, 2), Vec3::UnitX(),
                                   Vec3::UnitY(), 40, 0.2));
  w.update_normal_frame(Vec3(0, 0, 0), 3 * M_PI / 180);
  EXPECT_LT((w.normal() - Vec3(0, 0, -1)).norm(), 1e-9);
}

TEST(NormalFrame, TiltedPlaneMatchesOracle) {
  std::mt19937_64 rng(23);
  const Vec3 a = Vec3(1, -1, 0).normalized();
  const Vec3 b = Vec3::UnitZ();
  const auto points = plane_patch(rng, Vec3::Zero(), a, b, 60, 0.2);
  Voxel v(Vec3(-0.25, -0.25, -0.25), 0.5, 0.05);
  v.update_plane_stats(points);
  v.update_normal_frame(Vec3(1, 1, 0), 3 * M_PI / 180);
  const Vec3 expected = Vec3(1, 1, 0).normalized();
  EXPECT_LT((v.normal() - expected).norm(), 1e-6);
  const BatchPlaneFit oracle = oracle_pca(points);
  EXPECT_LT(1.0 - std::abs(oracle.normal.dot(v.normal())), 1e-9);
}

TEST(NormalFrame, IsotropicCloudKeepsFrame) {
  // Exactly isotropic second moments: the eigen gap collapses and the frame
  // must stay put.
  Voxel v(Vec3(-0.25, -0.25, -0.25), 0.5, 0.05);
  std::mt19937_64 rng(27);
  v.update_plane_stats(plane_patch(rng, Vec3::Zero(), Vec3::UnitX(),
                                   Vec3::UnitY(), 50, 0.2));
  ASSERT_EQ(v.update_normal_frame(Vec3(0, 0, 5), 3 * M_PI / 180),
            Voxel::FrameEvent::kInitialized);
  const Vec3 normal_before = v.normal();

  std::vector<Vec3> octahedron;
  for (int axis = 0; axis < 3; ++axis) {
    for (double sign : {-1.0, 1.0}) {
      octahedron.push_back(10.0 * sign * Vec3::Unit(axis));
    }
  }
  // Overwhelms the plane statistics with an isotropic point set.
  for (int rep = 0; rep < 100; ++rep) v.update_plane_stats(octahedron);
  EXPECT_EQ(v.update_normal_frame(Vec3(0, 0, 5), 3 * M_PI / 180),
            Voxel::FrameEvent::kNone);
  EXPECT_TRUE(v.normal() == normal_before);
}

// Corner-projection oracle for the image sizing rule.
std::pair<int, int> image_size_reference(const Vec3& vox_min, double len,
                                         double r, const Vec3& mu,
                                         const Vec3& normal) {
  const Vec3 x_axis = plane_x_axis_of(normal);
  const Vec3 y_axis = normal.cross(x_axis);
  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (int c = 0; c < 8; ++c) {
    const Vec3 corner =
        vox_min + len * Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1);
    const Vec3 rel = corner - mu;
    x_min = std::min(x_min, x_axis.dot(rel));
    x_max = std::max(x_max, x_axis.dot(rel));
    y_min = std::min(y_min, y_axis.dot(rel));
    y_max = std::max(y_max, y_axis.dot(rel));
  }
  return {static_cast<int>(std::ceil((x_max - x_min) / r - 1e-9)),
          static_cast<int>(std::ceil((y_max - y_min) / r - 1e-9))};
}

TEST(ImageFrame, AxisAlignedNormalGivesTenByTen) {
  std::mt19937_64 rng(31);
  Voxel v(Vec3(-0.25, -0.25, -0.25), 0.5, 0.05);
  v.update_plane_stats(plane_patch(rng, Vec3::Zero(), Vec3::UnitX(),
                                   Vec3::UnitY(), 60, 0.2));
  v.update_normal_frame(Vec3(0, 0, 5), 3 * M_PI / 180);
  EXPECT_EQ(v.image().width(), 10);
  EXPECT_EQ(v.image().height(), 10);
}

TEST(ImageFrame, DiagonalNormalMatchesCornerProjection) {
  // Points on a plane orthogonal to the voxel diagonal.
  std::mt19937_64 rng(33);
  const Vec3 normal = Vec3(1, 1, 1).normalized();
  const Vec3 a = plane_x_axis_of(normal);
  const Vec3 b = normal.cross(a);
  const Vec3 vox_min(-0.25, -0.25, -0.25);
  Voxel v(vox_min, 0.5, 0.05);
  v.update_plane_stats(plane_patch(rng, Vec3::Zero(), a, b, 80, 0.12));
  v.update_normal_frame(Vec3(1, 1, 1), 3 * M_PI / 180);

  const auto [w_ref, h_ref] =
      image_size_reference(vox_min, 0.5, 0.05, v.mu(), v.normal());
  EXPECT_EQ(v.image().width(), w_ref);
  EXPECT_EQ(v.image().height(), h_ref);
  // Projected height of the footprint spans the rotated face diagonal.
  EXPECT_EQ(h_ref, 15);
  const int bound = static_cast<int>(
                        std::ceil(std::sqrt(3.0) * 0.5 / 0.05)) + 1;
  EXPECT_LE(w_ref, bound);
  EXPECT_LE(h_ref, bound);
}

TEST(ImageFrame, AllVoxelPointsProjectInside) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 normal = testutil::random_unit_vec3(rng);
    const Vec3 a = plane_x_axis_of(normal);
    const Vec3 b = normal.cross(a);
    const Vec3 vox_min(-0.25, -0.25, -0.25);
    Voxel v(vox_min, 0.5, 0.05);
    v.update_plane_stats(plane_patch(rng, Vec3::Zero(), a, b, 40, 0.15));
    if (v.update_normal_frame(10.0 * normal, 3 * M_PI / 180) !=
        Voxel::FrameEvent::kInitialized) {
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, 0.5);
    for (int i = 0; i < 50; ++i) {
      const Vec3 p = vox_min + Vec3(u(rng), u(rng), u(rng));
      const Vec3 q = v.image_from_world() * p;
      const double pu = q.x() / 0.05, pv = q.y() / 0.05;
      EXPECT_GE(pu, -1e-9);
      EXPECT_LT(pu, v.image().width() + 1e-9);
      EXPECT_GE(pv, -1e-9);
      EXPECT_LT(pv, v.image().height() + 1e-9);
    }
  }
}

// --- image update ---------------------------------------------------------------

Voxel make_flat_voxel() {
  std::mt19937_64 rng(41);
  Voxel v(Vec3(-0.25, -0.25, -0.25), 0.5, 0.05);
  v.update_plane_stats(plane_patch(rng, Vec3::Zero(), Vec3::UnitX(),
                                   Vec3::UnitY(), 60, 0.22));
  v.update_normal_frame(Vec3(0, 0, 5), 3 * M_PI / 180);
  return v;
}

TEST(ImageUpdate, RangeWeights) {
  EXPECT_DOUBLE_EQ(std::min(0.5, 1.0 / 4.0), 0.25);
  EXPECT_DOUBLE_EQ(std::min(0.5, 1.0 / 1.0), 0.5);
  BumpImage img(4, 4, 0.05);
  img.add_point(0.01, 0.01, 0.1, std::min(0.5, 1.0 / 4.0));
  EXPECT_DOUBLE_EQ(img.weight(0, 0), 0.25);
  img.add_point(0.01, 0.01, 0.1, std::min(0.5, 1.0 / 0.5));
  EXPECT_DOUBLE_EQ(img.weight(0, 0), 0.75);
}

TEST(ImageUpdate, SinglePointFreshPixel) {
  Voxel v = make_flat_voxel();
  const Vec3 p(0.07, 0.03, 0.012);  // 12 mm above the plane
  const Vec3 q = v.image_from_world() * p;
  v.update_image(std::vector<RangedPoint>{{p, 4.0}});
  const int u = static_cast<int>(std::floor(q.x() / 0.05));
  const int pv = static_cast<int>(std::floor(q.y() / 0.05));
  ASSERT_TRUE(v.image().observed(u, pv));
  EXPECT_NEAR(v.image().value(u, pv), q.z(), 1e-12);
}

TEST(ImageUpdate, WeightedMeanOfTwoPoints) {
  Voxel v = make_flat_voxel();
  const Vec3 base(0.07, 0.03, 0.0);
  const Vec3 q = v.image_from_world() * base;
  const double z1 = q.z() + 0.010, z2 = q.z() + 0.030;
  const double w1 = std::min(0.5, 1.0 / 4.0), w2 = std::min(0.5, 1.0 / 2.5);
  v.update_image(std::vector<RangedPoint>{{base + Vec3(0, 0, 0.010), 4.0},
                                          {base + Vec3(0, 0, 0.030), 2.5}});
  const int u = static_cast<int>(std::floor(q.x() / 0.05));
  const int pv = static_cast<int>(std::floor(q.y() / 0.05));
  EXPECT_NEAR(v.image().value(u, pv), (w1 * z1 + w2 * z2) / (w1 + w2), 1e-12);
}

TEST(ImageUpdate, OutOfFramePointsAreCountedNotWritten) {
  Voxel v = make_flat_voxel();
  const std::size_t skipped =
      v.update_image(std::vector<RangedPoint>{{Vec3(5.0, 5.0, 5.0), 4.0}});
  EXPECT_EQ(skipped, 1u);
  EXPECT_EQ(v.image().observed_count(), 0u);
}

// --- reprojection ---------------------------------------------------------------

TEST(Reproject, IdentityKeepsImage) {
  Voxel v = make_flat_voxel();
  std::mt19937_64 rng(43);
  std::vector<RangedPoint> pts;
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (int i = 0; i < 200; ++i) {
    pts.push_back({Vec3(u(rng), u(rng), 0.005 * u(rng)), 3.0});
  }
  v.update_image(pts);
  const BumpImage before = v.image();
  v.reproject(SE3::identity());
  ASSERT_EQ(v.image().observed_count(), before.observed_count());
  for (int y = 0; y < before.height(); ++y) {
    for (int x = 0; x < before.width(); ++x) {
      EXPECT_NEAR(v.image().value(x, y), before.value(x, y), 1e-12);
      EXPECT_NEAR(v.image().weight(x, y), before.weight(x, y), 1e-12);
    }
  }
}

TEST(Reproject, TiltedPlaneMatchesAnalyticHeights) {
  Voxel v = make_flat_voxel();
  std::vector<RangedPoint> pts;
  for (double x = -0.24; x < 0.25; x += 0.02) {
    for (double y = -0.24; y < 0.25; y += 0.02) {
      pts.push_back({Vec3(x, y, 0.0), 5.0});
    }
  }
  v.update_image(pts);  // planar image, I == 0

  const double angle = 2.0 * M_PI / 180.0;
  const SE3 t_new_old(so3_exp(angle * Vec3::UnitX()), Vec3::Zero());
  const double total_before = v.image().total_weight();
  v.reproject(t_new_old);
  EXPECT_LE(v.image().total_weight(), total_before + 1e-9);

  // Old plane z=0 maps to the analytic plane z' = tan(angle') over the new
  // frame; evaluated per observed pixel within half a pixel of quantization.
  const double r = v.image().pixel_res();
  std::size_t checked = 0;
  for (int y = 0; y < v.image().height(); ++y) {
    for (int x = 0; x < v.image().width(); ++x) {
      if (!v.image().observed(x, y)) continue;
      const double vc = (y + 0.5) * r;
      // Point on rotated plane with new-frame y = vc: z = vc * tan(angle).
      const double analytic = vc * std::tan(angle);
      EXPECT_NEAR(v.image().value(x, y), analytic, r / 2.0);
      ++checked;
    }
  }
  EXPECT_GT(checked, 20u);
}

// --- MID ----------------------------------------------------------------------

TEST(MeanImageDistance, PlanarIsZero) {
  Voxel v = make_flat_voxel();
  std::vector<RangedPoint> pts;
  for (double x = -0.2; x < 0.21; x += 0.05) {
    for (double y = -0.2; y < 0.21; y += 0.05) {
      pts.push_back({Vec3(x, y, 0.0), 5.0});
    }
  }
  v.update_image(pts);
  EXPECT_NEAR(v.mean_image_distance(), 0.0, 1e-9);
}

TEST(MeanImageDistance, TwoPixelMean) {
  BumpImage img(4, 4, 0.05);
  img.add_to_pixel(0, 0, 0.02, 1.0);
  img.add_to_pixel(2, 2, -0.04, 1.0);
  EXPECT_NEAR(img.mean_abs_height(), 0.03, 1e-12);
}

TEST(MeanImageDistance, MatchesResummation) {
  std::mt19937_64 rng(47);
  BumpImage img(12, 9, 0.05);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::uniform_int_distribution<int> ux(0, 11), uy(0, 8);
  for (int i = 0; i < 40; ++i) {
    img.add_to_pixel(ux(rng), uy(rng), u(rng), 0.25);
  }
  double acc = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (img.observed(x, y)) {
        acc += std::abs(img.value(x, y));
        ++n;
      }
    }
  }
  EXPECT_NEAR(img.mean_abs_height(), acc / n, 1e-12);
}

// --- map integration -------------------------------------------------------------

TEST(MapIntegration, RepeatedBatchEqualsDoubledBatch) {
  std::mt19937_64 rng(53);
  std::vector<RangedPoint> batch;
  for (int i = 0; i < 300; ++i) {
    batch.push_back({testutil::random_vec3(rng, 1.5), 4.0});
  }
  MapConfig cfg;
  cfg.num_threads = 1;
  VoxelMap twice(cfg), once(cfg);
  twice.integrate_scan(batch, Vec3(0, 0, 5));
  twice.integrate_scan(batch, Vec3(0, 0, 5));
  std::vector<RangedPoint> doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  once.integrate_scan(doubled, Vec3(0, 0, 5));

  EXPECT_EQ(twice.size(), once.size());
  twice.for_each([&](VoxelKey key, const Voxel& v) {
    const Voxel* o = once.find(key);
    ASSERT_NE(o, nullptr);
    EXPECT_EQ(v.num_points(), o->num_points());
    EXPECT_TRUE(v.sum_points() == o->sum_points());
    EXPECT_TRUE(v.sum_outer() == o->sum_outer());
  });
}

TEST(MapIntegration, LruEvictsOldestVoxel) {
  MapConfig cfg;
  cfg.capacity = 10;
  cfg.num_threads = 1;
  VoxelMap map(cfg);
  const VoxelKey first = voxel_key_of(Vec3(0.25, 0.25, 0.25), cfg.voxel_len);
  for (int i = 0; i < 11; ++i) {
    std::vector<RangedPoint> pts{{Vec3(0.25 + i * cfg.voxel_len, 0.25, 0.25),
                                  3.0}};
    map.integrate_scan(pts, Vec3(0, 0, 5));
  }
  EXPECT_EQ(map.size(), 10u);
  EXPECT_EQ(map.find(first), nullptr);
}

TEST(MapIntegration, BumpyPlaneMidMatchesAnalyticDeviation) {
  // Surface z = 0.25 + 0.03 sin(2 pi x), integrated over 10 jittered scans.
  MapConfig cfg;
  cfg.num_threads = 1;
  VoxelMap map(cfg);
  auto surface = [](double x) { return 0.25 + 0.03 * std::sin(2 * M_PI * x); };
  std::mt19937_64 rng(59);
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);
  for (int scan = 0; scan < 10; ++scan) {
    std::vector<RangedPoint> pts;
    for (double x = -2.0; x < 2.0; x += 0.021) {
      for (double y = -2.0; y < 2.0; y += 0.021) {
        const double xj = x + jitter(rng), yj = y + jitter(rng);
        pts.push_back({Vec3(xj, yj, surface(xj)), 20.0});
      }
    }
    map.integrate_scan(pts, Vec3(0, 0, 30));
  }

  std::size_t checked = 0;
  map.for_each([&](VoxelKey key, const Voxel& voxel) {
    if (!voxel.frame_initialized()) return;
    const auto g = morton_decode(key);
    // Interior voxels only; edge voxels have clipped footprints.
    if (g[0] < -3 || g[0] > 2 || g[1] < -3 || g[1] > 2) return;
    if (voxel.image().observed_count() < 80) return;

    // Oracle: densely sample the analytic surface over the voxel footprint,
    // fit the batch plane, and average the absolute plane distance.
    std::vector<Vec3> dense;
    for (double x = g[0] * 0.5 + 0.005; x < (g[0] + 1) * 0.5; x += 0.01) {
      for (double y = g[1] * 0.5 + 0.005; y < (g[1] + 1) * 0.5; y += 0.01) {
        dense.push_back(Vec3(x, y, surface(x)));
      }
    }
    const BatchPlaneFit fit = oracle_pca(dense);
    double mean_dev = 0.0;
    for (const Vec3& p : dense) {
      mean_dev += std::abs(fit.normal.dot(p - fit.mu));
    }
    mean_dev /= static_cast<double>(dense.size());
    if (mean_dev < 2e-3) return;  // nearly planar patches prove nothing
    EXPECT_NEAR(voxel.mean_image_distance(), mean_dev, 0.2 * mean_dev)
        << "voxel " << g[0] << ' ' << g[1] << ' ' << g[2];
    ++checked;
  });
  EXPECT_GE(checked, 10u);
}

TEST(MapIntegration, IncrementalEqualsBatchAcrossScans) {
  MapConfig cfg;
  cfg.num_threads = 1;
  VoxelMap map(cfg);
  std::unordered_map<VoxelKey, std::vector<Vec3>, VoxelKeyHash> history;
  std::mt19937_64 rng(61);
  for (int scan = 0; scan < 5; ++scan) {
    std::vector<RangedPoint> pts;
    for (int i = 0; i < 400; ++i) {
      const Vec3 p = testutil::random_vec3(rng, 1.2);
      pts.push_back({p, 4.0});
      history[voxel_key_of(p, cfg.voxel_len)].push_back(p);
    }
    map.integrate_scan(pts, Vec3(0, 0, 5));
  }
  for (const auto& [key, points] : history) {
    const Voxel* v = map.find(key);
    ASSERT_NE(v, nullptr);
    ASSERT_EQ(v->num_points(), points.size());
    Vec3 mu = Vec3::Zero();
    for (const Vec3& p : points) mu += p;
    mu /= static_cast<double>(points.size());
    Mat3 scatter = Mat3::Zero();
    for (const Vec3& p : points) scatter += (p - mu) * (p - mu).transpose();
    const Mat3 sigma = scatter / (static_cast<double>(points.size()) + 1.0);
    EXPECT_LT((v->mu() - mu).norm(), 1e-9);
    EXPECT_LT((v->sigma() - sigma).norm(), 1e-9);
  }
}

// --- bilinear queries -------------------------------------------------------------

TEST(QueryHeight, ExactAtObservedCenter) {
  BumpImage img(6, 6, 0.05);
  img.add_to_pixel(2, 3, 0.042, 0.5);
  const auto q = img.query(2.5, 3.5);
  ASSERT_TRUE(q.has_value());
  EXPECT_NEAR(*q, 0.042, 1e-15);
}

TEST(QueryHeight, ExactOnLinearRamp) {
  const double a = 0.013, b = -0.007, c = 0.004;
  BumpImage img(8, 8, 0.05);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      img.add_to_pixel(x, y, a * (x + 0.5) + b * (y + 0.5) + c, 0.3);
    }
  }
  std::mt19937_64 rng(67);
  std::uniform_real_distribution<double> u(0.6, 7.4);
  for (int i = 0; i < 200; ++i) {
    const double qu = u(rng), qv = u(rng);
    const auto q = img.query(qu, qv);
    ASSERT_TRUE(q.has_value());
    EXPECT_NEAR(*q, a * qu + b * qv + c, 1e-12);
  }
}

TEST(QueryHeight, UnobservedNeighborhoodYieldsNothing) {
  BumpImage img(6, 6, 0.05);
  img.add_to_pixel(0, 0, 0.1, 0.5);
  EXPECT_FALSE(img.query(4.0, 4.0).has_value());
  EXPECT_FALSE(img.query(-1.0, 2.0).has_value());
  EXPECT_FALSE(img.query(100.0, 2.0).has_value());
}

// --- smoothing --------------------------------------------------------------------

TEST(Smoothing, KeepsMaskAndWeights) {
  std::mt19937_64 rng(71);
  BumpImage img(10, 10, 0.05);
  std::uniform_int_distribution<int> coord(0, 9);
  std::uniform_real_distribution<double> val(-0.1, 0.1);
  for (int i = 0; i < 30; ++i) {
    img.add_to_pixel(coord(rng), coord(rng), val(rng), 0.4);
  }
  const std::vector<double> weights_before = img.weights();
  std::vector<bool> observed_before;
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) observed_before.push_back(img.observed(x, y));

  img.gaussian_smooth();
  EXPECT_EQ(img.weights(), weights_before);
  std::size_t idx = 0;
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      EXPECT_EQ(img.observed(x, y), observed_before[idx++]);
    }
  }
}

TEST(Smoothing, IsolatedPixelUnchanged) {
  BumpImage img(8, 8, 0.05);
  img.add_to_pixel(4, 4, 0.077, 0.5);
  img.gaussian_smooth();
  EXPECT_NEAR(img.value(4, 4), 0.077, 1e-15);
}

// --- snapshot I/O ------------------------------------------------------------------

TEST(Snapshot, RoundTrips) {
  MapConfig cfg;
  cfg.num_threads = 1;
  VoxelMap map(cfg);
  std::mt19937_64 rng(73);
  for (int scan = 0; scan < 3; ++scan) {
    std::vector<RangedPoint> pts;
    for (double x = -1.0; x < 1.0; x += 0.03) {
      for (double y = -1.0; y < 1.0; y += 0.03) {
        pts.push_back({Vec3(x, y, 0.3 + 0.02 * std::sin(7 * x)), 5.0});
      }
    }
    map.integrate_scan(pts, Vec3(0, 0, 4));
  }
  const std::string path = ::testing::TempDir() + "/bievr_map_snapshot.bin";
  map.save_snapshot(path);
  const VoxelMap::Snapshot snap = VoxelMap::load_snapshot(path);
  EXPECT_EQ(snap.voxel_len, cfg.voxel_len);
  EXPECT_EQ(snap.pixel_res, cfg.pixel_res);

  std::size_t with_frames = 0;
  map.for_each([&](VoxelKey, const Voxel& v) {
    if (v.frame_initialized()) ++with_frames;
  });
  ASSERT_EQ(snap.voxels.size(), with_frames);
  for (const auto& sv : snap.voxels) {
    const Voxel* v = map.find(sv.key);
    ASSERT_NE(v, nullptr);
    EXPECT_LT((sv.image_from_world.rotation - v->image_from_world().rotation)
                  .norm(),
              0.0 + 1e-15);
    EXPECT_EQ(sv.image.values(), v->image().values());
    EXPECT_EQ(sv.image.weights(), v->image().weights());
  }
}

}  // namespace
