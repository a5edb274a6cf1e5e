#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Geometry>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "ov3d/geometry.hpp"

using namespace ov3d;
using doctest::Approx;
constexpr double pi = std::numbers::pi;

namespace {

bool same_point_set(const std::array<Vector3d, 8>& a, const std::array<Vector3d, 8>& b, double tol) {
  for (const auto& p : a) {
    bool found = false;
    for (const auto& q : b) found = found || (p - q).norm() < tol;
    if (!found) return false;
  }
  return true;
}

OrientedBox3D random_box(std::mt19937_64& rng, double spread) {
  std::uniform_real_distribution<double> c(-spread, spread), s(0.2, 2.0), y(-pi, pi);
  return OrientedBox3D(Vector3d(c(rng), c(rng), c(rng) * 0.5), Vector3d(s(rng), s(rng), s(rng)), y(rng));
}

CameraModel identity_camera() {
  return CameraModel(Mat3<double>::Identity(), Mat3<double>::Identity(), Vector3d::Zero());
}

}  // namespace

TEST_CASE("box construction rejects non-positive sizes and wraps yaw") {
  CHECK_THROWS_AS(OrientedBox3D(Vector3d::Zero(), Vector3d(1, 0, 1), 0), std::invalid_argument);
  CHECK_THROWS_AS(OrientedBox3D(Vector3d::Zero(), Vector3d(1, -1, 1), 0), std::invalid_argument);
  CHECK(OrientedBox3D(Vector3d::Zero(), Vector3d::Ones(), pi).yaw() == Approx(-pi));
  CHECK(OrientedBox3D(Vector3d::Zero(), Vector3d::Ones(), 3 * pi / 2).yaw() == Approx(-pi / 2));
}

TEST_CASE("corners of the unit cube") {
  const OrientedBox3D cube(Vector3d::Zero(), Vector3d::Ones(), 0.0);
  const auto k = corners(cube);
  for (const auto& p : k) CHECK(p.cwiseAbs().isApprox(Vector3d::Constant(0.5)));
  CHECK(same_point_set(k, corners(OrientedBox3D(Vector3d::Zero(), Vector3d::Ones(), pi / 2)), 1e-12));
  // Bottom face first, counter-clockwise from (-x, -y).
  CHECK(k[0].isApprox(Vector3d(-0.5, -0.5, -0.5)));
  CHECK(k[1].isApprox(Vector3d(0.5, -0.5, -0.5)));
  CHECK(k[2].isApprox(Vector3d(0.5, 0.5, -0.5)));
  CHECK(k[4].isApprox(Vector3d(-0.5, -0.5, 0.5)));
}

TEST_CASE("corners of a rotated box match a hand-applied rotation") {
  const OrientedBox3D box(Vector3d::Zero(), Vector3d(2, 1, 1), pi / 4);
  const double r = std::sqrt(0.5);
  // R(45 deg) applied to (+-1, +-0.5) by hand.
  const std::array<Eigen::Vector2d, 4> bev = {Eigen::Vector2d(r * (-1 + 0.5), r * (-1 - 0.5)),
                                              Eigen::Vector2d(r * (1 + 0.5), r * (1 - 0.5)),
                                              Eigen::Vector2d(r * (1 - 0.5), r * (1 + 0.5)),
                                              Eigen::Vector2d(r * (-1 - 0.5), r * (-1 + 0.5))};
  const auto k = corners(box);
  for (int i = 0; i < 4; ++i) {
    CHECK(k[i].head<2>().isApprox(bev[i], 1e-12));
    CHECK(k[i + 4].head<2>().isApprox(bev[i], 1e-12));
    CHECK(k[i].z() == Approx(-0.5));
    CHECK(k[i + 4].z() == Approx(0.5));
  }
  CHECK(same_point_set(k, oracle::box_corners(box.center(), box.size(), box.yaw()), 1e-12));
}

TEST_CASE("fit_box_from_corners inverts corners") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto box = random_box(rng, 3.0);
    const auto fit = fit_box_from_corners(corners(box));
    CHECK(fit.center().isApprox(box.center(), 1e-9));
    CHECK(fit.size().isApprox(box.size(), 1e-9));
    CHECK(std::abs(wrap_angle(fit.yaw() - box.yaw())) < 1e-9);
  }
}

TEST_CASE("iou3d fixed cases") {
  const OrientedBox3D cube(Vector3d::Zero(), Vector3d::Ones(), 0.0);
  CHECK(iou3d(cube, cube) == 1.0);
  CHECK(iou3d(cube, OrientedBox3D(Vector3d(2, 0, 0), Vector3d::Ones(), 0.0)) == 0.0);
  CHECK(iou3d(cube, OrientedBox3D(Vector3d(0.5, 0, 0), Vector3d::Ones(), 0.0)) == Approx(1.0 / 3).epsilon(1e-12));
  const OrientedBox3D tilted(Vector3d::Zero(), Vector3d::Ones(), pi / 4);
  std::mt19937_64 rng(11);
  const double mc = oracle::monte_carlo_iou(cube, tilted, 1'000'000, rng);
  CHECK(std::abs(iou3d(cube, tilted) - mc) <= 0.01);
  CHECK(iou3d(cube, tilted) == Approx(0.7071).epsilon(0.01));
  // No vertical overlap.
  CHECK(iou3d(cube, OrientedBox3D(Vector3d(0, 0, 1.5), Vector3d::Ones(), 0.3)) == 0.0);
}

TEST_CASE("iou3d is symmetric, bounded and invariant to a common rigid motion") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> shift(-10, 10), turn(-pi, pi);
  for (int i = 0; i < 300; ++i) {
    const auto a = random_box(rng, 1.0);
    const auto b = random_box(rng, 1.0);
    const double ab = iou3d(a, b);
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(ab == Approx(iou3d(b, a)).epsilon(1e-12));
    CHECK(iou3d(a, a) == Approx(1.0).epsilon(1e-12));

    const double t = turn(rng);
    const Vector3d d(shift(rng), shift(rng), shift(rng));
    const Eigen::Matrix2d r = Eigen::Rotation2Dd(t).toRotationMatrix();
    auto move = [&](const OrientedBox3D& box) {
      Vector3d c = box.center();
      c.head<2>() = r * c.head<2>();
      return OrientedBox3D(c + d, box.size(), box.yaw() + t);
    };
    CHECK(std::abs(iou3d(move(a), move(b)) - ab) <= 1e-9);
  }
}

TEST_CASE("iou3d agrees with the Monte-Carlo oracle on random pairs") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 20; ++i) {
    const auto a = random_box(rng, 0.5);
    const auto b = random_box(rng, 0.5);
    CHECK(std::abs(iou3d(a, b) - oracle::monte_carlo_iou(a, b, 200'000, rng)) <= 0.01);
  }
}

TEST_CASE("iou3d matches the closed form on axis-aligned boxes") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> c(-1, 1), s(0.2, 2);
  for (int i = 0; i < 200; ++i) {
    const Vector3d ca(c(rng), c(rng), c(rng)), cb(c(rng), c(rng), c(rng));
    const Vector3d sa(s(rng), s(rng), s(rng)), sb(s(rng), s(rng), s(rng));
    const double yaw = (i % 4) * pi / 2;  // quarter turns of a box keep it axis-aligned
    const Vector3d sa_turned = (i % 2) ? Vector3d(sa.y(), sa.x(), sa.z()) : sa;
    CHECK(std::abs(iou3d(OrientedBox3D(ca, sa, yaw), OrientedBox3D(cb, sb, 0.0)) -
                   oracle::axis_aligned_iou(ca, sa_turned, cb, sb)) <= 1e-9);
  }
}

TEST_CASE("iou2d fixed cases") {
  const AABB2D a(0, 0, 2, 2);
  CHECK(iou2d(a, a) == 1.0);
  CHECK(iou2d(a, AABB2D(3, 3, 4, 4)) == 0.0);
  CHECK(iou2d(a, AABB2D(1, 1, 3, 3)) == Approx(1.0 / 7).epsilon(1e-12));
  CHECK(iou2d(AABB2D(1, 1, 3, 3), a) == iou2d(a, AABB2D(1, 1, 3, 3)));
  CHECK_THROWS_AS(AABB2D(2, 0, 1, 1), std::invalid_argument);
}

TEST_CASE("polygon clipping of two squares") {
  const std::vector<Eigen::Vector2d> sq = {{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  const std::vector<Eigen::Vector2d> shifted = {{1, 1}, {3, 1}, {3, 3}, {1, 3}};
  CHECK(polygon_area(sq) == Approx(4.0));
  CHECK(polygon_area(clip_convex(sq, shifted)) == Approx(1.0));
  const std::vector<Eigen::Vector2d> far = {{5, 5}, {6, 5}, {6, 6}, {5, 6}};
  CHECK(polygon_area(clip_convex(sq, far)) == 0.0);
}

TEST_CASE("project_box by hand with an identity camera") {
  const auto cam = identity_camera();
  const OrientedBox3D cube(Vector3d(0, 0, 2), Vector3d::Ones(), 0.0);
  const AABB2D env = project_envelope(cube, cam);
  CHECK(env.u_min() == Approx(-1.0 / 3));
  CHECK(env.v_min() == Approx(-1.0 / 3));
  CHECK(env.u_max() == Approx(1.0 / 3));
  CHECK(env.v_max() == Approx(1.0 / 3));
  // The clamped form pins the negative half to the image origin.
  const AABB2D clamped = project_box(cube, cam, ImageSize{100, 100});
  CHECK(clamped.u_min() == 0.0);
  CHECK(clamped.u_max() == Approx(1.0 / 3));
}

TEST_CASE("project_box errors and clamping") {
  const auto cam = identity_camera();
  CHECK_THROWS_AS(project_box(OrientedBox3D(Vector3d(0, 0, -3), Vector3d::Ones(), 0.0), cam, ImageSize{100, 100}),
                  BehindCameraError);
  Mat3<double> k;
  k << 100, 0, 50, 0, 100, 50, 0, 0, 1;
  const CameraModel wide(k, Mat3<double>::Identity(), Vector3d::Zero());
  const AABB2D b = project_box(OrientedBox3D(Vector3d(0.4, 0, 1), Vector3d::Ones(), 0.0), wide, ImageSize{100, 100});
  CHECK(b.u_min() >= 0.0);
  CHECK(b.v_min() == 0.0);
  CHECK(b.u_max() == 100.0);
  CHECK(b.v_max() == 100.0);
}

TEST_CASE("projected envelope contains every projected corner") {
  Mat3<double> k;
  k << 500, 0, 320, 0, 500, 240, 0, 0, 1;
  const CameraModel cam(k, Mat3<double>::Identity(), Vector3d(0, 0, 6));
  std::mt19937_64 rng(29);
  for (int i = 0; i < 100; ++i) {
    const auto box = random_box(rng, 1.5);
    const AABB2D env = project_envelope(box, cam);
    for (const auto& p : corners(box)) {
      const auto uv = cam.project(p);
      CHECK(env.contains(uv.x(), uv.y()));
    }
  }
}

TEST_CASE("camera validation") {
  Mat3<double> k = Mat3<double>::Identity();
  k(2, 2) = 2;
  CHECK_THROWS_AS(CameraModel(k, Mat3<double>::Identity(), Vector3d::Zero()), std::invalid_argument);
  CHECK_THROWS_AS(CameraModel(Mat3<double>::Identity(), 2 * Mat3<double>::Identity(), Vector3d::Zero()),
                  std::invalid_argument);
}

TEST_CASE("contains fixed cases") {
  const OrientedBox3D cube(Vector3d::Zero(), Vector3d::Ones(), 0.0);
  CHECK(contains(cube, Vector3d(0, 0, 0)));
  CHECK_FALSE(contains(cube, Vector3d(2, 0, 0)));
  CHECK_FALSE(contains(cube, Vector3d(0, 2, 0)));
  CHECK_FALSE(contains(cube, Vector3d(0, 0, 2)));
  CHECK(contains(cube, Vector3d(0.5, 0.5, 0.5)));  // boundary is inclusive
  CHECK(contains(OrientedBox3D(Vector3d::Zero(), Vector3d::Ones(), pi / 4), Vector3d(0.6, 0, 0)));
  CHECK_FALSE(contains(cube, Vector3d(0.6, 0, 0)));
}

TEST_CASE("contains agrees with the half-space oracle") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-2, 2);
  int agree = 0;
  for (int i = 0; i < 10'000; ++i) {
    const auto box = random_box(rng, 1.0);
    const Vector3d p(u(rng), u(rng), u(rng));
    agree += contains(box, p) == oracle::halfspace_contains(oracle::box_corners(box.center(), box.size(), box.yaw()), p) ? 1 : 0;
  }
  CHECK(agree == 10'000);
}

TEST_CASE("templated on the scalar type") {
  const OrientedBox3<float> a(Vec3<float>(0, 0, 0), Vec3<float>(1, 1, 1), 0.0f);
  const OrientedBox3<float> b(Vec3<float>(0.5f, 0, 0), Vec3<float>(1, 1, 1), 0.0f);
  CHECK(iou3d(a, b) == Approx(1.0 / 3).epsilon(1e-6));
  CHECK(iou3d(a.cast<double>(), b.cast<double>()) == Approx(1.0 / 3));
}
