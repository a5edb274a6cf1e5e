#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "ov3d/io.hpp"
#include "ov3d/ply.hpp"
#include "ov3d/scene.hpp"

using namespace ov3d;
using doctest::Approx;
namespace fs = std::filesystem;
constexpr double pi = std::numbers::pi;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ov3d_test_scene_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

PointCloudScene scene_from(const Points& pts) {
  PointCloudScene s;
  s.id = "fixture";
  s.points = pts;
  return s;
}

Points uniform_points(std::mt19937_64& rng, Eigen::Index n, const Vector3d& lo, const Vector3d& hi) {
  Points p(3, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) p(k, i) = std::uniform_real_distribution<double>(lo[k], hi[k])(rng);
  return p;
}

CameraModel identity_camera() {
  return CameraModel(Mat3<double>::Identity(), Mat3<double>::Identity(), Vector3d::Zero());
}

}  // namespace

TEST_CASE("count_points_in_box fixed cases") {
  const OrientedBox3D unit(Vector3d(0, 0, 0), Vector3d::Ones(), 0);
  CHECK(count_points_in_box(PointCloudScene{}, unit) == 0);

  std::mt19937_64 rng(1);
  CHECK(count_points_in_box(scene_from(uniform_points(rng, 500, Vector3d::Constant(-0.4), Vector3d::Constant(0.4))),
                            unit) == 500);

  // 11^3 grid spaced 0.1 m on [-0.5, 0.5]^3, boundaries included.
  Points grid(3, 1331);
  Eigen::Index n = 0;
  for (int i = -5; i <= 5; ++i)
    for (int j = -5; j <= 5; ++j)
      for (int k = -5; k <= 5; ++k) grid.col(n++) = Vector3d(i * 0.1, j * 0.1, k * 0.1);
  int expected = 0;
  for (Eigen::Index i = 0; i < grid.cols(); ++i)
    if ((grid.col(i).array().abs() <= 0.5 + 1e-12).all()) ++expected;
  CHECK(expected == 1331);
  CHECK(count_points_in_box(scene_from(grid), unit) == static_cast<std::size_t>(expected));
}

TEST_CASE("points_in_box agrees with the half-space oracle") {
  std::mt19937_64 rng(2);
  const OrientedBox3D box(Vector3d(0.3, -0.2, 0.5), Vector3d(1.2, 0.7, 0.9), 0.8);
  const Points pts = uniform_points(rng, 5000, Vector3d::Constant(-1.5), Vector3d::Constant(1.5));
  const auto mask = points_in_box(pts, box);
  const auto k = oracle::box_corners(box.center(), box.size(), box.yaw());
  for (Eigen::Index i = 0; i < pts.cols(); ++i) CHECK(mask[i] == oracle::halfspace_contains(k, pts.col(i)));
}

TEST_CASE("extract_object selects exactly the enclosed points") {
  std::mt19937_64 rng(3);
  Points pts(3, 100);
  pts.leftCols(10) = uniform_points(rng, 10, Vector3d::Constant(-0.4), Vector3d::Constant(0.4));
  pts.rightCols(90) = uniform_points(rng, 90, Vector3d(2, 2, 2), Vector3d(4, 4, 4));
  const auto scene = scene_from(pts);
  const OrientedBox3D box(Vector3d::Zero(), Vector3d::Ones(), 0);
  const auto sample = extract_object(scene, box);
  CHECK(sample.size() == 10);
  CHECK(sample.box_size == box.size());
  CHECK(sample.origin_scene == "fixture");

  CHECK_THROWS_AS(extract_object(scene, OrientedBox3D(Vector3d(-5, -5, -5), Vector3d::Ones(), 0)),
                  EmptyObjectError);
  CHECK_THROWS_AS(extract_object(PointCloudScene{}, box), EmptyObjectError);
}

TEST_CASE("extract_object at yaw pi/4 undoes the rigid transform") {
  const Vector3d c(1.0, 2.0, 0.5);
  const double yaw = pi / 4;
  const OrientedBox3D box(c, Vector3d(2, 1, 1), yaw);
  Points pts(3, 3);
  pts.col(0) = c + Vector3d(0.3, 0.1, 0.2);
  pts.col(1) = c + Vector3d(-0.2, 0.25, -0.4);
  pts.col(2) = c + Vector3d(0.0, -0.3, 0.1);
  const auto sample = extract_object(scene_from(pts), box);
  REQUIRE(sample.size() == 3);
  const double cs = std::cos(yaw), sn = std::sin(yaw);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const Vector3d d = pts.col(i) - c;
    const Vector3d local(cs * d.x() + sn * d.y(), -sn * d.x() + cs * d.y(), d.z());
    CHECK((sample.points.col(i) - local).norm() < 1e-12);
  }
}

TEST_CASE("extracted samples stay inside their zero-centered box") {
  std::mt19937_64 rng(4);
  const Points pts = uniform_points(rng, 3000, Vector3d::Constant(-2), Vector3d::Constant(2));
  const auto scene = scene_from(pts);
  std::uniform_real_distribution<double> u(-1, 1), s(0.5, 2), y(-pi, pi);
  for (int t = 0; t < 50; ++t) {
    const OrientedBox3D box(Vector3d(u(rng), u(rng), u(rng)), Vector3d(s(rng), s(rng), s(rng)), y(rng));
    const auto sample = extract_object(scene, box);
    const Vector3d h = sample.box_size / 2;
    for (Eigen::Index i = 0; i < sample.size(); ++i)
      CHECK((sample.points.col(i).array().abs() <= h.array()).all());
  }
}

TEST_CASE("crop_region_2d delegates to project_box") {
  PointCloudScene scene;
  scene.camera = identity_camera();
  scene.image_size = {100, 100};
  const OrientedBox3D box(Vector3d(0, 0, 3), Vector3d(2, 2, 2), 0);
  const AABB2D crop = crop_region_2d(scene, box);
  CHECK(crop == project_box(box, *scene.camera, scene.image_size));

  PointCloudScene no_camera;
  CHECK_THROWS_AS(crop_region_2d(no_camera, box), ConfigurationError);
  CHECK_THROWS_AS(crop_region_2d(scene, OrientedBox3D(Vector3d(0, 0, -3), Vector3d::Ones(), 0)), BehindCameraError);
}

TEST_CASE("insert_object into an empty scene succeeds on the first try") {
  NovelObjectSample sample;
  sample.points = Points::Zero(3, 5);
  sample.box_size = Vector3d(0.5, 0.5, 0.5);
  sample.category = 7;
  sample.semantic_prob = 0.8;
  PointCloudScene scene;
  Rng rng(11);
  const auto out = insert_object(scene, sample, InsertConfig{}, rng);
  CHECK(out.inserted);
  CHECK(out.attempts == 1);
  CHECK(out.pre_count == 0);
  CHECK(scene.size() == 5);
  REQUIRE(scene.annotations.size() == 1);
  CHECK(scene.annotations[0].source == AnnotationSource::discovered);
  CHECK(scene.annotations[0].category == 7);
  CHECK(scene.annotations[0].confidence == 0.8);
}

TEST_CASE("a candidate holding 1500 points is rejected with J = 1000") {
  // A tight 1500-point cluster at x = 1 on the line y = 0; placements are
  // drawn on x in [0, 4], so candidates within 0.5 of the cluster swallow it.
  std::mt19937_64 gen(5);
  Points pts = uniform_points(gen, 1500, Vector3d(0.99, -0.01, 0.0), Vector3d(1.01, 0.01, 0.02));
  NovelObjectSample sample;
  sample.points = Points::Zero(3, 1);
  sample.box_size = Vector3d::Ones();
  InsertConfig cfg;
  cfg.occlusion_threshold = 1000;
  cfg.region = Eigen::Vector4d(0, 0, 4, 0);

  // Find a seed whose first candidate lands on the cluster.
  std::uint64_t seed = 0;
  for (;; ++seed) {
    Rng probe(seed);
    const double x = uniform(probe, 0, 4);
    if (std::abs(x - 1.0) < 0.4) break;
  }
  {
    Rng probe(seed);
    const double x = uniform(probe, 0, 4);
    const double yaw = uniform(probe, -pi, pi);
    const OrientedBox3D first(Vector3d(x, 0, 0.5), sample.box_size, yaw);
    CHECK(count_points_in_box(scene_from(pts), first) == 1500);
  }

  auto scene = scene_from(pts);
  Rng rng(seed);
  const auto out = insert_object(scene, sample, cfg, rng);
  REQUIRE(out.inserted);
  CHECK(out.attempts >= 2);
  CHECK(out.pre_count == 0);
  CHECK(std::abs(out.box->center().x() - 1.0) > 0.4);
}

TEST_CASE("exhausted retries leave a dense scene unchanged") {
  std::mt19937_64 gen(6);
  const Points pts = uniform_points(gen, 20000, Vector3d(0, 0, 0), Vector3d(4, 4, 2));
  auto scene = scene_from(pts);
  scene.annotations.push_back({OrientedBox3D(Vector3d(1, 1, 0.5), Vector3d::Ones(), 0), 0});
  const auto before = scene;
  NovelObjectSample sample;
  sample.points = Points::Zero(3, 3);
  sample.box_size = Vector3d(1.5, 1.5, 1.5);
  InsertConfig cfg;
  cfg.occlusion_threshold = 10;
  cfg.max_retries = 25;
  Rng rng(9);
  const auto out = insert_object(scene, sample, cfg, rng);
  CHECK_FALSE(out.inserted);
  CHECK(out.attempts == 25);
  CHECK_FALSE(out.box.has_value());
  CHECK(scene.points == before.points);
  CHECK(scene.annotations.size() == before.annotations.size());
}

TEST_CASE("insert_object configuration is validated") {
  PointCloudScene scene;
  NovelObjectSample sample;
  sample.points = Points::Zero(3, 1);
  Rng rng(1);
  InsertConfig zero_j;
  zero_j.occlusion_threshold = 0;
  CHECK_THROWS_AS(insert_object(scene, sample, zero_j, rng), std::invalid_argument);
  InsertConfig zero_retries;
  zero_retries.max_retries = 0;
  CHECK_THROWS_AS(insert_object(scene, sample, zero_retries, rng), std::invalid_argument);
  NovelObjectSample empty;
  CHECK_THROWS_AS(insert_object(scene, empty, InsertConfig{}, rng), EmptyObjectError);
}

TEST_CASE("after insertion the box holds the pre-existing count plus the sample") {
  std::mt19937_64 gen(7);
  int inserted = 0;
  for (int trial = 0; trial < 40; ++trial) {
    auto scene = scene_from(uniform_points(gen, 4000, Vector3d(0, 0, 0), Vector3d(6, 6, 3)));
    const Points source = uniform_points(gen, 800, Vector3d(-0.4, -0.3, -0.5), Vector3d(0.4, 0.3, 0.5));
    const auto sample = extract_object(scene_from(source), OrientedBox3D(Vector3d::Zero(), Vector3d(0.8, 0.6, 1.0), 0));
    InsertConfig cfg;
    cfg.occlusion_threshold = 60;
    Rng rng(static_cast<std::uint64_t>(trial));
    const auto before = scene.size();
    const auto out = insert_object(scene, sample, cfg, rng);
    if (!out.inserted) continue;
    ++inserted;
    CHECK(out.pre_count <= cfg.occlusion_threshold);
    CHECK(out.first_point == before);
    CHECK(out.num_points == sample.size());
    CHECK(count_points_in_box(scene, *out.box) == out.pre_count + static_cast<std::size_t>(sample.size()));
    CHECK(out.box->center().z() == Approx(scene.floor_level() + 0.5));
  }
  CHECK(inserted > 20);
}

TEST_CASE("extract then re-place at the original pose reproduces the points") {
  std::mt19937_64 gen(8);
  const OrientedBox3D box(Vector3d(0.7, -1.1, 0.6), Vector3d(1.3, 0.9, 1.2), -2.2);
  const Points pts = uniform_points(gen, 2000, Vector3d(-1, -3, -1), Vector3d(3, 1, 2));
  const auto scene = scene_from(pts);
  const auto sample = extract_object(scene, box);
  PointCloudScene target;
  place_object(target, sample, box, 1.0);
  const auto mask = points_in_box(pts, box);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    if (!mask[i]) continue;
    CHECK((target.points.col(k) - pts.col(i)).cwiseAbs().maxCoeff() < 1e-9);
    ++k;
  }
  CHECK(k == target.size());
}

TEST_CASE("PLY round trips bit-exactly in both encodings") {
  const fs::path dir = scratch_dir("ply");
  std::mt19937_64 gen(9);
  const Points pts = uniform_points(gen, 257, Vector3d::Constant(-100), Vector3d::Constant(100));
  Colors colors(3, pts.cols());
  for (Eigen::Index i = 0; i < pts.cols(); ++i)
    for (int k = 0; k < 3; ++k) colors(k, i) = static_cast<std::uint8_t>(gen() & 0xff);
  for (const auto fmt : {PlyFormat::ascii, PlyFormat::binary_little_endian}) {
    const fs::path path = dir / (fmt == PlyFormat::ascii ? "a.ply" : "b.ply");
    write_ply(path, pts, colors, fmt);
    const auto back = read_ply(path);
    CHECK(back.points == pts);
    CHECK(back.colors == colors);
    write_ply(path, pts, Colors(3, 0), fmt);
    const auto plain = read_ply(path);
    CHECK(plain.points == pts);
    CHECK(plain.colors.cols() == 0);
  }
}

TEST_CASE("PLY reader accepts float32 coordinates and skips extra properties") {
  const fs::path path = scratch_dir("ply_float") / "f.ply";
  {
    std::ofstream out(path);
    out << "ply\nformat ascii 1.0\ncomment fixture\nelement vertex 2\n"
        << "property float x\nproperty float y\nproperty float nx\nproperty float z\n"
        << "element face 0\nproperty list uchar int vertex_indices\nend_header\n"
        << "1.5 2.5 9 3.5\n-1 0 9 0.25\n";
  }
  const auto cloud = read_ply(path);
  REQUIRE(cloud.points.cols() == 2);
  CHECK(cloud.points.col(0) == Vector3d(1.5, 2.5, 3.5));
  CHECK(cloud.points.col(1) == Vector3d(-1, 0, 0.25));
  CHECK_THROWS_AS(read_ply(path.parent_path() / "missing.ply"), PlyError);
}

TEST_CASE("scene JSON round trips bit-exactly") {
  const fs::path dir = scratch_dir("json");
  std::mt19937_64 gen(10);
  PointCloudScene scene;
  scene.id = "scene_0001";
  scene.points = uniform_points(gen, 300, Vector3d::Constant(-3), Vector3d::Constant(3));
  scene.colors = Colors::Constant(3, 300, 17);
  scene.annotations.push_back({OrientedBox3D(Vector3d(0.1 / 3, 1.0 / 7, 0.5), Vector3d(1, 2, 0.3), 0.123456789), 2,
                               AnnotationSource::base, 1.0});
  scene.annotations.push_back({OrientedBox3D(Vector3d(-1, 1, 0.2), Vector3d(0.4, 0.4, 0.4), -3.0), 9,
                               AnnotationSource::discovered, 0.61});
  scene.image_ref = "scene_0001.png";
  Mat3<double> k;
  k << 500, 0, 320, 0, 500, 240, 0, 0, 1;
  scene.camera = CameraModel(k, Mat3<double>::Identity(), Vector3d(0.1, 0.2, 3.0));
  scene.image_size = {640, 480};

  io::save_scene(scene, dir / "scene.json");
  const auto back = io::load_scene(dir / "scene.json");
  CHECK(back.id == scene.id);
  CHECK(back.points == scene.points);
  CHECK(back.colors == scene.colors);
  CHECK(back.image_ref == scene.image_ref);
  REQUIRE(back.annotations.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.annotations[i].box.center() == scene.annotations[i].box.center());
    CHECK(back.annotations[i].box.size() == scene.annotations[i].box.size());
    CHECK(back.annotations[i].box.yaw() == scene.annotations[i].box.yaw());
    CHECK(back.annotations[i].category == scene.annotations[i].category);
    CHECK(back.annotations[i].source == scene.annotations[i].source);
    CHECK(back.annotations[i].confidence == scene.annotations[i].confidence);
  }
  REQUIRE(back.camera.has_value());
  CHECK(back.camera->intrinsics() == k);
  CHECK(back.camera->translation() == scene.camera->translation());
  CHECK(back.image_size.width == 640);
  CHECK(back.image_size.height == 480);
}

TEST_CASE("base_annotations and floor_level") {
  PointCloudScene scene;
  CHECK(scene.floor_level() == 0.0);
  scene.points = Points(3, 2);
  scene.points << 0, 1, 0, 1, -0.3, 0.7;
  CHECK(scene.floor_level() == -0.3);
  scene.annotations.push_back({OrientedBox3D(Vector3d::Zero(), Vector3d::Ones(), 0), 1});
  scene.annotations.push_back({OrientedBox3D(Vector3d::Zero(), Vector3d::Ones(), 0), 8, AnnotationSource::discovered, 0.5});
  const auto base = scene.base_annotations();
  REQUIRE(base.size() == 1);
  CHECK(base[0].category == 1);
}
