#include "ov3d/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

namespace ov3d {

namespace {

constexpr std::array<const char*, 24> kIndoorNames = {
    "bed",      "table",     "sofa",       "chair",     "toilet",  "desk",    "dresser",  "night_stand",
    "bookshelf", "bathtub",  "cabinet",    "lamp",      "sink",    "monitor", "printer", "pillow",
    "box",      "ottoman",   "plant",      "microwave", "stool",   "fridge",  "tv_stand", "whiteboard"};

constexpr double kSurfaceFraction = 0.7;
constexpr double kFloorClutterFraction = 0.6;
constexpr double kMinJitteredSize = 0.05;

Eigen::Matrix<std::uint8_t, 3, 1> category_color(int category) {
  const std::uint64_t h = Fnv1a().str("color").u64(static_cast<std::uint64_t>(category)).digest();
  return {static_cast<std::uint8_t>(64 + (h & 0x7f)), static_cast<std::uint8_t>(64 + ((h >> 8) & 0x7f)),
          static_cast<std::uint8_t>(64 + ((h >> 16) & 0x7f))};
}

Vector3d sample_surface_local(const Vector3d& half, Rng& rng) {
  const double ax = half.y() * half.z();
  const double ay = half.x() * half.z();
  const double az = half.x() * half.y();
  const double pick = uniform(rng, 0.0, ax + ay + az);
  const int axis = pick < ax ? 0 : (pick < ax + ay ? 1 : 2);
  Vector3d p(uniform(rng, -half.x(), half.x()), uniform(rng, -half.y(), half.y()), uniform(rng, -half.z(), half.z()));
  p[axis] = uniform(rng, 0.0, 1.0) < 0.5 ? -half[axis] : half[axis];
  return p;
}

}  // namespace

std::vector<std::string> category_names(int num_categories, bool include_background) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(num_categories) + 1);
  for (int c = 0; c < num_categories; ++c) {
    if (static_cast<std::size_t>(c) < kIndoorNames.size()) {
      names.emplace_back(kIndoorNames[static_cast<std::size_t>(c)]);
    } else {
      char buf[32];
      std::snprintf(buf, sizeof buf, "category_%02d", c);
      names.emplace_back(buf);
    }
  }
  if (include_background) names.emplace_back(CategoryVocabulary::kBackgroundName);
  return names;
}

std::vector<bool> category_base_mask(const VocabularySpec& spec) {
  std::vector<bool> mask(static_cast<std::size_t>(spec.num_categories) + (spec.include_background ? 1 : 0), false);
  for (int c = 0; c < spec.num_base; ++c) mask[static_cast<std::size_t>(c)] = true;
  return mask;
}

std::vector<double> category_weights(const VocabularySpec& spec) {
  std::vector<double> w(static_cast<std::size_t>(spec.num_categories), 1.0);
  if (spec.frequency == CategoryFrequency::zipf)
    for (int c = 0; c < spec.num_categories; ++c) w[static_cast<std::size_t>(c)] = std::pow(c + 1.0, -spec.zipf_exponent);
  return w;
}

std::vector<int> tail_categories(const VocabularySpec& spec) {
  const auto w = category_weights(spec);
  std::vector<int> novel;
  for (int c = spec.num_base; c < spec.num_categories; ++c) novel.push_back(c);
  std::stable_sort(novel.begin(), novel.end(), [&](int a, int b) {
    return w[static_cast<std::size_t>(a)] > w[static_cast<std::size_t>(b)];
  });
  const std::size_t head = novel.size() / 2;
  std::vector<int> tail(novel.begin() + static_cast<std::ptrdiff_t>(head), novel.end());
  std::sort(tail.begin(), tail.end());
  return tail;
}

SizeRange category_size_range(std::uint64_t seed, int category) {
  Rng rng = split_rng(seed, {Fnv1a().str("size").digest(), static_cast<std::uint64_t>(category)});
  SizeRange r;
  r.lo = Vector3d(uniform(rng, 0.4, 1.2), uniform(rng, 0.4, 1.2), uniform(rng, 0.4, 1.2));
  r.hi = 1.3 * r.lo;
  return r;
}

CameraModel synthetic_camera(const SceneSpec& spec) {
  const Vector3d& e = spec.extent;
  const double d = spec.camera_distance;
  const double f = 0.95 * std::min(spec.image.width * d / e.x(), spec.image.height * d / e.z());
  Mat3<double> k;
  k << f, 0, spec.image.width / 2, 0, f, spec.image.height / 2, 0, 0, 1;
  Mat3<double> r;
  r << 1, 0, 0, 0, 0, -1, 0, 1, 0;
  const Vector3d position(0.0, -e.y() / 2 - d, e.z() / 2);
  return CameraModel(k, r, -r * position);
}

SyntheticScene generate_scene(const SimulationConfig& cfg, const std::string& id, Rng& rng) {
  cfg.validate();
  const SceneSpec& spec = cfg.scene;
  const Vector3d half_room = spec.extent / 2;
  const auto weights = category_weights(cfg.vocab);
  const auto base = category_base_mask(cfg.vocab);
  std::discrete_distribution<int> pick_category(weights.begin(), weights.end());
  constexpr double pi = std::numbers::pi;

  SyntheticScene out;
  out.requested_objects = spec.objects_per_scene;
  for (int i = 0; i < spec.objects_per_scene; ++i) {
    const int c = pick_category(rng);
    const SizeRange range = category_size_range(cfg.seed, c);
    Vector3d size;
    for (int a = 0; a < 3; ++a) size[a] = uniform(rng, range.lo[a], range.hi[a]);
    const double reach = 0.5 * std::hypot(size.x(), size.y());
    bool placed = false;
    for (int attempt = 0; attempt < spec.placement_retries && !placed; ++attempt) {
      const double yaw = uniform(rng, -pi, pi);
      const double rx = std::max(0.0, half_room.x() - reach);
      const double ry = std::max(0.0, half_room.y() - reach);
      const double x = rx > 0 ? uniform(rng, -rx, rx) : 0.0;
      const double y = ry > 0 ? uniform(rng, -ry, ry) : 0.0;
      const OrientedBox3D box(Vector3d(x, y, size.z() / 2), size, yaw);
      const bool clear = std::all_of(out.truth.begin(), out.truth.end(), [&](const ObjectAnnotation& o) {
        return iou3d(box, o.box) < spec.max_pairwise_iou;
      });
      if (clear) {
        out.truth.push_back({box, c, AnnotationSource::base, 1.0});
        placed = true;
      }
    }
    if (!placed) ++out.placement_failures;
  }

  const Eigen::Index m = spec.points_per_object;
  const Eigen::Index n_objects = static_cast<Eigen::Index>(out.truth.size());
  const Eigen::Index total = n_objects * m + spec.clutter_points;
  PointCloudScene& scene = out.scene;
  scene.id = id;
  scene.points.resize(3, total);
  scene.colors.resize(3, total);
  Eigen::Index col = 0;
  const auto n_surface = static_cast<Eigen::Index>(std::lround(kSurfaceFraction * static_cast<double>(m)));
  for (const auto& t : out.truth) {
    const Vector3d half = t.box.half_size();
    const auto color = category_color(t.category);
    for (Eigen::Index p = 0; p < m; ++p, ++col) {
      const Vector3d local = p < n_surface ? sample_surface_local(half, rng)
                                           : Vector3d(uniform(rng, -half.x(), half.x()),
                                                      uniform(rng, -half.y(), half.y()),
                                                      uniform(rng, -half.z(), half.z()));
      scene.points.col(col) = t.box.to_world(local);
      scene.colors.col(col) = color;
    }
  }
  const auto n_floor =
      static_cast<Eigen::Index>(std::lround(kFloorClutterFraction * static_cast<double>(spec.clutter_points)));
  for (Eigen::Index p = 0; p < spec.clutter_points; ++p, ++col) {
    Vector3d q;
    if (p < n_floor) {
      q = Vector3d(uniform(rng, -half_room.x(), half_room.x()), uniform(rng, -half_room.y(), half_room.y()), 0.0);
    } else {
      const double z = uniform(rng, 0.0, spec.extent.z());
      const double s = uniform(rng, -1.0, 1.0);
      switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
        case 0: q = Vector3d(-half_room.x(), s * half_room.y(), z); break;
        case 1: q = Vector3d(half_room.x(), s * half_room.y(), z); break;
        default: q = Vector3d(s * half_room.x(), half_room.y(), z); break;
      }
    }
    scene.points.col(col) = q;
    scene.colors.col(col).setConstant(128);
  }

  for (const auto& t : out.truth)
    if (base[static_cast<std::size_t>(t.category)]) scene.annotations.push_back(t);
  scene.image_ref = id + ".png";
  scene.camera = synthetic_camera(spec);
  scene.image_size = spec.image;
  return out;
}

std::vector<RegionTag> region_tags(const SyntheticScene& s) {
  std::vector<RegionTag> tags;
  tags.reserve(s.truth.size());
  for (const auto& t : s.truth)
    tags.push_back({s.scene.image_ref, project_box(t.box, *s.scene.camera, s.scene.image_size), t.category});
  return tags;
}

std::vector<AABB2D> reference_boxes(const SyntheticScene& s) {
  std::vector<AABB2D> refs;
  refs.reserve(s.truth.size());
  for (const auto& t : s.truth) refs.push_back(project_box(t.box, *s.scene.camera, s.scene.image_size));
  return refs;
}

double familiarity(const ProposalSpec& spec, double exposure) {
  return spec.objectness_floor + (1.0 - spec.objectness_floor) * (1.0 - std::exp(-exposure / spec.exposure_scale));
}

ProposalSet mock_proposals(const SyntheticScene& s, const SimulationConfig& cfg, const ToyOracle& feature_oracle,
                           std::span<const double> familiarity_by_category, Rng& rng) {
  const ProposalSpec& spec = cfg.proposals;
  constexpr double pi = std::numbers::pi;
  ProposalSet out;
  for (std::size_t i = 0; i < s.truth.size(); ++i) {
    const auto& t = s.truth[i];
    Vector3d center = t.box.center();
    Vector3d size = t.box.size();
    for (int a = 0; a < 3; ++a) {
      center[a] += gaussian(rng, spec.sigma_center);
      size[a] = std::max(kMinJitteredSize, size[a] + gaussian(rng, spec.sigma_size));
    }
    const OrientedBox3D box(center, size, t.box.yaw() + gaussian(rng, spec.sigma_yaw));
    const auto c = static_cast<std::size_t>(t.category);
    const double fam = c < familiarity_by_category.size() ? familiarity_by_category[c] : 1.0;
    const double objectness = std::clamp(iou3d(box, t.box) * fam + gaussian(rng, spec.objectness_noise), 0.0, 1.0);
    out.proposals.push_back({box, objectness, feature_oracle.embed_category(t.category, rng())});
    out.source.push_back(static_cast<int>(i));
  }
  const Vector3d half_room = cfg.scene.extent / 2;
  for (int d = 0; d < spec.distractors; ++d) {
    const Vector3d size(uniform(rng, 0.3, 1.5), uniform(rng, 0.3, 1.5), uniform(rng, 0.3, 1.5));
    const Vector3d center(uniform(rng, -half_room.x(), half_room.x()), uniform(rng, -half_room.y(), half_room.y()),
                          size.z() / 2);
    const OrientedBox3D box(center, size, uniform(rng, -pi, pi));
    const double objectness = uniform(rng, 0.0, spec.distractor_max_objectness);
    Eigen::VectorXd v(feature_oracle.dim());
    for (auto& x : v) x = gaussian(rng, 1.0);
    out.proposals.push_back({box, objectness, Embedding::normalized(v)});
    out.source.push_back(-1);
  }
  return out;
}

}  // namespace ov3d
