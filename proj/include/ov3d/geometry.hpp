#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace ov3d {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

/// Thrown when a projected point would land at or behind the image plane.
class BehindCameraError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Absolute slack (meters) for inclusive point-in-box tests.
inline constexpr double kContainsTolerance = 1e-9;
/// BEV intersection polygons below this area are treated as empty.
inline constexpr double kSliverArea = 1e-12;

/// Wraps an angle into [-pi, pi).
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  constexpr Scalar two_pi = 2 * pi;
  Scalar r = std::fmod(a + pi, two_pi);
  if (r < 0) r += two_pi;
  if (r >= two_pi) r -= two_pi;
  return r - pi;
}

/// Gravity-aligned box: center, full extents along the box-local axes
/// (x, y, height) and a yaw about +z.
template <typename Scalar>
class OrientedBox3 {
 public:
  using Vector3 = Vec3<Scalar>;

  OrientedBox3(const Vector3& center, const Vector3& size, Scalar yaw)
      : center_(center), size_(size), yaw_(wrap_angle(yaw)) {
    if (!(size_.array() > Scalar(0)).all() || !size_.allFinite() || !center_.allFinite())
      throw std::invalid_argument("OrientedBox3: size components must be positive and finite");
  }

  const Vector3& center() const noexcept { return center_; }
  const Vector3& size() const noexcept { return size_; }
  Scalar yaw() const noexcept { return yaw_; }
  Vector3 half_size() const { return size_ / Scalar(2); }
  Scalar volume() const { return size_.prod(); }
  Scalar z_min() const { return center_.z() - size_.z() / 2; }
  Scalar z_max() const { return center_.z() + size_.z() / 2; }

  /// Scene frame -> box frame (translate by -center, rotate by -yaw).
  Vector3 to_local(const Vector3& p) const {
    const Scalar c = std::cos(yaw_), s = std::sin(yaw_);
    const Vector3 d = p - center_;
    return Vector3(c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z());
  }

  Vector3 to_world(const Vector3& q) const {
    const Scalar c = std::cos(yaw_), s = std::sin(yaw_);
    return center_ + Vector3(c * q.x() - s * q.y(), s * q.x() + c * q.y(), q.z());
  }

  /// Footprint corners, counter-clockwise seen from above, starting at
  /// local (-x, -y).
  std::array<Vec2<Scalar>, 4> bev_corners() const {
    const Scalar c = std::cos(yaw_), s = std::sin(yaw_);
    const Scalar hx = size_.x() / 2, hy = size_.y() / 2;
    const std::array<Vec2<Scalar>, 4> local{Vec2<Scalar>(-hx, -hy), Vec2<Scalar>(hx, -hy),
                                            Vec2<Scalar>(hx, hy), Vec2<Scalar>(-hx, hy)};
    std::array<Vec2<Scalar>, 4> out;
    for (std::size_t i = 0; i < 4; ++i)
      out[i] = Vec2<Scalar>(center_.x() + c * local[i].x() - s * local[i].y(),
                            center_.y() + s * local[i].x() + c * local[i].y());
    return out;
  }

  template <typename Other>
  OrientedBox3<Other> cast() const {
    return OrientedBox3<Other>(center_.template cast<Other>(), size_.template cast<Other>(),
                               static_cast<Other>(yaw_));
  }

 private:
  Vector3 center_;
  Vector3 size_;
  Scalar yaw_;
};

/// Axis-aligned image rectangle in pixels.
template <typename Scalar>
class AABB2 {
 public:
  AABB2() = default;
  AABB2(Scalar u_min, Scalar v_min, Scalar u_max, Scalar v_max)
      : u_min_(u_min), v_min_(v_min), u_max_(u_max), v_max_(v_max) {
    if (!(u_min_ <= u_max_) || !(v_min_ <= v_max_))
      throw std::invalid_argument("AABB2: min corner must not exceed max corner");
  }

  Scalar u_min() const noexcept { return u_min_; }
  Scalar v_min() const noexcept { return v_min_; }
  Scalar u_max() const noexcept { return u_max_; }
  Scalar v_max() const noexcept { return v_max_; }
  Scalar width() const { return u_max_ - u_min_; }
  Scalar height() const { return v_max_ - v_min_; }
  Scalar area() const { return width() * height(); }

  bool contains(Scalar u, Scalar v) const {
    return u >= u_min_ && u <= u_max_ && v >= v_min_ && v <= v_max_;
  }

  friend bool operator==(const AABB2&, const AABB2&) = default;

 private:
  Scalar u_min_{0}, v_min_{0}, u_max_{0}, v_max_{0};
};

struct ImageSize {
  double width{0};
  double height{0};
};

/// Pinhole camera: x_cam = rotation * x_scene + translation, pixel = K x_cam.
template <typename Scalar>
class Camera {
 public:
  using Matrix3 = Mat3<Scalar>;
  using Vector3 = Vec3<Scalar>;

  Camera(const Matrix3& intrinsics, const Matrix3& rotation, const Vector3& translation)
      : K_(intrinsics), R_(rotation), t_(translation) {
    if (std::abs(K_(2, 2) - Scalar(1)) > Scalar(0))
      throw std::invalid_argument("Camera: intrinsics(2,2) must be 1");
    const Scalar err = (R_.transpose() * R_ - Matrix3::Identity()).cwiseAbs().maxCoeff();
    if (!(err <= Scalar(1e-9)))
      throw std::invalid_argument("Camera: rotation is not orthonormal");
  }

  const Matrix3& intrinsics() const noexcept { return K_; }
  const Matrix3& rotation() const noexcept { return R_; }
  const Vector3& translation() const noexcept { return t_; }

  Vector3 to_camera(const Vector3& p) const { return R_ * p + t_; }

  /// Projects a scene point; throws when its depth is not positive.
  Vec2<Scalar> project(const Vector3& p) const {
    const Vector3 pc = to_camera(p);
    if (!(pc.z() > Scalar(0))) throw BehindCameraError("point at non-positive depth");
    const Vector3 uvw = K_ * pc;
    return Vec2<Scalar>(uvw.x() / uvw.z(), uvw.y() / uvw.z());
  }

 private:
  Matrix3 K_;
  Matrix3 R_;
  Vector3 t_;
};

using OrientedBox3D = OrientedBox3<double>;
using AABB2D = AABB2<double>;
using CameraModel = Camera<double>;
using Vector3d = Vec3<double>;

/// Eight corners: bottom face counter-clockwise from local (-x,-y), then the
/// top face in the same order.
template <typename Scalar>
std::array<Vec3<Scalar>, 8> corners(const OrientedBox3<Scalar>& box) {
  const auto bev = box.bev_corners();
  std::array<Vec3<Scalar>, 8> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = Vec3<Scalar>(bev[i].x(), bev[i].y(), box.z_min());
    out[i + 4] = Vec3<Scalar>(bev[i].x(), bev[i].y(), box.z_max());
  }
  return out;
}

/// Inverse of corners(): recovers center/size/yaw from the documented order.
template <typename Scalar>
OrientedBox3<Scalar> fit_box_from_corners(const std::array<Vec3<Scalar>, 8>& c) {
  Vec3<Scalar> center = Vec3<Scalar>::Zero();
  for (const auto& p : c) center += p;
  center /= Scalar(8);
  const Vec2<Scalar> ex = (c[1] - c[0]).template head<2>();
  const Vec2<Scalar> ey = (c[3] - c[0]).template head<2>();
  const Vec3<Scalar> size(ex.norm(), ey.norm(), c[4].z() - c[0].z());
  return OrientedBox3<Scalar>(center, size, std::atan2(ex.y(), ex.x()));
}

/// Inclusive containment in the box frame.
template <typename Scalar>
bool contains(const OrientedBox3<Scalar>& box, const Vec3<Scalar>& p) {
  const Vec3<Scalar> q = box.to_local(p);
  const Vec3<Scalar> h = box.half_size();
  const Scalar tol = static_cast<Scalar>(kContainsTolerance);
  return std::abs(q.x()) <= h.x() + tol && std::abs(q.y()) <= h.y() + tol &&
         std::abs(q.z()) <= h.z() + tol;
}

namespace detail {

template <typename Scalar>
Scalar cross2(const Vec2<Scalar>& a, const Vec2<Scalar>& b) {
  return a.x() * b.y() - a.y() * b.x();
}

}  // namespace detail

/// Shoelace area of a simple polygon (absolute value).
template <typename Scalar>
Scalar polygon_area(const std::vector<Vec2<Scalar>>& poly) {
  if (poly.size() < 3) return Scalar(0);
  Scalar twice = 0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i)
    twice += detail::cross2(poly[i], poly[(i + 1) % n]);
  return std::abs(twice) / 2;
}

/// Sutherland-Hodgman: clips `subject` against a convex counter-clockwise
/// polygon.
template <typename Scalar, typename ClipRange>
std::vector<Vec2<Scalar>> clip_convex(std::vector<Vec2<Scalar>> subject, const ClipRange& clip) {
  const std::size_t m = std::size(clip);
  for (std::size_t e = 0; e < m && !subject.empty(); ++e) {
    const Vec2<Scalar>& a = clip[e];
    const Vec2<Scalar>& b = clip[(e + 1) % m];
    const Vec2<Scalar> edge = b - a;
    auto side = [&](const Vec2<Scalar>& p) { return detail::cross2<Scalar>(edge, p - a); };

    std::vector<Vec2<Scalar>> out;
    out.reserve(subject.size() + 2);
    for (std::size_t i = 0, n = subject.size(); i < n; ++i) {
      const Vec2<Scalar>& p = subject[i];
      const Vec2<Scalar>& q = subject[(i + 1) % n];
      const Scalar sp = side(p), sq = side(q);
      if (sp >= 0) out.push_back(p);
      if ((sp >= 0) != (sq >= 0)) {
        const Scalar t = sp / (sp - sq);
        out.push_back(p + t * (q - p));
      }
    }
    subject = std::move(out);
  }
  return subject;
}

/// Footprint intersection area of two boxes.
template <typename Scalar>
Scalar bev_intersection_area(const OrientedBox3<Scalar>& a, const OrientedBox3<Scalar>& b) {
  const auto ca = a.bev_corners();
  const auto cb = b.bev_corners();
  const Scalar area = polygon_area(clip_convex(std::vector<Vec2<Scalar>>(ca.begin(), ca.end()), cb));
  return area < static_cast<Scalar>(kSliverArea) ? Scalar(0) : area;
}

/// Rotated 3D IoU: footprint polygon intersection times vertical overlap.
template <typename Scalar>
Scalar iou3d(const OrientedBox3<Scalar>& a, const OrientedBox3<Scalar>& b) {
  const Scalar va = a.volume(), vb = b.volume();
  const Scalar degenerate = static_cast<Scalar>(kSliverArea);
  if (va <= degenerate || vb <= degenerate) return Scalar(0);
  const Scalar dz = std::min(a.z_max(), b.z_max()) - std::max(a.z_min(), b.z_min());
  if (dz <= Scalar(0)) return Scalar(0);
  const Scalar inter = bev_intersection_area(a, b) * dz;
  if (inter <= Scalar(0)) return Scalar(0);
  return std::clamp(inter / (va + vb - inter), Scalar(0), Scalar(1));
}

template <typename Scalar>
Scalar iou2d(const AABB2<Scalar>& a, const AABB2<Scalar>& b) {
  const Scalar iw = std::min(a.u_max(), b.u_max()) - std::max(a.u_min(), b.u_min());
  const Scalar ih = std::min(a.v_max(), b.v_max()) - std::max(a.v_min(), b.v_min());
  if (iw <= Scalar(0) || ih <= Scalar(0)) return Scalar(0);
  const Scalar inter = iw * ih;
  const Scalar uni = a.area() + b.area() - inter;
  if (uni <= Scalar(0)) return Scalar(0);
  return std::clamp(inter / uni, Scalar(0), Scalar(1));
}

/// Min/max envelope of the eight projected corners, without clamping.
template <typename Scalar>
AABB2<Scalar> project_envelope(const OrientedBox3<Scalar>& box, const Camera<Scalar>& cam) {
  Scalar u0 = std::numeric_limits<Scalar>::infinity(), v0 = u0;
  Scalar u1 = -u0, v1 = -u0;
  for (const auto& c : corners(box)) {
    const Vec2<Scalar> uv = cam.project(c);
    u0 = std::min(u0, uv.x());
    v0 = std::min(v0, uv.y());
    u1 = std::max(u1, uv.x());
    v1 = std::max(v1, uv.y());
  }
  return AABB2<Scalar>(u0, v0, u1, v1);
}

/// Projected envelope clamped to the image rectangle [0,w] x [0,h].
template <typename Scalar>
AABB2<Scalar> project_box(const OrientedBox3<Scalar>& box, const Camera<Scalar>& cam,
                          const ImageSize& image) {
  const AABB2<Scalar> env = project_envelope(box, cam);
  const Scalar w = static_cast<Scalar>(image.width), h = static_cast<Scalar>(image.height);
  const Scalar u0 = std::clamp(env.u_min(), Scalar(0), w);
  const Scalar u1 = std::clamp(env.u_max(), Scalar(0), w);
  const Scalar v0 = std::clamp(env.v_min(), Scalar(0), h);
  const Scalar v1 = std::clamp(env.v_max(), Scalar(0), h);
  return AABB2<Scalar>(u0, v0, u1, v1);
}

}  // namespace ov3d
