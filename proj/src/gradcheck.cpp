#include "ov3d/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "ov3d/losses.hpp"
#include "ov3d/rng.hpp"

namespace ov3d {

namespace {

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Eigen::MatrixXd gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (auto& x : m.reshaped()) x = gaussian(rng, 1.0);
  return m;
}

Eigen::MatrixXd unit_rows(Eigen::MatrixXd m) {
  m.rowwise().normalize();
  return m;
}

/// Central differences of f over every coordinate of x.
Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                 double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// A value at least `gap` away from zero, random sign and magnitude.
double away_from_zero(Rng& rng, double gap, double scale) {
  const double mag = uniform(rng, gap, scale);
  return uniform(rng, 0.0, 1.0) < 0.5 ? -mag : mag;
}

void record(GradcheckReport& r, double err, double tol) {
  ++r.instances;
  r.max_relative_error = std::max(r.max_relative_error, err);
  if (!(err <= tol)) ++r.failures;
}

// Flattened layout: angle_cls (B), angle_res, size (3), center (3), objectness (2).
Eigen::VectorXd pack_predictions(const DetectorLossInputs& in) {
  const Eigen::Index b = in.angle_cls_pred.size();
  Eigen::VectorXd x(b + 9);
  x << in.angle_cls_pred, in.angle_res_pred, in.size_pred, in.center_pred, in.objectness_pred;
  return x;
}

void unpack_predictions(const Eigen::VectorXd& x, DetectorLossInputs& in) {
  const Eigen::Index b = in.angle_cls_pred.size();
  in.angle_cls_pred = x.head(b);
  in.angle_res_pred = x[b];
  in.size_pred = x.segment<3>(b + 1);
  in.center_pred = x.segment<3>(b + 4);
  in.objectness_pred = x.segment<2>(b + 7);
}

Eigen::VectorXd pack_gradient(const DetectorLossGradient& g) {
  Eigen::VectorXd x(g.angle_cls.size() + 9);
  x << g.angle_cls, g.angle_res, g.size, g.center, g.objectness;
  return x;
}

Eigen::VectorXd random_distribution(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (auto& x : v) x = uniform(rng, 0.05, 1.0);
  return v / v.sum();
}

}  // namespace

double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric, double floor) {
  const double scale = std::max({analytic.norm(), numeric.norm(), floor});
  return (analytic - numeric).norm() / scale;
}

GradcheckReport gradcheck_distill(int instances, std::uint64_t seed, double h, double tol) {
  GradcheckReport r{"distill_loss"};
  Rng rng = split_rng(seed, {Fnv1a().str("distill").digest()});
  for (int i = 0; i < instances; ++i) {
    const int n = uniform_int(rng, 1, 8);
    const int d = uniform_int(rng, 2, 16);
    const Eigen::MatrixXd f3d = gaussian_matrix(rng, n, d);
    Eigen::MatrixXd offset(n, d);
    for (auto& x : offset.reshaped()) x = away_from_zero(rng, 1e-2, 1.0);
    const Eigen::MatrixXd f2d = f3d - offset;
    const auto report = distill_loss(f3d, f2d);
    const auto value = [&](const Eigen::VectorXd& x) {
      return distill_loss(x.reshaped(n, d), f2d).value;
    };
    const Eigen::VectorXd numeric = numeric_gradient(value, f3d.reshaped(), h);
    record(r, relative_error(report.gradient.reshaped(), numeric), tol);
  }
  return r;
}

GradcheckReport gradcheck_contrastive(int instances, std::uint64_t seed, double h, double tol) {
  GradcheckReport r{"contrastive_loss"};
  Rng rng = split_rng(seed, {Fnv1a().str("contrastive").digest()});
  for (int i = 0; i < instances; ++i) {
    const int n = uniform_int(rng, 1, 6);
    const int c = uniform_int(rng, 2, 10);
    const int d = uniform_int(rng, 2, 16);
    const Eigen::MatrixXd feats = unit_rows(gaussian_matrix(rng, n, d));
    const Eigen::MatrixXd text = unit_rows(gaussian_matrix(rng, c, d));
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& l : labels) l = uniform_int(rng, 0, c - 1);
    const double temperature = std::exp(uniform(rng, 0.0, std::log(100.0)));
    const auto report = contrastive_loss(feats, std::span<const int>(labels), text, temperature);
    const auto value = [&](const Eigen::VectorXd& x) {
      const Eigen::MatrixXd f = x.reshaped(n, d);
      return contrastive_loss(f, std::span<const int>(labels), text, temperature).value;
    };
    const Eigen::VectorXd numeric = numeric_gradient(value, feats.reshaped(), h);
    record(r, relative_error(report.gradient.reshaped(), numeric), tol);
  }
  return r;
}

GradcheckReport gradcheck_detector(int instances, std::uint64_t seed, double h, double tol) {
  GradcheckReport r{"detector_loss"};
  Rng rng = split_rng(seed, {Fnv1a().str("detector").digest()});
  for (int i = 0; i < instances; ++i) {
    const int bins = uniform_int(rng, 2, 12);
    DetectorLossInputs in;
    in.angle_cls_pred = random_distribution(rng, bins);
    in.angle_cls_target = Eigen::VectorXd::Zero(bins);
    in.angle_cls_target[uniform_int(rng, 0, bins - 1)] = 1.0;
    in.angle_res_target = uniform(rng, -0.5, 0.5);
    in.angle_res_pred = in.angle_res_target + away_from_zero(rng, 1e-2, 2.0);
    for (int a = 0; a < 3; ++a) {
      in.size_target[a] = uniform(rng, 0.2, 2.0);
      in.size_pred[a] = in.size_target[a] + away_from_zero(rng, 1e-2, 0.5);
      in.center_target[a] = uniform(rng, -3.0, 3.0);
      in.center_pred[a] = in.center_target[a] + away_from_zero(rng, 1e-2, 0.5);
    }
    in.objectness_pred = random_distribution(rng, 2);
    in.objectness_target = uniform(rng, 0.0, 1.0) < 0.5 ? Eigen::Vector2d(1, 0) : Eigen::Vector2d(0, 1);
    in.weights = {uniform(rng, 0.05, 1.0), uniform(rng, 0.05, 1.0), uniform(rng, 0.05, 1.0),
                  uniform(rng, 0.05, 5.0), uniform(rng, 0.05, 1.0)};
    // Keep the Huber argument clear of its transition at delta.
    const double res = in.angle_res_pred - in.angle_res_target;
    if (std::abs(std::abs(res) - kHuberDelta) < 1e-2) in.angle_res_pred += 0.05;

    const auto report = detector_loss(in);
    const auto value = [&](const Eigen::VectorXd& x) {
      DetectorLossInputs probe = in;
      unpack_predictions(x, probe);
      return detector_loss_unchecked(probe).value;
    };
    const Eigen::VectorXd numeric = numeric_gradient(value, pack_predictions(in), h);
    record(r, relative_error(pack_gradient(report.gradient), numeric), tol);
  }
  return r;
}

std::vector<GradcheckReport> gradcheck_all(int instances, std::uint64_t seed, double h, double tol) {
  return {gradcheck_distill(instances, seed, h, tol), gradcheck_contrastive(instances, seed, h, tol),
          gradcheck_detector(instances, seed, h, tol)};
}

}  // namespace ov3d
