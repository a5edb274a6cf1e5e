#include "ov3d/losses.hpp"

#include <stdexcept>

namespace ov3d {

namespace {

double sign(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

// Value and gradient of -target^T log(max(pred, eps)).
double guarded_cross_entropy(const Eigen::VectorXd& pred, const Eigen::VectorXd& target, Eigen::VectorXd& grad) {
  grad.setZero(pred.size());
  double v = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    if (target[i] == 0.0) continue;
    if (pred[i] > kLogEpsilon) {
      v -= target[i] * std::log(pred[i]);
      grad[i] = -target[i] / pred[i];
    } else {
      v -= target[i] * std::log(kLogEpsilon);
    }
  }
  return v;
}

}  // namespace

void DetectorLossInputs::validate() const {
  constexpr double tol = 1e-6;
  if (angle_cls_pred.size() != angle_cls_target.size() || angle_cls_pred.size() == 0)
    throw DimensionMismatch("detector_loss: angle bin distributions differ in length");
  auto is_dist = [](const auto& v) { return (v.array() >= 0.0).all() && std::abs(v.sum() - 1.0) <= tol; };
  if (!is_dist(angle_cls_pred) || !is_dist(angle_cls_target) || !is_dist(objectness_pred) ||
      !is_dist(objectness_target))
    throw std::invalid_argument("detector_loss: class distributions must be non-negative and sum to 1");
  const auto& w = weights;
  if (w.angle_cls < 0 || w.angle_reg < 0 || w.size < 0 || w.center < 0 || w.objectness < 0)
    throw std::invalid_argument("detector_loss: weights must be non-negative");
}

double huber(double x, double delta) {
  const double a = std::abs(x);
  return a <= delta ? 0.5 * x * x : delta * (a - 0.5 * delta);
}

double huber_derivative(double x, double delta) {
  return std::abs(x) <= delta ? x : delta * sign(x);
}

DetectorLossReport detector_loss(const DetectorLossInputs& in) {
  in.validate();
  return detector_loss_unchecked(in);
}

DetectorLossReport detector_loss_unchecked(const DetectorLossInputs& in) {
  const auto& w = in.weights;
  DetectorLossReport r;
  auto& g = r.gradient;

  Eigen::VectorXd ce_grad;
  r.value += w.angle_cls * guarded_cross_entropy(in.angle_cls_pred, in.angle_cls_target, ce_grad);
  g.angle_cls = w.angle_cls * ce_grad;

  const double res = in.angle_res_pred - in.angle_res_target;
  r.value += w.angle_reg * huber(res);
  g.angle_res = w.angle_reg * huber_derivative(res);

  const Vector3d dsize = in.size_pred - in.size_target;
  r.value += w.size * dsize.cwiseAbs().sum();
  g.size = w.size * dsize.unaryExpr([](double x) { return sign(x); });

  const Vector3d dcenter = in.center_pred - in.center_target;
  r.value += w.center * dcenter.cwiseAbs().sum();
  g.center = w.center * dcenter.unaryExpr([](double x) { return sign(x); });

  Eigen::VectorXd obj_grad;
  r.value += w.objectness * guarded_cross_entropy(in.objectness_pred, in.objectness_target, obj_grad);
  g.objectness = w.objectness * obj_grad;
  return r;
}

double detector_loss(std::span<const DetectorLossInputs> batch, std::vector<DetectorLossGradient>* gradients) {
  double total = 0.0;
  if (gradients) gradients->clear();
  for (const auto& in : batch) {
    auto r = detector_loss(in);
    total += r.value;
    if (gradients) gradients->push_back(std::move(r.gradient));
  }
  return total;
}

}  // namespace ov3d
