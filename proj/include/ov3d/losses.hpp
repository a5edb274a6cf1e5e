#pragma once

#include <Eigen/Core>
#include <cmath>
#include <span>
#include <vector>

#include "ov3d/errors.hpp"
#include "ov3d/geometry.hpp"

namespace ov3d {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Loss value and its gradient with respect to the differentiated input
/// (same shape as that input).
template <typename Scalar>
struct LossReport {
  Scalar value{0};
  MatrixX<Scalar> gradient;
};

/// Class-agnostic L1 distillation, sum over queries (rows) and dimensions of
/// |f3d - f2d|. Gradient w.r.t. f3d is sign(f3d - f2d), 0 at ties.
template <typename Derived3, typename Derived2>
LossReport<typename Derived3::Scalar> distill_loss(const Eigen::MatrixBase<Derived3>& f3d,
                                                   const Eigen::MatrixBase<Derived2>& f2d) {
  using Scalar = typename Derived3::Scalar;
  if (f3d.rows() != f2d.rows() || f3d.cols() != f2d.cols())
    throw DimensionMismatch("distill_loss: 3D and 2D feature batches differ in shape");
  const MatrixX<Scalar> diff = f3d - f2d.template cast<Scalar>();
  LossReport<Scalar> r;
  r.value = diff.cwiseAbs().sum();
  r.gradient = diff.unaryExpr([](Scalar x) { return Scalar((x > Scalar(0)) - (x < Scalar(0))); });
  return r;
}

/// Sum over rows of CE(softmax(temperature * f_n . text^T), onehot(label_n)).
/// Only matched queries should be passed in. Gradient w.r.t. the features:
/// temperature * (S - H) * text.
template <typename DerivedF, typename DerivedT>
LossReport<typename DerivedF::Scalar> contrastive_loss(const Eigen::MatrixBase<DerivedF>& features,
                                                       std::span<const int> labels,
                                                       const Eigen::MatrixBase<DerivedT>& text,
                                                       typename DerivedF::Scalar temperature) {
  using Scalar = typename DerivedF::Scalar;
  if (features.cols() != text.cols())
    throw DimensionMismatch("contrastive_loss: feature and text dimensions differ");
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw DimensionMismatch("contrastive_loss: one label per feature row required");
  const Eigen::Index classes = text.rows();
  for (int l : labels)
    if (l < 0 || l >= classes) throw DimensionMismatch("contrastive_loss: label outside the vocabulary");

  MatrixX<Scalar> logits = temperature * (features * text.transpose().template cast<Scalar>());
  LossReport<Scalar> r;
  MatrixX<Scalar> delta(logits.rows(), logits.cols());
  for (Eigen::Index n = 0; n < logits.rows(); ++n) {
    Eigen::Index top = 0;
    const Scalar mx = logits.row(n).maxCoeff(&top);
    const auto shifted = (logits.row(n).array() - mx).exp();
    // log(z) as log1p of the non-maximal terms keeps saturated rows accurate.
    Scalar rest(0);
    for (Eigen::Index c = 0; c < classes; ++c)
      if (c != top) rest += shifted(c);
    const Scalar z = Scalar(1) + rest;
    r.value += (mx - logits(n, labels[static_cast<std::size_t>(n)])) + std::log1p(rest);
    delta.row(n) = shifted / z;
    delta(n, labels[static_cast<std::size_t>(n)]) -= Scalar(1);
  }
  r.gradient = temperature * (delta * text.template cast<Scalar>());
  return r;
}

/// One-hot overload; rows of `onehot` must each hold a single 1.
template <typename DerivedF, typename DerivedH, typename DerivedT>
LossReport<typename DerivedF::Scalar> contrastive_loss(const Eigen::MatrixBase<DerivedF>& features,
                                                       const Eigen::MatrixBase<DerivedH>& onehot,
                                                       const Eigen::MatrixBase<DerivedT>& text,
                                                       typename DerivedF::Scalar temperature) {
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(onehot.rows()));
  for (Eigen::Index n = 0; n < onehot.rows(); ++n) {
    Eigen::Index at = -1;
    int ones = 0;
    for (Eigen::Index c = 0; c < onehot.cols(); ++c) {
      if (onehot(n, c) == 1) {
        at = c;
        ++ones;
      } else if (onehot(n, c) != 0) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) throw DimensionMismatch("contrastive_loss: label rows must be one-hot");
    labels.push_back(static_cast<int>(at));
  }
  if (onehot.cols() != text.rows()) throw DimensionMismatch("contrastive_loss: one-hot width must equal vocabulary size");
  return contrastive_loss(features, std::span<const int>(labels), text, temperature);
}

/// Weights of the box/objectness terms; defaults follow the 3DETR recipe.
struct DetectorLossWeights {
  double angle_cls = 0.1;
  double angle_reg = 0.5;
  double size = 1.0;
  double center = 5.0;
  double objectness = 1.0;
};

/// Predicted vs. target quantities for one matched query.
struct DetectorLossInputs {
  Eigen::VectorXd angle_cls_pred;    // distribution over heading bins
  Eigen::VectorXd angle_cls_target;  // one-hot
  double angle_res_pred{0.0};
  double angle_res_target{0.0};
  Vector3d size_pred = Vector3d::Zero();
  Vector3d size_target = Vector3d::Zero();
  Vector3d center_pred = Vector3d::Zero();
  Vector3d center_target = Vector3d::Zero();
  Eigen::Vector2d objectness_pred = Eigen::Vector2d(0.5, 0.5);    // (no-object, object)
  Eigen::Vector2d objectness_target = Eigen::Vector2d(0.0, 1.0);
  DetectorLossWeights weights;

  void validate() const;
};

struct DetectorLossGradient {
  Eigen::VectorXd angle_cls;
  double angle_res{0.0};
  Vector3d size = Vector3d::Zero();
  Vector3d center = Vector3d::Zero();
  Eigen::Vector2d objectness = Eigen::Vector2d::Zero();
};

struct DetectorLossReport {
  double value{0.0};
  DetectorLossGradient gradient;
};

inline constexpr double kLogEpsilon = 1e-12;
inline constexpr double kHuberDelta = 1.0;

double huber(double x, double delta = kHuberDelta);
double huber_derivative(double x, double delta = kHuberDelta);

/// -l_ac a^T log(a_hat) + l_ar huber(r_hat - r) + l_d |d_hat - d|_1
/// + l_c |c_hat - c|_1 - l_s s^T log(s_hat), with log guarded by kLogEpsilon.
DetectorLossReport detector_loss(const DetectorLossInputs& in);

/// Same formula without validate(), so finite differences may step off the
/// probability simplex.
DetectorLossReport detector_loss_unchecked(const DetectorLossInputs& in);

/// Sum of detector_loss over a batch; gradients keep the batch order.
double detector_loss(std::span<const DetectorLossInputs> batch, std::vector<DetectorLossGradient>* gradients = nullptr);

}  // namespace ov3d
