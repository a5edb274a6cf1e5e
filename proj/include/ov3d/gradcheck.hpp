#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace ov3d {

inline constexpr double kGradcheckStep = 1e-5;
inline constexpr double kGradcheckTolerance = 1e-4;

/// |a - n| / max(|a|, |n|, floor) over the whole gradient vector.
double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric, double floor = 1e-8);

struct GradcheckReport {
  std::string loss;
  int instances{0};
  int failures{0};
  double max_relative_error{0.0};

  bool passed() const noexcept { return failures == 0; }
};

/// Random instances compared against central differences with step h.
/// Distill instances keep every |f3d - f2d| away from the kink at 0; the
/// detector instances do the same for the L1 terms.
GradcheckReport gradcheck_distill(int instances, std::uint64_t seed, double h = kGradcheckStep,
                                  double tol = kGradcheckTolerance);
GradcheckReport gradcheck_contrastive(int instances, std::uint64_t seed, double h = kGradcheckStep,
                                      double tol = kGradcheckTolerance);
GradcheckReport gradcheck_detector(int instances, std::uint64_t seed, double h = kGradcheckStep,
                                   double tol = kGradcheckTolerance);

std::vector<GradcheckReport> gradcheck_all(int instances, std::uint64_t seed, double h = kGradcheckStep,
                                           double tol = kGradcheckTolerance);

}  // namespace ov3d
