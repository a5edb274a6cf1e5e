#include "ov3d/alignment.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace ov3d {

std::vector<IndexPair> hungarian_match(const Eigen::MatrixXd& cost) {
  if (!cost.allFinite()) throw std::invalid_argument("hungarian_match: cost matrix has NaN or infinite entries");
  if (cost.rows() == 0 || cost.cols() == 0) return {};

  const bool transposed = cost.rows() > cost.cols();
  const Eigen::MatrixXd a = transposed ? Eigen::MatrixXd(cost.transpose()) : cost;
  const auto n = static_cast<std::size_t>(a.rows());
  const auto m = static_cast<std::size_t>(a.cols());
  constexpr double inf = std::numeric_limits<double>::infinity();

  // Shortest augmenting paths with potentials; rows and columns are 1-based
  // and column 0 is the virtual source.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = owner[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<IndexPair> pairs;
  pairs.reserve(n);
  for (std::size_t j = 1; j <= m; ++j) {
    if (owner[j] == 0) continue;
    const int r = static_cast<int>(owner[j] - 1), c = static_cast<int>(j - 1);
    pairs.emplace_back(transposed ? c : r, transposed ? r : c);
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

double assignment_cost(const Eigen::MatrixXd& cost, std::span<const IndexPair> pairs) {
  double total = 0.0;
  for (const auto& [r, c] : pairs) total += cost(r, c);
  return total;
}

Eigen::MatrixXd fg_cost_matrix(std::span<const OrientedBox3D> proposals, std::span<const ObjectAnnotation> targets,
                               const MatcherConfig& cfg) {
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(proposals.size()), static_cast<Eigen::Index>(targets.size()));
  for (std::size_t i = 0; i < proposals.size(); ++i)
    for (std::size_t j = 0; j < targets.size(); ++j) {
      const double l1 = (proposals[i].center() - targets[j].box.center()).cwiseAbs().sum();
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          cfg.lambda_center * l1 + cfg.lambda_iou * (1.0 - iou3d(proposals[i], targets[j].box));
    }
  return cost;
}

namespace {

void fill_unmatched(MatchResult& r, std::size_t n) {
  std::vector<char> matched(n, 0);
  for (const auto& [p, t] : r.pairs) matched[static_cast<std::size_t>(p)] = 1;
  r.unmatched_proposals.clear();
  for (std::size_t i = 0; i < n; ++i)
    if (!matched[i]) r.unmatched_proposals.push_back(static_cast<int>(i));
}

}  // namespace

MatchResult fg_match(std::span<const OrientedBox3D> proposals, std::span<const ObjectAnnotation> targets,
                     const MatcherConfig& cfg) {
  MatchResult r;
  if (!targets.empty() && !proposals.empty()) {
    if (cfg.kind == MatcherKind::bipartite) {
      r.pairs = hungarian_match(fg_cost_matrix(proposals, targets, cfg));
    } else {
      for (std::size_t i = 0; i < proposals.size(); ++i) {
        double best = 0.0;
        int best_j = -1;
        for (std::size_t j = 0; j < targets.size(); ++j) {
          const double iou = iou3d(proposals[i], targets[j].box);
          if (iou > best) {
            best = iou;
            best_j = static_cast<int>(j);
          }
        }
        if (best_j >= 0 && best > cfg.iou_threshold) r.pairs.emplace_back(static_cast<int>(i), best_j);
      }
    }
  }
  for (const auto& [p, t] : r.pairs) r.labels.push_back(targets[static_cast<std::size_t>(t)].category);
  fill_unmatched(r, proposals.size());
  return r;
}

std::vector<int> bg_match(std::span<const OrientedBox3D> proposals, const CameraModel& cam, const ImageSize& image,
                          std::span<const AABB2D> refs, double k) {
  std::vector<int> out;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    AABB2D projected;
    try {
      projected = project_box(proposals[i], cam, image);
    } catch (const BehindCameraError&) {
      continue;
    }
    double max_iou = 0.0;
    for (const auto& ref : refs) max_iou = std::max(max_iou, iou2d(projected, ref));
    if (max_iou < k) out.push_back(static_cast<int>(i));
  }
  return out;
}

void assign_background(MatchResult& match, std::span<const int> background) {
  const std::set<int> unmatched(match.unmatched_proposals.begin(), match.unmatched_proposals.end());
  match.background_proposals.clear();
  for (int b : background)
    if (unmatched.count(b)) match.background_proposals.push_back(b);
  std::sort(match.background_proposals.begin(), match.background_proposals.end());
  match.background_proposals.erase(std::unique(match.background_proposals.begin(), match.background_proposals.end()),
                                   match.background_proposals.end());
}

std::vector<int> select_alignment_queries(const MatchResult& match, int total_queries, int extra, Rng& rng) {
  std::set<int> chosen;
  for (const auto& [p, t] : match.pairs) chosen.insert(p);
  for (int b : match.background_proposals) chosen.insert(b);

  std::vector<int> rest;
  for (int q = 0; q < total_queries; ++q)
    if (!chosen.count(q)) rest.push_back(q);
  const std::size_t take = std::min(rest.size(), static_cast<std::size_t>(std::max(extra, 0)));
  // Partial Fisher-Yates: the first `take` entries become the sample.
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, rest.size() - 1);
    std::swap(rest[i], rest[pick(rng)]);
  }
  chosen.insert(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(take));
  return {chosen.begin(), chosen.end()};
}

}  // namespace ov3d
