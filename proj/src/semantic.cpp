#include "ov3d/semantic.hpp"

#include <cmath>
#include <stdexcept>

#include "ov3d/errors.hpp"
#include "ov3d/rng.hpp"

namespace ov3d {

namespace {

Eigen::VectorXd gaussian_vector(Rng& rng, int dim) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = n01(rng);
  return v;
}

std::uint64_t region_key(const std::string& image_ref, const AABB2D& r) {
  return Fnv1a()
      .str(image_ref)
      .f64(r.u_min())
      .f64(r.v_min())
      .f64(r.u_max())
      .f64(r.v_max())
      .digest();
}

constexpr std::uint64_t kTextStream = 0x74657874;    // "text"
constexpr std::uint64_t kRegionStream = 0x72656769;  // "regi"
constexpr std::uint64_t kClutterStream = 0x636c7574;  // "clut"

}  // namespace

Embedding Embedding::normalized(Eigen::VectorXd v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n))
    throw std::invalid_argument("Embedding: cannot normalize a zero or non-finite vector");
  v /= n;
  return Embedding(std::move(v));
}

Embedding Embedding::from_unit(Eigen::VectorXd v) {
  if (!(std::abs(v.norm() - 1.0) <= kNormTolerance))
    throw std::invalid_argument("Embedding: vector is not unit norm");
  return Embedding(std::move(v));
}

CategoryVocabulary::CategoryVocabulary(std::vector<std::string> names, std::vector<bool> base_mask,
                                       Eigen::MatrixXd text_embeddings, double temperature)
    : names_(std::move(names)),
      base_mask_(std::move(base_mask)),
      text_(std::move(text_embeddings)),
      temperature_(temperature) {
  const auto c = static_cast<Eigen::Index>(names_.size());
  if (base_mask_.size() != names_.size() || text_.rows() != c)
    throw DimensionMismatch("CategoryVocabulary: names, base mask and embeddings disagree in length");
  const auto n_base = std::count(base_mask_.begin(), base_mask_.end(), true);
  if (n_base < 1 || n_base >= c)
    throw std::invalid_argument("CategoryVocabulary: base mask must mark at least one and fewer than all categories");
  if (!(temperature_ > 0.0)) throw std::invalid_argument("CategoryVocabulary: temperature must be positive");
  for (Eigen::Index i = 0; i < c; ++i)
    if (!(std::abs(text_.row(i).norm() - 1.0) <= Embedding::kNormTolerance))
      throw std::invalid_argument("CategoryVocabulary: text embedding rows must be unit norm");
}

std::optional<int> CategoryVocabulary::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  return std::nullopt;
}

int ClassProbabilities::argmax() const {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[best]) best = i;
  return static_cast<int>(best);
}

ClassProbabilities classify(const Embedding& region_feature, const CategoryVocabulary& vocab) {
  if (region_feature.dim() != vocab.dim())
    throw DimensionMismatch("classify: feature dimension does not match the vocabulary");
  Eigen::VectorXd logits = vocab.temperature() * (vocab.text_embeddings() * region_feature.values());
  logits.array() -= logits.maxCoeff();
  Eigen::VectorXd p = logits.array().exp();
  p /= p.sum();
  return {std::move(p)};
}

ToyOracle::ToyOracle(std::uint64_t seed, std::vector<std::string> vocab_names, double noise_sigma,
                     int dim, std::vector<RegionTag> tags, double region_match_iou)
    : seed_(seed),
      names_(std::move(vocab_names)),
      noise_sigma_(noise_sigma),
      dim_(dim),
      tags_(std::move(tags)),
      region_match_iou_(region_match_iou) {
  if (!(noise_sigma_ >= 0.0)) throw std::invalid_argument("ToyOracle: noise_sigma must be >= 0");
  if (dim_ < 1) throw std::invalid_argument("ToyOracle: dimension must be positive");
  for (const auto& t : tags_)
    if (t.category < 0 || t.category >= static_cast<int>(names_.size()))
      throw std::out_of_range("ToyOracle: region tag has unknown category " + std::to_string(t.category));
  text_.resize(static_cast<Eigen::Index>(names_.size()), dim_);
  for (std::size_t i = 0; i < names_.size(); ++i)
    text_.row(static_cast<Eigen::Index>(i)) = embed_text(names_[i]).values().transpose();
}

Embedding ToyOracle::embed_text(const std::string& name) const {
  Rng rng = split_rng(seed_, {kTextStream, Fnv1a().str(name).digest()});
  return Embedding::normalized(gaussian_vector(rng, dim_));
}

std::vector<Embedding> ToyOracle::embed_texts(std::span<const std::string> names) const {
  std::vector<Embedding> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(embed_text(n));
  return out;
}

Embedding ToyOracle::embed_category(int category, std::uint64_t salt) const {
  if (category < 0 || category >= static_cast<int>(names_.size()))
    throw std::out_of_range("ToyOracle: unknown category tag " + std::to_string(category));
  Eigen::VectorXd v = text_.row(category).transpose();
  if (noise_sigma_ == 0.0) return Embedding::from_unit(std::move(v));
  Rng rng = split_rng(seed_, {kRegionStream, static_cast<std::uint64_t>(category), salt});
  v += noise_sigma_ * gaussian_vector(rng, dim_);
  return Embedding::normalized(std::move(v));
}

std::optional<int> ToyOracle::region_category(const std::string& image_ref, const AABB2D& region) const {
  double best = 0.0;
  std::optional<int> cat;
  for (const auto& t : tags_) {
    if (t.image_ref != image_ref) continue;
    const double iou = iou2d(t.region, region);
    if (iou > best) {
      best = iou;
      cat = t.category;
    }
  }
  if (best >= region_match_iou_) return cat;
  return std::nullopt;
}

Embedding ToyOracle::embed_region(const std::string& image_ref, const AABB2D& region) const {
  const std::uint64_t key = region_key(image_ref, region);
  if (auto c = region_category(image_ref, region)) return embed_category(*c, key);
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == CategoryVocabulary::kBackgroundName) return embed_category(static_cast<int>(i), key);
  Rng rng = split_rng(seed_, {kClutterStream, key});
  return Embedding::normalized(gaussian_vector(rng, dim_));
}

ToyOracle ToyOracle::with_tags(std::vector<RegionTag> tags) const {
  return ToyOracle(seed_, names_, noise_sigma_, dim_, std::move(tags), region_match_iou_);
}

Eigen::MatrixXd ToyOracle::text_matrix() const { return text_; }

ToyOracle toy_oracle(std::uint64_t seed, std::vector<std::string> vocab_names, double noise_sigma, int dim) {
  return ToyOracle(seed, std::move(vocab_names), noise_sigma, dim);
}

ReplayOracle::ReplayOracle(std::vector<std::string> names, std::vector<Embedding> text,
                           std::vector<RegionEntry> regions)
    : names_(std::move(names)), text_(std::move(text)), regions_(std::move(regions)), dim_(0) {
  if (names_.size() != text_.size())
    throw DimensionMismatch("ReplayOracle: names and text embeddings differ in count");
  if (!text_.empty()) dim_ = static_cast<int>(text_.front().dim());
  else if (!regions_.empty()) dim_ = static_cast<int>(regions_.front().embedding.dim());
  for (const auto& e : text_)
    if (e.dim() != dim_) throw DimensionMismatch("ReplayOracle: inconsistent text embedding dimension");
  for (const auto& r : regions_)
    if (r.embedding.dim() != dim_) throw DimensionMismatch("ReplayOracle: inconsistent region embedding dimension");
}

std::vector<Embedding> ReplayOracle::embed_texts(std::span<const std::string> names) const {
  std::vector<Embedding> out;
  out.reserve(names.size());
  for (const auto& n : names) {
    auto it = std::find(names_.begin(), names_.end(), n);
    if (it == names_.end()) throw std::out_of_range("ReplayOracle: no text embedding for '" + n + "'");
    out.push_back(text_[static_cast<std::size_t>(it - names_.begin())]);
  }
  return out;
}

Embedding ReplayOracle::embed_region(const std::string& image_ref, const AABB2D& region) const {
  for (const auto& r : regions_) {
    if (r.image_ref != image_ref) continue;
    if (std::abs(r.region.u_min() - region.u_min()) <= kKeyTolerance &&
        std::abs(r.region.v_min() - region.v_min()) <= kKeyTolerance &&
        std::abs(r.region.u_max() - region.u_max()) <= kKeyTolerance &&
        std::abs(r.region.v_max() - region.v_max()) <= kKeyTolerance)
      return r.embedding;
  }
  throw std::out_of_range("ReplayOracle: region not in cache for image '" + image_ref + "'");
}

CategoryVocabulary make_vocabulary(const SemanticOracle& oracle, std::vector<std::string> names,
                                   std::vector<bool> base_mask, double temperature) {
  const auto text = oracle.embed_texts(names);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(text.size()), oracle.dim());
  for (std::size_t i = 0; i < text.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = text[i].values().transpose();
  return CategoryVocabulary(std::move(names), std::move(base_mask), std::move(m), temperature);
}

}  // namespace ov3d
