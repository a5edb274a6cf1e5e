#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ov3d/geometry.hpp"

namespace ov3d {

/// Unit-norm feature vector (text, region or 3D query feature).
class Embedding {
 public:
  static constexpr double kNormTolerance = 1e-6;

  /// Scales `v` to unit length; throws on a zero or non-finite vector.
  static Embedding normalized(Eigen::VectorXd v);
  /// Accepts `v` as-is after checking |v| = 1 within kNormTolerance.
  static Embedding from_unit(Eigen::VectorXd v);

  const Eigen::VectorXd& values() const noexcept { return values_; }
  Eigen::Index dim() const noexcept { return values_.size(); }

  friend bool operator==(const Embedding& a, const Embedding& b) { return a.values_ == b.values_; }

 private:
  explicit Embedding(Eigen::VectorXd v) : values_(std::move(v)) {}
  Eigen::VectorXd values_;
};

/// The super-category list with its base ("seen") subset and text embeddings.
class CategoryVocabulary {
 public:
  static constexpr const char* kBackgroundName = "background";

  CategoryVocabulary(std::vector<std::string> names, std::vector<bool> base_mask,
                     Eigen::MatrixXd text_embeddings, double temperature);

  int size() const noexcept { return static_cast<int>(names_.size()); }
  int dim() const noexcept { return static_cast<int>(text_.cols()); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<bool>& base_mask() const noexcept { return base_mask_; }
  bool is_base(int c) const { return base_mask_.at(static_cast<std::size_t>(c)); }
  /// Rows are unit text embeddings, one per category.
  const Eigen::MatrixXd& text_embeddings() const noexcept { return text_; }
  double temperature() const noexcept { return temperature_; }
  std::optional<int> index_of(const std::string& name) const;
  std::optional<int> background_index() const { return index_of(kBackgroundName); }
  bool is_background(int c) const { return background_index() == c; }

 private:
  std::vector<std::string> names_;
  std::vector<bool> base_mask_;
  Eigen::MatrixXd text_;
  double temperature_;
};

struct ClassProbabilities {
  Eigen::VectorXd probs;

  /// Lowest index wins ties.
  int argmax() const;
  double max() const { return probs.maxCoeff(); }
};

/// softmax(temperature * <feature, text_c>) over the vocabulary.
ClassProbabilities classify(const Embedding& region_feature, const CategoryVocabulary& vocab);

/// Stand-in for the image/text encoders. Implementations must be
/// deterministic and safe for concurrent const use.
class SemanticOracle {
 public:
  virtual ~SemanticOracle() = default;
  virtual int dim() const = 0;
  virtual std::vector<Embedding> embed_texts(std::span<const std::string> names) const = 0;
  virtual Embedding embed_region(const std::string& image_ref, const AABB2D& region) const = 0;
};

/// Ground-truth content of an image region, used by ToyOracle to decide what
/// a crop "shows".
struct RegionTag {
  std::string image_ref;
  AABB2D region;
  int category;
};

/// Seeded toy encoder. Text embeddings are uniform on the unit sphere (seeded
/// by name); a region tagged with category c embeds as
/// normalize(text_c + noise_sigma * N(0, I)), with the noise seeded by the
/// query itself so identical queries give identical vectors.
class ToyOracle final : public SemanticOracle {
 public:
  static constexpr int kDefaultDim = 64;
  static constexpr double kDefaultRegionMatchIou = 0.5;

  ToyOracle(std::uint64_t seed, std::vector<std::string> vocab_names, double noise_sigma,
            int dim = kDefaultDim, std::vector<RegionTag> tags = {},
            double region_match_iou = kDefaultRegionMatchIou);

  int dim() const override { return dim_; }
  double noise_sigma() const noexcept { return noise_sigma_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<RegionTag>& tags() const noexcept { return tags_; }

  std::vector<Embedding> embed_texts(std::span<const std::string> names) const override;
  Embedding embed_text(const std::string& name) const;

  /// Noisy embedding of category `category` (index into vocab_names); `salt`
  /// selects the noise draw. Throws std::out_of_range for unknown categories.
  Embedding embed_category(int category, std::uint64_t salt) const;

  /// Embeds the tagged region overlapping `region` best (IoU at least
  /// region_match_iou). Untagged regions embed as the "background" category
  /// when the vocabulary has one, otherwise as a seeded random direction.
  Embedding embed_region(const std::string& image_ref, const AABB2D& region) const override;

  /// Category the oracle considers visible in `region`, if any.
  std::optional<int> region_category(const std::string& image_ref, const AABB2D& region) const;

  /// Copy of this oracle with a different set of region tags.
  ToyOracle with_tags(std::vector<RegionTag> tags) const;

  /// Text embeddings for `vocab_names` stacked as rows.
  Eigen::MatrixXd text_matrix() const;

 private:
  std::uint64_t seed_;
  std::vector<std::string> names_;
  double noise_sigma_;
  int dim_;
  std::vector<RegionTag> tags_;
  double region_match_iou_;
  Eigen::MatrixXd text_;
};

/// Convenience factory mirroring ToyOracle's constructor.
ToyOracle toy_oracle(std::uint64_t seed, std::vector<std::string> vocab_names, double noise_sigma,
                     int dim = ToyOracle::kDefaultDim);

/// Replays precomputed encoder outputs: text vectors by name and region
/// vectors keyed by (image_ref, box).
class ReplayOracle final : public SemanticOracle {
 public:
  struct RegionEntry {
    std::string image_ref;
    AABB2D region;
    Embedding embedding;
  };
  /// Box coordinates within this many pixels match a cached key.
  static constexpr double kKeyTolerance = 1e-6;

  ReplayOracle(std::vector<std::string> names, std::vector<Embedding> text,
               std::vector<RegionEntry> regions);

  int dim() const override { return dim_; }
  std::vector<Embedding> embed_texts(std::span<const std::string> names) const override;
  Embedding embed_region(const std::string& image_ref, const AABB2D& region) const override;

 private:
  std::vector<std::string> names_;
  std::vector<Embedding> text_;
  std::vector<RegionEntry> regions_;
  int dim_;
};

/// Builds a vocabulary whose text embeddings come from `oracle`.
CategoryVocabulary make_vocabulary(const SemanticOracle& oracle, std::vector<std::string> names,
                                   std::vector<bool> base_mask, double temperature);

}  // namespace ov3d
