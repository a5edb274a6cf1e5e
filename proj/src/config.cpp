#include "ov3d/config.hpp"

#include <stdexcept>

#include "ov3d/errors.hpp"
#include "ov3d/io.hpp"

namespace ov3d {

using nlohmann::json;

void SimulationConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigurationError("config: " + m); };
  if (num_scenes < 0) fail("num_scenes must be >= 0");
  if (scenes_per_round < 0) fail("scenes_per_round must be >= 0");
  if (vocab.num_base < 1 || vocab.num_base >= vocab.num_categories) fail("need 1 <= num_base < num_categories");
  if (vocab.embedding_dim < 1) fail("embedding_dim must be positive");
  if (!(vocab.temperature > 0)) fail("vocab.temperature must be positive");
  if (!(scene.extent.array() > 0).all()) fail("scene.extent must be positive");
  if (scene.objects_per_scene < 0 || scene.points_per_object < 1 || scene.clutter_points < 0)
    fail("scene counts out of range");
  if (!(scene.image.width > 0 && scene.image.height > 0)) fail("scene.image must be positive");
  if (!(scene.camera_distance > 0)) fail("scene.camera_distance must be positive");
  if (proposals.sigma_center < 0 || proposals.sigma_size < 0 || proposals.sigma_yaw < 0 ||
      proposals.feature_noise < 0 || proposals.objectness_noise < 0)
    fail("noise levels must be >= 0");
  if (proposals.distractors < 0) fail("proposals.distractors must be >= 0");
  if (!(proposals.objectness_floor >= 0 && proposals.objectness_floor <= 1)) fail("objectness_floor outside [0,1]");
  if (!(proposals.exposure_scale > 0)) fail("exposure_scale must be positive");
  if (proposals.unlabeled_exposure < 0 || proposals.exposure_per_round < 0) fail("exposure rates must be >= 0");
  if (oracle.noise_sigma < 0) fail("oracle.noise_sigma must be >= 0");
  discovery.validate();
  insert.validate();
  if (enrich_k < 0) fail("enrich_k must be >= 0");
  if (alignment.k_bg < 0 || !(alignment.temperature > 0)) fail("alignment thresholds out of range");
  if (alignment.queries < 1 || alignment.extra < 0 || alignment.angle_bins < 1) fail("alignment counts out of range");
  if (rounds < 0 || epochs_per_round < 1) fail("rounds/epochs_per_round out of range");
}

json to_json(const SimulationConfig& c) {
  const auto& w = c.alignment.weights;
  return {
      {"seed", c.seed},
      {"num_scenes", c.num_scenes},
      {"scenes_per_round", c.scenes_per_round},
      {"rounds", c.rounds},
      {"epochs_per_round", c.epochs_per_round},
      {"vocab",
       {{"num_categories", c.vocab.num_categories},
        {"num_base", c.vocab.num_base},
        {"embedding_dim", c.vocab.embedding_dim},
        {"temperature", c.vocab.temperature},
        {"include_background", c.vocab.include_background},
        {"frequency", c.vocab.frequency == CategoryFrequency::zipf ? "zipf" : "uniform"},
        {"zipf_exponent", c.vocab.zipf_exponent}}},
      {"scene",
       {{"extent", io::to_json(c.scene.extent)},
        {"objects_per_scene", c.scene.objects_per_scene},
        {"points_per_object", c.scene.points_per_object},
        {"clutter_points", c.scene.clutter_points},
        {"max_pairwise_iou", c.scene.max_pairwise_iou},
        {"placement_retries", c.scene.placement_retries},
        {"image_size", {c.scene.image.width, c.scene.image.height}},
        {"camera_distance", c.scene.camera_distance}}},
      {"proposals",
       {{"sigma_center", c.proposals.sigma_center},
        {"sigma_size", c.proposals.sigma_size},
        {"sigma_yaw", c.proposals.sigma_yaw},
        {"distractors", c.proposals.distractors},
        {"distractor_max_objectness", c.proposals.distractor_max_objectness},
        {"feature_noise", c.proposals.feature_noise},
        {"objectness_noise", c.proposals.objectness_noise},
        {"objectness_floor", c.proposals.objectness_floor},
        {"exposure_scale", c.proposals.exposure_scale},
        {"unlabeled_exposure", c.proposals.unlabeled_exposure},
        {"exposure_per_round", c.proposals.exposure_per_round}}},
      {"oracle", {{"noise_sigma", c.oracle.noise_sigma}, {"region_match_iou", c.oracle.region_match_iou}}},
      {"discovery",
       {{"theta_g", c.discovery.theta_g},
        {"theta_s", c.discovery.theta_s},
        {"dedup_iou", c.discovery.dedup_iou},
        {"update_period", c.discovery.update_period},
        {"mode", c.discovery_mode == DiscoveryMode::all ? "all" : "batch"}}},
      {"insert",
       {{"k", c.enrich_k},
        {"occlusion_threshold", c.insert.occlusion_threshold},
        {"max_retries", c.insert.max_retries}}},
      {"alignment",
       {{"k_bg", c.alignment.k_bg},
        {"temperature", c.alignment.temperature},
        {"matcher", c.alignment.matcher.kind == MatcherKind::iou ? "iou" : "bipartite"},
        {"lambda_center", c.alignment.matcher.lambda_center},
        {"lambda_iou", c.alignment.matcher.lambda_iou},
        {"match_iou_threshold", c.alignment.matcher.iou_threshold},
        {"queries", c.alignment.queries},
        {"extra", c.alignment.extra},
        {"angle_bins", c.alignment.angle_bins},
        {"loss_weights",
         {{"angle_cls", w.angle_cls},
          {"angle_reg", w.angle_reg},
          {"size", w.size},
          {"center", w.center},
          {"objectness", w.objectness}}}}},
  };
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

SimulationConfig config_from_json(const json& j) {
  SimulationConfig c;
  try {
    read(j, "seed", c.seed);
    read(j, "num_scenes", c.num_scenes);
    read(j, "scenes_per_round", c.scenes_per_round);
    read(j, "rounds", c.rounds);
    read(j, "epochs_per_round", c.epochs_per_round);
    if (j.contains("vocab")) {
      const json& v = j["vocab"];
      read(v, "num_categories", c.vocab.num_categories);
      read(v, "num_base", c.vocab.num_base);
      read(v, "embedding_dim", c.vocab.embedding_dim);
      read(v, "temperature", c.vocab.temperature);
      read(v, "include_background", c.vocab.include_background);
      read(v, "zipf_exponent", c.vocab.zipf_exponent);
      if (v.contains("frequency")) {
        const auto f = v["frequency"].get<std::string>();
        if (f == "uniform") c.vocab.frequency = CategoryFrequency::uniform;
        else if (f == "zipf") c.vocab.frequency = CategoryFrequency::zipf;
        else throw ConfigurationError("config: vocab.frequency must be 'uniform' or 'zipf'");
      }
    }
    if (j.contains("scene")) {
      const json& s = j["scene"];
      if (s.contains("extent")) c.scene.extent = io::vector3_from_json(s["extent"]);
      read(s, "objects_per_scene", c.scene.objects_per_scene);
      read(s, "points_per_object", c.scene.points_per_object);
      read(s, "clutter_points", c.scene.clutter_points);
      read(s, "max_pairwise_iou", c.scene.max_pairwise_iou);
      read(s, "placement_retries", c.scene.placement_retries);
      read(s, "camera_distance", c.scene.camera_distance);
      if (s.contains("image_size")) {
        const auto wh = s["image_size"].get<std::vector<double>>();
        if (wh.size() != 2) throw ConfigurationError("config: scene.image_size must be [w, h]");
        c.scene.image = {wh[0], wh[1]};
      }
    }
    if (j.contains("proposals")) {
      const json& p = j["proposals"];
      read(p, "sigma_center", c.proposals.sigma_center);
      read(p, "sigma_size", c.proposals.sigma_size);
      read(p, "sigma_yaw", c.proposals.sigma_yaw);
      read(p, "distractors", c.proposals.distractors);
      read(p, "distractor_max_objectness", c.proposals.distractor_max_objectness);
      read(p, "feature_noise", c.proposals.feature_noise);
      read(p, "objectness_noise", c.proposals.objectness_noise);
      read(p, "objectness_floor", c.proposals.objectness_floor);
      read(p, "exposure_scale", c.proposals.exposure_scale);
      read(p, "unlabeled_exposure", c.proposals.unlabeled_exposure);
      read(p, "exposure_per_round", c.proposals.exposure_per_round);
    }
    if (j.contains("oracle")) {
      read(j["oracle"], "noise_sigma", c.oracle.noise_sigma);
      read(j["oracle"], "region_match_iou", c.oracle.region_match_iou);
    }
    if (j.contains("discovery")) {
      const json& d = j["discovery"];
      read(d, "theta_g", c.discovery.theta_g);
      read(d, "theta_s", c.discovery.theta_s);
      read(d, "dedup_iou", c.discovery.dedup_iou);
      read(d, "update_period", c.discovery.update_period);
      if (d.contains("mode")) {
        const auto m = d["mode"].get<std::string>();
        if (m == "batch") c.discovery_mode = DiscoveryMode::batch;
        else if (m == "all") c.discovery_mode = DiscoveryMode::all;
        else throw ConfigurationError("config: discovery.mode must be 'batch' or 'all'");
      }
    }
    if (j.contains("insert")) {
      const json& i = j["insert"];
      read(i, "k", c.enrich_k);
      read(i, "occlusion_threshold", c.insert.occlusion_threshold);
      read(i, "max_retries", c.insert.max_retries);
    }
    if (j.contains("alignment")) {
      const json& a = j["alignment"];
      read(a, "k_bg", c.alignment.k_bg);
      read(a, "temperature", c.alignment.temperature);
      read(a, "lambda_center", c.alignment.matcher.lambda_center);
      read(a, "lambda_iou", c.alignment.matcher.lambda_iou);
      read(a, "match_iou_threshold", c.alignment.matcher.iou_threshold);
      read(a, "queries", c.alignment.queries);
      read(a, "extra", c.alignment.extra);
      read(a, "angle_bins", c.alignment.angle_bins);
      if (a.contains("matcher")) {
        const auto m = a["matcher"].get<std::string>();
        if (m == "bipartite") c.alignment.matcher.kind = MatcherKind::bipartite;
        else if (m == "iou") c.alignment.matcher.kind = MatcherKind::iou;
        else throw ConfigurationError("config: alignment.matcher must be 'bipartite' or 'iou'");
      }
      if (a.contains("loss_weights")) {
        const json& w = a["loss_weights"];
        auto& dw = c.alignment.weights;
        read(w, "angle_cls", dw.angle_cls);
        read(w, "angle_reg", dw.angle_reg);
        read(w, "size", dw.size);
        read(w, "center", dw.center);
        read(w, "objectness", dw.objectness);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

SimulationConfig load_config(const std::filesystem::path& path) { return config_from_json(io::read_json(path)); }

}  // namespace ov3d
