#include "ov3d/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ov3d/alignment.hpp"
#include "ov3d/io.hpp"
#include "ov3d/losses.hpp"

namespace ov3d {

using nlohmann::json;

namespace {

std::string numbered(const char* prefix, long n, const char* suffix = "") {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%04ld%s", prefix, n, suffix);
  return buf;
}

std::uint64_t stream_id(const char* name) { return Fnv1a().str(name).digest(); }

std::size_t to_index(int c) { return static_cast<std::size_t>(c); }

/// Heading bin of `yaw` and the residual from that bin's center.
std::pair<int, double> heading_bin(double yaw, int bins) {
  constexpr double pi = std::numbers::pi;
  const double width = 2 * pi / bins;
  const double a = wrap_angle(yaw);
  const int b = std::min(bins - 1, static_cast<int>(std::floor((a + pi) / width)));
  return {b, a - (-pi + (b + 0.5) * width)};
}

DetectorLossInputs detector_inputs(const Proposal& p, const OrientedBox3D& target, const AlignmentSpec& spec) {
  const int bins = spec.angle_bins;
  const auto [pb, pr] = heading_bin(p.box.yaw(), bins);
  const auto [tb, tr] = heading_bin(target.yaw(), bins);
  DetectorLossInputs in;
  if (bins == 1) {
    in.angle_cls_pred = Eigen::VectorXd::Ones(1);
  } else {
    in.angle_cls_pred = Eigen::VectorXd::Constant(bins, 0.2 / (bins - 1));
    in.angle_cls_pred[pb] = 0.8;
  }
  in.angle_cls_target = Eigen::VectorXd::Zero(bins);
  in.angle_cls_target[tb] = 1.0;
  in.angle_res_pred = pr;
  in.angle_res_target = tr;
  in.size_pred = p.box.size();
  in.size_target = target.size();
  in.center_pred = p.box.center();
  in.center_target = target.center();
  const double o = std::clamp(p.objectness, 0.0, 1.0);
  in.objectness_pred = Eigen::Vector2d(1.0 - o, o);
  in.objectness_target = Eigen::Vector2d(0.0, 1.0);
  in.weights = spec.weights;
  return in;
}

void align_scene(const SimulationState& st, const SyntheticScene& s, const PointCloudScene& enriched,
                 const ProposalSet& ps, Rng& rng, LossSummary& losses) {
  const auto& spec = st.cfg.alignment;
  std::vector<OrientedBox3D> boxes;
  boxes.reserve(ps.proposals.size());
  for (const auto& p : ps.proposals) boxes.push_back(p.box);

  std::vector<ObjectAnnotation> targets = enriched.annotations;
  const auto& pooled = st.label_pool.entries(s.scene.id);
  targets.insert(targets.end(), pooled.begin(), pooled.end());

  MatchResult match = fg_match(boxes, targets, spec.matcher);
  const auto refs = reference_boxes(s);
  assign_background(match, bg_match(boxes, *s.scene.camera, s.scene.image_size, refs, spec.k_bg));
  const int total = std::min<int>(spec.queries, static_cast<int>(boxes.size()));
  const auto selected = select_alignment_queries(match, total, spec.extra, rng);

  const int dim = st.oracle.dim();
  Eigen::MatrixXd f3d(static_cast<Eigen::Index>(selected.size()), dim);
  Eigen::MatrixXd f2d(static_cast<Eigen::Index>(selected.size()), dim);
  Eigen::Index n = 0;
  for (int q : selected) {
    const auto& p = ps.proposals[to_index(q)];
    AABB2D crop;
    try {
      crop = project_box(p.box, *s.scene.camera, s.scene.image_size);
    } catch (const BehindCameraError&) {
      continue;
    }
    f3d.row(n) = p.feature.values().transpose();
    f2d.row(n) = st.oracle.embed_region(s.scene.image_ref, crop).values().transpose();
    ++n;
  }
  if (n > 0) {
    losses.distill += distill_loss(f3d.topRows(n), f2d.topRows(n)).value;
    losses.distill_queries += static_cast<std::size_t>(n);
  }

  std::vector<int> labels = match.labels;
  std::vector<int> rows;
  for (const auto& [p, t] : match.pairs) rows.push_back(p);
  if (const auto bg = st.vocab.background_index()) {
    for (int b : match.background_proposals) {
      rows.push_back(b);
      labels.push_back(*bg);
    }
    losses.background_queries += match.background_proposals.size();
  }
  if (!rows.empty()) {
    Eigen::MatrixXd feats(static_cast<Eigen::Index>(rows.size()), dim);
    for (std::size_t i = 0; i < rows.size(); ++i)
      feats.row(static_cast<Eigen::Index>(i)) = ps.proposals[to_index(rows[i])].feature.values().transpose();
    losses.contrastive +=
        contrastive_loss(feats, std::span<const int>(labels), st.vocab.text_embeddings(), spec.temperature).value;
    losses.contrastive_queries += rows.size();
  }

  std::vector<DetectorLossInputs> batch;
  for (const auto& [p, t] : match.pairs)
    batch.push_back(detector_inputs(ps.proposals[to_index(p)], targets[to_index(t)].box, spec));
  losses.detector += detector_loss(std::span<const DetectorLossInputs>(batch));
  losses.detector_queries += batch.size();
}

std::vector<DetectionResult> pool_detections(const LabelPool& pool) {
  std::vector<DetectionResult> dets;
  for (const auto& [id, list] : pool.scenes())
    for (const auto& a : list) dets.push_back({id, a.box, a.category, a.confidence});
  return dets;
}

std::vector<GroundTruthBox> all_targets(const SimulationState& st) {
  std::vector<GroundTruthBox> gts;
  for (const auto& s : st.scenes)
    for (const auto& t : discovery_targets(s, st.vocab, st.cfg.discovery.dedup_iou))
      gts.push_back({s.scene.id, t.box, t.category});
  return gts;
}

std::vector<std::size_t> count_by_category(std::span<const ObjectAnnotation> list, std::size_t n) {
  std::vector<std::size_t> counts(n, 0);
  for (const auto& a : list) ++counts.at(to_index(a.category));
  return counts;
}

void add_into(std::vector<std::size_t>& acc, const std::vector<std::size_t>& v) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
}

}  // namespace

SimulationState init_simulation(const SimulationConfig& cfg) {
  cfg.validate();
  auto names = category_names(cfg.vocab.num_categories, cfg.vocab.include_background);
  std::vector<SyntheticScene> scenes;
  std::vector<RegionTag> tags;
  for (int i = 0; i < cfg.num_scenes; ++i) {
    Rng rng = split_rng(cfg.seed, {stream_id("scene"), static_cast<std::uint64_t>(i)});
    scenes.push_back(generate_scene(cfg, numbered("scene_", i), rng));
    const auto t = region_tags(scenes.back());
    tags.insert(tags.end(), t.begin(), t.end());
  }
  ToyOracle oracle(cfg.seed, names, cfg.oracle.noise_sigma, cfg.vocab.embedding_dim, std::move(tags),
                   cfg.oracle.region_match_iou);
  ToyOracle feature_oracle(cfg.seed, names, cfg.proposals.feature_noise, cfg.vocab.embedding_dim);
  CategoryVocabulary vocab(names, category_base_mask(cfg.vocab), oracle.text_matrix(), cfg.vocab.temperature);

  std::vector<double> exposure(names.size(), 0.0);
  for (const auto& s : scenes)
    for (const auto& t : s.truth)
      exposure[to_index(t.category)] += vocab.is_base(t.category) ? 1.0 : cfg.proposals.unlabeled_exposure;

  SimulationState st{cfg,   names,           tail_categories(cfg.vocab), std::move(scenes), std::move(oracle),
                     std::move(feature_oracle), std::move(vocab), LabelPool(cfg.discovery.dedup_iou)};
  st.prior_exposure = std::move(exposure);
  st.inserted_counts.assign(st.names.size(), 0);
  return st;
}

std::vector<ObjectAnnotation> discovery_targets(const SyntheticScene& s, const CategoryVocabulary& vocab,
                                                double dedup_iou) {
  std::vector<ObjectAnnotation> out;
  for (const auto& t : s.truth) {
    if (vocab.is_base(t.category)) continue;
    double max_iou = 0.0;
    for (const auto& b : s.scene.annotations) max_iou = std::max(max_iou, iou3d(t.box, b.box));
    if (max_iou < dedup_iou) out.push_back(t);
  }
  return out;
}

std::vector<double> current_familiarity(const SimulationState& st) {
  const auto pooled = st.label_pool.category_counts(static_cast<int>(st.names.size()));
  std::vector<double> fam(st.names.size());
  for (std::size_t c = 0; c < fam.size(); ++c) {
    const double exposure = st.prior_exposure[c] + static_cast<double>(pooled[c] + st.inserted_counts[c]) +
                            st.cfg.proposals.exposure_per_round * st.round;
    fam[c] = familiarity(st.cfg.proposals, exposure);
  }
  return fam;
}

RoundLog run_round(SimulationState& st) {
  const SimulationConfig& cfg = st.cfg;
  const std::size_t num_names = st.names.size();
  const auto num_scenes = static_cast<int>(st.scenes.size());
  const long period = cfg.discovery.update_period;

  RoundLog log;
  log.round = st.round;
  log.epoch_begin = static_cast<long>(st.round) * cfg.epochs_per_round;
  log.epoch_end = log.epoch_begin + cfg.epochs_per_round;
  log.refreshed = log.epoch_end / period > log.epoch_begin / period;
  log.discoveries_per_category.assign(num_names, 0);
  log.accepted_per_category.assign(num_names, 0);

  std::vector<int> batch;
  const int per_round = cfg.scenes_per_round == 0 ? num_scenes : std::min(cfg.scenes_per_round, num_scenes);
  for (int i = 0; i < per_round; ++i) batch.push_back((st.round * per_round + i) % num_scenes);
  std::sort(batch.begin(), batch.end());

  const auto fam = current_familiarity(st);
  std::vector<std::size_t> inserted(num_names, 0);
  st.last_enriched.clear();

  for (int idx : batch) {
    const SyntheticScene& s = st.scenes[to_index(idx)];
    log.scenes.push_back(s.scene.id);
    try {
      Rng rng = split_rng(cfg.seed, {stream_id("round"), static_cast<std::uint64_t>(st.round),
                                     static_cast<std::uint64_t>(idx)});
      PointCloudScene enriched = s.scene;
      for (const auto& sample : sample_enrichment(st.data_pool, cfg.enrich_k, rng)) {
        const InsertOutcome o = insert_object(enriched, sample, cfg.insert, rng);
        log.insertions.push_back({s.scene.id, sample.origin_scene, sample.category, o.inserted, o.attempts, o.box,
                                  o.pre_count, o.first_point, o.num_points});
        if (o.inserted) ++inserted[to_index(sample.category)];
        else ++log.skipped_insertions;
      }
      const ProposalSet ps = mock_proposals(s, cfg, st.feature_oracle, fam, rng);
      if (cfg.discovery_mode == DiscoveryMode::batch) {
        const auto found = discover(s.scene, ps.proposals, st.vocab, st.oracle, cfg.discovery);
        add_into(log.discoveries_per_category, count_by_category(found, num_names));
        auto& queue = st.pending[s.scene.id];
        queue.insert(queue.end(), found.begin(), found.end());
      }
      align_scene(st, s, enriched, ps, rng, log.losses);
      st.last_enriched.emplace(s.scene.id, std::move(enriched));
    } catch (const std::exception& e) {
      throw RoundError("round " + std::to_string(st.round) + ", scene " + s.scene.id + ": " + e.what());
    }
  }

  if (log.refreshed) {
    if (cfg.discovery_mode == DiscoveryMode::all) {
      for (int idx = 0; idx < num_scenes; ++idx) {
        const SyntheticScene& s = st.scenes[to_index(idx)];
        try {
          Rng rng = split_rng(cfg.seed, {stream_id("refresh"), static_cast<std::uint64_t>(st.round),
                                         static_cast<std::uint64_t>(idx)});
          const ProposalSet ps = mock_proposals(s, cfg, st.feature_oracle, fam, rng);
          const auto found = discover(s.scene, ps.proposals, st.vocab, st.oracle, cfg.discovery);
          add_into(log.discoveries_per_category, count_by_category(found, num_names));
          auto& queue = st.pending[s.scene.id];
          queue.insert(queue.end(), found.begin(), found.end());
        } catch (const std::exception& e) {
          throw RoundError("round " + std::to_string(st.round) + ", scene " + s.scene.id + ": " + e.what());
        }
      }
    }
    for (const auto& [id, found] : st.pending) {
      const auto res = st.label_pool.update(found, id);
      add_into(log.accepted_per_category, count_by_category(res.accepted, num_names));
      const auto it = std::find_if(st.scenes.begin(), st.scenes.end(),
                                   [&](const SyntheticScene& s) { return s.scene.id == id; });
      update_data_pool(st.data_pool, it->scene, res.accepted);
    }
    st.pending.clear();
  }
  add_into(st.inserted_counts, inserted);

  log.pool_category_counts = st.label_pool.category_counts(static_cast<int>(num_names));
  log.label_pool_size = st.label_pool.size();
  log.data_pool_size = st.data_pool.size();

  const auto dets = pool_detections(st.label_pool);
  const auto gts = all_targets(st);
  log.metrics = evaluate(dets, gts, st.vocab.base_mask(), kEvalIouThreshold);
  const auto tp = match_detections(dets, gts, kEvalIouThreshold);
  auto& q = log.discovery;
  q.targets = gts.size();
  q.pool_entries = dets.size();
  q.true_positives = static_cast<std::size_t>(std::count(tp.begin(), tp.end(), true));
  q.precision = q.pool_entries ? static_cast<double>(q.true_positives) / static_cast<double>(q.pool_entries) : 0.0;
  q.recall = q.targets ? static_cast<double>(q.true_positives) / static_cast<double>(q.targets) : 0.0;

  std::size_t in_tail = 0;
  for (int c : st.tail) in_tail += log.pool_category_counts[to_index(c)];
  log.tail_share = log.label_pool_size ? static_cast<double>(in_tail) / static_cast<double>(log.label_pool_size) : 0.0;

  ++st.round;
  return log;
}

json to_json(const RoundLog& log, const std::vector<std::string>& names) {
  json insertions = json::array();
  for (const auto& r : log.insertions) {
    json j = {{"scene_id", r.scene_id},
              {"origin_scene", r.origin_scene},
              {"category", r.category},
              {"inserted", r.inserted},
              {"attempts", r.attempts},
              {"pre_count", r.pre_count},
              {"first_point", r.first_point},
              {"num_points", r.num_points}};
    if (r.box) j["box"] = io::to_json(*r.box);
    insertions.push_back(std::move(j));
  }
  const auto& l = log.losses;
  const auto& q = log.discovery;
  return {
      {"round", log.round},
      {"epoch_begin", log.epoch_begin},
      {"epoch_end", log.epoch_end},
      {"refreshed", log.refreshed},
      {"scenes", log.scenes},
      {"categories", names},
      {"discoveries_per_category", log.discoveries_per_category},
      {"accepted_per_category", log.accepted_per_category},
      {"pool_category_counts", log.pool_category_counts},
      {"label_pool_size", log.label_pool_size},
      {"data_pool_size", log.data_pool_size},
      {"insertions", std::move(insertions)},
      {"skipped_insertions", log.skipped_insertions},
      {"losses",
       {{"distill", l.distill},
        {"contrastive", l.contrastive},
        {"detector", l.detector},
        {"distill_queries", l.distill_queries},
        {"contrastive_queries", l.contrastive_queries},
        {"detector_queries", l.detector_queries},
        {"background_queries", l.background_queries}}},
      {"metrics", io::to_json(log.metrics, names)},
      {"discovery",
       {{"targets", q.targets},
        {"pool_entries", q.pool_entries},
        {"true_positives", q.true_positives},
        {"precision", q.precision},
        {"recall", q.recall}}},
      {"tail_share", log.tail_share},
  };
}

namespace {

void export_scenes(const SimulationState& st, const std::filesystem::path& dir) {
  const auto fam = current_familiarity(st);
  std::vector<ReplayOracle::RegionEntry> cache;
  std::map<std::string, std::vector<AABB2D>> refs;
  std::vector<GroundTruthBox> truths;
  for (std::size_t i = 0; i < st.scenes.size(); ++i) {
    const auto& s = st.scenes[i];
    io::save_scene(s.scene, dir / (s.scene.id + ".json"));
    Rng rng = split_rng(st.cfg.seed, {stream_id("export"), i});
    const ProposalSet ps = mock_proposals(s, st.cfg, st.feature_oracle, fam, rng);
    io::save_proposals(dir / (s.scene.id + "_proposals.json"), ps.proposals);
    for (const auto& p : ps.proposals) {
      try {
        const AABB2D crop = project_box(p.box, *s.scene.camera, s.scene.image_size);
        cache.push_back({s.scene.image_ref, crop, st.oracle.embed_region(s.scene.image_ref, crop)});
      } catch (const BehindCameraError&) {
      }
    }
    refs[s.scene.image_ref] = reference_boxes(s);
    for (const auto& t : s.truth) truths.push_back({s.scene.id, t.box, t.category});
  }
  io::save_text_embeddings(dir / "text_embeddings.json", {st.names, st.oracle.embed_texts(st.names)});
  io::save_region_cache(dir / "region_cache.json", cache);
  io::save_reference_boxes(dir / "reference_boxes.json", refs);
  io::save_ground_truths(dir / "ground_truth.json", truths);
}

std::string round_csv_row(const RoundLog& log) {
  std::size_t discovered = 0;
  std::size_t accepted = 0;
  for (auto v : log.discoveries_per_category) discovered += v;
  for (auto v : log.accepted_per_category) accepted += v;
  const auto f = io::format_double;
  std::ostringstream os;
  os << log.round << ',' << log.epoch_end << ',' << log.label_pool_size << ',' << log.data_pool_size << ','
     << discovered << ',' << accepted << ',' << log.skipped_insertions << ',' << f(log.discovery.precision) << ','
     << f(log.discovery.recall) << ',' << f(log.metrics.ap.novel) << ',' << f(log.metrics.ar.novel) << ','
     << f(log.metrics.f1.novel) << ',' << f(log.tail_share) << ',' << f(log.losses.distill) << ','
     << f(log.losses.contrastive) << ',' << f(log.losses.detector) << '\n';
  return os.str();
}

}  // namespace

std::vector<RoundLog> run_simulation(const SimulationConfig& cfg, const std::filesystem::path& out_dir,
                                     const SimulationOutputs& outputs) {
  SimulationState st = init_simulation(cfg);
  std::filesystem::create_directories(out_dir);
  io::write_json(out_dir / "config.json", to_json(cfg));
  if (outputs.export_scenes) export_scenes(st, out_dir / "scenes");

  std::string csv =
      "round,epoch_end,label_pool,data_pool,discovered,accepted,skipped_insertions,precision,recall,"
      "ap_novel,ar_novel,f1_novel,tail_share,loss_distill,loss_contrastive,loss_detector\n";
  std::vector<RoundLog> logs;
  for (int r = 0; r < cfg.rounds; ++r) {
    logs.push_back(run_round(st));
    const RoundLog& log = logs.back();
    char name[32];
    std::snprintf(name, sizeof name, "round_%03d.json", r);
    io::write_json(out_dir / name, to_json(log, st.names));
    if (log.refreshed)
      io::write_json(out_dir / "pools" / numbered("label_pool_epoch_", log.epoch_end, ".json"),
                     io::label_pool_snapshot(st.label_pool, log.epoch_end));
    csv += round_csv_row(log);
  }
  {
    std::ofstream os(out_dir / "metrics.csv", std::ios::binary);
    os << csv;
    if (!os) throw std::runtime_error("cannot write " + (out_dir / "metrics.csv").string());
  }

  const auto dets = pool_detections(st.label_pool);
  const auto gts = all_targets(st);
  const MetricsReport final_metrics = evaluate(dets, gts, st.vocab.base_mask(), kEvalIouThreshold);
  io::write_json(out_dir / "metrics.json", io::to_json(final_metrics, st.names));
  {
    std::ofstream os(out_dir / "final_metrics.csv", std::ios::binary);
    os << io::metrics_csv(final_metrics, st.names);
  }
  io::save_detections(out_dir / "discovered.json", dets);
  io::save_ground_truths(out_dir / "discovery_targets.json", gts);
  if (outputs.save_data_pool) io::save_data_pool(st.data_pool, out_dir / "data_pool");
  return logs;
}

}  // namespace ov3d
