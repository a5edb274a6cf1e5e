#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ov3d/config.hpp"
#include "ov3d/discovery.hpp"
#include "ov3d/eval.hpp"
#include "ov3d/gradcheck.hpp"
#include "ov3d/io.hpp"
#include "ov3d/simulation.hpp"
#include "ov3d/synthetic.hpp"

namespace fs = std::filesystem;
using ov3d::io::Json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

int cmd_simulate(const fs::path& config, const fs::path& out, bool export_scenes, bool save_data_pool) {
  const auto cfg = ov3d::load_config(config);
  const auto logs = ov3d::run_simulation(cfg, out, {export_scenes, save_data_pool});
  for (const auto& log : logs)
    std::cout << "round " << log.round << ": label_pool=" << log.label_pool_size
              << " data_pool=" << log.data_pool_size << " skipped=" << log.skipped_insertions
              << " recall=" << ov3d::io::format_double(log.discovery.recall)
              << " tail_share=" << ov3d::io::format_double(log.tail_share) << '\n';
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

const char* verdict_name(ov3d::DiscoveryVerdict v) {
  using V = ov3d::DiscoveryVerdict;
  switch (v) {
    case V::discovered: return "discovered";
    case V::low_objectness: return "low_objectness";
    case V::overlaps_base: return "overlaps_base";
    case V::behind_camera: return "behind_camera";
    case V::seen_category: return "seen_category";
    case V::low_semantic: return "low_semantic";
  }
  return "unknown";
}

int cmd_discover(const fs::path& scene_path, const fs::path& proposals_path, const fs::path& config,
                 fs::path embeddings, fs::path regions, const fs::path& out) {
  const auto cfg = ov3d::load_config(config);
  const auto scene = ov3d::io::load_scene(scene_path);
  const auto proposals = ov3d::io::load_proposals(proposals_path);
  const fs::path dir = scene_path.parent_path();
  if (embeddings.empty()) embeddings = dir / "text_embeddings.json";
  if (regions.empty()) regions = dir / "region_cache.json";
  auto text = ov3d::io::load_text_embeddings(embeddings);
  ov3d::ReplayOracle oracle(text.names, text.vectors, ov3d::io::load_region_cache(regions));

  std::vector<bool> base(text.names.size(), false);
  for (int c = 0; c < cfg.vocab.num_base && static_cast<std::size_t>(c) < base.size(); ++c)
    base[static_cast<std::size_t>(c)] = true;
  const auto vocab = ov3d::make_vocabulary(oracle, text.names, base, cfg.vocab.temperature);
  const auto decisions = ov3d::discovery_decisions(scene, proposals, vocab, oracle, cfg.discovery);
  const auto found = ov3d::discover(scene, proposals, vocab, oracle, cfg.discovery);

  Json j;
  j["scene_id"] = scene.id;
  j["discovered"] = Json::array();
  for (const auto& a : found) j["discovered"].push_back(ov3d::io::to_json(a));
  j["decisions"] = Json::array();
  for (const auto& d : decisions)
    j["decisions"].push_back({{"verdict", verdict_name(d.verdict)},
                              {"max_base_iou", d.max_base_iou},
                              {"category", d.category},
                              {"semantic_prob", d.semantic_prob}});
  if (out.empty()) std::cout << j.dump(2) << '\n';
  else ov3d::io::write_json(out, j);
  std::cerr << found.size() << " of " << proposals.size() << " proposals discovered\n";
  return 0;
}

int cmd_enrich(const fs::path& scene_path, const fs::path& pool_dir, int k, std::uint64_t seed,
               const ov3d::InsertConfig& insert, const fs::path& out) {
  auto scene = ov3d::io::load_scene(scene_path);
  const auto pool = ov3d::io::load_data_pool(pool_dir);
  ov3d::Rng rng = ov3d::split_rng(seed, {ov3d::Fnv1a().str("enrich").digest()});
  Json records = Json::array();
  for (const auto& sample : ov3d::sample_enrichment(pool, k, rng)) {
    const auto o = ov3d::insert_object(scene, sample, insert, rng);
    Json r = {{"category", sample.category},
              {"origin_scene", sample.origin_scene},
              {"inserted", o.inserted},
              {"attempts", o.attempts},
              {"pre_count", o.pre_count},
              {"first_point", o.first_point},
              {"num_points", o.num_points}};
    if (o.box) r["box"] = ov3d::io::to_json(*o.box);
    records.push_back(std::move(r));
  }
  if (!out.empty()) ov3d::io::save_scene(scene, out);
  std::cout << Json{{"insertions", records}, {"scene_points", scene.size()}}.dump(2) << '\n';
  return 0;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(std::stoi(item));
  return out;
}

int cmd_evaluate(const fs::path& dets_path, const fs::path& gts_path, const std::string& base_list,
                 int num_categories, const fs::path& csv) {
  const auto dets = ov3d::io::load_detections(dets_path);
  const auto gts = ov3d::io::load_ground_truths(gts_path);
  int max_id = -1;
  for (const auto& d : dets) max_id = std::max(max_id, d.category);
  for (const auto& g : gts) max_id = std::max(max_id, g.category);
  const int n = std::max(num_categories, max_id + 1);
  std::vector<bool> base(static_cast<std::size_t>(std::max(n, 0)), false);
  for (int c : parse_int_list(base_list)) {
    if (c < 0 || c >= n) throw std::invalid_argument("--base id " + std::to_string(c) + " outside the categories");
    base[static_cast<std::size_t>(c)] = true;
  }
  const auto report = ov3d::evaluate(dets, gts, base, ov3d::kEvalIouThreshold);
  std::cout << ov3d::io::to_json(report).dump(2) << '\n';
  if (!csv.empty()) write_text(csv, ov3d::io::metrics_csv(report));
  return 0;
}

int cmd_gradcheck(int instances, std::uint64_t seed) {
  bool ok = true;
  for (const auto& r : ov3d::gradcheck_all(instances, seed)) {
    std::cout << (r.passed() ? "PASS " : "FAIL ") << r.loss << ": " << r.instances
              << " instances, max relative error " << r.max_relative_error << '\n';
    ok = ok && r.passed();
  }
  return ok ? 0 : 1;
}

int cmd_report(const fs::path& logs_dir, fs::path out) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(logs_dir)) {
    const auto name = e.path().filename().string();
    if (name.starts_with("round_") && e.path().extension() == ".json") files.push_back(e.path());
  }
  if (files.empty()) throw std::runtime_error("no round_*.json files in " + logs_dir.string());
  std::sort(files.begin(), files.end());
  std::vector<Json> logs;
  for (const auto& f : files) logs.push_back(ov3d::io::read_json(f));
  if (out.empty()) out = logs_dir;

  const auto names = logs.front().at("categories").get<std::vector<std::string>>();
  std::ostringstream dist;
  dist << "category";
  for (const auto& log : logs) dist << ",round_" << log.at("round").get<int>();
  dist << '\n';
  for (std::size_t c = 0; c < names.size(); ++c) {
    dist << names[c];
    for (const auto& log : logs) dist << ',' << log.at("pool_category_counts").at(c).get<std::size_t>();
    dist << '\n';
  }

  const auto f = ov3d::io::format_double;
  std::ostringstream curves;
  curves << "round,label_pool,data_pool,precision,recall,ap_novel,ar_novel,f1_novel,tail_share,skipped_insertions\n";
  for (const auto& log : logs) {
    const auto& m = log.at("metrics");
    curves << log.at("round").get<int>() << ',' << log.at("label_pool_size").get<std::size_t>() << ','
           << log.at("data_pool_size").get<std::size_t>() << ','
           << f(log.at("discovery").at("precision").get<double>()) << ','
           << f(log.at("discovery").at("recall").get<double>()) << ','
           << f(m.at("AP").at("novel").get<double>()) << ',' << f(m.at("AR").at("novel").get<double>()) << ','
           << f(m.at("F1").at("novel").get<double>()) << ',' << f(log.at("tail_share").get<double>()) << ','
           << log.at("skipped_insertions").get<std::size_t>() << '\n';
  }
  write_text(out / "category_distribution.csv", dist.str());
  write_text(out / "metric_curves.csv", curves.str());
  std::cout << "wrote " << (out / "category_distribution.csv").string() << " and "
            << (out / "metric_curves.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-vocabulary 3D detection discovery/enrichment/alignment simulator"};
  app.require_subcommand(1);

  fs::path config, out;
  bool export_scenes = false;
  bool no_data_pool = false;
  auto* simulate = app.add_subcommand("simulate", "Run the closed-loop simulation");
  simulate->add_option("--config", config, "Simulation config JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", out, "Output directory")->required();
  simulate->add_flag("--export-scenes", export_scenes, "Also write scenes, proposals and encoder caches");
  simulate->add_flag("--no-data-pool", no_data_pool, "Skip writing the data-pool archive");

  fs::path scene, proposals, embeddings, regions, disc_out;
  auto* discover = app.add_subcommand("discover", "Apply the discovery rule to one scene");
  discover->add_option("--scene", scene, "Scene JSON")->required()->check(CLI::ExistingFile);
  discover->add_option("--proposals", proposals, "Proposal JSON")->required()->check(CLI::ExistingFile);
  discover->add_option("--config", config, "Simulation config JSON")->required()->check(CLI::ExistingFile);
  discover->add_option("--embeddings", embeddings, "Text embeddings (default: next to the scene)");
  discover->add_option("--regions", regions, "Region-embedding cache (default: next to the scene)");
  discover->add_option("--out", disc_out, "Write the result here instead of stdout");

  fs::path pool_dir, enrich_out;
  int k = 5;
  std::uint64_t seed = 0;
  ov3d::InsertConfig insert;
  auto* enrich = app.add_subcommand("enrich", "Insert data-pool samples into a scene");
  enrich->add_option("--scene", scene, "Scene JSON")->required()->check(CLI::ExistingFile);
  enrich->add_option("--pool", pool_dir, "Data-pool directory")->required()->check(CLI::ExistingDirectory);
  enrich->add_option("-k", k, "Samples to insert")->capture_default_str()->check(CLI::NonNegativeNumber);
  enrich->add_option("--seed", seed, "RNG seed")->capture_default_str();
  enrich->add_option("--occlusion-threshold", insert.occlusion_threshold, "J")->capture_default_str();
  enrich->add_option("--max-retries", insert.max_retries, "Placement attempts")->capture_default_str();
  enrich->add_option("--out", enrich_out, "Write the enriched scene (JSON + PLY)");

  fs::path dets, gts, csv;
  std::string base_list;
  int num_categories = 0;
  auto* evaluate = app.add_subcommand("evaluate", "Score detections against ground truth");
  evaluate->add_option("--dets", dets, "Detections JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--gts", gts, "Ground-truth JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--base", base_list, "Comma-separated base category ids");
  evaluate->add_option("--num-categories", num_categories, "Category count (default: max id + 1)");
  evaluate->add_option("--csv", csv, "Also write the metrics table as CSV");

  int instances = 100;
  std::uint64_t grad_seed = 1;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference checks of the loss gradients");
  gradcheck->add_option("--instances", instances, "Random instances per loss")->capture_default_str();
  gradcheck->add_option("--seed", grad_seed, "RNG seed")->capture_default_str();

  fs::path logs_dir, report_out;
  auto* report = app.add_subcommand("report", "Category-distribution and metric-curve CSVs from round logs");
  report->add_option("--logs", logs_dir, "Simulation output directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--out", report_out, "Output directory (default: --logs)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*simulate) return cmd_simulate(config, out, export_scenes, !no_data_pool);
    if (*discover) return cmd_discover(scene, proposals, config, embeddings, regions, disc_out);
    if (*enrich) return cmd_enrich(scene, pool_dir, k, seed, insert, enrich_out);
    if (*evaluate) return cmd_evaluate(dets, gts, base_list, num_categories, csv);
    if (*gradcheck) return cmd_gradcheck(instances, grad_seed);
    if (*report) return cmd_report(logs_dir, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
