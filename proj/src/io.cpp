#include "ov3d/io.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ov3d/errors.hpp"
#include "ov3d/ply.hpp"

namespace ov3d::io {

namespace {

Json matrix_row_major(const Mat3<double>& m) {
  Json a = Json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

Mat3<double> matrix_from_row_major(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 9) throw ConfigurationError(std::string("camera.") + what + " must hold 9 numbers");
  Mat3<double> m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = j.at(static_cast<std::size_t>(r * 3 + c)).get<double>();
  return m;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigurationError("expected a numeric array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

fs::path resolve(const fs::path& base_file, const std::string& rel) {
  const fs::path p(rel);
  return p.is_absolute() ? p : base_file.parent_path() / p;
}

}  // namespace

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigurationError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigurationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Json to_json(const Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vector3d vector3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigurationError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json to_json(const OrientedBox3D& box) {
  return {{"center", to_json(box.center())}, {"size", to_json(box.size())}, {"yaw", box.yaw()}};
}

OrientedBox3D box_from_json(const Json& j) {
  return OrientedBox3D(vector3_from_json(j.at("center")), vector3_from_json(j.at("size")),
                       j.value("yaw", 0.0));
}

Json to_json(const AABB2D& b) { return Json::array({b.u_min(), b.v_min(), b.u_max(), b.v_max()}); }

AABB2D aabb_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw ConfigurationError("expected [u_min, v_min, u_max, v_max]");
  return AABB2D(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

Json to_json(const ObjectAnnotation& a) {
  Json j = to_json(a.box);
  j["category"] = a.category;
  j["source"] = a.source == AnnotationSource::base ? "base" : "discovered";
  j["confidence"] = a.confidence;
  return j;
}

ObjectAnnotation annotation_from_json(const Json& j) {
  ObjectAnnotation a{box_from_json(j)};
  a.category = j.at("category").get<int>();
  const std::string src = j.value("source", std::string("base"));
  if (src == "base") a.source = AnnotationSource::base;
  else if (src == "discovered") a.source = AnnotationSource::discovered;
  else throw ConfigurationError("annotation source must be 'base' or 'discovered'");
  a.confidence = j.value("confidence", 1.0);
  if (!(a.confidence >= 0.0 && a.confidence <= 1.0)) throw ConfigurationError("annotation confidence outside [0,1]");
  return a;
}

Json to_json(const CameraModel& cam) {
  return {{"K", matrix_row_major(cam.intrinsics())},
          {"R", matrix_row_major(cam.rotation())},
          {"t", to_json(cam.translation())}};
}

CameraModel camera_from_json(const Json& j) {
  return CameraModel(matrix_from_row_major(j.at("K"), "K"), matrix_from_row_major(j.at("R"), "R"),
                     vector3_from_json(j.at("t")));
}

Json to_json(const Embedding& e) { return vector_to_json(e.values()); }

Embedding embedding_from_json(const Json& j) { return Embedding::normalized(vector_from_json(j)); }

PointCloudScene load_scene(const fs::path& json_path) {
  const Json j = read_json(json_path);
  PointCloudScene s;
  s.id = j.value("scene_id", json_path.stem().string());
  if (j.contains("points_file")) {
    PlyCloud cloud = read_ply(resolve(json_path, j.at("points_file").get<std::string>()));
    s.points = std::move(cloud.points);
    s.colors = std::move(cloud.colors);
  }
  for (const auto& a : j.value("annotations", Json::array())) s.annotations.push_back(annotation_from_json(a));
  s.image_ref = j.value("image_ref", std::string());
  if (j.contains("camera") && !j["camera"].is_null()) {
    s.camera = camera_from_json(j["camera"]);
    const Json size = j.contains("image_size") ? j["image_size"] : j["camera"].value("image_size", Json());
    if (size.is_array() && size.size() == 2) {
      s.image_size = {size[0].get<double>(), size[1].get<double>()};
    } else {
      // Assume a centered principal point.
      s.image_size = {2.0 * s.camera->intrinsics()(0, 2), 2.0 * s.camera->intrinsics()(1, 2)};
    }
  }
  return s;
}

void save_scene(const PointCloudScene& scene, const fs::path& json_path) {
  if (json_path.has_parent_path()) fs::create_directories(json_path.parent_path());
  fs::path ply = json_path;
  ply.replace_extension(".ply");
  write_ply(ply, scene.points, scene.colors);
  Json j;
  j["scene_id"] = scene.id;
  j["points_file"] = ply.filename().string();
  j["annotations"] = Json::array();
  for (const auto& a : scene.annotations) j["annotations"].push_back(to_json(a));
  j["image_ref"] = scene.image_ref;
  if (scene.camera) {
    j["camera"] = to_json(*scene.camera);
    j["image_size"] = Json::array({scene.image_size.width, scene.image_size.height});
  }
  write_json(json_path, j);
}

std::vector<Proposal> load_proposals(const fs::path& path) {
  const Json j = read_json(path);
  const Json& list = j.is_object() ? j.at("proposals") : j;
  std::vector<Proposal> out;
  for (const auto& p : list) {
    const double obj = p.at("objectness").get<double>();
    if (!(obj >= 0.0 && obj <= 1.0)) throw ConfigurationError("proposal objectness outside [0,1]");
    out.push_back({box_from_json(p), obj, embedding_from_json(p.at("feature"))});
  }
  return out;
}

void save_proposals(const fs::path& path, std::span<const Proposal> proposals) {
  Json list = Json::array();
  for (const auto& p : proposals) {
    Json j = to_json(p.box);
    j["objectness"] = p.objectness;
    j["feature"] = to_json(p.feature);
    list.push_back(std::move(j));
  }
  write_json(path, list);
}

Json label_pool_snapshot(const LabelPool& pool, long epoch) {
  Json scenes = Json::object();
  for (const auto& [id, list] : pool.scenes()) {
    Json arr = Json::array();
    for (const auto& a : list) arr.push_back(to_json(a));
    scenes[id] = std::move(arr);
  }
  return {{"epoch", epoch}, {"dedup_iou", pool.dedup_iou()}, {"scenes", std::move(scenes)}};
}

LabelPool label_pool_from_snapshot(const Json& j) {
  LabelPool pool(j.value("dedup_iou", 0.25));
  for (const auto& [id, list] : j.at("scenes").items()) {
    std::vector<ObjectAnnotation> entries;
    for (const auto& a : list) entries.push_back(annotation_from_json(a));
    pool.update(entries, id);
  }
  return pool;
}

void save_data_pool(const DataPool& pool, const fs::path& dir) {
  fs::create_directories(dir);
  Json index = Json::array();
  for (std::size_t i = 0; i < pool.samples.size(); ++i) {
    const auto& s = pool.samples[i];
    char stem[32];
    std::snprintf(stem, sizeof stem, "sample_%06zu", i);
    write_ply(dir / (std::string(stem) + ".ply"), s.points);
    Json j;
    j["points_file"] = std::string(stem) + ".ply";
    j["box_size"] = to_json(s.box_size);
    j["category"] = s.category;
    j["semantic_prob"] = s.semantic_prob;
    j["crop_ref"] = s.crop_ref;
    j["crop_box"] = s.crop_box ? to_json(*s.crop_box) : Json();
    j["origin_scene"] = s.origin_scene;
    write_json(dir / (std::string(stem) + ".json"), j);
    index.push_back({{"file", std::string(stem) + ".json"}, {"category", s.category}, {"semantic_prob", s.semantic_prob}});
  }
  write_json(dir / "index.json", {{"entries", index}});
}

DataPool load_data_pool(const fs::path& dir) {
  const Json index = read_json(dir / "index.json");
  DataPool pool;
  for (const auto& e : index.at("entries")) {
    const fs::path file = dir / e.at("file").get<std::string>();
    const Json j = read_json(file);
    NovelObjectSample s;
    s.points = read_ply(resolve(file, j.at("points_file").get<std::string>())).points;
    s.box_size = vector3_from_json(j.at("box_size"));
    s.category = j.at("category").get<int>();
    s.semantic_prob = j.value("semantic_prob", 0.0);
    s.crop_ref = j.value("crop_ref", std::string());
    if (j.contains("crop_box") && !j["crop_box"].is_null()) s.crop_box = aabb_from_json(j["crop_box"]);
    s.origin_scene = j.value("origin_scene", std::string());
    if (s.size() == 0) throw ConfigurationError("data pool sample " + file.string() + " has no points");
    const Vector3d h = s.box_size / 2 + Vector3d::Constant(kContainsTolerance);
    if (((s.points.cwiseAbs().colwise() - h).array() > 0.0).any())
      throw ConfigurationError("data pool sample " + file.string() + " has points outside its box");
    pool.samples.push_back(std::move(s));
  }
  return pool;
}

std::map<std::string, std::vector<AABB2D>> load_reference_boxes(const fs::path& path) {
  const Json j = read_json(path);
  std::map<std::string, std::vector<AABB2D>> out;
  auto add = [&](const Json& item) {
    auto& list = out[item.at("image_ref").get<std::string>()];
    for (const auto& b : item.at("boxes")) list.push_back(aabb_from_json(b));
  };
  if (j.is_array())
    for (const auto& item : j) add(item);
  else
    add(j);
  return out;
}

void save_reference_boxes(const fs::path& path, const std::map<std::string, std::vector<AABB2D>>& refs) {
  Json list = Json::array();
  for (const auto& [ref, boxes] : refs) {
    Json arr = Json::array();
    for (const auto& b : boxes) arr.push_back(to_json(b));
    list.push_back({{"image_ref", ref}, {"boxes", std::move(arr)}});
  }
  write_json(path, list);
}

TextEmbeddings load_text_embeddings(const fs::path& path) {
  const Json j = read_json(path);
  TextEmbeddings t;
  t.names = j.at("names").get<std::vector<std::string>>();
  const int dim = j.at("dim").get<int>();
  for (const auto& v : j.at("vectors")) {
    if (static_cast<int>(v.size()) != dim) throw DimensionMismatch("embedding file: vector length differs from dim");
    t.vectors.push_back(embedding_from_json(v));
  }
  if (t.vectors.size() != t.names.size()) throw DimensionMismatch("embedding file: names and vectors differ in count");
  return t;
}

void save_text_embeddings(const fs::path& path, const TextEmbeddings& t) {
  Json vectors = Json::array();
  for (const auto& v : t.vectors) vectors.push_back(to_json(v));
  write_json(path, {{"dim", t.vectors.empty() ? 0 : t.vectors.front().dim()}, {"names", t.names}, {"vectors", vectors}});
}

std::vector<ReplayOracle::RegionEntry> load_region_cache(const fs::path& path) {
  const Json j = read_json(path);
  const int dim = j.at("dim").get<int>();
  std::vector<ReplayOracle::RegionEntry> out;
  for (const auto& e : j.at("entries")) {
    if (static_cast<int>(e.at("vector").size()) != dim) throw DimensionMismatch("region cache: vector length differs from dim");
    out.push_back({e.at("image_ref").get<std::string>(), aabb_from_json(e.at("box")), embedding_from_json(e.at("vector"))});
  }
  return out;
}

void save_region_cache(const fs::path& path, std::span<const ReplayOracle::RegionEntry> entries) {
  Json list = Json::array();
  for (const auto& e : entries)
    list.push_back({{"image_ref", e.image_ref}, {"box", to_json(e.region)}, {"vector", to_json(e.embedding)}});
  write_json(path, {{"dim", entries.empty() ? 0 : entries.front().embedding.dim()}, {"entries", list}});
}

std::vector<DetectionResult> load_detections(const fs::path& path) {
  std::vector<DetectionResult> out;
  for (const auto& j : read_json(path)) {
    const double conf = j.at("confidence").get<double>();
    if (!(conf >= 0.0 && conf <= 1.0)) throw ConfigurationError("detection confidence outside [0,1]");
    out.push_back({j.at("scene_id").get<std::string>(), box_from_json(j), j.at("category").get<int>(), conf});
  }
  return out;
}

void save_detections(const fs::path& path, std::span<const DetectionResult> dets) {
  Json list = Json::array();
  for (const auto& d : dets) {
    Json j = to_json(d.box);
    j["scene_id"] = d.scene_id;
    j["category"] = d.category;
    j["confidence"] = d.confidence;
    list.push_back(std::move(j));
  }
  write_json(path, list);
}

std::vector<GroundTruthBox> load_ground_truths(const fs::path& path) {
  std::vector<GroundTruthBox> out;
  for (const auto& j : read_json(path))
    out.push_back({j.at("scene_id").get<std::string>(), box_from_json(j), j.at("category").get<int>()});
  return out;
}

void save_ground_truths(const fs::path& path, std::span<const GroundTruthBox> gts) {
  Json list = Json::array();
  for (const auto& g : gts) {
    Json j = to_json(g.box);
    j["scene_id"] = g.scene_id;
    j["category"] = g.category;
    list.push_back(std::move(j));
  }
  write_json(path, list);
}

Json to_json(const MetricsReport& m, const std::vector<std::string>& names) {
  Json per = Json::array();
  for (std::size_t c = 0; c < m.per_category.size(); ++c) {
    const auto& x = m.per_category[c];
    per.push_back({{"category", c},
                   {"name", c < names.size() ? names[c] : std::to_string(c)},
                   {"AP", x.ap},
                   {"AR", x.ar},
                   {"precision", x.precision},
                   {"recall", x.recall},
                   {"F1", x.f1},
                   {"num_gt", x.num_gt},
                   {"num_det", x.num_det}});
  }
  auto split = [](const SplitMetrics& s) { return Json{{"novel", s.novel}, {"base", s.base}, {"mean", s.mean}}; };
  return {{"per_category", per},
          {"AP", split(m.ap)},
          {"AR", split(m.ar)},
          {"F1", split(m.f1)},
          {"iou_threshold", kEvalIouThreshold},
          {"populated_novel_categories", m.novel_categories},
          {"populated_base_categories", m.base_categories},
          {"ar_protocol", "recall over the full ranked list, no detection cap"}};
}

std::string format_double(double v) {
  std::array<char, 64> buf;
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

std::string metrics_csv(const MetricsReport& m, const std::vector<std::string>& names) {
  std::ostringstream os;
  os << "row,name,AP,AR,precision,recall,F1,num_gt,num_det\n";
  for (std::size_t c = 0; c < m.per_category.size(); ++c) {
    const auto& x = m.per_category[c];
    os << c << ',' << (c < names.size() ? names[c] : std::to_string(c)) << ',' << format_double(100 * x.ap) << ','
       << format_double(100 * x.ar) << ',' << format_double(100 * x.precision) << ',' << format_double(100 * x.recall)
       << ',' << format_double(100 * x.f1) << ',' << x.num_gt << ',' << x.num_det << '\n';
  }
  auto agg = [&](const char* split, double ap, double ar, double f1) {
    os << "aggregate," << split << ',' << format_double(100 * ap) << ',' << format_double(100 * ar) << ",,,"
       << format_double(100 * f1) << ",,\n";
  };
  agg("Novel", m.ap.novel, m.ar.novel, m.f1.novel);
  agg("Base", m.ap.base, m.ar.base, m.f1.base);
  agg("Mean", m.ap.mean, m.ar.mean, m.f1.mean);
  return os.str();
}

}  // namespace ov3d::io
