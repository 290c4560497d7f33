#include "crowdsynth/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "crowdsynth/errors.hpp"

namespace crowdsynth {

using nlohmann::json;

std::string format_real(double value) {
  if (std::isnan(value)) return "";
  if (!std::isfinite(value)) throw InvalidInput("cannot serialize a non-finite real");
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, 6);
  std::string s(buf, res.ptr);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

namespace {

// ---------------------------------------------------------------------------
// Canonical writer

bool is_scalar_array(const json& v) {
  return std::all_of(v.begin(), v.end(), [](const json& e) {
    return e.is_number() || e.is_boolean() || e.is_null();
  });
}

void dump_value(const json& v, int indent, std::string& out) {
  const std::string pad(indent, ' ');
  const std::string inner(indent + 2, ' ');
  switch (v.type()) {
    case json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += inner;
        out += json(it.key()).dump();
        out += ": ";
        dump_value(it.value(), indent + 2, out);
      }
      out += "\n" + pad + "}";
      return;
    }
    case json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      if (is_scalar_array(v)) {
        out += "[";
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (i) out += ", ";
          dump_value(v[i], indent, out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        dump_value(v[i], indent + 2, out);
      }
      out += "\n" + pad + "]";
      return;
    }
    case json::value_t::number_float:
      out += format_real(v.get<double>());
      return;
    case json::value_t::number_integer:
      out += std::to_string(v.get<std::int64_t>());
      return;
    case json::value_t::number_unsigned:
      out += std::to_string(v.get<std::uint64_t>());
      return;
    default:
      out += v.dump();
      return;
  }
}

std::string canonical(const json& v) {
  std::string out;
  dump_value(v, 0, out);
  out += "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Schema-checked readers

json parse_json(std::string_view text, std::string_view source) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < byte; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << source << ":" << line << ":" << col << ": malformed JSON (" << e.what() << ")";
    throw ParseError(os.str());
  }
}

struct Ctx {
  std::string_view source;
  std::string path;

  Ctx at(std::string_view key) const {
    return {source, path.empty() ? std::string(key) : path + "." + std::string(key)};
  }
  Ctx at(std::size_t index) const { return {source, path + "[" + std::to_string(index) + "]"}; }
  [[noreturn]] void fail(std::string_view what) const {
    throw SchemaError(std::string(source) + ": " + (path.empty() ? "<root>" : path) +
                      ": " + std::string(what));
  }
};

const json& expect_object(const json& v, const Ctx& ctx) {
  if (!v.is_object()) ctx.fail("expected an object");
  return v;
}

const json& expect_array(const json& v, const Ctx& ctx) {
  if (!v.is_array()) ctx.fail("expected an array");
  return v;
}

const json& field(const json& obj, std::string_view key, const Ctx& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) ctx.at(key).fail("missing required field");
  return *it;
}

const json* optional_field(const json& obj, std::string_view key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

double as_real(const json& v, const Ctx& ctx) {
  if (!v.is_number()) ctx.fail("expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) ctx.fail("expected a finite number");
  return d;
}

std::int64_t as_int(const json& v, const Ctx& ctx) {
  if (v.is_number_unsigned()) {
    const auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX)) ctx.fail("integer out of range");
    return static_cast<std::int64_t>(u);
  }
  if (!v.is_number_integer()) ctx.fail("expected an integer");
  return v.get<std::int64_t>();
}

std::uint64_t as_u64(const json& v, const Ctx& ctx) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  ctx.fail("expected a non-negative integer");
}

bool as_bool(const json& v, const Ctx& ctx) {
  if (!v.is_boolean()) ctx.fail("expected a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const Ctx& ctx) {
  if (!v.is_string()) ctx.fail("expected a string");
  return v.get<std::string>();
}

void check_version(const json& root, const Ctx& ctx) {
  const Ctx c = ctx.at("version");
  if (as_int(field(root, "version", ctx), c) != kFormatVersion) {
    c.fail("unsupported format version");
  }
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known,
                    const Ctx& ctx) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      ctx.at(it.key()).fail("unknown key");
    }
  }
}

json bbox_to_json(const BBox& b) {
  return json::array({b.x_min(), b.y_min(), b.width(), b.height()});
}

BBox bbox_from_json(const json& v, const Ctx& ctx) {
  if (!v.is_array() || v.size() != 4) ctx.fail("bbox must be [x, y, w, h]");
  const double x = as_real(v[0], ctx.at(0));
  const double y = as_real(v[1], ctx.at(1));
  const double w = as_real(v[2], ctx.at(2));
  const double h = as_real(v[3], ctx.at(3));
  if (!(w > 0.0) || !(h > 0.0)) ctx.fail("bbox width and height must be positive");
  try {
    return BBox::from_xywh(x, y, w, h);
  } catch (const InvalidGeometry& e) {
    ctx.fail(e.what());
  }
}

// ---------------------------------------------------------------------------
// Config sections

json synthesis_config_json(const SynthesisConfig& c) {
  json j = json::object();
  j["N"] = c.max_groups;
  j["M"] = c.max_members;
  j["tau"] = c.tau;
  j["epsilon"] = c.epsilon;
  j["sigma"] = c.sigma;
  j["size_clip"] = json::array({c.size_lo, c.size_hi});
  j["max_resample"] = c.max_resample;
  j["min_inside_fraction"] = c.min_inside_fraction;
  return j;
}

int as_small_int(const json& v, const Ctx& ctx) {
  const std::int64_t i = as_int(v, ctx);
  if (i < INT32_MIN || i > INT32_MAX) ctx.fail("integer out of range");
  return static_cast<int>(i);
}

void apply_synthesis(const json& j, SynthesisConfig& c, const Ctx& ctx) {
  expect_object(j, ctx);
  reject_unknown(j, {"N", "M", "tau", "epsilon", "sigma", "size_clip", "max_resample",
                     "min_inside_fraction"},
                 ctx);
  if (auto* v = optional_field(j, "N")) c.max_groups = as_small_int(*v, ctx.at("N"));
  if (auto* v = optional_field(j, "M")) c.max_members = as_small_int(*v, ctx.at("M"));
  if (auto* v = optional_field(j, "tau")) c.tau = as_real(*v, ctx.at("tau"));
  if (auto* v = optional_field(j, "epsilon")) c.epsilon = as_real(*v, ctx.at("epsilon"));
  if (auto* v = optional_field(j, "sigma")) c.sigma = as_real(*v, ctx.at("sigma"));
  if (auto* v = optional_field(j, "size_clip")) {
    const Ctx cc = ctx.at("size_clip");
    if (!v->is_array() || v->size() != 2) cc.fail("expected [lo, hi]");
    c.size_lo = as_real((*v)[0], cc.at(0));
    c.size_hi = as_real((*v)[1], cc.at(1));
  }
  if (auto* v = optional_field(j, "max_resample")) {
    c.max_resample = as_small_int(*v, ctx.at("max_resample"));
  }
  if (auto* v = optional_field(j, "min_inside_fraction")) {
    c.min_inside_fraction = as_real(*v, ctx.at("min_inside_fraction"));
  }
}

void apply_nms(const json& j, NmsConfig& c, const Ctx& ctx) {
  expect_object(j, ctx);
  reject_unknown(j, {"th_iou", "delta", "psi"}, ctx);
  if (auto* v = optional_field(j, "th_iou")) c.th_iou = as_real(*v, ctx.at("th_iou"));
  if (auto* v = optional_field(j, "delta")) c.delta = as_real(*v, ctx.at("delta"));
  if (auto* v = optional_field(j, "psi")) c.psi = as_real(*v, ctx.at("psi"));
}

void apply_sim(const json& j, SimConfig& c, const Ctx& ctx) {
  expect_object(j, ctx);
  reject_unknown(j, {"proposals_per_object", "iou_low", "score_slope", "score_bias",
                     "noise_base", "noise_occ", "duplicate_rate", "od_noise", "seed"},
                 ctx);
  if (auto* v = optional_field(j, "proposals_per_object")) {
    c.proposals_per_object = as_small_int(*v, ctx.at("proposals_per_object"));
  }
  if (auto* v = optional_field(j, "iou_low")) c.iou_low = as_real(*v, ctx.at("iou_low"));
  if (auto* v = optional_field(j, "score_slope")) {
    c.score_slope = as_real(*v, ctx.at("score_slope"));
  }
  if (auto* v = optional_field(j, "score_bias")) {
    c.score_bias = as_real(*v, ctx.at("score_bias"));
  }
  if (auto* v = optional_field(j, "noise_base")) {
    c.noise_base = as_real(*v, ctx.at("noise_base"));
  }
  if (auto* v = optional_field(j, "noise_occ")) c.noise_occ = as_real(*v, ctx.at("noise_occ"));
  if (auto* v = optional_field(j, "duplicate_rate")) {
    c.duplicate_rate = as_real(*v, ctx.at("duplicate_rate"));
  }
  if (auto* v = optional_field(j, "od_noise")) c.od_noise = as_real(*v, ctx.at("od_noise"));
  if (auto* v = optional_field(j, "seed")) c.seed = as_u64(*v, ctx.at("seed"));
}

}  // namespace

// ---------------------------------------------------------------------------
// Annotations

AnnotationSet parse_annotations(std::string_view text, std::string_view source) {
  const json root = parse_json(text, source);
  const Ctx ctx{source, ""};
  expect_object(root, ctx);
  check_version(root, ctx);

  AnnotationSet set;
  std::unordered_map<std::int64_t, std::size_t> image_index;
  const Ctx ictx = ctx.at("images");
  const json& images = expect_array(field(root, "images", ctx), ictx);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Ctx c = ictx.at(i);
    const json& img = expect_object(images[i], c);
    Scene scene;
    scene.image_id = as_int(field(img, "id", c), c.at("id"));
    scene.image_width = as_small_int(field(img, "width", c), c.at("width"));
    scene.image_height = as_small_int(field(img, "height", c), c.at("height"));
    if (scene.image_width <= 0 || scene.image_height <= 0) {
      c.fail("width and height must be positive");
    }
    if (auto* v = optional_field(img, "seed")) scene.seed = as_u64(*v, c.at("seed"));
    if (!image_index.emplace(scene.image_id, set.scenes.size()).second) {
      throw IntegrityError(std::string(source) + ": duplicate image id " +
                           std::to_string(scene.image_id));
    }
    set.scenes.push_back(std::move(scene));
  }

  const Ctx actx = ctx.at("annotations");
  const json& anns = expect_array(field(root, "annotations", ctx), actx);
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const Ctx c = actx.at(i);
    const json& a = expect_object(anns[i], c);
    const std::int64_t image_id = as_int(field(a, "image_id", c), c.at("image_id"));
    auto it = image_index.find(image_id);
    if (it == image_index.end()) {
      throw IntegrityError(std::string(source) + ": " + c.path + ": image_id " +
                           std::to_string(image_id) + " does not exist");
    }
    ObjectInstance o;
    o.id = as_int(field(a, "id", c), c.at("id"));
    o.bbox = bbox_from_json(field(a, "bbox", c), c.at("bbox"));
    o.category = as_string(field(a, "category", c), c.at("category"));
    o.is_pasted = as_bool(field(a, "is_pasted", c), c.at("is_pasted"));
    o.depth_rank = as_int(field(a, "depth_rank", c), c.at("depth_rank"));
    if (auto* v = optional_field(a, "patch_id")) o.patch_id = as_int(*v, c.at("patch_id"));
    if (auto* v = optional_field(a, "od")) {
      o.od_gt = as_real(*v, c.at("od"));
      if (*o.od_gt < 1.0) c.at("od").fail("overlay depth must be >= 1");
    }
    if (auto* v = optional_field(a, "occlusion_ratio")) {
      o.occlusion_ratio = as_real(*v, c.at("occlusion_ratio"));
      if (*o.occlusion_ratio < 0.0 || *o.occlusion_ratio > 1.0) {
        c.at("occlusion_ratio").fail("must lie in [0, 1]");
      }
    }
    set.scenes[it->second].instances.push_back(std::move(o));
  }

  for (const Scene& scene : set.scenes) {
    try {
      scene.validate();
    } catch (const InvalidInput& e) {
      throw IntegrityError(std::string(source) + ": " + e.what());
    }
  }

  if (auto* s = optional_field(root, "synthesis")) {
    const Ctx c = ctx.at("synthesis");
    expect_object(*s, c);
    SynthesisMeta meta;
    meta.seed = as_u64(field(*s, "seed", c), c.at("seed"));
    apply_synthesis(field(*s, "config", c), meta.config, c.at("config"));
    set.synthesis = meta;
  }
  return set;
}

std::string dump_annotations(const AnnotationSet& set) {
  json root = json::object();
  root["version"] = kFormatVersion;
  json images = json::array();
  json anns = json::array();
  for (const Scene& scene : set.scenes) {
    images.push_back({{"id", scene.image_id},
                      {"width", scene.image_width},
                      {"height", scene.image_height},
                      {"seed", scene.seed}});
    for (const ObjectInstance& o : scene.instances) {
      json a = {{"id", o.id},
                {"image_id", scene.image_id},
                {"bbox", bbox_to_json(o.bbox)},
                {"category", o.category},
                {"is_pasted", o.is_pasted},
                {"depth_rank", o.depth_rank}};
      if (o.patch_id) a["patch_id"] = *o.patch_id;
      if (o.od_gt) a["od"] = *o.od_gt;
      if (o.occlusion_ratio) a["occlusion_ratio"] = *o.occlusion_ratio;
      anns.push_back(std::move(a));
    }
  }
  root["images"] = std::move(images);
  root["annotations"] = std::move(anns);
  if (set.synthesis) {
    root["synthesis"] = {{"seed", set.synthesis->seed},
                         {"config", synthesis_config_json(set.synthesis->config)}};
  }
  return canonical(root);
}

AnnotationSet load_annotations(const std::filesystem::path& path) {
  return parse_annotations(read_text(path), path.string());
}

void save_annotations(const AnnotationSet& set, const std::filesystem::path& path) {
  write_text_atomic(path, dump_annotations(set));
}

// ---------------------------------------------------------------------------
// Detections

std::vector<ImageDetectionList> parse_detections(std::string_view text,
                                                 std::string_view source) {
  const json root = parse_json(text, source);
  const Ctx ctx{source, ""};
  expect_object(root, ctx);
  check_version(root, ctx);
  const Ctx ictx = ctx.at("images");
  const json& images = expect_array(field(root, "images", ctx), ictx);
  std::vector<ImageDetectionList> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Ctx c = ictx.at(i);
    const json& img = expect_object(images[i], c);
    ImageDetectionList list;
    list.image_id = as_int(field(img, "image_id", c), c.at("image_id"));
    const Ctx dctx = c.at("detections");
    const json& dets = expect_array(field(img, "detections", c), dctx);
    for (std::size_t k = 0; k < dets.size(); ++k) {
      const Ctx dc = dctx.at(k);
      const json& d = expect_object(dets[k], dc);
      Detection det;
      det.bbox = bbox_from_json(field(d, "bbox", dc), dc.at("bbox"));
      det.score = as_real(field(d, "score", dc), dc.at("score"));
      if (det.score < 0.0 || det.score > 1.0) dc.at("score").fail("must lie in [0, 1]");
      if (auto* v = optional_field(d, "od")) det.od = as_real(*v, dc.at("od"));
      list.detections.push_back(det);
    }
    out.push_back(std::move(list));
  }
  return out;
}

std::string dump_detections(const std::vector<ImageDetectionList>& dets) {
  json images = json::array();
  for (const ImageDetectionList& list : dets) {
    json arr = json::array();
    for (const Detection& d : list.detections) {
      arr.push_back({{"bbox", bbox_to_json(d.bbox)}, {"score", d.score}, {"od", d.od}});
    }
    images.push_back({{"image_id", list.image_id}, {"detections", std::move(arr)}});
  }
  return canonical({{"version", kFormatVersion}, {"images", std::move(images)}});
}

std::vector<ImageDetectionList> load_detections(const std::filesystem::path& path) {
  return parse_detections(read_text(path), path.string());
}

void save_detections(const std::vector<ImageDetectionList>& dets,
                     const std::filesystem::path& path) {
  write_text_atomic(path, dump_detections(dets));
}

// ---------------------------------------------------------------------------
// Consensus pairs

std::vector<ImagePairs> parse_pairs(std::string_view text, std::string_view source) {
  const json root = parse_json(text, source);
  const Ctx ctx{source, ""};
  expect_object(root, ctx);
  check_version(root, ctx);
  const Ctx ictx = ctx.at("images");
  const json& images = expect_array(field(root, "images", ctx), ictx);
  std::vector<ImagePairs> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Ctx c = ictx.at(i);
    const json& img = expect_object(images[i], c);
    ImagePairs ip;
    ip.image_id = as_int(field(img, "image_id", c), c.at("image_id"));
    const Ctx pctx = c.at("pairs");
    const json& pairs = expect_array(field(img, "pairs", c), pctx);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const Ctx pc = pctx.at(k);
      const json& p = expect_object(pairs[k], pc);
      ip.pairs.push_back({as_int(field(p, "overlaid_id", pc), pc.at("overlaid_id")),
                          as_int(field(p, "free_id", pc), pc.at("free_id")),
                          as_int(field(p, "patch_id", pc), pc.at("patch_id"))});
    }
    out.push_back(std::move(ip));
  }
  return out;
}

std::string dump_pairs(const std::vector<ImagePairs>& pairs) {
  json images = json::array();
  for (const ImagePairs& ip : pairs) {
    json arr = json::array();
    for (const ConsensusPair& p : ip.pairs) {
      arr.push_back(
          {{"overlaid_id", p.overlaid_id}, {"free_id", p.free_id}, {"patch_id", p.patch_id}});
    }
    images.push_back({{"image_id", ip.image_id}, {"pairs", std::move(arr)}});
  }
  return canonical({{"version", kFormatVersion}, {"images", std::move(images)}});
}

// ---------------------------------------------------------------------------
// Patch library

PatchLibrary load_patch_library(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / "manifest.json";
  const std::string source = manifest_path.string();
  const json root = parse_json(read_text(manifest_path), source);
  const Ctx ctx{source, ""};
  expect_object(root, ctx);
  check_version(root, ctx);

  PatchLibrary lib;
  if (auto* v = optional_field(root, "source")) lib.source = as_string(*v, ctx.at("source"));
  const Ctx pctx = ctx.at("patches");
  const json& patches = expect_array(field(root, "patches", ctx), pctx);
  if (auto* v = optional_field(root, "count")) {
    if (as_int(*v, ctx.at("count")) != static_cast<std::int64_t>(patches.size())) {
      ctx.at("count").fail("does not match the number of patches");
    }
  }
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const Ctx c = pctx.at(i);
    const json& p = expect_object(patches[i], c);
    const PatchId id = as_int(field(p, "patch_id", c), c.at("patch_id"));
    const std::string file = as_string(field(p, "file", c), c.at("file"));
    const double native = as_real(field(p, "native_size", c), c.at("native_size"));
    const std::string category = as_string(field(p, "category", c), c.at("category"));
    const std::filesystem::path file_path = dir / file;
    if (!std::filesystem::exists(file_path)) {
      throw NotFound("patch " + std::to_string(id) + ": file " + file_path.string() +
                     " not found");
    }
    Image image = read_png(file_path);
    binarize_alpha(image);
    lib.patches.emplace_back(id, std::move(image), native, category);
  }
  lib.validate();
  return lib;
}

void save_patch_library(const PatchLibrary& lib, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json patches = json::array();
  for (const Patch& p : lib.patches) {
    const std::string file = "patch_" + std::to_string(p.id()) + ".png";
    write_png(dir / file, p.rgba());
    patches.push_back({{"patch_id", p.id()},
                       {"file", file},
                       {"native_size", p.native_size()},
                       {"category", p.category()}});
  }
  json root = {{"version", kFormatVersion},
               {"source", lib.source},
               {"count", lib.patches.size()},
               {"patches", std::move(patches)}};
  write_text_atomic(dir / "manifest.json", canonical(root));
}

// ---------------------------------------------------------------------------
// Config

void apply_config(std::string_view text, SynthesisConfig* synthesis, NmsConfig* nms,
                  SimConfig* sim, std::string_view source) {
  const json root = parse_json(text, source);
  const Ctx ctx{source, ""};
  expect_object(root, ctx);
  reject_unknown(root, {"synthesis", "nms", "sim"}, ctx);
  SynthesisConfig syn_scratch;
  NmsConfig nms_scratch;
  SimConfig sim_scratch;
  if (auto* v = optional_field(root, "synthesis")) {
    apply_synthesis(*v, synthesis ? *synthesis : syn_scratch, ctx.at("synthesis"));
  }
  if (auto* v = optional_field(root, "nms")) {
    apply_nms(*v, nms ? *nms : nms_scratch, ctx.at("nms"));
  }
  if (auto* v = optional_field(root, "sim")) {
    apply_sim(*v, sim ? *sim : sim_scratch, ctx.at("sim"));
  }
}

void apply_config_file(const std::filesystem::path& path, SynthesisConfig* synthesis,
                       NmsConfig* nms, SimConfig* sim) {
  apply_config(read_text(path), synthesis, nms, sim, path.string());
}

// ---------------------------------------------------------------------------
// Files

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " +
                  ec.message());
  }
}

// ---------------------------------------------------------------------------
// Reports

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char ch : value) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_field(fields[i]);
  }
  out += "\r\n";
  return out;
}

namespace {

constexpr double kBandLo[kIcdBands] = {0.0, 0.33, 0.66};
constexpr double kBandHi[kIcdBands] = {0.33, 0.66, 1.0};

}  // namespace

std::string icd_histogram_csv(const IcdHistogram& hist) {
  std::string out =
      csv_row({"band", "occ_lo", "occ_hi", "bin", "iou_lo", "iou_hi", "count", "mean", "std"});
  for (int band = 0; band < kIcdBands; ++band) {
    for (int bin = 0; bin < kIcdBins; ++bin) {
      const IcdBin& b = hist.bands[band][bin];
      out += csv_row({std::to_string(band + 1), format_real(kBandLo[band]),
                      format_real(kBandHi[band]), std::to_string(bin),
                      format_real(bin / 100.0), format_real((bin + 1) / 100.0),
                      std::to_string(b.count), format_real(b.mean), format_real(b.std)});
    }
  }
  return out;
}

std::string icd_summary_csv(const IcdReport& report) {
  std::string out = csv_row(
      {"band", "occ_lo", "occ_hi", "samples", "bins_used", "mean_std", "std_error"});
  for (int band = 0; band < kIcdBands; ++band) {
    const BandSummary& s = report.bands[band];
    out += csv_row({std::to_string(band + 1), format_real(kBandLo[band]),
                    format_real(kBandHi[band]), std::to_string(s.samples),
                    std::to_string(s.bins_used), format_real(s.mean_std),
                    format_real(s.std_error)});
  }
  return out;
}

std::string recall_report_csv(const RecallReport& r) {
  std::string out = csv_row({"metric", "value"});
  out += csv_row({"ap_integration", "all-point"});
  out += csv_row({"recall_iou", format_real(0.5)});
  out += csv_row({"recall_nms", format_real(r.recall_nms)});
  out += csv_row({"recall_odnms", format_real(r.recall_odnms)});
  out += csv_row({"ap_nms", format_real(r.ap_nms)});
  out += csv_row({"ap_odnms", format_real(r.ap_odnms)});
  out += csv_row({"gt_count", std::to_string(r.gt_count)});
  out += csv_row({"kept_nms", std::to_string(r.kept_nms)});
  out += csv_row({"kept_odnms", std::to_string(r.kept_odnms)});
  return out;
}

std::string metrics_csv(const MetricsReport& r) {
  std::string out = csv_row({"metric", "value"});
  out += csv_row({"ap_integration", "all-point"});
  out += csv_row({"ap50", format_real(r.ap50)});
  out += csv_row({"ap50_95", format_real(r.ap50_95)});
  out += csv_row({"mr2", format_real(r.mr2)});
  out += csv_row({"images", std::to_string(r.images)});
  out += csv_row({"gt_objects", std::to_string(r.gt_objects)});
  out += csv_row({"detections", std::to_string(r.detections)});
  return out;
}

namespace {

constexpr const char* kBandColors[kIcdBands] = {"#1f77b4", "#ff7f0e", "#d62728"};

std::string svg_header(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
         "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) +
         " " + std::to_string(h) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

}  // namespace

std::string icd_svg(const IcdHistogram& hist) {
  constexpr int kW = 640, kH = 400, kL = 60, kR = 20, kT = 30, kB = 50;
  double y_max = 0.0;
  for (const auto& band : hist.bands) {
    for (const IcdBin& b : band) {
      if (b.count >= 2) y_max = std::max(y_max, b.std);
    }
  }
  if (y_max <= 0.0) y_max = 1.0;
  auto px = [&](double iou) { return kL + iou * (kW - kL - kR); };
  auto py = [&](double v) { return kH - kB - v / y_max * (kH - kT - kB); };

  std::string out = svg_header(kW, kH);
  out += "<line x1=\"" + format_real(kL) + "\" y1=\"" + format_real(kH - kB) + "\" x2=\"" +
         format_real(kW - kR) + "\" y2=\"" + format_real(kH - kB) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + format_real(kL) + "\" y1=\"" + format_real(kT) + "\" x2=\"" +
         format_real(kL) + "\" y2=\"" + format_real(kH - kB) + "\" stroke=\"black\"/>\n";
  out += "<text x=\"" + std::to_string(kW / 2) + "\" y=\"" + std::to_string(kH - 12) +
         "\" text-anchor=\"middle\" font-size=\"14\">IoU</text>\n";
  out += "<text x=\"14\" y=\"" + std::to_string(kH / 2) +
         "\" font-size=\"14\" transform=\"rotate(-90 14 " + std::to_string(kH / 2) +
         ")\" text-anchor=\"middle\">score std (max " + format_real(y_max) + ")</text>\n";
  for (int band = 0; band < kIcdBands; ++band) {
    std::string points;
    for (int bin = 0; bin < kIcdBins; ++bin) {
      const IcdBin& b = hist.bands[band][bin];
      if (b.count < 2) continue;
      if (!points.empty()) points += ' ';
      points += format_real(px((bin + 0.5) / kIcdBins)) + "," + format_real(py(b.std));
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(kBandColors[band]) +
           "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    out += "<text x=\"" + std::to_string(kL + 10) + "\" y=\"" +
           std::to_string(kT + 16 * band + 10) + "\" font-size=\"12\" fill=\"" +
           kBandColors[band] + "\">occlusion " + format_real(kBandLo[band]) + "-" +
           format_real(kBandHi[band]) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

std::string recall_svg(const RecallReport& r) {
  constexpr int kW = 480, kH = 320, kL = 40, kB = 60, kT = 20;
  const std::pair<const char*, double> bars[] = {{"recall NMS", r.recall_nms},
                                                 {"recall OD-NMS", r.recall_odnms},
                                                 {"AP NMS", r.ap_nms},
                                                 {"AP OD-NMS", r.ap_odnms}};
  std::string out = svg_header(kW, kH);
  const double slot = (kW - kL - 20.0) / 4.0;
  for (int i = 0; i < 4; ++i) {
    const double h = bars[i].second * (kH - kT - kB);
    const double x = kL + i * slot + 0.15 * slot;
    out += "<rect x=\"" + format_real(x) + "\" y=\"" + format_real(kH - kB - h) +
           "\" width=\"" + format_real(0.7 * slot) + "\" height=\"" + format_real(h) +
           "\" fill=\"" + (i % 2 ? "#d62728" : "#1f77b4") + "\"/>\n";
    out += "<text x=\"" + format_real(x + 0.35 * slot) + "\" y=\"" +
           std::to_string(kH - kB + 18) + "\" font-size=\"11\" text-anchor=\"middle\">" +
           bars[i].first + "</text>\n";
    out += "<text x=\"" + format_real(x + 0.35 * slot) + "\" y=\"" +
           format_real(kH - kB - h - 4) + "\" font-size=\"11\" text-anchor=\"middle\">" +
           format_real(bars[i].second) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace crowdsynth
