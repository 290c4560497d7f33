#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>

#include "crowdsynth/errors.hpp"
#include "crowdsynth/eval.hpp"
#include "crowdsynth/io.hpp"
#include "crowdsynth/odnms.hpp"
#include "crowdsynth/parallel.hpp"
#include "crowdsynth/pipeline.hpp"
#include "crowdsynth/rng.hpp"
#include "crowdsynth/synthesis.hpp"

namespace crowdsynth::cli {

namespace fs = std::filesystem;

namespace {

/// Usage errors: bad flag values or invariant violations in the merged
/// configuration. Exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Config field name -> flag that sets it, for error messages.
const std::map<std::string, std::string>& flag_for_field() {
  static const std::map<std::string, std::string> m = {
      {"N", "--N"},
      {"M", "--M"},
      {"tau", "--tau"},
      {"epsilon", "--epsilon"},
      {"sigma", "--sigma"},
      {"size_clip", "--size-lo/--size-hi"},
      {"max_resample", "--max-resample"},
      {"min_inside_fraction", "--min-inside"},
      {"th_iou", "--th-iou"},
      {"delta", "--delta"},
      {"psi", "--psi"},
      {"proposals_per_object", "--proposals"},
      {"iou_low", "--iou-low"},
      {"score_slope", "--score-slope"},
      {"score_bias", "--score-bias"},
      {"noise_base", "--noise-base"},
      {"noise_occ", "--noise-occ"},
      {"duplicate_rate", "--duplicate-rate"},
      {"od_noise", "--od-noise"},
  };
  return m;
}

template <typename Config>
void validate_or_usage(const Config& cfg) {
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    if (colon != std::string::npos) {
      auto it = flag_for_field().find(msg.substr(0, colon));
      if (it != flag_for_field().end()) {
        throw UsageError(it->second + " (" + it->first + ")" + msg.substr(colon));
      }
    }
    throw UsageError(msg);
  }
}

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config;
  std::optional<int> jobs;

  int resolved_jobs() const {
    if (jobs) {
      if (*jobs < 1) throw UsageError("--jobs: must be >= 1");
      return *jobs;
    }
    if (const char* env = std::getenv("CROWDSYNTH_JOBS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end == env || *end != '\0' || v < 1) {
        throw UsageError("CROWDSYNTH_JOBS: must be a positive integer");
      }
      return static_cast<int>(v);
    }
    return 1;
  }
};

struct SynthFlags {
  std::optional<int> n, m, max_resample;
  std::optional<double> tau, epsilon, sigma, size_lo, size_hi, min_inside;

  void add(CLI::App* app) {
    app->add_option("--N", n, "max group count");
    app->add_option("--M", m, "max members per group");
    app->add_option("--tau", tau, "x-shift divisor (> 1)");
    app->add_option("--epsilon", epsilon, "y-shift divisor (> 1)");
    app->add_option("--sigma", sigma, "member size std-dev (> 0)");
    app->add_option("--size-lo", size_lo, "lower size clip");
    app->add_option("--size-hi", size_hi, "upper size clip");
    app->add_option("--max-resample", max_resample, "placement retry budget");
    app->add_option("--min-inside", min_inside, "min fraction of a pasted box inside the image");
  }
  void apply(SynthesisConfig& c) const {
    if (n) c.max_groups = *n;
    if (m) c.max_members = *m;
    if (tau) c.tau = *tau;
    if (epsilon) c.epsilon = *epsilon;
    if (sigma) c.sigma = *sigma;
    if (size_lo) c.size_lo = *size_lo;
    if (size_hi) c.size_hi = *size_hi;
    if (max_resample) c.max_resample = *max_resample;
    if (min_inside) c.min_inside_fraction = *min_inside;
  }
};

struct NmsFlags {
  std::optional<double> th_iou, delta, psi;

  void add(CLI::App* app, bool with_od) {
    app->add_option("--th-iou", th_iou, "IoU suppression threshold");
    if (with_od) {
      app->add_option("--delta", delta, "OD threshold scale (> 0)");
      app->add_option("--psi", psi, "OD threshold IoU exponent");
    }
  }
  void apply(NmsConfig& c) const {
    if (th_iou) c.th_iou = *th_iou;
    if (delta) c.delta = *delta;
    if (psi) c.psi = *psi;
  }
};

struct SimFlags {
  std::optional<int> proposals;
  std::optional<double> iou_low, slope, bias, noise_base, noise_occ, dup, od_noise;

  void add(CLI::App* app) {
    app->add_option("--proposals", proposals, "proposals per object");
    app->add_option("--iou-low", iou_low, "minimum proposal IoU");
    app->add_option("--score-slope", slope, "score = slope * IoU + bias + noise");
    app->add_option("--score-bias", bias, "score bias");
    app->add_option("--noise-base", noise_base, "base score noise std");
    app->add_option("--noise-occ", noise_occ, "occlusion-scaled noise gain");
    app->add_option("--duplicate-rate", dup, "probability of an extra duplicate");
    app->add_option("--od-noise", od_noise, "std of predicted overlay depth noise");
  }
  void apply(SimConfig& c) const {
    if (proposals) c.proposals_per_object = *proposals;
    if (iou_low) c.iou_low = *iou_low;
    if (slope) c.score_slope = *slope;
    if (bias) c.score_bias = *bias;
    if (noise_base) c.noise_base = *noise_base;
    if (noise_occ) c.noise_occ = *noise_occ;
    if (dup) c.duplicate_rate = *dup;
    if (od_noise) c.od_noise = *od_noise;
  }
};

struct Configs {
  SynthesisConfig synthesis;
  NmsConfig nms;
  SimConfig sim;
};

Configs load_configs(const Globals& g) {
  Configs c;
  if (g.config) {
    try {
      apply_config_file(*g.config, &c.synthesis, &c.nms, &c.sim);
    } catch (const SchemaError& e) {
      throw UsageError(std::string("--config: ") + e.what());
    } catch (const ParseError& e) {
      throw UsageError(std::string("--config: ") + e.what());
    }
  }
  if (g.seed) c.sim.seed = *g.seed;
  return c;
}

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text_atomic(path, text);
  }
}

std::vector<Scene> scenes_for_sim(const std::string& anns, bool label_all) {
  AnnotationSet set = load_annotations(anns);
  for (Scene& s : set.scenes) {
    if (label_all) {
      assign_depth_labels(s, DepthLabelScope::kAll);
      continue;
    }
    for (const ObjectInstance& o : s.instances) {
      if (!o.occlusion_ratio) {
        throw InvalidInput(anns + ": image " + std::to_string(s.image_id) + ", instance " +
                           std::to_string(o.id) +
                           " has no occlusion_ratio (pass --label-all to derive labels "
                           "from depth ranks)");
      }
    }
  }
  return std::move(set.scenes);
}

std::string default_pairs_path(const std::string& out) {
  fs::path p(out);
  if (p.extension() == ".json") p.replace_extension();
  p += ".pairs.json";
  return p.string();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{
      "crowdsynth: crowded-scene copy-paste synthesis, overlay depth and OD-NMS.\n"
      "Settings resolve as built-in defaults < --config file < command-line flags."};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "RNG seed");
  app.add_option("--config", g.config,
                 "JSON file with optional \"synthesis\", \"nms\" and \"sim\" sections");
  app.add_option("--jobs", g.jobs, "worker threads (default: $CROWDSYNTH_JOBS or 1)");

  // synth
  auto* synth = app.add_subcommand("synth", "augment annotations with crowded pastes");
  std::string synth_in, synth_out, synth_pairs, synth_patches;
  SynthFlags synth_flags;
  synth->add_option("--in", synth_in, "input annotations")->required();
  synth->add_option("--out", synth_out, "output annotations")->required();
  synth->add_option("--patches", synth_patches, "patch library directory");
  synth->add_option("--pairs", synth_pairs, "consensus-pair sidecar (default <out>.pairs.json)");
  synth_flags.add(synth);

  // render
  auto* render_cmd = app.add_subcommand("render", "composite pasted patches into images");
  std::string render_anns, render_patches, render_images, render_out;
  render_cmd->add_option("--anns", render_anns, "annotations")->required();
  render_cmd->add_option("--patches", render_patches, "patch library directory")->required();
  render_cmd->add_option("--images", render_images,
                         "directory of base images named <image_id>.png (default: gray)");
  render_cmd->add_option("--out", render_out, "output directory")->required();

  // nms / odnms
  auto* nms_cmd = app.add_subcommand("nms", "greedy non-maximum suppression");
  auto* odnms_cmd = app.add_subcommand("odnms", "overlay-depth-aware NMS");
  std::string nms_dets, nms_out;
  NmsFlags nms_flags;
  for (auto* cmd : {nms_cmd, odnms_cmd}) {
    cmd->add_option("--dets", nms_dets, "detections")->required();
    cmd->add_option("--out", nms_out, "kept detections")->required();
  }
  nms_flags.add(nms_cmd, false);
  NmsFlags odnms_flags;
  odnms_flags.add(odnms_cmd, true);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "simulate detector outputs");
  std::string sim_anns, sim_out, sim_samples;
  bool sim_label = false;
  SimFlags sim_flags;
  simulate->add_option("--anns", sim_anns, "scenes")->required();
  simulate->add_option("--out", sim_out, "detections")->required();
  simulate->add_option("--samples", sim_samples, "matched samples CSV");
  simulate->add_flag("--label-all", sim_label,
                     "fill od/occlusion for every instance from depth ranks");
  sim_flags.add(simulate);

  // icd
  auto* icd = app.add_subcommand("icd", "IoU-confidence disturbance histogram");
  std::string icd_anns, icd_out, icd_summary, icd_svg_path;
  bool icd_label = false;
  SimFlags icd_flags;
  icd->add_option("--anns", icd_anns, "scenes")->required();
  icd->add_option("--out", icd_out, "histogram CSV (- for stdout)")->required();
  icd->add_option("--summary", icd_summary, "per-band summary CSV");
  icd->add_option("--svg", icd_svg_path, "std-vs-IoU plot");
  icd->add_flag("--label-all", icd_label,
                "fill od/occlusion for every instance from depth ranks");
  icd_flags.add(icd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "AP and MR-2 of detections");
  std::string eval_dets, eval_anns, eval_out = "-";
  double eval_iou = 0.5;
  eval_cmd->add_option("--dets", eval_dets, "detections")->required();
  eval_cmd->add_option("--anns", eval_anns, "ground truth")->required();
  eval_cmd->add_option("--out", eval_out, "metrics CSV (default stdout)");
  eval_cmd->add_option("--iou", eval_iou, "IoU threshold for AP and MR-2")
      ->check(CLI::Range(0.0, 1.0));

  // recall-exp
  auto* recall_cmd = app.add_subcommand("recall-exp", "NMS vs OD-NMS recall experiment");
  std::string rec_anns, rec_out = "-", rec_svg;
  bool rec_label = false;
  std::size_t rec_scenes = 500;
  CrowdPairSpec pair_spec;
  SimFlags rec_sim_flags;
  NmsFlags rec_nms_flags;
  recall_cmd->add_option("--anns", rec_anns, "scenes (default: generated crowded pairs)");
  recall_cmd->add_option("--scenes", rec_scenes, "generated scene count");
  recall_cmd->add_option("--pairs-per-scene", pair_spec.pairs_per_scene)
      ->check(CLI::PositiveNumber);
  recall_cmd->add_option("--pair-iou-lo", pair_spec.iou_lo);
  recall_cmd->add_option("--pair-iou-hi", pair_spec.iou_hi);
  recall_cmd->add_option("--od-gap-lo", pair_spec.od_gap_lo);
  recall_cmd->add_option("--od-gap-hi", pair_spec.od_gap_hi);
  recall_cmd->add_option("--out", rec_out, "report CSV (default stdout)");
  recall_cmd->add_option("--svg", rec_svg, "bar chart");
  recall_cmd->add_flag("--label-all", rec_label,
                       "fill od/occlusion for every instance from depth ranks");
  rec_sim_flags.add(recall_cmd);
  rec_nms_flags.add(recall_cmd, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    const int jobs = g.resolved_jobs();
    Configs cfg = load_configs(g);

    if (*synth) {
      synth_flags.apply(cfg.synthesis);
      validate_or_usage(cfg.synthesis);
      if (cfg.synthesis.max_groups > 0 && synth_patches.empty()) {
        throw UsageError("--patches: required when N > 0");
      }
      const AnnotationSet base = load_annotations(synth_in);
      const PatchLibrary lib = cfg.synthesis.max_groups > 0
                                   ? load_patch_library(synth_patches)
                                   : PatchLibrary{};
      const BatchSynthesis batch =
          synthesize_batch(base, lib, cfg.synthesis, g.seed.value_or(0), jobs);
      save_annotations(batch.annotations, synth_out);
      write_text_atomic(synth_pairs.empty() ? default_pairs_path(synth_out) : synth_pairs,
                        dump_pairs(batch.pairs));
      std::size_t pasted = 0, pairs = 0;
      for (const Scene& s : batch.annotations.scenes) {
        for (const ObjectInstance& o : s.instances) pasted += o.is_pasted;
      }
      for (const ImagePairs& p : batch.pairs) pairs += p.pairs.size();
      out << "synthesized " << batch.annotations.scenes.size() << " images, " << pasted
          << " pasted instances, " << pairs << " consensus pairs\n";
    } else if (*render_cmd) {
      const AnnotationSet set = load_annotations(render_anns);
      const PatchLibrary lib = load_patch_library(render_patches);
      fs::create_directories(render_out);
      parallel_for(set.scenes.size(), jobs, [&](std::size_t i) {
        const Scene& s = set.scenes[i];
        const std::string name = std::to_string(s.image_id) + ".png";
        const Image base = render_images.empty()
                               ? Image(s.image_width, s.image_height, {128, 128, 128, 255})
                               : read_png(fs::path(render_images) / name);
        write_png(fs::path(render_out) / name, render(s, base, lib));
      });
      out << "rendered " << set.scenes.size() << " images\n";
    } else if (*nms_cmd || *odnms_cmd) {
      const bool with_od = static_cast<bool>(*odnms_cmd);
      (with_od ? odnms_flags : nms_flags).apply(cfg.nms);
      validate_or_usage(cfg.nms);
      std::vector<ImageDetectionList> lists = load_detections(nms_dets);
      std::size_t before = 0, after = 0;
      for (ImageDetectionList& l : lists) {
        before += l.detections.size();
        l.detections = with_od ? od_nms(l.detections, cfg.nms)
                               : standard_nms(l.detections, cfg.nms.th_iou);
        after += l.detections.size();
      }
      save_detections(lists, nms_out);
      out << "kept " << after << " of " << before << " detections\n";
    } else if (*simulate) {
      sim_flags.apply(cfg.sim);
      validate_or_usage(cfg.sim);
      const std::vector<Scene> scenes = scenes_for_sim(sim_anns, sim_label);
      std::vector<SimOutput> outputs(scenes.size());
      parallel_for(scenes.size(), jobs, [&](std::size_t i) {
        SimConfig c = cfg.sim;
        c.seed = derive_seed(cfg.sim.seed, static_cast<std::uint64_t>(scenes[i].image_id));
        outputs[i] = simulate_detections(scenes[i], c);
      });
      std::vector<ImageDetectionList> lists;
      std::string samples = csv_row({"image_id", "iou", "score", "occlusion_ratio"});
      for (std::size_t i = 0; i < scenes.size(); ++i) {
        lists.push_back({scenes[i].image_id, outputs[i].detections});
        for (const MatchedSample& s : outputs[i].samples) {
          samples += csv_row({std::to_string(scenes[i].image_id), format_real(s.iou),
                              format_real(s.score), format_real(s.occlusion_ratio)});
        }
      }
      save_detections(lists, sim_out);
      if (!sim_samples.empty()) write_text_atomic(sim_samples, samples);
    } else if (*icd) {
      icd_flags.apply(cfg.sim);
      validate_or_usage(cfg.sim);
      const std::vector<Scene> scenes = scenes_for_sim(icd_anns, icd_label);
      const IcdReport report = run_icd_experiment(scenes, cfg.sim, jobs);
      write_output(icd_out, icd_histogram_csv(report.histogram), out);
      if (!icd_summary.empty()) write_text_atomic(icd_summary, icd_summary_csv(report));
      if (!icd_svg_path.empty()) write_text_atomic(icd_svg_path, icd_svg(report.histogram));
    } else if (*eval_cmd) {
      const AnnotationSet gt = load_annotations(eval_anns);
      const std::vector<ImageDetectionList> lists = load_detections(eval_dets);
      std::unordered_map<std::int64_t, std::size_t> index;
      for (std::size_t i = 0; i < gt.scenes.size(); ++i) index[gt.scenes[i].image_id] = i;
      std::vector<ImageDetections> dets(gt.scenes.size());
      MetricsReport r;
      for (const ImageDetectionList& l : lists) {
        auto it = index.find(l.image_id);
        if (it == index.end()) {
          throw IntegrityError(eval_dets + ": image_id " + std::to_string(l.image_id) +
                               " is not in " + eval_anns);
        }
        dets[it->second].insert(dets[it->second].end(), l.detections.begin(),
                                l.detections.end());
        r.detections += l.detections.size();
      }
      r.images = gt.scenes.size();
      for (const Scene& s : gt.scenes) r.gt_objects += s.instances.size();
      r.ap50 = average_precision(dets, gt.scenes, eval_iou);
      r.ap50_95 = average_precision_coco(dets, gt.scenes);
      r.mr2 = mr2(dets, gt.scenes, eval_iou);
      write_output(eval_out, metrics_csv(r), out);
    } else if (*recall_cmd) {
      rec_sim_flags.apply(cfg.sim);
      rec_nms_flags.apply(cfg.nms);
      validate_or_usage(cfg.sim);
      validate_or_usage(cfg.nms);
      const std::vector<Scene> scenes =
          rec_anns.empty()
              ? make_crowd_pair_scenes(rec_scenes, pair_spec, g.seed.value_or(0))
              : scenes_for_sim(rec_anns, rec_label);
      const RecallReport report = run_recall_experiment(scenes, cfg.sim, cfg.nms, jobs);
      write_output(rec_out, recall_report_csv(report), out);
      if (!rec_svg.empty()) write_text_atomic(rec_svg, recall_svg(report));
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error (" << e.kind() << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace crowdsynth::cli
