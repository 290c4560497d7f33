#include "crowdsynth/pipeline.hpp"

#include "crowdsynth/parallel.hpp"
#include "crowdsynth/rng.hpp"

namespace crowdsynth {

BatchSynthesis synthesize_batch(const AnnotationSet& base, const PatchLibrary& lib,
                                const SynthesisConfig& cfg, std::uint64_t seed,
                                int jobs) {
  cfg.validate();
  const std::size_t n = base.scenes.size();
  std::vector<SynthesisResult> results(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const Scene& scene = base.scenes[i];
    results[i] = synthesize_scene(
        scene, lib, cfg, derive_seed(seed, static_cast<std::uint64_t>(scene.image_id)));
  });

  BatchSynthesis out;
  out.annotations.synthesis = SynthesisMeta{seed, cfg};
  out.annotations.scenes.reserve(n);
  out.pairs.reserve(n);
  for (SynthesisResult& r : results) {
    out.pairs.push_back({r.scene.image_id, std::move(r.pairs)});
    out.annotations.scenes.push_back(std::move(r.scene));
  }
  return out;
}

SynthDocuments synthesize_documents(std::string_view annotations_json,
                                    const std::filesystem::path& patch_dir,
                                    std::string_view config_json, std::uint64_t seed,
                                    int jobs) {
  SynthesisConfig cfg;
  if (!config_json.empty()) apply_config(config_json, &cfg, nullptr, nullptr, "config");
  cfg.validate();
  const AnnotationSet base = parse_annotations(annotations_json, "annotations");
  const PatchLibrary lib =
      cfg.max_groups > 0 ? load_patch_library(patch_dir) : PatchLibrary{};
  const BatchSynthesis batch = synthesize_batch(base, lib, cfg, seed, jobs);
  return {dump_annotations(batch.annotations), dump_pairs(batch.pairs)};
}

}  // namespace crowdsynth
