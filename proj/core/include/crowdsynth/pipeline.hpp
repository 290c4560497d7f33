#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "crowdsynth/io.hpp"

namespace crowdsynth {

struct BatchSynthesis {
  AnnotationSet annotations;
  std::vector<ImagePairs> pairs;
};

/// Synthesizes every image of `base` with seed derive_seed(seed, image_id).
/// `jobs` only changes wall time.
BatchSynthesis synthesize_batch(const AnnotationSet& base, const PatchLibrary& lib,
                                const SynthesisConfig& cfg, std::uint64_t seed,
                                int jobs = 1);

struct SynthDocuments {
  std::string annotations;
  std::string pairs;
};

/// Document-level entry point shared by the `synth` subcommand and language
/// bindings: annotation JSON in, canonical annotation and pair JSON out.
/// `config_json` uses the config-file schema (empty means defaults).
SynthDocuments synthesize_documents(std::string_view annotations_json,
                                    const std::filesystem::path& patch_dir,
                                    std::string_view config_json, std::uint64_t seed,
                                    int jobs = 1);

}  // namespace crowdsynth
