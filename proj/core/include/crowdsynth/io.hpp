#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowdsynth/eval.hpp"
#include "crowdsynth/geometry.hpp"
#include "crowdsynth/odnms.hpp"
#include "crowdsynth/synthesis.hpp"

// On-disk formats. JSON documents are written canonically: keys sorted,
// two-space indentation, reals in fixed notation with six decimals, integers
// verbatim, trailing newline. Boxes are stored COCO-style as [x, y, w, h].
// Saves go through a temporary file and a rename; concurrent writers to one
// path are not supported.

namespace crowdsynth {

inline constexpr int kFormatVersion = 1;

struct SynthesisMeta {
  std::uint64_t seed = 0;
  SynthesisConfig config;

  friend bool operator==(const SynthesisMeta&, const SynthesisMeta&) = default;
};

struct AnnotationSet {
  std::vector<Scene> scenes;
  std::optional<SynthesisMeta> synthesis;

  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

AnnotationSet parse_annotations(std::string_view text,
                                std::string_view source = "<memory>");
std::string dump_annotations(const AnnotationSet& set);
AnnotationSet load_annotations(const std::filesystem::path& path);
void save_annotations(const AnnotationSet& set, const std::filesystem::path& path);

struct ImageDetectionList {
  std::int64_t image_id = 0;
  std::vector<Detection> detections;

  friend bool operator==(const ImageDetectionList&, const ImageDetectionList&) = default;
};

std::vector<ImageDetectionList> parse_detections(std::string_view text,
                                                 std::string_view source = "<memory>");
std::string dump_detections(const std::vector<ImageDetectionList>& dets);
std::vector<ImageDetectionList> load_detections(const std::filesystem::path& path);
void save_detections(const std::vector<ImageDetectionList>& dets,
                     const std::filesystem::path& path);

struct ImagePairs {
  std::int64_t image_id = 0;
  std::vector<ConsensusPair> pairs;

  friend bool operator==(const ImagePairs&, const ImagePairs&) = default;
};

std::vector<ImagePairs> parse_pairs(std::string_view text,
                                    std::string_view source = "<memory>");
std::string dump_pairs(const std::vector<ImagePairs>& pairs);

/// Directory holding manifest.json plus the RGBA PNG files it names:
/// {"count": n, "patches": [{"category", "file", "native_size", "patch_id"}],
///  "source": "...", "version": 1}. Alpha is binarized at 128 on load.
PatchLibrary load_patch_library(const std::filesystem::path& dir);
void save_patch_library(const PatchLibrary& lib, const std::filesystem::path& dir);

/// Config documents: {"synthesis": {...}, "nms": {...}, "sim": {...}}, every
/// section and key optional. Present keys overwrite the targets; unknown keys
/// raise SchemaError.
void apply_config(std::string_view text, SynthesisConfig* synthesis, NmsConfig* nms,
                  SimConfig* sim, std::string_view source = "<memory>");
void apply_config_file(const std::filesystem::path& path, SynthesisConfig* synthesis,
                       NmsConfig* nms, SimConfig* sim);

std::string read_text(const std::filesystem::path& path);
/// Writes via a sibling temporary file and rename.
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

/// RFC-4180 field quoting.
std::string csv_field(std::string_view value);
std::string csv_row(const std::vector<std::string>& fields);
/// Fixed six-decimal rendering shared by all reports; NaN renders empty.
std::string format_real(double value);

std::string icd_histogram_csv(const IcdHistogram& hist);
std::string icd_summary_csv(const IcdReport& report);
std::string recall_report_csv(const RecallReport& report);

struct MetricsReport {
  double ap50 = 0.0;
  double ap50_95 = 0.0;
  double mr2 = 0.0;
  std::size_t images = 0;
  std::size_t gt_objects = 0;
  std::size_t detections = 0;
};
std::string metrics_csv(const MetricsReport& report);

/// Score std vs IoU, one polyline per occlusion band.
std::string icd_svg(const IcdHistogram& hist);
std::string recall_svg(const RecallReport& report);

}  // namespace crowdsynth
