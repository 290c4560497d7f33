// Writes a small self-contained dataset for trying the crowdsynth tool:
//   <out>/annotations.json   base scenes with a few original objects
//   <out>/images/<id>.png    base images
//   <out>/patches/           patch library (manifest.json + RGBA PNGs)

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>

#include "crowdsynth/io.hpp"
#include "crowdsynth/rng.hpp"

namespace fs = std::filesystem;
using namespace crowdsynth;

namespace {

Image make_patch_image(int w, int h, Rgba color, Rng& rng) {
  Image img(w, h, {0, 0, 0, 0});
  // Head-and-torso silhouette: an ellipse on top of a rounded body.
  const double head_r = 0.22 * w;
  const double head_cx = 0.5 * w, head_cy = head_r + 1.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = (x + 0.5 - head_cx) / head_r;
      const double dy = (y + 0.5 - head_cy) / head_r;
      const bool head = dx * dx + dy * dy <= 1.0;
      const double bx = (x + 0.5 - 0.5 * w) / (0.5 * w);
      const bool body = y + 0.5 >= 2.0 * head_r && bx * bx <= 1.0 - 0.3 * (y + 0.5) / h;
      if (!head && !body) continue;
      const int shade = static_cast<int>(rng.uniform_int(-12, 12));
      Rgba px = color;
      for (int c = 0; c < 3; ++c) px[c] = static_cast<std::uint8_t>(std::clamp(px[c] + shade, 0, 255));
      px[3] = 255;
      img.set(x, y, px);
    }
  }
  return img;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crowdsynth-mkdemo: write a small demo dataset"};
  std::string out_dir;
  int images = 4, patches = 12, width = 640, height = 480;
  std::uint64_t seed = 7;
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--images", images, "number of base images")->check(CLI::PositiveNumber);
  app.add_option("--patches", patches, "number of patches")->check(CLI::PositiveNumber);
  app.add_option("--width", width)->check(CLI::PositiveNumber);
  app.add_option("--height", height)->check(CLI::PositiveNumber);
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);

  try {
    Rng rng(seed);
    fs::create_directories(fs::path(out_dir) / "images");

    PatchLibrary lib;
    lib.source = "crowdsynth-mkdemo";
    for (int i = 0; i < patches; ++i) {
      const int w = static_cast<int>(rng.uniform_int(24, 48));
      const int h = static_cast<int>(std::lround(w * rng.uniform(2.0, 2.8)));
      const Rgba color = {static_cast<std::uint8_t>(rng.uniform_int(30, 230)),
                          static_cast<std::uint8_t>(rng.uniform_int(30, 230)),
                          static_cast<std::uint8_t>(rng.uniform_int(30, 230)), 255};
      lib.patches.emplace_back(i, make_patch_image(w, h, color, rng), rng.uniform(0.1, 0.3),
                               "person");
    }
    save_patch_library(lib, fs::path(out_dir) / "patches");

    AnnotationSet set;
    for (int i = 0; i < images; ++i) {
      Scene scene;
      scene.image_id = i + 1;
      scene.image_width = width;
      scene.image_height = height;
      const auto count = rng.uniform_int(2, 6);
      for (std::int64_t k = 0; k < count; ++k) {
        const double h = rng.uniform(0.2, 0.45) * height;
        const double w = h * rng.uniform(0.35, 0.5);
        const double x = rng.uniform(0.0, width - w);
        const double y = rng.uniform(0.0, height - h);
        ObjectInstance o;
        o.id = k + 1;
        o.bbox = BBox(x, y, x + w, y + h);
        o.category = "person";
        o.depth_rank = k;
        scene.instances.push_back(o);
      }
      Image base(width, height);
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          base.set(x, y, {static_cast<std::uint8_t>(90 + 80 * y / height),
                          static_cast<std::uint8_t>(110 + 60 * x / width), 140, 255});
        }
      }
      write_png(fs::path(out_dir) / "images" / (std::to_string(scene.image_id) + ".png"), base);
      set.scenes.push_back(std::move(scene));
    }
    save_annotations(set, fs::path(out_dir) / "annotations.json");
    std::cout << "wrote " << images << " images and " << patches << " patches to " << out_dir
              << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
