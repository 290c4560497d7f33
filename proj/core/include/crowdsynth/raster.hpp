#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace crowdsynth {

using Rgba = std::array<std::uint8_t, 4>;

/// Interleaved 8-bit RGBA raster, row-major, top row first.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgba fill = {0, 0, 0, 255});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return width_ == 0 || height_ == 0; }

  Rgba at(int x, int y) const noexcept;
  void set(int x, int y, Rgba px) noexcept;

  std::vector<std::uint8_t>& bytes() noexcept { return data_; }
  const std::vector<std::uint8_t>& bytes() const noexcept { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Decodes any PNG color type/bit depth to RGBA8. Throws IoError.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace crowdsynth
