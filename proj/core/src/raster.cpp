#include "crowdsynth/raster.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "crowdsynth/errors.hpp"

namespace crowdsynth {

Image::Image(int width, int height, Rgba fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw InvalidInput("negative image dimensions");
  data_.resize(static_cast<std::size_t>(width) * height * 4);
  for (std::size_t i = 0; i < data_.size(); i += 4) {
    for (int c = 0; c < 4; ++c) data_[i + c] = fill[c];
  }
}

Rgba Image::at(int x, int y) const noexcept {
  const std::size_t o = (static_cast<std::size_t>(y) * width_ + x) * 4;
  return {data_[o], data_[o + 1], data_[o + 2], data_[o + 3]};
}

void Image::set(int x, int y, Rgba px) noexcept {
  const std::size_t o = (static_cast<std::size_t>(y) * width_ + x) * 4;
  for (int c = 0; c < 4; ++c) data_[o + c] = px[c];
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports errors by longjmp to png_jmpbuf. Everything with a destructor
// lives in the callers below so that the jump skips no cleanup.
bool decode_png(png_structp png, png_infop info, std::FILE* file, Image& image,
                std::vector<png_bytep>& rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, file);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  if (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_GRAY ||
      color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_filler(png, 0xFF, PNG_FILLER_AFTER);
  }
  png_read_update_info(png, info);

  image = Image(static_cast<int>(width), static_cast<int>(height));
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    rows[y] = image.bytes().data() + static_cast<std::size_t>(y) * width * 4;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  return true;
}

bool encode_png(png_structp png, png_infop info, std::FILE* file, const Image& image) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, file);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 8, PNG_COLOR_TYPE_RGBA,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height(); ++y) {
    auto* row = const_cast<png_bytep>(image.bytes().data() +
                                      static_cast<std::size_t>(y) * image.width() * 4);
    png_write_row(png, row);
  }
  png_write_end(png, nullptr);
  return true;
}

void silent_warning(png_structp, png_const_charp) {}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw NotFound("cannot open " + path.string());

  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw IoError(path.string() + ": not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                           silent_warning);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  Image image;
  std::vector<png_bytep> rows;
  const bool ok = info && decode_png(png, info, file.get(), image, rows);
  png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  if (!ok) throw IoError(path.string() + ": corrupt PNG data");
  return image;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                            silent_warning);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  const bool ok = info && encode_png(png, info, file.get(), image);
  png_destroy_write_struct(&png, info ? &info : nullptr);
  if (!ok) throw IoError(path.string() + ": PNG encoding failed");
}

}  // namespace crowdsynth
