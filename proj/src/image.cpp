/*
 * Copyright 2026 The LithoCNN Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "lithocnn/image.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include <jpeglib.h>
#include <png.h>

namespace lithocnn {
namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open image " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Image8 to_rgb(Image8 img) {
  if (img.channels == 3) return img;
  Image8 out(img.height, img.width, 3);
  for (Index y = 0; y < img.height; ++y) {
    for (Index x = 0; x < img.width; ++x) {
      for (Index c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, 0);
    }
  }
  return out;
}

Image8 decode_png(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw DataError("bad PNG " + what + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  Image8 out(image.height, image.width, 3);
  if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DataError("bad PNG " + what + ": " + image.message);
  }
  return out;
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_fail(j_common_ptr info) {
  auto* err = reinterpret_cast<JpegError*>(info->err);
  (*info->err->format_message)(info, err->message);
  std::longjmp(err->jump, 1);
}

Image8 decode_jpeg(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  jpeg_decompress_struct info;
  JpegError err;
  info.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_fail;
  Image8 out;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&info);
    throw DataError("bad JPEG " + what + ": " + err.message);
  }
  jpeg_create_decompress(&info);
  jpeg_mem_src(&info, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&info, TRUE);
  info.out_color_space = info.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&info);
  out = Image8(info.output_height, info.output_width, info.output_components);
  while (info.output_scanline < info.output_height) {
    JSAMPROW row = out.data.data() + static_cast<std::size_t>(info.output_scanline) * info.output_width *
                                         static_cast<std::size_t>(info.output_components);
    jpeg_read_scanlines(&info, &row, 1);
  }
  jpeg_finish_decompress(&info);
  jpeg_destroy_decompress(&info);
  return to_rgb(std::move(out));
}

}  // namespace

Image8 read_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  static constexpr std::uint8_t kPng[4] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kPng, 4) == 0) return decode_png(bytes, path.string());
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
    return decode_jpeg(bytes, path.string());
  }
  throw DataError("unsupported image container (PNG or JPEG expected): " + path.string());
}

std::vector<std::uint8_t> encode_png(const Image8& img) {
  if (img.channels != 1 && img.channels != 3) throw DimensionError("PNG export needs 1 or 3 channels");
  if (img.empty()) throw DimensionError("cannot encode an empty image");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.data.data(), 0, nullptr)) {
    throw DataError(std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.data.data(), 0, nullptr)) {
    throw DataError(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

void write_png(const std::filesystem::path& path, const Image8& image) {
  const auto bytes = encode_png(image);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("failed writing " + path.string());
}

Index tile_size_px(double dpi, double tile_cm) {
  if (!(dpi > 0)) throw DataError("dpi must be positive");
  if (!(tile_cm > 0)) throw ParameterError("tile size must be positive");
  return static_cast<Index>(std::lround(static_cast<double>(kNominalTilePx) * dpi / kNominalDpi * tile_cm / 10.0));
}

std::vector<RawTile> crop_samples(const CoreBoxImage& image, double tile_cm, std::vector<std::string>* warnings) {
  const auto warn = [&](std::string msg) {
    if (warnings) warnings->push_back(std::move(msg));
  };
  if (!image.dpi) throw DataError("image of well '" + image.well_id + "' has no dpi");
  if (!(image.depth_bottom_m > image.depth_top_m)) {
    throw DataError("depth_bottom_m must exceed depth_top_m for well '" + image.well_id + "'");
  }
  const Index t = tile_size_px(*image.dpi, tile_cm);
  const Index H = image.pixels.height, W = image.pixels.width;
  const double step = tile_cm / 100.0;
  const Index tw = std::min(W, t);
  const Index x0 = (W - tw) / 2;

  std::vector<Index> rows;
  const Index full = H / t;
  for (Index i = 0; i < full; ++i) rows.push_back(i * t);
  const Index rem = H - full * t;
  if (rem * 2 >= t && H >= t) {
    rows.push_back(H - t);
  } else if (rem * 2 >= t) {
    warn("image of well '" + image.well_id + "' is shorter than one tile (" + std::to_string(H) + " < " +
         std::to_string(t) + " px); no tiles");
  } else if (rem > 0) {
    if (full == 0) warn("image of well '" + image.well_id + "' is shorter than half a tile; no tiles");
    warn("dropped " + std::to_string(rem) + " px remainder (< half a tile) from well '" + image.well_id + "'");
  }

  std::vector<RawTile> tiles;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    RawTile tile;
    tile.well_id = image.well_id;
    tile.index = static_cast<Index>(i);
    // 0.1 m tiles keep the exact i/10 form; other sizes scale the index.
    tile.depth_top_m = tile_cm == 10.0 ? tile_depth(image.depth_top_m, tile.index)
                                       : image.depth_top_m + static_cast<double>(i) * step;
    tile.depth_bottom_m = tile_cm == 10.0 ? tile_depth(image.depth_top_m, tile.index + 1)
                                          : image.depth_top_m + static_cast<double>(i + 1) * step;
    // The bottom-aligned remainder tile may reach up to half a tile past the
    // recorded bottom; its interval is clipped there.
    const bool remainder = static_cast<Index>(i) == full;
    if (remainder && tile.depth_bottom_m > image.depth_bottom_m && tile.depth_bottom_m <= image.depth_bottom_m + step / 2) {
      tile.depth_bottom_m = image.depth_bottom_m;
    }
    if (tile.depth_bottom_m > image.depth_bottom_m + 1e-9) {
      warn("tile " + std::to_string(i) + " of well '" + image.well_id + "' passes depth_bottom_m; dropped");
      break;
    }
    tile.pixels = Image8(t, tw, image.pixels.channels);
    for (Index y = 0; y < t; ++y) {
      const auto* src = &image.pixels.data[static_cast<std::size_t>(((rows[i] + y) * W + x0) * image.pixels.channels)];
      std::copy(src, src + tw * image.pixels.channels,
                tile.pixels.data.begin() + static_cast<std::ptrdiff_t>(y * tw * image.pixels.channels));
    }
    tiles.push_back(std::move(tile));
  }
  return tiles;
}

TensorF normalize(const Image8& img) {
  TensorF t({img.channels, img.height, img.width});
  const Index plane = img.height * img.width;
  for (Index y = 0; y < img.height; ++y) {
    for (Index x = 0; x < img.width; ++x) {
      for (Index c = 0; c < img.channels; ++c) {
        t[c * plane + y * img.width + x] = static_cast<float>(img.at(y, x, c)) / 255.0f;
      }
    }
  }
  return t;
}

Image8 denormalize(const TensorF& t) {
  if (t.rank() != 3) throw DimensionError("denormalize expects [C,H,W], got " + shape_string(t.shape()));
  const Index C = t.dim(0), H = t.dim(1), W = t.dim(2);
  Image8 img(H, W, C);
  for (Index c = 0; c < C; ++c) {
    for (Index y = 0; y < H; ++y) {
      for (Index x = 0; x < W; ++x) {
        const float v = std::round(t[(c * H + y) * W + x] * 255.0f);
        img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0f, 255.0f));
      }
    }
  }
  return img;
}

TensorF resize_bilinear(const TensorF& image, Index out_h, Index out_w) {
  if (image.rank() != 3) throw DimensionError("resize_bilinear expects [C,H,W], got " + shape_string(image.shape()));
  const Index C = image.dim(0), H = image.dim(1), W = image.dim(2);
  if (H < 2 || W < 2) throw DimensionError("resize_bilinear needs a source of at least 2x2");
  if (out_h < 1 || out_w < 1) throw DimensionError("resize_bilinear output must be non-empty");
  if (H == out_h && W == out_w) return image;

  struct Tap {
    Index i0, i1;
    double f;
  };
  const auto taps = [](Index in, Index out) {
    std::vector<Tap> v(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (Index d = 0; d < out; ++d) {
      const double s = std::clamp((static_cast<double>(d) + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
      const Index i0 = std::min(static_cast<Index>(std::floor(s)), in - 1);
      v[static_cast<std::size_t>(d)] = {i0, std::min(i0 + 1, in - 1), s - static_cast<double>(i0)};
    }
    return v;
  };
  const auto ty = taps(H, out_h), tx = taps(W, out_w);
  TensorF out({C, out_h, out_w});
  for (Index c = 0; c < C; ++c) {
    const float* src = image.data() + c * H * W;
    float* dst = out.data() + c * out_h * out_w;
    for (Index y = 0; y < out_h; ++y) {
      const auto& a = ty[static_cast<std::size_t>(y)];
      for (Index x = 0; x < out_w; ++x) {
        const auto& b = tx[static_cast<std::size_t>(x)];
        const double top = src[a.i0 * W + b.i0] * (1 - b.f) + src[a.i0 * W + b.i1] * b.f;
        const double bot = src[a.i1 * W + b.i0] * (1 - b.f) + src[a.i1 * W + b.i1] * b.f;
        dst[y * out_w + x] = static_cast<float>(top * (1 - a.f) + bot * a.f);
      }
    }
  }
  return out;
}

TensorF to_grayscale(const TensorF& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) {
    throw DimensionError("to_grayscale expects [3,H,W], got " + shape_string(rgb.shape()));
  }
  const Index plane = rgb.dim(1) * rgb.dim(2);
  TensorF out({1, rgb.dim(1), rgb.dim(2)});
  for (Index i = 0; i < plane; ++i) {
    const double r = rgb[i], g = rgb[plane + i], b = rgb[2 * plane + i];
    // Same weights, written around g so equal channels return g exactly.
    out[i] = static_cast<float>(g + 0.299 * (r - g) + 0.114 * (b - g));
  }
  return out;
}

std::string to_string(ColorMode mode) { return mode == ColorMode::rgb ? "rgb" : "gray"; }

ColorMode color_mode_from_string(const std::string& name) {
  if (name == "rgb") return ColorMode::rgb;
  if (name == "gray" || name == "grayscale") return ColorMode::gray;
  throw ParameterError("unknown color mode '" + name + "' (rgb or gray)");
}

TensorF load_tile(const std::filesystem::path& path, ColorMode mode) {
  TensorF t = normalize(read_image(path));
  return mode == ColorMode::gray ? to_grayscale(t) : t;
}

}  // namespace lithocnn
