// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/io.hpp"

#include "voxreg/error.hpp"

#include <png.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace voxreg::io {

namespace {

constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint8_t kDtypeF64 = 0;

std::string describe(const fs::path& path) { return "'" + path.string() + "'"; }

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open " + describe(path) + " for writing");
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + describe(path));
  return in;
}

template <typename U>
void put_le(std::ostream& out, U value) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

template <typename U>
U get_le(std::istream& in, const fs::path& path) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw InputError(describe(path) + " is truncated");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= U(bytes[i]) << (8 * i);
  return value;
}

double get_f64(std::istream& in, const fs::path& path) { return std::bit_cast<double>(get_le<std::uint64_t>(in, path)); }

void put_f64_block(std::ostream& out, std::span<const double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()), std::streamsize(values.size() * sizeof(double)));
  } else {
    for (double v : values) put_f64(out, v);
  }
}

void get_f64_block(std::istream& in, const fs::path& path, std::span<double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!in.read(reinterpret_cast<char*>(values.data()), std::streamsize(values.size() * sizeof(double)))) {
      throw InputError(describe(path) + " is truncated");
    }
  } else {
    for (double& v : values) v = get_f64(in, path);
  }
}

void expect_end(std::istream& in, const fs::path& path) {
  if (in.peek() != std::char_traits<char>::eof()) throw InputError(describe(path) + " has trailing bytes");
}

void put_header(std::ostream& out, const char magic[4], std::uint8_t ndim) {
  out.write(magic, 4);
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint8_t>(out, kDtypeF64);
  put_le<std::uint8_t>(out, ndim);
}

void get_header(std::istream& in, const fs::path& path, const char magic[4], std::uint8_t ndim) {
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw InputError(describe(path) + " is not a " + std::string(magic, 4) + " file");
  }
  if (get_le<std::uint32_t>(in, path) != kFormatVersion) throw InputError(describe(path) + ": unsupported version");
  if (get_le<std::uint8_t>(in, path) != kDtypeF64) throw InputError(describe(path) + ": unsupported dtype");
  if (get_le<std::uint8_t>(in, path) != ndim) throw InputError(describe(path) + ": unexpected rank");
}

void check_image_size(int width, int height, std::size_t values) {
  if (width <= 0 || height <= 0) throw ShapeError("image size must be positive");
  if (values != std::size_t(width) * height) throw ShapeError("buffer size != width * height");
}

}  // namespace

void write_vxg(const fs::path& path, const VoxelGrid& grid) {
  auto out = open_out(path);
  put_header(out, "VXG1", 4);
  const GridSpec& s = grid.spec();
  put_le<std::uint32_t>(out, std::uint32_t(grid.channels()));
  put_le<std::uint32_t>(out, std::uint32_t(s.dims.nz));
  put_le<std::uint32_t>(out, std::uint32_t(s.dims.ny));
  put_le<std::uint32_t>(out, std::uint32_t(s.dims.nx));
  for (int a = 0; a < 3; ++a) put_f64(out, s.extent.min[a]);
  for (int a = 0; a < 3; ++a) put_f64(out, s.extent.max[a]);
  put_f64_block(out, grid.data());
  if (!out) throw InputError("failed writing " + describe(path));
}

VoxelGrid read_vxg(const fs::path& path) {
  auto in = open_in(path);
  get_header(in, path, "VXG1", 4);
  const auto c = get_le<std::uint32_t>(in, path);
  GridSpec spec;
  spec.dims.nz = int(get_le<std::uint32_t>(in, path));
  spec.dims.ny = int(get_le<std::uint32_t>(in, path));
  spec.dims.nx = int(get_le<std::uint32_t>(in, path));
  for (int a = 0; a < 3; ++a) spec.extent.min[a] = get_f64(in, path);
  for (int a = 0; a < 3; ++a) spec.extent.max[a] = get_f64(in, path);
  if (c == 0 || c > (1u << 16)) throw InputError(describe(path) + ": bad channel count");
  spec.validate();
  VoxelGrid grid(spec, int(c));
  get_f64_block(in, path, grid.data());
  expect_end(in, path);
  return grid;
}

void write_feature_image(const fs::path& path, const FeatureImage& image) {
  image.validate();
  auto out = open_out(path);
  put_header(out, "VXF1", 3);
  put_le<std::uint32_t>(out, std::uint32_t(image.channels + image.bins));
  put_le<std::uint32_t>(out, std::uint32_t(image.height));
  put_le<std::uint32_t>(out, std::uint32_t(image.width));
  put_le<std::uint32_t>(out, std::uint32_t(image.channels));
  put_f64_block(out, image.features);
  put_f64_block(out, image.probs);
  if (!out) throw InputError("failed writing " + describe(path));
}

FeatureImage read_feature_image(const fs::path& path) {
  auto in = open_in(path);
  get_header(in, path, "VXF1", 3);
  const auto planes = get_le<std::uint32_t>(in, path);
  const auto height = get_le<std::uint32_t>(in, path);
  const auto width = get_le<std::uint32_t>(in, path);
  const auto channels = get_le<std::uint32_t>(in, path);
  if (channels > planes || planes == channels) throw InputError(describe(path) + ": bad plane split");
  if (width == 0 || height == 0 || width > (1u << 16) || height > (1u << 16)) {
    throw InputError(describe(path) + ": bad image size");
  }
  FeatureImage image(int(width), int(height), int(channels), int(planes - channels));
  get_f64_block(in, path, image.features);
  get_f64_block(in, path, image.probs);
  expect_end(in, path);
  image.validate();
  return image;
}

void write_pfm(const fs::path& path, int width, int height, std::span<const double> values) {
  check_image_size(width, height, values.size());
  auto out = open_out(path);
  out << "Pf\n" << width << ' ' << height << "\n-1.0\n";
  for (int v = height - 1; v >= 0; --v) {
    for (int u = 0; u < width; ++u) {
      put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(values[std::size_t(v) * width + u])));
    }
  }
  if (!out) throw InputError("failed writing " + describe(path));
}

ScalarImage read_pfm(const fs::path& path) {
  auto in = open_in(path);
  std::string magic;
  ScalarImage img;
  double scale = 0.0;
  if (!(in >> magic >> img.width >> img.height >> scale) || magic != "Pf") {
    throw InputError(describe(path) + " is not a single-channel PFM file");
  }
  in.get();  // single whitespace before the raster
  if (img.width <= 0 || img.height <= 0 || scale == 0.0) throw InputError(describe(path) + ": bad PFM header");
  const bool little = scale < 0.0;
  img.values.resize(std::size_t(img.width) * img.height);
  for (int v = img.height - 1; v >= 0; --v) {
    for (int u = 0; u < img.width; ++u) {
      std::uint32_t bits = get_le<std::uint32_t>(in, path);
      if (!little) bits = (bits >> 24) | ((bits >> 8) & 0xff00u) | ((bits << 8) & 0xff0000u) | (bits << 24);
      img.values[std::size_t(v) * img.width + u] = std::bit_cast<float>(bits);
    }
  }
  expect_end(in, path);
  return img;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp, png_const_charp message) { throw InputError(std::string("PNG: ") + message); }
void png_warn(png_structp, png_const_charp) {}

}  // namespace

void write_png(const fs::path& path, const PngImage& image) {
  if (image.channels != 1 && image.channels != 3) throw InputError("PNG images have 1 or 3 channels");
  if (image.bit_depth != 8 && image.bit_depth != 16) throw InputError("PNG bit depth must be 8 or 16");
  check_image_size(image.width, image.height, image.samples.size() / image.channels);
  if (image.samples.size() % image.channels != 0) throw ShapeError("PNG sample count");
  const std::uint16_t limit = image.bit_depth == 8 ? 255 : 65535;
  for (auto s : image.samples) {
    if (s > limit) throw InputError("PNG sample exceeds bit depth");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw InputError("cannot open " + describe(path) + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw InputError("libpng initialization failed");
  }
  const std::size_t row_samples = std::size_t(image.width) * image.channels;
  const std::size_t bytes = image.bit_depth / 8;
  std::vector<unsigned char> row(row_samples * bytes);
  try {
    png_init_io(png, file.get());
    png_set_IHDR(png, info, png_uint_32(image.width), png_uint_32(image.height), image.bit_depth,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int v = 0; v < image.height; ++v) {
      const std::uint16_t* src = image.samples.data() + std::size_t(v) * row_samples;
      for (std::size_t i = 0; i < row_samples; ++i) {
        if (bytes == 1) {
          row[i] = static_cast<unsigned char>(src[i]);
        } else {
          row[2 * i] = static_cast<unsigned char>(src[i] >> 8);  // PNG is big-endian
          row[2 * i + 1] = static_cast<unsigned char>(src[i] & 0xff);
        }
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
}

PngImage read_png(const fs::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw InputError("cannot open " + describe(path));
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw InputError(describe(path) + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw InputError("libpng initialization failed");
  }
  PngImage img;
  try {
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    img.width = int(png_get_image_width(png, info));
    img.height = int(png_get_image_height(png, info));
    img.bit_depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_GRAY) {
      img.channels = 1;
    } else if (color == PNG_COLOR_TYPE_RGB) {
      img.channels = 3;
    } else {
      throw InputError(describe(path) + ": only gray and RGB PNGs are supported");
    }
    if (img.bit_depth != 8 && img.bit_depth != 16) throw InputError(describe(path) + ": unsupported bit depth");
    const std::size_t row_samples = std::size_t(img.width) * img.channels;
    const std::size_t bytes = img.bit_depth / 8;
    std::vector<unsigned char> row(row_samples * bytes);
    img.samples.resize(row_samples * img.height);
    for (int v = 0; v < img.height; ++v) {
      png_read_row(png, row.data(), nullptr);
      std::uint16_t* dst = img.samples.data() + std::size_t(v) * row_samples;
      for (std::size_t i = 0; i < row_samples; ++i) {
        dst[i] = bytes == 1 ? row[i] : std::uint16_t((row[2 * i] << 8) | row[2 * i + 1]);
      }
    }
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_depth_png_mm(const fs::path& path, int width, int height, std::span<const double> depth,
                        std::span<const std::uint8_t> mask) {
  check_image_size(width, height, depth.size());
  if (!mask.empty() && mask.size() != depth.size()) throw ShapeError("mask size != pixels");
  PngImage img{width, height, 1, 16, std::vector<std::uint16_t>(depth.size(), 0)};
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    const double mm = std::round(depth[i] * 1000.0);
    if (!std::isfinite(mm) || mm < 1.0 || mm > 65535.0) {
      throw InputError("depth " + std::to_string(depth[i]) + " m does not fit a 16-bit millimeter PNG");
    }
    img.samples[i] = std::uint16_t(mm);
  }
  write_png(path, img);
}

ScalarImage read_depth_png_mm(const fs::path& path) {
  const PngImage img = read_png(path);
  if (img.channels != 1 || img.bit_depth != 16) throw InputError(describe(path) + " is not a 16-bit depth PNG");
  ScalarImage out{img.width, img.height, std::vector<double>(img.samples.size())};
  for (std::size_t i = 0; i < img.samples.size(); ++i) out.values[i] = img.samples[i] / 1000.0;
  return out;
}

void write_label_png(const fs::path& path, int width, int height, std::span<const int> labels) {
  check_image_size(width, height, labels.size());
  PngImage img{width, height, 1, 8, std::vector<std::uint16_t>(labels.size())};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kIgnoreLabel) {
      img.samples[i] = kIgnorePixel;
    } else if (labels[i] >= 0 && labels[i] < kIgnorePixel) {
      img.samples[i] = std::uint16_t(labels[i]);
    } else {
      throw InputError("label " + std::to_string(labels[i]) + " does not fit an 8-bit class PNG");
    }
  }
  write_png(path, img);
}

std::vector<int> read_label_png(const fs::path& path, int* width, int* height) {
  const PngImage img = read_png(path);
  if (img.channels != 1 || img.bit_depth != 8) throw InputError(describe(path) + " is not an 8-bit label PNG");
  std::vector<int> labels(img.samples.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = img.samples[i] == kIgnorePixel ? kIgnoreLabel : int(img.samples[i]);
  }
  if (width) *width = img.width;
  if (height) *height = img.height;
  return labels;
}

std::array<std::uint8_t, 3> palette_color(int label) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 8> kPalette{{
      {0, 0, 0},
      {128, 64, 128},
      {220, 20, 60},
      {0, 0, 142},
      {107, 142, 35},
      {250, 170, 30},
      {70, 130, 180},
      {255, 255, 255},
  }};
  if (label == kIgnoreLabel) return {40, 40, 40};
  if (label < 0) throw InputError("palette_color: negative label");
  if (label < int(kPalette.size())) return kPalette[label];
  // Deterministic spread for larger class counts.
  const auto h = std::uint32_t(label) * 2654435761u;
  return {std::uint8_t(h >> 24), std::uint8_t(h >> 16), std::uint8_t(h >> 8)};
}

void write_palette_png(const fs::path& path, int width, int height, std::span<const int> labels) {
  check_image_size(width, height, labels.size());
  PngImage img{width, height, 3, 8, std::vector<std::uint16_t>(labels.size() * 3)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto rgb = palette_color(labels[i]);
    for (int c = 0; c < 3; ++c) img.samples[3 * i + c] = rgb[c];
  }
  write_png(path, img);
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view field, const fs::path& path, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw InputError(describe(path) + " line " + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  }
  return v;
}

constexpr const char* kLossHeader = "step,L_dep_cam,L_dep_bev,L_sem_cam,L_sem_bev,total";

}  // namespace

void write_loss_csv(const fs::path& path, std::span<const LossBreakdown> log) {
  auto out = open_out(path);
  out << kLossHeader << '\n';
  for (std::size_t step = 0; step < log.size(); ++step) {
    const LossBreakdown& l = log[step];
    out << step << ',' << format_double(l.depth_camera) << ',' << format_double(l.depth_bev) << ','
        << format_double(l.semantic_camera) << ',' << format_double(l.semantic_bev) << ','
        << format_double(l.total) << '\n';
  }
  if (!out) throw InputError("failed writing " + describe(path));
}

std::vector<LossBreakdown> read_loss_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != kLossHeader) throw InputError(describe(path) + ": missing loss CSV header");
  std::vector<LossBreakdown> log;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 6) throw InputError(describe(path) + " line " + std::to_string(line_no) + ": expected 6 fields");
    if (parse_double(fields[0], path, line_no) != double(log.size())) {
      throw InputError(describe(path) + " line " + std::to_string(line_no) + ": steps must be consecutive from 0");
    }
    LossBreakdown l;
    l.depth_camera = parse_double(fields[1], path, line_no);
    l.depth_bev = parse_double(fields[2], path, line_no);
    l.semantic_camera = parse_double(fields[3], path, line_no);
    l.semantic_bev = parse_double(fields[4], path, line_no);
    l.total = parse_double(fields[5], path, line_no);
    log.push_back(l);
  }
  return log;
}

}  // namespace voxreg::io
