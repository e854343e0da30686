#include "tvflow/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <regex>
#include <sstream>

#include "tvflow/data_gen.hpp"

namespace tvflow {

namespace {

static_assert(std::endian::native == std::endian::little, ".flo I/O assumes a little-endian host");

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw FormatError("cannot open " + path.string());
  return f;
}

GrayImage read_png(const fs::path& path) {
  FilePtr fp = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("libpng initialisation failed");
  }
  GrayImage img;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> raw;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("corrupt PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || (depth != 8 && depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("only 8/16-bit grayscale PNG is supported: " + path.string());
  }
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.bit_depth = depth;
  img.max_value = depth == 16 ? 65535u : 255u;
  const std::size_t bpp = depth / 8;
  const std::size_t stride = static_cast<std::size_t>(img.width) * bpp;
  raw.resize(stride * static_cast<std::size_t>(img.height));
  rows.resize(static_cast<std::size_t>(img.height));
  for (Index r = 0; r < img.height; ++r) rows[static_cast<std::size_t>(r)] = raw.data() + r * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  img.samples.resize(static_cast<std::size_t>(img.width * img.height));
  for (std::size_t k = 0; k < img.samples.size(); ++k) {
    img.samples[k] = bpp == 2 ? static_cast<std::uint16_t>((raw[2 * k] << 8) | raw[2 * k + 1]) : raw[k];
  }
  return img;
}

void write_png(const fs::path& path, Index width, Index height, int depth, int color_type,
               const std::vector<std::uint8_t>& raw) {
  FilePtr fp = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("libpng initialisation failed");
  }
  const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  const std::size_t stride = static_cast<std::size_t>(width) * channels * (depth / 8);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (Index r = 0; r < height; ++r) {
    rows[static_cast<std::size_t>(r)] = const_cast<png_bytep>(raw.data()) + r * stride;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("failed writing PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Skips whitespace and '#' comments in a PNM header.
int next_header_int(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  in >> v;
  if (!in) throw FormatError("bad PGM header");
  return v;
}

GrayImage read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[2];
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '5') throw FormatError("not a binary PGM: " + path.string());
  GrayImage img;
  img.width = next_header_int(in);
  img.height = next_header_int(in);
  const int maxval = next_header_int(in);
  if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 65535) {
    throw FormatError("bad PGM header: " + path.string());
  }
  in.get();  // single whitespace before the raster
  img.max_value = static_cast<std::uint32_t>(maxval);
  img.bit_depth = maxval > 255 ? 16 : 8;
  const std::size_t n = static_cast<std::size_t>(img.width * img.height);
  const std::size_t bpp = img.bit_depth / 8;
  std::vector<unsigned char> raw(n * bpp);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw FormatError("truncated PGM: " + path.string());
  img.samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    img.samples[k] = bpp == 2 ? static_cast<std::uint16_t>((raw[2 * k] << 8) | raw[2 * k + 1]) : raw[k];
  }
  return img;
}

void write_pgm(const fs::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string());
  out << "P5\n" << img.width << " " << img.height << "\n" << img.max_value << "\n";
  for (std::uint16_t s : img.samples) {
    if (img.max_value > 255) out.put(static_cast<char>(s >> 8));
    out.put(static_cast<char>(s & 0xff));
  }
}

// Numbered files: the last run of digits in the stem.
std::map<long, fs::path> numbered_files(const fs::path& dir, const std::vector<std::string>& exts) {
  if (!fs::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
  static const std::regex digits(R"((\d+)$)");
  std::map<long, fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = lower_ext(entry.path());
    if (std::find(exts.begin(), exts.end(), ext) == exts.end()) continue;
    const std::string stem = entry.path().stem().string();
    std::smatch m;
    if (!std::regex_search(stem, m, digits)) continue;
    const long idx = std::stol(m[1].str());
    if (!files.emplace(idx, entry.path()).second) {
      throw FormatError("duplicate frame number " + std::to_string(idx) + " in " + dir.string());
    }
  }
  if (files.empty()) throw FormatError("no numbered frames in " + dir.string());
  long expected = files.begin()->first;
  for (const auto& [idx, p] : files) {
    if (idx != expected) {
      throw FormatError("frame gap in " + dir.string() + ": missing index " + std::to_string(expected));
    }
    ++expected;
  }
  return files;
}

std::string numbered_name(const std::string& prefix, Index t, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03ld", static_cast<long>(t));
  return prefix + buf + ext;
}

}  // namespace

GrayImage read_gray(const fs::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm") return read_pgm(path);
  throw FormatError("unsupported image extension: " + path.string());
}

void write_gray(const fs::path& path, const GrayImage& img) {
  const std::string ext = lower_ext(path);
  if (ext == ".pgm") return write_pgm(path, img);
  if (ext != ".png") throw FormatError("unsupported image extension: " + path.string());
  if (img.bit_depth != 8 && img.bit_depth != 16) throw FormatError("PNG bit depth must be 8 or 16");
  std::vector<std::uint8_t> raw;
  raw.reserve(img.samples.size() * (img.bit_depth / 8));
  for (std::uint16_t s : img.samples) {
    if (img.bit_depth == 16) raw.push_back(static_cast<std::uint8_t>(s >> 8));
    raw.push_back(static_cast<std::uint8_t>(s & 0xff));
  }
  write_png(path, img.width, img.height, img.bit_depth, PNG_COLOR_TYPE_GRAY, raw);
}

void write_rgb_png(const fs::path& path, const RgbImage& img) {
  write_png(path, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, img.samples);
}

GrayImage quantize(const Frame& frame, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ContractViolation("bit depth must be 8 or 16");
  GrayImage img;
  img.width = frame.cols();
  img.height = frame.rows();
  img.bit_depth = bit_depth;
  img.max_value = bit_depth == 16 ? 65535u : 255u;
  img.samples.resize(static_cast<std::size_t>(frame.size()));
  const double m = img.max_value;
  for (Index j = 0; j < frame.rows(); ++j) {
    for (Index i = 0; i < frame.cols(); ++i) {
      const double v = std::isfinite(frame(j, i)) ? std::clamp(frame(j, i), 0.0, 1.0) : 0.0;
      img.samples[static_cast<std::size_t>(j * frame.cols() + i)] =
          static_cast<std::uint16_t>(std::lround(v * m));
    }
  }
  return img;
}

Frame dequantize(const GrayImage& img) {
  Frame f(img.height, img.width);
  const double m = img.max_value;
  for (Index j = 0; j < img.height; ++j) {
    for (Index i = 0; i < img.width; ++i) {
      f(j, i) = img.samples[static_cast<std::size_t>(j * img.width + i)] / m;
    }
  }
  return f;
}

ImageSequence load_sequence(const fs::path& dir) {
  const auto files = numbered_files(dir, {".png", ".pgm"});
  std::vector<Frame> frames;
  for (const auto& [idx, path] : files) {
    frames.push_back(dequantize(read_gray(path)));
    if (frames.back().rows() != frames.front().rows() || frames.back().cols() != frames.front().cols()) {
      throw FormatError("frame size mismatch at " + path.string());
    }
  }
  if (frames.size() < 2) throw FormatError("a sequence needs at least two frames: " + dir.string());
  const Grid g = Grid::from_shape(frames.front().cols(), frames.front().rows(),
                                  static_cast<Index>(frames.size()));
  ImageSequence u(g);
  for (Index t = 0; t < g.frames(); ++t) u.frame(t) = frames[static_cast<std::size_t>(t)];
  return u;
}

void save_sequence(const fs::path& dir, const ImageSequence& u, int bit_depth, const std::string& prefix) {
  fs::create_directories(dir);
  for (Index t = 0; t < u.grid.frames(); ++t) {
    write_gray(dir / numbered_name(prefix, t, ".png"), quantize(Frame(u.frame(t)), bit_depth));
  }
}

FlowFrame load_flo(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[4];
  std::int32_t w = 0, h = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in) throw FormatError("truncated .flo header: " + path.string());
  if (std::memcmp(magic, "PIEH", 4) != 0) throw FormatError("bad .flo magic: " + path.string());
  if (w <= 0 || h <= 0 || w > (1 << 15) || h > (1 << 15)) throw FormatError("bad .flo size: " + path.string());
  std::vector<float> data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 2);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != data.size() * sizeof(float)) {
    throw FormatError("truncated .flo payload: " + path.string());
  }
  FlowFrame f{Frame(h, w), Frame(h, w)};
  for (Index j = 0; j < h; ++j) {
    for (Index i = 0; i < w; ++i) {
      const std::size_t k = 2 * static_cast<std::size_t>(j * w + i);
      f.v1(j, i) = data[k];
      f.v2(j, i) = data[k + 1];
    }
  }
  return f;
}

void save_flo(const fs::path& path, const FlowFrame& flow) {
  const Index h = flow.v1.rows();
  const Index w = flow.v1.cols();
  if (flow.v2.rows() != h || flow.v2.cols() != w) throw ContractViolation("save_flo: channel shapes differ");
  std::vector<float> data(static_cast<std::size_t>(w * h) * 2);
  for (Index j = 0; j < h; ++j) {
    for (Index i = 0; i < w; ++i) {
      if (is_invalid_flow(flow.v1(j, i), flow.v2(j, i))) {
        throw ContractViolation("save_flo: invalid flow value at (" + std::to_string(i) + ", " +
                                std::to_string(j) + ")");
      }
      const std::size_t k = 2 * static_cast<std::size_t>(j * w + i);
      data[k] = static_cast<float>(flow.v1(j, i));
      data[k + 1] = static_cast<float>(flow.v2(j, i));
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string());
  const std::int32_t wi = static_cast<std::int32_t>(w);
  const std::int32_t hi = static_cast<std::int32_t>(h);
  out.write("PIEH", 4);
  out.write(reinterpret_cast<const char*>(&wi), 4);
  out.write(reinterpret_cast<const char*>(&hi), 4);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) throw FormatError("failed writing " + path.string());
}

FlowFrame flow_frame(const FlowField& v, Index t) {
  const Grid& g = v.grid;
  return {ConstFrameMap<double>(v.v1.data() + t * g.frame_size(), g.height(), g.width()),
          ConstFrameMap<double>(v.v2.data() + t * g.frame_size(), g.height(), g.width())};
}

void save_flow_sequence(const fs::path& dir, const FlowField& v, const std::string& prefix) {
  fs::create_directories(dir);
  for (Index t = 0; t < v.grid.nt; ++t) save_flo(dir / numbered_name(prefix, t, ".flo"), flow_frame(v, t));
}

FlowField load_flow_sequence(const fs::path& dir) {
  const auto files = numbered_files(dir, {".flo"});
  std::vector<FlowFrame> frames;
  for (const auto& [idx, path] : files) {
    frames.push_back(load_flo(path));
    if (frames.back().v1.rows() != frames.front().v1.rows() ||
        frames.back().v1.cols() != frames.front().v1.cols()) {
      throw FormatError("flow size mismatch at " + path.string());
    }
  }
  const Grid g = Grid::from_shape(frames.front().v1.cols(), frames.front().v1.rows(),
                                  static_cast<Index>(frames.size()) + 1);
  FlowField v(g);
  for (Index t = 0; t < g.nt; ++t) {
    FrameMap<double>(v.v1.data() + t * g.frame_size(), g.height(), g.width()) = frames[static_cast<std::size_t>(t)].v1;
    FrameMap<double>(v.v2.data() + t * g.frame_size(), g.height(), g.width()) = frames[static_cast<std::size_t>(t)].v2;
  }
  return v;
}

const std::vector<std::array<double, 3>>& color_wheel() {
  static const std::vector<std::array<double, 3>> wheel = [] {
    constexpr int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
    std::vector<std::array<double, 3>> w;
    for (int i = 0; i < RY; ++i) w.push_back({255.0, static_cast<double>(255 * i / RY), 0.0});
    for (int i = 0; i < YG; ++i) w.push_back({static_cast<double>(255 - 255 * i / YG), 255.0, 0.0});
    for (int i = 0; i < GC; ++i) w.push_back({0.0, 255.0, static_cast<double>(255 * i / GC)});
    for (int i = 0; i < CB; ++i) w.push_back({0.0, static_cast<double>(255 - 255 * i / CB), 255.0});
    for (int i = 0; i < BM; ++i) w.push_back({static_cast<double>(255 * i / BM), 0.0, 255.0});
    for (int i = 0; i < MR; ++i) w.push_back({255.0, 0.0, static_cast<double>(255 - 255 * i / MR)});
    return w;
  }();
  return wheel;
}

double color_wheel_position(double fx, double fy) {
  const double ncols = static_cast<double>(color_wheel().size());
  const double a = std::atan2(-fy, -fx) / std::numbers::pi;
  return (a + 1.0) / 2.0 * (ncols - 1.0);
}

std::array<std::uint8_t, 3> flow_color(double fx, double fy) {
  const auto& wheel = color_wheel();
  const int ncols = static_cast<int>(wheel.size());
  const double rad = std::min(1.0, std::hypot(fx, fy));
  const double fk = color_wheel_position(fx, fy);
  const int k0 = static_cast<int>(fk);
  const int k1 = (k0 + 1) % ncols;
  const double f = fk - k0;
  std::array<std::uint8_t, 3> out{};
  for (int b = 0; b < 3; ++b) {
    const double col0 = wheel[static_cast<std::size_t>(k0)][static_cast<std::size_t>(b)] / 255.0;
    const double col1 = wheel[static_cast<std::size_t>(k1)][static_cast<std::size_t>(b)] / 255.0;
    const double col = 1.0 - rad * (1.0 - ((1.0 - f) * col0 + f * col1));
    out[static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(std::lround(255.0 * col));
  }
  return out;
}

RgbImage flow_to_color(const FlowFrame& flow, double max_mag) {
  const Index h = flow.v1.rows();
  const Index w = flow.v1.cols();
  if (max_mag <= 0.0) {
    for (Index k = 0; k < flow.v1.size(); ++k) {
      const double a = flow.v1.data()[k];
      const double b = flow.v2.data()[k];
      if (!is_invalid_flow(a, b)) max_mag = std::max(max_mag, std::hypot(a, b));
    }
    if (max_mag == 0.0) max_mag = 1.0;
  }
  RgbImage img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w * h * 3))};
  for (Index j = 0; j < h; ++j) {
    for (Index i = 0; i < w; ++i) {
      const double a = flow.v1(j, i);
      const double b = flow.v2(j, i);
      std::array<std::uint8_t, 3> c{0, 0, 0};
      if (!is_invalid_flow(a, b)) c = flow_color(a / max_mag, b / max_mag);
      std::copy(c.begin(), c.end(), img.samples.begin() + 3 * (j * w + i));
    }
  }
  return img;
}

}  // namespace tvflow
