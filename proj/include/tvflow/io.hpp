#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "tvflow/grid.hpp"

namespace tvflow {

namespace fs = std::filesystem;

/// Grayscale raster with integer samples, as stored on disk.
struct GrayImage {
  Index width = 0;
  Index height = 0;
  int bit_depth = 8;  // 8 or 16
  std::uint32_t max_value = 255;
  std::vector<std::uint16_t> samples;  // row-major
};

struct RgbImage {
  Index width = 0;
  Index height = 0;
  std::vector<std::uint8_t> samples;  // row-major, interleaved RGB
};

/// PNG (8/16-bit gray) or binary PGM (P5), chosen by extension.
GrayImage read_gray(const fs::path& path);
void write_gray(const fs::path& path, const GrayImage& img);
void write_rgb_png(const fs::path& path, const RgbImage& img);

/// Intensities in [0, 1]; values outside are clamped, then rounded to the
/// given bit depth.
GrayImage quantize(const Frame& frame, int bit_depth);
Frame dequantize(const GrayImage& img);

/// Loads the numbered .png/.pgm frames of a directory, ordered by the number
/// in their file names. Frame numbers must be consecutive.
ImageSequence load_sequence(const fs::path& dir);
/// Writes <prefix>NNN.png for every frame.
void save_sequence(const fs::path& dir, const ImageSequence& u, int bit_depth = 16,
                   const std::string& prefix = "frame_");

/// One flow frame as stored in a Middlebury .flo file.
struct FlowFrame {
  Frame v1;
  Frame v2;
};

/// Middlebury .flo: "PIEH", int32 width, int32 height (little endian), then
/// row-major interleaved float32 (v1, v2). Invalid-flow sentinels are kept.
FlowFrame load_flo(const fs::path& path);
/// Rejects non-finite or sentinel values.
void save_flo(const fs::path& path, const FlowFrame& flow);

FlowFrame flow_frame(const FlowField& v, Index t);
/// Writes flow_NNN.flo for every transition t < nt.
void save_flow_sequence(const fs::path& dir, const FlowField& v, const std::string& prefix = "flow_");
/// Reads numbered .flo files; the flow of the last frame is zero.
FlowField load_flow_sequence(const fs::path& dir);

// Middlebury color coding.

/// The 55-entry color wheel (red-yellow-green-cyan-blue-magenta).
const std::vector<std::array<double, 3>>& color_wheel();
/// Color of a flow vector already divided by the normalization magnitude.
std::array<std::uint8_t, 3> flow_color(double fx, double fy);
/// Wheel position in [0, ncols - 1] of a flow direction.
double color_wheel_position(double fx, double fy);
/// Color image of one flow frame; max_mag <= 0 selects the largest valid magnitude.
RgbImage flow_to_color(const FlowFrame& flow, double max_mag = 0.0);

}  // namespace tvflow
