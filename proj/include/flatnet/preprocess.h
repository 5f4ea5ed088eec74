#pragma once

// Camera/dataset image -> 1024-value network input, plus the perturbation
// generators used for robustness fixtures.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "flatnet/kernels.h"
#include "flatnet/weights_io.h"

namespace flatnet {

/// 8-bit grayscale, row-major.
struct GrayImage {
  std::vector<std::uint8_t> pixels;
  std::size_t width = 0;
  std::size_t height = 0;

  GrayImage() = default;
  GrayImage(std::size_t width, std::size_t height, std::uint8_t fill = 0);
  /// Throws std::invalid_argument unless pixels.size() == width * height.
  GrayImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels);

  std::uint8_t& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
  std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }

  bool operator==(const GrayImage&) const = default;
};

inline constexpr std::size_t kDigitSide = 28;
inline constexpr std::size_t kInputSide = 32;

/// BT.601 luma, rounded: round(0.299 R + 0.587 G + 0.114 B).
GrayImage to_gray(std::span<const std::uint8_t> rgb, std::size_t width, std::size_t height);

/// Bilinear resampling with pixel-center alignment: the source coordinate of
/// destination pixel d is (d + 0.5) * in / out - 0.5, clamped to the image.
GrayImage resize_bilinear(const GrayImage& img, std::size_t out_w, std::size_t out_h);

/// Largest centered square.
GrayImage center_crop_square(const GrayImage& img);

/// Places a 28x28 image at offset (2, 2) of a 32x32 channel filled with
/// pad_value.
FlatChannel pad_to_32(const GrayImage& img, float pad_value = 0.0f);

/// center crop -> 28x28 -> zero-pad to 32x32 -> min-max scale. Padding uses
/// the raw background value 0 before scaling, so the border lands on
/// whatever 0 maps to (scale_min whenever the image contains a 0 pixel).
std::vector<float> image_to_input(const GrayImage& img, const PreprocessConfig& scaling);
std::vector<float> image_to_input(const GrayImage& img, const ModelMetadata& meta);

/// Rows [0, split_row) from `top`, the rest from `bottom`.
GrayImage perturb_overlap(const GrayImage& top, const GrayImage& bottom, std::size_t split_row);

/// Sets every pixel of `row` to `intensity`.
GrayImage perturb_hline(const GrayImage& img, std::size_t row, std::uint8_t intensity);

// Binary PGM (P5, maxval 255) and raw interleaved RGB files.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& img, const std::filesystem::path& path);
GrayImage read_raw_rgb(const std::filesystem::path& path, std::size_t width, std::size_t height);

}  // namespace flatnet
