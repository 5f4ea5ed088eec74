#include "flatnet/preprocess.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

#include "flatnet/errors.h"

namespace flatnet {

GrayImage::GrayImage(std::size_t width, std::size_t height, std::uint8_t fill)
    : pixels(width * height, fill), width(width), height(height) {}

GrayImage::GrayImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels)
    : pixels(std::move(pixels)), width(width), height(height) {
  if (this->pixels.size() != width * height) {
    throw std::invalid_argument("GrayImage: " + std::to_string(this->pixels.size()) +
                                " pixels do not fill " + std::to_string(width) + "x" +
                                std::to_string(height));
  }
}

GrayImage to_gray(std::span<const std::uint8_t> rgb, std::size_t width, std::size_t height) {
  if (rgb.size() != 3 * width * height) {
    throw std::invalid_argument("to_gray: expected " + std::to_string(3 * width * height) +
                                " bytes, got " + std::to_string(rgb.size()));
  }
  GrayImage out(width, height);
  for (std::size_t i = 0; i < width * height; ++i) {
    const double luma = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(luma), 0L, 255L));
  }
  return out;
}

GrayImage resize_bilinear(const GrayImage& img, std::size_t out_w, std::size_t out_h) {
  if (out_w == 0 || out_h == 0) throw std::invalid_argument("resize_bilinear: empty target size");
  if (img.width == 0 || img.height == 0) throw std::invalid_argument("resize_bilinear: empty image");
  if (out_w == img.width && out_h == img.height) return img;

  const double sx = static_cast<double>(img.width) / out_w;
  const double sy = static_cast<double>(img.height) / out_h;
  const auto source = [](std::size_t d, double scale, std::size_t extent) {
    const double s = (d + 0.5) * scale - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(extent - 1));
  };

  GrayImage out(out_w, out_h);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = source(y, sy, img.height);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = source(x, sx, img.width);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      const double top = img.at(y0, x0) * (1.0 - wx) + img.at(y0, x1) * wx;
      const double bottom = img.at(y1, x0) * (1.0 - wx) + img.at(y1, x1) * wx;
      const double v = top * (1.0 - wy) + bottom * wy;
      out.at(y, x) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

GrayImage center_crop_square(const GrayImage& img) {
  const std::size_t side = std::min(img.width, img.height);
  if (side == img.width && side == img.height) return img;
  const std::size_t top = (img.height - side) / 2;
  const std::size_t left = (img.width - side) / 2;
  GrayImage out(side, side);
  for (std::size_t r = 0; r < side; ++r) {
    std::copy_n(img.pixels.begin() + static_cast<std::ptrdiff_t>((top + r) * img.width + left),
                side, out.pixels.begin() + static_cast<std::ptrdiff_t>(r * side));
  }
  return out;
}

FlatChannel pad_to_32(const GrayImage& img, float pad_value) {
  if (img.width != kDigitSide || img.height != kDigitSide) {
    throw std::invalid_argument("pad_to_32: expected a 28x28 image, got " +
                                std::to_string(img.width) + "x" + std::to_string(img.height));
  }
  constexpr std::size_t offset = (kInputSide - kDigitSide) / 2;
  FlatChannel out(kInputSide, kInputSide, pad_value);
  for (std::size_t i = 0; i < kDigitSide; ++i) {
    for (std::size_t j = 0; j < kDigitSide; ++j) {
      out.at(i + offset, j + offset) = img.at(i, j);
    }
  }
  return out;
}

std::vector<float> image_to_input(const GrayImage& img, const PreprocessConfig& scaling) {
  if (!(scaling.scale_min < scaling.scale_max)) {
    throw std::invalid_argument("image_to_input: scale_min must be below scale_max");
  }
  GrayImage digit = img;
  if (digit.width != kDigitSide || digit.height != kDigitSide) {
    digit = resize_bilinear(center_crop_square(digit), kDigitSide, kDigitSide);
  }
  const FlatChannel padded = pad_to_32(digit, 0.0f);
  return normalize_scale(padded.data, scaling.scale_min, scaling.scale_max);
}

std::vector<float> image_to_input(const GrayImage& img, const ModelMetadata& meta) {
  return image_to_input(img, meta.preprocess);
}

GrayImage perturb_overlap(const GrayImage& top, const GrayImage& bottom, std::size_t split_row) {
  if (top.width != bottom.width || top.height != bottom.height) {
    throw std::invalid_argument("perturb_overlap: image dimensions differ");
  }
  if (split_row == 0 || split_row >= top.height) {
    throw std::invalid_argument("perturb_overlap: split_row " + std::to_string(split_row) +
                                " must lie in (0, " + std::to_string(top.height) + ")");
  }
  GrayImage out = bottom;
  std::copy_n(top.pixels.begin(), split_row * top.width, out.pixels.begin());
  return out;
}

GrayImage perturb_hline(const GrayImage& img, std::size_t row, std::uint8_t intensity) {
  if (row >= img.height) {
    throw std::invalid_argument("perturb_hline: row " + std::to_string(row) +
                                " outside image of height " + std::to_string(img.height));
  }
  GrayImage out = img;
  std::fill_n(out.pixels.begin() + static_cast<std::ptrdiff_t>(row * img.width), img.width,
              intensity);
  return out;
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::size_t pos = 0;
  const auto fail = [&](const std::string& what) {
    return FormatError(path.string() + ": PGM " + what);
  };
  const auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  const auto read_uint = [&](const char* field) {
    skip_space();
    std::size_t v = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (++digits > 9) throw fail(std::string(field) + " too large");
    }
    if (digits == 0) throw fail(std::string("missing ") + field);
    return v;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw fail("magic is not P5");
  pos = 2;
  const std::size_t width = read_uint("width");
  const std::size_t height = read_uint("height");
  const std::size_t maxval = read_uint("maxval");
  if (maxval != 255) throw fail("maxval must be 255, got " + std::to_string(maxval));
  if (width == 0 || height == 0) throw fail("has an empty dimension");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw fail("header not terminated");
  ++pos;
  if (bytes.size() - pos < width * height) throw fail("pixel data truncated");
  return GrayImage(width, height,
                   std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                             bytes.begin() + static_cast<std::ptrdiff_t>(pos + width * height)));
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

GrayImage read_raw_rgb(const std::filesystem::path& path, std::size_t width, std::size_t height) {
  const auto bytes = read_file(path);
  if (bytes.size() != 3 * width * height) {
    throw FormatError(path.string() + ": raw RGB holds " + std::to_string(bytes.size()) +
                      " bytes, " + std::to_string(width) + "x" + std::to_string(height) +
                      " needs " + std::to_string(3 * width * height));
  }
  return to_gray(bytes, width, height);
}

}  // namespace flatnet
