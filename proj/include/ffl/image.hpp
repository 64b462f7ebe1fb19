#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ffl {

/// 8-bit grayscale image, row-major.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int h, int w) : height(h), width(w), pixels(std::size_t(h) * w, 0) {}

  std::uint8_t& at(int r, int c) { return pixels[std::size_t(r) * width + c]; }
  std::uint8_t at(int r, int c) const { return pixels[std::size_t(r) * width + c]; }

  bool operator==(const GrayImage&) const = default;
};

/// floor(255*(v-min)/(max-min)) clamped to [0,255]; constant input -> all zeros.
GrayImage minmaxNormalize(const Eigen::MatrixXd& img);

/// Classic CDF equalization: out(v) = round(255*(cdf(v)-cdf_min)/(N-cdf_min)).
/// Constant image is returned unchanged.
GrayImage histEqualize(const GrayImage& img);

/// Bilinear resize with corner-aligned sampling.
GrayImage resize(const GrayImage& img, int out_h, int out_w);

/// Mirrors columns with probability 0.5.
GrayImage augmentFlip(const GrayImage& img, std::mt19937_64& rng);
GrayImage flipHorizontal(const GrayImage& img);

/// Rotation by a uniform angle in [0,10] degrees about the center,
/// bilinear resampling, zero fill outside.
GrayImage augmentRotate(const GrayImage& img, std::mt19937_64& rng);
GrayImage rotateDegrees(const GrayImage& img, double degrees);

/// Binary 8-bit PGM (P5, maxval 255).
GrayImage readPgm(const std::string& path);
void writePgm(const GrayImage& img, const std::string& path);

}  // namespace ffl
