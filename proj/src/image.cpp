#include "ffl/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ffl {

GrayImage minmaxNormalize(const Eigen::MatrixXd& img) {
  if (img.size() == 0) throw std::invalid_argument("empty image");
  if (!img.allFinite()) throw std::invalid_argument("non-finite pixel values");
  const double lo = img.minCoeff();
  const double hi = img.maxCoeff();
  GrayImage out(int(img.rows()), int(img.cols()));
  if (hi == lo) return out;  // constant image -> all zeros
  const double span = hi - lo;
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      double v = std::floor(255.0 * (img(r, c) - lo) / span);
      out.at(r, c) = std::uint8_t(std::clamp(v, 0.0, 255.0));
    }
  }
  return out;
}

GrayImage histEqualize(const GrayImage& img) {
  if (img.pixels.empty()) throw std::invalid_argument("empty image");
  std::array<std::size_t, 256> hist{};
  for (std::uint8_t p : img.pixels) ++hist[p];

  std::array<std::size_t, 256> cdf{};
  std::size_t running = 0;
  for (int v = 0; v < 256; ++v) { running += hist[v]; cdf[v] = running; }

  const std::size_t n = img.pixels.size();
  std::size_t cdf_min = 0;
  for (int v = 0; v < 256; ++v)
    if (cdf[v] > 0) { cdf_min = cdf[v]; break; }
  if (cdf_min == n) return img;  // single pixel value

  std::array<std::uint8_t, 256> lut{};
  for (int v = 0; v < 256; ++v) {
    double mapped = std::round(255.0 * double(cdf[v] - std::min(cdf[v], cdf_min)) /
                               double(n - cdf_min));
    lut[v] = std::uint8_t(std::clamp(mapped, 0.0, 255.0));
  }
  GrayImage out(img.height, img.width);
  for (std::size_t i = 0; i < n; ++i) out.pixels[i] = lut[img.pixels[i]];
  return out;
}

namespace {

double sampleBilinear(const GrayImage& img, double r, double c) {
  if (r < 0 || c < 0 || r > img.height - 1 || c > img.width - 1) return 0.0;
  const int r0 = int(std::floor(r));
  const int c0 = int(std::floor(c));
  const int r1 = std::min(r0 + 1, img.height - 1);
  const int c1 = std::min(c0 + 1, img.width - 1);
  const double fr = r - r0;
  const double fc = c - c0;
  const double top = img.at(r0, c0) * (1 - fc) + img.at(r0, c1) * fc;
  const double bot = img.at(r1, c0) * (1 - fc) + img.at(r1, c1) * fc;
  return top * (1 - fr) + bot * fr;
}

}  // namespace

GrayImage resize(const GrayImage& img, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize dims must be positive");
  if (img.pixels.empty()) throw std::invalid_argument("empty image");
  GrayImage out(out_h, out_w);
  const double sr = out_h > 1 ? double(img.height - 1) / (out_h - 1) : 0.0;
  const double sc = out_w > 1 ? double(img.width - 1) / (out_w - 1) : 0.0;
  // single-row/col outputs sample the center of that axis
  const double or0 = out_h > 1 ? 0.0 : (img.height - 1) / 2.0;
  const double oc0 = out_w > 1 ? 0.0 : (img.width - 1) / 2.0;
  for (int r = 0; r < out_h; ++r)
    for (int c = 0; c < out_w; ++c) {
      double v = std::round(sampleBilinear(img, or0 + r * sr, oc0 + c * sc));
      out.at(r, c) = std::uint8_t(std::clamp(v, 0.0, 255.0));
    }
  return out;
}

GrayImage flipHorizontal(const GrayImage& img) {
  GrayImage out(img.height, img.width);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      out.at(r, c) = img.at(r, img.width - 1 - c);
  return out;
}

GrayImage augmentFlip(const GrayImage& img, std::mt19937_64& rng) {
  std::bernoulli_distribution flip(0.5);
  return flip(rng) ? flipHorizontal(img) : img;
}

GrayImage rotateDegrees(const GrayImage& img, double degrees) {
  const double theta = degrees * M_PI / 180.0;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double cr = (img.height - 1) / 2.0;
  const double cc = (img.width - 1) / 2.0;
  GrayImage out(img.height, img.width);
  // inverse mapping: sample source at the back-rotated coordinate
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const double dr = r - cr, dc = c - cc;
      const double sr = cr + ct * dr - st * dc;
      const double sc = cc + st * dr + ct * dc;
      double v = std::round(sampleBilinear(img, sr, sc));
      out.at(r, c) = std::uint8_t(std::clamp(v, 0.0, 255.0));
    }
  }
  return out;
}

GrayImage augmentRotate(const GrayImage& img, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, 10.0);
  return rotateDegrees(img, angle(rng));
}

GrayImage readPgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open PGM file: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw std::runtime_error("not a binary PGM (P5) file: " + path);
  auto nextInt = [&in, &path]() {
    // skip whitespace and '#' comment lines
    for (;;) {
      int ch = in.peek();
      if (ch == '#') { std::string line; std::getline(in, line); }
      else if (std::isspace(ch)) in.get();
      else break;
    }
    long v = -1;
    in >> v;
    if (!in || v < 0) throw std::runtime_error("malformed PGM header: " + path);
    return v;
  };
  const long w = nextInt();
  const long h = nextInt();
  const long maxval = nextInt();
  if (w <= 0 || h <= 0 || maxval != 255)
    throw std::runtime_error("unsupported PGM (need 8-bit): " + path);
  in.get();  // single whitespace after maxval
  GrayImage img{int(h), int(w)};
  in.read(reinterpret_cast<char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
  if (in.gcount() != std::streamsize(img.pixels.size()))
    throw std::runtime_error("truncated PGM payload: " + path);
  return img;
}

void writePgm(const GrayImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write PGM file: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            std::streamsize(img.pixels.size()));
}

}  // namespace ffl
