#include "mestereo/quality.hpp"

#include <cmath>
#include <string>

#include "mestereo/error.hpp"
#include "mestereo/kernels.hpp"

namespace mestereo {
namespace {

void require_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidParameter("well-exposedness sigma must be > 0, got " + std::to_string(sigma));
  }
}

void require_unit_range(const ImageF& gray) {
  if (gray.channels() != 1) {
    throw InvalidInput("well-exposedness expects a grayscale image, got " +
                       std::to_string(gray.channels()) + " channels");
  }
  for (float v : gray.data()) {
    if (v < 0.0f || v > 1.0f) {
      throw InvalidInput("well-exposedness expects intensities in [0,1], found " + std::to_string(v));
    }
  }
}

}  // namespace

void QualityConfig::validate() const {
  if (!(contrast_exponent >= 0.0) || !std::isfinite(contrast_exponent)) {
    throw InvalidParameter("contrast exponent must be >= 0, got " + std::to_string(contrast_exponent));
  }
  if (!(exposedness_exponent >= 0.0) || !std::isfinite(exposedness_exponent)) {
    throw InvalidParameter("exposedness exponent must be >= 0, got " +
                           std::to_string(exposedness_exponent));
  }
  require_sigma(sigma);
  if (median_window < 1 || median_window % 2 == 0) {
    throw InvalidParameter("median window must be odd and >= 1, got " + std::to_string(median_window));
  }
}

double well_exposedness(double intensity, double sigma) {
  require_sigma(sigma);
  const double d = intensity - 0.5;
  return std::exp(-(d * d) / (2.0 * sigma * sigma));
}

ImageF well_exposedness(const ImageF& gray, double sigma) {
  require_sigma(sigma);
  require_unit_range(gray);
  return kernels::well_exposedness(gray, sigma);
}

ImageF contrast_measure(const ImageF& disp, int median_window) {
  if (median_window < 1 || median_window % 2 == 0) {
    throw InvalidParameter("median window must be odd and >= 1, got " + std::to_string(median_window));
  }
  return kernels::median_filter(kernels::laplacian_abs(disp), median_window);
}

ImageF refine_weights(const ImageF& contrast, const ImageF& exposedness, double contrast_exponent,
                      double exposedness_exponent) {
  if (!(contrast_exponent >= 0.0) || !(exposedness_exponent >= 0.0)) {
    throw InvalidParameter("weighting exponents must be >= 0");
  }
  return kernels::refine_weights(contrast, exposedness, contrast_exponent, exposedness_exponent);
}

std::vector<ImageF> normalize_weights(std::span<const ImageF> weights) {
  if (weights.empty()) throw InvalidInput("normalize_weights needs at least one weight map");
  std::vector<ImageF> out(weights.begin(), weights.end());
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!out[k].same_extent(out.front()) || out[k].channels() != 1) {
      throw InvalidInput("weight map " + std::to_string(k) + " does not match weight map 0");
    }
    for (float v : out[k].data()) {
      if (v < 0.0f) throw InvalidInput("weight map " + std::to_string(k) + " has a negative weight");
    }
  }
  kernels::normalize_weights(out);
  return out;
}

WeightStack compute_weights(std::span<const ImageF> gray_images, std::span<const ImageF> disparities,
                            const QualityConfig& cfg, std::span<const std::vector<std::uint8_t>> invalid) {
  cfg.validate();
  if (gray_images.empty() || gray_images.size() != disparities.size()) {
    throw InvalidInput("compute_weights needs equal, nonzero counts of images and disparities");
  }
  if (!invalid.empty() && invalid.size() != disparities.size()) {
    throw InvalidInput("compute_weights: one invalid mask per map required");
  }
  WeightStack ws;
  const std::size_t n = gray_images.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (!gray_images[k].same_extent(disparities[k]) || !gray_images[k].same_extent(gray_images[0])) {
      throw InvalidInput("map " + std::to_string(k) + ": image/disparity extents differ");
    }
    ws.exposedness.push_back(well_exposedness(gray_images[k], cfg.sigma));
    ws.contrast.push_back(contrast_measure(disparities[k], cfg.median_window));
    ImageF w = refine_weights(ws.contrast.back(), ws.exposedness.back(), cfg.contrast_exponent,
                              cfg.exposedness_exponent);
    if (!invalid.empty()) {
      const auto& mask = invalid[k];
      if (mask.size() != w.size()) throw InvalidInput("invalid mask " + std::to_string(k) + " has the wrong size");
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) w.data()[i] = 0.0f;
      }
    }
    ws.refined.push_back(std::move(w));
  }
  ws.normalized = normalize_weights(ws.refined);
  return ws;
}

}  // namespace mestereo
