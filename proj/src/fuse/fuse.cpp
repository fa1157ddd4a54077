#include "mestereo/fuse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mestereo/error.hpp"
#include "mestereo/kernels.hpp"
#include "mestereo/pyramid.hpp"

namespace mestereo {
namespace {

std::string extent(int h, int w) { return std::to_string(h) + "x" + std::to_string(w); }

ImageF grayscale_of(const ImageF& img) { return img.channels() == 3 ? to_grayscale(img) : img; }

}  // namespace

void ExposureStack::validate() const {
  if (disparities.empty()) throw InvalidInput("exposure stack is empty");
  if (left_images.size() != disparities.size()) {
    throw InvalidInput("expected equal counts of left images (" + std::to_string(left_images.size()) +
                       ") and disparity maps (" + std::to_string(disparities.size()) + ")");
  }
  if (!exposure_labels.empty() && exposure_labels.size() != disparities.size()) {
    throw InvalidInput("exposure labels must be empty or one per map");
  }
  const int h = disparities[0].height(), w = disparities[0].width();
  for (std::size_t k = 0; k < disparities.size(); ++k) {
    const std::string name = exposure_labels.empty() ? std::to_string(k) : exposure_labels[k];
    if (disparities[k].height() != h || disparities[k].width() != w) {
      throw InvalidInput("disparity map " + name + " is " +
                         extent(disparities[k].height(), disparities[k].width()) + ", expected " +
                         extent(h, w));
    }
    if (left_images[k].height() != h || left_images[k].width() != w) {
      throw InvalidInput("left image " + name + " is " +
                         extent(left_images[k].height(), left_images[k].width()) + ", expected " +
                         extent(h, w));
    }
    for (float v : left_images[k].data()) {
      if (v < 0.0f || v > 1.0f) {
        throw InvalidInput("left image " + name + " has intensities outside [0,1]");
      }
    }
  }
}

FuseResult fuse(const ExposureStack& stack, const FuseOptions& options) {
  stack.validate();
  options.quality.validate();
  const std::size_t n = stack.size();
  const int h = stack.disparities[0].height(), w = stack.disparities[0].width();
  const std::size_t pixels = stack.disparities[0].pixel_count();

  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
  for (const DisparityMap& d : stack.disparities) {
    for (std::size_t i = 0; i < pixels; ++i) {
      if (!d.valid_mask()[i]) continue;
      lo = std::min(lo, d.raw()[i]);
      hi = std::max(hi, d.raw()[i]);
    }
  }
  if (!(lo <= hi)) throw InvalidInput("exposure stack has no valid disparity pixel");
  if (!(hi > lo)) {
    throw InvalidInput("degenerate disparity range: every valid disparity equals " + std::to_string(lo));
  }
  const double range = static_cast<double>(hi) - static_cast<double>(lo);

  // Joint normalization. Invalid entries are filled with the mean of the other
  // maps' valid values at that pixel so the pyramids stay finite.
  std::vector<ImageF> normalized(n, ImageF(h, w, 1));
  std::vector<std::vector<std::uint8_t>> invalid(n, std::vector<std::uint8_t>(pixels, 0));
  std::vector<std::uint8_t> out_valid(pixels, 1);
  {
    std::vector<double> terms;
    terms.reserve(n);
    for (std::size_t i = 0; i < pixels; ++i) {
      terms.clear();
      for (std::size_t k = 0; k < n; ++k) {
        const DisparityMap& d = stack.disparities[k];
        if (d.valid_mask()[i]) {
          const double v = (static_cast<double>(d.raw()[i]) - lo) / range;
          normalized[k].data()[i] = static_cast<float>(v);
          terms.push_back(v);
        } else {
          invalid[k][i] = 1;
          out_valid[i] = 0;
        }
      }
      if (terms.size() == n) continue;
      const float fill =
          terms.empty() ? 0.0f : static_cast<float>(kernels::order_free_sum(terms) / static_cast<double>(terms.size()));
      for (std::size_t k = 0; k < n; ++k) {
        if (invalid[k][i]) normalized[k].data()[i] = fill;
      }
    }
  }

  std::vector<ImageF> gray;
  gray.reserve(n);
  for (const ImageF& img : stack.left_images) gray.push_back(grayscale_of(img));

  FuseResult result;
  result.weights = compute_weights(gray, normalized, options.quality, invalid);
  result.range_lo = lo;
  result.range_hi = hi;

  ImageF blended;
  if (options.naive) {
    result.levels = 1;
    blended = naive_blend(normalized, result.weights.normalized);
  } else {
    result.levels = options.levels.value_or(default_levels(h, w));
    std::vector<Pyramid> disp_pyrs, weight_pyrs;
    disp_pyrs.reserve(n);
    weight_pyrs.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      disp_pyrs.push_back(laplacian_pyramid(normalized[k], result.levels));
      weight_pyrs.push_back(gaussian_pyramid(result.weights.normalized[k], result.levels));
    }
    const Pyramid fused = blend_pyramids(disp_pyrs, weight_pyrs);
    if (options.dump_dir) {
      for (std::size_t k = 0; k < n; ++k) {
        dump_pyramid(disp_pyrs[k], *options.dump_dir, "disp" + std::to_string(k) + "_laplacian");
        dump_pyramid(weight_pyrs[k], *options.dump_dir, "weight" + std::to_string(k) + "_gaussian");
      }
      dump_pyramid(fused, *options.dump_dir, "fused_laplacian");
    }
    blended = collapse(fused);
  }

  std::vector<float> raw(pixels);
  for (std::size_t i = 0; i < pixels; ++i) {
    if (!out_valid[i]) {
      raw[i] = std::numeric_limits<float>::infinity();
      continue;
    }
    const double d = static_cast<double>(lo) + static_cast<double>(blended.data()[i]) * range;
    raw[i] = static_cast<float>(std::max(0.0, d));
  }
  result.refined = DisparityMap(h, w, std::move(raw), std::move(out_valid));
  return result;
}

DisparityMap fuse_disparities(const ExposureStack& stack, const QualityConfig& cfg, std::optional<int> levels) {
  FuseOptions options;
  options.quality = cfg;
  options.levels = levels;
  return fuse(stack, options).refined;
}

DisparityMap fuse_naive(const ExposureStack& stack, const QualityConfig& cfg) {
  FuseOptions options;
  options.quality = cfg;
  options.naive = true;
  return fuse(stack, options).refined;
}

}  // namespace mestereo
