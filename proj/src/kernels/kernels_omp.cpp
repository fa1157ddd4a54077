#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mestereo/error.hpp"
#include "mestereo/kernels.hpp"
#include "mestereo/omp.hpp"

namespace mestereo::kernels {
namespace {

constexpr float kTap0 = 1.0f / 16.0f;
constexpr float kTap1 = 4.0f / 16.0f;
constexpr float kTap2 = 6.0f / 16.0f;

void require_single_channel(const ImageF& img, const char* who) {
  if (img.channels() != 1) {
    throw InvalidInput(std::string(who) + " expects a single-channel raster, got " +
                       std::to_string(img.channels()) + " channels");
  }
}

void require_same_extent(const ImageF& a, const ImageF& b, const char* who) {
  if (!a.same_extent(b)) {
    throw InvalidInput(std::string(who) + ": extent mismatch " + std::to_string(a.height()) + "x" +
                       std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                       std::to_string(b.width()));
  }
}

}  // namespace

double order_free_sum(std::span<double> terms) noexcept {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

ImageF laplacian_abs(const ImageF& src) {
  require_single_channel(src, "laplacian_abs");
  const int h = src.height(), w = src.width();
  ImageF dst(h, w, 1);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const int ym = reflect101(y - 1, h), yp = reflect101(y + 1, h);
    for (int x = 0; x < w; ++x) {
      const int xm = reflect101(x - 1, w), xp = reflect101(x + 1, w);
      double r = src.at(ym, x);
      r += src.at(y, xm);
      r += -4.0 * src.at(y, x);
      r += src.at(y, xp);
      r += src.at(yp, x);
      dst.at(y, x) = static_cast<float>(std::abs(r));
    }
  }
  return dst;
}

ImageF median_filter(const ImageF& src, int window) {
  require_single_channel(src, "median_filter");
  if (window < 1 || window % 2 == 0) {
    throw InvalidParameter("median window must be odd and >= 1, got " + std::to_string(window));
  }
  if (window == 1) return src;
  const int h = src.height(), w = src.width(), r = window / 2;
  const std::size_t count = static_cast<std::size_t>(window) * static_cast<std::size_t>(window);
  ImageF dst(h, w, 1);
#pragma omp parallel
  {
    std::vector<float> buf(count);
#pragma omp for schedule(static)
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        std::size_t n = 0;
        for (int dy = -r; dy <= r; ++dy) {
          const int yy = reflect101(y + dy, h);
          for (int dx = -r; dx <= r; ++dx) buf[n++] = src.at(yy, reflect101(x + dx, w));
        }
        const auto mid = buf.begin() + static_cast<std::ptrdiff_t>(count / 2);
        std::nth_element(buf.begin(), mid, buf.end());
        dst.at(y, x) = *mid;
      }
    }
  }
  return dst;
}

ImageF well_exposedness(const ImageF& gray, double sigma) {
  require_single_channel(gray, "well_exposedness");
  const double inv = 1.0 / (2.0 * sigma * sigma);
  ImageF dst(gray.height(), gray.width(), 1);
  const auto src = gray.data();
  auto out = dst.data();
  const auto n = static_cast<std::ptrdiff_t>(src.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(src[i]) - 0.5;
    out[i] = static_cast<float>(std::exp(-d * d * inv));
  }
  return dst;
}

ImageF refine_weights(const ImageF& contrast, const ImageF& exposedness, double wc, double we) {
  require_same_extent(contrast, exposedness, "refine_weights");
  ImageF dst(contrast.height(), contrast.width(), 1);
  const auto c = contrast.data();
  const auto e = exposedness.data();
  auto out = dst.data();
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[i] = static_cast<float>(std::pow(static_cast<double>(c[i]), wc) *
                                std::pow(static_cast<double>(e[i]), we));
  }
  return dst;
}

void normalize_weights(std::span<ImageF> weights) {
  if (weights.empty()) return;
  for (const ImageF& w : weights) require_same_extent(weights.front(), w, "normalize_weights");
  const std::size_t maps = weights.size();
  const auto n = static_cast<std::ptrdiff_t>(weights.front().pixel_count());
  const float uniform = static_cast<float>(1.0 / static_cast<double>(maps));
#pragma omp parallel
  {
    std::vector<double> terms(maps);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < maps; ++k) terms[k] = weights[k].data()[i];
      const double total = order_free_sum(terms);
      for (std::size_t k = 0; k < maps; ++k) {
        float& v = weights[k].data()[i];
        v = total < 1e-12 ? uniform : static_cast<float>(static_cast<double>(v) / total);
      }
    }
  }
}

ImageF pyr_down(const ImageF& src) {
  require_single_channel(src, "pyr_down");
  const int h = src.height(), w = src.width();
  const int hc = (h + 1) / 2, wc = (w + 1) / 2;
  ImageF tmp(h, wc, 1);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int xc = 0; xc < wc; ++xc) {
      const int x = 2 * xc;
      tmp.at(y, xc) = kTap0 * src.at(y, reflect101(x - 2, w)) + kTap1 * src.at(y, reflect101(x - 1, w)) +
                      kTap2 * src.at(y, x) + kTap1 * src.at(y, reflect101(x + 1, w)) +
                      kTap0 * src.at(y, reflect101(x + 2, w));
    }
  }
  ImageF dst(hc, wc, 1);
#pragma omp parallel for schedule(static)
  for (int yc = 0; yc < hc; ++yc) {
    const int y = 2 * yc;
    const int r0 = reflect101(y - 2, h), r1 = reflect101(y - 1, h), r3 = reflect101(y + 1, h),
              r4 = reflect101(y + 2, h);
    for (int xc = 0; xc < wc; ++xc) {
      dst.at(yc, xc) = kTap0 * tmp.at(r0, xc) + kTap1 * tmp.at(r1, xc) + kTap2 * tmp.at(y, xc) +
                       kTap1 * tmp.at(r3, xc) + kTap0 * tmp.at(r4, xc);
    }
  }
  return dst;
}

ImageF pyr_up(const ImageF& coarse, int fine_h, int fine_w) {
  require_single_channel(coarse, "pyr_up");
  if ((fine_h + 1) / 2 != coarse.height() || (fine_w + 1) / 2 != coarse.width()) {
    throw InvalidInput("pyr_up: target " + std::to_string(fine_h) + "x" + std::to_string(fine_w) +
                       " is not a parent of " + std::to_string(coarse.height()) + "x" +
                       std::to_string(coarse.width()));
  }
  const int hc = coarse.height();
  constexpr float taps[5] = {kTap0, kTap1, kTap2, kTap1, kTap0};
  // A one-sample axis has no inserted zeros to make up for.
  const float gain_x = fine_w == 1 ? 1.0f : 2.0f;
  const float gain_y = fine_h == 1 ? 1.0f : 2.0f;

  // Horizontal pass over the coarse rows; odd fine rows of the zero-inserted
  // image are entirely zero and are skipped.
  ImageF tmp(hc, fine_w, 1);
#pragma omp parallel for schedule(static)
  for (int yc = 0; yc < hc; ++yc) {
    for (int x = 0; x < fine_w; ++x) {
      float acc = 0.0f;
      for (int t = 0; t < 5; ++t) {
        const int m = reflect101(x + t - 2, fine_w);
        if (m % 2 == 0) acc += taps[t] * coarse.at(yc, m / 2);
      }
      tmp.at(yc, x) = gain_x * acc;
    }
  }
  ImageF dst(fine_h, fine_w, 1);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < fine_h; ++y) {
    for (int x = 0; x < fine_w; ++x) {
      float acc = 0.0f;
      for (int t = 0; t < 5; ++t) {
        const int m = reflect101(y + t - 2, fine_h);
        if (m % 2 == 0) acc += taps[t] * tmp.at(m / 2, x);
      }
      dst.at(y, x) = gain_y * acc;
    }
  }
  return dst;
}

ImageF weighted_sum(std::span<const ImageF* const> values, std::span<const ImageF* const> weights) {
  if (values.empty() || values.size() != weights.size()) {
    throw InvalidInput("weighted_sum needs one weight raster per value raster and at least one pair");
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    require_same_extent(*values.front(), *values[k], "weighted_sum");
    require_same_extent(*values.front(), *weights[k], "weighted_sum");
  }
  const std::size_t maps = values.size();
  ImageF dst(values.front()->height(), values.front()->width(), 1);
  auto out = dst.data();
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel
  {
    std::vector<double> terms(maps);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < maps; ++k) {
        terms[k] = static_cast<double>(weights[k]->data()[i]) * static_cast<double>(values[k]->data()[i]);
      }
      out[i] = static_cast<float>(order_free_sum(terms));
    }
  }
  return dst;
}

}  // namespace mestereo::kernels
