// Single-threaded reference kernels. These favour the direct textbook form
// (full 2D stencils, full sorts) over speed so the parallel kernels have an
// independent implementation to be checked against.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mestereo/error.hpp"
#include "mestereo/kernels.hpp"

namespace mestereo::kernels::serial {
namespace {

constexpr double kBinomial[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

}  // namespace

ImageF laplacian_abs(const ImageF& src) {
  static constexpr int stencil[3][3] = {{0, 1, 0}, {1, -4, 1}, {0, 1, 0}};
  const int h = src.height(), w = src.width();
  ImageF dst(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          acc += stencil[dy + 1][dx + 1] * src.at(reflect101(y + dy, h), reflect101(x + dx, w));
        }
      }
      dst.at(y, x) = static_cast<float>(std::abs(acc));
    }
  }
  return dst;
}

ImageF median_filter(const ImageF& src, int window) {
  if (window < 1 || window % 2 == 0) {
    throw InvalidParameter("median window must be odd and >= 1, got " + std::to_string(window));
  }
  const int h = src.height(), w = src.width(), r = window / 2;
  ImageF dst(h, w, 1);
  std::vector<float> buf;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      buf.clear();
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) buf.push_back(src.at(reflect101(y + dy, h), reflect101(x + dx, w)));
      }
      std::sort(buf.begin(), buf.end());
      dst.at(y, x) = buf[buf.size() / 2];
    }
  }
  return dst;
}

ImageF well_exposedness(const ImageF& gray, double sigma) {
  ImageF dst(gray.height(), gray.width(), 1);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const double v = gray.data()[i];
    dst.data()[i] = static_cast<float>(std::exp(-((v - 0.5) * (v - 0.5)) / (2.0 * sigma * sigma)));
  }
  return dst;
}

ImageF refine_weights(const ImageF& contrast, const ImageF& exposedness, double wc, double we) {
  ImageF dst(contrast.height(), contrast.width(), 1);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double c = contrast.data()[i], e = exposedness.data()[i];
    const double cw = wc == 0.0 ? 1.0 : std::pow(c, wc);
    const double ew = we == 0.0 ? 1.0 : std::pow(e, we);
    dst.data()[i] = static_cast<float>(cw * ew);
  }
  return dst;
}

void normalize_weights(std::span<ImageF> weights) {
  if (weights.empty()) return;
  const std::size_t maps = weights.size();
  std::vector<double> terms(maps);
  for (std::size_t i = 0; i < weights.front().size(); ++i) {
    for (std::size_t k = 0; k < maps; ++k) terms[k] = weights[k].data()[i];
    const double total = order_free_sum(terms);
    for (std::size_t k = 0; k < maps; ++k) {
      float& v = weights[k].data()[i];
      v = total < 1e-12 ? static_cast<float>(1.0 / static_cast<double>(maps))
                        : static_cast<float>(v / total);
    }
  }
}

ImageF pyr_down(const ImageF& src) {
  const int h = src.height(), w = src.width();
  ImageF dst((h + 1) / 2, (w + 1) / 2, 1);
  for (int yc = 0; yc < dst.height(); ++yc) {
    for (int xc = 0; xc < dst.width(); ++xc) {
      double acc = 0.0;
      for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
          acc += kBinomial[i] * kBinomial[j] *
                 src.at(reflect101(2 * yc + i - 2, h), reflect101(2 * xc + j - 2, w));
        }
      }
      dst.at(yc, xc) = static_cast<float>(acc);
    }
  }
  return dst;
}

ImageF pyr_up(const ImageF& coarse, int fine_h, int fine_w) {
  // Materialize the zero-inserted image, then blur it with gain 4.
  ImageF zeros(fine_h, fine_w, 1);
  for (int y = 0; y < fine_h; y += 2) {
    for (int x = 0; x < fine_w; x += 2) zeros.at(y, x) = coarse.at(y / 2, x / 2);
  }
  ImageF dst(fine_h, fine_w, 1);
  for (int y = 0; y < fine_h; ++y) {
    for (int x = 0; x < fine_w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
          acc += kBinomial[i] * kBinomial[j] *
                 zeros.at(reflect101(y + i - 2, fine_h), reflect101(x + j - 2, fine_w));
        }
      }
      const double gain = (fine_h == 1 ? 1.0 : 2.0) * (fine_w == 1 ? 1.0 : 2.0);
      dst.at(y, x) = static_cast<float>(gain * acc);
    }
  }
  return dst;
}

ImageF weighted_sum(std::span<const ImageF* const> values, std::span<const ImageF* const> weights) {
  ImageF dst(values.front()->height(), values.front()->width(), 1);
  std::vector<double> terms(values.size());
  for (std::size_t i = 0; i < dst.size(); ++i) {
    for (std::size_t k = 0; k < values.size(); ++k) {
      terms[k] = static_cast<double>(weights[k]->data()[i]) * values[k]->data()[i];
    }
    dst.data()[i] = static_cast<float>(order_free_sum(terms));
  }
  return dst;
}

}  // namespace mestereo::kernels::serial
