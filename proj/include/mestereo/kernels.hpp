#pragma once

#include <span>

#include "mestereo/image.hpp"

// Per-pixel and per-window raster kernels shared by the quality and pyramid
// modules. The kernels:: versions are row-parallel (OpenMP); kernels::serial
// holds straightforward single-threaded references used by the tests and the
// benchmark. All kernels take and return single-channel rasters and use
// reflect-101 boundary handling (mirror without repeating the edge sample).

namespace mestereo::kernels {

/// Mirror an out-of-range index into [0, n) without repeating the edge.
constexpr int reflect101(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Sum of a few terms, independent of their order.
double order_free_sum(std::span<double> terms) noexcept;

/// |4-neighbour Laplacian| with stencil [[0,1,0],[1,-4,1],[0,1,0]].
ImageF laplacian_abs(const ImageF& src);

/// Square median filter; `window` must be odd and >= 1.
ImageF median_filter(const ImageF& src, int window);

/// exp(-(v - 0.5)^2 / (2 sigma^2)) per pixel.
ImageF well_exposedness(const ImageF& gray, double sigma);

/// C^wc * E^we per pixel, with 0^0 = 1.
ImageF refine_weights(const ImageF& contrast, const ImageF& exposedness, double wc, double we);

/// Divides each map by the per-pixel sum over maps. Pixels whose sum is below
/// 1e-12 get the uniform weight 1/N.
void normalize_weights(std::span<ImageF> weights);

/// Separable [1,4,6,4,1]/16 blur followed by keeping even rows and columns.
/// Output extent is ceil(h/2) x ceil(w/2).
ImageF pyr_down(const ImageF& src);

/// Zero-insertion to (fine_h, fine_w) followed by the same blur with gain 2
/// per axis (1 on an axis of extent 1).
ImageF pyr_up(const ImageF& coarse, int fine_h, int fine_w);

/// sum_k weights[k] * values[k] per pixel (order-free).
ImageF weighted_sum(std::span<const ImageF* const> values, std::span<const ImageF* const> weights);

}  // namespace mestereo::kernels

namespace mestereo::kernels::serial {

ImageF laplacian_abs(const ImageF& src);
ImageF median_filter(const ImageF& src, int window);
ImageF well_exposedness(const ImageF& gray, double sigma);
ImageF refine_weights(const ImageF& contrast, const ImageF& exposedness, double wc, double we);
void normalize_weights(std::span<ImageF> weights);
ImageF pyr_down(const ImageF& src);
ImageF pyr_up(const ImageF& coarse, int fine_h, int fine_w);
ImageF weighted_sum(std::span<const ImageF* const> values, std::span<const ImageF* const> weights);

}  // namespace mestereo::kernels::serial
