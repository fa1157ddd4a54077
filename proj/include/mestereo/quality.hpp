#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mestereo/image.hpp"

namespace mestereo {

/// Parameters of the two per-pixel quality measures.
struct QualityConfig {
  double contrast_exponent = 1.0;     ///< w_C; 0 disables the contrast measure
  double exposedness_exponent = 1.0;  ///< w_E; 0 disables the well-exposedness measure
  double sigma = 0.2;                 ///< width of the well-exposedness Gaussian
  int median_window = 3;              ///< odd side of the median filter applied after |Laplacian|

  /// Throws InvalidParameter when a field is out of range.
  void validate() const;
};

/// Per-map quality rasters for one stack. All rasters share one extent.
struct WeightStack {
  std::vector<ImageF> contrast;     ///< C_k >= 0
  std::vector<ImageF> exposedness;  ///< E_k in (0, 1]
  std::vector<ImageF> refined;      ///< W_k = C_k^wC * E_k^wE
  std::vector<ImageF> normalized;   ///< W_k / sum_k W_k, summing to 1 per pixel

  std::size_t size() const noexcept { return normalized.size(); }
};

/// Scalar well-exposedness exp(-(v - 0.5)^2 / (2 sigma^2)).
double well_exposedness(double intensity, double sigma);

/// Raster form of well_exposedness. Input must be single-channel in [0,1].
ImageF well_exposedness(const ImageF& gray, double sigma);

/// median(|Laplacian(disp)|) over a `median_window` square.
ImageF contrast_measure(const ImageF& disp, int median_window);

ImageF refine_weights(const ImageF& contrast, const ImageF& exposedness, double contrast_exponent,
                      double exposedness_exponent);

/// Per-pixel sum-to-one normalization, uniform 1/N where every weight vanishes.
std::vector<ImageF> normalize_weights(std::span<const ImageF> weights);

/// Builds C, E, W and the normalized weights for N maps.
///
/// `gray_images[k]` drives E_k and `disparities[k]` (already normalized to
/// [0,1]) drives C_k. When `invalid` is non-empty, W_k is forced to zero
/// wherever invalid[k] is set, before normalization.
WeightStack compute_weights(std::span<const ImageF> gray_images, std::span<const ImageF> disparities,
                            const QualityConfig& cfg,
                            std::span<const std::vector<std::uint8_t>> invalid = {});

}  // namespace mestereo
