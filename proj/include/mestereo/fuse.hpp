#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mestereo/image.hpp"
#include "mestereo/quality.hpp"

namespace mestereo {

/// N co-registered left-view exposures and the disparity map estimated from each stereo pair.
struct ExposureStack {
  std::vector<ImageF> left_images;  ///< 1- or 3-channel, intensities in [0,1]
  std::vector<DisparityMap> disparities;
  std::vector<std::string> exposure_labels;  ///< optional, free-form

  std::size_t size() const noexcept { return disparities.size(); }

  /// Throws InvalidInput naming the first offending entry.
  void validate() const;
};

struct FuseOptions {
  QualityConfig quality;
  std::optional<int> levels;  ///< defaults to default_levels(h, w)
  bool naive = false;         ///< single-scale blend instead of the pyramid blend
  std::optional<std::filesystem::path> dump_dir;  ///< writes every pyramid level as PFM
};

struct FuseResult {
  DisparityMap refined;
  WeightStack weights;
  int levels = 1;
  float range_lo = 0.0f;  ///< joint disparity range used for normalization
  float range_hi = 0.0f;
};

/// Quality-weighted multi-exposure disparity fusion.
///
/// The stack is jointly normalized to [0,1] by the global min/max over all
/// valid disparities, weighted per pixel by contrast (from the normalized
/// disparities) and well-exposedness (from the grayscale left images), blended
/// level by level through Laplacian/Gaussian pyramids, collapsed and mapped
/// back to disparity units. A pixel is valid in the output only if it is valid
/// in every input; invalid output pixels hold +inf. Map k gets zero weight
/// wherever its own disparity is invalid.
FuseResult fuse(const ExposureStack& stack, const FuseOptions& options);

DisparityMap fuse_disparities(const ExposureStack& stack, const QualityConfig& cfg,
                              std::optional<int> levels = std::nullopt);

/// Same pipeline with the single-scale weighted average in place of the pyramid blend.
DisparityMap fuse_naive(const ExposureStack& stack, const QualityConfig& cfg);

}  // namespace mestereo
