#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mestereo/image.hpp"

namespace mestereo {

enum class PyramidKind { gaussian, laplacian };

/// Multi-resolution decomposition of a single-channel raster.
///
/// Level 0 is full resolution and each level is ceil(h/2) x ceil(w/2) of the
/// previous one. A Gaussian pyramid stores its levels directly. A Laplacian
/// pyramid stores levels-1 band-pass rasters plus the coarsest Gaussian level
/// as `base()`; `level(l)` addresses bands for l < levels-1 and the base last.
class Pyramid {
 public:
  static Pyramid gaussian(std::vector<ImageF> levels);
  static Pyramid laplacian(std::vector<ImageF> bands, ImageF base);

  PyramidKind kind() const noexcept { return kind_; }
  int level_count() const noexcept { return static_cast<int>(levels_.size()); }
  const ImageF& level(int l) const { return levels_.at(static_cast<std::size_t>(l)); }
  /// Band-pass levels (empty for a one-level Laplacian pyramid or any Gaussian pyramid).
  std::span<const ImageF> bands() const noexcept;
  /// Coarsest level.
  const ImageF& base() const noexcept { return levels_.back(); }

 private:
  Pyramid(PyramidKind kind, std::vector<ImageF> levels);

  PyramidKind kind_ = PyramidKind::gaussian;
  std::vector<ImageF> levels_;
};

/// floor(log2(min(h, w))) + 1, or 0 for an empty extent.
int max_levels(int height, int width);

/// max_levels - 2, at least 1.
int default_levels(int height, int width);

Pyramid gaussian_pyramid(const ImageF& r, int levels);
Pyramid laplacian_pyramid(const ImageF& r, int levels);

/// Folds the base up through the bands. Throws InvalidInput on a non-Laplacian
/// pyramid or inconsistent level extents.
ImageF collapse(const Pyramid& p);

/// Per level l: sum_k weights[k].level(l) * disparities[k].level(l), base included.
Pyramid blend_pyramids(std::span<const Pyramid> disparities, std::span<const Pyramid> weights);

/// Single-scale blend R = sum_k W_k D_k.
ImageF naive_blend(std::span<const ImageF> disparities, std::span<const ImageF> weights);

/// Writes every level as `<prefix>_L<l>.pfm` under `dir` (created if missing).
void dump_pyramid(const Pyramid& p, const std::filesystem::path& dir, const std::string& prefix);

}  // namespace mestereo
