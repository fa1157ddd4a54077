#include "mestereo/pyramid.hpp"

#include <bit>
#include <string>

#include "mestereo/error.hpp"
#include "mestereo/image_io.hpp"
#include "mestereo/kernels.hpp"

namespace mestereo {
namespace {

std::string extent(const ImageF& img) {
  return std::to_string(img.height()) + "x" + std::to_string(img.width());
}

void require_chain(const std::vector<ImageF>& levels) {
  for (std::size_t l = 1; l < levels.size(); ++l) {
    const ImageF& fine = levels[l - 1];
    const ImageF& coarse = levels[l];
    if (coarse.height() != (fine.height() + 1) / 2 || coarse.width() != (fine.width() + 1) / 2) {
      throw InvalidInput("pyramid level " + std::to_string(l) + " is " + extent(coarse) +
                         ", expected half of " + extent(fine));
    }
  }
}

void require_levels(const ImageF& r, int levels) {
  if (r.channels() != 1) throw InvalidInput("pyramids are built from single-channel rasters");
  const int cap = max_levels(r.height(), r.width());
  if (levels < 1 || levels > cap) {
    throw InvalidParameter("pyramid levels must lie in [1, " + std::to_string(cap) + "] for a " +
                           extent(r) + " raster, got " + std::to_string(levels));
  }
}

}  // namespace

Pyramid::Pyramid(PyramidKind kind, std::vector<ImageF> levels) : kind_(kind), levels_(std::move(levels)) {
  if (levels_.empty()) throw InvalidInput("a pyramid needs at least one level");
  require_chain(levels_);
}

Pyramid Pyramid::gaussian(std::vector<ImageF> levels) {
  return Pyramid(PyramidKind::gaussian, std::move(levels));
}

Pyramid Pyramid::laplacian(std::vector<ImageF> bands, ImageF base) {
  bands.push_back(std::move(base));
  return Pyramid(PyramidKind::laplacian, std::move(bands));
}

std::span<const ImageF> Pyramid::bands() const noexcept {
  if (kind_ != PyramidKind::laplacian) return {};
  return std::span<const ImageF>(levels_).first(levels_.size() - 1);
}

int max_levels(int height, int width) {
  const int short_side = std::min(height, width);
  if (short_side < 1) return 0;
  return std::bit_width(static_cast<unsigned>(short_side));
}

int default_levels(int height, int width) { return std::max(1, max_levels(height, width) - 2); }

Pyramid gaussian_pyramid(const ImageF& r, int levels) {
  require_levels(r, levels);
  std::vector<ImageF> out;
  out.reserve(static_cast<std::size_t>(levels));
  out.push_back(r);
  for (int l = 1; l < levels; ++l) out.push_back(kernels::pyr_down(out.back()));
  return Pyramid::gaussian(std::move(out));
}

Pyramid laplacian_pyramid(const ImageF& r, int levels) {
  const Pyramid g = gaussian_pyramid(r, levels);
  std::vector<ImageF> bands;
  bands.reserve(static_cast<std::size_t>(levels - 1));
  for (int l = 0; l + 1 < levels; ++l) {
    const ImageF& fine = g.level(l);
    ImageF band = fine;
    const ImageF up = kernels::pyr_up(g.level(l + 1), fine.height(), fine.width());
    auto dst = band.data();
    const auto src = up.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
    bands.push_back(std::move(band));
  }
  return Pyramid::laplacian(std::move(bands), g.base());
}

ImageF collapse(const Pyramid& p) {
  if (p.kind() != PyramidKind::laplacian) throw InvalidInput("collapse expects a Laplacian pyramid");
  ImageF acc = p.base();
  for (int l = p.level_count() - 2; l >= 0; --l) {
    const ImageF& band = p.level(l);
    ImageF up = kernels::pyr_up(acc, band.height(), band.width());
    auto dst = up.data();
    const auto src = band.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    acc = std::move(up);
  }
  return acc;
}

Pyramid blend_pyramids(std::span<const Pyramid> disparities, std::span<const Pyramid> weights) {
  if (disparities.empty()) throw InvalidInput("blend_pyramids needs at least one pyramid");
  if (disparities.size() != weights.size()) {
    throw InvalidInput("blend_pyramids: " + std::to_string(disparities.size()) + " disparity pyramids vs " +
                       std::to_string(weights.size()) + " weight pyramids");
  }
  const int levels = disparities.front().level_count();
  for (std::size_t k = 0; k < disparities.size(); ++k) {
    if (disparities[k].kind() != PyramidKind::laplacian || weights[k].kind() != PyramidKind::gaussian) {
      throw InvalidInput("blend_pyramids expects Laplacian disparity and Gaussian weight pyramids");
    }
    if (disparities[k].level_count() != levels || weights[k].level_count() != levels) {
      throw InvalidInput("pyramid " + std::to_string(k) + " has a different level count");
    }
    for (int l = 0; l < levels; ++l) {
      if (!disparities[k].level(l).same_extent(disparities[0].level(l)) ||
          !weights[k].level(l).same_extent(disparities[0].level(l))) {
        throw InvalidInput("pyramid " + std::to_string(k) + " level " + std::to_string(l) +
                           " extent mismatch");
      }
    }
  }
  std::vector<ImageF> blended;
  blended.reserve(static_cast<std::size_t>(levels));
  std::vector<const ImageF*> d(disparities.size()), w(weights.size());
  for (int l = 0; l < levels; ++l) {
    for (std::size_t k = 0; k < d.size(); ++k) {
      d[k] = &disparities[k].level(l);
      w[k] = &weights[k].level(l);
    }
    blended.push_back(kernels::weighted_sum(d, w));
  }
  ImageF base = std::move(blended.back());
  blended.pop_back();
  return Pyramid::laplacian(std::move(blended), std::move(base));
}

ImageF naive_blend(std::span<const ImageF> disparities, std::span<const ImageF> weights) {
  if (disparities.empty() || disparities.size() != weights.size()) {
    throw InvalidInput("naive_blend needs one weight raster per disparity raster");
  }
  std::vector<const ImageF*> d, w;
  for (std::size_t k = 0; k < disparities.size(); ++k) {
    d.push_back(&disparities[k]);
    w.push_back(&weights[k]);
  }
  return kernels::weighted_sum(d, w);
}

void dump_pyramid(const Pyramid& p, const std::filesystem::path& dir, const std::string& prefix) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  for (int l = 0; l < p.level_count(); ++l) {
    const ImageF& level = p.level(l);
    // Band-pass levels are signed, so write them as raw float images.
    write_image(dir / (prefix + "_L" + std::to_string(l) + ".pfm"), level);
  }
}

}  // namespace mestereo
