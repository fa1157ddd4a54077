#pragma once

#include <filesystem>

#include "mestereo/image.hpp"

namespace mestereo {

/// Reads PNG (8/16-bit), binary PGM/PPM (P5/P6, 8/16-bit) or PFM.
///
/// The format is detected from the file's magic bytes. Integer rasters are
/// normalized to [0,1] by their maximum code value. Alpha channels are
/// dropped and gray+alpha becomes gray. PFM samples must be finite here; use
/// read_pfm for disparity data that carries inf markers.
ImageF read_image(const std::filesystem::path& path);

/// Writes by extension: .png and .pgm/.ppm quantize [0,1] to `bit_depth`
/// (8 or 16) bits, .pfm stores float32.
void write_image(const std::filesystem::path& path, const ImageF& img, int bit_depth = 8);

/// Single-channel PFM ("Pf"). Non-finite and negative samples become invalid.
DisparityMap read_pfm(const std::filesystem::path& path);

/// Writes raw samples as little-endian "Pf" (scale -1), bottom row first.
void write_pfm(const std::filesystem::path& path, const DisparityMap& disp);

/// Min-max stretch of valid pixels to 8-bit gray; invalid pixels are black.
void write_preview_png(const std::filesystem::path& path, const DisparityMap& disp);

}  // namespace mestereo
