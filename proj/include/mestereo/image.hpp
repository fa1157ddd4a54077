#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mestereo {

/// Row-major float raster with interleaved channels (1 or 3).
///
/// Single-channel ImageF doubles as the generic raster type for weights,
/// pyramid levels and intermediate quality maps.
class ImageF {
 public:
  ImageF() = default;
  /// Zero-filled image.
  ImageF(int height, int width, int channels = 1);
  /// Takes ownership of `data`; throws InvalidInput on size mismatch or non-finite samples.
  ImageF(int height, int width, int channels, std::vector<float> data);

  static ImageF filled(int height, int width, float value);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }
  float at(int y, int x, int c = 0) const noexcept { return data_[index(y, x, c)]; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_extent(const ImageF& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const ImageF&, const ImageF&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  std::vector<float> data_;
};

/// Single-channel disparity (or depth) raster with a per-pixel validity mask.
///
/// Raw samples are kept as loaded, including non-finite entries, so PFM files
/// round-trip bit-exactly. Valid pixels are always finite and >= 0.
class DisparityMap {
 public:
  DisparityMap() = default;
  /// Every finite, nonnegative sample is valid.
  DisparityMap(int height, int width, std::vector<float> raw);
  /// Explicit mask; throws InvalidInput if a masked-valid sample is non-finite or negative.
  DisparityMap(int height, int width, std::vector<float> raw, std::vector<std::uint8_t> valid);
  explicit DisparityMap(const ImageF& values);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t pixel_count() const noexcept { return raw_.size(); }

  std::span<const float> raw() const noexcept { return raw_; }
  std::span<const std::uint8_t> valid_mask() const noexcept { return valid_; }
  float at(int y, int x) const noexcept { return raw_[offset(y, x)]; }
  bool valid(int y, int x) const noexcept { return valid_[offset(y, x)] != 0; }
  std::size_t valid_count() const noexcept;

  /// Values as a raster with invalid pixels replaced by `fill`.
  ImageF filled(float fill = 0.0f) const;

  bool same_extent(const DisparityMap& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

 private:
  std::size_t offset(int y, int x) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> raw_;
  std::vector<std::uint8_t> valid_;
};

/// Rec. 709 luma of a 3-channel image.
ImageF to_grayscale(const ImageF& rgb);

/// Affine map of [lo, hi] onto [0, 1], clamped.
ImageF normalize(const ImageF& img, float lo, float hi);

}  // namespace mestereo
