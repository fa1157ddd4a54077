#include "mestereo/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mestereo/error.hpp"

namespace mestereo {
namespace {

std::size_t checked_size(int height, int width, int channels) {
  if (height <= 0 || width <= 0) {
    throw InvalidInput("image extent must be positive, got " + std::to_string(height) + "x" +
                       std::to_string(width));
  }
  if (channels != 1 && channels != 3) {
    throw InvalidInput("image must have 1 or 3 channels, got " + std::to_string(channels));
  }
  return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
         static_cast<std::size_t>(channels);
}

}  // namespace

ImageF::ImageF(int height, int width, int channels)
    : height_(height),
      width_(width),
      channels_(channels),
      data_(checked_size(height, width, channels), 0.0f) {}

ImageF::ImageF(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  const std::size_t expected = checked_size(height, width, channels);
  if (data_.size() != expected) {
    throw InvalidInput("image data holds " + std::to_string(data_.size()) + " samples, expected " +
                       std::to_string(expected));
  }
  const auto bad = std::find_if(data_.begin(), data_.end(), [](float v) { return !std::isfinite(v); });
  if (bad != data_.end()) {
    throw InvalidInput("image sample " + std::to_string(bad - data_.begin()) + " is not finite");
  }
}

ImageF ImageF::filled(int height, int width, float value) {
  ImageF img(height, width, 1);
  std::fill(img.data_.begin(), img.data_.end(), value);
  return img;
}

DisparityMap::DisparityMap(int height, int width, std::vector<float> raw)
    : height_(height), width_(width), raw_(std::move(raw)) {
  if (raw_.size() != checked_size(height, width, 1)) {
    throw InvalidInput("disparity data holds " + std::to_string(raw_.size()) +
                       " samples, expected " + std::to_string(height * width));
  }
  valid_.resize(raw_.size());
  std::transform(raw_.begin(), raw_.end(), valid_.begin(),
                 [](float v) { return static_cast<std::uint8_t>(std::isfinite(v) && v >= 0.0f); });
}

DisparityMap::DisparityMap(int height, int width, std::vector<float> raw,
                           std::vector<std::uint8_t> valid)
    : height_(height), width_(width), raw_(std::move(raw)), valid_(std::move(valid)) {
  const std::size_t n = checked_size(height, width, 1);
  if (raw_.size() != n || valid_.size() != n) {
    throw InvalidInput("disparity data/mask size does not match extent " + std::to_string(height) +
                       "x" + std::to_string(width));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (valid_[i] && !(std::isfinite(raw_[i]) && raw_[i] >= 0.0f)) {
      throw InvalidInput("disparity pixel " + std::to_string(i) +
                         " is marked valid but is negative or non-finite");
    }
    valid_[i] = valid_[i] ? 1 : 0;
  }
}

DisparityMap::DisparityMap(const ImageF& values)
    : DisparityMap(values.height(), values.width(),
                   std::vector<float>(values.data().begin(), values.data().end())) {
  if (values.channels() != 1) {
    throw InvalidInput("disparity map must be single-channel");
  }
}

std::size_t DisparityMap::valid_count() const noexcept {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), std::uint8_t{1}));
}

ImageF DisparityMap::filled(float fill) const {
  std::vector<float> out(raw_.size());
  for (std::size_t i = 0; i < raw_.size(); ++i) out[i] = valid_[i] ? raw_[i] : fill;
  return ImageF(height_, width_, 1, std::move(out));
}

ImageF to_grayscale(const ImageF& rgb) {
  if (rgb.channels() != 3) {
    throw InvalidInput("to_grayscale expects 3 channels, got " + std::to_string(rgb.channels()));
  }
  ImageF gray(rgb.height(), rgb.width(), 1);
  auto src = rgb.data();
  auto dst = gray.data();
  for (std::size_t p = 0; p < dst.size(); ++p) {
    const float r = src[3 * p], g = src[3 * p + 1], b = src[3 * p + 2];
    dst[p] = std::clamp(0.2126f * r + 0.7152f * g + 0.0722f * b, 0.0f, 1.0f);
  }
  return gray;
}

ImageF normalize(const ImageF& img, float lo, float hi) {
  if (!(hi > lo)) {
    throw InvalidParameter("normalize requires hi > lo, got lo=" + std::to_string(lo) +
                           " hi=" + std::to_string(hi));
  }
  ImageF out = img;
  const float range = hi - lo;
  for (float& v : out.data()) v = std::clamp((v - lo) / range, 0.0f, 1.0f);
  return out;
}

}  // namespace mestereo
