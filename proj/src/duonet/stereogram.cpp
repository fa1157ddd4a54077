#include <algorithm>
#include <random>
#include <string>

#include "mestereo/duonet.hpp"
#include "mestereo/error.hpp"

namespace mestereo::duonet {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

template <typename T>
StereogramSample<T> make_stereogram(std::uint64_t seed, int height, int width, int shift) {
  if (height < 3 || width < 4) throw InvalidInput("stereogram extent too small");
  if (shift < 0 || 4 * shift >= width) {
    throw InvalidParameter("stereogram shift " + std::to_string(shift) + " must be < width/4 = " +
                           std::to_string(width / 4.0));
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution dot(0.5);

  StereogramSample<T> s;
  s.left_clue = Tensor<T>(height, width, 1);
  for (T& v : s.left_clue.data) v = dot(rng) ? T(1) : T(0);

  // The displaced rectangle covers most of the frame, so the static background
  // is the minority region.
  const int rh = std::uniform_int_distribution<int>(std::max(1, 7 * height / 10), std::max(1, 19 * height / 20))(rng);
  const int rw = std::uniform_int_distribution<int>(std::max(1, 7 * width / 10), std::max(1, 19 * width / 20))(rng);
  const int y0 = std::uniform_int_distribution<int>(0, height - rh)(rng);
  const int x0 = std::uniform_int_distribution<int>(0, width - rw)(rng);

  s.right_clue = s.left_clue;
  s.gt_disparity = Tensor<T>(height, width, 1);
  s.valid.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), 1);
  s.shifted.assign(s.valid.size(), 0);
  for (int y = y0; y < y0 + rh; ++y) {
    for (int x = x0; x < x0 + rw; ++x) {
      s.right_clue.at(y, x, 0) = s.left_clue.at(y, std::max(0, x - shift), 0);
      s.gt_disparity.at(y, x, 0) = static_cast<T>(shift);
      s.shifted[s.gt_disparity.offset(y, x, 0)] = 1;
    }
  }
  return s;
}

template <typename T>
std::vector<StereogramSample<T>> make_dataset(std::uint64_t seed, std::size_t count, int height, int width,
                                              int shift) {
  std::vector<StereogramSample<T>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(make_stereogram<T>(splitmix64(seed + i), height, width, shift));
  }
  return out;
}

template StereogramSample<float> make_stereogram(std::uint64_t, int, int, int);
template StereogramSample<double> make_stereogram(std::uint64_t, int, int, int);
template std::vector<StereogramSample<float>> make_dataset(std::uint64_t, std::size_t, int, int, int);
template std::vector<StereogramSample<double>> make_dataset(std::uint64_t, std::size_t, int, int, int);

}  // namespace mestereo::duonet
