// Times each OpenMP kernel against its serial reference on a synthetic raster.
//
//   bench_kernels [height] [width] [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <vector>

#include "mestereo/kernels.hpp"
#include "mestereo/omp.hpp"

using mestereo::ImageF;
namespace kernels = mestereo::kernels;

namespace {

double seconds(const std::function<void()>& fn, int repeats) {
  fn();  // warm-up
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  return elapsed.count() / repeats;
}

ImageF random_raster(int h, int w, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ImageF img(h, w, 1);
  for (float& v : img.data()) v = u(rng);
  return img;
}

void report(const char* name, double parallel, double serial) {
  std::printf("%-18s parallel %9.3f ms   serial %9.3f ms   speedup %5.2fx\n", name, parallel * 1e3, serial * 1e3,
              serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  const int h = argc > 1 ? std::atoi(argv[1]) : 1024;
  const int w = argc > 2 ? std::atoi(argv[2]) : 1024;
  const int repeats = argc > 3 ? std::atoi(argv[3]) : 5;
  std::printf("raster %dx%d, %d repeats, %d OpenMP threads\n", h, w, repeats, omp_get_max_threads());

  const ImageF a = random_raster(h, w, 1), b = random_raster(h, w, 2), c = random_raster(h, w, 3);
  const ImageF half = kernels::pyr_down(a);

  report("laplacian_abs", seconds([&] { (void)kernels::laplacian_abs(a); }, repeats),
         seconds([&] { (void)kernels::serial::laplacian_abs(a); }, repeats));
  report("median_filter 3x3", seconds([&] { (void)kernels::median_filter(a, 3); }, repeats),
         seconds([&] { (void)kernels::serial::median_filter(a, 3); }, repeats));
  report("well_exposedness", seconds([&] { (void)kernels::well_exposedness(a, 0.2); }, repeats),
         seconds([&] { (void)kernels::serial::well_exposedness(a, 0.2); }, repeats));
  report("refine_weights", seconds([&] { (void)kernels::refine_weights(a, b, 1.0, 1.0); }, repeats),
         seconds([&] { (void)kernels::serial::refine_weights(a, b, 1.0, 1.0); }, repeats));
  report("normalize_weights",
         seconds([&] {
           std::vector<ImageF> ws{a, b, c};
           kernels::normalize_weights(ws);
         }, repeats),
         seconds([&] {
           std::vector<ImageF> ws{a, b, c};
           kernels::serial::normalize_weights(ws);
         }, repeats));
  report("pyr_down", seconds([&] { (void)kernels::pyr_down(a); }, repeats),
         seconds([&] { (void)kernels::serial::pyr_down(a); }, repeats));
  report("pyr_up", seconds([&] { (void)kernels::pyr_up(half, h, w); }, repeats),
         seconds([&] { (void)kernels::serial::pyr_up(half, h, w); }, repeats));
  const ImageF* values[] = {&a, &b, &c};
  const ImageF* weights[] = {&c, &b, &a};
  report("weighted_sum", seconds([&] { (void)kernels::weighted_sum(values, weights); }, repeats),
         seconds([&] { (void)kernels::serial::weighted_sum(values, weights); }, repeats));
  return 0;
}
