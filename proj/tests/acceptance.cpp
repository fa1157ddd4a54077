// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <ctime>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "mestereo/duonet.hpp"
#include "mestereo/fuse.hpp"
#include "mestereo/metrics.hpp"
#include "mestereo/pyramid.hpp"
#include "mestereo/quality.hpp"

using namespace mestereo;

namespace {

// Tolerances and budgets.
constexpr double kRoundTripTol = 1e-5;
constexpr double kRoundTripCpuSeconds = 10.0;
constexpr double kPartitionTol = 1e-6;
constexpr double kPyramidPartitionTol = 1e-5;
constexpr double kConsensusRelTol = 1e-4;
constexpr double kSeamRatio = 0.25;
constexpr double kSelectiveSlack = 0.10;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradCpuSeconds = 60.0;
constexpr double kLossRatio = 0.5;
constexpr double kTrainCpuSeconds = 300.0;
constexpr double kMetricTol = 1e-10;
constexpr double kDepthTol = 1e-9;
constexpr double kExposednessTol = 1e-9;

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %2d %-28s %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

ImageF random_raster(int h, int w, std::mt19937_64& rng, float lo = 0.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
  for (float& x : v) x = u(rng);
  return ImageF(h, w, 1, std::move(v));
}

DisparityMap as_disparity(const ImageF& img) {
  return DisparityMap(img.height(), img.width(), std::vector<float>(img.data().begin(), img.data().end()));
}

void pyramid_round_trip() {
  const double t0 = cpu_seconds();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> hd(5, 257), wd(5, 129);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    int h = hd(rng), w = wd(rng);
    if (i == 0) h = 7, w = 5;
    if (i == 1) h = 257, w = 129;
    const ImageF r = random_raster(h, w, rng, -10.0f, 10.0f);
    const ImageF back = collapse(laplacian_pyramid(r, max_levels(h, w)));
    for (std::size_t k = 0; k < r.size(); ++k) worst = std::max(worst, double(std::abs(back.data()[k] - r.data()[k])));
  }
  const double t = cpu_seconds() - t0;
  report(1, "pyramid round trip", worst < kRoundTripTol && t < kRoundTripCpuSeconds,
         fmt("max err %.3g (< %.0e), %.2f s CPU", worst, kRoundTripTol, t));
}

void partition_of_unity() {
  std::mt19937_64 rng(202);
  double worst = 0.0, worst_pyr = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int h = 33 + trial, w = 47 - trial;
    std::vector<ImageF> raw;
    for (int k = 0; k < 4; ++k) {
      ImageF r = random_raster(h, w, rng);
      // A block of pixels with zero weight in every map.
      for (int y = 4; y < 9; ++y) {
        for (int x = 3; x < 11; ++x) r.at(y, x) = 0.0f;
      }
      raw.push_back(std::move(r));
    }
    const auto norm = normalize_weights(raw);
    for (std::size_t i = 0; i < norm[0].size(); ++i) {
      double s = 0.0;
      for (const ImageF& n : norm) s += n.data()[i];
      worst = std::max(worst, std::abs(s - 1.0));
    }
    std::vector<Pyramid> pyrs;
    for (const ImageF& n : norm) pyrs.push_back(gaussian_pyramid(n, max_levels(h, w)));
    for (int l = 0; l < pyrs[0].level_count(); ++l) {
      for (std::size_t i = 0; i < pyrs[0].level(l).size(); ++i) {
        double s = 0.0;
        for (const Pyramid& p : pyrs) s += p.level(l).data()[i];
        worst_pyr = std::max(worst_pyr, std::abs(s - 1.0));
      }
    }
  }
  report(2, "weight partition of unity", worst <= kPartitionTol && worst_pyr <= kPyramidPartitionTol,
         fmt("max |sum-1| %.3g (<= %.0e), ", worst, kPartitionTol) +
             fmt("pyramid levels %.3g (<= %.0e)", worst_pyr, kPyramidPartitionTol));
}

void consensus_identity() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  bool bit_exact = true;
  for (int trial = 0; trial < 3; ++trial) {
    const int h = 40 + 7 * trial, w = 31 + 5 * trial;
    const DisparityMap d = as_disparity(random_raster(h, w, rng, 5.0f, 60.0f));
    ExposureStack s;
    for (int k = 0; k < 3; ++k) {
      s.left_images.push_back(random_raster(h, w, rng));
      s.disparities.push_back(d);
    }
    const DisparityMap out = fuse_disparities(s, QualityConfig{});
    for (std::size_t i = 0; i < d.pixel_count(); ++i) {
      worst = std::max(worst, std::abs(double(out.raw()[i]) - d.raw()[i]) / std::abs(double(d.raw()[i])));
    }

    ExposureStack mixed;
    for (int k = 0; k < 3; ++k) {
      mixed.left_images.push_back(random_raster(h, w, rng));
      mixed.disparities.push_back(as_disparity(random_raster(h, w, rng, 5.0f, 60.0f)));
    }
    const DisparityMap one = fuse_disparities(mixed, QualityConfig{}, 1);
    const DisparityMap naive = fuse_naive(mixed, QualityConfig{});
    for (std::size_t i = 0; i < one.pixel_count(); ++i) bit_exact = bit_exact && one.raw()[i] == naive.raw()[i];
  }
  report(3, "fusion consensus identity", worst <= kConsensusRelTol && bit_exact,
         fmt("max rel err %.3g (<= %.0e), 1-level == naive: ", worst, kConsensusRelTol) + (bit_exact ? "yes" : "no"));
}

// Two exposures whose well-exposed halves meet at a vertical seam, over two
// parallel disparity ramps. Contrast is switched off so the weights are a pure step.
void seam_property() {
  const int h = 64, w = 64, seam = w / 2;
  ExposureStack s;
  ImageF a(h, w), b(h, w);
  std::vector<float> da(static_cast<std::size_t>(h * w)), db(da.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      a.at(y, x) = x < seam ? 0.5f : 1.0f;
      b.at(y, x) = x < seam ? 1.0f : 0.5f;
      const auto i = static_cast<std::size_t>(y * w + x);
      da[i] = 10.0f + 0.25f * static_cast<float>(x) + 0.1f * static_cast<float>(y);
      db[i] = da[i] + 20.0f;
    }
  }
  s.left_images = {a, b};
  s.disparities = {DisparityMap(h, w, da), DisparityMap(h, w, db)};
  QualityConfig cfg;
  cfg.contrast_exponent = 0.0;
  const DisparityMap pyr = fuse_disparities(s, cfg);
  const DisparityMap naive = fuse_naive(s, cfg);
  const auto max_step = [&](const DisparityMap& m) {
    double worst = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x + 1 < w; ++x) worst = std::max(worst, std::abs(double(m.at(y, x + 1)) - m.at(y, x)));
    }
    return worst;
  };
  const double p = max_step(pyr), n = max_step(naive);
  report(4, "seam suppression", p < kSeamRatio * n,
         fmt("max step pyramid %.4g vs naive %.4g, ", p, n) + fmt("ratio %.3f (< %.2f)", p / n, kSeamRatio));
}

// Each exposure is well exposed on one half and blown out on the other; its
// disparity is exact where it is well exposed and noisy elsewhere.
void selective_fusion() {
  const int h = 64, w = 64, seam = w / 2;
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<float> texture(-0.05f, 0.05f), noise(-16.0f, 16.0f);
  std::vector<float> gt(static_cast<std::size_t>(h * w)), da(gt.size()), db(gt.size());
  ImageF a(h, w), b(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y * w + x);
      gt[i] = 30.0f + 15.0f * static_cast<float>(y) / static_cast<float>(h) +
              5.0f * std::sin(0.3f * static_cast<float>(x));
      const bool left = x < seam;
      a.at(y, x) = left ? 0.5f + texture(rng) : 0.95f + 0.5f * texture(rng);
      b.at(y, x) = left ? 0.95f + 0.5f * texture(rng) : 0.5f + texture(rng);
      da[i] = left ? gt[i] : gt[i] + noise(rng);
      db[i] = left ? gt[i] + noise(rng) : gt[i];
    }
  }
  ExposureStack s;
  s.left_images = {a, b};
  s.disparities = {DisparityMap(h, w, da), DisparityMap(h, w, db)};
  QualityConfig cfg;
  cfg.contrast_exponent = 0.0;
  cfg.exposedness_exponent = 1.0;
  const DisparityMap out = fuse_disparities(s, cfg);

  bool ok = true;
  std::string detail;
  for (int half = 0; half < 2; ++half) {
    double err_f = 0.0, err_mean = 0.0, err_a = 0.0, err_b = 0.0, lo = 1e30, hi = -1e30;
    int n = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = half * seam; x < (half + 1) * seam; ++x) {
        const auto i = static_cast<std::size_t>(y * w + x);
        err_f += std::abs(double(out.raw()[i]) - gt[i]);
        err_mean += std::abs(0.5 * (double(da[i]) + db[i]) - gt[i]);
        err_a += std::abs(double(da[i]) - gt[i]);
        err_b += std::abs(double(db[i]) - gt[i]);
        lo = std::min(lo, double(gt[i]));
        hi = std::max(hi, double(gt[i]));
        ++n;
      }
    }
    err_f /= n;
    const double best = std::min(err_a, err_b) / n;
    const double bound = best + kSelectiveSlack * (hi - lo);
    ok = ok && err_f <= bound;
    detail += (half == 0 ? "left" : "right") + fmt(" half err %.3f (<= %.3f, plain average %.3f) ", err_f, bound, err_mean / n);
  }
  report(5, "selective fusion", ok, detail);
}

void gradient_check() {
  const double t0 = cpu_seconds();
  double worst = 0.0;
  std::size_t unresolved = 0, checked = 0;
  std::string where;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto net = duonet::DualNet<double>::init(duonet::NetConfig{}, seed);
    const auto sample = duonet::make_stereogram<double>(seed + 100, 16, 16, 3);
    const gradcheck::Report r = gradcheck::check(net, sample);
    checked += r.checked;
    unresolved += r.unresolved;
    if (r.max_rel > worst) {
      worst = r.max_rel;
      where = r.worst;
    }
  }
  const double t = cpu_seconds() - t0;
  report(6, "gradient check (float64)", worst < kGradRelTol && unresolved == 0 && t < kGradCpuSeconds,
         fmt("max rel err %.3g (< %.0e) over %.0f params", worst, kGradRelTol, double(checked)) + " at " + where +
             fmt(", %.1f s CPU", t));
}

void toy_training() {
  const double t0 = cpu_seconds();
  const std::uint64_t seed = 1;
  const auto data = duonet::make_dataset<double>(seed, 200, 32, 32, 4);
  auto net = duonet::DualNet<double>::init(duonet::NetConfig{}, seed);
  duonet::TrainOptions opt;
  opt.epochs = 30;
  opt.learning_rate = 1e-2;
  opt.shuffle_seed = seed;
  const duonet::TrainResult r = duonet::train_toy(net, data, opt);

  double final_loss = 0.0, shifted = 0.0, still = 0.0;
  std::size_t n_shifted = 0, n_still = 0;
  for (const auto& s : data) {
    const auto pred = duonet::forward(net, s.left_clue, s.right_clue);
    final_loss += duonet::masked_l1(pred, s.gt_disparity, s.valid);
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
      if (s.shifted[i]) {
        shifted += pred.data[i];
        ++n_shifted;
      } else {
        still += pred.data[i];
        ++n_still;
      }
    }
  }
  final_loss /= static_cast<double>(data.size());
  shifted /= static_cast<double>(n_shifted);
  still /= static_cast<double>(n_still);
  const double t = cpu_seconds() - t0;
  report(7, "toy training", final_loss <= kLossRatio * r.initial_loss && shifted > still && t < kTrainCpuSeconds,
         fmt("loss %.4f -> %.4f (ratio %.3f), ", r.initial_loss, final_loss, final_loss / r.initial_loss) +
             fmt("mean pred shifted %.3f vs static %.3f, ", shifted, still) + fmt("%.1f s CPU", t));
}

void metric_oracle() {
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> u(0.5, 80.0);
  double worst = 0.0;
  bool thresholds_exact = true;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> p(16), g(16);
    for (std::size_t i = 0; i < 16; ++i) {
      p[i] = static_cast<float>(u(rng));
      g[i] = static_cast<float>(u(rng));
    }
    const MetricReport r = evaluate(DisparityMap(4, 4, p), DisparityMap(4, 4, g));
    long double ar = 0, sr = 0, se = 0, le = 0, s1 = 0, s2 = 0, s3 = 0;
    for (std::size_t i = 0; i < 16; ++i) {
      const long double y = g[i], ys = p[i];
      ar += std::fabs(y - ys) / y;
      sr += (y - ys) * (y - ys) / y;
      se += (y - ys) * (y - ys);
      le += (std::log10(y) - std::log10(ys)) * (std::log10(y) - std::log10(ys));
      const long double q = std::max(y / ys, ys / y);
      s1 += q < 1.25L;
      s2 += q < 1.5625L;
      s3 += q < 1.953125L;
    }
    worst = std::max({worst, std::abs(r.abs_rel - double(ar / 16)), std::abs(r.sq_rel - double(sr / 16)),
                      std::abs(r.rmse - double(std::sqrt(se / 16))), std::abs(r.log_err - double(std::sqrt(le / 16)))});
    thresholds_exact = thresholds_exact && r.sigma1 == double(s1 / 16) && r.sigma2 == double(s2 / 16) &&
                       r.sigma3 == double(s3 / 16);
  }
  const MetricInputs twice({2.0}, {1.0}), near({1.3}, {1.0});
  const bool hand = abs_rel(twice) == 1.0 && sq_rel(twice) == 1.0 && rmse(twice) == 1.0 &&
                    std::abs(log_err(twice) - std::log10(2.0)) < 1e-15 && threshold_acc(twice, 1.25) == 0.0 &&
                    threshold_acc(twice, 1.5625) == 0.0 && threshold_acc(twice, 1.953125) == 0.0 &&
                    threshold_acc(near, 1.25) == 0.0 && threshold_acc(near, 1.5625) == 1.0 &&
                    threshold_acc(near, 1.953125) == 1.0;
  bool nested = true;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(64), g(64);
    for (std::size_t i = 0; i < 64; ++i) {
      p[i] = u(rng);
      g[i] = u(rng);
    }
    const MetricInputs m(p, g);
    const double a = threshold_acc(m, 1.25), b = threshold_acc(m, 1.5625), c = threshold_acc(m, 1.953125);
    nested = nested && a <= b && b <= c;
  }
  report(8, "metric oracle", worst <= kMetricTol && thresholds_exact && hand && nested,
         fmt("max err %.3g (<= %.0e), ", worst, kMetricTol) + "thresholds exact: " + (thresholds_exact ? "yes" : "no") +
             ", hand cases: " + (hand ? "yes" : "no") + ", nested: " + (nested ? "yes" : "no"));
}

void depth_conversion() {
  const double exact = 0.12 * 700.0 / 84.0;
  const DisparityMap z = depth_from_disparity(DisparityMap(1, 2, {84.0f, 0.0f}), CameraCalib{0.12, 700.0});
  const bool zero_ok = !z.valid_mask()[1] && std::isfinite(z.raw()[1]);
  const bool ok = std::abs(exact - 1.0) <= kDepthTol && std::abs(double(z.raw()[0]) - 1.0) <= kDepthTol && zero_ok;
  report(9, "depth conversion", ok,
         fmt("depth %.12f m (+-%.0e), zero disparity invalid and finite: ", z.raw()[0], kDepthTol) +
             (zero_ok ? "yes" : "no"));
}

void exposedness_spot_values() {
  const double e5 = well_exposedness(0.5, 0.2), e7 = well_exposedness(0.7, 0.2);
  const bool ok = std::abs(e5 - 1.0) <= kExposednessTol && std::abs(e7 - std::exp(-0.5)) <= kExposednessTol;
  report(10, "well-exposedness spot values", ok, fmt("E(0.5) = %.12f, E(0.7) = %.12f", e5, e7));
}

}  // namespace

int main() {
  using Check = void (*)();
  const Check checks[] = {pyramid_round_trip, partition_of_unity, consensus_identity, seam_property,
                          selective_fusion,   gradient_check,     toy_training,       metric_oracle,
                          depth_conversion,   exposedness_spot_values};
  int id = 0;
  for (Check c : checks) {
    ++id;
    try {
      c();
    } catch (const std::exception& e) {
      report(id, "(threw)", false, e.what());
    }
  }
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
