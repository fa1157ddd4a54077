#include "mestereo/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "mestereo/error.hpp"
#include "mestereo/kernels.hpp"

namespace mestereo {
namespace {

void require_nonempty(const MetricInputs& m) {
  if (m.size() == 0) throw EmptyMaskError("evaluation set T is empty");
}

void require_positive(const MetricInputs& m, const char* metric) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!(m.predicted()[i] > 0.0) || !(m.ground_truth()[i] > 0.0)) {
      throw DomainError(std::string(metric) + " requires positive values on T; pixel " + std::to_string(i) +
                        " has prediction " + std::to_string(m.predicted()[i]) + " and ground truth " +
                        std::to_string(m.ground_truth()[i]));
    }
  }
}

template <typename F>
double mean_over(const MetricInputs& m, F term) {
  std::vector<double> terms(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) terms[i] = term(m.predicted()[i], m.ground_truth()[i]);
  return pairwise_sum(terms) / static_cast<double>(m.size());
}

constexpr int kSsimRadius = 5;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

std::array<double, 2 * kSsimRadius + 1> ssim_window() {
  std::array<double, 2 * kSsimRadius + 1> g{};
  double total = 0.0;
  for (int i = -kSsimRadius; i <= kSsimRadius; ++i) {
    g[static_cast<std::size_t>(i + kSsimRadius)] = std::exp(-(i * i) / (2.0 * kSsimSigma * kSsimSigma));
    total += g[static_cast<std::size_t>(i + kSsimRadius)];
  }
  for (double& v : g) v /= total;
  return g;
}

// Min-max normalization over the masked pixels; unmasked pixels become 0.
std::vector<double> unit_range(const ImageF& img, std::span<const std::uint8_t> mask) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  const auto data = img.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    lo = std::min(lo, static_cast<double>(data[i]));
    hi = std::max(hi, static_cast<double>(data[i]));
  }
  std::vector<double> out(data.size(), 0.0);
  if (!(hi > lo)) return out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    out[i] = (data[i] - lo) / (hi - lo);
  }
  return out;
}

// Separable Gaussian filtering with reflect-101 borders.
std::vector<double> gaussian_filter(const std::vector<double>& src, int h, int w,
                                    const std::array<double, 2 * kSsimRadius + 1>& g) {
  std::vector<double> tmp(src.size()), dst(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -kSsimRadius; t <= kSsimRadius; ++t) {
        acc += g[static_cast<std::size_t>(t + kSsimRadius)] *
               src[static_cast<std::size_t>(y * w + kernels::reflect101(x + t, w))];
      }
      tmp[static_cast<std::size_t>(y * w + x)] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -kSsimRadius; t <= kSsimRadius; ++t) {
        acc += g[static_cast<std::size_t>(t + kSsimRadius)] *
               tmp[static_cast<std::size_t>(kernels::reflect101(y + t, h) * w + x)];
      }
      dst[static_cast<std::size_t>(y * w + x)] = acc;
    }
  }
  return dst;
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

const char* space_name(EvalSpace s) { return s == EvalSpace::depth ? "depth" : "disparity"; }

}  // namespace

MetricInputs::MetricInputs(std::vector<double> predicted, std::vector<double> ground_truth)
    : predicted_(std::move(predicted)), ground_truth_(std::move(ground_truth)) {
  if (predicted_.size() != ground_truth_.size()) {
    throw InvalidInput("prediction and ground truth hold different pixel counts");
  }
}

MetricInputs MetricInputs::from_maps(const DisparityMap& predicted, const DisparityMap& ground_truth) {
  if (!predicted.same_extent(ground_truth)) {
    throw InvalidInput("prediction is " + std::to_string(predicted.height()) + "x" +
                       std::to_string(predicted.width()) + " but ground truth is " +
                       std::to_string(ground_truth.height()) + "x" + std::to_string(ground_truth.width()));
  }
  std::vector<double> p, g;
  for (std::size_t i = 0; i < predicted.pixel_count(); ++i) {
    if (predicted.valid_mask()[i] && ground_truth.valid_mask()[i]) {
      p.push_back(predicted.raw()[i]);
      g.push_back(ground_truth.raw()[i]);
    }
  }
  return MetricInputs(std::move(p), std::move(g));
}

void CameraCalib::validate() const {
  if (!(baseline > 0.0) || !(focal > 0.0) || !std::isfinite(baseline) || !std::isfinite(focal)) {
    throw InvalidParameter("camera baseline and focal length must be positive");
  }
}

double pairwise_sum(std::span<const double> values) noexcept {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double abs_rel(const MetricInputs& m) {
  require_nonempty(m);
  require_positive(m, "abs_rel");
  return mean_over(m, [](double p, double g) { return std::abs(g - p) / g; });
}

double sq_rel(const MetricInputs& m) {
  require_nonempty(m);
  require_positive(m, "sq_rel");
  return mean_over(m, [](double p, double g) { return (g - p) * (g - p) / g; });
}

double rmse(const MetricInputs& m) {
  require_nonempty(m);
  return std::sqrt(mean_over(m, [](double p, double g) { return (g - p) * (g - p); }));
}

double log_err(const MetricInputs& m, LogBase base) {
  require_nonempty(m);
  require_positive(m, "log_err");
  if (base == LogBase::ten) {
    return std::sqrt(mean_over(m, [](double p, double g) {
      const double d = std::log10(g) - std::log10(p);
      return d * d;
    }));
  }
  return std::sqrt(mean_over(m, [](double p, double g) {
    const double d = std::log(g) - std::log(p);
    return d * d;
  }));
}

double threshold_acc(const MetricInputs& m, double thres) {
  require_nonempty(m);
  require_positive(m, "threshold accuracy");
  return mean_over(m, [thres](double p, double g) { return std::max(g / p, p / g) < thres ? 1.0 : 0.0; });
}

double ssim(const ImageF& a, const ImageF& b, std::span<const std::uint8_t> mask) {
  if (!a.same_extent(b) || a.channels() != 1 || b.channels() != 1) {
    throw InvalidInput("ssim expects two single-channel rasters of equal extent");
  }
  if (!mask.empty() && mask.size() != a.pixel_count()) throw InvalidInput("ssim mask has the wrong size");
  const int h = a.height(), w = a.width();
  const auto g = ssim_window();
  const std::vector<double> x = unit_range(a, mask);
  const std::vector<double> y = unit_range(b, mask);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mu_x = gaussian_filter(x, h, w, g);
  const auto mu_y = gaussian_filter(y, h, w, g);
  const auto e_xx = gaussian_filter(xx, h, w, g);
  const auto e_yy = gaussian_filter(yy, h, w, g);
  const auto e_xy = gaussian_filter(xy, h, w, g);
  std::vector<double> local(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double var_x = e_xx[i] - mu_x[i] * mu_x[i];
    const double var_y = e_yy[i] - mu_y[i] * mu_y[i];
    const double cov = e_xy[i] - mu_x[i] * mu_y[i];
    const double num = (2.0 * mu_x[i] * mu_y[i] + kSsimC1) * (2.0 * cov + kSsimC2);
    const double den = (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + kSsimC1) * (var_x + var_y + kSsimC2);
    local[i] = num / den;
  }
  return pairwise_sum(local) / static_cast<double>(local.size());
}

double ssim(const ImageF& a, const ImageF& b) { return ssim(a, b, {}); }

DisparityMap depth_from_disparity(const DisparityMap& disparity, const CameraCalib& calib) {
  calib.validate();
  const double numerator = calib.baseline * calib.focal;
  std::vector<float> depth(disparity.pixel_count(), 0.0f);
  std::vector<std::uint8_t> valid(disparity.pixel_count(), 0);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double d = disparity.raw()[i];
    if (!disparity.valid_mask()[i] || !(d > 1e-6)) continue;
    const double z = numerator / d;
    if (!std::isfinite(static_cast<float>(z))) continue;
    depth[i] = static_cast<float>(z);
    valid[i] = 1;
  }
  return DisparityMap(disparity.height(), disparity.width(), std::move(depth), std::move(valid));
}

MetricReport evaluate(const DisparityMap& predicted, const DisparityMap& ground_truth,
                      const std::optional<CameraCalib>& calib, LogBase log_base) {
  if (!predicted.same_extent(ground_truth)) {
    throw InvalidInput("prediction and ground truth extents differ");
  }
  const DisparityMap pred = calib ? depth_from_disparity(predicted, *calib) : predicted;
  const DisparityMap gt = calib ? depth_from_disparity(ground_truth, *calib) : ground_truth;
  // T: both valid and strictly positive (zero disparity carries no depth).
  std::vector<std::uint8_t> both(pred.pixel_count());
  std::vector<double> p, g;
  for (std::size_t i = 0; i < both.size(); ++i) {
    both[i] = pred.valid_mask()[i] && gt.valid_mask()[i] && pred.raw()[i] > 0.0f && gt.raw()[i] > 0.0f;
    if (both[i]) {
      p.push_back(pred.raw()[i]);
      g.push_back(gt.raw()[i]);
    }
  }
  const MetricInputs m(std::move(p), std::move(g));
  require_nonempty(m);

  MetricReport r;
  r.space = calib ? EvalSpace::depth : EvalSpace::disparity;
  r.log_base = log_base;
  r.valid_pixels = m.size();
  r.abs_rel = abs_rel(m);
  r.sq_rel = sq_rel(m);
  r.rmse = rmse(m);
  r.log_err = log_err(m, log_base);
  r.sigma1 = threshold_acc(m, 1.25);
  r.sigma2 = threshold_acc(m, 1.25 * 1.25);
  r.sigma3 = threshold_acc(m, 1.25 * 1.25 * 1.25);

  r.ssim = ssim(pred.filled(), gt.filled(), both);
  return r;
}

std::string report_csv_header() {
  return "abs_rel,sq_rel,log10,rmse,sigma1,sigma2,sigma3,ssim,space,valid_pixels";
}

std::string report_csv_row(const MetricReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s,%zu", r.abs_rel,
                r.sq_rel, r.log_err, r.rmse, r.sigma1, r.sigma2, r.sigma3, r.ssim, space_name(r.space),
                r.valid_pixels);
  return buf;
}

std::string report_table(const MetricReport& r) {
  const std::string log_name = r.log_base == LogBase::ten ? "log10" : "log_e";
  std::string out;
  out += "evaluation space: " + std::string(space_name(r.space)) + " (" + std::to_string(r.valid_pixels) +
         " valid pixels)\n";
  out += "  abs_rel   sq_rel    " + log_name + "     RMSE      sigma1    sigma2    sigma3    SSIM\n";
  for (double v : {r.abs_rel, r.sq_rel, r.log_err, r.rmse, r.sigma1, r.sigma2, r.sigma3, r.ssim}) {
    out += "  " + fixed(v);
  }
  out += "\n";
  return out;
}

}  // namespace mestereo
