#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mestereo/image.hpp"

namespace mestereo {

/// Paired samples over the evaluation set T.
///
/// Only pixels where both prediction and ground truth are valid enter T.
/// Ratio and log metrics additionally require positive values on T.
class MetricInputs {
 public:
  MetricInputs(std::vector<double> predicted, std::vector<double> ground_truth);
  /// Gathers T from two masked rasters; throws InvalidInput on extent mismatch.
  static MetricInputs from_maps(const DisparityMap& predicted, const DisparityMap& ground_truth);

  std::span<const double> predicted() const noexcept { return predicted_; }
  std::span<const double> ground_truth() const noexcept { return ground_truth_; }
  std::size_t size() const noexcept { return predicted_.size(); }

 private:
  std::vector<double> predicted_;
  std::vector<double> ground_truth_;
};

enum class LogBase { ten, natural };
enum class EvalSpace { disparity, depth };

struct CameraCalib {
  double baseline = 0.0;  ///< metres (depth comes out in the same unit)
  double focal = 0.0;     ///< pixels

  void validate() const;
};

struct MetricReport {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double log_err = 0.0;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double sigma3 = 0.0;
  double ssim = 0.0;
  EvalSpace space = EvalSpace::disparity;
  LogBase log_base = LogBase::ten;
  std::size_t valid_pixels = 0;
};

/// Deterministic pairwise summation.
double pairwise_sum(std::span<const double> values) noexcept;

/// mean |y - y*| / y over T, y = ground truth.
double abs_rel(const MetricInputs& m);
/// mean (y - y*)^2 / y over T.
double sq_rel(const MetricInputs& m);
double rmse(const MetricInputs& m);
/// sqrt(mean (log y - log y*)^2), base 10 by default.
double log_err(const MetricInputs& m, LogBase base = LogBase::ten);
/// Fraction of T with max(y/y*, y*/y) < thres.
double threshold_acc(const MetricInputs& m, double thres);

/// Mean local SSIM (11x11 Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03).
/// Each input is min-max normalized to [0,1] first.
double ssim(const ImageF& a, const ImageF& b);

/// SSIM restricted to a mask: both rasters are normalized over the masked
/// pixels and pixels outside the mask are set to 0 before windowing.
double ssim(const ImageF& a, const ImageF& b, std::span<const std::uint8_t> mask);

/// depth = baseline * focal / disparity. Disparities <= 1e-6 and invalid
/// inputs give invalid output pixels holding 0.
DisparityMap depth_from_disparity(const DisparityMap& disparity, const CameraCalib& calib);

/// All eight metrics on the intersection of the two masks, in depth space
/// when `calib` is given and disparity space otherwise.
MetricReport evaluate(const DisparityMap& predicted, const DisparityMap& ground_truth,
                      const std::optional<CameraCalib>& calib = std::nullopt,
                      LogBase log_base = LogBase::ten);

/// Column order: abs_rel, sq_rel, log10, rmse, sigma1..3, ssim, space, valid_pixels.
std::string report_csv_header();
std::string report_csv_row(const MetricReport& r);
std::string report_table(const MetricReport& r);

}  // namespace mestereo
