#pragma once

#include <span>
#include <string>
#include <vector>

#include "nmqsd/common.hpp"

namespace nmqsd {

enum class FitModel { Exponential, PowerLaw, Quadratic };

std::string to_string(FitModel model);

struct FitWindow {
  double lo = 0.0;
  double hi = 0.0;
};

/// Exponential fits y = A exp(-exponent t); power laws y = A t^(-exponent).
/// Quadratic fits store (a, b, c) of a x^2 + b x + c in `coefficients`.
struct FitResult {
  FitModel model = FitModel::Exponential;
  double exponent = 0.0;
  double prefactor = 0.0;
  FitWindow window{};
  double sse = 0.0;  // log space for exponential / power-law fits
  int n_points = 0;
  std::vector<double> coefficients;
};

inline constexpr int kMinFitPoints = 8;

FitResult fit_exponential(std::span<const double> t, std::span<const double> y, FitWindow window);
FitResult fit_powerlaw(std::span<const double> t, std::span<const double> y, FitWindow window);

struct RegimeSegmentation {
  std::vector<double> breakpoints;
  std::vector<FitResult> segments;
  /// Set when no multi-segment fit improved the single-segment sse by >= 5%.
  bool single_segment = false;
};

struct SegmentationOptions {
  int min_segment_samples = 10;
  int smoothing_width = 5;
  double min_improvement = 0.05;
  /// Power-law segments must stay below this local relative variance.
  double max_local_relative_variance = 0.1;
  int variance_window = 11;
};

/// Scans breakpoints on the sample grid. A k-segment candidate uses the
/// models {seq[0], ..., seq[k-2], seq.back()}; k = 1 uses seq[0] alone.
RegimeSegmentation detect_regimes(std::span<const double> t, std::span<const double> y,
                                  int max_segments, const std::vector<FitModel>& model_sequence,
                                  const SegmentationOptions& options = {});

/// Centered moving average, window shrinking at the edges.
std::vector<double> moving_average(std::span<const double> y, int width);

enum class ScalingModel { TwoPowerLaws, Quadratic };

inline constexpr int kMinScalingPointsPerSide = 3;

/// Fits exponent-vs-N laws. TwoPowerLaws returns the small-N and large-N
/// power laws (exponent = gamma in alpha ~ N^gamma); Quadratic returns one fit.
std::vector<FitResult> fit_exponent_scaling(std::span<const double> n, std::span<const double> alpha,
                                            ScalingModel model);

}  // namespace nmqsd
