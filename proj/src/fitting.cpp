#include "nmqsd/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace nmqsd {

std::string to_string(FitModel model) {
  switch (model) {
    case FitModel::Exponential: return "exp";
    case FitModel::PowerLaw: return "pow";
    case FitModel::Quadratic: return "quadratic";
  }
  return "unknown";
}

namespace {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double sse = 0.0;
};

// Running sums for ordinary least squares of v against u.
struct Sums {
  double n = 0.0, u = 0.0, v = 0.0, uu = 0.0, uv = 0.0, vv = 0.0;

  void add(double x, double y) {
    n += 1.0;
    u += x;
    v += y;
    uu += x * x;
    uv += x * y;
    vv += y * y;
  }

  Sums operator-(const Sums& o) const {
    return {n - o.n, u - o.u, v - o.v, uu - o.uu, uv - o.uv, vv - o.vv};
  }

  [[nodiscard]] LineFit line() const {
    const double sxx = uu - u * u / n;
    const double sxy = uv - u * v / n;
    const double syy = vv - v * v / n;
    LineFit f;
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = (v - f.slope * u) / n;
    f.sse = std::max(0.0, syy - f.slope * sxy);
    return f;
  }
};

void check_lengths(std::span<const double> t, std::span<const double> y, const char* who) {
  if (t.size() != y.size()) throw ConfigError(std::string(who) + ": t and y lengths differ");
}

LineFit exact_line(std::span<const double> u, std::span<const double> v) {
  // two-pass form; the prefix-sum version is only used for scanning
  const auto n = static_cast<double>(u.size());
  double mu = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    mv += v[i];
  }
  mu /= n;
  mv /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    sxx += (u[i] - mu) * (u[i] - mu);
    sxy += (u[i] - mu) * (v[i] - mv);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = mv - f.slope * mu;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double r = v[i] - f.intercept - f.slope * u[i];
    f.sse += r * r;
  }
  return f;
}

FitResult fit_log_model(std::span<const double> t, std::span<const double> y, FitWindow window,
                        FitModel model, const char* who) {
  check_lengths(t, y, who);
  if (!(window.hi >= window.lo)) throw ConfigError(std::string(who) + ": window hi < lo");
  std::vector<double> u, v;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < window.lo || t[i] > window.hi) continue;
    if (!(y[i] > 0.0)) {
      throw ConfigError(std::string(who) + ": non-positive value " + std::to_string(y[i]) +
                        " at t=" + std::to_string(t[i]));
    }
    if (model == FitModel::PowerLaw && !(t[i] > 0.0)) {
      throw ConfigError(std::string(who) + ": power-law window must have t > 0");
    }
    u.push_back(model == FitModel::PowerLaw ? std::log(t[i]) : t[i]);
    v.push_back(std::log(y[i]));
  }
  if (static_cast<int>(u.size()) < kMinFitPoints) {
    throw ConfigError(std::string(who) + ": window holds " + std::to_string(u.size()) +
                      " points, need at least " + std::to_string(kMinFitPoints));
  }
  const LineFit f = exact_line(u, v);
  FitResult r;
  r.model = model;
  r.exponent = -f.slope;
  r.prefactor = std::exp(f.intercept);
  r.window = window;
  r.sse = f.sse;
  r.n_points = static_cast<int>(u.size());
  return r;
}

}  // namespace

FitResult fit_exponential(std::span<const double> t, std::span<const double> y, FitWindow window) {
  return fit_log_model(t, y, window, FitModel::Exponential, "fit_exponential");
}

FitResult fit_powerlaw(std::span<const double> t, std::span<const double> y, FitWindow window) {
  return fit_log_model(t, y, window, FitModel::PowerLaw, "fit_powerlaw");
}

std::vector<double> moving_average(std::span<const double> y, int width) {
  if (width < 1) throw ConfigError("moving_average: width must be >= 1");
  const auto n = static_cast<long>(y.size());
  const long half = width / 2;
  std::vector<double> out(y.size());
  for (long i = 0; i < n; ++i) {
    // shrink symmetrically at the ends so linear trends pass through unchanged
    const long h = std::min({half, i, n - 1 - i});
    const long lo = i - h;
    const long hi = i + h;
    double s = 0.0;
    for (long j = lo; j <= hi; ++j) s += y[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

namespace {

class SegmentScanner {
 public:
  SegmentScanner(std::span<const double> t, std::span<const double> smooth,
                 std::span<const double> raw, const SegmentationOptions& opt)
      : n_(t.size()) {
    exp_.resize(n_ + 1);
    pow_.resize(n_ + 1);
    for (std::size_t i = 0; i < n_; ++i) {
      const double v = std::log(smooth[i]);
      exp_[i + 1] = exp_[i];
      exp_[i + 1].add(t[i], v);
      pow_[i + 1] = pow_[i];
      if (t[i] > 0.0) pow_[i + 1].add(std::log(t[i]), v);
    }
    first_positive_t_ = n_;
    for (std::size_t i = 0; i < n_; ++i) {
      if (t[i] > 0.0) {
        first_positive_t_ = i;
        break;
      }
    }
    // next_noisy_[i]: first index >= i whose local relative variance is too large
    const long half = opt.variance_window / 2;
    const auto ln = static_cast<long>(n_);
    std::vector<bool> noisy(n_, false);
    for (long i = 0; i < ln; ++i) {
      const long lo = std::max(0L, i - half);
      const long hi = std::min(ln - 1, i + half);
      double m = 0.0, m2 = 0.0;
      for (long j = lo; j <= hi; ++j) {
        const double v = raw[static_cast<std::size_t>(j)];
        m += v;
        m2 += v * v;
      }
      const double k = static_cast<double>(hi - lo + 1);
      m /= k;
      const double var = std::max(0.0, m2 / k - m * m);
      noisy[static_cast<std::size_t>(i)] = !(var < opt.max_local_relative_variance * m * m);
    }
    next_noisy_.assign(n_ + 1, n_);
    for (std::size_t i = n_; i-- > 0;) next_noisy_[i] = noisy[i] ? i : next_noisy_[i + 1];
  }

  // sse of model over samples [a, b); infinity if the model is not admissible there
  [[nodiscard]] double sse(FitModel model, std::size_t a, std::size_t b) const {
    if (model == FitModel::PowerLaw) {
      if (a < first_positive_t_ || next_noisy_[a] < b) return kInf;
      return (pow_[b] - pow_[a]).line().sse;
    }
    return (exp_[b] - exp_[a]).line().sse;
  }

  static constexpr double kInf = std::numeric_limits<double>::infinity();

 private:
  std::size_t n_;
  std::vector<Sums> exp_, pow_;
  std::size_t first_positive_t_ = 0;
  std::vector<std::size_t> next_noisy_;
};

struct Candidate {
  std::vector<std::size_t> cuts;  // segment starts after the first
  std::vector<FitModel> models;
  double sse = SegmentScanner::kInf;
};

std::vector<FitModel> models_for(const std::vector<FitModel>& seq, int k) {
  if (k == 1) return {seq.front()};
  std::vector<FitModel> m(seq.begin(), seq.begin() + (k - 1));
  m.push_back(seq.back());
  return m;
}

Candidate best_with(const SegmentScanner& scan, std::size_t n, std::size_t min_len,
                    const std::vector<FitModel>& models) {
  Candidate best;
  best.models = models;
  const std::size_t k = models.size();
  if (n < k * min_len) return best;
  if (k == 1) {
    best.sse = scan.sse(models[0], 0, n);
    return best;
  }
  if (k == 2) {
    for (std::size_t a = min_len; a + min_len <= n; ++a) {
      const double s = scan.sse(models[0], 0, a) + scan.sse(models[1], a, n);
      if (s < best.sse) {
        best.sse = s;
        best.cuts = {a};
      }
    }
    return best;
  }
  for (std::size_t a = min_len; a + 2 * min_len <= n; ++a) {
    const double s0 = scan.sse(models[0], 0, a);
    if (s0 == SegmentScanner::kInf) continue;
    for (std::size_t b = a + min_len; b + min_len <= n; ++b) {
      const double s = s0 + scan.sse(models[1], a, b) + scan.sse(models[2], b, n);
      if (s < best.sse) {
        best.sse = s;
        best.cuts = {a, b};
      }
    }
  }
  return best;
}

}  // namespace

RegimeSegmentation detect_regimes(std::span<const double> t, std::span<const double> y,
                                  int max_segments, const std::vector<FitModel>& model_sequence,
                                  const SegmentationOptions& options) {
  check_lengths(t, y, "detect_regimes");
  if (max_segments < 1 || max_segments > 3) {
    throw ConfigError("detect_regimes: max_segments must be 1, 2 or 3");
  }
  if (model_sequence.empty()) throw ConfigError("detect_regimes: empty model sequence");
  for (FitModel m : model_sequence) {
    if (m == FitModel::Quadratic) throw ConfigError("detect_regimes: quadratic is not a decay model");
  }
  if (max_segments > 1 && static_cast<int>(model_sequence.size()) < max_segments) {
    throw ConfigError("detect_regimes: model sequence shorter than max_segments");
  }
  if (options.min_segment_samples < kMinFitPoints) {
    throw ConfigError("detect_regimes: min_segment_samples below the fit minimum");
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0)) throw ConfigError("detect_regimes: series must be strictly positive");
    if (i > 0 && !(t[i] > t[i - 1])) throw ConfigError("detect_regimes: t must increase");
  }
  const std::size_t n = t.size();
  const auto min_len = static_cast<std::size_t>(options.min_segment_samples);
  if (n < min_len) {
    throw ConfigError("detect_regimes: series has " + std::to_string(n) + " samples, need " +
                      std::to_string(min_len));
  }

  const std::vector<double> smooth = moving_average(y, options.smoothing_width);
  const SegmentScanner scan(t, smooth, y, options);

  Candidate chosen = best_with(scan, n, min_len, models_for(model_sequence, 1));
  if (chosen.sse == SegmentScanner::kInf) {
    throw ConfigError("detect_regimes: " + to_string(model_sequence.front()) +
                      " is not admissible on the whole series");
  }
  // prefix-sum sse values carry cancellation noise; ignore gains below it
  double mean = 0.0, spread = 0.0;
  for (double v : smooth) mean += std::log(v);
  mean /= static_cast<double>(n);
  for (double v : smooth) spread += (std::log(v) - mean) * (std::log(v) - mean);
  const double floor = 1e-9 * spread;
  bool improved = false;
  for (int k = 2; k <= max_segments; ++k) {
    const Candidate c = best_with(scan, n, min_len, models_for(model_sequence, k));
    const double gain = chosen.sse - c.sse;
    if (gain >= options.min_improvement * chosen.sse && gain > floor) {
      chosen = c;
      improved = true;
    } else {
      break;
    }
  }

  RegimeSegmentation out;
  out.single_segment = !improved;
  std::vector<std::size_t> starts{0};
  starts.insert(starts.end(), chosen.cuts.begin(), chosen.cuts.end());
  for (std::size_t s = 0; s < starts.size(); ++s) {
    const std::size_t a = starts[s];
    const std::size_t b = s + 1 < starts.size() ? starts[s + 1] : n;
    if (s > 0) out.breakpoints.push_back(t[a]);
    const FitWindow w{t[a], t[b - 1]};
    out.segments.push_back(chosen.models[s] == FitModel::PowerLaw ? fit_powerlaw(t, y, w)
                                                                  : fit_exponential(t, y, w));
  }
  return out;
}

std::vector<FitResult> fit_exponent_scaling(std::span<const double> n, std::span<const double> alpha,
                                            ScalingModel model) {
  if (n.size() != alpha.size()) throw ConfigError("fit_exponent_scaling: length mismatch");
  std::vector<std::size_t> order(n.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return n[a] < n[b]; });
  std::vector<double> x, a;
  for (std::size_t i : order) {
    x.push_back(n[i]);
    a.push_back(alpha[i]);
  }

  if (model == ScalingModel::Quadratic) {
    if (x.size() < 3) throw ConfigError("fit_exponent_scaling: quadratic needs >= 3 points");
    RealMatrix design(static_cast<Eigen::Index>(x.size()), 3);
    RealVector rhs(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      design(r, 0) = x[i] * x[i];
      design(r, 1) = x[i];
      design(r, 2) = 1.0;
      rhs[r] = a[i];
    }
    const RealVector coef = design.colPivHouseholderQr().solve(rhs);
    FitResult f;
    f.model = FitModel::Quadratic;
    f.coefficients = {coef[0], coef[1], coef[2]};
    f.exponent = coef[0];
    f.prefactor = coef[2];
    f.window = {x.front(), x.back()};
    f.sse = (design * coef - rhs).squaredNorm();
    f.n_points = static_cast<int>(x.size());
    return {f};
  }

  const std::size_t side = kMinScalingPointsPerSide;
  if (x.size() < 2 * side) {
    throw ConfigError("fit_exponent_scaling: two power laws need at least " +
                      std::to_string(2 * side) + " points, got " + std::to_string(x.size()));
  }
  std::vector<double> lx, la;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(a[i] > 0.0)) {
      throw ConfigError("fit_exponent_scaling: N and alpha must be positive for power laws");
    }
    lx.push_back(std::log(x[i]));
    la.push_back(std::log(a[i]));
  }
  const std::span<const double> slx(lx), sla(la);
  double best = SegmentScanner::kInf;
  std::size_t split = side;
  for (std::size_t s = side; s + side <= x.size(); ++s) {
    const double e = exact_line(slx.first(s), sla.first(s)).sse +
                     exact_line(slx.subspan(s), sla.subspan(s)).sse;
    if (e < best) {
      best = e;
      split = s;
    }
  }
  std::vector<FitResult> out;
  for (int part = 0; part < 2; ++part) {
    const std::size_t lo = part == 0 ? 0 : split;
    const std::size_t hi = part == 0 ? split : x.size();
    const LineFit f = exact_line(slx.subspan(lo, hi - lo), sla.subspan(lo, hi - lo));
    FitResult r;
    r.model = FitModel::PowerLaw;
    r.exponent = f.slope;
    r.prefactor = std::exp(f.intercept);
    r.window = {x[lo], x[hi - 1]};
    r.sse = f.sse;
    r.n_points = static_cast<int>(hi - lo);
    out.push_back(r);
  }
  return out;
}

}  // namespace nmqsd
