#include "coherelab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "coherelab/error.hpp"

namespace coherelab::stats {

namespace {

constexpr double kTolerance = 1e-15;
constexpr int kMaxIterations = 1000;
constexpr double kTiny = 1e-300;

bool constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

double plain_mean(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

// Continued fraction for I_x(a,b) (Numerical Recipes form), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kTolerance) return h;
  }
  throw Error(ErrorCode::NonConvergence,
              "incomplete beta continued fraction did not converge (a=" + std::to_string(a) +
                  ", b=" + std::to_string(b) + ", x=" + std::to_string(x) + ")");
}

}  // namespace

PairedSeries::PairedSeries(std::vector<double> xs, std::vector<double> ys)
    : xs_(std::move(xs)), ys_(std::move(ys)) {
  if (xs_.size() != ys_.size()) {
    throw Error(ErrorCode::InvalidArgument, "paired series lengths differ (" +
                                                std::to_string(xs_.size()) + " vs " +
                                                std::to_string(ys_.size()) + ")");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(xs_.begin(), xs_.end(), finite) || !std::all_of(ys_.begin(), ys_.end(), finite)) {
    throw Error(ErrorCode::InvalidArgument, "paired series contains a non-finite value");
  }
}

double pearson_r(const PairedSeries& series) {
  const auto xs = series.xs();
  const auto ys = series.ys();
  if (series.size() < 2) {
    throw Error(ErrorCode::TooShort, "correlation needs at least 2 pairs, got " +
                                         std::to_string(series.size()));
  }
  if (constant(xs)) throw Error(ErrorCode::ZeroVariance, "xs");
  if (constant(ys)) throw Error(ErrorCode::ZeroVariance, "ys");

  const double mx = plain_mean(xs);
  const double my = plain_mean(ys);
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  double norm = std::sqrt(sxx * syy);
  if (!std::isfinite(norm) || norm == 0.0) norm = std::sqrt(sxx) * std::sqrt(syy);
  const double r = sxy / norm;
  if (std::fabs(r) > 1.0 - 4.0 * std::numeric_limits<double>::epsilon()) return r > 0 ? 1.0 : -1.0;
  return r;
}

double regularized_incomplete_beta(double a, double b, double x, double one_minus_x) {
  if (!(a > 0.0 && b > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "incomplete beta needs a > 0 and b > 0");
  }
  if (x <= 0.0) return 0.0;
  if (one_minus_x <= 0.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log(one_minus_x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, one_minus_x) / b;
}

double regularized_incomplete_beta(double a, double b, double x) {
  return regularized_incomplete_beta(a, b, x, 1.0 - x);
}

double t_two_tailed_p(double t, std::size_t df) {
  if (df < 1) throw Error(ErrorCode::InvalidArgument, "t distribution needs df >= 1");
  if (!std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "t statistic must be finite");
  if (t == 0.0) return 1.0;
  const double nu = static_cast<double>(df);
  const double t2 = t * t;
  const double x = nu / (nu + t2);
  const double one_minus_x = t2 / (nu + t2);
  const double p = regularized_incomplete_beta(nu / 2.0, 0.5, x, one_minus_x);
  return std::clamp(p, 0.0, 1.0);
}

CoherenceResult pearson_with_p(const PairedSeries& series, double alpha) {
  if (series.size() < 3) {
    throw Error(ErrorCode::TooShort, "p-value needs at least 3 pairs, got " +
                                         std::to_string(series.size()));
  }
  CoherenceResult result;
  result.n = series.size();
  result.r = pearson_r(series);
  if (std::fabs(result.r) == 1.0) {
    result.p_value = 0.0;
  } else {
    const double df = static_cast<double>(result.n - 2);
    const double t = result.r * std::sqrt(df / (1.0 - result.r * result.r));
    result.p_value = t_two_tailed_p(t, result.n - 2);
  }
  result.significant = result.p_value < alpha;
  return result;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "mean of an empty sequence");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  double compensation = 0.0;
  for (double v : sorted) {
    const double t = sum + v;
    if (std::fabs(sum) >= std::fabs(v)) {
      compensation += (sum - t) + v;
    } else {
      compensation += (v - t) + sum;
    }
    sum = t;
  }
  return (sum + compensation) / static_cast<double>(sorted.size());
}

}  // namespace coherelab::stats
