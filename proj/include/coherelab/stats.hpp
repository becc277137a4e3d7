#pragma once

// Pearson correlation with exact two-tailed p-values from the Student-t
// distribution, evaluated through the regularized incomplete beta function.

#include <cstddef>
#include <span>
#include <vector>

#include "coherelab/model.hpp"

namespace coherelab::stats {

// Two equal-length finite series. Construction validates both properties.
class PairedSeries {
 public:
  PairedSeries(std::vector<double> xs, std::vector<double> ys);

  std::span<const double> xs() const { return xs_; }
  std::span<const double> ys() const { return ys_; }
  std::size_t size() const { return xs_.size(); }

 private:
  std::vector<double> xs_;
  std::vector<double> ys_;
};

// Two-pass centered Pearson r, clamped to [-1, 1].
// Throws TooShort (n < 2) or ZeroVariance (message names "xs" or "ys").
double pearson_r(const PairedSeries& series);

// Regularized incomplete beta I_x(a, b) via a modified-Lentz continued
// fraction. `one_minus_x` is passed separately so callers that know 1-x more
// precisely than the subtraction can keep that precision.
double regularized_incomplete_beta(double a, double b, double x, double one_minus_x);
double regularized_incomplete_beta(double a, double b, double x);

// Two-tailed p-value of a Student-t statistic with `df` degrees of freedom:
// p = I_{df/(df+t^2)}(df/2, 1/2).
double t_two_tailed_p(double t, std::size_t df);

// r, p (df = n - 2) and the significance flag at `alpha`.
// |r| == 1 maps to p = 0.
CoherenceResult pearson_with_p(const PairedSeries& series, double alpha = 0.05);

// Arithmetic mean. Summation runs over the sorted values with Neumaier
// compensation so the result is independent of input order.
double mean(std::span<const double> values);

}  // namespace coherelab::stats
