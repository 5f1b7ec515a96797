#pragma once

#include <span>
#include <vector>

namespace sea {

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
double incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with `df` > 0 degrees of freedom.
double student_t_cdf(double t, double df);

/// Two-sided tail probability P(|T| >= |t|).
double student_t_two_sided(double t, double df);

struct ScoreSummary {
  int n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample std; 0 when n == 1
  bool std_undefined = false;  // set when n == 1
  std::vector<double> scores;
};

/// Mean and n-1 standard deviation of the scores, in order.
ScoreSummary summarize(std::span<const double> scores);

/// Summary from published statistics (no per-sample scores).
ScoreSummary summary_from_stats(double mean, double std, int n);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

/// Welch's unequal-variance t-test. Both n must be >= 2. With both variances
/// zero, p is 1 for equal means and 0 otherwise (t and df are then 0 or +-inf).
WelchResult welch_t_test(const ScoreSummary& a, const ScoreSummary& b);

}  // namespace sea
