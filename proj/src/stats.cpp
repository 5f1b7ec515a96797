#include "sea/stats.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sea {

namespace {

/// Lentz evaluation of the incomplete beta continued fraction; converges for x < (a+1)/(a+b+2).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
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
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("incomplete_beta: a and b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("incomplete_beta: x must lie in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw std::domain_error("student_t: df must be > 0");
  if (std::isnan(t)) throw std::domain_error("student_t: t is NaN");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

double student_t_cdf(double t, double df) {
  const double tail = 0.5 * student_t_two_sided(t, df);
  return t >= 0.0 ? 1.0 - tail : tail;
}

ScoreSummary summarize(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("summarize: no scores");
  ScoreSummary s;
  s.n = static_cast<int>(scores.size());
  s.scores.assign(scores.begin(), scores.end());
  s.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / s.n;
  if (s.n == 1) {
    s.std_undefined = true;
    return s;
  }
  double ss = 0.0;
  for (double v : scores) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / (s.n - 1));
  return s;
}

ScoreSummary summary_from_stats(double mean, double std, int n) {
  if (n < 1) throw std::invalid_argument("summary_from_stats: n must be >= 1");
  if (!(std >= 0.0) || !std::isfinite(std))
    throw std::invalid_argument("summary_from_stats: std must be finite and >= 0");
  ScoreSummary s;
  s.n = n;
  s.mean = mean;
  s.std = std;
  s.std_undefined = n == 1;
  return s;
}

WelchResult welch_t_test(const ScoreSummary& a, const ScoreSummary& b) {
  if (a.n < 2 || b.n < 2) throw std::invalid_argument("welch_t_test: both samples need n >= 2");
  if (!std::isfinite(a.std) || !std::isfinite(b.std))
    throw std::invalid_argument("welch_t_test: standard deviations must be finite");
  const double va = a.std * a.std / a.n;
  const double vb = b.std * b.std / b.n;
  const double diff = a.mean - b.mean;
  WelchResult r;
  if (va + vb == 0.0) {
    r.df = double(a.n + b.n - 2);
    if (diff == 0.0) return r;
    r.t = diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = diff / std::sqrt(va + vb);
  // Welch-Satterthwaite reduces to the pooled 2n-2 for equal n and variance.
  r.df = a.n == b.n && va == vb
             ? double(2 * a.n - 2)
             : (va + vb) * (va + vb) / (va * va / (a.n - 1) + vb * vb / (b.n - 1));
  r.p = student_t_two_sided(r.t, r.df);
  return r;
}

}  // namespace sea
