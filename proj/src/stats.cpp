#include "fairlab/stats.hpp"

#include <cmath>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "fairlab/error.hpp"

namespace fairlab {

namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(std::span<const double> v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() < 2) return m;
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return m;
}

}  // namespace

double student_t_quantile(double probability, double dof) {
  return boost::math::quantile(boost::math::students_t_distribution<double>(dof), probability);
}

Aggregate aggregate(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("aggregate: empty list");
  const auto m = moments(values);
  Aggregate a;
  a.mean = m.mean;
  a.n = values.size();
  if (a.n >= 2) {
    const double n = static_cast<double>(a.n);
    a.ci_half_width = student_t_quantile(0.975, n - 1.0) * m.sd / std::sqrt(n);
  }
  return a;
}

double paired_t_test_less(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("paired t-test: samples differ in length");
  if (a.size() < 2) throw InvalidArgument("paired t-test: need at least two pairs");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  const auto m = moments(diff);
  if (m.sd == 0.0) return m.mean < 0.0 ? 0.0 : 1.0;
  const double n = static_cast<double>(diff.size());
  const double t = m.mean / (m.sd / std::sqrt(n));
  return boost::math::cdf(boost::math::students_t_distribution<double>(n - 1.0), t);
}

}  // namespace fairlab
