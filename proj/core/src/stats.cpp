#include "loopcycle/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <map>

#include "loopcycle/errors.hpp"

namespace loopcycle {

void RunningStats::add(double x) {
  ++n_;
  double delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_);
}

double RunningStats::sem() const {
  return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
}

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double normal_two_sided_p(double z) {
  return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(),
                                                        std::abs(z)));
}

double chi_square_sf(double statistic, double dof) {
  if (dof <= 0.0) return 1.0;
  if (statistic <= 0.0) return 1.0;
  return boost::math::cdf(
      boost::math::complement(boost::math::chi_squared_distribution<double>(dof), statistic));
}

Interval wilson_interval(std::int64_t successes, std::int64_t n, double confidence) {
  if (n <= 0) return {0.0, 1.0};
  double z = normal_quantile(0.5 + confidence / 2.0);
  double nn = static_cast<double>(n);
  double p = static_cast<double>(successes) / nn;
  double denom = 1.0 + z * z / nn;
  double centre = (p + z * z / (2.0 * nn)) / denom;
  double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  Interval out{std::max(0.0, centre - half), std::min(1.0, centre + half)};
  if (successes == 0) out.lo = 0.0;
  if (successes == n) out.hi = 1.0;
  return out;
}

double dispersion_index(std::span<const double> counts) {
  RunningStats s;
  for (double c : counts) s.add(c);
  if (s.mean() <= 0.0) return 0.0;
  return s.variance() / s.mean();
}

Interval dispersion_null_interval(std::int64_t n, double confidence) {
  double dof = static_cast<double>(n - 1);
  boost::math::chi_squared_distribution<double> chi(dof);
  double tail = (1.0 - confidence) / 2.0;
  return {boost::math::quantile(chi, tail) / dof, boost::math::quantile(chi, 1.0 - tail) / dof};
}

namespace {

// Pools consecutive bins (in key order) until each pooled bin has total
// weight >= threshold; a short last bin is merged into its predecessor.
std::vector<std::vector<std::size_t>> pool_bins(const std::vector<double>& weight, double threshold) {
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> cur;
  double acc = 0.0;
  for (std::size_t k = 0; k < weight.size(); ++k) {
    cur.push_back(k);
    acc += weight[k];
    if (acc >= threshold) {
      groups.push_back(cur);
      cur.clear();
      acc = 0.0;
    }
  }
  if (!cur.empty()) {
    if (groups.empty()) {
      groups.push_back(cur);
    } else {
      groups.back().insert(groups.back().end(), cur.begin(), cur.end());
    }
  }
  return groups;
}

}  // namespace

TestResult chi_square_two_sample(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                                 double min_expected) {
  std::map<std::int64_t, std::pair<double, double>> hist;
  for (auto x : a) hist[x].first += 1.0;
  for (auto x : b) hist[x].second += 1.0;
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  if (na == 0 || nb == 0) throw DomainError("two-sample test needs nonempty samples");
  std::vector<double> ca, cb, tot;
  for (auto& [k, v] : hist) {
    ca.push_back(v.first);
    cb.push_back(v.second);
    tot.push_back(v.first + v.second);
  }
  // Expected count in the smaller sample is tot * min(na,nb)/(na+nb).
  double frac = std::min(na, nb) / (na + nb);
  auto groups = pool_bins(tot, min_expected / frac);
  TestResult r;
  for (const auto& g : groups) {
    double oa = 0, ob = 0;
    for (auto k : g) {
      oa += ca[k];
      ob += cb[k];
    }
    double t = oa + ob;
    double ea = t * na / (na + nb), eb = t * nb / (na + nb);
    if (ea > 0) r.statistic += (oa - ea) * (oa - ea) / ea;
    if (eb > 0) r.statistic += (ob - eb) * (ob - eb) / eb;
  }
  r.dof = static_cast<double>(groups.size()) - 1.0;
  r.p_value = chi_square_sf(r.statistic, r.dof);
  return r;
}

TestResult poisson_goodness_of_fit(std::span<const std::int64_t> counts, double mean,
                                   double min_expected) {
  if (counts.empty()) throw DomainError("goodness of fit needs a nonempty sample");
  double n = static_cast<double>(counts.size());
  std::int64_t kmax = *std::max_element(counts.begin(), counts.end());
  // Support up to well beyond both the sample maximum and the mean.
  std::int64_t top = std::max<std::int64_t>(kmax, static_cast<std::int64_t>(mean + 10.0 * std::sqrt(mean + 1.0) + 10));
  std::vector<double> observed(static_cast<std::size_t>(top + 1), 0.0), expected(observed.size(), 0.0);
  for (auto c : counts) observed[static_cast<std::size_t>(c)] += 1.0;
  double logp = -mean;
  double cum = 0.0;
  for (std::int64_t k = 0; k <= top; ++k) {
    if (k > 0) logp += std::log(mean) - std::log(static_cast<double>(k));
    double p = mean > 0 ? std::exp(logp) : (k == 0 ? 1.0 : 0.0);
    expected[static_cast<std::size_t>(k)] = n * p;
    cum += p;
  }
  expected.back() += n * std::max(0.0, 1.0 - cum);
  auto groups = pool_bins(expected, min_expected);
  TestResult r;
  for (const auto& g : groups) {
    double o = 0, e = 0;
    for (auto k : g) {
      o += observed[k];
      e += expected[k];
    }
    if (e > 0) r.statistic += (o - e) * (o - e) / e;
  }
  r.dof = static_cast<double>(groups.size()) - 1.0;
  r.p_value = chi_square_sf(r.statistic, r.dof);
  return r;
}

TestResult two_proportion_test(std::int64_t k1, std::int64_t n1, std::int64_t k2, std::int64_t n2) {
  TestResult r;
  double p1 = static_cast<double>(k1) / static_cast<double>(n1);
  double p2 = static_cast<double>(k2) / static_cast<double>(n2);
  double p = static_cast<double>(k1 + k2) / static_cast<double>(n1 + n2);
  double se = std::sqrt(p * (1.0 - p) * (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2)));
  r.dof = 1.0;
  if (se == 0.0) {
    r.statistic = 0.0;
    r.p_value = (p1 == p2) ? 1.0 : 0.0;
    return r;
  }
  r.statistic = (p1 - p2) / se;
  r.p_value = normal_two_sided_p(r.statistic);
  return r;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y,
                     std::span<const double> sigma) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("linear_fit needs >= 2 points");
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    double w = sigma.empty() ? 1.0 : 1.0 / (sigma[k] * sigma[k]);
    sw += w;
    sx += w * x[k];
    sy += w * y[k];
    sxx += w * x[k] * x[k];
    sxy += w * x[k] * y[k];
  }
  double det = sw * sxx - sx * sx;
  LinearFit f;
  f.slope = (sw * sxy - sx * sy) / det;
  f.intercept = (sxx * sy - sx * sxy) / det;
  if (!sigma.empty()) {
    f.slope_se = std::sqrt(sw / det);
  } else if (x.size() > 2) {
    double rss = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      double e = y[k] - f.intercept - f.slope * x[k];
      rss += e * e;
    }
    f.slope_se = std::sqrt(rss / static_cast<double>(x.size() - 2) * sw / det);
  }
  return f;
}

RatioEstimate ratio_of_means(std::span<const double> num, std::span<const double> den) {
  if (num.size() != den.size() || num.size() < 2) throw DomainError("ratio_of_means needs paired samples");
  double n = static_cast<double>(num.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < num.size(); ++k) {
    mx += num[k];
    my += den[k];
  }
  mx /= n;
  my /= n;
  RatioEstimate r;
  if (my == 0.0) {
    r.ratio = std::numeric_limits<double>::quiet_NaN();
    r.se = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.ratio = mx / my;
  double vz = 0;
  for (std::size_t k = 0; k < num.size(); ++k) {
    double z = num[k] - r.ratio * den[k];
    vz += z * z;
  }
  vz /= (n - 1.0);
  r.se = std::sqrt(vz / n) / my;
  return r;
}

}  // namespace loopcycle
