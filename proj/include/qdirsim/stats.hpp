#pragma once

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "qdirsim/error.hpp"

namespace qdirsim::stats {

struct TestResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

/// Upper tail of the chi-square distribution.
inline double chi_square_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

/// Pearson goodness-of-fit of `counts` against `probabilities` (need not be
/// normalized). Bins with zero expected probability must be empty.
inline TestResult chi_square_gof(std::span<const double> counts, std::span<const double> probabilities) {
  if (counts.size() != probabilities.size()) {
    throw DomainError("stats", "count and probability vectors differ in length");
  }
  const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
  const double ptot = std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
  if (!(n > 0.0) || !(ptot > 0.0)) throw InsufficientDataError("stats", "empty chi-square input");
  TestResult r;
  std::size_t used = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = n * probabilities[i] / ptot;
    if (e <= 0.0) {
      if (counts[i] > 0.0) return {INFINITY, 0.0, 0.0};
      continue;
    }
    r.statistic += (counts[i] - e) * (counts[i] - e) / e;
    ++used;
  }
  r.dof = static_cast<double>(used) - 1.0;
  r.p_value = chi_square_sf(r.statistic, r.dof);
  return r;
}

inline TestResult chi_square_uniformity(std::span<const double> counts) {
  std::vector<double> p(counts.size(), 1.0);
  return chi_square_gof(counts, p);
}

inline double mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double variance(std::span<const double> x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

/// Ranks with ties averaged (1-based).
inline std::vector<double> ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InsufficientDataError("stats", "Spearman correlation needs two equal-length series");
  }
  const auto rx = ranks(x), ry = ranks(y);
  return pearson(rx, ry);
}

/// Ljung-Box portmanteau test for autocorrelation up to `lags`.
inline TestResult ljung_box(std::span<const double> series, std::size_t lags) {
  const std::size_t n = series.size();
  if (lags == 0 || n <= lags + 1) throw InsufficientDataError("stats", "series too short for Ljung-Box");
  const double m = mean(series);
  double c0 = 0.0;
  for (double v : series) c0 += (v - m) * (v - m);
  if (c0 == 0.0) return {0.0, static_cast<double>(lags), 1.0};
  double q = 0.0;
  for (std::size_t k = 1; k <= lags; ++k) {
    double ck = 0.0;
    for (std::size_t t = k; t < n; ++t) ck += (series[t] - m) * (series[t - k] - m);
    const double rho = ck / c0;
    q += rho * rho / static_cast<double>(n - k);
  }
  q *= static_cast<double>(n) * static_cast<double>(n + 2);
  return {q, static_cast<double>(lags), chi_square_sf(q, static_cast<double>(lags))};
}

/// Shannon entropy (bits) of a count vector with the Miller-Madow
/// correction (m - 1) / (2 n ln 2), m = number of occupied bins.
inline double entropy_miller_madow(std::span<const double> counts) {
  const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (!(n > 0.0)) return 0.0;
  double h = 0.0;
  std::size_t occupied = 0;
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / n;
      h -= p * std::log2(p);
      ++occupied;
    }
  }
  return h + (static_cast<double>(occupied) - 1.0) / (2.0 * n * std::log(2.0));
}

/// Plug-in mutual information (bits) of a joint count table with `rows`
/// labels, Miller-Madow corrected per entropy term. Not floored.
inline double mutual_information_bits(std::span<const double> joint, std::size_t rows) {
  const std::size_t cols = joint.size() / rows;
  std::vector<double> row_tot(rows, 0.0), col_tot(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      row_tot[r] += joint[r * cols + c];
      col_tot[c] += joint[r * cols + c];
    }
  }
  return entropy_miller_madow(row_tot) + entropy_miller_madow(col_tot) - entropy_miller_madow(joint);
}

}  // namespace qdirsim::stats
