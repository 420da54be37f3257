#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

#include "qdirsim/error.hpp"

namespace qdirsim {

/// Discretized transverse axis. Momenta are cell-centred,
///   q_i = (i - n/2 + 1/2) dq,   dq = 2 q_max / n,   i = 0..n-1,
/// so the grid is mirror-symmetric about q = 0. The conjugate position axis
/// has spacing dy = pi / q_max and period n * dy; y_k = (k - n/2) dy.
class TransverseGrid {
 public:
  TransverseGrid(std::size_t n_points, double q_max) : n_(n_points), q_max_(q_max) {
    if (n_points < 16 || (n_points & (n_points - 1)) != 0) {
      throw DomainError("state", "grid size must be a power of two >= 16, got " +
                                     std::to_string(n_points));
    }
    if (!(q_max > 0.0)) {
      throw DomainError("state", "grid momentum extent must be positive");
    }
  }

  std::size_t size() const { return n_; }
  double q_max() const { return q_max_; }
  double dq() const { return 2.0 * q_max_ / static_cast<double>(n_); }
  double dy() const { return std::numbers::pi / q_max_; }
  double position_extent() const { return static_cast<double>(n_) * dy(); }

  double q(std::size_t i) const {
    return (static_cast<double>(i) - static_cast<double>(n_) / 2.0 + 0.5) * dq();
  }
  double y(std::size_t k) const {
    return (static_cast<double>(k) - static_cast<double>(n_) / 2.0) * dy();
  }

  /// Index of the grid cell containing q (clamped to the grid).
  std::size_t nearest_index(double q) const {
    const double x = std::floor(q / dq() + static_cast<double>(n_) / 2.0);
    if (x < 0.0) return 0;
    if (x >= static_cast<double>(n_)) return n_ - 1;
    return static_cast<std::size_t>(x);
  }

  /// q1 + q2 for the sum-diagonal s = i + j (s = 0..2n-2); always a multiple of dq.
  double sum_momentum(std::size_t s) const {
    return (static_cast<double>(s) - static_cast<double>(n_ - 1)) * dq();
  }
  std::size_t sum_diagonals() const { return 2 * n_ - 1; }

  /// Signed relative-position value of DFT bin k along a sum-diagonal.
  double relative_position(std::size_t k) const {
    const auto n = static_cast<long>(n_);
    long kk = static_cast<long>(k);
    if (kk >= n / 2) kk -= n;
    return static_cast<double>(kk) * dy();
  }

  /// Maps a q difference onto the periodic interval [-q_max, q_max).
  double wrap_momentum(double u) const {
    const double period = 2.0 * q_max_;
    double w = std::fmod(u + q_max_, period);
    if (w < 0.0) w += period;
    return w - q_max_;
  }

  friend bool operator==(const TransverseGrid& a, const TransverseGrid& b) {
    return a.n_ == b.n_ && a.q_max_ == b.q_max_;
  }

 private:
  std::size_t n_;
  double q_max_;
};

}  // namespace qdirsim
