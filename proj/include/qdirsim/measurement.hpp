#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "qdirsim/error.hpp"
#include "qdirsim/geometry.hpp"
#include "qdirsim/optics.hpp"
#include "qdirsim/random.hpp"
#include "qdirsim/state.hpp"
#include "qdirsim/stats.hpp"

namespace qdirsim {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One registered outcome. Pair events carry (q_sum, y_rel) (q1, q2 are not
/// measured and stay NaN; recoil-only events also leave y_rel NaN). Single
/// photon events carry their momentum in q1.
struct DetectionEvent {
  enum class Channel { coincidence_pair, single_photon };

  Channel channel = Channel::coincidence_pair;
  double q1 = kNaN;
  double q2 = kNaN;
  double q_sum = kNaN;
  double y_rel = kNaN;
  std::uint64_t arrival_slot = 0;
  bool is_noise = false;  // ground truth, never read by estimators

  bool is_single() const { return channel == Channel::single_photon; }

  static DetectionEvent pair(double q_sum, double y_rel) {
    DetectionEvent e;
    e.q_sum = q_sum;
    e.y_rel = y_rel;
    return e;
  }
  static DetectionEvent single(double q) {
    DetectionEvent e;
    e.channel = Channel::single_photon;
    e.q1 = q;
    return e;
  }

  friend bool operator==(const DetectionEvent& a, const DetectionEvent& b) {
    auto same = [](double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; };
    return a.channel == b.channel && same(a.q1, b.q1) && same(a.q2, b.q2) &&
           same(a.q_sum, b.q_sum) && same(a.y_rel, b.y_rel) && a.arrival_slot == b.arrival_slot &&
           a.is_noise == b.is_noise;
  }
};

/// Transmission timing: geometric inter-arrival gaps ("random intervals")
/// or a fixed period.
struct ArrivalProcess {
  enum class Kind { geometric, periodic };
  Kind kind = Kind::geometric;
  double mean_interval = 4.0;
};

struct MeasurementChannel {
  enum class Kind { biphoton, single_photon, recoil_integrating };

  Kind kind = Kind::biphoton;
  /// Narrow acceptance for single-photon detection: a hard aperture on the
  /// signal arm; only signal-arm photons are then recorded. Unset = wide
  /// acceptance, photons of both arms pooled.
  std::optional<double> acceptance_cutoff;
  std::vector<TransferFunction> chain;
  ArrivalProcess arrival{};

  static MeasurementChannel wide_biphoton(std::vector<TransferFunction> chain = {}) {
    return {Kind::biphoton, std::nullopt, std::move(chain), {}};
  }
  static MeasurementChannel wide_single(std::vector<TransferFunction> chain = {}) {
    return {Kind::single_photon, std::nullopt, std::move(chain), {}};
  }
  static MeasurementChannel narrow_single(double cutoff, std::vector<TransferFunction> chain = {}) {
    return {Kind::single_photon, cutoff, std::move(chain), {}};
  }
  static MeasurementChannel recoil(std::vector<TransferFunction> chain = {}) {
    return {Kind::recoil_integrating, std::nullopt, std::move(chain), {}};
  }

  /// Full transfer chain including the acceptance aperture.
  std::vector<TransferFunction> effective_chain() const {
    auto c = chain;
    if (acceptance_cutoff) c.push_back(TransferFunction::aperture(Arm::signal, *acceptance_cutoff));
    return c;
  }
};

/// Events are drawn in fixed blocks of this size; block b uses the stream
/// derive_seed(seed, b), so any partition of blocks over workers yields the
/// same list.
inline constexpr std::size_t kSamplingBlock = 4096;

namespace detail {

struct OutcomeTable {
  std::vector<double> weights;
  std::vector<DetectionEvent> outcomes;
};

inline OutcomeTable outcome_table(const BiphotonState& prepared, const MeasurementChannel& channel) {
  const auto& grid = prepared.grid();
  const std::size_t n = grid.size();
  OutcomeTable t;
  switch (channel.kind) {
    case MeasurementChannel::Kind::biphoton: {
      const auto joint = relative_joint(prepared);
      t.weights = joint.probability;
      t.outcomes.reserve(t.weights.size());
      for (std::size_t s = 0; s < joint.diagonals(); ++s) {
        for (std::size_t k = 0; k < n; ++k) {
          t.outcomes.push_back(DetectionEvent::pair(grid.sum_momentum(s), grid.relative_position(k)));
        }
      }
      break;
    }
    case MeasurementChannel::Kind::single_photon: {
      const Arm arm = channel.acceptance_cutoff ? Arm::signal : Arm::both;
      t.weights = marginal(prepared, arm);
      for (std::size_t i = 0; i < n; ++i) t.outcomes.push_back(DetectionEvent::single(grid.q(i)));
      break;
    }
    case MeasurementChannel::Kind::recoil_integrating: {
      t.weights.assign(grid.sum_diagonals(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) t.weights[i + j] += std::norm(prepared.at(i, j));
      }
      for (std::size_t s = 0; s < grid.sum_diagonals(); ++s) {
        t.outcomes.push_back(DetectionEvent::pair(grid.sum_momentum(s), kNaN));
      }
      break;
    }
  }
  return t;
}

inline std::uint64_t draw_gap(Rng& rng, const ArrivalProcess& p) {
  if (p.kind == ArrivalProcess::Kind::periodic) {
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(p.mean_interval)));
  }
  return geometric_gap(rng, p.mean_interval);
}

}  // namespace detail

/// Draws `n_events` independent outcomes of `channel` applied to `state`.
/// Deterministic in (state, channel, n_events, seed) and independent of
/// `workers`.
inline std::vector<DetectionEvent> sample_events(const BiphotonState& state,
                                                 const MeasurementChannel& channel,
                                                 std::size_t n_events, std::uint64_t seed,
                                                 unsigned workers = 1) {
  if (n_events < 1) throw DomainError("measurement", "n_events must be >= 1");
  const auto prepared = apply_chain(state, channel.effective_chain()).state;
  const auto table = detail::outcome_table(prepared, channel);
  const DiscreteSampler sampler(table.weights);

  const std::size_t blocks = (n_events + kSamplingBlock - 1) / kSamplingBlock;
  std::vector<DetectionEvent> events(n_events);
  std::vector<std::uint64_t> gaps(n_events);
  auto run_block = [&](std::size_t b) {
    Rng rng = make_rng(seed, b);
    const std::size_t lo = b * kSamplingBlock;
    const std::size_t hi = std::min(n_events, lo + kSamplingBlock);
    for (std::size_t e = lo; e < hi; ++e) {
      events[e] = table.outcomes[sampler(rng)];
      gaps[e] = detail::draw_gap(rng, channel.arrival);
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(blocks)));
  if (workers == 1) {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < blocks; b += workers) run_block(b);
      });
    }
    for (auto& t : pool) t.join();
  }
  std::uint64_t slot = 0;
  for (std::size_t e = 0; e < n_events; ++e) {
    slot += gaps[e];
    events[e].arrival_slot = slot - 1;  // first gap >= 1, so slots start at >= 0
  }
  return events;
}

struct RecoilEstimate {
  double angle = 0.0;           // radians, positive towards transmitter A
  double standard_error = 0.0;  // of the mean
  std::size_t events = 0;
};

/// Mean pair direction (q1 + q2) / (2 P_Z): the recoil of a receiver that
/// absorbs each biphoton as one quantum.
inline RecoilEstimate recoil_direction(const std::vector<DetectionEvent>& events,
                                       double p_z = UnitSystem::on_shell_momentum()) {
  std::vector<double> angles;
  for (const auto& e : events) {
    if (!e.is_single() && std::isfinite(e.q_sum)) {
      angles.push_back(transverse_momentum_to_angle(0.5 * e.q_sum, p_z));
    }
  }
  if (angles.size() < 2) throw InsufficientDataError("measurement", "recoil needs >= 2 pair events");
  RecoilEstimate r;
  r.events = angles.size();
  r.angle = stats::mean(angles);
  r.standard_error = std::sqrt(stats::variance(angles) / static_cast<double>(angles.size()));
  return r;
}

enum class DirectionStrategy { single_photon_ml, centroid };

struct DirectionEstimate {
  std::array<double, 2> angles{};  // ascending, radians
  std::array<std::array<double, 2>, 2> covariance{};
  std::array<double, 2> std_error{};
  double uniformity_p_value = 0.0;
  std::size_t bootstrap_ok = 0;
};

namespace detail {

struct BinnedAngles {
  std::vector<double> angle;  // per grid bin
  std::vector<double> count;
};

inline BinnedAngles bin_single_events(const std::vector<double>& qs, const TransverseGrid& grid,
                                      double p_z) {
  BinnedAngles b;
  b.count.assign(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    b.angle.push_back(transverse_momentum_to_angle(grid.q(i), p_z));
  }
  for (double q : qs) b.count[grid.nearest_index(q)] += 1.0;
  return b;
}

/// EM for an equal-width two-Gaussian mixture on binned angles.
inline std::array<double, 2> fit_two_gaussians(const BinnedAngles& data, double cell) {
  double n = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < data.count.size(); ++i) {
    n += data.count[i];
    m1 += data.count[i] * data.angle[i];
    m2 += data.count[i] * data.angle[i] * data.angle[i];
  }
  const double mean = m1 / n;
  const double var_all = std::max(m2 / n - mean * mean, 0.0);
  const double var_floor = cell * cell / 12.0;

  auto quantile = [&](double f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < data.count.size(); ++i) {
      acc += data.count[i];
      if (acc >= f * n) return data.angle[i];
    }
    return data.angle.back();
  };

  double best_ll = -std::numeric_limits<double>::infinity();
  std::array<double, 2> best{mean, mean};
  for (const auto& start : {std::array<double, 2>{0.25, 0.75}, std::array<double, 2>{0.1, 0.9}}) {
    double mu[2] = {quantile(start[0]), quantile(start[1])};
    double w[2] = {0.5, 0.5};
    double var = std::max(var_all / 4.0, var_floor);
    double ll_prev = -std::numeric_limits<double>::infinity();
    double ll = ll_prev;
    for (int it = 0; it < 500; ++it) {
      double sw[2] = {0, 0}, sx[2] = {0, 0}, sxx = 0.0;
      ll = 0.0;
      for (std::size_t i = 0; i < data.count.size(); ++i) {
        if (data.count[i] == 0.0) continue;
        const double x = data.angle[i];
        double d[2];
        for (int c = 0; c < 2; ++c) {
          d[c] = w[c] * std::exp(-(x - mu[c]) * (x - mu[c]) / (2.0 * var)) /
                 std::sqrt(2.0 * std::numbers::pi * var);
        }
        const double tot = d[0] + d[1];
        if (!(tot > 0.0)) continue;
        ll += data.count[i] * std::log(tot);
        for (int c = 0; c < 2; ++c) {
          const double r = data.count[i] * d[c] / tot;
          sw[c] += r;
          sx[c] += r * x;
        }
      }
      for (int c = 0; c < 2; ++c) {
        if (sw[c] > 0.0) mu[c] = sx[c] / sw[c];
        w[c] = sw[c] / n;
      }
      for (std::size_t i = 0; i < data.count.size(); ++i) {
        if (data.count[i] == 0.0) continue;
        const double x = data.angle[i];
        double d[2];
        for (int c = 0; c < 2; ++c) d[c] = w[c] * std::exp(-(x - mu[c]) * (x - mu[c]) / (2.0 * var));
        const double tot = d[0] + d[1];
        if (!(tot > 0.0)) continue;
        for (int c = 0; c < 2; ++c) sxx += data.count[i] * d[c] / tot * (x - mu[c]) * (x - mu[c]);
      }
      var = std::max(sxx / n, var_floor);
      if (std::abs(ll - ll_prev) < 1e-10 * std::max(1.0, std::abs(ll))) break;
      ll_prev = ll;
    }
    if (ll > best_ll) {
      best_ll = ll;
      best = {std::min(mu[0], mu[1]), std::max(mu[0], mu[1])};
    }
  }
  return best;
}

inline std::array<double, 2> fit_centroids(std::vector<double> angles) {
  std::sort(angles.begin(), angles.end());
  const std::size_t half = angles.size() / 2;
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < half; ++i) lo += angles[i];
  for (std::size_t i = half; i < angles.size(); ++i) hi += angles[i];
  return {lo / static_cast<double>(half), hi / static_cast<double>(angles.size() - half)};
}

inline std::array<double, 2> fit_directions(const std::vector<double>& qs, const TransverseGrid& grid,
                                            double p_z, DirectionStrategy strategy) {
  const double cell = transverse_momentum_to_angle(grid.dq(), p_z);
  std::array<double, 2> est{};
  if (strategy == DirectionStrategy::single_photon_ml) {
    est = fit_two_gaussians(bin_single_events(qs, grid, p_z), cell);
  } else {
    std::vector<double> angles;
    angles.reserve(qs.size());
    for (double q : qs) angles.push_back(transverse_momentum_to_angle(q, p_z));
    est = fit_centroids(std::move(angles));
  }
  if (!(est[1] - est[0] >= cell)) {
    throw NonIdentifiableError("measurement", "fitted source directions are closer than one grid cell");
  }
  return est;
}

}  // namespace detail

/// Fits two source directions to single-photon events. Throws
/// NonIdentifiableError when the angular histogram is consistent with an
/// isotropic background over its occupied span (chi-square p > 0.01) or when the two fitted
/// directions lie within one grid cell. Covariance from `bootstrap`
/// resamples.
inline DirectionEstimate estimate_source_directions(const std::vector<DetectionEvent>& events,
                                                    const TransverseGrid& grid, double p_z,
                                                    DirectionStrategy strategy,
                                                    std::uint64_t seed = 0,
                                                    std::size_t bootstrap = 200) {
  std::vector<double> qs;
  for (const auto& e : events) {
    if (e.is_single()) qs.push_back(e.q1);
  }
  if (qs.size() < 100) {
    throw InsufficientDataError("measurement", "direction finding needs >= 100 single-photon events");
  }
  DirectionEstimate out;
  const auto binned = detail::bin_single_events(qs, grid, p_z);
  // Uniformity is judged over the occupied span of cells: a receiver
  // cannot tell a flat spectrum inside its own acceptance from background.
  std::size_t first = 0, last = binned.count.size() - 1;
  while (binned.count[first] == 0.0) ++first;
  while (binned.count[last] == 0.0) --last;
  out.uniformity_p_value =
      last > first ? stats::chi_square_uniformity(std::vector<double>(
                         binned.count.begin() + static_cast<std::ptrdiff_t>(first),
                         binned.count.begin() + static_cast<std::ptrdiff_t>(last) + 1))
                         .p_value
                   : 1.0;
  if (out.uniformity_p_value > 0.01) {
    throw NonIdentifiableError("measurement",
                               "single-photon angles are consistent with isotropic background (p = " +
                                   std::to_string(out.uniformity_p_value) + ")");
  }
  out.angles = detail::fit_directions(qs, grid, p_z, strategy);

  Rng rng = make_rng(seed, 0xB007);
  std::vector<std::array<double, 2>> reps;
  std::vector<double> resample(qs.size());
  for (std::size_t r = 0; r < bootstrap; ++r) {
    for (auto& q : resample) q = qs[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(qs.size()))];
    try {
      reps.push_back(detail::fit_directions(resample, grid, p_z, strategy));
    } catch (const NonIdentifiableError&) {
      // A resample that collapses to one direction contributes no spread estimate.
    }
  }
  out.bootstrap_ok = reps.size();
  if (reps.size() < 2) {
    throw NonIdentifiableError("measurement", "bootstrap resamples do not resolve two directions");
  }
  double m[2] = {0, 0};
  for (const auto& r : reps) {
    m[0] += r[0];
    m[1] += r[1];
  }
  m[0] /= static_cast<double>(reps.size());
  m[1] /= static_cast<double>(reps.size());
  for (const auto& r : reps) {
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) out.covariance[a][b] += (r[a] - m[a]) * (r[b] - m[b]);
    }
  }
  for (auto& row : out.covariance) {
    for (auto& c : row) c /= static_cast<double>(reps.size() - 1);
  }
  out.std_error = {std::sqrt(out.covariance[0][0]), std::sqrt(out.covariance[1][1])};
  return out;
}

/// Histogram of single-photon events over the grid's momentum cells.
inline std::vector<double> single_photon_counts(const std::vector<DetectionEvent>& events,
                                                const TransverseGrid& grid) {
  std::vector<double> counts(grid.size(), 0.0);
  for (const auto& e : events) {
    if (e.is_single()) counts[grid.nearest_index(e.q1)] += 1.0;
  }
  return counts;
}

/// Relative-position image reconstructed from pair events.
inline RelativeImage relative_image_from_events(const std::vector<DetectionEvent>& events,
                                                const TransverseGrid& grid) {
  const std::size_t n = grid.size();
  std::vector<double> counts(n, 0.0);
  for (const auto& e : events) {
    if (e.is_single() || !std::isfinite(e.y_rel)) continue;
    const long k = std::lround(e.y_rel / grid.dy());
    const long nn = static_cast<long>(n);
    counts[static_cast<std::size_t>(((k % nn) + nn) % nn)] += 1.0;
  }
  return fold_relative_distribution(grid, counts);
}

inline const char* to_string(DetectionEvent::Channel c) {
  return c == DetectionEvent::Channel::single_photon ? "single_photon" : "coincidence_pair";
}

/// CSV with a mandatory header; floats with 9 significant digits. The
/// is_noise column is written only for debug exports.
inline void write_events_csv(std::ostream& os, const std::vector<DetectionEvent>& events,
                             bool debug = false) {
  os << "channel,q1,q2,q_sum,y_rel,arrival_slot" << (debug ? ",is_noise" : "") << "\n";
  char buf[32];
  auto num = [&](double v) -> const char* {
    if (std::isnan(v)) return "nan";
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
  };
  for (const auto& e : events) {
    os << to_string(e.channel) << ',';
    os << num(e.q1) << ',';
    os << num(e.q2) << ',';
    os << num(e.q_sum) << ',';
    os << num(e.y_rel) << ',' << e.arrival_slot;
    if (debug) os << ',' << (e.is_noise ? 1 : 0);
    os << "\n";
  }
}

}  // namespace qdirsim
