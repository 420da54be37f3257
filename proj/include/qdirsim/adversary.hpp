#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdirsim/error.hpp"
#include "qdirsim/geometry.hpp"
#include "qdirsim/measurement.hpp"
#include "qdirsim/optics.hpp"
#include "qdirsim/random.hpp"
#include "qdirsim/state.hpp"
#include "qdirsim/stats.hpp"

namespace qdirsim {

/// Single-photon noise added at the transmitter. Densities are over the
/// grid's momentum cells (sum of density * dq = 1); angle = q / P_Z.
struct NoisePolicy {
  double background_rate = 0.0;            // noise events per signal event
  std::vector<double> background_profile;  // empty = isotropic
  /// Signed density subtracted from the noise profile (scaled by 1/rate) so
  /// that signal + noise is isotropic; build it with compute_marginal_bias.
  std::optional<std::vector<double>> single_photon_offset;

  void validate(const TransverseGrid& grid) const {
    if (!(background_rate >= 0.0)) throw DomainError("adversary", "background_rate must be >= 0");
    auto integral = [&](const std::vector<double>& d) {
      double s = 0.0;
      for (double v : d) s += v;
      return s * grid.dq();
    };
    if (!background_profile.empty()) {
      if (background_profile.size() != grid.size()) {
        throw DomainError("adversary", "background profile does not match the grid");
      }
      for (double v : background_profile) {
        if (v < 0.0) throw DomainError("adversary", "background profile must be non-negative");
      }
      if (std::abs(integral(background_profile) - 1.0) > 1e-9) {
        throw DomainError("adversary", "background profile must integrate to 1");
      }
    }
    if (single_photon_offset) {
      if (single_photon_offset->size() != grid.size()) {
        throw DomainError("adversary", "offset density does not match the grid");
      }
      if (std::abs(integral(*single_photon_offset)) > 1e-9) {
        throw DomainError("adversary", "offset density must integrate to 0");
      }
    }
  }
};

/// Deviation of the pooled single-photon marginal from isotropic.
inline std::vector<double> compute_marginal_bias(const BiphotonState& state) {
  auto m = marginal(state, Arm::both);
  const double uniform = 1.0 / (2.0 * state.grid().q_max());
  for (auto& v : m) v -= uniform;
  return m;
}

struct NoiseProfile {
  std::vector<double> density;
  /// Mass removed by clipping negative densities (0 when the offset is
  /// fully compensable at this rate).
  double clipped_mass = 0.0;
};

inline NoiseProfile noise_profile(const NoisePolicy& policy, const TransverseGrid& grid) {
  const std::size_t n = grid.size();
  NoiseProfile p;
  p.density = policy.background_profile.empty()
                  ? std::vector<double>(n, 1.0 / (2.0 * grid.q_max()))
                  : policy.background_profile;
  if (policy.single_photon_offset && policy.background_rate > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      p.density[i] -= (*policy.single_photon_offset)[i] / policy.background_rate;
    }
  }
  double total = 0.0;
  for (auto& v : p.density) {
    if (v < 0.0) {
      p.clipped_mass -= v * grid.dq();
      v = 0.0;
    }
    total += v * grid.dq();
  }
  if (total > 0.0) {
    for (auto& v : p.density) v /= total;
  }
  return p;
}

/// Interleaves single-photon noise events (is_noise = true) into `stream`.
/// The number of noise events is Binomial(K n, r / K), K = max(1, ceil(2 r)),
/// slots are uniform over the stream's span, angles follow noise_profile().
inline std::vector<DetectionEvent> inject_noise(const std::vector<DetectionEvent>& stream,
                                                const NoisePolicy& policy,
                                                const TransverseGrid& grid, std::uint64_t seed) {
  policy.validate(grid);
  if (policy.background_rate == 0.0 || stream.empty()) return stream;
  Rng rng = make_rng(seed, 0x401CE);
  const double k = std::max(1.0, std::ceil(2.0 * policy.background_rate));
  std::binomial_distribution<long> count_dist(static_cast<long>(k) * static_cast<long>(stream.size()),
                                              policy.background_rate / k);
  const long n_noise = count_dist(rng);
  const auto profile = noise_profile(policy, grid);
  std::vector<double> weights(profile.density);
  const DiscreteSampler sampler(weights);
  std::uint64_t last_slot = 0;
  for (const auto& e : stream) last_slot = std::max(last_slot, e.arrival_slot);

  std::vector<DetectionEvent> noise;
  noise.reserve(static_cast<std::size_t>(n_noise));
  for (long i = 0; i < n_noise; ++i) {
    auto ev = DetectionEvent::single(grid.q(sampler(rng)));
    ev.is_noise = true;
    ev.arrival_slot = static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(last_slot + 1));
    noise.push_back(ev);
  }
  std::stable_sort(noise.begin(), noise.end(),
                   [](const auto& a, const auto& b) { return a.arrival_slot < b.arrival_slot; });
  std::vector<DetectionEvent> merged;
  merged.reserve(stream.size() + noise.size());
  std::merge(stream.begin(), stream.end(), noise.begin(), noise.end(), std::back_inserter(merged),
             [](const auto& a, const auto& b) { return a.arrival_slot < b.arrival_slot; });
  return merged;
}

enum class Verdict { privacy_held, privacy_broken };

inline const char* to_string(Verdict v) {
  return v == Verdict::privacy_held ? "privacy_held" : "privacy_broken";
}

/// Outcome of one attack. The verdict is a function of statistic and
/// threshold only.
struct AttackReport {
  /// How the statistic is read: `below` holds privacy when statistic <
  /// threshold (a distinguishability measure), `at_least` when statistic >=
  /// threshold (a p-value).
  enum class Rule { below, at_least };

  std::string kind;
  double statistic = 0.0;
  double threshold = 0.0;
  Rule rule = Rule::below;
  nlohmann::ordered_json details = nlohmann::ordered_json::object();

  Verdict verdict() const {
    const bool held = (rule == Rule::below) ? statistic < threshold : statistic >= threshold;
    return held ? Verdict::privacy_held : Verdict::privacy_broken;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = kind;
    j["statistic"] = statistic;
    j["threshold"] = threshold;
    j["verdict"] = to_string(verdict());
    j["details"] = details;
    return j;
  }
};

struct BlockingOptions {
  std::size_t centers = 21;
  double threshold = 0.1;
};

/// Blocking attack: a mask of `mask_width` radians is swept over
/// [-dTheta0, +dTheta0] in the image plane (blocking either photon); the
/// statistic is (max - min) / mean of the measured coincidence rates.
inline AttackReport blocking_attack(const BiphotonState& state, const SystemGeometry& geometry,
                                    double mask_width, std::size_t n_events, std::uint64_t seed,
                                    const BlockingOptions& options = {}) {
  const double span = geometry.opening_angle_full;
  if (!(mask_width >= 0.0) || mask_width > span) {
    throw DomainError("adversary", "mask width must lie in [0, dTheta0]");
  }
  if (n_events < 1 || options.centers < 2) {
    throw DomainError("adversary", "blocking attack needs >= 1 event and >= 2 mask positions");
  }
  std::vector<double> centers, transmitted, rates;
  for (std::size_t k = 0; k < options.centers; ++k) {
    const double c = -span + 2.0 * span * static_cast<double>(k) / static_cast<double>(options.centers - 1);
    const double lo = c - 0.5 * mask_width;
    const double hi = c + 0.5 * mask_width;
    const double t =
        apply_mask(state, Arm::both, lo, hi, geometry.axial_momentum).transmitted_fraction;
    Rng rng = make_rng(seed, k);
    long detected = static_cast<long>(n_events);
    if (t < 1.0) {
      std::binomial_distribution<long> dist(static_cast<long>(n_events), t);
      detected = dist(rng);
    }
    centers.push_back(c);
    transmitted.push_back(t);
    rates.push_back(static_cast<double>(detected) / static_cast<double>(n_events));
  }
  auto spread = [](const std::vector<double>& v) {
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    const double m = stats::mean(v);
    if (!(m > 0.0)) throw NullStateError("adversary", "no coincidences at any mask position");
    return (*mx - *mn) / m;
  };
  AttackReport r;
  r.kind = "blocking";
  r.threshold = options.threshold;
  r.rule = AttackReport::Rule::below;
  r.statistic = spread(rates);
  r.details["mask_width"] = mask_width;
  r.details["n_events"] = n_events;
  r.details["expected_statistic"] = spread(transmitted);
  r.details["mask_centers"] = centers;
  r.details["coincidence_rates"] = rates;
  r.details["transmitted_fraction"] = transmitted;
  return r;
}

struct EnsembleOptions {
  double significance = 0.01;
  std::size_t max_lags = 10;
};

/// Ensemble attack on an event stream: window counts must look like a
/// homogeneous random process (Ljung-Box on autocorrelation, non-degenerate
/// variance) and single-photon angles like isotropic background (chi-square).
/// Statistic = smallest p-value; privacy holds when it is >= significance.
inline AttackReport ensemble_statistics_attack(const std::vector<DetectionEvent>& stream,
                                               std::uint64_t window, const TransverseGrid& grid,
                                               const EnsembleOptions& options = {}) {
  if (window == 0) throw DomainError("adversary", "window must be >= 1 slot");
  if (stream.empty()) throw InsufficientDataError("adversary", "empty event stream");
  std::uint64_t last = 0;
  for (const auto& e : stream) last = std::max(last, e.arrival_slot);
  const std::size_t windows = static_cast<std::size_t>((last + 1) / window);
  if (windows < 10) {
    throw InsufficientDataError("adversary", "stream spans " + std::to_string(windows) +
                                                 " windows, need >= 10");
  }
  std::vector<double> counts(windows, 0.0);
  for (const auto& e : stream) {
    const auto w = static_cast<std::size_t>(e.arrival_slot / window);
    if (w < windows) counts[w] += 1.0;
  }

  AttackReport r;
  r.kind = "ensemble";
  r.threshold = options.significance;
  r.rule = AttackReport::Rule::at_least;

  double p_time = 1.0;
  const double var = stats::variance(counts);
  if (var == 0.0) {
    p_time = 0.0;
    r.details["timing"] = "window counts are constant (deterministic schedule)";
  } else {
    const std::size_t lags = std::clamp<std::size_t>(windows / 5, 1, options.max_lags);
    const auto lb = stats::ljung_box(counts, lags);
    p_time = lb.p_value;
    r.details["ljung_box_q"] = lb.statistic;
    r.details["ljung_box_lags"] = lags;
  }

  double p_angle = 1.0;
  auto singles = single_photon_counts(stream, grid);
  double n_singles = 0.0;
  for (double c : singles) n_singles += c;
  if (n_singles > 0.0) {
    // Merge neighbouring cells until the expected count per cell is >= 5.
    while (singles.size() > 2 && n_singles / static_cast<double>(singles.size()) < 5.0) {
      std::vector<double> merged(singles.size() / 2);
      for (std::size_t i = 0; i < merged.size(); ++i) merged[i] = singles[2 * i] + singles[2 * i + 1];
      singles = std::move(merged);
    }
    const auto chi = stats::chi_square_uniformity(singles);
    p_angle = chi.p_value;
    r.details["angular_chi_square"] = chi.statistic;
    r.details["angular_bins"] = singles.size();
  }
  r.details["windows"] = windows;
  r.details["timing_p_value"] = p_time;
  r.details["angular_p_value"] = p_angle;
  r.details["single_photon_events"] = n_singles;
  r.statistic = std::min(p_time, p_angle);
  return r;
}

}  // namespace qdirsim
