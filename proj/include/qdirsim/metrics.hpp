#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdirsim/error.hpp"
#include "qdirsim/measurement.hpp"
#include "qdirsim/optics.hpp"
#include "qdirsim/random.hpp"
#include "qdirsim/state.hpp"
#include "qdirsim/stats.hpp"

namespace qdirsim {

/// Visibility (peak - trough) / (peak + trough) of a relative-position image,
/// peaks read at the dot positions and troughs midway between neighbouring
/// dots. Clamped to [0, 1]; an image whose "trough" outshines its dots has
/// zero contrast.
inline double image_contrast(const RelativeImage& density, const ImageSpec& image) {
  if (image.dot_positions.size() < 2) {
    throw DegenerateError("metrics", "contrast needs at least two dots");
  }
  auto dots = image.dot_positions;
  std::sort(dots.begin(), dots.end());
  double peak = 0.0, trough = 0.0;
  for (double y : dots) peak += density.density[density.nearest_bin(y)];
  peak /= static_cast<double>(dots.size());
  for (std::size_t i = 0; i + 1 < dots.size(); ++i) {
    trough += density.density[density.nearest_bin(0.5 * (dots[i] + dots[i + 1]))];
  }
  trough /= static_cast<double>(dots.size() - 1);
  if (!(peak + trough >= 1e-12)) {
    throw DegenerateError("metrics", "image has no weight at the dots or between them");
  }
  return std::clamp((peak - trough) / (peak + trough), 0.0, 1.0);
}

/// Builds the transmitted state for one message (image) of the alphabet.
using StateFactory = std::function<BiphotonState(const ImageSpec&)>;

namespace detail {

inline std::size_t outcome_bin(const DetectionEvent& e, const TransverseGrid& grid,
                               MeasurementChannel::Kind kind) {
  const auto n = static_cast<long>(grid.size());
  switch (kind) {
    case MeasurementChannel::Kind::biphoton: {
      const long k = std::lround(e.y_rel / grid.dy());
      return static_cast<std::size_t>(((k % n) + n) % n);
    }
    case MeasurementChannel::Kind::single_photon:
      return grid.nearest_index(e.q1);
    case MeasurementChannel::Kind::recoil_integrating:
      return static_cast<std::size_t>(std::lround(e.q_sum / grid.dq()) + (n - 1));
  }
  return 0;
}

inline std::size_t outcome_bins(const TransverseGrid& grid, MeasurementChannel::Kind kind) {
  return kind == MeasurementChannel::Kind::recoil_integrating ? grid.sum_diagonals() : grid.size();
}

}  // namespace detail

/// Mutual information (bits) between a uniformly chosen alphabet label and
/// the grid-cell outcome of `channel`, from `n_events` seeded samples split
/// equally over labels. Miller-Madow corrected, floored at 0 and capped at
/// log2 |alphabet|.
inline double message_mutual_information(const std::vector<ImageSpec>& alphabet,
                                         const StateFactory& make_state,
                                         const MeasurementChannel& channel, std::size_t n_events,
                                         std::uint64_t seed) {
  const std::size_t labels = alphabet.size();
  if (labels < 2) throw DomainError("metrics", "alphabet needs at least two messages");
  if (n_events < 100 * labels) {
    throw InsufficientDataError("metrics", "mutual information needs >= 100 events per message");
  }
  const std::size_t per_label = n_events / labels;
  std::optional<TransverseGrid> grid;
  std::vector<double> joint;
  std::size_t cols = 0;
  for (std::size_t l = 0; l < labels; ++l) {
    const auto state = make_state(alphabet[l]);
    if (!grid) {
      grid = state.grid();
      cols = detail::outcome_bins(*grid, channel.kind);
      joint.assign(labels * cols, 0.0);
    }
    const auto events = sample_events(state, channel, per_label, derive_seed(seed, l));
    for (const auto& e : events) joint[l * cols + detail::outcome_bin(e, *grid, channel.kind)] += 1.0;
  }
  const double mi = stats::mutual_information_bits(joint, labels);
  return std::clamp(mi, 0.0, std::log2(static_cast<double>(labels)));
}

struct TradeoffReport {
  std::string scenario_id;
  double cutoff = 0.0;
  double image_contrast = 0.0;
  double message_mutual_information = 0.0;  // bits; NaN without an alphabet
  std::optional<double> direction_error;    // radians; empty = non-identifiable
  double recoil_angle = 0.0;
};

struct TradeoffInputs {
  std::string scenario_id;
  StateFactory make_state;
  ImageSpec image;
  std::vector<ImageSpec> alphabet;
  std::vector<TransferFunction> chain;  // applied before the swept aperture
  double axial_momentum = UnitSystem::on_shell_momentum();
};

/// Sweeps a signal-arm aperture. Per cutoff: contrast and recoil from
/// coincidence events, message information through the same coincidence
/// channel, and the bootstrap error of single-photon direction finding
/// behind the aperture. Point i uses seed stream i; output order follows
/// the input.
inline std::vector<TradeoffReport> tradeoff_scan(const TradeoffInputs& in,
                                                 const std::vector<double>& cutoffs,
                                                 std::size_t n_events, std::uint64_t seed) {
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    if (!(cutoffs[i] > 0.0)) throw DomainError("metrics", "cutoffs must be positive");
    if (i > 0 && !(cutoffs[i] > cutoffs[i - 1])) {
      throw DomainError("metrics", "cutoffs must be strictly ascending");
    }
  }
  std::vector<TradeoffReport> out;
  if (cutoffs.empty()) return out;
  const auto state = in.make_state(in.image);
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    const double c = cutoffs[i];
    const std::uint64_t point_seed = derive_seed(seed, i);
    auto chain = in.chain;
    chain.push_back(TransferFunction::aperture(Arm::signal, c));

    TradeoffReport r;
    r.scenario_id = in.scenario_id;
    r.cutoff = c;
    const auto pairs = sample_events(state, MeasurementChannel::wide_biphoton(chain), n_events,
                                     derive_seed(point_seed, 0));
    r.image_contrast = image_contrast(relative_image_from_events(pairs, state.grid()), in.image);
    r.recoil_angle = recoil_direction(pairs, in.axial_momentum).angle;
    r.message_mutual_information =
        in.alphabet.size() >= 2
            ? message_mutual_information(in.alphabet, in.make_state,
                                         MeasurementChannel::wide_biphoton(chain), n_events,
                                         derive_seed(point_seed, 1))
            : kNaN;
    const auto singles = sample_events(state, MeasurementChannel::narrow_single(c, in.chain),
                                       n_events, derive_seed(point_seed, 2));
    try {
      const auto est = estimate_source_directions(singles, state.grid(), in.axial_momentum,
                                                  DirectionStrategy::single_photon_ml,
                                                  derive_seed(point_seed, 3));
      r.direction_error = std::max(est.std_error[0], est.std_error[1]);
    } catch (const NonIdentifiableError&) {
      r.direction_error.reset();
    }
    out.push_back(r);
  }
  return out;
}

inline void write_tradeoff_csv(std::ostream& os, const std::vector<TradeoffReport>& reports) {
  os << "scenario,cutoff,image_contrast,message_mutual_information_bits,direction_error,"
        "identifiable,recoil_angle\n";
  char buf[32];
  auto num = [&](double v) -> std::string {
    if (std::isnan(v)) return "nan";
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
  };
  for (const auto& r : reports) {
    os << r.scenario_id << ',' << num(r.cutoff) << ',' << num(r.image_contrast) << ','
       << num(r.message_mutual_information) << ','
       << (r.direction_error ? num(*r.direction_error) : std::string("non-identifiable")) << ','
       << (r.direction_error ? "true" : "false") << ',' << num(r.recoil_angle) << "\n";
  }
}

inline nlohmann::ordered_json tradeoff_summary(const std::vector<TradeoffReport>& reports) {
  nlohmann::ordered_json j;
  j["points"] = reports.size();
  if (reports.empty()) return j;
  std::vector<double> cut, con;
  for (const auto& r : reports) {
    cut.push_back(r.cutoff);
    con.push_back(r.image_contrast);
  }
  j["min_contrast"] = *std::min_element(con.begin(), con.end());
  j["max_contrast"] = *std::max_element(con.begin(), con.end());
  j["spearman_cutoff_contrast"] = reports.size() >= 2 ? stats::spearman(cut, con) : kNaN;
  nlohmann::ordered_json widest = nullptr;
  for (const auto& r : reports) {
    if (r.direction_error) widest = r.cutoff;
  }
  j["largest_identifiable_cutoff"] = widest;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json row;
    row["cutoff"] = r.cutoff;
    row["image_contrast"] = r.image_contrast;
    row["message_mutual_information_bits"] = std::isnan(r.message_mutual_information)
                                                 ? nlohmann::ordered_json(nullptr)
                                                 : nlohmann::ordered_json(r.message_mutual_information);
    row["direction_error"] = r.direction_error ? nlohmann::ordered_json(*r.direction_error)
                                               : nlohmann::ordered_json("non-identifiable");
    row["recoil_angle"] = r.recoil_angle;
    rows.push_back(row);
  }
  j["reports"] = rows;
  return j;
}

}  // namespace qdirsim
