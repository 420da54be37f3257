#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qdirsim/error.hpp"
#include "qdirsim/geometry.hpp"
#include "qdirsim/state.hpp"

namespace qdirsim {

/// Phase model of free propagation. `exact` uses k_z = sqrt(k^2 - q^2);
/// `paraxial` the Fresnel expansion k - q^2 / (2k).
enum class PropagationModel { exact, paraxial };

struct ArmWavelengths {
  double signal = UnitSystem::signal_wavelength;
  double idler = UnitSystem::signal_wavelength;
};

/// A passive element acting on one or both photons.
struct TransferFunction {
  enum class Kind { free_propagation, hard_aperture, mask };

  Kind kind = Kind::free_propagation;
  Arm arm = Arm::both;
  double distance = 0.0;         // free_propagation
  PropagationModel model = PropagationModel::exact;
  ArmWavelengths wavelengths{};  // free_propagation
  double cutoff = 0.0;           // hard_aperture, spatial frequency
  double angle_low = 0.0;        // mask, blocked interval [low, high) in radians
  double angle_high = 0.0;
  double axial_momentum = UnitSystem::on_shell_momentum();  // mask

  static TransferFunction propagation(double distance, Arm arm = Arm::both) {
    TransferFunction t;
    t.kind = Kind::free_propagation;
    t.distance = distance;
    t.arm = arm;
    return t;
  }
  static TransferFunction aperture(Arm arm, double cutoff) {
    TransferFunction t;
    t.kind = Kind::hard_aperture;
    t.arm = arm;
    t.cutoff = cutoff;
    return t;
  }
  static TransferFunction block(Arm arm, double low, double high,
                                double p_z = UnitSystem::on_shell_momentum()) {
    TransferFunction t;
    t.kind = Kind::mask;
    t.arm = arm;
    t.angle_low = low;
    t.angle_high = high;
    t.axial_momentum = p_z;
    return t;
  }
};

struct TransferResult {
  BiphotonState state;
  /// Fraction of the incoming norm that survived. For propagation this is
  /// the propagating (non-evanescent) share and the state is NOT renormalized.
  double transmitted_fraction = 1.0;
};

namespace detail {

inline bool acts_on(Arm element, Arm which) { return element == Arm::both || element == which; }

/// Per-grid-point transfer factor of free propagation; zero for evanescent q.
inline std::vector<cplx> propagation_factors(const TransverseGrid& grid, double distance,
                                             double wavelength, PropagationModel model) {
  const double k = UnitSystem::wavenumber(wavelength);
  std::vector<cplx> f(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double q = grid.q(i);
    if (std::abs(q) > k) {
      f[i] = 0.0;
      continue;
    }
    const double kz = (model == PropagationModel::exact) ? std::sqrt(k * k - q * q)
                                                         : k - q * q / (2.0 * k);
    f[i] = std::polar(1.0, kz * distance);
  }
  return f;
}

inline TransferResult finish_filter(const BiphotonState& before, BiphotonState after,
                                    const char* what) {
  const double in = before.norm();
  const double fraction = after.norm() / in;
  if (!(fraction >= 1e-12)) {
    throw NullStateError("optics", std::string(what) + " transmitted fraction below 1e-12");
  }
  return {after.normalized(), fraction};
}

}  // namespace detail

/// Angular-spectrum propagation over `distance`. Evanescent components
/// (|q| > 2 pi / lambda) are removed for any positive distance; the lost
/// norm is reported, not renormalized away.
inline TransferResult propagate(const BiphotonState& state, double distance,
                                ArmWavelengths wavelengths = {}, Arm arm = Arm::both,
                                PropagationModel model = PropagationModel::exact) {
  if (!(distance >= 0.0)) {
    throw DomainError("optics", "propagation distance must be non-negative");
  }
  if (distance == 0.0) return {state, 1.0};
  const auto& grid = state.grid();
  const std::size_t n = grid.size();
  std::vector<cplx> unit(n, cplx{1.0, 0.0});
  const auto f1 = detail::acts_on(arm, Arm::signal)
                      ? detail::propagation_factors(grid, distance, wavelengths.signal, model)
                      : unit;
  const auto f2 = detail::acts_on(arm, Arm::idler)
                      ? detail::propagation_factors(grid, distance, wavelengths.idler, model)
                      : unit;
  BiphotonState out = state;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) *= f1[i] * f2[j];
  }
  const double in = state.norm();
  const double fraction = in > 0.0 ? out.norm() / in : 0.0;
  return {std::move(out), fraction};
}

/// Single-photon version of propagate.
inline Field1D propagate_field(const Field1D& field, double distance,
                               double wavelength = UnitSystem::signal_wavelength,
                               PropagationModel model = PropagationModel::exact) {
  if (!(distance >= 0.0)) {
    throw DomainError("optics", "propagation distance must be non-negative");
  }
  if (distance == 0.0) return field;
  const auto f = detail::propagation_factors(field.grid, distance, wavelength, model);
  Field1D out = field;
  for (std::size_t i = 0; i < out.amplitude.size(); ++i) out.amplitude[i] *= f[i];
  return out;
}

/// Hard aperture: zero `arm` where the spatial frequency |q| / 2 pi exceeds
/// `cutoff`, then renormalize (detection is conditioned on arrival).
inline TransferResult apply_aperture(const BiphotonState& state, Arm arm, double cutoff) {
  if (!(cutoff > 0.0)) {
    throw DomainError("optics", "aperture cutoff must be positive");
  }
  const auto& grid = state.grid();
  const std::size_t n = grid.size();
  std::vector<bool> pass(n);
  bool removes_any = false;
  for (std::size_t i = 0; i < n; ++i) {
    pass[i] = momentum_to_spatial_frequency(std::abs(grid.q(i))) <= cutoff;
    removes_any = removes_any || !pass[i];
  }
  if (!removes_any) return {state, 1.0};
  BiphotonState out = state;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const bool keep = (!detail::acts_on(arm, Arm::signal) || pass[i]) &&
                        (!detail::acts_on(arm, Arm::idler) || pass[j]);
      if (!keep) out.at(i, j) = 0.0;
    }
  }
  return detail::finish_filter(state, std::move(out), "aperture");
}

/// Blocks arrival angles in [angle_low, angle_high) on `arm`; renormalizes.
inline TransferResult apply_mask(const BiphotonState& state, Arm arm, double angle_low,
                                 double angle_high,
                                 double p_z = UnitSystem::on_shell_momentum()) {
  const auto& grid = state.grid();
  const double grid_angle = transverse_momentum_to_angle(grid.q_max(), p_z);
  if (!(angle_low <= angle_high)) {
    throw DomainError("optics", "mask interval must have low <= high");
  }
  if (angle_low < -grid_angle - 1e-12 || angle_high > grid_angle + 1e-12) {
    throw DomainError("optics", "mask interval exceeds the grid's angular range");
  }
  const std::size_t n = grid.size();
  std::vector<bool> blocked(n);
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = transverse_momentum_to_angle(grid.q(i), p_z);
    blocked[i] = theta >= angle_low && theta < angle_high;
    any = any || blocked[i];
  }
  if (!any) return {state, 1.0};
  BiphotonState out = state;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if ((detail::acts_on(arm, Arm::signal) && blocked[i]) ||
          (detail::acts_on(arm, Arm::idler) && blocked[j])) {
        out.at(i, j) = 0.0;
      }
    }
  }
  return detail::finish_filter(state, std::move(out), "mask");
}

/// Applies one element.
inline TransferResult apply_transfer(const BiphotonState& state, const TransferFunction& t) {
  switch (t.kind) {
    case TransferFunction::Kind::free_propagation:
      return propagate(state, t.distance, t.wavelengths, t.arm, t.model);
    case TransferFunction::Kind::hard_aperture:
      return apply_aperture(state, t.arm, t.cutoff);
    case TransferFunction::Kind::mask:
      return apply_mask(state, t.arm, t.angle_low, t.angle_high, t.axial_momentum);
  }
  return {state, 1.0};
}

/// Applies an ordered chain. Propagation losses are renormalized at the end
/// of the chain; the product of all transmitted fractions is reported.
inline TransferResult apply_chain(const BiphotonState& state,
                                  const std::vector<TransferFunction>& chain) {
  TransferResult acc{state, 1.0};
  for (const auto& t : chain) {
    auto r = apply_transfer(acc.state, t);
    acc.state = std::move(r.state);
    acc.transmitted_fraction *= r.transmitted_fraction;
  }
  if (acc.transmitted_fraction < 1e-12) {
    throw NullStateError("optics", "transfer chain removed the whole state");
  }
  if (!acc.state.is_normalized(1e-12)) acc.state = acc.state.normalized();
  return acc;
}

/// Largest |q1 + q2| that holds at least 1e-6 of the probability.
inline double sum_momentum_range(const BiphotonState& state) {
  const double nrm = state.norm();
  if (!(nrm > 1e-300)) {
    throw NullStateError("optics", "sum-momentum range of a null state");
  }
  const auto& grid = state.grid();
  const std::size_t n = grid.size();
  std::vector<double> p(grid.sum_diagonals(), 0.0);
  const double w = grid.dq() * grid.dq() / nrm;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) p[i + j] += std::norm(state.at(i, j)) * w;
  }
  double range = 0.0;
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (p[s] >= 1e-6) range = std::max(range, std::abs(grid.sum_momentum(s)));
  }
  return range;
}

}  // namespace qdirsim
