#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "qdirsim/error.hpp"

namespace qdirsim {

/// Dimensionless units: the signal wavelength is the unit of length, so an
/// on-shell signal photon carries |k| = 2*pi.
struct UnitSystem {
  static constexpr double signal_wavelength = 1.0;
  static constexpr double two_pi = 2.0 * std::numbers::pi;

  static constexpr double wavenumber(double wavelength) { return two_pi / wavelength; }
  static constexpr double on_shell_momentum() { return wavenumber(signal_wavelength); }
};

/// Largest angle for which the linear angle <-> momentum relation is used.
inline constexpr double kSmallAngleBound = 0.1;

/// Transverse momentum carried at angle `theta` by a photon with axial
/// momentum `p_z` (small-angle relation dP = P_Z * dTheta).
inline double angle_to_transverse_momentum(double theta, double p_z) {
  if (!(p_z > 0.0)) {
    throw DomainError("geometry", "axial momentum must be positive");
  }
  if (!(std::abs(theta) <= kSmallAngleBound)) {
    throw DomainError("geometry", "angle " + std::to_string(theta) +
                                      " rad is outside the small-angle regime (|theta| <= 0.1)");
  }
  return p_z * theta;
}

/// Inverse of angle_to_transverse_momentum. Unguarded: grid points outside
/// the small-angle regime still need an angular label.
inline double transverse_momentum_to_angle(double q, double p_z) {
  if (!(p_z > 0.0)) {
    throw DomainError("geometry", "axial momentum must be positive");
  }
  return q / p_z;
}

/// Spatial frequency (cycles per unit length) <-> angular wavenumber.
inline constexpr double spatial_frequency_to_momentum(double f) { return UnitSystem::two_pi * f; }
inline constexpr double momentum_to_spatial_frequency(double q) { return q / UnitSystem::two_pi; }

/// Spatial-frequency cutoff of an aperture of width `width` seen from
/// `range`: w / (z * lambda).
inline double aperture_cutoff(double width, double range, double wavelength) {
  if (!(width > 0.0) || !(range > 0.0) || !(wavelength > 0.0)) {
    throw DomainError("geometry", "aperture width, range and wavelength must be positive");
  }
  if (!(width / range < 0.5)) {
    throw DomainError("geometry", "aperture is not small compared to its range (w/z >= 0.5)");
  }
  return width / (range * wavelength);
}

/// Two transmitters separated by L seen by a receiver at range R.
struct SystemGeometry {
  double transmitter_separation = 0.0;  // L
  double range = 0.0;                   // R
  double opening_angle_full = 0.0;      // dTheta0, angle between the transmitters
  double opening_angle_narrow = 0.0;    // dTheta, angle isolating one transmitter
  double axial_momentum = UnitSystem::on_shell_momentum();  // P_Z
  double image_separation = 0.0;        // Y0
  double pump_wavelength = UnitSystem::signal_wavelength / 2.0;
  double wavelength = UnitSystem::signal_wavelength;

  /// Builds the geometry with dTheta0 = L / R and validates it.
  static SystemGeometry from_separation(double separation, double range, double narrow_angle,
                                        double image_separation,
                                        double pump_wavelength = UnitSystem::signal_wavelength / 2.0) {
    SystemGeometry g;
    g.transmitter_separation = separation;
    g.range = range;
    g.opening_angle_full = (range > 0.0) ? separation / range : 0.0;
    g.opening_angle_narrow = narrow_angle;
    g.image_separation = image_separation;
    g.pump_wavelength = pump_wavelength;
    g.validate();
    return g;
  }

  void validate() const {
    if (!(transmitter_separation > 0.0) || !(range > 0.0)) {
      throw DomainError("geometry", "transmitter separation and range must be positive");
    }
    if (!(image_separation > 0.0) || !(pump_wavelength > 0.0) || !(wavelength > 0.0)) {
      throw DomainError("geometry", "image separation and wavelengths must be positive");
    }
    if (!(axial_momentum > 0.0)) {
      throw DomainError("geometry", "axial momentum must be positive");
    }
    if (!(opening_angle_narrow > 0.0) || !(opening_angle_full > opening_angle_narrow)) {
      throw DomainError("geometry", "opening angles must satisfy dTheta0 > dTheta > 0");
    }
    if (!(opening_angle_full <= kSmallAngleBound)) {
      throw DomainError("geometry", "opening angle dTheta0 = L/R exceeds the small-angle bound 0.1");
    }
  }

  /// Angles of the two transmitters relative to their midpoint.
  double source_angle_a() const { return 0.5 * opening_angle_full; }
  double source_angle_b() const { return -0.5 * opening_angle_full; }
};

struct FeasibilityVerdict {
  bool feasible = false;
  double margin_lower = 0.0;        // Y0 * 4 pi dTheta0 / lambda
  double margin_upper = 0.0;        // lambda / (4 pi dTheta Y0)
  double margin_propagation = 0.0;  // Y0 / lambda
  double required_margin = 0.0;
  bool lower_ok = false;
  bool upper_ok = false;
  bool propagation_ok = false;
};

/// Checks the image-size window 1/dP_{y,0} << Y0 << 1/dP_y and Y0 >= lambda.
/// "Much greater" is read as a ratio of at least `margin`.
inline FeasibilityVerdict check_feasibility(const SystemGeometry& geom, double margin = 5.0) {
  if (!(margin >= 1.0)) {
    throw DomainError("geometry", "feasibility margin must be >= 1");
  }
  constexpr double four_pi = 4.0 * std::numbers::pi;
  FeasibilityVerdict v;
  v.required_margin = margin;
  v.margin_lower = geom.image_separation * four_pi * geom.opening_angle_full / geom.wavelength;
  v.margin_upper = geom.wavelength / (four_pi * geom.opening_angle_narrow * geom.image_separation);
  v.margin_propagation = geom.image_separation / geom.wavelength;
  v.lower_ok = v.margin_lower >= margin;
  v.upper_ok = v.margin_upper >= margin;
  v.propagation_ok = v.margin_propagation >= 1.0;
  v.feasible = v.lower_ok && v.upper_ok && v.propagation_ok;
  return v;
}

}  // namespace qdirsim
