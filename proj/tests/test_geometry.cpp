#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "qdirsim/geometry.hpp"
#include "qdirsim/grid.hpp"

using namespace qdirsim;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

SystemGeometry geometry(double full, double narrow, double y0) {
  return SystemGeometry::from_separation(full, 1.0, narrow, y0);
}

}  // namespace

TEST(UnitSystem, SignalPhotonIsOnShellAtTwoPi) {
  EXPECT_EQ(UnitSystem::signal_wavelength, 1.0);
  EXPECT_DOUBLE_EQ(UnitSystem::on_shell_momentum(), kTwoPi);
  EXPECT_DOUBLE_EQ(UnitSystem::wavenumber(0.5), 2.0 * kTwoPi);
}

TEST(AngleToMomentum, ReferenceValues) {
  EXPECT_EQ(angle_to_transverse_momentum(0.0, kTwoPi), 0.0);
  EXPECT_NEAR(angle_to_transverse_momentum(1e-3, kTwoPi), 6.2832e-3, 5e-8);
  EXPECT_NEAR(angle_to_transverse_momentum(0.05, 2.0 * kTwoPi), 0.6283, 5e-5);
}

TEST(AngleToMomentum, RejectsLargeAnglesAndBadMomentum) {
  EXPECT_THROW(angle_to_transverse_momentum(0.2, kTwoPi), DomainError);
  EXPECT_THROW(angle_to_transverse_momentum(-0.2, kTwoPi), DomainError);
  EXPECT_THROW(angle_to_transverse_momentum(0.01, 0.0), DomainError);
  EXPECT_THROW(angle_to_transverse_momentum(0.01, -1.0), DomainError);
  EXPECT_NO_THROW(angle_to_transverse_momentum(0.1, kTwoPi));
}

TEST(AngleToMomentum, LinearInBothArguments) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> th(-0.05, 0.05), pz(0.5, 20.0), a(0.1, 2.0);
  for (int i = 0; i < 1000; ++i) {
    const double t = th(rng), p = pz(rng), s = a(rng);
    const double base = angle_to_transverse_momentum(t, p);
    EXPECT_NEAR(angle_to_transverse_momentum(t, s * p), s * base, 1e-12 * std::abs(s * base) + 1e-15);
    if (std::abs(s * t) <= kSmallAngleBound) {
      EXPECT_NEAR(angle_to_transverse_momentum(s * t, p), s * base, 1e-12 * std::abs(s * base) + 1e-15);
    }
  }
}

TEST(AngleToMomentum, InverseRoundTrip) {
  for (double t : {-0.09, -1e-3, 0.0, 2e-4, 0.07}) {
    EXPECT_NEAR(transverse_momentum_to_angle(angle_to_transverse_momentum(t, kTwoPi), kTwoPi), t, 1e-15);
  }
}

TEST(Feasibility, DefaultProtocolMargins) {
  const auto v = check_feasibility(geometry(0.1, 1e-3, 4.0), 5.0);
  EXPECT_TRUE(v.feasible);
  // lambda/(4 pi dTheta0) = 0.7958 and lambda/(4 pi dTheta) = 79.58
  EXPECT_NEAR(v.margin_lower, 4.0 / 0.795775, 1e-4);
  EXPECT_NEAR(v.margin_upper, 79.5775 / 4.0, 1e-4);
  EXPECT_NEAR(v.margin_lower, 5.03, 5e-3);
  EXPECT_NEAR(v.margin_upper, 19.9, 5e-2);
  EXPECT_DOUBLE_EQ(v.margin_propagation, 4.0);
  EXPECT_TRUE(v.lower_ok && v.upper_ok && v.propagation_ok);
}

TEST(Feasibility, SubWavelengthImageFailsPropagation) {
  const auto v = check_feasibility(geometry(0.1, 1e-3, 0.5), 5.0);
  EXPECT_FALSE(v.feasible);
  EXPECT_FALSE(v.propagation_ok);
  EXPECT_DOUBLE_EQ(v.margin_propagation, 0.5);
}

TEST(Feasibility, SmallOpeningAngleFailsLowerMargin) {
  const auto v = check_feasibility(geometry(0.01, 1e-3, 4.0), 5.0);
  EXPECT_FALSE(v.feasible);
  EXPECT_FALSE(v.lower_ok);
  EXPECT_NEAR(v.margin_lower, 0.503, 5e-4);
}

TEST(Feasibility, FlagsAreConsistent) {
  for (double full : {0.005, 0.02, 0.1}) {
    for (double y0 : {0.5, 1.0, 4.0, 30.0}) {
      const auto v = check_feasibility(geometry(full, 1e-3, y0), 5.0);
      EXPECT_EQ(v.feasible, v.lower_ok && v.upper_ok && v.propagation_ok);
      EXPECT_EQ(v.lower_ok, v.margin_lower >= 5.0);
      EXPECT_EQ(v.upper_ok, v.margin_upper >= 5.0);
      EXPECT_EQ(v.propagation_ok, v.margin_propagation >= 1.0);
    }
  }
}

TEST(Feasibility, MonotoneInOpeningAngles) {
  bool was_ok = false;
  for (double full = 0.002; full <= 0.1; full += 0.002) {
    const auto v = check_feasibility(geometry(full, 1e-3, 4.0), 5.0);
    if (was_ok) {
      EXPECT_TRUE(v.lower_ok) << "widening dTheta0 flipped lower margin at " << full;
    }
    was_ok = v.lower_ok;
  }
  was_ok = false;
  for (double narrow = 0.05; narrow >= 1e-4; narrow *= 0.8) {
    const auto v = check_feasibility(geometry(0.1, narrow, 4.0), 5.0);
    if (was_ok) {
      EXPECT_TRUE(v.upper_ok) << "narrowing dTheta flipped upper margin at " << narrow;
    }
    was_ok = v.upper_ok;
  }
}

TEST(Feasibility, RejectsMarginBelowOne) {
  EXPECT_THROW(check_feasibility(geometry(0.1, 1e-3, 4.0), 0.5), DomainError);
}

TEST(SystemGeometry, OpeningAngleFromSeparationAndRange) {
  const auto g = SystemGeometry::from_separation(3.0, 1000.0, 1e-4, 4.0);
  EXPECT_NEAR(g.opening_angle_full, 3e-3, 1e-12);
  EXPECT_DOUBLE_EQ(g.pump_wavelength, 0.5);
  EXPECT_DOUBLE_EQ(g.axial_momentum, kTwoPi);
  EXPECT_DOUBLE_EQ(g.source_angle_a(), -g.source_angle_b());
}

TEST(SystemGeometry, InvariantViolationsThrow) {
  EXPECT_THROW(SystemGeometry::from_separation(1.0, 5.0, 1e-3, 4.0), DomainError);   // 0.2 rad
  EXPECT_THROW(SystemGeometry::from_separation(1.0, 100.0, 0.02, 4.0), DomainError);  // dTheta > dTheta0
  EXPECT_THROW(SystemGeometry::from_separation(1.0, 100.0, 0.0, 4.0), DomainError);
  EXPECT_THROW(SystemGeometry::from_separation(-1.0, 100.0, 1e-3, 4.0), DomainError);
  EXPECT_THROW(SystemGeometry::from_separation(1.0, 100.0, 1e-3, 0.0), DomainError);
  EXPECT_THROW(SystemGeometry::from_separation(1.0, 100.0, 1e-3, 4.0, 0.0), DomainError);
}

TEST(ApertureCutoff, ReferenceValuesAndScaling) {
  EXPECT_NEAR(aperture_cutoff(1.0, 10.0, 1.0), 0.1, 1e-15);
  EXPECT_NEAR(aperture_cutoff(0.25, 1.0, 1.0), 0.25, 1e-15);
  EXPECT_NEAR(aperture_cutoff(1.0, 20.0, 1.0), 0.5 * aperture_cutoff(1.0, 10.0, 1.0), 1e-15);
  EXPECT_NEAR(aperture_cutoff(2.0, 10.0, 1.0), 2.0 * aperture_cutoff(1.0, 10.0, 1.0), 1e-15);
}

TEST(ApertureCutoff, RejectsBadInputs) {
  EXPECT_THROW(aperture_cutoff(0.0, 10.0, 1.0), DomainError);
  EXPECT_THROW(aperture_cutoff(1.0, -1.0, 1.0), DomainError);
  EXPECT_THROW(aperture_cutoff(1.0, 10.0, 0.0), DomainError);
  EXPECT_THROW(aperture_cutoff(6.0, 10.0, 1.0), DomainError);  // w/z >= 0.5
}

TEST(TransverseGrid, SpacingsAndAxes) {
  const TransverseGrid g(256, 8.0 * std::numbers::pi);
  EXPECT_NEAR(g.dq(), 16.0 * std::numbers::pi / 256.0, 1e-15);
  EXPECT_NEAR(g.dy(), 0.125, 1e-15);
  EXPECT_NEAR(g.position_extent(), 32.0, 1e-12);
  EXPECT_NEAR(g.q(0), -g.q(255), 1e-12);  // cell-centred, symmetric
  EXPECT_NEAR(g.q(128) - g.q(127), g.dq(), 1e-12);
  EXPECT_EQ(g.nearest_index(g.q(17) + 0.3 * g.dq()), 17u);
  EXPECT_EQ(g.sum_diagonals(), 511u);
  EXPECT_NEAR(g.sum_momentum(255), 0.0, 1e-12);
  EXPECT_NEAR(g.sum_momentum(0), g.q(0) + g.q(0), 1e-12);
}

TEST(TransverseGrid, RejectsBadSizes) {
  EXPECT_THROW(TransverseGrid(100, 10.0), DomainError);
  EXPECT_THROW(TransverseGrid(8, 10.0), DomainError);
  EXPECT_THROW(TransverseGrid(64, 0.0), DomainError);
  EXPECT_NO_THROW(TransverseGrid(16, 1.0));
}
