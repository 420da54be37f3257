#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "qdirsim/adversary.hpp"

using namespace qdirsim;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPz = 2.0 * kPi;
const TransverseGrid kGrid(256, 8.0 * kPi);
const SystemGeometry kGeom = SystemGeometry::from_separation(1.0, 10.0, 1e-3, 4.0);

BiphotonState protocol_state() {
  return make_difference_correlated_state(kGrid, ImageSpec::two_dots(4.0),
                                          {SumEnvelope::uniform(), kPz * kGeom.opening_angle_full});
}

BiphotonState biased_state() {
  return make_difference_correlated_state(kGrid, ImageSpec::two_dots(4.0),
                                          {SumEnvelope::gaussian(kGrid.q_max()), kPz * kGeom.opening_angle_full});
}

// One collimated beam per transmitter, signal towards A and idler towards B.
BiphotonState narrow_beams(bool swapped = false) {
  double ca = kPz * kGeom.source_angle_a(), cb = kPz * kGeom.source_angle_b();
  if (swapped) std::swap(ca, cb);
  const double w = 0.0628;
  return make_separable_state(
      kGrid, [&](double q) { return cplx{std::exp(-(q - ca) * (q - ca) / (4.0 * w * w)), 0.0}; },
      [&](double q) { return cplx{std::exp(-(q - cb) * (q - cb) / (4.0 * w * w)), 0.0}; });
}

double integral(const std::vector<double>& d) {
  double s = 0.0;
  for (double v : d) s += v;
  return s * kGrid.dq();
}

}  // namespace

TEST(MarginalBias, ZeroForUniformEnvelope) {
  for (double v : compute_marginal_bias(protocol_state())) EXPECT_LT(std::abs(v), 1e-9);
}

TEST(MarginalBias, IsMarginalMinusIsotropic) {
  const auto s = biased_state();
  const auto bias = compute_marginal_bias(s);
  const auto m = marginal(s, Arm::both);
  double max_bias = 0.0;
  for (std::size_t i = 0; i < bias.size(); ++i) {
    EXPECT_NEAR(bias[i], m[i] - 1.0 / (2.0 * kGrid.q_max()), 1e-15);
    max_bias = std::max(max_bias, std::abs(bias[i]));
  }
  EXPECT_NEAR(integral(bias), 0.0, 1e-12);
  EXPECT_GT(max_bias, 1e-3);
}

TEST(MarginalBias, SeparableStateBiasFollowsBeams) {
  const auto bias = compute_marginal_bias(narrow_beams());
  const auto peak = std::max_element(bias.begin(), bias.end()) - bias.begin();
  const double q = kGrid.q(static_cast<std::size_t>(peak));
  EXPECT_NEAR(std::abs(q), kPz * 0.5 * kGeom.opening_angle_full, kGrid.dq());
}

TEST(NoisePolicy, Validation) {
  NoisePolicy p;
  p.background_rate = -1.0;
  EXPECT_THROW(p.validate(kGrid), DomainError);
  p.background_rate = 1.0;
  p.background_profile = std::vector<double>(10, 0.1);
  EXPECT_THROW(p.validate(kGrid), DomainError);
  p.background_profile = std::vector<double>(kGrid.size(), 1.0);  // does not integrate to 1
  EXPECT_THROW(p.validate(kGrid), DomainError);
  p.background_profile.clear();
  p.single_photon_offset = std::vector<double>(kGrid.size(), 1.0);
  EXPECT_THROW(p.validate(kGrid), DomainError);
  p.single_photon_offset = compute_marginal_bias(biased_state());
  EXPECT_NO_THROW(p.validate(kGrid));
}

TEST(NoiseProfile, OffsetProfileMakesPooledMarginalIsotropic) {
  const auto s = biased_state();
  NoisePolicy p{1.0, {}, compute_marginal_bias(s)};
  const auto prof = noise_profile(p, kGrid);
  EXPECT_EQ(prof.clipped_mass, 0.0);
  EXPECT_NEAR(integral(prof.density), 1.0, 1e-12);
  const auto m = marginal(s, Arm::both);
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_NEAR(0.5 * (m[i] + prof.density[i]), 1.0 / (2.0 * kGrid.q_max()), 1e-12);
  }
}

TEST(InjectNoise, ZeroRateIsIdentity) {
  const auto ev = sample_events(protocol_state(), MeasurementChannel::wide_biphoton(), 500, 1);
  EXPECT_EQ(inject_noise(ev, NoisePolicy{}, kGrid, 3), ev);
}

TEST(InjectNoise, RateOneDoublesTheStreamAndKeepsSignalOrder) {
  const std::size_t n = 20000;
  const auto ev = sample_events(protocol_state(), MeasurementChannel::wide_biphoton(), n, 1);
  const auto out = inject_noise(ev, NoisePolicy{1.0, {}, std::nullopt}, kGrid, 3);
  const double sd = std::sqrt(static_cast<double>(n) / 2.0);
  EXPECT_NEAR(static_cast<double>(out.size()), 2.0 * n, 5.0 * sd);
  std::vector<DetectionEvent> signal;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i > 0) ASSERT_GE(out[i].arrival_slot, out[i - 1].arrival_slot);
    if (out[i].is_noise) {
      ASSERT_TRUE(out[i].is_single());
      ASSERT_LE(out[i].arrival_slot, ev.back().arrival_slot);
    } else {
      signal.push_back(out[i]);
    }
  }
  EXPECT_EQ(signal, ev);
  EXPECT_EQ(inject_noise(ev, NoisePolicy{1.0, {}, std::nullopt}, kGrid, 3), out);
}

TEST(InjectNoise, FractionalRateCount) {
  const std::size_t n = 20000;
  const auto ev = sample_events(protocol_state(), MeasurementChannel::wide_biphoton(), n, 1);
  const auto out = inject_noise(ev, NoisePolicy{0.25, {}, std::nullopt}, kGrid, 9);
  EXPECT_NEAR(static_cast<double>(out.size() - n), 0.25 * n, 5.0 * std::sqrt(0.25 * 0.75 * n));
}

TEST(InjectNoise, OffsetNoiseHidesSingleBias) {
  const auto s = biased_state();
  const auto ev = sample_events(s, MeasurementChannel::wide_single(), 20000, 4);
  EXPECT_LT(stats::chi_square_uniformity(single_photon_counts(ev, kGrid)).p_value, 0.01);
  const auto masked = inject_noise(ev, NoisePolicy{1.0, {}, compute_marginal_bias(s)}, kGrid, 5);
  EXPECT_GT(stats::chi_square_uniformity(single_photon_counts(masked, kGrid)).p_value, 0.01);
}

TEST(BlockingAttack, DifferenceStateHoldsPrivacy) {
  const auto r = blocking_attack(protocol_state(), kGeom, kGeom.opening_angle_full, 10000, 1);
  EXPECT_EQ(r.verdict(), Verdict::privacy_held);
  EXPECT_LT(r.statistic, 0.1);
  EXPECT_EQ(r.details["mask_centers"].size(), 21u);
  // Only mask-edge quantization remains: at most one extra cell per arm.
  EXPECT_LT(r.details["expected_statistic"].get<double>(), 4.0 / static_cast<double>(kGrid.size()));
}

TEST(BlockingAttack, NarrowBeamsBreakPrivacy) {
  const auto r = blocking_attack(narrow_beams(), kGeom, kGeom.opening_angle_full, 10000, 1);
  EXPECT_EQ(r.verdict(), Verdict::privacy_broken);
  EXPECT_GT(r.statistic, 1.0);
}

TEST(BlockingAttack, ZeroWidthMaskGivesZeroStatistic) {
  for (const auto& s : {protocol_state(), narrow_beams()}) {
    const auto r = blocking_attack(s, kGeom, 0.0, 5000, 2);
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_EQ(r.verdict(), Verdict::privacy_held);
  }
}

TEST(BlockingAttack, InvariantUnderSourceLabelSwap) {
  const auto a = blocking_attack(narrow_beams(false), kGeom, 0.05, 10000, 1);
  const auto b = blocking_attack(narrow_beams(true), kGeom, 0.05, 10000, 1);
  EXPECT_NEAR(a.details["expected_statistic"].get<double>(), b.details["expected_statistic"].get<double>(), 1e-12);
}

TEST(BlockingAttack, RejectsBadArguments) {
  EXPECT_THROW(blocking_attack(protocol_state(), kGeom, 2.0 * kGeom.opening_angle_full, 100, 1), DomainError);
  EXPECT_THROW(blocking_attack(protocol_state(), kGeom, -0.01, 100, 1), DomainError);
  EXPECT_THROW(blocking_attack(protocol_state(), kGeom, 0.05, 0, 1), DomainError);
  EXPECT_THROW(blocking_attack(protocol_state(), kGeom, 0.05, 100, 1, {1, 0.1}), DomainError);
}

TEST(EnsembleAttack, RandomIntervalsWithNoiseHoldPrivacy) {
  const auto ev = sample_events(protocol_state(), MeasurementChannel::wide_biphoton(), 10000, 1);
  const auto stream = inject_noise(ev, NoisePolicy{1.0, {}, compute_marginal_bias(protocol_state())}, kGrid, 2);
  const auto r = ensemble_statistics_attack(stream, 40, kGrid);
  EXPECT_EQ(r.verdict(), Verdict::privacy_held);
  EXPECT_GE(r.statistic, 0.01);
}

TEST(EnsembleAttack, PeriodicScheduleBreaksPrivacy) {
  auto ch = MeasurementChannel::wide_biphoton();
  ch.arrival = {ArrivalProcess::Kind::periodic, 4.0};
  const auto r = ensemble_statistics_attack(sample_events(protocol_state(), ch, 10000, 1), 40, kGrid);
  EXPECT_EQ(r.verdict(), Verdict::privacy_broken);
  EXPECT_EQ(r.details["timing_p_value"].get<double>(), 0.0);
}

TEST(EnsembleAttack, PureIsotropicBackgroundHoldsPrivacy) {
  const auto r = ensemble_statistics_attack(
      sample_events(protocol_state(), MeasurementChannel::wide_single(), 10000, 7), 40, kGrid);
  EXPECT_EQ(r.verdict(), Verdict::privacy_held);
}

TEST(EnsembleAttack, BiasedSinglesBreakPrivacy) {
  const auto r = ensemble_statistics_attack(
      sample_events(biased_state(), MeasurementChannel::wide_single(), 20000, 7), 40, kGrid);
  EXPECT_EQ(r.verdict(), Verdict::privacy_broken);
  EXPECT_LT(r.details["angular_p_value"].get<double>(), 0.01);
}

TEST(EnsembleAttack, InsufficientData) {
  const auto ev = sample_events(protocol_state(), MeasurementChannel::wide_biphoton(), 20, 1);
  EXPECT_THROW(ensemble_statistics_attack(ev, 40, kGrid), InsufficientDataError);
  EXPECT_THROW(ensemble_statistics_attack({}, 40, kGrid), InsufficientDataError);
  EXPECT_THROW(ensemble_statistics_attack(ev, 0, kGrid), DomainError);
}

TEST(AttackReport, JsonFieldsAndVerdictRule) {
  AttackReport r;
  r.kind = "blocking";
  r.threshold = 0.1;
  r.statistic = 0.05;
  auto j = r.to_json();
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"kind", "statistic", "threshold", "verdict", "details"}));
  EXPECT_EQ(j["verdict"], "privacy_held");
  r.statistic = 0.1;
  EXPECT_EQ(r.to_json()["verdict"], "privacy_broken");
  r.rule = AttackReport::Rule::at_least;
  EXPECT_EQ(r.verdict(), Verdict::privacy_held);
  r.statistic = 0.099;
  EXPECT_EQ(r.verdict(), Verdict::privacy_broken);
}
