// Reads the same biphoton source two ways: a wide-acceptance coincidence
// receiver recovers the image, a narrow single-photon receiver gets nothing.
#include <cstdio>

#include "qdirsim/metrics.hpp"

int main() {
  using namespace qdirsim;
  const TransverseGrid grid(256, 8.0 * std::numbers::pi);
  const auto geom = SystemGeometry::from_separation(1.0, 10.0, 1e-3, 4.0);
  const auto image = ImageSpec::two_dots(geom.image_separation);
  const auto state = make_difference_correlated_state(
      grid, image, {SumEnvelope::uniform(), geom.axial_momentum * geom.opening_angle_full});

  const auto pairs = sample_events(state, MeasurementChannel::wide_biphoton(), 10000, 42);
  const auto recoil = recoil_direction(pairs, geom.axial_momentum);
  std::printf("wide coincidence contrast   %.3f\n",
              image_contrast(relative_image_from_events(pairs, grid), image));
  std::printf("recoil angle                %.2e +- %.1e rad\n", recoil.angle, recoil.standard_error);

  for (double cutoff : {2.0, 0.25, 0.1}) {
    const auto narrow = apply_aperture(state, Arm::signal, cutoff).state;
    std::printf("aperture %.2f: contrast     %.3f\n", cutoff,
                image_contrast(coincidence_image(narrow), image));
  }

  const auto singles = sample_events(state, MeasurementChannel::wide_single(), 10000, 7);
  try {
    const auto d = estimate_source_directions(singles, grid, geom.axial_momentum,
                                              DirectionStrategy::single_photon_ml);
    std::printf("directions %.4f %.4f\n", d.angles[0], d.angles[1]);
  } catch (const NonIdentifiableError& e) {
    std::printf("directions: %s\n", e.what());
  }
}
