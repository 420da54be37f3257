// A source whose pump is not flat leaks a single-photon bias; adding noise
// shaped by compute_marginal_bias hides it again.
#include <cstdio>

#include "qdirsim/adversary.hpp"

int main() {
  using namespace qdirsim;
  const TransverseGrid grid(256, 8.0 * std::numbers::pi);
  const auto image = ImageSpec::two_dots(4.0);
  const auto state =
      make_difference_correlated_state(grid, image, {SumEnvelope::gaussian(grid.q_max()), 0.0});

  const auto singles = sample_events(state, MeasurementChannel::wide_single(), 10000, 1);
  std::printf("raw singles      uniformity p = %.3g\n",
              stats::chi_square_uniformity(single_photon_counts(singles, grid)).p_value);

  NoisePolicy policy;
  policy.background_rate = 1.0;
  policy.single_photon_offset = compute_marginal_bias(state);
  const auto mixed = inject_noise(singles, policy, grid, 2);
  std::printf("with offset noise uniformity p = %.3g (%zu events)\n",
              stats::chi_square_uniformity(single_photon_counts(mixed, grid)).p_value, mixed.size());
}
