#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qdirsim/error.hpp"
#include "qdirsim/fft.hpp"
#include "qdirsim/geometry.hpp"
#include "qdirsim/grid.hpp"

namespace qdirsim {

using cplx = std::complex<double>;

/// Photon label. The signal photon is the first (row) index of the joint
/// amplitude, the idler the second.
enum class Arm { signal, idler, both };

inline const char* to_string(Arm arm) {
  switch (arm) {
    case Arm::signal: return "signal";
    case Arm::idler: return "idler";
    case Arm::both: return "both";
  }
  return "?";
}

/// Which pair coordinate carries the image.
enum class ImageEncoding { relative, center_of_mass };

/// A static transverse image: Gaussian dots whose intensity profile has std
/// `dot_width` around each entry of `dot_positions`.
struct ImageSpec {
  std::vector<double> dot_positions;
  double dot_width = 0.5 * UnitSystem::signal_wavelength;
  ImageEncoding encoding = ImageEncoding::relative;

  static ImageSpec two_dots(double separation, double width = 0.5) {
    return ImageSpec{{-0.5 * separation, 0.5 * separation}, width, ImageEncoding::relative};
  }

  void validate(const TransverseGrid& grid) const {
    if (dot_positions.empty()) {
      throw DomainError("state", "image needs at least one dot");
    }
    if (!(dot_width >= UnitSystem::signal_wavelength / 4.0)) {
      throw DomainError("state", "dot width below lambda/4 cannot propagate");
    }
    const double limit = grid.position_extent() / 4.0;
    for (double y : dot_positions) {
      if (!(std::abs(y) < limit)) {
        throw DomainError("state", "dot at " + std::to_string(y) +
                                       " is too close to the periodic seam (limit " +
                                       std::to_string(limit) + ")");
      }
    }
  }

  friend bool operator==(const ImageSpec&, const ImageSpec&) = default;
};

/// Envelope over the coordinate that does not carry the image (q1+q2 for a
/// relative-coordinate image). Width is the std of |G|^2.
struct SumEnvelope {
  enum class Kind { uniform, gaussian };
  Kind kind = Kind::uniform;
  double width = 0.0;
  double center = 0.0;

  static SumEnvelope uniform() { return {}; }
  static SumEnvelope gaussian(double width, double center = 0.0) {
    return {Kind::gaussian, width, center};
  }

  double amplitude(double v) const {
    if (kind == Kind::uniform) return 1.0;
    const double d = v - center;
    return std::exp(-d * d / (4.0 * width * width));
  }

  friend bool operator==(const SumEnvelope&, const SumEnvelope&) = default;
};

struct DifferenceStateOptions {
  SumEnvelope envelope = SumEnvelope::uniform();
  /// Shift of the difference coordinate, P_Z (theta_A - theta_B) for a
  /// signal photon from transmitter A and idler from transmitter B.
  double relative_offset = 0.0;
};

/// A single-photon transverse amplitude on the momentum grid.
struct Field1D {
  TransverseGrid grid;
  std::vector<cplx> amplitude;

  double norm() const {
    double s = 0.0;
    for (const auto& a : amplitude) s += std::norm(a);
    return s * grid.dq();
  }

  /// Position-space amplitude, psi(y_k) = dq / sqrt(2 pi) * sum_i phi(q_i) exp(i q_i y_k).
  std::vector<cplx> position_amplitude() const {
    const std::size_t n = grid.size();
    std::vector<cplx> shifted(n), out(n);
    // Array slot (a mod n) holds phi at a = i - n/2.
    for (std::size_t i = 0; i < n; ++i) shifted[(i + n / 2) % n] = amplitude[i];
    detail::Dft1D dft(n, detail::Dft1D::Direction::backward);
    dft.execute(shifted, out);
    std::vector<cplx> psi(n);
    const double scale = grid.dq() / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t k = 0; k < n; ++k) {
      const double b = static_cast<double>(k) - static_cast<double>(n) / 2.0;
      const std::size_t slot = (k + n / 2) % n;
      psi[k] = out[slot] * std::polar(scale, std::numbers::pi * b / static_cast<double>(n));
    }
    return psi;
  }

  double momentum_std() const {
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double p = std::norm(amplitude[i]);
      m0 += p;
      m1 += p * grid.q(i);
      m2 += p * grid.q(i) * grid.q(i);
    }
    const double mean = m1 / m0;
    return std::sqrt(std::max(0.0, m2 / m0 - mean * mean));
  }

  double position_std() const {
    const auto psi = position_amplitude();
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double p = std::norm(psi[k]);
      m0 += p;
      m1 += p * grid.y(k);
      m2 += p * grid.y(k) * grid.y(k);
    }
    const double mean = m1 / m0;
    return std::sqrt(std::max(0.0, m2 / m0 - mean * mean));
  }

  static Field1D from_function(const TransverseGrid& grid, const std::function<cplx(double)>& f) {
    Field1D field{grid, std::vector<cplx>(grid.size())};
    for (std::size_t i = 0; i < grid.size(); ++i) field.amplitude[i] = f(grid.q(i));
    const double nrm = field.norm();
    if (!(nrm > 0.0)) throw NullStateError("state", "single-photon amplitude is zero everywhere");
    const double s = 1.0 / std::sqrt(nrm);
    for (auto& a : field.amplitude) a *= s;
    return field;
  }
};

/// Discretized two-photon amplitude Phi(q1, q2), row-major over q1 (signal)
/// then q2 (idler). Normalized states satisfy sum |Phi|^2 dq^2 = 1.
class BiphotonState {
 public:
  explicit BiphotonState(TransverseGrid grid)
      : grid_(grid), amp_(grid.size() * grid.size(), cplx{0.0, 0.0}) {}
  BiphotonState(TransverseGrid grid, std::vector<cplx> amplitude)
      : grid_(grid), amp_(std::move(amplitude)) {
    if (amp_.size() != grid_.size() * grid_.size()) {
      throw DomainError("state", "amplitude size does not match the grid");
    }
  }

  /// Samples f on the grid and normalizes.
  static BiphotonState from_function(const TransverseGrid& grid,
                                     const std::function<cplx(double, double)>& f) {
    BiphotonState s(grid);
    const std::size_t n = grid.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double q1 = grid.q(i);
      for (std::size_t j = 0; j < n; ++j) s.amp_[i * n + j] = f(q1, grid.q(j));
    }
    return s.normalized();
  }

  const TransverseGrid& grid() const { return grid_; }
  std::size_t size() const { return grid_.size(); }
  const std::vector<cplx>& amplitude() const { return amp_; }
  std::vector<cplx>& amplitude() { return amp_; }

  const cplx& at(std::size_t i, std::size_t j) const { return amp_[i * grid_.size() + j]; }
  cplx& at(std::size_t i, std::size_t j) { return amp_[i * grid_.size() + j]; }

  double norm() const {
    double s = 0.0;
    for (const auto& a : amp_) s += std::norm(a);
    return s * grid_.dq() * grid_.dq();
  }

  bool is_normalized(double tol = 1e-9) const { return std::abs(norm() - 1.0) <= tol; }

  BiphotonState normalized() const {
    const double nrm = norm();
    if (!(nrm > 0.0) || !std::isfinite(nrm)) {
      throw NullStateError("state", "cannot normalize a state with zero norm");
    }
    BiphotonState out = *this;
    const double s = 1.0 / std::sqrt(nrm);
    for (auto& a : out.amp_) a *= s;
    return out;
  }

  /// Amplitude of `arm` at fixed index of the other arm (unnormalized).
  Field1D slice(Arm arm, std::size_t other_index) const {
    const std::size_t n = grid_.size();
    Field1D f{grid_, std::vector<cplx>(n)};
    for (std::size_t k = 0; k < n; ++k) {
      f.amplitude[k] = (arm == Arm::idler) ? at(other_index, k) : at(k, other_index);
    }
    return f;
  }

 private:
  TransverseGrid grid_;
  std::vector<cplx> amp_;
};

/// Phi(q1, q2) = F(q1 - q2 - offset) G(q1 + q2): F is the image spectrum in
/// the difference coordinate, G the sum envelope. A uniform envelope gives an
/// exact circulant (pure difference) kernel. With center-of-mass encoding the
/// two roles are exchanged.
inline BiphotonState make_difference_correlated_state(const TransverseGrid& grid,
                                                      const ImageSpec& image,
                                                      const DifferenceStateOptions& options = {}) {
  image.validate(grid);
  const double bandwidth = 3.0 / image.dot_width + std::abs(options.relative_offset);
  if (bandwidth > grid.q_max() / 2.0) {
    throw AliasingError("state", "image bandwidth " + std::to_string(bandwidth) +
                                     " exceeds q_max/2 = " + std::to_string(grid.q_max() / 2.0));
  }
  if (options.envelope.kind == SumEnvelope::Kind::gaussian && !(options.envelope.width > 0.0)) {
    throw DomainError("state", "Gaussian envelope width must be positive");
  }
  const double w2 = image.dot_width * image.dot_width;
  auto spectrum = [&](double u) {
    cplx acc{0.0, 0.0};
    for (double yd : image.dot_positions) acc += std::polar(1.0, -0.5 * u * yd);
    return acc * std::exp(-w2 * u * u / 4.0);
  };
  const bool relative = image.encoding == ImageEncoding::relative;
  // Only the uniform envelope needs the periodic image coordinate (it makes
  // the kernel exactly circulant). Under a localized envelope, wrapping would
  // plant an aliased copy of the pair in the (-q_max, +q_max) corners.
  const bool periodic = options.envelope.kind == SumEnvelope::Kind::uniform;
  auto wrap = [&](double u) { return periodic ? grid.wrap_momentum(u) : u; };
  return BiphotonState::from_function(grid, [&](double q1, double q2) {
    const double image_coord = relative ? wrap(q1 - q2 - options.relative_offset)
                                        : wrap(q1 + q2 - options.envelope.center);
    const double other = relative ? q1 + q2 : q1 - q2 - options.relative_offset;
    SumEnvelope env = options.envelope;
    if (!relative) env.center = 0.0;
    return spectrum(image_coord) * env.amplitude(other);
  });
}

inline BiphotonState make_separable_state(const TransverseGrid& grid,
                                          const std::function<cplx(double)>& signal,
                                          const std::function<cplx(double)>& idler) {
  return BiphotonState::from_function(grid,
                                      [&](double q1, double q2) { return signal(q1) * idler(q2); });
}

/// Single-photon density over q for `which` arm (Arm::both pools the two
/// arms with equal weight). Integrates to 1 for a normalized state.
inline std::vector<double> marginal(const BiphotonState& state, Arm which) {
  const std::size_t n = state.size();
  const double dq = state.grid().dq();
  std::vector<double> sig(n, 0.0), idl(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double p = std::norm(state.at(i, j)) * dq;
      sig[i] += p;
      idl[j] += p;
    }
  }
  if (which == Arm::signal) return sig;
  if (which == Arm::idler) return idl;
  for (std::size_t i = 0; i < n; ++i) sig[i] = 0.5 * (sig[i] + idl[i]);
  return sig;
}

/// Density of the other arm given that `measured_arm` was found at
/// `measured_q` (nearest grid cell).
inline std::vector<double> conditional(const BiphotonState& state, double measured_q,
                                       Arm measured_arm) {
  if (measured_arm == Arm::both) {
    throw DomainError("state", "conditioning needs a single measured arm");
  }
  const auto& grid = state.grid();
  const std::size_t n = grid.size();
  const std::size_t idx = grid.nearest_index(measured_q);
  const auto m = marginal(state, measured_arm);
  if (!(m[idx] > 1e-12)) {
    throw ConditioningError("state", "marginal density at q = " + std::to_string(measured_q) +
                                         " is below 1e-12");
  }
  std::vector<double> out(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = std::norm(measured_arm == Arm::signal ? state.at(idx, k) : state.at(k, idx));
    total += out[k];
  }
  for (auto& v : out) v /= total * grid.dq();
  return out;
}

/// Joint probabilities of (q1 + q2, y1 - y2). The two commute, so a
/// biphoton detector can register both. Entry [s * n + k] is the probability
/// of sum-diagonal s (q_sum = grid.sum_momentum(s)) and relative-position
/// bin k (y_rel = grid.relative_position(k)).
struct RelativeJoint {
  TransverseGrid grid;
  std::vector<double> probability;

  std::size_t diagonals() const { return grid.sum_diagonals(); }

  std::vector<double> relative_marginal() const {
    const std::size_t n = grid.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t s = 0; s < diagonals(); ++s) {
      for (std::size_t k = 0; k < n; ++k) out[k] += probability[s * n + k];
    }
    return out;
  }

  std::vector<double> sum_marginal() const {
    const std::size_t n = grid.size();
    std::vector<double> out(diagonals(), 0.0);
    for (std::size_t s = 0; s < diagonals(); ++s) {
      for (std::size_t k = 0; k < n; ++k) out[s] += probability[s * n + k];
    }
    return out;
  }
};

inline RelativeJoint relative_joint(const BiphotonState& state) {
  const auto& grid = state.grid();
  const std::size_t n = grid.size();
  const std::size_t diag = grid.sum_diagonals();
  RelativeJoint out{grid, std::vector<double>(diag * n, 0.0)};
  detail::Dft1D dft(n, detail::Dft1D::Direction::backward);
  std::vector<cplx> seg(n), freq(n);
  const double scale = grid.dq() * grid.dq() / static_cast<double>(n);
  for (std::size_t s = 0; s < diag; ++s) {
    std::fill(seg.begin(), seg.end(), cplx{0.0, 0.0});
    const std::size_t lo = (s >= n) ? s - n + 1 : 0;
    const std::size_t hi = std::min(s, n - 1);
    bool any = false;
    for (std::size_t i = lo; i <= hi; ++i) {
      seg[i] = state.at(i, s - i);
      any = any || seg[i] != cplx{0.0, 0.0};
    }
    if (!any) continue;
    dft.execute(seg, freq);
    for (std::size_t k = 0; k < n; ++k) out.probability[s * n + k] = std::norm(freq[k]) * scale;
  }
  return out;
}

/// Relative-coordinate image. The difference coordinate of the grid torus
/// resolves y1 - y2 in steps of 2 dy, so the image is binned at that
/// spacing; bin m is centred at y = (m - bins/2) * spacing.
struct RelativeImage {
  double spacing = 0.0;
  std::vector<double> density;

  std::size_t bins() const { return density.size(); }
  double position(std::size_t m) const {
    return (static_cast<double>(m) - static_cast<double>(bins()) / 2.0) * spacing;
  }
  std::size_t nearest_bin(double y) const {
    const double x = std::round(y / spacing + static_cast<double>(bins()) / 2.0);
    const auto b = static_cast<double>(bins());
    const double wrapped = std::fmod(std::fmod(x, b) + b, b);
    return static_cast<std::size_t>(wrapped);
  }
  double integral() const {
    double s = 0.0;
    for (double d : density) s += d;
    return s * spacing;
  }
};

/// Folds probabilities over the n relative-position lattice bins (spacing dy)
/// into n/2 bins of width 2 dy with weights (1/2, 1, 1/2).
inline RelativeImage fold_relative_distribution(const TransverseGrid& grid,
                                                const std::vector<double>& per_bin) {
  const std::size_t n = grid.size();
  const std::size_t bins = n / 2;
  RelativeImage img{2.0 * grid.dy(), std::vector<double>(bins, 0.0)};
  auto signed_index = [n](std::size_t k) {
    long kk = static_cast<long>(k);
    if (kk >= static_cast<long>(n) / 2) kk -= static_cast<long>(n);
    return kk;
  };
  const long half = static_cast<long>(bins) / 2;
  auto add = [&](long m, double w) {
    const long b = static_cast<long>(bins);
    long idx = ((m + half) % b + b) % b;
    img.density[static_cast<std::size_t>(idx)] += w;
  };
  for (std::size_t k = 0; k < n; ++k) {
    const long kk = signed_index(k);
    if (kk % 2 == 0) {
      add(kk / 2, per_bin[k]);
    } else {
      const long lower = (kk - 1) / 2;  // kk - 1 is even, so this is exact
      add(lower, 0.5 * per_bin[k]);
      add(lower + 1, 0.5 * per_bin[k]);
    }
  }
  double total = 0.0;
  for (double d : img.density) total += d;
  if (total > 0.0) {
    for (auto& d : img.density) d /= total * img.spacing;
  }
  return img;
}

/// Density of y1 - y2, marginalized over the pair's total momentum.
inline RelativeImage coincidence_image(const BiphotonState& state) {
  const auto joint = relative_joint(state);
  return fold_relative_distribution(state.grid(), joint.relative_marginal());
}

/// Writes the amplitude as text: a '#' header with n_points and q_max, then
/// one row per q1 holding "re im" pairs over q2. Debug format only.
inline void write_state_text(std::ostream& os, const BiphotonState& state) {
  const std::size_t n = state.size();
  char buf[64];
  os << "# qdirsim biphoton state v1\n";
  os << "# n_points " << n << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", state.grid().q_max());
  os << "# q_max " << buf << "\n";
  os << "# layout row-major: rows q1 (signal), columns q2 (idler), entries 're im'\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto& a = state.at(i, j);
      std::snprintf(buf, sizeof buf, "%.17g %.17g", a.real(), a.imag());
      os << (j ? " " : "") << buf;
    }
    os << "\n";
  }
}

inline BiphotonState read_state_text(std::istream& is) {
  std::string line;
  std::size_t n = 0;
  double q_max = 0.0;
  while (is.peek() == '#' && std::getline(is, line)) {
    std::istringstream ls(line.substr(1));
    std::string key;
    ls >> key;
    if (key == "n_points") ls >> n;
    if (key == "q_max") ls >> q_max;
  }
  TransverseGrid grid(n, q_max);
  BiphotonState s(grid);
  for (auto& a : s.amplitude()) {
    double re = 0.0, im = 0.0;
    if (!(is >> re >> im)) throw DomainError("state", "truncated state file");
    a = {re, im};
  }
  return s;
}

}  // namespace qdirsim
