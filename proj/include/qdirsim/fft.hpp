#pragma once

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <mutex>
#include <span>

namespace qdirsim::detail {

// The FFTW planner is not re-entrant.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// Unnormalized length-n DFT, out[k] = sum_j in[j] exp(sign * 2 pi i j k / n).
/// Owns its plan and work buffer; not shareable across threads.
class Dft1D {
 public:
  enum class Direction { forward = FFTW_FORWARD, backward = FFTW_BACKWARD };

  Dft1D(std::size_t n, Direction dir) : n_(n) {
    buffer_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), buffer_, buffer_, static_cast<int>(dir),
                             FFTW_ESTIMATE);
  }
  ~Dft1D() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(buffer_);
  }
  Dft1D(const Dft1D&) = delete;
  Dft1D& operator=(const Dft1D&) = delete;

  std::size_t size() const { return n_; }

  void execute(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) {
    auto* buf = reinterpret_cast<std::complex<double>*>(buffer_);
    std::copy(in.begin(), in.end(), buf);
    fftw_execute(plan_);
    std::copy(buf, buf + n_, out.begin());
  }

 private:
  std::size_t n_;
  fftw_complex* buffer_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace qdirsim::detail
