#pragma once

#include <complex>
#include <mutex>

#include <fftw3.h>
#include <Eigen/Dense>

#include "l1reg/errors.hpp"

namespace l1reg {

namespace detail {
// FFTW's planner is not reentrant; execution on existing plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Unitary 2-D DFT on N x N images stored as column-major vectors of length N^2.
///
/// Forward uses exp(-2 pi i jk / N) on both axes and both directions are
/// scaled by 1/N so the transform is an isometry. Plans are made once with
/// FFTW_ESTIMATE, which keeps the arithmetic identical from run to run.
class Fft2D {
 public:
  explicit Fft2D(int n_side) : n_(n_side) {
    if (n_side < 1) throw DomainError("Fft2D: side length must be positive");
    const auto total = static_cast<std::size_t>(n_side) * static_cast<std::size_t>(n_side);
    auto* in = fftw_alloc_complex(total);
    auto* out = fftw_alloc_complex(total);
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      forward_ = fftw_plan_dft_2d(n_side, n_side, in, out, FFTW_FORWARD,
                                  FFTW_ESTIMATE | FFTW_UNALIGNED);
      backward_ = fftw_plan_dft_2d(n_side, n_side, in, out, FFTW_BACKWARD,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    fftw_free(in);
    fftw_free(out);
    if (forward_ == nullptr || backward_ == nullptr) throw NumericalFailure("Fft2D: planning failed");
  }

  Fft2D(const Fft2D&) = delete;
  Fft2D& operator=(const Fft2D&) = delete;

  ~Fft2D() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }

  int side() const { return n_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(n_) * n_; }

  Eigen::VectorXcd forward(const Eigen::VectorXcd& x) const { return run(forward_, x); }
  Eigen::VectorXcd forward(const Eigen::VectorXd& x) const {
    return run(forward_, x.cast<std::complex<double>>());
  }
  Eigen::VectorXcd inverse(const Eigen::VectorXcd& x) const { return run(backward_, x); }
  /// Inverse transform of a spectrum known to come from a real image.
  Eigen::VectorXd inverse_real(const Eigen::VectorXcd& x) const { return inverse(x).real(); }

 private:
  Eigen::VectorXcd run(fftw_plan plan, const Eigen::VectorXcd& x) const {
    require_same_size(x.size(), size(), "Fft2D");
    Eigen::VectorXcd in = x;
    Eigen::VectorXcd out(size());
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    out /= static_cast<double>(n_);
    return out;
  }

  int n_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace l1reg
