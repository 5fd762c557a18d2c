#pragma once

// Symmetric tridiagonal matrices, the generalized pencil K u = mu M u with K
// symmetric and M symmetric positive definite (both tridiagonal), and a
// pivoted tridiagonal LU used by inverse iteration and the time stepper.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace hkest {

struct SymTridiag {
  std::vector<double> diag;
  std::vector<double> off;  // off[i] couples i and i+1

  std::size_t size() const noexcept { return diag.size(); }
  void resize(std::size_t n) {
    diag.assign(n, 0.0);
    off.assign(n > 0 ? n - 1 : 0, 0.0);
  }
  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const;
  double bilinear(std::span<const double> x, std::span<const double> y) const;
};

/// Gaussian elimination with partial pivoting for a general tridiagonal
/// matrix (sub, diag, super). Works for real and complex scalars.
template <typename T>
class TridiagLU {
 public:
  TridiagLU() = default;
  TridiagLU(std::span<const T> sub, std::span<const T> diag, std::span<const T> super);
  /// Solves A x = b in place.
  void solve(std::span<T> b) const;
  std::size_t size() const noexcept { return d_.size(); }

 private:
  std::vector<T> d_, u1_, u2_, l_;  // d_ holds inverse pivots after factorization
  std::vector<unsigned char> swapped_;
};

/// Largest-to-smallest handling is left to callers; this class works with the
/// ascending eigenvalues mu_0 < mu_1 < ... of K u = mu M u.
class TridiagonalPencil {
 public:
  TridiagonalPencil(SymTridiag K, SymTridiag M);

  std::size_t size() const noexcept { return k_.size(); }
  const SymTridiag& K() const noexcept { return k_; }
  const SymTridiag& M() const noexcept { return m_; }

  /// Number of pencil eigenvalues strictly below sigma (Sylvester inertia of
  /// K - sigma M).
  std::size_t count_below(double sigma) const;

  /// index-th smallest eigenvalue by bisection, to near machine precision.
  double eigenvalue(std::size_t index) const;

  struct Mode {
    double mu;
    std::vector<double> u;  // M-normalized
    int bisection_steps;
    int inverse_iterations;
  };

  /// The `count` smallest modes, M-orthonormal, each with the sign of its
  /// first significant entry made positive.
  std::vector<Mode> smallest(std::size_t count) const;

 private:
  std::vector<double> inverse_iteration(double mu, int& iterations) const;

  SymTridiag k_, m_;
};

}  // namespace hkest
