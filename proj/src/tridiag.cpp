#include "hkest/tridiag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hkest/errors.hpp"

namespace hkest {

void SymTridiag::multiply(std::span<const double> x, std::span<double> y) const {
  const std::size_t n = diag.size();
  for (std::size_t i = 0; i < n; ++i) {
    double s = diag[i] * x[i];
    if (i > 0) s += off[i - 1] * x[i - 1];
    if (i + 1 < n) s += off[i] * x[i + 1];
    y[i] = s;
  }
}

double SymTridiag::bilinear(std::span<const double> x, std::span<const double> y) const {
  const std::size_t n = diag.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += diag[i] * x[i] * y[i];
    if (i + 1 < n) s += off[i] * (x[i] * y[i + 1] + x[i + 1] * y[i]);
  }
  return s;
}

template <typename T>
TridiagLU<T>::TridiagLU(std::span<const T> sub, std::span<const T> diag, std::span<const T> super) {
  const std::size_t n = diag.size();
  d_.assign(diag.begin(), diag.end());
  u1_.assign(n, T{});
  u2_.assign(n, T{});
  l_.assign(n, T{});
  swapped_.assign(n, 0);
  for (std::size_t i = 0; i + 1 < n; ++i) u1_[i] = super[i];
  // Row i currently holds (d_[i], u1_[i], u2_[i]) in columns i, i+1, i+2.
  std::vector<T> lower(sub.begin(), sub.end());  // lower[i] = A(i+1, i)
  double scale2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale2 = std::max(scale2, std::norm(diag[i]));
  const double scale = std::sqrt(scale2);
  const double tiny = std::max(scale, 1.0) * std::numeric_limits<double>::epsilon() * 1e-3;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    T a = lower[i];
    if (std::norm(a) > std::norm(d_[i])) {
      // swap rows i and i+1
      swapped_[i] = 1;
      T nd = a, nu1 = d_[i + 1], nu2 = (i + 2 < n) ? u1_[i + 1] : T{};
      T od = d_[i], ou1 = u1_[i], ou2 = u2_[i];
      d_[i] = nd;
      u1_[i] = nu1;
      u2_[i] = nu2;
      const T f = od / nd;
      l_[i] = f;
      d_[i + 1] = ou1 - f * nu1;
      if (i + 2 < n) u1_[i + 1] = ou2 - f * nu2;
    } else {
      if (d_[i] == T{}) d_[i] = T(tiny);
      const T f = a / d_[i];
      l_[i] = f;
      d_[i + 1] -= f * u1_[i];
      // u2_[i] is zero without a swap, so row i+1 beyond column i+1 is unchanged
    }
  }
  if (n > 0 && d_[n - 1] == T{}) d_[n - 1] = T(tiny);
  for (auto& d : d_) d = T(1) / d;
}

template <typename T>
void TridiagLU<T>::solve(std::span<T> b) const {
  const std::size_t n = d_.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (swapped_[i]) std::swap(b[i], b[i + 1]);
    b[i + 1] -= l_[i] * b[i];
  }
  for (std::size_t k = n; k-- > 0;) {
    T s = b[k];
    if (k + 1 < n) s -= u1_[k] * b[k + 1];
    if (k + 2 < n) s -= u2_[k] * b[k + 2];
    b[k] = s * d_[k];
  }
}

template class TridiagLU<double>;
template class TridiagLU<std::complex<double>>;

TridiagonalPencil::TridiagonalPencil(SymTridiag K, SymTridiag M) : k_(std::move(K)), m_(std::move(M)) {
  if (k_.size() != m_.size() || k_.size() == 0)
    throw InvalidInput("pencil matrices must be nonempty and of equal size");
}

std::size_t TridiagonalPencil::count_below(double sigma) const {
  const std::size_t n = k_.size();
  const double pivmin = std::numeric_limits<double>::min() * 1e4;
  std::size_t count = 0;
  double d = k_.diag[0] - sigma * m_.diag[0];
  if (std::abs(d) < pivmin) d = -pivmin;
  if (d < 0.0) ++count;
  for (std::size_t i = 1; i < n; ++i) {
    const double e = k_.off[i - 1] - sigma * m_.off[i - 1];
    d = (k_.diag[i] - sigma * m_.diag[i]) - e * e / d;
    if (std::abs(d) < pivmin) d = -pivmin;
    if (d < 0.0) ++count;
  }
  return count;
}

double TridiagonalPencil::eigenvalue(std::size_t index) const {
  if (index >= size()) throw InvalidInput("eigenvalue index out of range");
  double lo = -1.0;
  while (count_below(lo) > index) lo *= 4.0;
  double hi = 1.0;
  while (count_below(hi) <= index) {
    hi *= 4.0;
    if (!std::isfinite(hi)) throw ConvergenceFailure("eigenvalue bracket diverged");
  }
  const double eps = std::numeric_limits<double>::epsilon();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= 2.0 * eps * std::max(std::abs(lo), std::abs(hi)) || mid == lo || mid == hi) break;
    if (count_below(mid) > index)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> TridiagonalPencil::inverse_iteration(double mu, int& iterations) const {
  const std::size_t n = size();
  std::vector<double> sub(n > 0 ? n - 1 : 0), dg(n), sup(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i < n; ++i) dg[i] = k_.diag[i] - mu * m_.diag[i];
  for (std::size_t i = 0; i + 1 < n; ++i) sub[i] = sup[i] = k_.off[i] - mu * m_.off[i];
  const TridiagLU<double> lu(sub, dg, sup);

  // Deterministic start vector with no special structure.
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(i) + 0.3);
  iterations = 0;
  for (int it = 0; it < 4; ++it) {
    m_.multiply(x, y);
    lu.solve(y);
    const double nrm = std::sqrt(std::abs(m_.bilinear(y, y)));
    if (!(nrm > 0.0) || !std::isfinite(nrm)) throw ConvergenceFailure("inverse iteration broke down");
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / nrm;
    ++iterations;
  }
  return x;
}

std::vector<TridiagonalPencil::Mode> TridiagonalPencil::smallest(std::size_t count) const {
  if (count == 0 || count > size()) throw InvalidInput("requested mode count out of range");
  const std::size_t n = size();
  std::vector<Mode> modes;
  modes.reserve(count);
  std::vector<double> mx(n);
  for (std::size_t j = 0; j < count; ++j) {
    Mode md;
    md.mu = eigenvalue(j);
    md.bisection_steps = 0;
    md.u = inverse_iteration(md.mu, md.inverse_iterations);
    // Two passes of M-orthogonalization against earlier modes.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& prev : modes) {
        m_.multiply(prev.u, mx);
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += mx[i] * md.u[i];
        for (std::size_t i = 0; i < n; ++i) md.u[i] -= c * prev.u[i];
      }
      const double nrm = std::sqrt(m_.bilinear(md.u, md.u));
      for (double& v : md.u) v /= nrm;
    }
    double amax = 0.0;
    for (double v : md.u) amax = std::max(amax, std::abs(v));
    for (double v : md.u) {
      if (std::abs(v) > 1e-8 * amax) {
        if (v < 0.0)
          for (double& w : md.u) w = -w;
        break;
      }
    }
    modes.push_back(std::move(md));
  }
  return modes;
}

}  // namespace hkest
