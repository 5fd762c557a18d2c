#include "hkest/wkb.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "hkest/errors.hpp"
#include "hkest/fit.hpp"

namespace hkest {

int default_wkb_order(const OperatorParams& p) {
  const double xi = p.derived().xi;
  int k = 1;
  while (k * xi + 2.0 - p.alpha() <= 0.0) ++k;
  return k + 1;
}

WkbExpansion wkb_coefficients(const OperatorParams& p, double lambda, int k, double base_radius,
                              bool allow_low_order) {
  if (k < 1) throw InvalidInput("wkb order k must be >= 1");
  if (base_radius < 0.0) throw InvalidInput("wkb base radius must be >= 0");
  WkbExpansion e;
  e.lambda = lambda;
  e.order_k = k;
  e.base_radius = base_radius;
  e.xi = p.derived().xi;
  e.c0 = p.derived().c0;
  e.order_override = allow_low_order;
  e.order_below_threshold = !(k * e.xi + 2.0 - p.alpha() > 0.0);

  auto& c = e.coeffs;
  c.assign(static_cast<std::size_t>(k), 0.0);
  // c[i-1] holds c_i.
  c[0] = (lambda - e.c0) / 2.0;
  if (k >= 2) c[1] = -e.xi * c[0];
  for (int i = 2; i <= k - 1; ++i) {
    double conv = 0.0;
    for (int j = 1; j <= i - 1; ++j) conv += c[j - 1] * c[i - j - 1];
    c[i] = -(e.xi * (i + 1) * c[i - 1] + conv) / 2.0;
  }
  return e;
}

double recurrence_residual(const WkbExpansion& e) {
  const auto& c = e.coeffs;
  const int k = e.order_k;
  // each equation is scaled by its largest term, so growing coefficients
  // do not inflate the residual
  auto rel = [](double sum, double scale) { return std::abs(sum) / std::max(1.0, scale); };
  double worst = rel(2.0 * c[0] + e.c0 - e.lambda, std::max({std::abs(2.0 * c[0]), std::abs(e.c0), std::abs(e.lambda)}));
  if (k >= 2)
    worst = std::max(worst, rel(2.0 * c[0] * e.xi + 2.0 * c[1], std::max(std::abs(2.0 * c[0] * e.xi), std::abs(2.0 * c[1]))));
  for (int i = 2; i <= k - 1; ++i) {
    double conv = 0.0, conv_abs = 0.0;
    for (int j = 1; j <= i - 1; ++j) {
      conv += c[j - 1] * c[i - j - 1];
      conv_abs += std::abs(c[j - 1] * c[i - j - 1]);
    }
    const double lead = e.xi * (i + 1) * c[i - 1];
    worst = std::max(worst, rel(lead + 2.0 * c[i] + conv, std::max({std::abs(lead), std::abs(2.0 * c[i]), conv_abs})));
  }
  return worst;
}

double v_lambda(const WkbExpansion& e, double r) {
  if (!(r > 0.0)) throw InvalidInput("v_lambda requires r > 0");
  double v = 0.0;
  for (int i = 1; i <= e.order_k; ++i) v += e.coeffs[i - 1] * std::pow(r, -(i * e.xi + 1.0));
  return v;
}

double v_lambda_prime(const WkbExpansion& e, double r) {
  if (!(r > 0.0)) throw InvalidInput("v_lambda_prime requires r > 0");
  double d = 0.0;
  for (int i = 1; i <= e.order_k; ++i)
    d -= e.coeffs[i - 1] * (i * e.xi + 1.0) * std::pow(r, -(i * e.xi + 2.0));
  return d;
}

double v_integral(const WkbExpansion& e, double r) {
  const double R = e.base_radius;
  if (r < R) throw InvalidInput("v_integral requires r >= R");
  if (r == R) return 0.0;
  if (!(R > 0.0)) throw InvalidInput("v_integral requires R > 0");
  double s = 0.0;
  for (int j = 1; j <= e.order_k; ++j) {
    const double jx = j * e.xi;
    // R^{-j xi} - r^{-j xi}, written to keep precision when r ~ R
    const double diff = -std::expm1(-jx * std::log(r / R)) * std::pow(R, -jx);
    s += e.coeffs[j - 1] / jx * diff;
  }
  return s;
}

double v_integral_limit(const WkbExpansion& e) {
  const double R = e.base_radius;
  if (!(R > 0.0)) throw InvalidInput("v_integral_limit requires R > 0");
  double s = 0.0;
  for (int j = 1; j <= e.order_k; ++j) {
    const double jx = j * e.xi;
    s += e.coeffs[j - 1] / jx * std::pow(R, -jx);
  }
  return s;
}

double phase_integral(const OperatorParams& p, double R, double r, double rel_tol) {
  if (R < 0.0 || r < R) throw InvalidInput("phase_integral requires 0 <= R <= r");
  if (r == R) return 0.0;
  const CoefficientFunctions cf(p);
  auto integrand = [&cf](double s) { return std::sqrt(cf.h(s)); };
  double err = 0.0, l1 = 0.0;
  const double val = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      integrand, R, r, 30, rel_tol, &err, &l1);
  if (!(err <= rel_tol * std::max(l1, std::numeric_limits<double>::min()))) {
    std::ostringstream os;
    os << "phase integral on [" << R << ", " << r << "] did not converge: error estimate " << err;
    throw ConvergenceFailure(os.str(), err);
  }
  return val;
}

double f_eval(const OperatorParams& p, const WkbExpansion& e, double r) {
  const CoefficientFunctions cf(p);
  const double amp = std::pow(r, -(p.N() - 1) / 2.0) * std::pow(cf.h(r), -0.25);
  return amp * std::exp(-phase_integral(p, e.base_radius, r) - v_integral(e, r));
}

double residual_g(const OperatorParams& p, const WkbExpansion& e, double r) {
  if (!(r > 0.0)) throw InvalidInput("residual_g requires r > 0");
  const CoefficientFunctions cf(p);
  const double l = cf.log_h_prime(r);
  const double h2 = cf.h_second_over_h(r);
  const double v = v_lambda(e, r);
  const double dv = v_lambda_prime(e, r);
  const double m = (p.N() - 1.0) * (p.N() - 3.0) / (4.0 * r * r);
  return 5.0 / 16.0 * l * l - h2 / 4.0 + v * v + v * (l / 2.0 + 2.0 * std::sqrt(cf.h(r))) - dv - m;
}

SlopeReport residual_decay_report(const OperatorParams& p, const WkbExpansion& e, double r_lo,
                                  double r_hi, int samples) {
  if (!(r_lo >= 1.0 && r_lo < r_hi)) throw InvalidInput("residual_decay_report needs 1 <= r_lo < r_hi");
  if (samples < 10) throw InvalidInput("residual_decay_report needs at least 10 samples");
  SlopeReport rep;
  rep.expected_slope = -std::min(e.order_k * e.xi, p.alpha());
  rep.r.resize(static_cast<std::size_t>(samples));
  log_space(r_lo, r_hi, rep.r);
  rep.deviation.reserve(rep.r.size());
  std::vector<double> lx, ly;
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(e.lambda));
  for (double r : rep.r) {
    const double dev = r * r * residual_g(p, e, r) - e.lambda;
    rep.deviation.push_back(dev);
    if (std::abs(dev) > noise) {
      lx.push_back(std::log(r));
      ly.push_back(std::log(std::abs(dev)));
    }
  }
  if (lx.size() < 2) {
    rep.vacuous = true;
    rep.measured_slope = rep.expected_slope;
    rep.note = "vacuously passed: residual below machine noise at all samples";
    return rep;
  }
  const auto fit = fit_line(lx, ly);
  rep.measured_slope = fit.slope;
  rep.fit_rms_residual = fit.rms_residual;
  rep.r_squared = fit.r_squared;
  if (lx.size() < rep.r.size())
    rep.note = std::to_string(rep.r.size() - lx.size()) + " samples below machine noise dropped";
  if (std::all_of(e.coeffs.begin(), e.coeffs.end(), [](double c) { return c == 0.0; })) {
    // lambda = c0: v vanishes and the slope only sees the O(r^-(alpha+2)) remainder
    rep.vacuous = true;
    rep.note = "vacuous: every coefficient is zero (lambda = c0); the fit measures the bare remainder only";
  }
  return rep;
}

}  // namespace hkest
