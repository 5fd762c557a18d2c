#include "hkest/model.hpp"

#include <numbers>
#include <sstream>

#include "hkest/errors.hpp"

namespace hkest {

namespace {

DerivedConstants compute_derived(int N, double alpha, double beta) {
  DerivedConstants d;
  d.xi = (beta - alpha) / 2.0 + 1.0;
  d.b = (beta - alpha + 2.0) / (beta + alpha - 2.0);
  const double half = (d.xi - 1.0) / 2.0;
  d.c0 = half * half + half - (N - 1.0) * (N - 3.0) / 4.0;
  d.power_exp = -(N - 1.0) / 2.0 - (beta - alpha) / 4.0;
  d.phase_exp = (beta - alpha + 2.0) / 2.0;
  d.phase_coeff = 2.0 / (beta - alpha + 2.0);
  return d;
}

}  // namespace

bool OperatorParams::within_hypotheses() const noexcept {
  return n_ > 2 && alpha_ >= 2.0 && beta_ > alpha_ - 2.0;
}

std::string OperatorParams::describe() const {
  std::ostringstream os;
  os << "N=" << n_ << " alpha=" << alpha_ << " beta=" << beta_;
  if (sanity_) os << " (sanity mode)";
  if (corrupted_) os << " (corrupted envelope phase, negative control)";
  return os.str();
}

OperatorParams make_params(int N, double alpha, double beta, bool sanity_mode) {
  if (N <= 2) throw InvalidInput("N must be > 2 (got " + std::to_string(N) + ")");
  if (!std::isfinite(alpha) || !std::isfinite(beta))
    throw InvalidInput("alpha and beta must be finite");
  if (sanity_mode) {
    if (alpha < 0.0) throw InvalidInput("sanity mode requires alpha >= 0");
    if (beta < 0.0) throw InvalidInput("sanity mode requires beta >= 0");
  } else {
    if (alpha < 2.0) throw InvalidInput("hypothesis violated: alpha < 2");
    if (beta <= alpha - 2.0) throw InvalidInput("hypothesis violated: beta <= alpha-2");
  }
  OperatorParams p;
  p.n_ = N;
  p.alpha_ = alpha;
  p.beta_ = beta;
  p.sanity_ = sanity_mode;
  p.derived_ = compute_derived(N, alpha, beta);
  return p;
}

OperatorParams corrupt_phase_for_testing(OperatorParams p) {
  p.derived_.phase_coeff *= 0.5;
  p.corrupted_ = true;
  return p;
}

CoefficientFunctions::CoefficientFunctions(const OperatorParams& p)
    : n_(p.N()),
      alpha_(p.alpha()),
      beta_(p.beta()),
      diffusion_on_(p.alpha() > 0.0),
      potential_on_(p.beta() > 0.0) {}

double CoefficientFunctions::a(double r) const {
  return diffusion_on_ ? 1.0 + std::pow(r, alpha_) : 1.0;
}

double CoefficientFunctions::V(double r) const {
  return potential_on_ ? std::pow(r, beta_) : 0.0;
}

// log h = beta log r - log(1 + r^alpha)
double CoefficientFunctions::log_h_prime(double r) const {
  double d = potential_on_ ? beta_ / r : 0.0;
  if (diffusion_on_) d -= alpha_ * std::pow(r, alpha_ - 1.0) / a(r);
  return d;
}

// h''/h = (h'/h)' + (h'/h)^2
double CoefficientFunctions::h_second_over_h(double r) const {
  double dl = potential_on_ ? -beta_ / (r * r) : 0.0;
  if (diffusion_on_) {
    const double ar = a(r);
    const double ra2 = std::pow(r, alpha_ - 2.0);
    dl -= alpha_ * (alpha_ - 1.0) * ra2 / ar;
    const double ra1 = std::pow(r, alpha_ - 1.0);
    dl += alpha_ * alpha_ * ra1 * ra1 / (ar * ar);
  }
  const double l = log_h_prime(r);
  return dl + l * l;
}

double envelope(const OperatorParams& p, double r) {
  const auto& d = p.derived();
  return std::pow(r, d.power_exp) * std::exp(-d.phase_coeff * std::pow(r, d.phase_exp));
}

EnvelopeValue envelope_checked(const OperatorParams& p, double r) {
  return {envelope(p, r), r < 1.0};
}

double sphere_area(int N) {
  return 2.0 * std::pow(std::numbers::pi, N / 2.0) / std::tgamma(N / 2.0);
}

}  // namespace hkest
