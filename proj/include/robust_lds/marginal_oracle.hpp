#pragma once

// Quadrature oracle for the scalar marginal density of a hierarchical
// Gaussian noise spec. Test/validation utility; never used in the filter
// loop. The mixture integral over the mixing parameter is evaluated with
// Boost double-exponential quadrature (exp_sinh on (0,inf), tanh_sinh on
// (0,1) for the Beta-mixed Slash family).

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <stdexcept>

#include "robust_lds/hgm.hpp"

namespace robust_lds {

inline double gamma_logpdf(double lambda, double a, double b) {
  if (lambda <= 0) return -std::numeric_limits<double>::infinity();
  return a * std::log(b) - std::lgamma(a) + (a - 1) * std::log(lambda) - b * lambda;
}

inline double inverse_gamma_logpdf(double lambda, double a, double b) {
  if (lambda <= 0) return -std::numeric_limits<double>::infinity();
  return a * std::log(b) - std::lgamma(a) - (a + 1) * std::log(lambda) - b / lambda;
}

inline double beta_logpdf(double lambda, double a, double b) {
  if (lambda <= 0 || lambda >= 1) return -std::numeric_limits<double>::infinity();
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
         (a - 1) * std::log(lambda) + (b - 1) * std::log1p(-lambda);
}

inline double mixing_logpdf(const MixingMarginal& m, double lambda) {
  switch (m.kind) {
    case MixingMarginal::Kind::Gamma: return gamma_logpdf(lambda, m.a, m.b);
    case MixingMarginal::Kind::InverseGamma: return inverse_gamma_logpdf(lambda, m.a, m.b);
    case MixingMarginal::Kind::Beta: return beta_logpdf(lambda, m.a, m.b);
    case MixingMarginal::Kind::None: break;
  }
  throw std::domain_error("mixing_logpdf: family has no mixing density");
}

inline double normal_logpdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * std::log(2 * M_PI * var) - 0.5 * r * r / var;
}

namespace detail {

inline void require_scalar(const HgmNoiseSpec& spec) {
  if (spec.dim() != 1)
    throw std::invalid_argument("oracle requires a scalar noise spec");
}

// conditional moments of the scalar noise given lambda
inline void scalar_moments(const HgmNoiseSpec& spec, double lambda,
                           double& mean, double& var) {
  if (is_smn(spec.family)) {
    mean = spec.mu[0];
    var = spec.sigma(0, 0) / lambda;
  } else {
    mean = spec.mu[0] + spec.beta[0] * lambda;
    var = spec.sigma(0, 0) * lambda;
  }
}

template <class F>
double integrate_mixing(const HgmNoiseSpec& spec, F&& f, double tol = 1e-10) {
  const MixingMarginal m = spec.mixing();
  double error = 0, l1 = 0;
  double result;
  if (m.kind == MixingMarginal::Kind::Beta) {
    boost::math::quadrature::tanh_sinh<double> integ;
    result = integ.integrate(f, 0.0, 1.0, tol, &error, &l1);
  } else {
    boost::math::quadrature::exp_sinh<double> integ;
    result = integ.integrate(f, tol, &error);
    l1 = result;
  }
  if (!(error <= 1e-6 * std::max(1.0, l1)))
    throw std::runtime_error("mixing quadrature did not converge");
  return result;
}

}  // namespace detail

/// log of the marginal density p(x) = \int N(x | m(l), v(l)) p(l) dl.
inline double marginal_logpdf_oracle(const HgmNoiseSpec& spec, double x) {
  detail::require_scalar(spec);
  if (spec.family == NoiseFamily::Gaussian)
    return normal_logpdf(x, spec.mu[0], spec.sigma(0, 0));
  const MixingMarginal m = spec.mixing();
  const double p = detail::integrate_mixing(spec, [&](double lambda) {
    double mean, var;
    detail::scalar_moments(spec, lambda, mean, var);
    return std::exp(normal_logpdf(x, mean, var) + mixing_logpdf(m, lambda));
  });
  if (!(p > 0)) return -std::numeric_limits<double>::infinity();
  return std::log(p);
}

/// P(a < X <= b) under the marginal, via the conditional normal cdf.
/// Infinite endpoints are allowed.
inline double marginal_interval_probability(const HgmNoiseSpec& spec,
                                            double a, double b) {
  detail::require_scalar(spec);
  boost::math::normal_distribution<double> std_normal;
  auto cdf_cond = [&](double x, double mean, double sd) {
    if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
    return boost::math::cdf(std_normal, (x - mean) / sd);
  };
  if (spec.family == NoiseFamily::Gaussian) {
    const double sd = std::sqrt(spec.sigma(0, 0));
    return cdf_cond(b, spec.mu[0], sd) - cdf_cond(a, spec.mu[0], sd);
  }
  const MixingMarginal m = spec.mixing();
  return detail::integrate_mixing(spec, [&](double lambda) {
    double mean, var;
    detail::scalar_moments(spec, lambda, mean, var);
    const double sd = std::sqrt(var);
    return std::exp(mixing_logpdf(m, lambda)) *
           (cdf_cond(b, mean, sd) - cdf_cond(a, mean, sd));
  });
}

}  // namespace robust_lds
