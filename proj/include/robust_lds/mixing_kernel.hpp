#pragma once

#include <cmath>
#include <stdexcept>

#include "robust_lds/hgm.hpp"
#include "robust_lds/rng.hpp"

namespace robust_lds {

/// Marginal-preserving AR(1) transition kernel for a mixing parameter,
/// built from auxiliary latent variables so that the chain is stationary
/// with the noise family's mixing density as invariant marginal and
/// autocorrelation rho^tau.
struct MixingKernel {
  enum class Marginal { Degenerate, Gamma, InverseGamma, Beta };

  Marginal marginal = Marginal::Degenerate;
  double a = 0.0;  // Gamma(a,b) shape, IG nu/2, Beta first parameter nu
  double b = 0.0;  // Gamma(a,b) rate, IG nu/2, Beta second parameter (1)
  double rho_requested = 0.0;
  double rho_realized = 0.0;

  // derived construction parameters
  double alpha = 0.0;  // IG: auxiliary gamma shape
  double c = 0.0;      // Gamma: Poisson thinning rate
  long m = 0;          // Beta: auxiliary binomial count
};

inline MixingKernel degenerate_kernel() { return {}; }

/// IG(nu/2, nu/2) marginal with an explicit auxiliary shape alpha. The
/// construction preserves the marginal for every alpha > 0; the rho <-> alpha
/// map only exists for nu > 2.
inline MixingKernel make_ig_kernel_alpha(double nu, double alpha) {
  if (!(nu > 0.0) || !(alpha > 0.0))
    throw std::invalid_argument("make_ig_kernel_alpha: nu and alpha must be positive");
  MixingKernel k;
  k.marginal = MixingKernel::Marginal::InverseGamma;
  k.a = k.b = nu / 2;
  k.alpha = alpha;
  k.rho_realized = nu > 2 ? 2 * alpha / (nu + 2 * alpha - 2) : 1.0;
  k.rho_requested = k.rho_realized;
  return k;
}

/// Build the kernel matching a noise spec's mixing marginal.
///
/// IG case with nu <= 2: the marginal has infinite variance, so no
/// autocorrelation target is realizable (the paper's formula collapses to 1
/// for every alpha). The auxiliary construction still preserves the marginal,
/// and a persistent chain is what makes the flat heavy-tailed priors usable,
/// so we keep it with a fixed auxiliary shape alpha = nu/2 + 1; use
/// make_ig_kernel_alpha to override.
inline MixingKernel make_kernel(const HgmNoiseSpec& spec, double rho) {
  if (spec.family == NoiseFamily::Gaussian) return degenerate_kernel();
  if (!(rho > 0.0 && rho < 1.0))
    throw std::invalid_argument("make_kernel: rho must be in (0,1)");
  const MixingMarginal mm = spec.mixing();
  MixingKernel k;
  k.rho_requested = rho;
  switch (mm.kind) {
    case MixingMarginal::Kind::Gamma: {
      k.marginal = MixingKernel::Marginal::Gamma;
      k.a = mm.a;
      k.b = mm.b;
      k.c = mm.b * rho / (1.0 - rho);
      k.rho_realized = k.c / (mm.b + k.c);
      return k;
    }
    case MixingMarginal::Kind::InverseGamma: {
      const double nu = 2 * mm.a;
      if (nu > 2.0) {
        k = make_ig_kernel_alpha(nu, rho * (nu - 2) / (2 * (1 - rho)));
        k.rho_requested = rho;
      } else {
        k = make_ig_kernel_alpha(nu, nu / 2 + 1);
        k.rho_requested = rho;
        k.rho_realized = 1.0;  // formula value; autocorrelation undefined
      }
      return k;
    }
    case MixingMarginal::Kind::Beta: {
      const double nu = mm.a;  // Be(nu, 1)
      k.marginal = MixingKernel::Marginal::Beta;
      k.a = nu;
      k.b = 1.0;
      // smallest integer m with m/(nu+1+m) >= rho
      k.m = static_cast<long>(std::ceil(rho * (nu + 1) / (1.0 - rho) - 1e-12));
      if (k.m < 1) k.m = 1;
      k.rho_realized = static_cast<double>(k.m) / (nu + 1 + k.m);
      return k;
    }
    case MixingMarginal::Kind::None:
      break;
  }
  throw std::invalid_argument("make_kernel: unsupported mixing marginal");
}

/// One transition of the chain.
inline double step(const MixingKernel& k, double lambda_prev, RngStream& rng) {
  switch (k.marginal) {
    case MixingKernel::Marginal::Degenerate:
      return lambda_prev;
    case MixingKernel::Marginal::InverseGamma: {
      const double u = rng.gamma(k.alpha, 1.0);
      const double v = rng.gamma(k.a + k.alpha, 1.0);
      return (k.a + u * lambda_prev) / v;
    }
    case MixingKernel::Marginal::Gamma: {
      const long z = rng.poisson(k.c * lambda_prev);
      return rng.gamma(k.a + z, k.b + k.c);
    }
    case MixingKernel::Marginal::Beta: {
      const long z = rng.binomial(k.m, lambda_prev);
      return rng.beta(k.a + z, k.b + k.m - z);
    }
  }
  throw std::logic_error("unknown kernel marginal");
}

/// Draw from the kernel's invariant marginal (chain initialization).
inline double sample_marginal(const MixingKernel& k, RngStream& rng) {
  switch (k.marginal) {
    case MixingKernel::Marginal::Degenerate:
      return 1.0;
    case MixingKernel::Marginal::InverseGamma:
      return rng.inverse_gamma(k.a, k.b);
    case MixingKernel::Marginal::Gamma:
      return rng.gamma(k.a, k.b);
    case MixingKernel::Marginal::Beta:
      return rng.beta(k.a, k.b);
  }
  throw std::logic_error("unknown kernel marginal");
}

}  // namespace robust_lds
