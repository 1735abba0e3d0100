#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

#include "robust_lds/rng.hpp"

namespace robust_lds {

/// Hierarchically Gaussian noise families. The symmetric (scale-mixture)
/// families are Gaussian with covariance Sigma/lambda given the mixing value;
/// the variance-mean families shift the mean by beta*lambda and scale the
/// covariance by lambda.
enum class NoiseFamily {
  Gaussian,
  StudentT,
  PearsonVII,
  Slash,
  VarianceGamma,
  GhSkewT,
  GhVarianceGamma
};

inline bool is_smn(NoiseFamily f) {
  return f == NoiseFamily::StudentT || f == NoiseFamily::PearsonVII ||
         f == NoiseFamily::Slash || f == NoiseFamily::VarianceGamma;
}

inline bool is_nvmm(NoiseFamily f) {
  return f == NoiseFamily::GhSkewT || f == NoiseFamily::GhVarianceGamma;
}

inline const char* family_name(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::Gaussian: return "gaussian";
    case NoiseFamily::StudentT: return "student_t";
    case NoiseFamily::PearsonVII: return "pearson_vii";
    case NoiseFamily::Slash: return "slash";
    case NoiseFamily::VarianceGamma: return "variance_gamma";
    case NoiseFamily::GhSkewT: return "gh_skew_t";
    case NoiseFamily::GhVarianceGamma: return "gh_variance_gamma";
  }
  return "?";
}

/// Mixing marginal attached to a noise family.
struct MixingMarginal {
  enum class Kind { None, Gamma, InverseGamma, Beta };
  Kind kind = Kind::None;
  double a = 0.0;  // shape (Gamma/IG) or first Beta parameter
  double b = 0.0;  // rate (Gamma/IG) or second Beta parameter
};

struct HgmNoiseSpec {
  NoiseFamily family = NoiseFamily::Gaussian;
  Eigen::VectorXd mu;
  Eigen::VectorXd beta;   // zero for SMN families
  Eigen::MatrixXd sigma;  // symmetric positive definite scale
  double nu = 0.0;
  double delta = 0.0;  // Pearson VII only

  Eigen::Index dim() const { return mu.size(); }

  const Eigen::MatrixXd& sigma_chol() const { return sigma_chol_; }

  MixingMarginal mixing() const {
    switch (family) {
      case NoiseFamily::Gaussian:
        return {MixingMarginal::Kind::None, 0.0, 0.0};
      case NoiseFamily::StudentT:
        return {MixingMarginal::Kind::Gamma, nu / 2, nu / 2};
      case NoiseFamily::PearsonVII:
        return {MixingMarginal::Kind::Gamma, nu / 2, delta / 2};
      case NoiseFamily::Slash:
        return {MixingMarginal::Kind::Beta, nu, 1.0};
      case NoiseFamily::VarianceGamma:
      case NoiseFamily::GhSkewT:
        return {MixingMarginal::Kind::InverseGamma, nu / 2, nu / 2};
      case NoiseFamily::GhVarianceGamma:
        return {MixingMarginal::Kind::Gamma, nu / 2, nu / 2};
    }
    throw std::logic_error("unknown family");
  }

  static HgmNoiseSpec gaussian(Eigen::VectorXd mu, Eigen::MatrixXd sigma) {
    return make(NoiseFamily::Gaussian, std::move(mu), {}, std::move(sigma), 0, 0);
  }
  static HgmNoiseSpec student_t(Eigen::VectorXd mu, Eigen::MatrixXd sigma, double nu) {
    return make(NoiseFamily::StudentT, std::move(mu), {}, std::move(sigma), nu, 0);
  }
  static HgmNoiseSpec pearson_vii(Eigen::VectorXd mu, Eigen::MatrixXd sigma,
                                  double nu, double delta) {
    return make(NoiseFamily::PearsonVII, std::move(mu), {}, std::move(sigma), nu, delta);
  }
  static HgmNoiseSpec slash(Eigen::VectorXd mu, Eigen::MatrixXd sigma, double nu) {
    return make(NoiseFamily::Slash, std::move(mu), {}, std::move(sigma), nu, 0);
  }
  static HgmNoiseSpec variance_gamma(Eigen::VectorXd mu, Eigen::MatrixXd sigma, double nu) {
    return make(NoiseFamily::VarianceGamma, std::move(mu), {}, std::move(sigma), nu, 0);
  }
  /// Laplace(mu, sigma) is variance gamma at nu = 2.
  static HgmNoiseSpec laplace(Eigen::VectorXd mu, Eigen::MatrixXd sigma) {
    return variance_gamma(std::move(mu), std::move(sigma), 2.0);
  }
  static HgmNoiseSpec gh_skew_t(Eigen::VectorXd mu, Eigen::VectorXd beta,
                                Eigen::MatrixXd sigma, double nu) {
    return make(NoiseFamily::GhSkewT, std::move(mu), std::move(beta), std::move(sigma), nu, 0);
  }
  static HgmNoiseSpec gh_variance_gamma(Eigen::VectorXd mu, Eigen::VectorXd beta,
                                        Eigen::MatrixXd sigma, double nu) {
    return make(NoiseFamily::GhVarianceGamma, std::move(mu), std::move(beta),
                std::move(sigma), nu, 0);
  }

  // scalar convenience
  static Eigen::VectorXd vec1(double v) {
    Eigen::VectorXd x(1);
    x << v;
    return x;
  }
  static Eigen::MatrixXd mat1(double v) {
    Eigen::MatrixXd x(1, 1);
    x << v;
    return x;
  }

 private:
  Eigen::MatrixXd sigma_chol_;

  static HgmNoiseSpec make(NoiseFamily family, Eigen::VectorXd mu,
                           Eigen::VectorXd beta, Eigen::MatrixXd sigma,
                           double nu, double delta) {
    HgmNoiseSpec s;
    s.family = family;
    s.mu = std::move(mu);
    s.beta = beta.size() > 0 ? std::move(beta)
                             : Eigen::VectorXd::Zero(s.mu.size()).eval();
    s.sigma = std::move(sigma);
    s.nu = nu;
    s.delta = delta;
    s.validate();
    return s;
  }

  void validate() {
    const auto n = mu.size();
    if (sigma.rows() != n || sigma.cols() != n || beta.size() != n)
      throw std::invalid_argument("HgmNoiseSpec: inconsistent dimensions");
    if (!sigma.isApprox(sigma.transpose(), 1e-12))
      throw std::invalid_argument("HgmNoiseSpec: Sigma not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("HgmNoiseSpec: Sigma not positive definite");
    sigma_chol_ = llt.matrixL();
    if (family != NoiseFamily::Gaussian && nu <= 0.0)
      throw std::invalid_argument("HgmNoiseSpec: nu must be positive");
    if (family == NoiseFamily::PearsonVII && delta <= 0.0)
      throw std::invalid_argument("HgmNoiseSpec: delta must be positive");
    if (!is_nvmm(family) && beta.norm() != 0.0)
      throw std::invalid_argument("HgmNoiseSpec: beta must be zero for symmetric families");
  }
};

struct ConditionalGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline void check_lambda(const HgmNoiseSpec& spec, double lambda) {
  if (spec.family == NoiseFamily::Gaussian) return;
  if (!(lambda > 0.0))
    throw std::domain_error("mixing value must be positive");
  if (spec.family == NoiseFamily::Slash && lambda >= 1.0)
    throw std::domain_error("Slash mixing value must be below 1");
}

/// Gaussian moments of the noise given the mixing value.
inline ConditionalGaussian conditional_gaussian(const HgmNoiseSpec& spec,
                                                double lambda) {
  check_lambda(spec, lambda);
  switch (spec.family) {
    case NoiseFamily::Gaussian:
      return {spec.mu, spec.sigma};
    case NoiseFamily::StudentT:
    case NoiseFamily::PearsonVII:
    case NoiseFamily::Slash:
    case NoiseFamily::VarianceGamma:
      return {spec.mu, spec.sigma / lambda};
    case NoiseFamily::GhSkewT:
    case NoiseFamily::GhVarianceGamma:
      return {spec.mu + spec.beta * lambda, spec.sigma * lambda};
  }
  throw std::logic_error("unknown family");
}

/// Draw from the family's mixing density.
inline double sample_invariant(const HgmNoiseSpec& spec, RngStream& rng) {
  const MixingMarginal m = spec.mixing();
  switch (m.kind) {
    case MixingMarginal::Kind::None:
      throw std::domain_error("Gaussian family has no mixing variable");
    case MixingMarginal::Kind::Gamma:
      return rng.gamma(m.a, m.b);
    case MixingMarginal::Kind::InverseGamma:
      return rng.inverse_gamma(m.a, m.b);
    case MixingMarginal::Kind::Beta:
      return rng.beta(m.a, m.b);
  }
  throw std::logic_error("unknown mixing kind");
}

/// Hierarchical draw: mixing value, then the conditional Gaussian.
inline Eigen::VectorXd sample_noise(const HgmNoiseSpec& spec, RngStream& rng) {
  Eigen::VectorXd z(spec.dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  if (spec.family == NoiseFamily::Gaussian)
    return spec.mu + spec.sigma_chol() * z;
  const double lambda = sample_invariant(spec, rng);
  if (is_smn(spec.family))
    return spec.mu + (spec.sigma_chol() * z) / std::sqrt(lambda);
  return spec.mu + spec.beta * lambda + std::sqrt(lambda) * (spec.sigma_chol() * z);
}

}  // namespace robust_lds
