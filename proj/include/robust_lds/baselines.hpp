#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "robust_lds/kalman.hpp"
#include "robust_lds/rbpf.hpp"
#include "robust_lds/rng.hpp"

namespace robust_lds {

/// Exact Kalman filter with fixed Gaussian noise moments.
class KalmanRunner {
 public:
  KalmanRunner(LdsModel model, GaussianBelief x0)
      : model_(std::move(model)), belief_(std::move(x0)) {
    if (model_.process_noise.family != NoiseFamily::Gaussian ||
        model_.measurement_noise.family != NoiseFamily::Gaussian)
      throw std::invalid_argument("KalmanRunner: noises must be Gaussian");
  }

  FilterEstimate step(const Eigen::VectorXd& y) {
    ++k_;
    const GaussianBelief pred =
        predict(belief_, model_.A(k_), model_.B(k_), model_.process_noise.mu,
                model_.process_noise.sigma);
    const UpdateResult up = update(pred, model_.C(k_), model_.measurement_noise.mu,
                                   model_.measurement_noise.sigma, y);
    belief_ = up.posterior;
    FilterEstimate est;
    est.mean = belief_.mean;
    est.cov = belief_.cov;
    est.ess = 1.0;
    est.loglik_increment = up.likelihood.logpdf(y);
    est.loglik_increment_posterior = est.loglik_increment;
    loglik_ += est.loglik_increment;
    return est;
  }

  const GaussianBelief& belief() const { return belief_; }
  double log_likelihood() const { return loglik_; }

 private:
  LdsModel model_;
  GaussianBelief belief_;
  int k_ = 0;
  double loglik_ = 0.0;
};

/// Generic bootstrap particle filter on the full state: the caller supplies
/// the transition sampler and the observation log-density.
class BootstrapPf {
 public:
  using TransitionSampler =
      std::function<Eigen::VectorXd(const Eigen::VectorXd& x, int k, RngStream&)>;
  using InitialSampler = std::function<Eigen::VectorXd(RngStream&)>;
  using ObservationLogpdf =
      std::function<double(const Eigen::VectorXd& y, const Eigen::VectorXd& x, int k)>;

  BootstrapPf(InitialSampler init, TransitionSampler transition,
              ObservationLogpdf obs_logpdf, int num_particles, std::uint64_t seed)
      : transition_(std::move(transition)),
        obs_logpdf_(std::move(obs_logpdf)),
        rng_(RngStream::derive_seed(seed, 0xb007)) {
    if (num_particles < 1)
      throw std::invalid_argument("BootstrapPf: need at least one particle");
    states_.resize(num_particles);
    for (auto& x : states_) x = init(rng_);
  }

  FilterEstimate step(const Eigen::VectorXd& y) {
    ++k_;
    const int n = static_cast<int>(states_.size());
    std::vector<double> lw(n);
    double max_lw = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      states_[i] = transition_(states_[i], k_, rng_);
      lw[i] = obs_logpdf_(y, states_[i], k_);
      max_lw = std::max(max_lw, lw[i]);
    }
    if (!std::isfinite(max_lw)) throw RbpfDivergence(k_);
    double s = 0;
    for (double& w : lw) s += std::exp(w - max_lw);
    const double incr = max_lw + std::log(s / n);  // prior weights uniform
    loglik_ += incr;

    const auto nx = states_.front().size();
    FilterEstimate est;
    est.mean = Eigen::VectorXd::Zero(nx);
    std::vector<double> norm_lw(n);
    const double log_norm = max_lw + std::log(s);
    for (int i = 0; i < n; ++i) {
      norm_lw[i] = lw[i] - log_norm;
      est.mean += std::exp(norm_lw[i]) * states_[i];
    }
    est.cov = Eigen::MatrixXd::Zero(nx, nx);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd d = states_[i] - est.mean;
      est.cov += std::exp(norm_lw[i]) * d * d.transpose();
    }
    est.ess = ess_from_log_weights(norm_lw);
    est.loglik_increment = incr;
    est.loglik_increment_posterior = incr;

    const std::vector<int> idx = resample_systematic(norm_lw, rng_);
    std::vector<Eigen::VectorXd> next(n);
    for (int i = 0; i < n; ++i) next[i] = states_[idx[i]];
    states_ = std::move(next);
    return est;
  }

  double log_likelihood() const { return loglik_; }

 private:
  TransitionSampler transition_;
  ObservationLogpdf obs_logpdf_;
  std::vector<Eigen::VectorXd> states_;
  RngStream rng_;
  int k_ = 0;
  double loglik_ = 0.0;
};

struct ImmConfig {
  std::vector<LdsModel> modes;  // Gaussian noises
  Eigen::MatrixXd transition_matrix;
  Eigen::VectorXd initial_mode_probs;

  void validate() const {
    const auto m = static_cast<Eigen::Index>(modes.size());
    if (m < 2) throw std::invalid_argument("ImmConfig: need at least two modes");
    if (transition_matrix.rows() != m || transition_matrix.cols() != m ||
        initial_mode_probs.size() != m)
      throw std::invalid_argument("ImmConfig: dimension mismatch");
    for (Eigen::Index i = 0; i < m; ++i)
      if (std::abs(transition_matrix.row(i).sum() - 1.0) > 1e-12)
        throw std::invalid_argument("ImmConfig: transition rows must sum to 1");
  }
};

/// Interacting multiple model filter: standard two-stage mixing/combination
/// cycle over a bank of mode-conditioned Kalman filters.
class ImmFilter {
 public:
  ImmFilter(ImmConfig config, GaussianBelief x0) : config_(std::move(config)) {
    config_.validate();
    const auto m = config_.modes.size();
    beliefs_.assign(m, x0);
    mode_probs_ = config_.initial_mode_probs;
  }

  FilterEstimate step(const Eigen::VectorXd& y) {
    ++k_;
    const auto m = static_cast<Eigen::Index>(config_.modes.size());
    const Eigen::MatrixXd& pi = config_.transition_matrix;

    // mixing probabilities and mixed initial conditions
    const Eigen::VectorXd cbar = pi.transpose() * mode_probs_;
    std::vector<GaussianBelief> mixed(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      GaussianBelief& b = mixed[j];
      b.mean = Eigen::VectorXd::Zero(beliefs_[0].mean.size());
      const double denom = std::max(cbar[j], 1e-300);
      for (Eigen::Index i = 0; i < m; ++i)
        b.mean += (pi(i, j) * mode_probs_[i] / denom) * beliefs_[i].mean;
      b.cov = Eigen::MatrixXd::Zero(b.mean.size(), b.mean.size());
      for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::VectorXd d = beliefs_[i].mean - b.mean;
        b.cov += (pi(i, j) * mode_probs_[i] / denom) *
                 (beliefs_[i].cov + d * d.transpose());
      }
      b.symmetrize();
    }

    // per-mode KF cycle and mode-probability update
    Eigen::VectorXd log_lik(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const LdsModel& mod = config_.modes[j];
      const GaussianBelief pred = predict(mixed[j], mod.A(k_), mod.B(k_),
                                          mod.process_noise.mu,
                                          mod.process_noise.sigma);
      const UpdateResult up = update(pred, mod.C(k_), mod.measurement_noise.mu,
                                     mod.measurement_noise.sigma, y);
      beliefs_[j] = up.posterior;
      log_lik[j] = up.likelihood.logpdf(y);
    }
    const double max_ll = log_lik.maxCoeff();
    Eigen::VectorXd unnorm(m);
    for (Eigen::Index j = 0; j < m; ++j)
      unnorm[j] = cbar[j] * std::exp(log_lik[j] - max_ll);
    double total = unnorm.sum();
    if (!(total > 0)) {
      unnorm.setConstant(1e-300);
      total = unnorm.sum();
    }
    mode_probs_ = unnorm / total;

    // moment-matched combination
    FilterEstimate est;
    est.mean = Eigen::VectorXd::Zero(beliefs_[0].mean.size());
    for (Eigen::Index j = 0; j < m; ++j)
      est.mean += mode_probs_[j] * beliefs_[j].mean;
    est.cov = Eigen::MatrixXd::Zero(est.mean.size(), est.mean.size());
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::VectorXd d = beliefs_[j].mean - est.mean;
      est.cov += mode_probs_[j] * (beliefs_[j].cov + d * d.transpose());
    }
    est.cov = ((est.cov + est.cov.transpose()) / 2).eval();
    est.ess = 1.0;
    est.loglik_increment = max_ll + std::log(
        (cbar.array() * (log_lik.array() - max_ll).exp()).sum());
    est.loglik_increment_posterior = est.loglik_increment;
    loglik_ += est.loglik_increment;
    return est;
  }

  const Eigen::VectorXd& mode_probs() const { return mode_probs_; }
  double log_likelihood() const { return loglik_; }

 private:
  ImmConfig config_;
  std::vector<GaussianBelief> beliefs_;
  Eigen::VectorXd mode_probs_;
  int k_ = 0;
  double loglik_ = 0.0;
};

}  // namespace robust_lds
