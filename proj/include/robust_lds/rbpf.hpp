#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "robust_lds/kalman.hpp"
#include "robust_lds/mixing_kernel.hpp"
#include "robust_lds/rng.hpp"

namespace robust_lds {

struct Particle {
  double lambda_w = 1.0;
  double lambda_e = 1.0;
  GaussianBelief belief;
  double log_weight = 0.0;
};

struct FilterEstimate {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double ess = 0.0;
  double loglik_increment = 0.0;            // prior-weight predictive form
  double loglik_increment_posterior = 0.0;  // posterior-weight form (paper Eq.)
};

class RbpfDivergence : public std::runtime_error {
 public:
  RbpfDivergence(int step)
      : std::runtime_error("RBPF weight underflow at step " + std::to_string(step)),
        step_index(step) {}
  int step_index;
};

inline double ess_from_log_weights(const std::vector<double>& log_weights) {
  // weights assumed normalized
  double sum_sq = 0;
  for (double lw : log_weights) sum_sq += std::exp(2 * lw);
  return 1.0 / sum_sq;
}

/// Systematic resampling: N indices from one uniform offset; the count of
/// index i is floor(N w_i) or ceil(N w_i).
inline std::vector<int> resample_systematic(const std::vector<double>& log_weights,
                                            RngStream& rng) {
  const int n = static_cast<int>(log_weights.size());
  std::vector<int> idx(n);
  const double u0 = rng.uniform() / n;
  double cum = 0;
  int i = -1;
  for (int j = 0; j < n; ++j) {
    const double target = u0 + static_cast<double>(j) / n;
    while (cum <= target && i + 1 < n) cum += std::exp(log_weights[++i]);
    idx[j] = i;
  }
  return idx;
}

enum class ResamplePolicy { EveryStep, EssThreshold };

struct RbpfOptions {
  int num_particles = 50;
  ResamplePolicy resample = ResamplePolicy::EveryStep;
  double ess_threshold = 0.5;  // fraction of N, EssThreshold mode
};

/// Rao-Blackwellized particle filter: a particle cloud over the noise mixing
/// parameters with one conditionally-Gaussian Kalman filter per particle.
class Rbpf {
 public:
  Rbpf(LdsModel model, GaussianBelief x0, MixingKernel process_kernel,
       MixingKernel measurement_kernel, RbpfOptions opts, std::uint64_t seed)
      : model_(std::move(model)),
        kernel_w_(process_kernel),
        kernel_e_(measurement_kernel),
        opts_(opts),
        resample_rng_(RngStream::derive_seed(seed, 0)) {
    if (opts_.num_particles < 1)
      throw std::invalid_argument("Rbpf: need at least one particle");
    if (!(opts_.ess_threshold > 0.0 && opts_.ess_threshold <= 1.0))
      throw std::invalid_argument("Rbpf: ess threshold must be in (0,1]");
    particles_.resize(opts_.num_particles);
    const double lw0 = -std::log(static_cast<double>(opts_.num_particles));
    for (int i = 0; i < opts_.num_particles; ++i) {
      particle_rngs_.emplace_back(RngStream::derive_seed(seed, 1 + i));
      particles_[i].belief = x0;
      particles_[i].log_weight = lw0;
      particles_[i].lambda_w = sample_marginal(kernel_w_, particle_rngs_[i]);
      particles_[i].lambda_e = sample_marginal(kernel_e_, particle_rngs_[i]);
    }
  }

  int step_index() const { return step_index_; }
  const std::vector<Particle>& particles() const { return particles_; }
  double log_likelihood() const { return cumulative_loglik_; }
  double log_likelihood_posterior_form() const { return cumulative_loglik_posterior_; }

  /// One filtering cycle with observation y.
  FilterEstimate step(const Eigen::VectorXd& y) {
    const int n = opts_.num_particles;
    ++step_index_;
    std::vector<double> incr(n);
    for (int i = 0; i < n; ++i) {
      Particle& p = particles_[i];
      if (step_index_ > 1) {
        p.lambda_w = robust_lds::step(kernel_w_, p.lambda_w, particle_rngs_[i]);
        p.lambda_e = robust_lds::step(kernel_e_, p.lambda_e, particle_rngs_[i]);
      }
      const auto [mu_w, Q] = conditional_gaussian(model_.process_noise, p.lambda_w);
      const auto [mu_e, R] = conditional_gaussian(model_.measurement_noise, p.lambda_e);
      const GaussianBelief pred =
          predict(p.belief, model_.A(step_index_), model_.B(step_index_), mu_w, Q);
      const UpdateResult up = update(pred, model_.C(step_index_), mu_e, R, y);
      p.belief = up.posterior;
      incr[i] = up.likelihood.logpdf(y);
    }

    // predictive increment with prior weights, then reweight
    std::vector<double> terms(n);
    for (int i = 0; i < n; ++i) terms[i] = particles_[i].log_weight + incr[i];
    const double incr_prior = log_sum_exp(terms);
    for (int i = 0; i < n; ++i) particles_[i].log_weight += incr[i];
    normalize_weights();
    for (int i = 0; i < n; ++i) terms[i] = particles_[i].log_weight + incr[i];
    const double incr_post = log_sum_exp(terms);
    cumulative_loglik_ += incr_prior;
    cumulative_loglik_posterior_ += incr_post;

    FilterEstimate est = estimate();
    est.loglik_increment = incr_prior;
    est.loglik_increment_posterior = incr_post;

    const bool do_resample =
        opts_.resample == ResamplePolicy::EveryStep ||
        est.ess < opts_.ess_threshold * n;
    if (do_resample) resample();
    return est;
  }

  /// Weighted Gaussian-mixture moments of the current cloud.
  FilterEstimate estimate() const {
    const auto nx = particles_.front().belief.mean.size();
    FilterEstimate est;
    est.mean = Eigen::VectorXd::Zero(nx);
    std::vector<double> lw(particles_.size());
    for (size_t i = 0; i < particles_.size(); ++i) {
      lw[i] = particles_[i].log_weight;
      est.mean += std::exp(lw[i]) * particles_[i].belief.mean;
    }
    est.cov = Eigen::MatrixXd::Zero(nx, nx);
    for (const Particle& p : particles_) {
      const Eigen::VectorXd d = est.mean - p.belief.mean;
      est.cov += std::exp(p.log_weight) * (p.belief.cov + d * d.transpose());
    }
    est.cov = ((est.cov + est.cov.transpose()) / 2).eval();
    est.ess = ess_from_log_weights(lw);
    return est;
  }

  /// Mixture p-step-ahead prediction from the current cloud.
  GaussianBelief predict_ahead(int p) const {
    const auto nx = particles_.front().belief.mean.size();
    GaussianBelief out;
    out.mean = Eigen::VectorXd::Zero(nx);
    out.cov = Eigen::MatrixXd::Zero(nx, nx);
    std::vector<GaussianBelief> preds;
    preds.reserve(particles_.size());
    for (const Particle& p_i : particles_) {
      // mixing parameters held at their current values over the horizon
      const auto [mu_w, Q] = conditional_gaussian(model_.process_noise, p_i.lambda_w);
      std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>> moments(p, {mu_w, Q});
      preds.push_back(predict_p_step(p_i.belief, model_.A, model_.B, moments,
                                     step_index_, p));
      out.mean += std::exp(p_i.log_weight) * preds.back().mean;
    }
    for (size_t i = 0; i < particles_.size(); ++i) {
      const Eigen::VectorXd d = out.mean - preds[i].mean;
      out.cov += std::exp(particles_[i].log_weight) *
                 (preds[i].cov + d * d.transpose());
    }
    out.symmetrize();
    return out;
  }

 private:
  double log_sum_exp(const std::vector<double>& terms) {
    double max_term = -std::numeric_limits<double>::infinity();
    for (double t : terms) max_term = std::max(max_term, t);
    if (!std::isfinite(max_term)) throw RbpfDivergence(step_index_);
    double s = 0;
    for (double t : terms) s += std::exp(t - max_term);
    return max_term + std::log(s);
  }

  void normalize_weights() {
    double max_lw = -std::numeric_limits<double>::infinity();
    for (const Particle& p : particles_) max_lw = std::max(max_lw, p.log_weight);
    if (!std::isfinite(max_lw)) throw RbpfDivergence(step_index_);
    double s = 0;
    for (const Particle& p : particles_) s += std::exp(p.log_weight - max_lw);
    const double log_norm = max_lw + std::log(s);
    for (Particle& p : particles_) p.log_weight -= log_norm;
  }

  void resample() {
    std::vector<double> lw(particles_.size());
    for (size_t i = 0; i < particles_.size(); ++i) lw[i] = particles_[i].log_weight;
    const std::vector<int> idx = resample_systematic(lw, resample_rng_);
    std::vector<Particle> next(particles_.size());
    const double lw0 = -std::log(static_cast<double>(particles_.size()));
    for (size_t i = 0; i < idx.size(); ++i) {
      next[i] = particles_[idx[i]];
      next[i].log_weight = lw0;
    }
    particles_ = std::move(next);
  }

  LdsModel model_;
  MixingKernel kernel_w_, kernel_e_;
  RbpfOptions opts_;
  std::vector<Particle> particles_;
  std::vector<RngStream> particle_rngs_;
  RngStream resample_rng_;
  int step_index_ = 0;
  double cumulative_loglik_ = 0.0;
  double cumulative_loglik_posterior_ = 0.0;
};

}  // namespace robust_lds
