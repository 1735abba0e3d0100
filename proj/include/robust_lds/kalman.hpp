#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "robust_lds/hgm.hpp"

namespace robust_lds {

struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  void symmetrize() { cov = ((cov + cov.transpose()) / 2).eval(); }
};

using MatrixSchedule = std::function<Eigen::MatrixXd(int)>;

inline MatrixSchedule constant_schedule(Eigen::MatrixXd m) {
  return [m = std::move(m)](int) { return m; };
}

/// Linear dynamic system x_k = A_k x_{k-1} + B_k w_k, y_k = C_k x_k + e_k
/// with hierarchically Gaussian noise specs.
struct LdsModel {
  MatrixSchedule A, B, C;
  HgmNoiseSpec process_noise;
  HgmNoiseSpec measurement_noise;
  int nx = 0, nw = 0, ny = 0;

  static LdsModel time_invariant(Eigen::MatrixXd A_, Eigen::MatrixXd B_,
                                 Eigen::MatrixXd C_, HgmNoiseSpec w,
                                 HgmNoiseSpec e) {
    LdsModel m;
    m.nx = static_cast<int>(A_.rows());
    m.nw = static_cast<int>(B_.cols());
    m.ny = static_cast<int>(C_.rows());
    if (A_.cols() != m.nx || B_.rows() != m.nx || C_.cols() != m.nx ||
        w.dim() != m.nw || e.dim() != m.ny)
      throw std::invalid_argument("LdsModel: inconsistent dimensions");
    m.A = constant_schedule(std::move(A_));
    m.B = constant_schedule(std::move(B_));
    m.C = constant_schedule(std::move(C_));
    m.process_noise = std::move(w);
    m.measurement_noise = std::move(e);
    return m;
  }
};

struct PredictiveLikelihood {
  Eigen::VectorXd mu;     // C x_pred + mu_e
  Eigen::MatrixXd sigma;  // innovation covariance S

  double logpdf(const Eigen::VectorXd& y) const {
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("PredictiveLikelihood: singular covariance");
    const Eigen::VectorXd r = y - mu;
    const Eigen::VectorXd z = llt.matrixL().solve(r);
    double logdet = 0;
    for (Eigen::Index i = 0; i < sigma.rows(); ++i)
      logdet += std::log(llt.matrixL()(i, i));
    return -0.5 * sigma.rows() * std::log(2 * M_PI) - logdet - 0.5 * z.squaredNorm();
  }
};

namespace detail {

// Cholesky with a single trace-scaled jitter retry for near-singular inputs.
inline Eigen::LLT<Eigen::MatrixXd> chol_with_jitter(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt;
  const double jitter = 1e-10 * m.trace() / m.rows() + 1e-300;
  Eigen::MatrixXd j = m + jitter * Eigen::MatrixXd::Identity(m.rows(), m.cols());
  llt.compute(j);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("covariance factorization failed");
  return llt;
}

}  // namespace detail

inline GaussianBelief predict(const GaussianBelief& belief,
                              const Eigen::MatrixXd& A,
                              const Eigen::MatrixXd& B,
                              const Eigen::VectorXd& mu_w,
                              const Eigen::MatrixXd& Q) {
  if (A.cols() != belief.mean.size() || B.cols() != mu_w.size() ||
      Q.rows() != mu_w.size())
    throw std::invalid_argument("predict: dimension mismatch");
  GaussianBelief out;
  out.mean = A * belief.mean + B * mu_w;
  out.cov = A * belief.cov * A.transpose() + B * Q * B.transpose();
  out.symmetrize();
  return out;
}

struct UpdateResult {
  GaussianBelief posterior;
  PredictiveLikelihood likelihood;
};

inline UpdateResult update(const GaussianBelief& pred,
                           const Eigen::MatrixXd& C,
                           const Eigen::VectorXd& mu_e,
                           const Eigen::MatrixXd& R,
                           const Eigen::VectorXd& y) {
  if (C.cols() != pred.mean.size() || mu_e.size() != C.rows() ||
      y.size() != C.rows())
    throw std::invalid_argument("update: dimension mismatch");
  const Eigen::MatrixXd PCt = pred.cov * C.transpose();
  Eigen::MatrixXd S = C * PCt + R;
  S = ((S + S.transpose()) / 2).eval();
  const auto llt = detail::chol_with_jitter(S);
  // K = P C^T S^-1 via the factorization
  const Eigen::MatrixXd K = llt.solve(PCt.transpose()).transpose();
  const Eigen::VectorXd innovation = y - C * pred.mean - mu_e;

  UpdateResult out;
  out.posterior.mean = pred.mean + K * innovation;
  out.posterior.cov = pred.cov - K * C * pred.cov;
  out.posterior.symmetrize();
  out.likelihood.mu = C * pred.mean + mu_e;
  out.likelihood.sigma = S;
  return out;
}

/// p-step ahead prediction: mean and covariance of x_{k+p} given the filter
/// belief at step k, using transition products Phi and the per-step noise
/// moments for steps k+1 .. k+p.
inline GaussianBelief predict_p_step(
    const GaussianBelief& belief, const MatrixSchedule& A,
    const MatrixSchedule& B,
    const std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>>& noise_moments,
    int k, int p) {
  if (p < 1) throw std::invalid_argument("predict_p_step: p must be >= 1");
  if (static_cast<int>(noise_moments.size()) < p)
    throw std::invalid_argument("predict_p_step: need noise moments for each step");
  const auto n = belief.mean.size();
  Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(n, n);  // Phi_{k+1+p, k+1+j}
  GaussianBelief out;
  out.mean = Eigen::VectorXd::Zero(n);
  out.cov = Eigen::MatrixXd::Zero(n, n);
  // accumulate from j = p down to 1, growing the transition product
  for (int j = p; j >= 1; --j) {
    const Eigen::MatrixXd Bj = B(k + j);
    const auto& [mu_w, Q] = noise_moments[j - 1];
    const Eigen::MatrixXd phiB = phi * Bj;
    out.mean += phiB * mu_w;
    out.cov += phiB * Q * phiB.transpose();
    phi = (phi * A(k + j)).eval();  // now Phi_{k+1+p, k+j}
  }
  out.mean += phi * belief.mean;
  out.cov += phi * belief.cov * phi.transpose();
  out.symmetrize();
  return out;
}

}  // namespace robust_lds
