#pragma once

// Data generators and error metrics for the numerical studies: stochastic
// volatility, AR(2) time series with sporadic or persistent outliers, and a
// maneuvering-target track with a constant-velocity measurement model.

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <vector>

#include "robust_lds/rng.hpp"

namespace robust_lds {

/// Finite Gaussian mixture noise with an optional step-indexed regime
/// schedule (components switch at the scheduled step and stay until the
/// next entry).
struct NoiseMixtureSpec {
  struct Component {
    double weight;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;  // PD
  };
  std::vector<Component> components;
  std::map<int, std::vector<Component>> schedule;  // step -> components from there on

  static NoiseMixtureSpec gaussian1d(double mean, double var) {
    NoiseMixtureSpec s;
    s.components.push_back({1.0, Eigen::VectorXd::Constant(1, mean),
                            Eigen::MatrixXd::Constant(1, 1, var)});
    s.validate();
    return s;
  }

  void validate() const {
    auto check = [](const std::vector<Component>& cs) {
      double w = 0;
      for (const auto& c : cs) {
        w += c.weight;
        Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
        if (llt.info() != Eigen::Success)
          throw std::invalid_argument("NoiseMixtureSpec: component cov not PD");
      }
      if (std::abs(w - 1.0) > 1e-9)
        throw std::invalid_argument("NoiseMixtureSpec: weights must sum to 1");
    };
    check(components);
    for (const auto& [k, cs] : schedule) check(cs);
  }

  const std::vector<Component>& components_at(int k) const {
    const std::vector<Component>* active = &components;
    for (const auto& [start, cs] : schedule)
      if (k >= start) active = &cs;
    return *active;
  }

  Eigen::VectorXd sample(int k, RngStream& rng) const {
    const auto& cs = components_at(k);
    double u = rng.uniform();
    size_t pick = cs.size() - 1;
    for (size_t i = 0; i < cs.size(); ++i) {
      if (u < cs[i].weight) {
        pick = i;
        break;
      }
      u -= cs[i].weight;
    }
    const auto& c = cs[pick];
    Eigen::VectorXd z(c.mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(c.cov).matrixL();
    return c.mean + L * z;
  }
};

struct SvPath {
  std::vector<double> h;  // latent log-volatility
  std::vector<double> y;  // observed returns
  std::vector<double> z;  // log(y^2), the linearized observation
};

/// Stochastic volatility simulation with stationary start.
inline SvPath simulate_sv(double gamma0, double gamma1, double sigma_n2,
                          int num_steps, std::uint64_t seed) {
  if (!(std::abs(gamma1) < 1.0))
    throw std::invalid_argument("simulate_sv: |gamma1| must be below 1");
  RngStream rng(RngStream::derive_seed(seed, 0x5701));
  SvPath out;
  out.h.resize(num_steps);
  out.y.resize(num_steps);
  out.z.resize(num_steps);
  const double sigma_n = std::sqrt(sigma_n2);
  double h_prev = rng.normal() * std::sqrt(sigma_n2 / (1 - gamma1 * gamma1));
  for (int k = 0; k < num_steps; ++k) {
    out.h[k] = gamma0 + gamma1 * h_prev + sigma_n * rng.normal();
    h_prev = out.h[k];
    out.y[k] = rng.normal() * std::exp(out.h[k] / 2);
    out.z[k] = std::log(out.y[k] * out.y[k]);
  }
  return out;
}

/// Exact density of the log chi-square observation noise e = log(eps^2).
inline double sv_noise_logpdf(double e) {
  return -0.5 * std::log(2 * M_PI) - 0.5 * (std::exp(e) - e);
}

struct Ar2Path {
  std::vector<double> s;  // signal
  std::vector<double> y;  // measurements
};

/// Second order autoregressive signal with mixture process/measurement noise.
inline Ar2Path simulate_ar2(int num_steps, const NoiseMixtureSpec& process,
                            const NoiseMixtureSpec& meas, std::uint64_t seed,
                            double phi1 = 1.51, double phi2 = -0.55,
                            bool allow_unstable = false) {
  // companion-matrix stability: roots of z^2 - phi1 z - phi2 inside unit circle
  if (!allow_unstable) {
    const std::complex<double> disc = std::sqrt(std::complex<double>(phi1 * phi1 + 4 * phi2));
    const double r1 = std::abs((phi1 + disc) / 2.0);
    const double r2 = std::abs((phi1 - disc) / 2.0);
    if (r1 >= 1.0 || r2 >= 1.0)
      throw std::invalid_argument("simulate_ar2: unstable coefficients");
  }
  RngStream rng(RngStream::derive_seed(seed, 0xa72));
  Ar2Path out;
  out.s.resize(num_steps);
  out.y.resize(num_steps);
  double s1 = 0, s2 = 0;  // s_{k-1}, s_{k-2}
  for (int k = 0; k < num_steps; ++k) {
    const double w = process.sample(k + 1, rng)[0];
    const double s = phi1 * s1 + phi2 * s2 + w;
    s2 = s1;
    s1 = s;
    out.s[k] = s;
    out.y[k] = s + meas.sample(k + 1, rng)[0];
  }
  return out;
}

struct TrackSegment {
  enum class Kind { Linear, CoordinatedTurn };
  Kind kind = Kind::Linear;
  int duration = 1;       // steps
  double turn_rate = 0.0; // rad/s, positive = clockwise
};

struct TrackSpec {
  std::vector<TrackSegment> segments;
  double sampling_period = 1.0;
  Eigen::Vector2d initial_position{0.0, 0.0};
  Eigen::Vector2d initial_velocity{50.0, 0.0};
  NoiseMixtureSpec meas_noise;

  /// Track of the tracking study: linear leg, 180-degree clockwise turn,
  /// linear leg; nominal measurement noise N(0, diag(80^2, 80^2)).
  static TrackSpec benchmark_default(bool contaminated = false) {
    TrackSpec s;
    s.segments = {{TrackSegment::Kind::Linear, 30, 0.0},
                  {TrackSegment::Kind::CoordinatedTurn, 40, M_PI / 40},
                  {TrackSegment::Kind::Linear, 30, 0.0}};
    const double v80 = 80.0 * 80.0;
    if (!contaminated) {
      s.meas_noise.components.push_back(
          {1.0, Eigen::VectorXd::Zero(2), v80 * Eigen::MatrixXd::Identity(2, 2)});
    } else {
      const double v300 = 300.0 * 300.0;
      s.meas_noise.components.push_back(
          {0.8, Eigen::VectorXd::Zero(2), v80 * Eigen::MatrixXd::Identity(2, 2)});
      s.meas_noise.components.push_back(
          {0.2, Eigen::VectorXd::Zero(2), v300 * Eigen::MatrixXd::Identity(2, 2)});
    }
    return s;
  }
};

struct TrackPath {
  std::vector<Eigen::Vector4d> x;  // position (2) + velocity (2)
  std::vector<Eigen::Vector2d> y;  // measured positions
};

/// Noiseless kinematic truth per segment; measurements are positions plus
/// mixture noise.
inline TrackPath simulate_track(const TrackSpec& spec, std::uint64_t seed) {
  spec.meas_noise.validate();
  RngStream rng(RngStream::derive_seed(seed, 0x77ac));
  TrackPath out;
  Eigen::Vector2d pos = spec.initial_position;
  Eigen::Vector2d vel = spec.initial_velocity;
  const double T = spec.sampling_period;
  if (T <= 0) throw std::invalid_argument("simulate_track: T must be positive");
  int k = 0;
  for (const auto& seg : spec.segments) {
    if (seg.duration < 1)
      throw std::invalid_argument("simulate_track: segment duration must be >= 1");
    for (int i = 0; i < seg.duration; ++i) {
      if (seg.kind == TrackSegment::Kind::CoordinatedTurn) {
        const double th = -seg.turn_rate * T;  // clockwise for positive rate
        const Eigen::Rotation2D<double> rot(th);
        vel = rot * vel;
      }
      pos += vel * T;
      Eigen::Vector4d x;
      x << pos, vel;
      out.x.push_back(x);
      ++k;
      out.y.push_back(pos + spec.meas_noise.sample(k, rng).head<2>());
    }
  }
  return out;
}

struct ErrorMetrics {
  double rmse = 0.0;
  double max_abs_err = 0.0;
};

/// rmse = sqrt(mean_k |err_k|^2); max_abs_err = max componentwise error.
/// Rows are time steps.
inline ErrorMetrics metrics(const Eigen::MatrixXd& truth,
                            const Eigen::MatrixXd& estimates) {
  if (truth.rows() != estimates.rows() || truth.cols() != estimates.cols())
    throw std::invalid_argument("metrics: length mismatch");
  ErrorMetrics m;
  if (truth.rows() == 0) {
    m.rmse = std::numeric_limits<double>::quiet_NaN();
    m.max_abs_err = std::numeric_limits<double>::quiet_NaN();
    return m;
  }
  const Eigen::MatrixXd err = estimates - truth;
  m.rmse = std::sqrt(err.rowwise().squaredNorm().mean());
  m.max_abs_err = err.cwiseAbs().maxCoeff();
  return m;
}

}  // namespace robust_lds
