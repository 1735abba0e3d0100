#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "robust_lds/kalman.hpp"
#include "robust_lds/marginal_oracle.hpp"
#include "robust_lds/rng.hpp"

using namespace robust_lds;

namespace {
const auto v1 = HgmNoiseSpec::vec1;
const auto m1 = HgmNoiseSpec::mat1;
}  // namespace

TEST_CASE("predict with identity dynamics and no noise is the identity") {
  GaussianBelief b{v1(3), m1(2)};
  const auto out = predict(b, m1(1), m1(1), v1(0), m1(0));
  CHECK(out.mean[0] == 3.0);
  CHECK(out.cov(0, 0) == 2.0);
}

TEST_CASE("predict scalar hand values") {
  GaussianBelief b{v1(1), m1(1)};
  const auto out = predict(b, m1(2), m1(1), v1(0.5), m1(3));
  CHECK(out.mean[0] == Catch::Approx(2.5));
  CHECK(out.cov(0, 0) == Catch::Approx(7.0));
}

TEST_CASE("predict hand values agree with Monte Carlo propagation") {
  RngStream rng(5);
  const int n = 2000000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = 1.0 + rng.normal();
    const double w = 0.5 + std::sqrt(3.0) * rng.normal();
    const double xn = 2.0 * x + w;
    s += xn;
    s2 += xn * xn;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  CHECK(mean == Catch::Approx(2.5).margin(0.02));
  CHECK(var == Catch::Approx(7.0).epsilon(0.01));
}

TEST_CASE("predict with A = 0 forgets the state") {
  GaussianBelief b{v1(42), m1(9)};
  const auto out = predict(b, m1(0), m1(2), v1(1), m1(3));
  CHECK(out.mean[0] == Catch::Approx(2.0));
  CHECK(out.cov(0, 0) == Catch::Approx(12.0));
}

TEST_CASE("update scalar conjugate hand values") {
  GaussianBelief pred{v1(0), m1(1)};
  const auto res = update(pred, m1(1), v1(0), m1(1), v1(2));
  CHECK(res.posterior.mean[0] == Catch::Approx(1.0));
  CHECK(res.posterior.cov(0, 0) == Catch::Approx(0.5));
  CHECK(res.likelihood.logpdf(v1(2)) ==
        Catch::Approx(normal_logpdf(2.0, 0.0, 2.0)).epsilon(1e-12));
}

TEST_CASE("uninformative measurement leaves the prior untouched") {
  GaussianBelief pred{v1(1.5), m1(2)};
  const auto res = update(pred, m1(1), v1(0), m1(1e12), v1(123.0));
  CHECK(res.posterior.mean[0] == Catch::Approx(1.5).epsilon(1e-6));
  CHECK(res.posterior.cov(0, 0) == Catch::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("measurement offset shifts the predictive mean, equivariantly") {
  GaussianBelief pred{v1(0.7), m1(1.3)};
  const auto a = update(pred, m1(1), v1(0), m1(1), v1(2.0));
  const auto b = update(pred, m1(1), v1(5.0), m1(1), v1(7.0));
  CHECK(b.likelihood.mu[0] == Catch::Approx(a.likelihood.mu[0] + 5.0));
  CHECK(b.posterior.mean[0] == Catch::Approx(a.posterior.mean[0]).epsilon(1e-12));
  CHECK(b.posterior.cov(0, 0) == Catch::Approx(a.posterior.cov(0, 0)).epsilon(1e-12));
}

TEST_CASE("joseph form consistency and covariance contraction") {
  RngStream rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int nx = 3, ny = 2;
    Eigen::MatrixXd M = Eigen::MatrixXd::NullaryExpr(nx, nx, [&] { return rng.normal(); });
    GaussianBelief pred{Eigen::VectorXd::NullaryExpr(nx, [&] { return rng.normal(); }),
                        M * M.transpose() + 0.1 * Eigen::MatrixXd::Identity(nx, nx)};
    Eigen::MatrixXd C = Eigen::MatrixXd::NullaryExpr(ny, nx, [&] { return rng.normal(); });
    Eigen::MatrixXd Rh = Eigen::MatrixXd::NullaryExpr(ny, ny, [&] { return rng.normal(); });
    Eigen::MatrixXd R = Rh * Rh.transpose() + 0.5 * Eigen::MatrixXd::Identity(ny, ny);
    Eigen::VectorXd y = Eigen::VectorXd::NullaryExpr(ny, [&] { return rng.normal(); });

    const auto res = update(pred, C, Eigen::VectorXd::Zero(ny), R, y);

    // recompute the gain and compare against the Joseph stabilized form
    const Eigen::MatrixXd S = C * pred.cov * C.transpose() + R;
    const Eigen::MatrixXd K = (S.llt().solve(C * pred.cov)).transpose();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(nx, nx);
    const Eigen::MatrixXd joseph =
        (I - K * C) * pred.cov * (I - K * C).transpose() + K * R * K.transpose();
    CHECK((res.posterior.cov - joseph).norm() <= 1e-9 * joseph.norm());

    // update never increases covariance
    const Eigen::MatrixXd diff = pred.cov - res.posterior.cov;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(diff);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9);
  }
}

TEST_CASE("p-step prediction base cases") {
  const MatrixSchedule A = constant_schedule(m1(0.5));
  const MatrixSchedule B = constant_schedule(m1(1));
  SECTION("p = 1 equals a single predict") {
    GaussianBelief b{v1(2), m1(3)};
    std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>> mom = {{v1(0.1), m1(2)}};
    const auto one = predict_p_step(b, A, B, mom, 0, 1);
    const auto direct = predict(b, m1(0.5), m1(1), v1(0.1), m1(2));
    CHECK(one.mean[0] == Catch::Approx(direct.mean[0]).epsilon(1e-15));
    CHECK(one.cov(0, 0) == Catch::Approx(direct.cov(0, 0)).epsilon(1e-15));
  }
  SECTION("identity dynamics accumulate process noise") {
    const MatrixSchedule I = constant_schedule(m1(1));
    GaussianBelief b{v1(5), m1(2)};
    std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>> mom(3, {v1(0), m1(0.7)});
    const auto out = predict_p_step(b, I, I, mom, 0, 3);
    CHECK(out.mean[0] == Catch::Approx(5.0));
    CHECK(out.cov(0, 0) == Catch::Approx(2.0 + 3 * 0.7));
  }
  SECTION("two-step scalar hand expansion") {
    GaussianBelief b{v1(4), m1(0)};
    std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>> mom(2, {v1(0), m1(1)});
    const auto out = predict_p_step(b, A, B, mom, 0, 2);
    CHECK(out.mean[0] == Catch::Approx(1.0));
    CHECK(out.cov(0, 0) == Catch::Approx(0.25 * 1 + 1));
  }
}

TEST_CASE("p-step prediction equals iterated predicts on random stable models") {
  RngStream rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int nx = 1 + static_cast<int>(rng.uniform() * 4);  // 1..4
    const int nw = 1 + static_cast<int>(rng.uniform() * nx);
    Eigen::MatrixXd A0 = Eigen::MatrixXd::NullaryExpr(nx, nx, [&] { return rng.normal(); });
    // scale to spectral radius < 1
    const double sr = A0.eigenvalues().cwiseAbs().maxCoeff();
    if (sr > 0) A0 *= 0.9 / std::max(sr, 0.9);
    Eigen::MatrixXd B0 = Eigen::MatrixXd::NullaryExpr(nx, nw, [&] { return rng.normal(); });
    Eigen::MatrixXd Qh = Eigen::MatrixXd::NullaryExpr(nw, nw, [&] { return rng.normal(); });
    Eigen::MatrixXd Q = Qh * Qh.transpose() + 0.1 * Eigen::MatrixXd::Identity(nw, nw);
    Eigen::VectorXd mu_w = Eigen::VectorXd::NullaryExpr(nw, [&] { return rng.normal(); });
    Eigen::MatrixXd Ph = Eigen::MatrixXd::NullaryExpr(nx, nx, [&] { return rng.normal(); });
    GaussianBelief b{Eigen::VectorXd::NullaryExpr(nx, [&] { return rng.normal(); }),
                     (Ph * Ph.transpose() + Eigen::MatrixXd::Identity(nx, nx)).eval()};
    const int p = 1 + static_cast<int>(rng.uniform() * 6);

    std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>> mom(p, {mu_w, Q});
    const auto direct =
        predict_p_step(b, constant_schedule(A0), constant_schedule(B0), mom, 0, p);
    GaussianBelief it = b;
    for (int j = 0; j < p; ++j) it = predict(it, A0, B0, mu_w, Q);
    CHECK((direct.mean - it.mean).norm() <= 1e-12 * std::max(1.0, it.mean.norm()));
    CHECK((direct.cov - it.cov).norm() <= 1e-12 * std::max(1.0, it.cov.norm()));
  }
}

TEST_CASE("dimension mismatches are rejected") {
  GaussianBelief b{v1(0), m1(1)};
  CHECK_THROWS_AS(predict(b, Eigen::MatrixXd::Identity(2, 2), m1(1), v1(0), m1(1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(update(b, Eigen::MatrixXd::Identity(2, 2), v1(0), m1(1), v1(0)),
                  std::invalid_argument);
}
