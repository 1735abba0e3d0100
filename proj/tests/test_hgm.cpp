#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "robust_lds/hgm.hpp"
#include "robust_lds/marginal_oracle.hpp"
#include "robust_lds/rng.hpp"

using namespace robust_lds;

namespace {
const auto v1 = HgmNoiseSpec::vec1;
const auto m1 = HgmNoiseSpec::mat1;
}  // namespace

TEST_CASE("conditional moments at lambda = 1 leave a t scale unchanged") {
  const auto spec = HgmNoiseSpec::student_t(v1(0), m1(1), 4.0);
  const auto cg = conditional_gaussian(spec, 1.0);
  CHECK(cg.mean[0] == 0.0);
  CHECK(cg.cov(0, 0) == 1.0);
}

TEST_CASE("variance-mean mixture shifts the mean by beta * lambda") {
  const auto spec = HgmNoiseSpec::gh_skew_t(v1(0), v1(2), m1(1), 5.0);
  const auto cg = conditional_gaussian(spec, 0.5);
  CHECK(cg.mean[0] == Catch::Approx(1.0));
  CHECK(cg.cov(0, 0) == Catch::Approx(0.5));
}

TEST_CASE("scale mixture divides the covariance by lambda") {
  const auto spec = HgmNoiseSpec::variance_gamma(v1(1), m1(4), 6.0);
  const auto cg = conditional_gaussian(spec, 2.0);
  CHECK(cg.mean[0] == Catch::Approx(1.0));
  CHECK(cg.cov(0, 0) == Catch::Approx(2.0));
}

TEST_CASE("gaussian conditional ignores lambda") {
  const auto spec = HgmNoiseSpec::gaussian(v1(3), m1(2));
  CHECK(conditional_gaussian(spec, 7.0).cov(0, 0) == 2.0);
  CHECK(conditional_gaussian(spec, 7.0).mean[0] == 3.0);
}

TEST_CASE("mixing value validation") {
  const auto t = HgmNoiseSpec::student_t(v1(0), m1(1), 4.0);
  CHECK_THROWS_AS(conditional_gaussian(t, 0.0), std::domain_error);
  CHECK_THROWS_AS(conditional_gaussian(t, -1.0), std::domain_error);
  const auto sl = HgmNoiseSpec::slash(v1(0), m1(1), 3.0);
  CHECK_THROWS_AS(conditional_gaussian(sl, 1.0), std::domain_error);
  CHECK_NOTHROW(conditional_gaussian(sl, 0.999));
}

TEST_CASE("spec validation rejects bad parameters") {
  CHECK_THROWS_AS(HgmNoiseSpec::student_t(v1(0), m1(-1), 4.0), std::invalid_argument);
  CHECK_THROWS_AS(HgmNoiseSpec::student_t(v1(0), m1(1), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(HgmNoiseSpec::pearson_vii(v1(0), m1(1), 3.0, 0.0), std::invalid_argument);
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 0.5, 0.2, 1;
  CHECK_THROWS_AS(HgmNoiseSpec::student_t(Eigen::VectorXd::Zero(2), asym, 4.0),
                  std::invalid_argument);
}

TEST_CASE("invariant mixing draws match marginal means") {
  RngStream rng(1234);
  const int n = 1000000;

  SECTION("student t nu=4 has Ga(2,2) mixing with mean 1") {
    const auto spec = HgmNoiseSpec::student_t(v1(0), m1(1), 4.0);
    double s = 0;
    for (int i = 0; i < n; ++i) s += sample_invariant(spec, rng);
    CHECK(s / n == Catch::Approx(1.0).margin(0.01));
  }
  SECTION("variance gamma nu=6 has IG(3,3) mixing with mean nu/(nu-2)") {
    const auto spec = HgmNoiseSpec::variance_gamma(v1(0), m1(1), 6.0);
    double s = 0;
    for (int i = 0; i < n; ++i) s += sample_invariant(spec, rng);
    CHECK(s / n == Catch::Approx(1.5).margin(0.02));
  }
  SECTION("slash nu=3 has Be(3,1) mixing with mean 0.75") {
    const auto spec = HgmNoiseSpec::slash(v1(0), m1(1), 3.0);
    double s = 0;
    for (int i = 0; i < n; ++i) s += sample_invariant(spec, rng);
    CHECK(s / n == Catch::Approx(0.75).margin(0.01));
    // independent oracle: mean of the Be(3,1) density by quadrature
    const double mean_by_quadrature = detail::integrate_mixing(
        spec, [&](double l) { return l * std::exp(beta_logpdf(l, 3.0, 1.0)); });
    CHECK(mean_by_quadrature == Catch::Approx(0.75).epsilon(1e-8));
  }
  SECTION("gaussian family has no mixing variable") {
    const auto spec = HgmNoiseSpec::gaussian(v1(0), m1(1));
    CHECK_THROWS_AS(sample_invariant(spec, rng), std::domain_error);
  }
}

TEST_CASE("hierarchical noise draws match known moments") {
  RngStream rng(99);
  const int n = 1000000;

  SECTION("gaussian variance") {
    const auto spec = HgmNoiseSpec::gaussian(v1(0), m1(1));
    double s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = sample_noise(spec, rng)[0];
      s2 += x * x;
    }
    CHECK(s2 / n == Catch::Approx(1.0).margin(0.01));
  }
  SECTION("student t variance nu Sigma / (nu - 2)") {
    const auto spec = HgmNoiseSpec::student_t(v1(0), m1(1), 5.0);
    double s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = sample_noise(spec, rng)[0];
      s2 += x * x;
    }
    CHECK(s2 / n == Catch::Approx(5.0 / 3.0).epsilon(0.03));
    // quadrature oracle for the same second moment
    const auto m = spec.mixing();
    const double var_by_quadrature = detail::integrate_mixing(
        spec, [&](double l) { return (1.0 / l) * std::exp(mixing_logpdf(m, l)); });
    CHECK(var_by_quadrature == Catch::Approx(5.0 / 3.0).epsilon(1e-8));
  }
  SECTION("skewed family draws have negative skewness for negative beta") {
    const auto spec = HgmNoiseSpec::gh_skew_t(v1(0), v1(-2.3), m1(1), 5.8);
    std::vector<double> xs(200000);
    double mean = 0;
    for (auto& x : xs) {
      x = sample_noise(spec, rng)[0];
      mean += x;
    }
    mean /= xs.size();
    double m2 = 0, m3 = 0;
    for (double x : xs) {
      const double d = x - mean;
      m2 += d * d;
      m3 += d * d * d;
    }
    m2 /= xs.size();
    m3 /= xs.size();
    CHECK(m3 / std::pow(m2, 1.5) < -0.5);
  }
  SECTION("zero-skew variance-mean mixture matches the symmetric t moments") {
    const auto skew0 = HgmNoiseSpec::gh_skew_t(v1(0), v1(0), m1(1), 6.0);
    double s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = sample_noise(skew0, rng)[0];
      s2 += x * x;
    }
    CHECK(s2 / n == Catch::Approx(6.0 / 4.0).epsilon(0.03));
  }
}

TEST_CASE("marginal density oracle against closed forms") {
  SECTION("gaussian") {
    const auto spec = HgmNoiseSpec::gaussian(v1(0), m1(1));
    CHECK(marginal_logpdf_oracle(spec, 0.0) ==
          Catch::Approx(-0.5 * std::log(2 * M_PI)).epsilon(1e-12));
  }
  SECTION("t with nu = 1 is Cauchy") {
    const auto spec = HgmNoiseSpec::student_t(v1(0), m1(1), 1.0);
    CHECK(marginal_logpdf_oracle(spec, 0.0) ==
          Catch::Approx(std::log(1.0 / M_PI)).epsilon(1e-7));
    CHECK(marginal_logpdf_oracle(spec, 2.0) ==
          Catch::Approx(std::log(1.0 / (M_PI * 5.0))).epsilon(1e-7));
  }
  SECTION("variance gamma at nu = 2 is Laplace") {
    const auto spec = HgmNoiseSpec::variance_gamma(v1(0), m1(1), 2.0);
    for (double x : {0.0, 0.3, -1.0, 2.5}) {
      // Laplace(0, Sigma=1): density 1/sqrt(2) exp(-sqrt(2)|x|)
      const double expected = std::log(1.0 / std::sqrt(2.0)) - std::sqrt(2.0) * std::abs(x);
      CHECK(marginal_logpdf_oracle(spec, x) == Catch::Approx(expected).margin(1e-6));
    }
  }
  SECTION("general t closed form") {
    const double nu = 5.0;
    const auto spec = HgmNoiseSpec::student_t(v1(0), m1(1), nu);
    for (double x : {0.0, 1.0, -2.0}) {
      const double expected = std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2) -
                              0.5 * std::log(nu * M_PI) -
                              (nu + 1) / 2 * std::log1p(x * x / nu);
      CHECK(marginal_logpdf_oracle(spec, x) == Catch::Approx(expected).epsilon(1e-7));
    }
  }
  SECTION("interval probabilities integrate the marginal") {
    const auto spec = HgmNoiseSpec::student_t(v1(0), m1(1), 3.0);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(marginal_interval_probability(spec, -inf, inf) == Catch::Approx(1.0).epsilon(1e-8));
    CHECK(marginal_interval_probability(spec, -inf, 0.0) == Catch::Approx(0.5).epsilon(1e-8));
  }
}

TEST_CASE("conditional covariance stays symmetric PD across the support") {
  Eigen::MatrixXd sigma(2, 2);
  sigma << 2, 0.3, 0.3, 1;
  const auto spec = HgmNoiseSpec::student_t(Eigen::VectorXd::Zero(2), sigma, 4.0);
  for (double lambda : {1e-6, 0.1, 1.0, 50.0}) {
    const auto cg = conditional_gaussian(spec, lambda);
    CHECK(cg.cov.isApprox(cg.cov.transpose()));
    CHECK(Eigen::LLT<Eigen::MatrixXd>(cg.cov).info() == Eigen::Success);
  }
}
