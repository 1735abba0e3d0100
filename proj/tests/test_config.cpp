#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "robust_lds/config.hpp"
#include "robust_lds/experiment.hpp"

using namespace robust_lds;

namespace {

const std::string kMinimal =
    "scenario = ar2\n"
    "seeds = 1..3\n"
    "output = out\n"
    "\n"
    "[filter:robust]\n"
    "type = rbpf\n"
    "particles = 50\n"
    "rho_w = 0.05\n"
    "rho_e = 0.05\n"
    "measurement_prior = student_t(0, 1e4, 5)\n";

}  // namespace

TEST_CASE("minimal config parses") {
  const ExperimentConfig cfg = parse_config_text(kMinimal);
  CHECK(cfg.scenario == ScenarioKind::Ar2);
  REQUIRE(cfg.seeds.size() == 3);
  CHECK(cfg.seeds[0] == 1);
  CHECK(cfg.seeds[2] == 3);
  REQUIRE(cfg.filters.size() == 1);
  CHECK(cfg.filters[0].name == "robust");
  CHECK(cfg.filters[0].kind == FilterKind::Rbpf);
  CHECK(cfg.filters[0].particles == 50);
  REQUIRE(cfg.filters[0].measurement_prior.has_value());
  CHECK(cfg.filters[0].measurement_prior->family == NoiseFamily::StudentT);
  CHECK(cfg.filters[0].measurement_prior->sigma(0, 0) == 1e4);
  CHECK(cfg.filters[0].measurement_prior->nu == 5.0);
}

TEST_CASE("comments and blank lines are ignored; seeds accept comma lists") {
  const ExperimentConfig cfg = parse_config_text(
      "# benchmark\nscenario = track\nseeds = 2,5,9  # three runs\n\n"
      "[filter:kf]\ntype = kf\nq = 1\n");
  REQUIRE(cfg.seeds == std::vector<std::uint64_t>({2, 5, 9}));
  CHECK(cfg.filters[0].q == 1.0);
}

TEST_CASE("duplicate keys are errors naming the line") {
  try {
    parse_config_text("scenario = track\nseeds = 1\nseeds = 2\n[filter:kf]\ntype = kf\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("duplicate") != std::string::npos);
    CHECK(msg.find("seeds") != std::string::npos);
  }
}

TEST_CASE("unknown keys are hard errors") {
  CHECK_THROWS_AS(parse_config_text("scenario = track\nturbo = yes\n"
                                    "[filter:kf]\ntype = kf\n"),
                  ConfigError);
  // scenario keys from another scenario are unknown too
  CHECK_THROWS_AS(parse_config_text("scenario = track\ngamma1 = 0.9\n"
                                    "[filter:kf]\ntype = kf\n"),
                  ConfigError);
  // filter keys are validated against the filter type
  CHECK_THROWS_AS(parse_config_text("scenario = track\n[filter:kf]\ntype = kf\n"
                                    "particles = 10\n"),
                  ConfigError);
}

TEST_CASE("rho outside (0,1) is a range error citing the interval") {
  try {
    parse_config_text("scenario = ar2\n[filter:r]\ntype = rbpf\nrho_w = 1.2\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("(0,1)") != std::string::npos);
  }
  CHECK_THROWS_AS(
      parse_config_text("scenario = ar2\n[filter:r]\ntype = rbpf\nrho_e = 0\n"),
      ConfigError);
}

TEST_CASE("structural errors") {
  CHECK_THROWS_AS(parse_config_text("seeds = 1\n[filter:kf]\ntype = kf\n"),
                  ConfigError);  // missing scenario
  CHECK_THROWS_AS(parse_config_text("scenario = track\n"), ConfigError);  // no filter
  CHECK_THROWS_AS(parse_config_text("scenario = track\n[filter:kf]\n"),
                  ConfigError);  // filter without type
  CHECK_THROWS_AS(parse_config_text("scenario = warp\n[filter:kf]\ntype = kf\n"),
                  ConfigError);  // unknown scenario
  CHECK_THROWS_AS(parse_config_text("scenario = track\nnot a pair\n"
                                    "[filter:kf]\ntype = kf\n"),
                  ConfigError);  // missing '='
  CHECK_THROWS_AS(parse_config_text("scenario = track\n[filter:kf]\ntype = kf\n"
                                    "[filter:kf]\ntype = kf\n"),
                  ConfigError);  // duplicate filter name
}

TEST_CASE("prior expressions cover every family") {
  const std::string head = "scenario = ar2\n[filter:r]\ntype = rbpf\nprocess_prior = ";
  const std::vector<std::pair<std::string, NoiseFamily>> cases = {
      {"gaussian(0, 1)", NoiseFamily::Gaussian},
      {"student_t(0, 1, 4)", NoiseFamily::StudentT},
      {"pearson_vii(0, 1, 4, 2)", NoiseFamily::PearsonVII},
      {"slash(0, 1, 3)", NoiseFamily::Slash},
      {"variance_gamma(0, 1, 6)", NoiseFamily::VarianceGamma},
      {"laplace(0, 1e6)", NoiseFamily::VarianceGamma},
      {"gh_skew_t(1.75, -2.3, 1, 5.8)", NoiseFamily::GhSkewT},
      {"gh_variance_gamma(0, 1, 1, 4)", NoiseFamily::GhVarianceGamma}};
  for (const auto& [text, family] : cases) {
    const ExperimentConfig cfg = parse_config_text(head + text + "\n");
    REQUIRE(cfg.filters[0].process_prior.has_value());
    CHECK(cfg.filters[0].process_prior->family == family);
  }
  CHECK(parse_config_text(head + "laplace(0, 1e6)\n").filters[0].process_prior->nu == 2.0);
  CHECK_THROWS_AS(parse_config_text(head + "cauchy(0, 1)\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(head + "student_t(0, 1)\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(head + "student_t(0, -1, 4)\n"), ConfigError);
}

TEST_CASE("ar2 mixture expressions and regime switches") {
  const ExperimentConfig cfg = parse_config_text(
      "scenario = ar2\n"
      "process_noise = N(0, 1)\n"
      "meas_noise = 0.95 N(0, 10) + 0.05 N(0, 100)\n"
      "meas_noise_from_101 = N(0, 100)\n"
      "[filter:kf]\ntype = kf\nr = 10\n");
  REQUIRE(cfg.ar2_meas.components.size() == 2);
  CHECK(cfg.ar2_meas.components[0].weight == 0.95);
  CHECK(cfg.ar2_meas.components[1].cov(0, 0) == 100.0);
  REQUIRE(cfg.ar2_meas.schedule.count(101) == 1);
  CHECK(cfg.ar2_meas.components_at(100)[0].cov(0, 0) == 10.0);
  CHECK(cfg.ar2_meas.components_at(101)[0].cov(0, 0) == 100.0);
  CHECK_THROWS_AS(parse_config_text("scenario = ar2\nmeas_noise = 0.5 N(0, 1)\n"
                                    "[filter:kf]\ntype = kf\n"),
                  ConfigError);  // weights must sum to 1
}

TEST_CASE("imm section requires consistent dimensions") {
  const std::string ok =
      "scenario = track\n[filter:imm]\ntype = imm\nsigma_v = 1, 50\n"
      "pi = 0.9 0.1 ; 0.1 0.9\n";
  const ExperimentConfig cfg = parse_config_text(ok);
  REQUIRE(cfg.filters[0].imm_sigma_v.size() == 2);
  REQUIRE(cfg.filters[0].imm_pi.size() == 4);
  CHECK(cfg.filters[0].imm_pi[1] == 0.1);
  CHECK_THROWS_AS(
      parse_config_text("scenario = track\n[filter:imm]\ntype = imm\n"
                        "sigma_v = 1, 50\npi = 0.9 0.1\n"),
      ConfigError);
}

TEST_CASE("round trip: parse, emit, re-parse is structurally identical") {
  const std::vector<std::string> texts = {
      kMinimal,
      "scenario = sv\nseeds = 4\ngamma1 = 0.9\nsigma_n2 = 0.1\nhorizon = 2\n"
      "[filter:r]\ntype = rbpf\nmeasurement_prior = gh_skew_t(1.75, -2.3, 1, 5.8)\n"
      "[filter:pf]\ntype = bootstrap_pf\nparticles = 500\n",
      "scenario = track\nseeds = 1..2\ncontaminated = true\n"
      "[filter:imm]\ntype = imm\nsigma_v = 1, 50\npi = 0.9 0.1 ; 0.1 0.9\n"
      "[filter:kf]\ntype = kf\nq = 2500\nr = 6400\n",
      "scenario = ar2\nmeas_noise = 0.95 N(0, 10) + 0.05 N(0, 100)\n"
      "meas_noise_from_101 = N(0, 100)\n[filter:kf]\ntype = kf\n"};
  for (const auto& text : texts) {
    const ExperimentConfig a = parse_config_text(text);
    const std::string emitted = emit_config(a);
    const ExperimentConfig b = parse_config_text(emitted);
    CHECK(emit_config(b) == emitted);
  }
}

TEST_CASE("file loading errors") {
  CHECK_THROWS_AS(parse_config("/nonexistent/path.cfg"), ConfigError);
}

TEST_CASE("zero-step scenario produces empty data and NaN summary metrics") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "robust_lds_zero_steps";
  fs::remove_all(dir);
  ExperimentConfig cfg = parse_config_text(
      "scenario = ar2\nsteps = 0\nseeds = 1\n[filter:kf]\ntype = kf\nr = 10\n");
  cfg.output_dir = dir.string();
  const int rc = run_experiment(cfg, std::cerr);
  CHECK(rc == 0);
  std::ifstream data(dir / "kf_seed1.csv");
  std::string line;
  int rows = 0;
  while (std::getline(data, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 1);  // header only
  std::ifstream sum(dir / "summary.csv");
  std::string all, l;
  while (std::getline(sum, l)) all += l + "\n";
  CHECK(all.find("nan") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("experiment output is reproducible byte for byte") {
  namespace fs = std::filesystem;
  ExperimentConfig cfg = parse_config_text(
      "scenario = ar2\nsteps = 40\nseeds = 1..2\n"
      "[filter:r]\ntype = rbpf\nparticles = 20\n"
      "measurement_prior = student_t(0, 100, 5)\n"
      "[filter:kf]\ntype = kf\nr = 10\n");
  auto run_to = [&](const fs::path& dir) {
    fs::remove_all(dir);
    cfg.output_dir = dir.string();
    REQUIRE(run_experiment(cfg, std::cerr) == 0);
  };
  const fs::path d1 = fs::temp_directory_path() / "robust_lds_repro1";
  const fs::path d2 = fs::temp_directory_path() / "robust_lds_repro2";
  run_to(d1);
  run_to(d2);
  for (const auto& entry : fs::directory_iterator(d1)) {
    std::ifstream f1(entry.path(), std::ios::binary);
    std::ifstream f2(d2 / entry.path().filename(), std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
    CHECK(!s1.empty());
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}
