#pragma once

// Declarative experiment configuration: a line-based "key = value" format
// with [filter:NAME] sections. Unknown and duplicate keys are hard errors;
// a parsed config re-emitted with emit() and re-parsed is structurally
// identical.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "robust_lds/hgm.hpp"
#include "robust_lds/scenarios.hpp"

namespace robust_lds {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ScenarioKind { Sv, Ar2, Track, CustomLds };

enum class FilterKind { Rbpf, Kf, Imm, BootstrapPf };

struct FilterConfig {
  std::string name;
  FilterKind kind = FilterKind::Kf;
  // rbpf
  int particles = 50;
  double rho_w = 0.05;
  double rho_e = 0.05;
  std::optional<HgmNoiseSpec> process_prior;      // scalar template, expanded
  std::optional<HgmNoiseSpec> measurement_prior;  // to scenario dimensions
  std::string process_prior_text, measurement_prior_text;
  double ess_threshold = 0.5;
  bool resample_every_step = true;
  // kf
  std::optional<double> q;  // process variance (scalar, times identity)
  std::optional<double> r;  // measurement variance
  // imm
  std::vector<double> imm_sigma_v;
  std::vector<double> imm_pi;  // row-major M x M
};

struct ExperimentConfig {
  ScenarioKind scenario = ScenarioKind::Track;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "out";
  int horizon = 0;
  int steps = -1;  // -1: scenario default
  // sv
  double sv_gamma0 = 0.0, sv_gamma1 = 0.9, sv_sigma_n2 = 0.1;
  // ar2
  double ar2_phi1 = 1.51, ar2_phi2 = -0.55;
  NoiseMixtureSpec ar2_process = NoiseMixtureSpec::gaussian1d(0.0, 1.0);
  NoiseMixtureSpec ar2_meas = NoiseMixtureSpec::gaussian1d(0.0, 10.0);
  std::string ar2_process_text = "N(0, 1)";
  std::string ar2_meas_text = "N(0, 10)";
  std::vector<std::pair<int, std::string>> ar2_meas_switches;
  // track
  bool track_contaminated = false;
  // custom lds (scalar)
  double custom_a = 1.0, custom_b = 1.0, custom_c = 1.0;
  std::optional<HgmNoiseSpec> custom_process, custom_meas;
  std::string custom_process_text, custom_meas_text;

  std::vector<FilterConfig> filters;
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] inline void fail(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

inline double parse_double(const std::string& v, int line) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail(line, "expected a number, got '" + v + "'");
  }
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

/// "a..b" or comma list of integers.
inline std::vector<std::uint64_t> parse_seeds(const std::string& v, int line) {
  std::vector<std::uint64_t> out;
  const auto dots = v.find("..");
  if (dots != std::string::npos) {
    const long a = std::stol(trim(v.substr(0, dots)));
    const long b = std::stol(trim(v.substr(dots + 2)));
    if (a > b) fail(line, "empty seed range '" + v + "'");
    for (long s = a; s <= b; ++s) out.push_back(static_cast<std::uint64_t>(s));
    return out;
  }
  for (const auto& t : split(v, ',')) out.push_back(std::stoul(t));
  if (out.empty()) fail(line, "no seeds given");
  return out;
}

/// Scalar noise-prior expression: family(args...), e.g. "laplace(0, 1e6)".
inline HgmNoiseSpec parse_prior(const std::string& text, int line) {
  const auto open = text.find('(');
  const auto close = text.rfind(')');
  if (open == std::string::npos || close == std::string::npos || close < open)
    fail(line, "malformed prior expression '" + text + "'");
  const std::string name = trim(text.substr(0, open));
  std::vector<double> args;
  for (const auto& a : split(text.substr(open + 1, close - open - 1), ','))
    if (!a.empty()) args.push_back(parse_double(a, line));
  auto need = [&](size_t n) {
    if (args.size() != n)
      fail(line, "prior '" + name + "' expects " + std::to_string(n) + " arguments");
  };
  const auto v1 = [](double x) { return HgmNoiseSpec::vec1(x); };
  const auto m1 = [](double x) { return HgmNoiseSpec::mat1(x); };
  try {
    if (name == "gaussian") { need(2); return HgmNoiseSpec::gaussian(v1(args[0]), m1(args[1])); }
    if (name == "student_t") { need(3); return HgmNoiseSpec::student_t(v1(args[0]), m1(args[1]), args[2]); }
    if (name == "pearson_vii") { need(4); return HgmNoiseSpec::pearson_vii(v1(args[0]), m1(args[1]), args[2], args[3]); }
    if (name == "slash") { need(3); return HgmNoiseSpec::slash(v1(args[0]), m1(args[1]), args[2]); }
    if (name == "variance_gamma") { need(3); return HgmNoiseSpec::variance_gamma(v1(args[0]), m1(args[1]), args[2]); }
    if (name == "laplace") { need(2); return HgmNoiseSpec::laplace(v1(args[0]), m1(args[1])); }
    if (name == "gh_skew_t") { need(4); return HgmNoiseSpec::gh_skew_t(v1(args[0]), v1(args[1]), m1(args[2]), args[3]); }
    if (name == "gh_variance_gamma") { need(4); return HgmNoiseSpec::gh_variance_gamma(v1(args[0]), v1(args[1]), m1(args[2]), args[3]); }
  } catch (const std::invalid_argument& e) {
    fail(line, std::string("invalid prior parameters: ") + e.what());
  }
  fail(line, "unknown prior family '" + name + "'");
}

/// Gaussian-mixture expression: "0.95 N(0,10) + 0.05 N(0,100)" (scalar).
inline std::vector<NoiseMixtureSpec::Component> parse_mixture_components(
    const std::string& text, int line) {
  std::vector<NoiseMixtureSpec::Component> comps;
  for (const auto& term : split(text, '+')) {
    const auto n_pos = term.find("N(");
    if (n_pos == std::string::npos || term.back() != ')')
      fail(line, "malformed mixture term '" + term + "'");
    const std::string w_text = trim(term.substr(0, n_pos));
    const double w = w_text.empty() ? 1.0 : parse_double(w_text, line);
    const auto args = split(term.substr(n_pos + 2, term.size() - n_pos - 3), ',');
    if (args.size() != 2) fail(line, "N(mean, var) expects two arguments");
    comps.push_back({w, Eigen::VectorXd::Constant(1, parse_double(args[0], line)),
                     Eigen::MatrixXd::Constant(1, 1, parse_double(args[1], line))});
  }
  return comps;
}

inline NoiseMixtureSpec parse_mixture(const std::string& text, int line) {
  NoiseMixtureSpec s;
  s.components = parse_mixture_components(text, line);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    fail(line, e.what());
  }
  return s;
}

inline bool parse_bool(const std::string& v, int line) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail(line, "expected true/false, got '" + v + "'");
}

inline std::string format_double(double d) {
  std::ostringstream ss;
  ss.precision(17);
  ss << d;
  return ss.str();
}

}  // namespace config_detail

ExperimentConfig parse_config_text(const std::string& text);

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  using namespace config_detail;
  ExperimentConfig cfg;
  cfg.filters.clear();
  FilterConfig* current = nullptr;
  std::set<std::string> seen_global;
  std::map<std::string, std::set<std::string>> seen_filter;
  std::set<std::string> scenario_keys_used;
  bool scenario_set = false;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  std::vector<std::tuple<int, std::string, std::string, std::string>> entries;
  std::string section;  // "" = global
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated section header");
      const std::string inner = trim(line.substr(1, line.size() - 2));
      if (inner.rfind("filter:", 0) != 0)
        fail(line_no, "unknown section '" + inner + "' (expected [filter:NAME])");
      const std::string name = trim(inner.substr(7));
      if (name.empty()) fail(line_no, "filter section needs a name");
      for (const auto& f : cfg.filters)
        if (f.name == name) fail(line_no, "duplicate filter name '" + name + "'");
      cfg.filters.emplace_back();
      cfg.filters.back().name = name;
      section = name;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(line_no, "empty key");
    entries.emplace_back(line_no, section, key, value);
  }

  // global entries first pass: scenario must be known before validating keys
  for (const auto& [ln, sec, key, value] : entries) {
    if (!sec.empty()) continue;
    if (key == "scenario") {
      if (scenario_set) fail(ln, "duplicate key 'scenario'");
      scenario_set = true;
      if (value == "sv") cfg.scenario = ScenarioKind::Sv;
      else if (value == "ar2") cfg.scenario = ScenarioKind::Ar2;
      else if (value == "track") cfg.scenario = ScenarioKind::Track;
      else if (value == "custom_lds") cfg.scenario = ScenarioKind::CustomLds;
      else fail(ln, "unknown scenario '" + value + "'");
    }
  }
  if (!scenario_set) throw ConfigError("config: missing required key 'scenario'");

  const std::set<std::string> common = {"scenario", "seeds", "output", "horizon", "steps"};
  std::set<std::string> scenario_keys;
  switch (cfg.scenario) {
    case ScenarioKind::Sv:
      scenario_keys = {"gamma0", "gamma1", "sigma_n2"};
      break;
    case ScenarioKind::Ar2:
      scenario_keys = {"phi1", "phi2", "process_noise", "meas_noise"};
      break;
    case ScenarioKind::Track:
      scenario_keys = {"contaminated"};
      break;
    case ScenarioKind::CustomLds:
      scenario_keys = {"a", "b", "c", "true_process", "true_meas"};
      break;
  }

  for (const auto& [ln, sec, key, value] : entries) {
    if (!sec.empty()) continue;
    if (key == "scenario") continue;
    const bool is_switch = key.rfind("meas_noise_from_", 0) == 0 &&
                           cfg.scenario == ScenarioKind::Ar2;
    if (!common.count(key) && !scenario_keys.count(key) && !is_switch)
      fail(ln, "unknown key '" + key + "'");
    if (!seen_global.insert(key).second) fail(ln, "duplicate key '" + key + "'");
    if (key == "seeds") cfg.seeds = parse_seeds(value, ln);
    else if (key == "output") cfg.output_dir = value;
    else if (key == "horizon") {
      cfg.horizon = static_cast<int>(parse_double(value, ln));
      if (cfg.horizon < 0) fail(ln, "horizon must be >= 0");
    } else if (key == "steps") {
      cfg.steps = static_cast<int>(parse_double(value, ln));
      if (cfg.steps < 0) fail(ln, "steps must be >= 0");
    } else if (key == "gamma0") cfg.sv_gamma0 = parse_double(value, ln);
    else if (key == "gamma1") {
      cfg.sv_gamma1 = parse_double(value, ln);
      if (!(std::abs(cfg.sv_gamma1) < 1.0)) fail(ln, "|gamma1| must be below 1");
    } else if (key == "sigma_n2") cfg.sv_sigma_n2 = parse_double(value, ln);
    else if (key == "phi1") cfg.ar2_phi1 = parse_double(value, ln);
    else if (key == "phi2") cfg.ar2_phi2 = parse_double(value, ln);
    else if (key == "process_noise") {
      cfg.ar2_process = parse_mixture(value, ln);
      cfg.ar2_process_text = value;
    } else if (key == "meas_noise") {
      cfg.ar2_meas = parse_mixture(value, ln);
      cfg.ar2_meas_text = value;
    } else if (is_switch) {
      const int at = static_cast<int>(parse_double(key.substr(16), ln));
      cfg.ar2_meas.schedule[at] = parse_mixture_components(value, ln);
      cfg.ar2_meas_switches.emplace_back(at, value);
    } else if (key == "contaminated") cfg.track_contaminated = parse_bool(value, ln);
    else if (key == "a") cfg.custom_a = parse_double(value, ln);
    else if (key == "b") cfg.custom_b = parse_double(value, ln);
    else if (key == "c") cfg.custom_c = parse_double(value, ln);
    else if (key == "true_process") {
      cfg.custom_process = parse_prior(value, ln);
      cfg.custom_process_text = value;
    } else if (key == "true_meas") {
      cfg.custom_meas = parse_prior(value, ln);
      cfg.custom_meas_text = value;
    }
  }

  // filter sections
  const std::set<std::string> rbpf_keys = {"type", "particles", "rho_w", "rho_e",
                                           "process_prior", "measurement_prior",
                                           "ess_threshold", "resample"};
  const std::set<std::string> kf_keys = {"type", "q", "r"};
  const std::set<std::string> imm_keys = {"type", "sigma_v", "pi"};
  const std::set<std::string> pf_keys = {"type", "particles"};

  for (auto& f : cfg.filters) {
    // find its type first
    bool type_found = false;
    for (const auto& [ln, sec, key, value] : entries) {
      if (sec != f.name || key != "type") continue;
      type_found = true;
      if (value == "rbpf") f.kind = FilterKind::Rbpf;
      else if (value == "kf") f.kind = FilterKind::Kf;
      else if (value == "imm") f.kind = FilterKind::Imm;
      else if (value == "bootstrap_pf") f.kind = FilterKind::BootstrapPf;
      else fail(ln, "unknown filter type '" + value + "'");
    }
    if (!type_found)
      throw ConfigError("config: filter '" + f.name + "' is missing 'type'");
    const std::set<std::string>* allowed =
        f.kind == FilterKind::Rbpf ? &rbpf_keys
        : f.kind == FilterKind::Kf ? &kf_keys
        : f.kind == FilterKind::Imm ? &imm_keys : &pf_keys;
    for (const auto& [ln, sec, key, value] : entries) {
      if (sec != f.name) continue;
      if (!allowed->count(key)) fail(ln, "unknown key '" + key + "' for this filter type");
      if (!seen_filter[f.name].insert(key).second) fail(ln, "duplicate key '" + key + "'");
      if (key == "type") continue;
      if (key == "particles") {
        f.particles = static_cast<int>(parse_double(value, ln));
        if (f.particles < 1) fail(ln, "particles must be >= 1");
      } else if (key == "rho_w" || key == "rho_e") {
        const double rho = parse_double(value, ln);
        if (!(rho > 0.0 && rho < 1.0)) fail(ln, key + " must be in (0,1)");
        (key == "rho_w" ? f.rho_w : f.rho_e) = rho;
      } else if (key == "process_prior") {
        f.process_prior = parse_prior(value, ln);
        f.process_prior_text = value;
      } else if (key == "measurement_prior") {
        f.measurement_prior = parse_prior(value, ln);
        f.measurement_prior_text = value;
      } else if (key == "ess_threshold") {
        f.ess_threshold = parse_double(value, ln);
        if (!(f.ess_threshold > 0.0 && f.ess_threshold <= 1.0))
          fail(ln, "ess_threshold must be in (0,1]");
      } else if (key == "resample") {
        if (value == "every_step") f.resample_every_step = true;
        else if (value == "ess") f.resample_every_step = false;
        else fail(ln, "resample must be 'every_step' or 'ess'");
      } else if (key == "q") f.q = parse_double(value, ln);
      else if (key == "r") f.r = parse_double(value, ln);
      else if (key == "sigma_v") {
        for (const auto& t : split(value, ',')) f.imm_sigma_v.push_back(parse_double(t, ln));
      } else if (key == "pi") {
        for (const auto& row : split(value, ';'))
          for (const auto& t : split(row, ' '))
            if (!t.empty()) f.imm_pi.push_back(parse_double(t, ln));
      }
    }
    if (f.kind == FilterKind::Imm) {
      const size_t m = f.imm_sigma_v.size();
      if (m < 2) throw ConfigError("config: imm filter needs at least two sigma_v");
      if (f.imm_pi.size() != m * m)
        throw ConfigError("config: imm pi must be " + std::to_string(m) + "x" +
                          std::to_string(m));
    }
  }
  if (cfg.filters.empty())
    throw ConfigError("config: at least one [filter:NAME] section is required");
  return cfg;
}

/// Regenerate the text form; parse(emit(c)) is structurally identical to c.
inline std::string emit_config(const ExperimentConfig& cfg) {
  using config_detail::format_double;
  std::ostringstream out;
  const char* scen = cfg.scenario == ScenarioKind::Sv ? "sv"
                     : cfg.scenario == ScenarioKind::Ar2 ? "ar2"
                     : cfg.scenario == ScenarioKind::Track ? "track" : "custom_lds";
  out << "scenario = " << scen << "\n";
  out << "seeds = ";
  for (size_t i = 0; i < cfg.seeds.size(); ++i)
    out << (i ? "," : "") << cfg.seeds[i];
  out << "\n";
  out << "output = " << cfg.output_dir << "\n";
  out << "horizon = " << cfg.horizon << "\n";
  if (cfg.steps >= 0) out << "steps = " << cfg.steps << "\n";
  switch (cfg.scenario) {
    case ScenarioKind::Sv:
      out << "gamma0 = " << format_double(cfg.sv_gamma0) << "\n";
      out << "gamma1 = " << format_double(cfg.sv_gamma1) << "\n";
      out << "sigma_n2 = " << format_double(cfg.sv_sigma_n2) << "\n";
      break;
    case ScenarioKind::Ar2:
      out << "phi1 = " << format_double(cfg.ar2_phi1) << "\n";
      out << "phi2 = " << format_double(cfg.ar2_phi2) << "\n";
      out << "process_noise = " << cfg.ar2_process_text << "\n";
      out << "meas_noise = " << cfg.ar2_meas_text << "\n";
      for (const auto& [at, text] : cfg.ar2_meas_switches)
        out << "meas_noise_from_" << at << " = " << text << "\n";
      break;
    case ScenarioKind::Track:
      out << "contaminated = " << (cfg.track_contaminated ? "true" : "false") << "\n";
      break;
    case ScenarioKind::CustomLds:
      out << "a = " << format_double(cfg.custom_a) << "\n";
      out << "b = " << format_double(cfg.custom_b) << "\n";
      out << "c = " << format_double(cfg.custom_c) << "\n";
      if (!cfg.custom_process_text.empty())
        out << "true_process = " << cfg.custom_process_text << "\n";
      if (!cfg.custom_meas_text.empty())
        out << "true_meas = " << cfg.custom_meas_text << "\n";
      break;
  }
  for (const auto& f : cfg.filters) {
    out << "\n[filter:" << f.name << "]\n";
    switch (f.kind) {
      case FilterKind::Rbpf:
        out << "type = rbpf\n";
        out << "particles = " << f.particles << "\n";
        out << "rho_w = " << format_double(f.rho_w) << "\n";
        out << "rho_e = " << format_double(f.rho_e) << "\n";
        if (!f.process_prior_text.empty())
          out << "process_prior = " << f.process_prior_text << "\n";
        if (!f.measurement_prior_text.empty())
          out << "measurement_prior = " << f.measurement_prior_text << "\n";
        out << "ess_threshold = " << format_double(f.ess_threshold) << "\n";
        out << "resample = " << (f.resample_every_step ? "every_step" : "ess") << "\n";
        break;
      case FilterKind::Kf:
        out << "type = kf\n";
        if (f.q) out << "q = " << format_double(*f.q) << "\n";
        if (f.r) out << "r = " << format_double(*f.r) << "\n";
        break;
      case FilterKind::Imm: {
        out << "type = imm\n";
        out << "sigma_v = ";
        for (size_t i = 0; i < f.imm_sigma_v.size(); ++i)
          out << (i ? "," : "") << format_double(f.imm_sigma_v[i]);
        out << "\n";
        out << "pi = ";
        const size_t m = f.imm_sigma_v.size();
        for (size_t i = 0; i < m; ++i) {
          if (i) out << " ; ";
          for (size_t j = 0; j < m; ++j)
            out << (j ? " " : "") << format_double(f.imm_pi[i * m + j]);
        }
        out << "\n";
        break;
      }
      case FilterKind::BootstrapPf:
        out << "type = bootstrap_pf\n";
        out << "particles = " << f.particles << "\n";
        break;
    }
  }
  return out.str();
}

}  // namespace robust_lds
