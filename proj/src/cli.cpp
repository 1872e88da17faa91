#include "oscidiff/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <utility>

#include "CLI11.hpp"
#include "oscidiff/multiphase.hpp"
#include "oscidiff/reference.hpp"
#include "oscidiff/resonance.hpp"
#include "oscidiff/single_phase.hpp"
#include "oscidiff/spectral.hpp"

namespace oscidiff {

namespace {

// ---------------------------------------------------------------------------
// Small formatting / parsing helpers.
// ---------------------------------------------------------------------------

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key +
                                "': cannot parse number from '" + value + "'");
  }
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key +
                                "': cannot parse integer from '" + value + "'");
  }
}

std::vector<double> parse_double_list(const std::string& key,
                                      const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) {
      throw std::invalid_argument("config key '" + key +
                                  "': empty element in list '" + value + "'");
    }
    out.push_back(parse_double(key, item));
  }
  if (out.empty()) {
    throw std::invalid_argument("config key '" + key + "': empty list");
  }
  return out;
}

// Error tags ride in a CSV cell, so they must not contain the separators.
std::string sanitize_tag(std::string s) {
  for (char& c : s) {
    if (c == ',') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

// ---------------------------------------------------------------------------
// Config plumbing.
// ---------------------------------------------------------------------------

using KeyMap = std::map<std::string, std::string>;

KeyMap read_key_values(const std::string& text) {
  KeyMap map;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value, got '" + line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": empty key");
    }
    if (!map.emplace(key, value).second) {
      throw std::invalid_argument("config key '" + key + "' appears twice");
    }
  }
  return map;
}

bool take(KeyMap& map, const std::string& key, std::string& out) {
  auto it = map.find(key);
  if (it == map.end()) return false;
  out = it->second;
  map.erase(it);
  return true;
}

std::string require(KeyMap& map, const std::string& key) {
  std::string value;
  if (!take(map, key, value)) {
    throw std::invalid_argument("missing required config key '" + key + "'");
  }
  return value;
}

ProfileSpec parse_profile(KeyMap& map, const std::string& prefix) {
  ProfileSpec p;
  std::string kind = require(map, prefix + ".profile");
  std::string v;
  if (kind == "gaussian") {
    p.kind = ProfileSpec::Kind::kGaussian;
    if (take(map, prefix + ".center", v)) p.center = parse_double(prefix + ".center", v);
    if (take(map, prefix + ".width", v)) p.width = parse_double(prefix + ".width", v);
    if (take(map, prefix + ".amplitude", v))
      p.amplitude = parse_double(prefix + ".amplitude", v);
    if (!(p.width > 0.0)) {
      throw std::invalid_argument("config key '" + prefix +
                                  ".width': width must be positive");
    }
  } else if (kind == "constant") {
    p.kind = ProfileSpec::Kind::kConstant;
    if (take(map, prefix + ".c", v)) p.value = parse_double(prefix + ".c", v);
  } else {
    throw std::invalid_argument("config key '" + prefix +
                                ".profile': unknown profile '" + kind +
                                "' (expected gaussian or constant)");
  }
  return p;
}

SchemeKind parse_scheme(const std::string& value, int& tp_case) {
  if (value == "wlf") return SchemeKind::kWlf;
  if (value == "wcn") return SchemeKind::kWcn;
  if (value == "multiphase_lf") return SchemeKind::kMultiphaseLf;
  if (value == "multiphase_cn") return SchemeKind::kMultiphaseCn;
  if (value == "standard_lf") return SchemeKind::kStandardLf;
  if (value == "standard_cn") return SchemeKind::kStandardCn;
  if (value.rfind("two_phase_case", 0) == 0 && value.size() == 15 &&
      value[14] >= '0' && value[14] <= '3') {
    tp_case = value[14] - '0';
    return SchemeKind::kTwoPhase;
  }
  throw std::invalid_argument(
      "config key 'scheme': unknown scheme '" + value +
      "' (expected wlf, wcn, two_phase_case<0-3>, multiphase_lf, "
      "multiphase_cn, standard_lf, standard_cn)");
}

bool is_single_phase_scheme(SchemeKind s) {
  return s == SchemeKind::kWlf || s == SchemeKind::kWcn ||
         s == SchemeKind::kStandardLf || s == SchemeKind::kStandardCn;
}

}  // namespace

std::function<Complex(double)> ProfileSpec::make() const {
  if (kind == Kind::kGaussian) {
    double c = center, w = width, a = amplitude;
    return [c, w, a](double x) {
      double s = (x - c) / w;
      return Complex{a * std::exp(-s * s), 0.0};
    };
  }
  double v = value;
  return [v](double) { return Complex{v, 0.0}; };
}

ExperimentConfig parse_config(const std::string& text) {
  KeyMap map = read_key_values(text);
  ExperimentConfig cfg;

  cfg.epsilons = parse_double_list("equation.epsilon", require(map, "equation.epsilon"));
  std::string v;
  if (take(map, "equation.lambda", v)) cfg.lambda = parse_double("equation.lambda", v);
  if (take(map, "equation.x_left", v)) cfg.x_left = parse_double("equation.x_left", v);
  if (take(map, "equation.length", v)) cfg.length = parse_double("equation.length", v);
  cfg.T = parse_double("equation.T", require(map, "equation.T"));

  for (int n = 1;; ++n) {
    std::string prefix = "phase." + std::to_string(n);
    auto it = map.lower_bound(prefix + ".");
    bool present = it != map.end() && it->first.rfind(prefix + ".", 0) == 0;
    if (!present) break;
    PhaseSpec ph;
    ph.kappa = parse_double(prefix + ".kappa", require(map, prefix + ".kappa"));
    ph.profile = parse_profile(map, prefix);
    cfg.phases.push_back(ph);
  }

  cfg.scheme = parse_scheme(require(map, "scheme"), cfg.tp_case);
  cfg.hs = parse_double_list("grid.h", require(map, "grid.h"));

  if (take(map, "time.rule", v)) {
    if (v == "fixed") cfg.tau_rule = TauRule::kFixed;
    else if (v == "h/2") cfg.tau_rule = TauRule::kHalfH;
    else if (v == "cfl") cfg.tau_rule = TauRule::kCfl;
    else
      throw std::invalid_argument(
          "config key 'time.rule': unknown rule '" + v +
          "' (expected fixed, h/2, or cfl)");
  }
  if (take(map, "time.tau", v)) cfg.tau_fixed = parse_double("time.tau", v);
  if (take(map, "time.gamma", v)) {
    if (v == "beta") cfg.gamma_arg = GammaArg::kBeta;
    else if (v == "3beta") cfg.gamma_arg = GammaArg::kThreeBeta;
    else if (v == "max") cfg.gamma_arg = GammaArg::kMax;
    else
      throw std::invalid_argument(
          "config key 'time.gamma': unknown selector '" + v +
          "' (expected beta, 3beta, or max)");
  }
  if (take(map, "chi.c", v)) cfg.chi_c = parse_double("chi.c", v);

  if (take(map, "reference.kind", v)) {
    if (v == "oracle") cfg.reference = ReferenceKind::kOracle;
    else if (v == "mfe") cfg.reference = ReferenceKind::kMfe;
    else if (v == "closed_form") cfg.reference = ReferenceKind::kClosedForm;
    else
      throw std::invalid_argument(
          "config key 'reference.kind': unknown reference '" + v +
          "' (expected oracle, mfe, or closed_form)");
  }
  if (take(map, "reference.steps", v)) cfg.oracle_steps = parse_int("reference.steps", v);
  if (take(map, "reference.tol", v)) cfg.oracle_tol = parse_double("reference.tol", v);
  if (take(map, "reference.modes", v)) cfg.mfe_modes = parse_int("reference.modes", v);

  take(map, "output.csv", cfg.out_csv);
  take(map, "output.svg", cfg.out_svg);

  if (!map.empty()) {
    throw std::invalid_argument("unknown config key '" + map.begin()->first + "'");
  }

  // Cross-field validation.
  for (double e : cfg.epsilons) {
    if (!(e > 0.0) || !std::isfinite(e)) {
      throw std::invalid_argument("equation.epsilon entries must be positive");
    }
  }
  if (!(cfg.length > 0.0) || !std::isfinite(cfg.length)) {
    throw std::invalid_argument("equation.length must be positive");
  }
  if (!(cfg.T >= 0.0) || !std::isfinite(cfg.T)) {
    throw std::invalid_argument("equation.T must be nonnegative");
  }
  for (double h : cfg.hs) {
    if (!(h > 0.0)) throw std::invalid_argument("grid.h entries must be positive");
    double ratio = cfg.length / h;
    double rounded = std::round(ratio);
    if (rounded < 4.0 || std::abs(ratio - rounded) > 1e-6 * rounded) {
      throw std::invalid_argument(
          "grid.h = " + fmt_short(h) +
          " does not divide the domain length into at least 4 cells");
    }
  }
  if (cfg.tau_rule == TauRule::kFixed && !(cfg.tau_fixed > 0.0)) {
    throw std::invalid_argument("time.rule = fixed requires a positive time.tau");
  }
  if (cfg.phases.empty()) {
    throw std::invalid_argument("at least one phase.<n> block is required");
  }
  if (is_single_phase_scheme(cfg.scheme) && cfg.phases.size() != 1) {
    throw std::invalid_argument("scheme '" + scheme_name(cfg) +
                                "' requires exactly one phase");
  }
  if (cfg.scheme == SchemeKind::kTwoPhase) {
    if (cfg.phases.size() != 2 ||
        std::abs(cfg.phases[0].kappa + cfg.phases[1].kappa) >
            1e-12 * std::max(1.0, std::abs(cfg.phases[0].kappa))) {
      throw std::invalid_argument(
          "two-phase schemes require exactly two phases with opposite wave "
          "numbers");
    }
    if (cfg.phases[0].kappa == 0.0) {
      throw std::invalid_argument("two-phase schemes require a nonzero wave number");
    }
  }
  if (cfg.reference == ReferenceKind::kClosedForm &&
      (cfg.phases.size() != 1 ||
       cfg.phases[0].profile.kind != ProfileSpec::Kind::kConstant)) {
    throw std::invalid_argument(
        "reference.kind = closed_form requires a single constant-profile phase");
  }
  if (cfg.oracle_steps < 1) {
    throw std::invalid_argument("reference.steps must be at least 1");
  }
  if (!(cfg.oracle_tol > 0.0)) {
    throw std::invalid_argument("reference.tol must be positive");
  }
  if (cfg.mfe_modes < 8 || cfg.mfe_modes % 2 != 0) {
    throw std::invalid_argument("reference.modes must be an even number >= 8");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string scheme_name(const ExperimentConfig& config) {
  switch (config.scheme) {
    case SchemeKind::kWlf: return "wlf";
    case SchemeKind::kWcn: return "wcn";
    case SchemeKind::kTwoPhase:
      return "two_phase_case" + std::to_string(config.tp_case);
    case SchemeKind::kMultiphaseLf: return "multiphase_lf";
    case SchemeKind::kMultiphaseCn: return "multiphase_cn";
    case SchemeKind::kStandardLf: return "standard_lf";
    case SchemeKind::kStandardCn: return "standard_cn";
  }
  return "?";
}

std::string reference_name(ReferenceKind kind) {
  switch (kind) {
    case ReferenceKind::kOracle: return "oracle";
    case ReferenceKind::kMfe: return "mfe";
    case ReferenceKind::kClosedForm: return "closed_form";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Sweep execution.
// ---------------------------------------------------------------------------

namespace {

// Per-epsilon shared data: adjusted wave numbers and the prepared reference.
struct RefData {
  bool ok = false;
  std::string error;
  std::vector<double> kappas;       // grid-periodic wave numbers
  ComplexField fine_field;          // oracle: solution on the common fine grid
  std::shared_ptr<ModulationSolution> ms;  // mfe: solved envelope system
};

std::vector<std::function<Complex(double)>> make_profiles(
    const ExperimentConfig& cfg) {
  std::vector<std::function<Complex(double)>> out;
  out.reserve(cfg.phases.size());
  for (const PhaseSpec& p : cfg.phases) out.push_back(p.profile.make());
  return out;
}

PhaseSet make_phase_set(const ExperimentConfig& cfg,
                        const std::vector<double>& kappas) {
  PhaseSet ps;
  for (size_t m = 0; m < cfg.phases.size(); ++m) {
    ps.phases.push_back(Phase{kappas[m], cfg.phases[m].profile.make()});
  }
  return ps;
}

std::vector<double> adjusted_kappas(const ExperimentConfig& cfg, double eps) {
  std::vector<double> out;
  out.reserve(cfg.phases.size());
  for (const PhaseSpec& p : cfg.phases) {
    out.push_back(adjust_wavenumber(p.kappa, eps, cfg.length));
  }
  // The two-phase solvers assume exactly opposite wave numbers; keep the pair
  // symmetric regardless of rounding ties in the adjustment.
  if (cfg.scheme == SchemeKind::kTwoPhase) out[1] = -out[0];
  return out;
}

int mesh_size(const ExperimentConfig& cfg, double h) {
  return static_cast<int>(std::llround(cfg.length / h));
}

// Smallest mesh refined by every configured h (node-set union), used so one
// oracle solve per epsilon serves the whole h list.
int union_mesh_size(const ExperimentConfig& cfg) {
  long long acc = 1;
  for (double h : cfg.hs) {
    long long m = mesh_size(cfg, h);
    acc = std::lcm(acc, m);
    if (acc > (1LL << 22)) {
      throw std::invalid_argument(
          "grid.h list has no reasonable common refinement (node union "
          "exceeds 2^22)");
    }
  }
  return static_cast<int>(acc);
}

// gamma(beta) argument for the time-step rule, per the configured selector.
double gamma_for(const ExperimentConfig& cfg, const std::vector<double>& kappas,
                 double eps, double h) {
  if (cfg.scheme == SchemeKind::kStandardLf ||
      cfg.scheme == SchemeKind::kStandardCn) {
    return gamma_of_beta(0.0);  // the classical stencil carries no weights
  }
  double beta1 = kappas[0] * h / eps;
  switch (cfg.gamma_arg) {
    case GammaArg::kBeta: return gamma_of_beta(beta1);
    case GammaArg::kThreeBeta: return gamma_of_beta(3.0 * beta1);
    case GammaArg::kMax: {
      double kmax = 0.0;
      for (double k : kappas) kmax = std::max(kmax, std::abs(k));
      if (cfg.scheme == SchemeKind::kTwoPhase ||
          cfg.scheme == SchemeKind::kMultiphaseLf ||
          cfg.scheme == SchemeKind::kMultiphaseCn) {
        // Include the combination channels: they are stepped too.
        ResonanceStructure rs = saturate(
            [&] {
              std::vector<WaveVector> in;
              for (double k : kappas) in.emplace_back(k);
              return in;
            }());
        for (const WaveVector& k : rs.K) kmax = std::max(kmax, std::abs(k.components[0]));
        for (const NuTriple& nu : rs.N) kmax = std::max(kmax, std::abs(nu.kappa.components[0]));
      }
      return gamma_of_beta(kmax * h / eps);
    }
  }
  return gamma_of_beta(beta1);
}

double tau_from_rule(const ExperimentConfig& cfg, double eps, double h,
                     double gamma) {
  switch (cfg.tau_rule) {
    case TauRule::kFixed: return cfg.tau_fixed;
    case TauRule::kHalfH: return 0.5 * h;
    case TauRule::kCfl: return std::min(0.5 * h, h * h / (2.0 * eps * gamma));
  }
  return 0.5 * h;
}

ComplexField field_difference(const ComplexField& a, const ComplexField& b) {
  if (!(a.grid() == b.grid())) {
    throw std::invalid_argument("field difference requires matching grids");
  }
  ComplexField d(a.grid());
  for (int j = 0; j < a.size(); ++j) d[j] = a[j] - b[j];
  return d;
}

ComplexField closed_form_solution(const ExperimentConfig& cfg, double eps,
                                  double kappa, const TorusGrid& grid) {
  // Constant profile c: the carrier picks up the free phase and the cubic
  // term an exact rotation e^{-i lambda |c|^2 t}.
  double c = cfg.phases[0].profile.value;
  double omega = 0.5 * kappa * kappa;
  ComplexField u(grid);
  for (int j = 0; j < grid.size; ++j) {
    double x = grid.node(j);
    u[j] = c * std::polar(1.0, (kappa * x - omega * cfg.T) / eps) *
           std::polar(1.0, -cfg.lambda * c * c * cfg.T);
  }
  return u;
}

RefData prepare_reference(const ExperimentConfig& cfg, double eps) {
  RefData ref;
  ref.kappas = adjusted_kappas(cfg, eps);
  try {
    switch (cfg.reference) {
      case ReferenceKind::kClosedForm:
        break;  // evaluated per cell, nothing to precompute
      case ReferenceKind::kOracle: {
        TorusGrid base(cfg.x_left, cfg.length, union_mesh_size(cfg));
        TorusGrid fine = oracle_grid(base, eps);
        ComplexField u0 = make_initial_data(make_phase_set(cfg, ref.kappas), fine, eps);
        ref.fine_field = splitstep_oracle(u0, eps, cfg.lambda, cfg.T,
                                          cfg.oracle_steps, cfg.oracle_tol);
        break;
      }
      case ReferenceKind::kMfe: {
        std::vector<WaveVector> in;
        for (double k : ref.kappas) in.emplace_back(k);
        ResonanceStructure rs = saturate(in);
        ModulationOptions opts;
        opts.modes = cfg.mfe_modes;
        opts.store_times = {0.0, cfg.T};
        TorusGrid domain(cfg.x_left, cfg.length, opts.modes);
        ref.ms = std::make_shared<ModulationSolution>(solve_modulation(
            rs, make_profiles(cfg), domain, eps, cfg.lambda, cfg.T, opts));
        break;
      }
    }
    ref.ok = true;
  } catch (const std::exception& e) {
    ref.ok = false;
    ref.error = e.what();
  }
  return ref;
}

ComplexField reference_on_grid(const ExperimentConfig& cfg, const RefData& ref,
                               double eps, const TorusGrid& grid) {
  switch (cfg.reference) {
    case ReferenceKind::kClosedForm:
      return closed_form_solution(cfg, eps, ref.kappas[0], grid);
    case ReferenceKind::kOracle:
      return restrict_to(ref.fine_field, grid);
    case ReferenceKind::kMfe:
      return assemble_mfe(*ref.ms, cfg.T, grid, eps);
  }
  throw std::logic_error("unhandled reference kind");
}

// Integrates one cell to the final time and returns the assembled solution.
// Fills theta/chi on the row as soon as they are known, so a stability
// failure still reports them.
ComplexField integrate_cell(const ExperimentConfig& cfg, const RefData& ref,
                            double eps, const TorusGrid& grid, double tau,
                            int nsteps, ErrorRow& row) {
  ComplexField u0 = make_initial_data(make_phase_set(cfg, ref.kappas), grid, eps);
  double h = grid.h();

  if (is_single_phase_scheme(cfg.scheme)) {
    bool standard = cfg.scheme == SchemeKind::kStandardLf ||
                    cfg.scheme == SchemeKind::kStandardCn;
    SchemeParams params{eps, cfg.lambda, standard ? 0.0 : ref.kappas[0], tau, h};
    auto [stable, theta] = stability_check(params);
    row.theta = theta;
    row.chi = 0;
    if (nsteps == 0) return u0;
    if (cfg.scheme == SchemeKind::kWlf || cfg.scheme == SchemeKind::kStandardLf) {
      if (!stable) {
        throw std::runtime_error("stability bound violated: theta = " +
                                 fmt_short(theta));
      }
      LeapfrogState st = cfg.scheme == SchemeKind::kWlf
                             ? wlf_start(u0, params)
                             : standard_lf_start(u0, params);
      while (st.n < nsteps) {
        if (cfg.scheme == SchemeKind::kWlf) wlf_step(st);
        else standard_lf_step(st);
      }
      return st.u_curr;
    }
    CnState st{params, u0, 0, 1e-12, 50};
    for (int n = 0; n < nsteps; ++n) {
      if (cfg.scheme == SchemeKind::kWcn) wcn_step(st);
      else standard_cn_step(st);
    }
    return st.u_curr;
  }

  // Coupled schemes: build the channel structure from the adjusted carriers.
  std::vector<WaveVector> in;
  for (double k : ref.kappas) in.emplace_back(k);
  ResonanceStructure rs = saturate(in);
  int chi = cfg.scheme == SchemeKind::kTwoPhase
                ? 0
                : chi_switch(h, eps, cfg.chi_c);
  MultiphaseScheme scheme =
      make_multiphase_scheme(rs, grid, eps, cfg.lambda, tau, chi);
  // Report the stability quotient over the channels the scheme actually
  // steps: cases 0-2 leave the correction channels untouched.
  row.theta = cfg.scheme == SchemeKind::kTwoPhase && cfg.tp_case < 3
                  ? carrier_theta(scheme)
                  : multiphase_theta(scheme);
  row.chi = chi;
  if (nsteps == 0) return u0;

  std::vector<std::function<Complex(double)>> profiles = make_profiles(cfg);
  if (cfg.scheme == SchemeKind::kMultiphaseCn) {
    MultiphaseCnState st = multiphase_cn_start(scheme, profiles);
    for (int n = 0; n < nsteps; ++n) multiphase_cn_step(st);
    return assemble_solution(st);
  }
  // Every leapfrog row in a report must satisfy the step bound over all of
  // its stepped channels, so gate here rather than rely on the start call
  // (which checks only the carrier pair for the two-mode case schemes).
  if (!(row.theta < 1.0)) {
    throw std::runtime_error("stability bound violated: theta = " +
                             fmt_short(row.theta));
  }
  MultiphaseLfState st = cfg.scheme == SchemeKind::kTwoPhase
                             ? two_phase_start(scheme, profiles, cfg.tp_case)
                             : multiphase_lf_start(scheme, profiles);
  while (st.n < nsteps) {
    if (cfg.scheme == SchemeKind::kTwoPhase) two_phase_step_case(cfg.tp_case, st);
    else multiphase_lf_step(st);
  }
  return assemble_solution(st);
}

void run_cell(const ExperimentConfig& cfg, const RefData& ref, double eps,
              double h, ErrorRow& row) {
  auto t0 = std::chrono::steady_clock::now();
  try {
    TorusGrid grid(cfg.x_left, cfg.length, mesh_size(cfg, h));
    double gamma = gamma_for(cfg, ref.kappas, eps, h);
    double tau = tau_from_rule(cfg, eps, h, gamma);
    if (!(tau > 0.0) || !std::isfinite(tau)) {
      throw std::runtime_error("time-step rule produced a nonpositive tau");
    }
    int nsteps = 0;
    if (cfg.T > 0.0) {
      nsteps = std::max(1, static_cast<int>(std::ceil(cfg.T / tau - 1e-9)));
      tau = cfg.T / nsteps;
    }
    row.tau = tau;
    if (!ref.ok) throw std::runtime_error("reference: " + ref.error);

    ComplexField u = integrate_cell(cfg, ref, eps, grid, tau, nsteps, row);
    ComplexField r = reference_on_grid(cfg, ref, eps, grid);
    ComplexField d = field_difference(u, r);
    row.linf_error = linf_norm(d);
    row.wiener_error = wiener_norm(d);
  } catch (const std::exception& e) {
    row.error = sanitize_tag(e.what());
    row.linf_error = std::numeric_limits<double>::quiet_NaN();
    row.wiener_error = std::numeric_limits<double>::quiet_NaN();
  }
  row.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ErrorReport run_experiment(const ExperimentConfig& config, int jobs) {
  if (jobs < 1) throw std::invalid_argument("jobs must be at least 1");

  const size_t ne = config.epsilons.size();
  const size_t nh = config.hs.size();

  // References are shared across the h list; prepare them up front so the
  // expensive solves are not repeated per cell.
  std::vector<RefData> refs;
  refs.reserve(ne);
  for (double eps : config.epsilons) refs.push_back(prepare_reference(config, eps));

  ErrorReport report;
  report.rows.resize(ne * nh);
  for (size_t ie = 0; ie < ne; ++ie) {
    for (size_t ih = 0; ih < nh; ++ih) {
      ErrorRow& row = report.rows[ie * nh + ih];
      row.epsilon = config.epsilons[ie];
      row.h = config.hs[ih];
      row.scheme = scheme_name(config);
      row.reference = reference_name(config.reference);
    }
  }

  auto work = [&](size_t cell) {
    ErrorRow& row = report.rows[cell];
    run_cell(config, refs[cell / nh], row.epsilon, row.h, row);
  };

  size_t cells = report.rows.size();
  size_t workers = std::min<size_t>(static_cast<size_t>(jobs), cells);
  if (workers <= 1) {
    for (size_t c = 0; c < cells; ++c) work(c);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (size_t c = next.fetch_add(1); c < cells; c = next.fetch_add(1)) {
          work(c);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }
  return report;
}

// ---------------------------------------------------------------------------
// CSV.
// ---------------------------------------------------------------------------

static const char kCsvHeader[] =
    "epsilon,h,tau,scheme,reference,linf_error,wiener_error,runtime_s,theta,chi";

std::string to_csv(const ErrorReport& report) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const ErrorRow& r : report.rows) {
    out += fmt_double(r.epsilon);
    out += ',';
    out += fmt_double(r.h);
    out += ',';
    out += fmt_double(r.tau);
    out += ',';
    out += r.scheme;
    out += ',';
    out += r.reference;
    out += ',';
    out += r.error.empty() ? fmt_double(r.linf_error) : "error[" + r.error + "]";
    out += ',';
    out += fmt_double(r.wiener_error);
    out += ',';
    out += fmt_double(r.runtime_s);
    out += ',';
    out += fmt_double(r.theta);
    out += ',';
    out += std::to_string(r.chi);
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double csv_double(const std::string& s) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("malformed CSV number '" + s + "'");
  }
}

}  // namespace

ErrorReport parse_csv(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line) || trim(line) != kCsvHeader) {
    throw std::invalid_argument("unexpected CSV header");
  }
  ErrorReport report;
  while (std::getline(ss, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f = split_csv_line(trim(line));
    if (f.size() != 10) {
      throw std::invalid_argument("CSV row has " + std::to_string(f.size()) +
                                  " fields, expected 10");
    }
    ErrorRow r;
    r.epsilon = csv_double(f[0]);
    r.h = csv_double(f[1]);
    r.tau = csv_double(f[2]);
    r.scheme = f[3];
    r.reference = f[4];
    if (f[5].rfind("error[", 0) == 0 && f[5].back() == ']') {
      r.error = f[5].substr(6, f[5].size() - 7);
      r.linf_error = std::numeric_limits<double>::quiet_NaN();
    } else {
      r.linf_error = csv_double(f[5]);
    }
    r.wiener_error = csv_double(f[6]);
    r.runtime_s = csv_double(f[7]);
    r.theta = csv_double(f[8]);
    r.chi = parse_int("chi", f[9]);
    report.rows.push_back(std::move(r));
  }
  return report;
}

// ---------------------------------------------------------------------------
// SVG.
// ---------------------------------------------------------------------------

namespace {

// Plot geometry: 800x560 canvas, data box [80,760] x [40,500].
constexpr double kPlotX0 = 80.0, kPlotX1 = 760.0;
constexpr double kPlotY0 = 40.0, kPlotY1 = 500.0;

std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string decade_label(int e) { return "1e" + std::to_string(e); }

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

std::string to_svg(const ErrorReport& report) {
  // Collect plottable points grouped by h, preserving first-appearance order.
  std::vector<double> h_values;
  std::vector<std::vector<std::pair<double, double>>> series;  // (eps, err)
  double lx_min = 0.0, lx_max = 0.0, ly_min = 0.0, ly_max = 0.0;
  bool any = false;
  for (const ErrorRow& r : report.rows) {
    if (!r.error.empty() || !(r.linf_error > 0.0) || !(r.epsilon > 0.0)) continue;
    size_t s = 0;
    while (s < h_values.size() && h_values[s] != r.h) ++s;
    if (s == h_values.size()) {
      h_values.push_back(r.h);
      series.emplace_back();
    }
    double lx = std::log10(r.epsilon), ly = std::log10(r.linf_error);
    series[s].emplace_back(r.epsilon, r.linf_error);
    if (!any) {
      lx_min = lx_max = lx;
      ly_min = ly_max = ly;
      any = true;
    } else {
      lx_min = std::min(lx_min, lx);
      lx_max = std::max(lx_max, lx);
      ly_min = std::min(ly_min, ly);
      ly_max = std::max(ly_max, ly);
    }
  }
  // Pad the ranges out to whole decades (at least one decade wide).
  int x0 = any ? static_cast<int>(std::floor(lx_min - 1e-9)) : -4;
  int x1 = any ? static_cast<int>(std::ceil(lx_max + 1e-9)) : 0;
  int y0 = any ? static_cast<int>(std::floor(ly_min - 1e-9)) : -8;
  int y1 = any ? static_cast<int>(std::ceil(ly_max + 1e-9)) : 0;
  if (x1 == x0) ++x1;
  if (y1 == y0) ++y1;

  auto X = [&](double lx) {
    return kPlotX0 + (lx - x0) / double(x1 - x0) * (kPlotX1 - kPlotX0);
  };
  auto Y = [&](double ly) {
    return kPlotY1 - (ly - y0) / double(y1 - y0) * (kPlotY1 - kPlotY0);
  };

  std::string svg;
  svg +=
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"560\" "
      "viewBox=\"0 0 800 560\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"560\" fill=\"white\"/>\n";
  svg += "<text x=\"400\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">maximum error vs epsilon</text>\n";

  // Decade gridlines with labels.
  for (int e = x0; e <= x1; ++e) {
    double px = X(e);
    svg += "<line x1=\"" + svg_num(px) + "\" y1=\"" + svg_num(kPlotY0) +
           "\" x2=\"" + svg_num(px) + "\" y2=\"" + svg_num(kPlotY1) +
           "\" stroke=\"#dddddd\"/>\n";
    svg += "<text x=\"" + svg_num(px) + "\" y=\"" + svg_num(kPlotY1 + 18.0) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
           decade_label(e) + "</text>\n";
  }
  for (int e = y0; e <= y1; ++e) {
    double py = Y(e);
    svg += "<line x1=\"" + svg_num(kPlotX0) + "\" y1=\"" + svg_num(py) +
           "\" x2=\"" + svg_num(kPlotX1) + "\" y2=\"" + svg_num(py) +
           "\" stroke=\"#dddddd\"/>\n";
    svg += "<text x=\"" + svg_num(kPlotX0 - 8.0) + "\" y=\"" + svg_num(py + 4.0) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" +
           decade_label(e) + "</text>\n";
  }

  // Axis frame and labels.
  svg += "<rect x=\"" + svg_num(kPlotX0) + "\" y=\"" + svg_num(kPlotY0) +
         "\" width=\"" + svg_num(kPlotX1 - kPlotX0) + "\" height=\"" +
         svg_num(kPlotY1 - kPlotY0) + "\" fill=\"none\" stroke=\"black\"/>\n";
  svg += "<text x=\"420\" y=\"545\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">epsilon</text>\n";
  svg += "<text x=\"20\" y=\"270\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\" "
         "transform=\"rotate(-90 20 270)\">maximum error</text>\n";

  // One polyline per h, points sorted by epsilon.
  for (size_t s = 0; s < series.size(); ++s) {
    auto pts = series[s];
    std::sort(pts.begin(), pts.end());
    const char* color = kPalette[s % (sizeof kPalette / sizeof kPalette[0])];
    std::string points;
    for (const auto& [eps, err] : pts) {
      points += svg_num(X(std::log10(eps))) + "," + svg_num(Y(std::log10(err))) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"";
    svg += color;
    svg += "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    for (const auto& [eps, err] : pts) {
      svg += "<circle cx=\"" + svg_num(X(std::log10(eps))) + "\" cy=\"" +
             svg_num(Y(std::log10(err))) + "\" r=\"3\" fill=\"";
      svg += color;
      svg += "\"/>\n";
    }
    double ly = kPlotY0 + 16.0 + 18.0 * static_cast<double>(s);
    svg += "<line x1=\"640\" y1=\"" + svg_num(ly - 4.0) + "\" x2=\"664\" y2=\"" +
           svg_num(ly - 4.0) + "\" stroke=\"";
    svg += color;
    svg += "\" stroke-width=\"1.5\"/>\n";
    svg += "<text x=\"670\" y=\"" + svg_num(ly) +
           "\" font-family=\"sans-serif\" font-size=\"12\">h = " +
           fmt_short(h_values[s]) + "</text>\n";
  }
  if (!any) {
    svg += "<text x=\"420\" y=\"270\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"14\">no data</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

}  // namespace

void emit_csv(const ErrorReport& report, const std::string& path) {
  write_file(path, to_csv(report));
}

void emit_svg(const ErrorReport& report, const std::string& path) {
  write_file(path, to_svg(report));
}

// ---------------------------------------------------------------------------
// Subcommand reports.
// ---------------------------------------------------------------------------

std::string stability_csv(const ExperimentConfig& config) {
  std::string out = "epsilon,h,tau,k,mu,abs_lambda_plus,abs_lambda_minus,stable\n";
  for (double eps : config.epsilons) {
    std::vector<double> kappas = adjusted_kappas(config, eps);
    for (double h : config.hs) {
      double gamma = gamma_for(config, kappas, eps, h);
      double tau = tau_from_rule(config, eps, h, gamma);
      SchemeParams params{eps, config.lambda, kappas[0], tau, h};
      int M = mesh_size(config, h);
      for (const ModeAnalysis& m : analyze_spectrum(params, M)) {
        out += fmt_double(eps) + "," + fmt_double(h) + "," + fmt_double(tau) +
               "," + std::to_string(m.k) + "," + fmt_double(m.mu) + "," +
               fmt_double(std::abs(m.lambda_plus)) + "," +
               fmt_double(std::abs(m.lambda_minus)) + "," +
               (m.stable ? "1" : "0") + "\n";
      }
    }
  }
  return out;
}

std::string resonance_csv(const std::vector<double>& kappas, int dim) {
  if (dim < 1) throw std::invalid_argument("dim must be at least 1");
  if (kappas.empty() || kappas.size() % static_cast<size_t>(dim) != 0) {
    throw std::invalid_argument(
        "the wave-number list length must be a positive multiple of dim");
  }
  std::vector<WaveVector> in;
  for (size_t i = 0; i < kappas.size(); i += static_cast<size_t>(dim)) {
    in.emplace_back(std::vector<double>(kappas.begin() + static_cast<long>(i),
                                        kappas.begin() + static_cast<long>(i + dim)));
  }
  ResonanceStructure rs = saturate(in);

  auto vec_str = [](const WaveVector& k) {
    std::string s;
    for (size_t i = 0; i < k.components.size(); ++i) {
      if (i) s += ';';
      s += fmt_double(k.components[i]);
    }
    return s;
  };

  std::string out = "kind,kappa,omega,omega_star,delta,i,j,k\n";
  for (int r = 0; r < rs.size(); ++r) {
    out += "carrier," + vec_str(rs.K[static_cast<size_t>(r)]) + "," +
           fmt_double(rs.omegas[static_cast<size_t>(r)]) + "," +
           fmt_double(rs.omegas[static_cast<size_t>(r)]) + ",0," +
           std::to_string(r + 1) + ",0,0\n";
  }
  for (const NuTriple& nu : rs.N) {
    out += "channel," + vec_str(nu.kappa) + "," + fmt_double(nu.omega) + "," +
           fmt_double(nu.omega_star) + "," + fmt_double(nu.delta) + "," +
           std::to_string(nu.idx[0]) + "," + std::to_string(nu.idx[1]) + "," +
           std::to_string(nu.idx[2]) + "\n";
  }
  return out;
}

std::string defect_csv(const ExperimentConfig& config, int levels,
                       double* fitted_order) {
  if (levels < 2) throw std::invalid_argument("levels must be at least 2");
  if (config.phases.size() != 1 ||
      config.phases[0].profile.kind != ProfileSpec::Kind::kConstant) {
    throw std::invalid_argument(
        "the defect study requires a single constant-profile phase (the only "
        "case with a closed-form exact envelope)");
  }
  double c = config.phases[0].profile.value;
  double lambda = config.lambda;
  // Exact envelope of the constant-profile solution: a(t) = c e^{-i lambda c^2 t}.
  auto a_exact = [c, lambda](double t, double) {
    return c * std::polar(1.0, -lambda * c * c * t);
  };

  std::string out =
      "epsilon,level,h,tau,max_defect,wiener_defect,max_defect_over_eps\n";
  std::vector<double> slopes;
  for (double eps : config.epsilons) {
    std::vector<double> kappas = adjusted_kappas(config, eps);
    std::vector<double> log_h, log_d;
    for (int level = 0; level < levels; ++level) {
      double h = config.hs[0] / std::pow(2.0, level);
      int M = mesh_size(config, h);
      TorusGrid grid(config.x_left, config.length, M);
      double gamma = gamma_for(config, kappas, eps, h);
      double tau = tau_from_rule(config, eps, h, gamma);
      SchemeParams params{eps, lambda, kappas[0], tau, h};
      ComplexField d = compute_defect(a_exact, params, grid, 0.0);
      double dmax = linf_norm(d);
      double dw = wiener_norm(d);
      out += fmt_double(eps) + "," + std::to_string(level) + "," +
             fmt_double(h) + "," + fmt_double(tau) + "," + fmt_double(dmax) +
             "," + fmt_double(dw) + "," + fmt_double(dmax / eps) + "\n";
      if (dmax > 0.0) {
        log_h.push_back(std::log(h));
        log_d.push_back(std::log(dmax));
      }
    }
    // Least-squares slope of log(defect) against log(h) for this epsilon.
    size_t n = log_h.size();
    if (n >= 2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (size_t i = 0; i < n; ++i) {
        sx += log_h[i];
        sy += log_d[i];
        sxx += log_h[i] * log_h[i];
        sxy += log_h[i] * log_d[i];
      }
      double denom = double(n) * sxx - sx * sx;
      if (denom != 0.0) slopes.push_back((double(n) * sxy - sx * sy) / denom);
    }
  }
  if (fitted_order) {
    double acc = 0.0;
    for (double s : slopes) acc += s;
    *fitted_order = slopes.empty() ? 0.0 : acc / static_cast<double>(slopes.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Entry point.
// ---------------------------------------------------------------------------

namespace {

std::string join_path(const std::string& dir, const std::string& file) {
  if (dir.empty() || file.empty() || file.front() == '/') return file;
  if (dir.back() == '/') return dir + file;
  return dir + "/" + file;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"weighted finite-difference schemes for oscillatory NLS data"};
  app.require_subcommand(1);

  std::string run_config, run_out;
  int run_jobs = 1;
  CLI::App* run = app.add_subcommand("run", "execute an error sweep");
  run->add_option("--config", run_config, "experiment config file")->required();
  run->add_option("--out", run_out, "directory for the output files");
  run->add_option("--jobs", run_jobs, "worker threads for the sweep cells")
      ->check(CLI::PositiveNumber);

  std::string stab_config;
  CLI::App* stab =
      app.add_subcommand("stability", "per-mode amplification table (CSV)");
  stab->add_option("--config", stab_config, "experiment config file")->required();

  std::string res_kappas;
  int res_dim = 1;
  CLI::App* res = app.add_subcommand(
      "resonance", "saturate a carrier set and tabulate the channels (CSV)");
  res->add_option("--kappas", res_kappas, "comma list of wave numbers")->required();
  res->add_option("--dim", res_dim, "components per wave vector")
      ->check(CLI::PositiveNumber);

  std::string def_config;
  int def_levels = 4;
  CLI::App* def =
      app.add_subcommand("defect", "defect-scaling halving table (CSV)");
  def->add_option("--config", def_config, "experiment config file")->required();
  def->add_option("--levels", def_levels, "number of (tau, h) halvings")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      ExperimentConfig cfg = load_config(run_config);
      ErrorReport report = run_experiment(cfg, run_jobs);
      std::string csv_path = cfg.out_csv;
      if (csv_path.empty() && !run_out.empty()) csv_path = "errors.csv";
      if (!csv_path.empty()) {
        emit_csv(report, join_path(run_out, csv_path));
      } else {
        std::fputs(to_csv(report).c_str(), stdout);
      }
      if (!cfg.out_svg.empty()) emit_svg(report, join_path(run_out, cfg.out_svg));
      size_t failed = 0;
      for (const ErrorRow& r : report.rows) {
        if (!r.error.empty()) ++failed;
      }
      std::fprintf(stderr, "cells: %zu, failed: %zu\n", report.rows.size(), failed);
      return failed == 0 ? 0 : 2;
    }
    if (stab->parsed()) {
      std::fputs(stability_csv(load_config(stab_config)).c_str(), stdout);
      return 0;
    }
    if (res->parsed()) {
      std::vector<double> ks = parse_double_list("--kappas", res_kappas);
      std::fputs(resonance_csv(ks, res_dim).c_str(), stdout);
      return 0;
    }
    if (def->parsed()) {
      double order = 0.0;
      std::string table = defect_csv(load_config(def_config), def_levels, &order);
      std::fputs(table.c_str(), stdout);
      std::fprintf(stderr, "fitted order: %.3f\n", order);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}

}  // namespace oscidiff
