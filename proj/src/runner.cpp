#include "hsflow/runner.hpp"

#include "hsflow/checkpoint.hpp"
#include "hsflow/errors.hpp"
#include "hsflow/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

namespace hsflow {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "' expects a boolean, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  Setter set;
  Getter get;
};

template <class T>
Key number_key(T RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_floating_point_v<T>)
              c.*m = to_double(k, v);
            else
              c.*m = static_cast<T>(to_integer(k, v));
          },
          [m](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return fmt(c.*m);
            else
              return std::to_string(c.*m);
          }};
}

Key string_key(std::string RunConfig::*m) {
  return {[m](RunConfig& c, const std::string&, const std::string& v) { c.*m = v; },
          [m](const RunConfig& c) { return c.*m; }};
}

const std::map<std::string, Key>& keys() {
  static const std::map<std::string, Key> table = [] {
    std::map<std::string, Key> t;
    t["N"] = number_key(&RunConfig::N);
    t["L"] = number_key(&RunConfig::L);
    t["backend"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.backend = backend_from_string(v); },
                    [](const RunConfig& c) { return to_string(c.backend); }};
    t["scenario"] = string_key(&RunConfig::scenario);
    t["epsilon"] = number_key(&RunConfig::epsilon);
    t["modes"] = number_key(&RunConfig::modes);
    t["terms"] = number_key(&RunConfig::terms);
    t["lambda"] = number_key(&RunConfig::lambda);
    t["K"] = number_key(&RunConfig::K);
    t["eps0"] = number_key(&RunConfig::eps0);
    t["safety"] = number_key(&RunConfig::safety);
    t["dt"] = number_key(&RunConfig::dt);
    t["end_time"] = number_key(&RunConfig::end_time);
    t["max_steps"] = number_key(&RunConfig::max_steps);
    t["record_stride"] = number_key(&RunConfig::record_stride);
    t["checkpoint_stride"] = number_key(&RunConfig::checkpoint_stride);
    t["output_dir"] = string_key(&RunConfig::output_dir);
    t["workers"] = number_key(&RunConfig::workers);
    t["seed"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                   std::uint64_t out = 0;
                   const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
                   if (ec != std::errc() || ptr != v.data() + v.size())
                     throw ConfigError("'" + k + "' expects an unsigned integer, got '" + v + "'");
                   c.seed = out;
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }};
    t["resume"] = string_key(&RunConfig::resume);
    t["bochner"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.bochner = to_bool(k, v); },
                    [](const RunConfig& c) { return std::string(c.bochner ? "true" : "false"); }};
    t["heat_c1"] = number_key(&RunConfig::heat_c1);
    t["heat_c2"] = number_key(&RunConfig::heat_c2);
    t["bochner_c2"] = number_key(&RunConfig::bochner_c2);
    t["t2_allowance"] = number_key(&RunConfig::t2_allowance);
    t["pairing_tol"] = number_key(&RunConfig::pairing_tol);
    t["det_tol"] = number_key(&RunConfig::det_tol);
    t["self_duality_c"] = number_key(&RunConfig::self_duality_c);
    t["w0"] = number_key(&RunConfig::w0);
    t["chart_cells"] = number_key(&RunConfig::chart_cells);
    t["chart_keep"] = number_key(&RunConfig::chart_keep);
    return t;
  }();
  return table;
}

const std::vector<std::string> kScenarios{"flat", "perturbed", "anisotropic", "c0", "donaldson-chart"};

}  // namespace

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = keys().find(key);
    if (it == keys().end()) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->second.set(cfg, key, value);
  }
  validate(cfg);
  return cfg;
}

RunConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

void validate(const RunConfig& c) {
  Grid4{c.N, c.L}.validate();
  if (std::find(kScenarios.begin(), kScenarios.end(), c.scenario) == kScenarios.end())
    throw ConfigError("unknown scenario '" + c.scenario + "'");
  if (!(c.epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
  if (c.modes < 1 || 3 * c.modes >= c.N) throw ConfigError("modes must satisfy 1 <= modes < N/3");
  if (c.terms < 1) throw ConfigError("terms must be at least 1");
  if (!(c.lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (!(c.K >= 0.0)) throw ConfigError("K must be non-negative");
  if (!(c.eps0 > 0.0)) throw ConfigError("eps0 must be positive");
  if (!(c.safety > 0.0 && c.safety <= 1.0)) throw ConfigError("safety must lie in (0, 1]");
  if (!(c.dt >= 0.0)) throw ConfigError("dt must be non-negative");
  if (!(c.end_time >= 0.0)) throw ConfigError("end_time must be non-negative");
  if (c.max_steps < 1) throw ConfigError("max_steps must be positive");
  if (c.record_stride < 1) throw ConfigError("record_stride must be positive");
  if (c.checkpoint_stride < 0) throw ConfigError("checkpoint_stride must be non-negative");
  if (c.output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (c.workers < 1) throw ConfigError("workers must be positive");
  for (double v : {c.heat_c1, c.heat_c2, c.bochner_c2, c.t2_allowance, c.pairing_tol, c.det_tol, c.self_duality_c})
    if (!(v >= 0.0)) throw ConfigError("tolerance constants must be non-negative");
  if (!(c.w0 > 0.0)) throw ConfigError("w0 must be positive");
  if (c.chart_cells < 5) throw ConfigError("chart_cells must be at least 5");
  if (!(c.chart_keep > 0.0 && c.chart_keep < 1.0)) throw ConfigError("chart_keep must lie in (0, 1)");
  if (c.scenario == "donaldson-chart" && c.end_time != 0.0)
    throw ConfigError("donaldson-chart is a static construction; set end_time = 0");
  if (c.scenario != "donaldson-chart" && !(c.end_time > 0.0)) throw ConfigError("end_time must be positive");
}

std::string config_text(const RunConfig& cfg) {
  std::string s;
  for (const auto& [k, key] : keys()) s += k + "=" + key.get(cfg) + "\n";
  return s;
}

void apply_environment(RunConfig& cfg) {
  if (const char* dir = std::getenv(kOutputDirEnv); dir != nullptr && *dir != '\0') cfg.output_dir = dir;
}

Field perturbation(const Lattice& lat, int modes, int terms, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const auto uniform = [&] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
  const auto wavenumber = [&] { return static_cast<int>(gen() % static_cast<std::uint64_t>(2 * modes + 1)) - modes; };

  struct Mode {
    std::array<double, 4> kappa;
    double amp, phase;
  };
  // alpha[i][a]: Fourier terms of component a of the 1-form alpha_i.
  std::array<std::array<std::vector<Mode>, 4>, 3> alpha;
  for (auto& ai : alpha)
    for (auto& comp : ai)
      for (int t = 0; t < terms; ++t) {
        std::array<int, 4> k{};
        do {
          for (auto& kk : k) kk = wavenumber();
        } while (k == std::array<int, 4>{});
        Mode m;
        for (int a = 0; a < 4; ++a) m.kappa[a] = 2.0 * std::numbers::pi * k[a] / lat.extent(a);
        m.amp = 2.0 * uniform() - 1.0;
        m.phase = 2.0 * std::numbers::pi * uniform();
        comp.push_back(m);
      }

  Field out(lat, 18);
  parallel_for(lat.size(), [&](std::size_t p) {
    const auto idx = lat.unflatten(p);
    std::array<double, 4> x;
    for (int a = 0; a < 4; ++a) x[a] = lat.coord(a, idx[a]);
    for (int i = 0; i < 3; ++i) {
      // d_a alpha_b for every a, b.
      double grad[4][4] = {};
      for (int b = 0; b < 4; ++b)
        for (const Mode& m : alpha[i][b]) {
          double arg = m.phase;
          for (int a = 0; a < 4; ++a) arg += m.kappa[a] * x[a];
          const double s = -m.amp * std::sin(arg);
          for (int a = 0; a < 4; ++a) grad[a][b] += m.kappa[a] * s;
        }
      for (int s = 0; s < 6; ++s) {
        const auto [a, b] = kForm2Pairs[s];
        out.at(6 * i + s, p) = grad[a][b] - grad[b][a];
      }
    }
  });
  const double sup = out.max_abs();
  if (sup > 0.0) out.scale(1.0 / sup);
  return out;
}

namespace {

Field constant_triple(const Lattice& lat, const Triple2FormPoint& tr) {
  Field out(lat, 18);
  for (int i = 0; i < 3; ++i)
    for (int s = 0; s < 6; ++s) std::fill_n(out.comp(6 * i + s), lat.size(), tr.omega[i].c[s]);
  return out;
}

}  // namespace

Field anisotropic_triple(const Lattice& lat, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  Triple2FormPoint tr = standard_triple();
  const double scale[3] = {std::sqrt(lambda), std::sqrt(lambda), 1.0 / lambda};
  for (int i = 0; i < 3; ++i)
    for (double& c : tr.omega[i].c) c *= scale[i];
  return constant_triple(lat, tr);
}

FlowState rescale(const FlowState& state, double K, RescaleCheck* check) {
  if (!(K > 0.0)) throw DomainError("rescale factor must be positive");
  Field w = state.omega();
  w.scale(K * K);
  FlowState out(state, std::move(w), state.t());
  if (check) {
    check->K = K;
    const Field dq2a = dq_norm_sq_field(state);
    const Field dq2b = dq_norm_sq_field(out);
    std::vector<double> qd(state.lattice().size()), dd(qd.size());
    parallel_for(qd.size(), [&](std::size_t p) {
      double m = 0.0;
      for (int s = 0; s < 6; ++s) m = std::max(m, std::abs(out.q().at(s, p) - state.q().at(s, p)));
      qd[p] = m;
      dd[p] = std::abs(K * K * dq2b.at(0, p) - dq2a.at(0, p)) / (1.0 + dq2a.at(0, p));
    });
    check->q_change = max_of(qd);
    check->dq2_change = max_of(dd);
  }
  return out;
}

double c0_rescale_factor(const FlowState& state, double eps0) {
  const Field dq2 = dq_norm_sq_field(state);
  double k2 = 1.0;
  for (std::size_t p = 0; p < state.lattice().size(); ++p) {
    const double tr = state.q().at(0, p) + state.q().at(1, p) + state.q().at(2, p);
    const double room = 3.0 + eps0 - tr;
    if (!(room > 0.0)) throw DomainError("sup tr Q exceeds 3 + eps0; no rescale can meet the c0 criterion");
    k2 = std::max(k2, dq2.at(0, p) / room);
  }
  return 1.01 * std::sqrt(k2);
}

Scenario scenario_build(const RunConfig& cfg) {
  validate(cfg);
  const Lattice lat = Grid4{cfg.N, cfg.L}.lattice();
  ordered_json info;
  info["scenario"] = cfg.scenario;
  Field omega;
  if (cfg.scenario == "flat") {
    omega = constant_triple(lat, standard_triple());
  } else if (cfg.scenario == "perturbed" || cfg.scenario == "c0") {
    omega = constant_triple(lat, standard_triple());
    omega.axpy(cfg.epsilon, perturbation(lat, cfg.modes, cfg.terms, cfg.seed));
  } else if (cfg.scenario == "anisotropic") {
    omega = anisotropic_triple(lat, cfg.lambda);
    if (cfg.epsilon > 0.0) omega.axpy(cfg.epsilon, perturbation(lat, cfg.modes, cfg.terms, cfg.seed));
    info["lambda"] = cfg.lambda;
    info["trQ_constant_part"] = 2.0 * cfg.lambda + 1.0 / (cfg.lambda * cfg.lambda);
  } else {
    throw ConfigError("scenario '" + cfg.scenario + "' has no torus state");
  }
  info["epsilon"] = cfg.scenario == "flat" ? 0.0 : cfg.epsilon;

  FlowState state(lat, cfg.backend, std::move(omega), 0.0);
  try {
    state.margin();
  } catch (const NotHypersymplectic& e) {
    throw NotHypersymplectic("initial triple is not hypersymplectic (epsilon too large?): " + std::string(e.what()),
                             e.index(), e.margin());
  }

  if (cfg.scenario == "c0") {
    const RegionFlag before = c0_criterion(state, cfg.eps0);
    const double K = cfg.K > 0.0 ? cfg.K : c0_rescale_factor(state, cfg.eps0);
    RescaleCheck chk;
    FlowState scaled = rescale(state, K, &chk);
    const RegionFlag after = c0_criterion(scaled, cfg.eps0);
    info["K"] = K;
    info["c0_before"] = {{"holds", before.holds}, {"value", before.value}};
    info["c0_after"] = {{"holds", after.holds}, {"value", after.value}};
    info["rescale_q_change"] = chk.q_change;
    info["rescale_dq2_change"] = chk.dq2_change;
    state = std::move(scaled);
  }
  const RegionFlag mp = max_principle_region(state);
  info["max_principle_region"] = mp.holds;
  info["initial_margin"] = state.margin();
  ordered_json pairings = ordered_json::array();
  for (int i = 0; i < 3; ++i) pairings.push_back(cohomology_pairings(state.omega(), i));
  info["initial_pairings"] = pairings;
  return {std::move(state), std::move(info)};
}

ordered_json to_json(const TorsionFreeReport& r) {
  ordered_json j;
  j["tau"] = r.tau;
  j["laplacian"] = r.laplacian;
  j["ricci"] = r.ricci;
  j["scalar"] = r.scalar;
  j["max_scalar"] = r.max_scalar;
  j["sup_dQ2"] = r.sup_dQ2;
  j["closedness"] = r.closedness;
  j["chart_closedness"] = r.chart_closedness;
  j["q_minus_u"] = r.q_minus_u;
  j["det_hess_drift"] = r.det_hess_drift;
  j["min_margin"] = r.min_margin;
  j["zone_points"] = r.zone_points;
  return j;
}

ordered_json to_json(const DonaldsonStudy& s) {
  ordered_json j;
  j["w0"] = s.w0;
  j["delta"] = s.delta;
  j["ode_residual"] = s.ode_residual;
  j["keep"] = s.keep;
  j["quadratic"] = to_json(s.quadratic);
  ordered_json rows = ordered_json::array();
  for (const auto& r : s.rows) {
    ordered_json row = to_json(r.report);
    row["cells"] = r.cells;
    row["h"] = r.h;
    rows.push_back(row);
  }
  j["rows"] = rows;
  j["orders"] = {{"tau", s.order_tau},
                 {"laplacian", s.order_laplacian},
                 {"ricci", s.order_ricci},
                 {"scalar", s.order_scalar}};
  return j;
}

namespace {

struct Suite {
  std::string name;
  double worst = 0.0;  // largest excess over the tolerance seen (<= 0 passes)
  bool pass = true;
  bool checked = false;
};

class Suites {
 public:
  Suites() {
    for (const char* n : {"pairings", "det_q", "self_duality", "t2_bound", "heat_tr", "bochner", "volume_monotone",
                          "max_principle", "c0_monotone"})
      list_.push_back({n, -std::numeric_limits<double>::infinity(), true, false});
  }
  // excess > 0 is a violation.
  bool check(const std::string& name, double excess) {
    for (auto& s : list_)
      if (s.name == name) {
        if (std::isnan(excess)) return true;
        s.checked = true;
        s.worst = std::max(s.worst, excess);
        if (excess > 0.0) s.pass = false;
        return excess <= 0.0;
      }
    return true;
  }
  void fail(const std::string& name) {
    for (auto& s : list_)
      if (s.name == name) s.pass = false, s.checked = true;
  }
  ordered_json to_json() const {
    ordered_json j = ordered_json::object();
    for (const auto& s : list_) {
      if (!s.checked) {
        j[s.name] = {{"checked", false}};
        continue;
      }
      j[s.name] = {{"checked", true}, {"pass", s.pass}, {"worst_excess", s.worst}};
    }
    return j;
  }
  static Suites from_json(const ordered_json& j) {
    Suites s;
    for (auto& x : s.list_) {
      const auto& e = j.at(x.name);
      x.checked = e.at("checked").get<bool>();
      if (x.checked) {
        x.pass = e.at("pass").get<bool>();
        x.worst = e.at("worst_excess").get<double>();
      }
    }
    return s;
  }

 private:
  std::vector<Suite> list_;
};

struct Writers {
  std::ofstream ndjson, csv;

  void open(const fs::path& dir) {
    ndjson.open(dir / "records.ndjson", std::ios::binary | std::ios::trunc);
    csv.open(dir / "records.csv", std::ios::binary | std::ios::trunc);
    if (!ndjson || !csv) throw ConfigError("cannot write into output directory " + dir.string());
    csv << record_csv_header() << '\n';
    write_csv_schema(dir / "records_schema.csv");
  }
  void write(const DiagnosticsRecord& r) {
    ndjson << record_to_json(r).dump() << '\n';
    csv << record_csv_row(r) << '\n';
    ndjson.flush();
    csv.flush();
  }
};

void write_json(const fs::path& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << j.dump(2) << '\n';
}

std::string checkpoint_name(long step) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "checkpoint_%08ld.ckpt", step);
  return buf;
}

RunReport run_chart(const RunConfig& cfg, const fs::path& dir) {
  RunReport rep;
  rep.output_dir = dir;
  const WProfile w = solve_w_ode(cfg.w0, 0.0);
  const ChartBox box = default_ansatz_box(w.delta());
  const Lattice lat = chart_lattice(box, cfg.chart_cells);
  const PotentialData pd = ansatz_potential(w, lat);
  const ChartTriple ct = build_chart_triple(pd);
  const TorsionFreeReport tf = verify_torsion_free(pd, ct, shrink(box, cfg.chart_keep));

  Checkpoint ck;
  ck.t = 0.0;
  ck.backend = Backend::FD4;
  ck.lattice = lat;
  ck.chart = true;
  ck.arrays = {{"omega", ct.omega}, {"u_inv", ct.u_inv}, {"hess_u", pd.hess}};
  ck.extras["w0"] = cfg.w0;
  ck.extras["delta"] = w.delta();
  ck.extras["box_lo"] = box.lo;
  ck.extras["box_hi"] = box.hi;
  const ChartBox zone = shrink(box, cfg.chart_keep);
  ck.extras["zone_lo"] = zone.lo;
  ck.extras["zone_hi"] = zone.hi;
  write_checkpoint(dir / "chart.ckpt", ck);

  std::vector<std::string> bad;
  if (tf.q_minus_u > 1e-10) bad.push_back("Q differs from U beyond 1e-10");
  if (w.max_residual() > w.tol()) bad.push_back("ODE residual above tolerance");
  if (!(tf.max_scalar > 0.0)) bad.push_back("scalar curvature not positive anywhere in the zone");
  rep.violations = bad;
  rep.exit_code = bad.empty() ? kExitOk : kExitViolation;
  rep.status = bad.empty() ? "completed" : "violation";
  rep.summary["status"] = rep.status;
  rep.summary["exit_code"] = rep.exit_code;
  rep.summary["scenario"] = cfg.scenario;
  rep.summary["w0"] = cfg.w0;
  rep.summary["delta"] = w.delta();
  rep.summary["ode_residual"] = w.max_residual();
  rep.summary["chart_cells"] = cfg.chart_cells;
  rep.summary["report"] = to_json(tf);
  rep.summary["violations"] = bad;
  write_json(dir / "summary.json", rep.summary);
  return rep;
}

}  // namespace

RunReport run(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  RunReport rep;
  const auto config_failure = [&](const std::string& msg) {
    rep.exit_code = kExitConfig;
    rep.status = "config-error";
    rep.message = msg;
    rep.summary = {{"status", rep.status}, {"exit_code", rep.exit_code}, {"message", msg}};
    return rep;
  };
  fs::path dir;
  try {
    validate(cfg);
    set_workers(cfg.workers);
    dir = cfg.output_dir;
    fs::create_directories(dir);
  } catch (const ConfigError& e) {
    return config_failure(e.what());
  } catch (const fs::filesystem_error& e) {
    return config_failure(e.what());
  }
  rep.output_dir = dir;
  {
    std::ofstream c(dir / "config.txt", std::ios::binary | std::ios::trunc);
    RunConfig echo = cfg;
    echo.workers = 1;
    echo.output_dir = ".";
    c << config_text(echo);
  }
  if (cfg.scenario == "donaldson-chart") return run_chart(cfg, dir);

  // Initial or resumed state.
  std::optional<FlowState> state, prev;
  RunMonitor monitor(MonitorSettings{cfg.eps0, 1e-10, cfg.pairing_tol});
  Suites suites;
  ordered_json info;
  long step = 0;
  bool resumed = false;
  try {
    if (!cfg.resume.empty()) {
      const Checkpoint ck = read_checkpoint(cfg.resume);
      if (ck.chart) throw ConfigError("cannot resume a flow from a chart checkpoint");
      const Lattice lat = Grid4{cfg.N, cfg.L}.lattice();
      if (!(ck.lattice == lat) || ck.backend != cfg.backend)
        throw ConfigError("checkpoint grid or backend does not match the config");
      state.emplace(lat, ck.backend, ck.array("omega"), ck.t);
      if (ck.extras.contains("t_prev")) prev.emplace(*state, ck.array("omega_prev"), ck.extras.at("t_prev").get<double>());
      monitor = RunMonitor::from_json(ck.extras.at("monitor"));
      suites = Suites::from_json(ck.extras.at("suites"));
      info = ck.extras.at("scenario");
      step = ck.extras.at("step").get<long>();
      resumed = true;
    } else {
      Scenario sc = scenario_build(cfg);
      state.emplace(std::move(sc.state));
      info = std::move(sc.info);
    }
  } catch (const ConfigError& e) {
    return config_failure(e.what());
  } catch (const FormatError& e) {
    return config_failure(std::string("unreadable checkpoint: ") + e.what());
  } catch (const NotHypersymplectic& e) {
    return config_failure(e.what());
  } catch (const DomainError& e) {
    return config_failure(e.what());
  }

  std::array<std::array<double, 6>, 3> initial_pairings;
  for (int i = 0; i < 3; ++i)
    for (int s = 0; s < 6; ++s) initial_pairings[i][s] = info.at("initial_pairings")[i][s].get<double>();
  const double initial_margin = info.at("initial_margin").get<double>();
  const double h = state->lattice().min_spacing();
  const double h4 = h * h * h * h;

  Writers out;
  out.open(dir);
  for (const auto& r : monitor.records()) out.write(r);

  StepControl ctl;
  ctl.dt = cfg.dt;
  ctl.safety = cfg.safety;
  ctl.margin_floor = 1e-6 * initial_margin;

  const auto save = [&](const fs::path& path) {
    Checkpoint ck;
    ck.t = state->t();
    ck.backend = state->backend();
    ck.lattice = state->lattice();
    ck.arrays.push_back({"omega", state->omega()});
    if (prev) {
      ck.arrays.push_back({"omega_prev", prev->omega()});
      ck.extras["t_prev"] = prev->t();
    }
    ck.extras["step"] = step;
    ck.extras["scenario"] = info;
    ck.extras["monitor"] = monitor.to_json();
    ck.extras["suites"] = suites.to_json();
    write_checkpoint(path, ck);
  };

  std::vector<std::string> violations;
  double last_dt = 0.0;
  const auto take_record = [&] {
    RecordOptions opt;
    opt.bochner = cfg.bochner;
    opt.previous = prev ? &*prev : nullptr;
    const CurvatureBundle bundle = curvature_of(state->metric());
    const DiagnosticsRecord r = record(*state, bundle, opt);
    const std::size_t before = monitor.violations().size();
    monitor.append(r, max_principle_region(*state).holds, c0_criterion(*state, cfg.eps0).holds);
    out.write(r);

    std::vector<std::string> now;
    const auto flag = [&](const std::string& suite, double excess, const std::string& what) {
      if (!suites.check(suite, excess)) {
        std::ostringstream os;
        os.precision(17);
        os << what << " at t = " << r.t << " (excess " << excess << ")";
        now.push_back(os.str());
      }
    };
    double pd = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int s = 0; s < 6; ++s) pd = std::max(pd, std::abs(r.pairings[i][s] - initial_pairings[i][s]));
    flag("pairings", pd - cfg.pairing_tol, "cohomology pairing drift");
    flag("det_q", r.detQ_drift - cfg.det_tol, "det Q drift");
    flag("self_duality", r.self_duality_residual - cfg.self_duality_c * h4, "self-duality residual");
    flag("t2_bound", r.T2_bound_excess - cfg.t2_allowance, "|T|^2 > 3/2 |dQ|^2");
    flag("heat_tr", -r.heat_tr_residual_min - (cfg.heat_c1 * last_dt * last_dt + cfg.heat_c2 * h4),
         "heat inequality for tr Q");
    flag("bochner", -r.bochner_residual_min - cfg.bochner_c2 * h4, "Bochner residual negative");
    for (std::size_t k = before; k < monitor.violations().size(); ++k) {
      const std::string& v = monitor.violations()[k];
      if (v.rfind("volume", 0) == 0)
        suites.fail("volume_monotone");
      else if (v.rfind("sup tr Q", 0) == 0)
        suites.fail("max_principle");
      else
        suites.fail("c0_monotone");
      now.push_back(v);
    }
    if (monitor.records().size() > 1) {
      const auto& a = monitor.records()[monitor.records().size() - 2];
      suites.check("volume_monotone", (a.vol - r.vol) - 1e-10 * a.vol);
    }
    violations.insert(violations.end(), now.begin(), now.end());
    return now.empty();
  };

  bool ok = true;
  std::string status = "completed";
  std::string message;
  try {
    if (!resumed) ok = take_record();
    const double T = cfg.end_time;
    while (ok && state->t() < T * (1.0 - 1e-14)) {
      if (step >= cfg.max_steps) {
        status = "max-steps";
        message = "stopped after max_steps";
        break;
      }
      double dt = select_dt(*state, ctl);
      bool last = false;
      if (state->t() + dt >= T * (1.0 - 1e-14)) {
        dt = T - state->t();
        last = true;
      }
      FlowState next = rk4_step(*state, dt, ctl);
      if (last) next.set_t(T);
      prev = std::move(*state);
      state.emplace(std::move(next));
      last_dt = dt;
      ++step;
      if (step % cfg.record_stride == 0 || last) ok = take_record();
      if (ok && cfg.checkpoint_stride > 0 && step % cfg.checkpoint_stride == 0) save(dir / checkpoint_name(step));
    }
    if (!ok) {
      status = "violation";
      message = violations.empty() ? "invariant violation" : violations.front();
    }
  } catch (const StabilityLoss& e) {
    status = "stability-loss";
    message = e.what();
  }
  save(dir / "final.ckpt");

  rep.steps = step;
  rep.t_end = state->t();
  rep.status = status;
  rep.message = message;
  rep.exit_code = status == "violation" ? kExitViolation : status == "stability-loss" ? kExitStability : kExitOk;
  rep.violations = violations;
  rep.monitor = monitor;

  ordered_json& s = rep.summary;
  s["status"] = status;
  s["exit_code"] = rep.exit_code;
  s["message"] = message;
  s["steps"] = step;
  s["t_end"] = rep.t_end;
  s["records"] = monitor.records().size();
  s["scenario"] = info;
  s["suites"] = suites.to_json();
  s["violations"] = violations;
  s["extension_integral"] = monitor.accumulated();
  s["extension_tail_fraction"] =
      monitor.records().size() >= 2 ? ordered_json(extension_tail_fraction(monitor, 0.1)) : ordered_json(nullptr);
  try {
    const TrendReport tr = t_to_zero_trend(monitor);
    s["trend"] = {{"samples", tr.samples},
                  {"slope", tr.slope},
                  {"decreasing", tr.decreasing},
                  {"initial", tr.initial_value},
                  {"max", tr.max_value},
                  {"final", tr.final_value},
                  {"final_over_max", tr.final_over_max},
                  {"volume_rate_error", tr.volume_rate_error}};
  } catch (const InsufficientData&) {
    s["trend"] = nullptr;
  }
  write_json(dir / "summary.json", s);
  return rep;
}

}  // namespace hsflow
