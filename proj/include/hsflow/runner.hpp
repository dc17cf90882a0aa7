#pragma once

// Run orchestration: key=value configs, scenario presets, the stepping loop
// with records and checkpoints, and the exit-code contract
// (0 ok, 1 invariant violation, 2 stability loss, 3 config error).

#include "hsflow/diagnostics.hpp"
#include "hsflow/donaldson.hpp"
#include "hsflow/flow.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <numbers>
#include <string>
#include <vector>

namespace hsflow {

inline constexpr const char* kOutputDirEnv = "HSFLOW_OUTPUT_DIR";

enum ExitCode : int { kExitOk = 0, kExitViolation = 1, kExitStability = 2, kExitConfig = 3 };

struct RunConfig {
  int N = 16;
  double L = 2.0 * std::numbers::pi;
  Backend backend = Backend::Spectral;
  std::string scenario = "flat";  // flat | perturbed | anisotropic | c0 | donaldson-chart

  double epsilon = 0.05;  // amplitude of the exact perturbation
  int modes = 2;          // largest integer wavenumber in the perturbation
  int terms = 3;          // random Fourier terms per 1-form component
  double lambda = 0.85;   // anisotropic: Q = diag(lambda, lambda, lambda^-2)
  double K = 0.0;         // c0: omega -> K^2 omega; 0 picks the smallest K meeting eps0
  double eps0 = 0.05;

  double safety = 0.2;
  double dt = 0.0;  // fixed step when > 0
  double end_time = 1.0;
  long max_steps = 1000000;
  int record_stride = 10;
  int checkpoint_stride = 0;  // 0: final checkpoint only
  std::string output_dir = "hsflow-out";
  int workers = 1;
  std::uint64_t seed = 1;
  std::string resume;  // checkpoint path

  bool bochner = true;
  // Inequality tolerances c1 dt^2 + c2 h^4.
  double heat_c1 = 1.0;
  double heat_c2 = 1.0;
  double bochner_c2 = 4.0;
  double t2_allowance = 1e-12;
  double pairing_tol = 1e-8;
  double det_tol = 1e-12;
  double self_duality_c = 10.0;  // self-duality residual <= c h^4

  // donaldson-chart
  double w0 = 1.0;
  int chart_cells = 16;
  double chart_keep = 0.5;
};

/// Parses key=value lines; '#' starts a comment. Throws ConfigError on unknown
/// keys, malformed values or out-of-range settings.
RunConfig parse_config(std::istream& in);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Throws ConfigError on out-of-range values.
void validate(const RunConfig& cfg);
/// Canonical key=value text, keys sorted, doubles with 17 significant digits.
std::string config_text(const RunConfig& cfg);
/// Applies HSFLOW_OUTPUT_DIR when set.
void apply_environment(RunConfig& cfg);

/// Exact perturbation d alpha (18 components) with sup |d alpha| = 1, alpha a
/// sum of random Fourier modes drawn from seed.
Field perturbation(const Lattice& lattice, int modes, int terms, std::uint64_t seed);

/// The constant triple with Q = diag(lambda, lambda, lambda^-2).
Field anisotropic_triple(const Lattice& lattice, double lambda);

struct RescaleCheck {
  double K = 1.0;
  double q_change = 0.0;    // max |Q(K^2 omega) - Q(omega)|
  double dq2_change = 0.0;  // max |K^2 |dQ|^2(K^2 omega) - |dQ|^2(omega)| / (1 + |dQ|^2)
};

/// State with omega replaced by K^2 omega, plus the scaling-law discrepancies.
FlowState rescale(const FlowState& state, double K, RescaleCheck* check = nullptr);
/// Smallest K with sup(tr Q + K^-2 |dQ|^2) <= 3 + eps0 (times a 1% margin);
/// throws DomainError when sup tr Q itself exceeds 3 + eps0.
double c0_rescale_factor(const FlowState& state, double eps0);

struct Scenario {
  FlowState state;
  nlohmann::ordered_json info = nlohmann::ordered_json::object();
};

/// Initial state of a torus scenario (not donaldson-chart).
Scenario scenario_build(const RunConfig& cfg);

struct RunReport {
  int exit_code = kExitOk;
  std::string status;  // completed | violation | stability-loss | config-error
  std::string message;
  long steps = 0;
  double t_end = 0.0;
  std::filesystem::path output_dir;
  RunMonitor monitor;
  std::vector<std::string> violations;
  nlohmann::ordered_json summary;
};

/// Runs the configured scenario, writing records.ndjson, records.csv,
/// records_schema.csv, checkpoints and summary.json into the output directory.
/// Config errors are reported through the exit code, not thrown.
RunReport run(const RunConfig& cfg);

nlohmann::ordered_json to_json(const TorsionFreeReport& r);
nlohmann::ordered_json to_json(const DonaldsonStudy& s);

}  // namespace hsflow
