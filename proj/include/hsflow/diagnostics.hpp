#pragma once

// Per-slice diagnostics of a flow state and run-level monitors.
//
// Unless stated otherwise |T|^2 below is the G2 torsion norm
// 1/2 tr(Q^-1 <tau, tau>) (see g2_torsion_norm_sq).

#include "hsflow/curvature.hpp"
#include "hsflow/flow.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hsflow {

inline constexpr double kMaxPrincipleBound = 3.1748021039363987;  // 2^(5/3)

struct DiagnosticsRecord {
  double t = 0.0;
  double sup_trQ = 0.0;
  double inf_trQ = 0.0;
  double sup_dQ2 = 0.0;
  double sup_T2 = 0.0;
  double int_T2 = 0.0;
  double int_T4 = 0.0;
  double vol = 0.0;
  double vol_bound_rhs = 0.0;
  std::array<std::array<double, 6>, 3> pairings{};
  double delta_lower = 0.0;  // sup (1 - lambda_min(Q))
  double delta_upper = 0.0;  // sup (lambda_max(Q) - 1)
  double heat_tr_residual_min = std::numeric_limits<double>::quiet_NaN();
  double heat_tr_residual_max = std::numeric_limits<double>::quiet_NaN();
  double bochner_residual_min = std::numeric_limits<double>::quiet_NaN();
  double sup_Rm = 0.0;
  double int_Rm2 = 0.0;
  double sup_Ric = 0.0;
  double int_Ric4 = 0.0;
  double detQ_drift = 0.0;
  double self_duality_residual = 0.0;
  double hs_margin = 0.0;
  double sup_trQ_plus_dQ2 = 0.0;
  double T2_bound_excess = 0.0;  // sup (|T|^2 - 3/2 |dQ|^2)
  double sup_hessQ2 = std::numeric_limits<double>::quiet_NaN();
  double sup_dQ4_16 = 0.0;
};

struct RecordOptions {
  bool bochner = true;
  /// Earlier state for the heat-tr residual, evaluated at the midpoint.
  const FlowState* previous = nullptr;
};

DiagnosticsRecord record(const FlowState& state, const CurvatureBundle& bundle, const RecordOptions& opt = {});

/// 5/3 |T|^2 tr Q - (d_t - Laplacian) tr Q at the midpoint of two states.
Field heat_tr_residual(const FlowState& before, const FlowState& after);

/// Error of the exact identity
/// (d_t - Laplacian) tr Q = -g^ab tr(d_a Q Q^-1 d_b Q) + sum |tau_i|^2 - 1/3 tr(Q^-1 <tau,tau>) tr Q
/// at the midpoint of two states; pure discretisation error.
Field heat_tr_identity_error(const FlowState& before, const FlowState& after);

/// -K_P from the Bochner formula: 1/2 Laplacian |dQ|^2 minus |Hess Q|^2,
/// g^ab <grad_a Laplacian Q, d_b Q> and Ric^ab <d_a Q, d_b Q>. Christoffels
/// and Ricci come from `bundle`; pass nullptr for a flat metric.
Field bochner_residual(const Derivatives& d, const Metric4Field& g, const Field& q, const CurvatureBundle* bundle);

struct RegionFlag {
  bool holds = false;
  double value = 0.0;   // the supremum tested
  double margin = 0.0;  // bound - value
};

/// sup tr Q < 2^(5/3).
RegionFlag max_principle_region(const FlowState& state);
/// sup (tr Q + |dQ|^2) <= 3 + eps0.
RegionFlag c0_criterion(const FlowState& state, double eps0);

struct MonitorSettings {
  double eps0 = 0.05;
  double monotone_tol = 1e-10;
  double invariant_tol = 1e-8;
};

class RunMonitor {
 public:
  RunMonitor() = default;
  explicit RunMonitor(MonitorSettings s) : settings_(s) {}

  const MonitorSettings& settings() const { return settings_; }
  const std::vector<DiagnosticsRecord>& records() const { return records_; }
  /// Trapezoid integral of sup |T|^2 over the recorded times.
  double accumulated() const { return accumulated_; }
  const std::vector<std::string>& violations() const { return violations_; }
  /// Running max-principle and c0 flags of the last record.
  bool max_principle_active() const { return mp_active_; }
  bool c0_active() const { return c0_active_; }

  void append(const DiagnosticsRecord& r, bool max_principle_holds, bool c0_holds);
  nlohmann::ordered_json to_json() const;
  static RunMonitor from_json(const nlohmann::ordered_json& j);

 private:
  MonitorSettings settings_;
  std::vector<DiagnosticsRecord> records_;
  double accumulated_ = 0.0;
  bool mp_active_ = false;
  bool c0_active_ = false;
  std::vector<std::string> violations_;
};

/// Adds a record in time order; throws OutOfOrder otherwise.
RunMonitor extension_monitor(RunMonitor run, const DiagnosticsRecord& rec, bool max_principle_holds = false,
                             bool c0_holds = false);

/// (t, (s - t) sup |T|^2) for every record before s.
std::vector<std::array<double, 2>> gap_curve(const RunMonitor& run, double s);

/// Increment of the extension integral over the trailing `fraction` of the
/// recorded time span, relative to the total.
double extension_tail_fraction(const RunMonitor& run, double fraction = 0.1);

struct TrendReport {
  std::size_t samples = 0;
  double slope = 0.0;  // d log int|T|^2 / dt over the trailing half
  bool decreasing = false;
  double final_value = 0.0;
  double max_value = 0.0;
  double initial_value = 0.0;
  double final_over_max = 0.0;
  double volume_rate_error = 0.0;  // max |dVol/dt - 2/3 int|T|^2| over interior records
};

/// Throws InsufficientData below 50 records.
TrendReport t_to_zero_trend(const RunMonitor& run);

// Serialisation. Field names and CSV column order come from one table.
std::vector<std::string> record_columns();
nlohmann::ordered_json record_to_json(const DiagnosticsRecord& r);
DiagnosticsRecord record_from_json(const nlohmann::ordered_json& j);
std::string record_csv_header();
std::string record_csv_row(const DiagnosticsRecord& r);
void write_csv_schema(const std::filesystem::path& path);

}  // namespace hsflow
