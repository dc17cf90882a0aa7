#include "hsflow/checkpoint.hpp"
#include "hsflow/donaldson.hpp"
#include "hsflow/errors.hpp"
#include "hsflow/runner.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace hsflow;

namespace {

struct DonaldsonParams {
  double w0 = 1.0;
  std::vector<int> cells{8, 16, 32};
  double keep = 0.5;
  int calabi_samples = 100;
  std::uint64_t seed = 7;
};

// key=value lines from a file, or "key=value;key=value" inline.
DonaldsonParams parse_donaldson_params(const std::string& arg) {
  std::string text;
  if (fs::exists(arg)) {
    std::ifstream in(arg);
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  } else if (arg.find('=') != std::string::npos) {
    text = arg;
    for (char& c : text)
      if (c == ';') c = '\n';
  } else {
    throw ConfigError("params file not found: " + arg);
  }
  DonaldsonParams p;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    const auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos) throw ConfigError("expected key=value: " + line);
    auto strip = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    const std::string k = strip(line.substr(0, eq)), v = strip(line.substr(eq + 1));
    try {
      if (k == "w0") {
        p.w0 = std::stod(v);
      } else if (k == "cells") {
        p.cells.clear();
        std::stringstream cs(v);
        for (std::string tok; std::getline(cs, tok, ',');) p.cells.push_back(std::stoi(tok));
      } else if (k == "keep") {
        p.keep = std::stod(v);
      } else if (k == "calabi_samples") {
        p.calabi_samples = std::stoi(v);
      } else if (k == "seed") {
        p.seed = std::stoull(v);
      } else {
        throw ConfigError("unknown key '" + k + "'");
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad value for '" + k + "': " + v);
    }
  }
  if (!(p.w0 > 0.0)) throw ConfigError("w0 must be positive");
  if (p.calabi_samples < 1) throw ConfigError("calabi_samples must be positive");
  return p;
}

int cmd_run(const std::string& path, int workers, const std::string& output) {
  RunConfig cfg;
  try {
    cfg = load_config(path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (workers > 0) cfg.workers = workers;
  if (!output.empty()) cfg.output_dir = output;
  apply_environment(cfg);
  const RunReport rep = run(cfg);
  std::cout << "status: " << rep.status << '\n';
  if (!rep.message.empty()) std::cout << "message: " << rep.message << '\n';
  if (rep.status != "config-error") {
    std::cout << "steps: " << rep.steps << "  t: " << rep.t_end << "  records: " << rep.monitor.records().size()
              << '\n';
    std::cout << "output: " << rep.output_dir.string() << '\n';
  } else {
    std::cerr << "config error: " << rep.message << '\n';
  }
  return rep.exit_code;
}

int cmd_verify_donaldson(const std::string& arg, const std::string& json_out) {
  const DonaldsonParams p = parse_donaldson_params(arg);
  const DonaldsonStudy st = donaldson_study(p.w0, p.cells, p.keep);
  ordered_json j = to_json(st);

  std::mt19937_64 gen(p.seed);
  auto uniform = [&] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
  double worst_res = 0.0, worst_pole = 0.0;
  for (int k = 0; k < p.calabi_samples; ++k) {
    const double a = 0.25 + 7.75 * uniform();
    const double x = 0.95 * uniform() * 4.0 * std::sqrt(2.0) / a;
    const auto d = calabi_derivatives(a, x);
    const double scale = std::abs(d[2]) + (x > 0 ? 3.0 * std::abs(d[1]) / x : 3.0 * std::abs(d[2])) + 0.25 * std::pow(d[0], 3);
    worst_res = std::max(worst_res, std::abs(calabi_ode_residual(a, x)) / scale);
    worst_pole = std::max(worst_pole, std::abs(calabi_pole_numeric(a) - 4.0 * std::sqrt(2.0) / a));
  }
  j["calabi"] = {{"samples", p.calabi_samples}, {"max_relative_residual", worst_res}, {"max_pole_error", worst_pole}};

  const auto& q = st.quadratic;
  const bool quad_ok = std::max({q.tau, q.laplacian, q.ricci, q.scalar, q.closedness, q.q_minus_u}) <= 1e-9;
  const bool orders_ok = std::min({st.order_tau, st.order_laplacian, st.order_ricci, st.order_scalar}) >= 2.8;
  const bool witness = st.rows.back().report.max_scalar > 0.0 && st.rows.back().report.sup_dQ2 > 0.0;
  const bool calabi_ok = worst_res <= 1e-12 && worst_pole <= 1e-10;
  j["pass"] = {{"quadratic", quad_ok}, {"orders", orders_ok}, {"non_hyperkahler", witness}, {"calabi", calabi_ok}};

  const std::string text = j.dump(2);
  std::cout << text << '\n';
  if (!json_out.empty()) std::ofstream(json_out) << text << '\n';
  return quad_ok && orders_ok && witness && calabi_ok ? kExitOk : kExitViolation;
}

int cmd_inspect(const std::string& path, bool header_only) {
  if (header_only) {
    std::cout << read_checkpoint_header(path).dump(2) << '\n';
    return kExitOk;
  }
  const Checkpoint ck = read_checkpoint(path);
  ordered_json j = read_checkpoint_header(path);
  j.erase("extras");
  ordered_json arrays = ordered_json::array();
  for (const auto& a : ck.arrays) {
    const auto d = a.field.data();
    double lo = d.empty() ? 0.0 : d[0], hi = lo, sum = 0.0;
    for (double v : d) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    arrays.push_back({{"name", a.name},
                      {"components", a.field.components()},
                      {"min", lo},
                      {"max", hi},
                      {"mean", d.empty() ? 0.0 : sum / static_cast<double>(d.size())}});
  }
  j["arrays"] = arrays;
  if (ck.extras.contains("step")) j["step"] = ck.extras["step"];
  if (ck.extras.contains("monitor")) j["records"] = ck.extras["monitor"]["records"].size();
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hypersymplectic flow laboratory on the flat 4-torus"};
  app.require_subcommand(1);

  std::string run_config, run_output;
  int run_workers = 0;
  auto* run_cmd = app.add_subcommand("run", "Run a flow scenario from a key=value config");
  run_cmd->add_option("config", run_config, "Config file")->required();
  run_cmd->add_option("--workers", run_workers, "Override the worker count");
  run_cmd->add_option("--output-dir", run_output, "Override output_dir (the environment variable wins)");

  std::string don_params, don_json;
  auto* don_cmd = app.add_subcommand("verify-donaldson", "Refinement study of the torsion-free charts");
  don_cmd->add_option("params", don_params, "Params file or inline 'w0=1;cells=8,16,32'")->required();
  don_cmd->add_option("--json", don_json, "Also write the report here");

  std::string ins_path;
  bool ins_header = false;
  auto* ins_cmd = app.add_subcommand("inspect", "Print a checkpoint header and array statistics");
  ins_cmd->add_option("checkpoint", ins_path, "Checkpoint file")->required();
  ins_cmd->add_flag("--header-only", ins_header, "Skip loading the payload");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(run_config, run_workers, run_output);
    if (*don_cmd) return cmd_verify_donaldson(don_params, don_json);
    if (*ins_cmd) return cmd_inspect(ins_path, ins_header);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const StabilityLoss& e) {
    std::cerr << "stability loss: " << e.what() << '\n';
    return kExitStability;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitViolation;
  }
  return kExitOk;
}
