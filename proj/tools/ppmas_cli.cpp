#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

#include "ppmas/plot.hpp"
#include "ppmas/scenario.hpp"

namespace {

// Exit contract: 0 pass, 1 task or assumption failure, 2 usage/I-O error.
constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

bool is_usage_code(const std::string& code) {
  return code == "io" || code == "syntax" || code == "schema" ||
         code == "csv" || code == "column_mismatch";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ppmas::Error("io", "cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ppmas::Error("io", "cannot write '" + path + "'");
  out << content;
}

struct CommonFlags {
  std::string scenario_path;
  std::string out_dir = "out";
  ppmas::scenario::Overrides overrides;
};

void add_override_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--seed", [&flags](const std::vector<std::string>& v) {
        flags.overrides.seed = std::stoull(v[0]);
        return true;
      },
      "Disturbance/observer seed override");
  cmd->add_option("--dt", [&flags](const std::vector<std::string>& v) {
        flags.overrides.dt = std::stod(v[0]);
        return true;
      },
      "Integration step override");
  cmd->add_option("--eta", [&flags](const std::vector<std::string>& v) {
        flags.overrides.eta = std::stod(v[0]);
        return true;
      },
      "Smooth-min sharpness override");
}

int do_run(const CommonFlags& flags, bool quiet) {
  const auto sc = ppmas::scenario::load_scenario(flags.scenario_path,
                                                 flags.overrides);
  const auto result = ppmas::sim::run(sc.model);
  std::filesystem::create_directories(flags.out_dir);
  write_file(flags.out_dir + "/trace.csv", result.trace.emit_csv());
  write_file(flags.out_dir + "/faults.txt",
             ppmas::sim::format_faults(result.faults));
  std::string report_text;
  bool pass = false;
  try {
    const auto report =
        ppmas::scenario::verify_trace(sc, result.trace, &result.faults);
    report_text = report.text();
    pass = report.pass;
  } catch (const ppmas::Error& err) {
    // A faulted run can stop before the monitor window; still report it.
    if (result.faults.events.empty()) throw;
    const auto& first = result.faults.events.front();
    report_text = "verdict: fail\nfirst fault: t=" + std::to_string(first.t) +
                  " kind=" + first.kind + " detail=" + first.detail +
                  "\nverify error [" + err.code() + "]: " + err.what() + "\n";
  }
  write_file(flags.out_dir + "/report.txt", report_text);
  if (!quiet) std::cout << report_text;
  return pass ? kPass : kFail;
}

int do_verify(const std::string& scenario_path, const std::string& trace_path,
              const ppmas::scenario::Overrides& overrides) {
  const auto sc = ppmas::scenario::load_scenario(scenario_path, overrides);
  const auto trace = ppmas::sim::Trace::parse_csv(read_file(trace_path));
  const auto report = ppmas::scenario::verify_trace(sc, trace);
  std::cout << report.text();
  return report.pass ? kPass : kFail;
}

int do_topology(const std::string& scenario_path) {
  const auto sc = ppmas::scenario::load_scenario(scenario_path, {});
  std::cout << ppmas::scenario::topology_text(sc);
  std::cout << ppmas::scenario::topology_json(sc).dump(2) << '\n';
  return kPass;
}

int do_plot(const std::string& trace_path, const std::string& out_dir) {
  const auto trace = ppmas::sim::Trace::parse_csv(read_file(trace_path));
  const auto output = ppmas::plot::emit_plots(trace, out_dir);
  for (const auto& f : output.files) std::cout << f << '\n';
  if (!output.note.empty()) std::cout << "note: " << output.note << '\n';
  return kPass;
}

int do_sweep(const CommonFlags& flags, int seeds) {
  const std::uint64_t base = flags.overrides.seed.value_or(1);
  std::vector<std::future<bool>> futures;
  for (int s = 0; s < seeds; ++s) {
    futures.push_back(std::async(std::launch::async, [&flags, base, s]() {
      ppmas::scenario::Overrides ov = flags.overrides;
      ov.seed = base + static_cast<std::uint64_t>(s);
      const auto sc = ppmas::scenario::load_scenario(flags.scenario_path, ov);
      const auto result = ppmas::sim::run(sc.model);
      const auto report =
          ppmas::scenario::verify_trace(sc, result.trace, &result.faults);
      return report.pass;
    }));
  }
  bool all_pass = true;
  for (int s = 0; s < seeds; ++s) {
    const bool pass = futures[static_cast<std::size_t>(s)].get();
    std::cout << "seed " << base + static_cast<std::uint64_t>(s) << ": "
              << (pass ? "pass" : "FAIL") << '\n';
    all_pass = all_pass && pass;
  }
  return all_pass ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prescribed-performance multi-agent STL simulation"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string trace_path;
  int seeds = 10;
  bool quiet = false;

  auto* run_cmd = app.add_subcommand("run", "Simulate a scenario");
  run_cmd->add_option("--scenario", flags.scenario_path, "Scenario file")
      ->required();
  run_cmd->add_option("--out", flags.out_dir, "Output directory");
  run_cmd->add_flag("--quiet", quiet, "Suppress the report on stdout");
  add_override_flags(run_cmd, flags);

  auto* verify_cmd =
      app.add_subcommand("verify", "Re-derive guarantees from a trace");
  verify_cmd->add_option("--scenario", flags.scenario_path, "Scenario file")
      ->required();
  verify_cmd->add_option("--trace", trace_path, "Trace CSV")->required();
  add_override_flags(verify_cmd, flags);

  auto* topo_cmd =
      app.add_subcommand("topology", "Print clusters, DAG, and required k");
  topo_cmd->add_option("--scenario", flags.scenario_path, "Scenario file")
      ->required();

  auto* plot_cmd = app.add_subcommand("plot", "Emit SVG panels from a trace");
  plot_cmd->add_option("--trace", trace_path, "Trace CSV")->required();
  plot_cmd->add_option("--out", flags.out_dir, "Output directory");

  auto* sweep_cmd =
      app.add_subcommand("sweep", "Run several seeds concurrently");
  sweep_cmd->add_option("--scenario", flags.scenario_path, "Scenario file")
      ->required();
  sweep_cmd->add_option("--seeds", seeds, "Number of consecutive seeds");
  add_override_flags(sweep_cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kPass : kUsage;
  }

  try {
    if (run_cmd->parsed()) return do_run(flags, quiet);
    if (verify_cmd->parsed()) {
      return do_verify(flags.scenario_path, trace_path, flags.overrides);
    }
    if (topo_cmd->parsed()) return do_topology(flags.scenario_path);
    if (plot_cmd->parsed()) return do_plot(trace_path, flags.out_dir);
    if (sweep_cmd->parsed()) return do_sweep(flags, seeds);
  } catch (const ppmas::Error& err) {
    std::cerr << "error [" << err.code() << "]: " << err.what() << '\n';
    return is_usage_code(err.code()) ? kUsage : kFail;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
