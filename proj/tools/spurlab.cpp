#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "spur/errors.hpp"
#include "spur/harness.hpp"

namespace h = spur::harness;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAssertion = 3;

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON configuration file");
  cmd->add_option("--out", f.out, "output directory (overrides the config)");
  cmd->add_option("--seed", f.seed, "master seed (overrides the config)");
  cmd->add_option("--workers", f.workers, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
}

int run(h::ExperimentKind kind, const CommonFlags& f) {
  h::ExperimentConfig config = f.config.empty() ? h::default_config(kind) : h::load_config_file(kind, f.config);
  if (f.seed) config.seed = *f.seed;
  if (f.workers) config.workers = *f.workers;
  if (!f.out.empty()) config.out = f.out;
  config.validate();

  h::OutputDir out(config.out, config.hash());
  const h::RunResult result = h::run_experiment(config, out);
  for (const auto& a : result.assertions)
    std::printf("[%s] %s: %s\n", a.pass ? "pass" : "FAIL", a.name.c_str(), a.detail.c_str());
  std::printf("wrote %zu file(s) to %s\n", out.written().size(), out.root().string().c_str());
  return result.all_passed() ? kExitOk : kExitAssertion;
}

int plot(const std::string& csv, const std::string& svg, const std::string& title) {
  std::ifstream in(csv);
  if (!in) throw spur::ConfigError("cannot read " + csv);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto rows = h::parse_trajectory_csv(buf.str());
  std::ofstream o(svg, std::ios::binary);
  o << h::trajectory_svg(rows, title.empty() ? csv : title);
  if (!o) throw std::runtime_error("failed writing " + svg);
  std::printf("wrote %s (%zu points)\n", svg.c_str(), rows.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spurious-feature and masked-pretraining experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", h::kToolVersion);

  struct Sub {
    const char* name;
    h::ExperimentKind kind;
    const char* help;
  };
  const Sub subs[] = {
      {"table1", h::ExperimentKind::kTable1, "iterations-to-converge grid with trend assertions"},
      {"trajectories", h::ExperimentKind::kTrajectories, "weight trajectories (CSV + SVG) for depth-2 runs"},
      {"theory-check", h::ExperimentKind::kTheoryCheck, "randomized information-theory property sweeps"},
      {"rates", h::ExperimentKind::kRates, "estimator convergence-rate study"},
      {"masksim", h::ExperimentKind::kMasksim, "masking-policy robustness suite"},
  };
  CommonFlags flags;
  std::optional<h::ExperimentKind> chosen;
  for (const auto& s : subs) {
    CLI::App* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, flags);
    cmd->callback([&chosen, kind = s.kind] { chosen = kind; });
  }

  std::string csv, svg, title;
  CLI::App* plot_cmd = app.add_subcommand("plot", "re-render an SVG from a trajectory CSV");
  plot_cmd->add_option("csv", csv, "trajectory CSV")->required();
  plot_cmd->add_option("--svg", svg, "output SVG path (default: CSV path with .svg)");
  plot_cmd->add_option("--title", title, "chart title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (plot_cmd->parsed()) {
      if (svg.empty()) svg = std::filesystem::path(csv).replace_extension(".svg").string();
      return plot(csv, svg, title);
    }
    return run(*chosen, flags);
  } catch (const spur::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const spur::InvalidArgument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
