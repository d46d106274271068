#pragma once

// Command-line front end.
//
//   degenloop run    --config <path> --out <dir>
//   degenloop sweep  --config <path> --alphas 0.5,1,2 --out <dir>
//   degenloop metrics --a <samples.csv> --b <samples.csv>
//   degenloop demo   [--out <dir>] [--seed <n>]
//
// Exit codes: 0 success, 1 run failure, 2 usage or configuration error.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "degenloop/config.hpp"
#include "degenloop/datasets.hpp"
#include "degenloop/emit.hpp"
#include "degenloop/harness.hpp"
#include "degenloop/io.hpp"
#include "degenloop/metrics.hpp"

namespace degenloop {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

inline void print_metric_report(std::ostream& out, const MetricReport& m) {
  out << "mmd_rbf: " << format_double(m.mmd_rbf) << '\n'
      << "sliced_wasserstein: " << format_double(m.sliced_wasserstein) << '\n'
      << "mean_pairwise_distance: " << format_double(m.mean_pairwise_distance) << '\n'
      << "mode_coverage: " << (m.mode_coverage ? format_double(*m.mode_coverage) : std::string("n/a")) << '\n'
      << "nn_distance_to_real: " << format_double(m.nn_distance_to_real) << '\n';
}

inline void print_run_summary(std::ostream& out, const EvolutionReport& r, const std::filesystem::path& dir) {
  out << "alpha " << format_double(r.config.alpha) << ": " << r.generations.size() << " generation(s) -> "
      << dir.string() << '\n';
  for (const auto& g : r.generations) {
    out << "  gen " << g.generation << " pool " << g.pool_size;
    if (g.diverged) {
      out << " DIVERGED: " << g.divergence_message << '\n';
      continue;
    }
    out << " real " << format_double(g.real_fraction) << " mmd " << format_double(g.metrics.mmd_rbf) << '\n';
    if (g.injection_warning) out << "  warning: " << *g.injection_warning << '\n';
  }
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Self-consuming diffusion training loop simulator", "degenloop"};
  app.require_subcommand(1);

  std::string run_config, run_out;
  auto* run = app.add_subcommand("run", "Run one evolution experiment from a JSON config");
  run->add_option("--config", run_config, "Experiment config (JSON)")->required();
  run->add_option("--out", run_out, "Output run directory")->required();

  std::string sweep_config, sweep_out;
  std::vector<double> alphas;
  auto* sweep = app.add_subcommand("sweep", "Run the experiment once per alpha value");
  sweep->add_option("--config", sweep_config, "Base experiment config (JSON)")->required();
  sweep->add_option("--alphas", alphas, "Comma-separated alpha values")->required()->delimiter(',');
  sweep->add_option("--out", sweep_out, "Output directory")->required();

  std::string file_a, file_b;
  std::optional<double> bandwidth;
  std::size_t projections = 128;
  std::uint64_t projection_seed = 0;
  std::size_t ring_modes = 0;
  double ring_radius = 5.0, ring_sigma = 0.3;
  auto* metrics = app.add_subcommand("metrics", "Compare two sample CSV files");
  metrics->add_option("--a", file_a, "Generated samples (CSV)")->required();
  metrics->add_option("--b", file_b, "Reference samples (CSV)")->required();
  metrics->add_option("--bandwidth", bandwidth, "RBF bandwidth (default: median heuristic)");
  metrics->add_option("--projections", projections, "Sliced Wasserstein projection count")->check(CLI::PositiveNumber);
  metrics->add_option("--seed", projection_seed, "Projection seed");
  metrics->add_option("--ring-modes", ring_modes, "Score mode coverage against a Gaussian ring with this many modes");
  metrics->add_option("--ring-radius", ring_radius, "Ring radius for mode coverage");
  metrics->add_option("--ring-sigma", ring_sigma, "Ring sigma for mode coverage");

  std::string demo_out = "degenloop_demo";
  std::uint64_t demo_seed = 0;
  auto* demo = app.add_subcommand("demo", "alpha=1 Gaussian-ring experiment with default settings");
  demo->add_option("--out", demo_out, "Output run directory");
  demo->add_option("--seed", demo_seed, "Master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "degenloop: " << e.what() << "\n" << "run 'degenloop --help' for usage\n";
    return kExitUsage;
  }

  try {
    if (*run) {
      const EvolutionConfig cfg = load_config(run_config);
      const EvolutionReport r = run_evolution(cfg);
      emit_outputs(r, run_out);
      detail::print_run_summary(out, r, run_out);
      return r.diverged() ? kExitFailure : kExitOk;
    }
    if (*sweep) {
      const EvolutionConfig cfg = load_config(sweep_config);
      const auto reports = run_alpha_sweep(cfg, alphas);
      emit_sweep_outputs(reports, sweep_out);
      bool any_diverged = false;
      for (const auto& r : reports) {
        detail::print_run_summary(out, r, std::filesystem::path(sweep_out) / ("alpha_" + format_double(r.config.alpha)));
        any_diverged = any_diverged || r.diverged();
      }
      return any_diverged ? kExitFailure : kExitOk;
    }
    if (*metrics) {
      const Matrix a = read_samples_csv(file_a);
      const Matrix b = read_samples_csv(file_b);
      std::optional<ModeSet> modes;
      if (ring_modes > 0) {
        RingParams rp{ring_modes, ring_radius, ring_sigma};
        modes = ModeSet{ring_centers(rp), ring_sigma};
      }
      detail::print_metric_report(out, evaluate_metrics(a, b, modes, MetricOptions{bandwidth, projections, projection_seed}));
      return kExitOk;
    }
    if (*demo) {
      EvolutionConfig cfg;
      cfg.master_seed = demo_seed;
      const EvolutionReport r = run_evolution(cfg);
      emit_outputs(r, demo_out);
      detail::print_run_summary(out, r, demo_out);
      return r.diverged() ? kExitFailure : kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "degenloop: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "degenloop: " << e.what() << '\n';
    return (*run || *sweep) && !std::filesystem::exists(*run ? run_config : sweep_config) ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "degenloop: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace degenloop
