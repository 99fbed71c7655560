// reprdyn: experiment runner and small utilities around the core library.
//
// Exit status: 0 on success, 1 for configuration or usage errors, 2 when the
// experiment or utility fails at runtime.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "reprdyn/analysis.hpp"
#include "reprdyn/config.hpp"
#include "reprdyn/csv.hpp"
#include "reprdyn/datasets.hpp"
#include "reprdyn/experiments.hpp"
#include "reprdyn/fitter.hpp"
#include "reprdyn/theory.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

std::filesystem::path output_root(const std::string& flag, const std::string& from_config) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  if (const char* env = std::getenv("REPRDYN_OUTPUT_ROOT"); env != nullptr && *env != '\0') {
    return env;
  }
  return "runs";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw reprdyn::ConfigError("cannot read config file " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct RunArgs {
  std::string config;
  bool paper_scale = false;
  int workers = 0;
  std::string out;
};

int cmd_run(const RunArgs& a) {
  reprdyn::ExperimentConfig config;
  try {
    config = reprdyn::parse_config(read_file(a.config));
    if (a.paper_scale) config = reprdyn::with_paper_scale(config);
    if (a.workers > 0) config.workers = a.workers;
    config.validate();
  } catch (const reprdyn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  const auto summary = reprdyn::run(config, output_root(a.out, config.output_dir));
  std::cout << "run directory: " << summary.directory.string() << '\n'
            << "manifest: " << summary.manifest.string() << '\n'
            << "trials: " << summary.trials_total << " (" << summary.trials_discarded
            << " discarded)\n";
  return 0;
}

struct SimulateArgs {
  double dx2 = 0.25, dyT2 = 1.0, inv_tau_h = 1e-3, inv_tau_y = 1e-2;
  double dh2 = 1e-3, dy2 = 1e-6, w = 0.0;
  double t_end = 6000.0;
  int samples = 601;
  std::string variant = "True";
  double tol = 1e-8;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  reprdyn::EffectiveParams p;
  p.dx2 = a.dx2;
  p.dyT2 = a.dyT2;
  p.inv_tau_h = a.inv_tau_h;
  p.inv_tau_y = a.inv_tau_y;
  const auto variant = reprdyn::parse_variant(a.variant);
  if (!variant) {
    std::cerr << "unknown variant " << a.variant << '\n';
    return kConfigError;
  }
  try {
    p.validate();
  } catch (const reprdyn::TheoryError& e) {
    std::cerr << "invalid parameters: " << e.what() << '\n';
    return kConfigError;
  }
  std::vector<double> times(static_cast<std::size_t>(a.samples));
  for (std::size_t i = 0; i < times.size(); ++i) {
    times[i] = a.t_end * static_cast<double>(i) / static_cast<double>(times.size() - 1);
  }
  const auto r = reprdyn::integrate({a.dh2, a.dy2, a.w}, p, *variant, a.t_end, times, a.tol);
  if (a.out.empty()) {
    reprdyn::write_trajectory_csv(std::cout, r.trajectory);
  } else {
    reprdyn::write_trajectory_csv(std::filesystem::path(a.out), r.trajectory);
  }
  if (!r.ok()) {
    std::cerr << "integration stopped at t = " << r.t_stop << ": " << reprdyn::to_string(r.status)
              << '\n';
    return kRuntimeError;
  }
  return 0;
}

struct FitArgs {
  std::string input;
  double dx2 = 0.25, dyT2 = 1.0;
  std::string variant = "True";
  int starts = 16;
  bool ybar = false;
  std::uint64_t seed = 0x5eed;
};

int cmd_fit(const FitArgs& a) {
  std::vector<reprdyn::RhsVariant> variants;
  if (a.variant == "all") {
    variants.assign(reprdyn::kAllVariants.begin(), reprdyn::kAllVariants.end());
  } else if (const auto v = reprdyn::parse_variant(a.variant)) {
    variants.push_back(*v);
  } else {
    std::cerr << "unknown variant " << a.variant << '\n';
    return kConfigError;
  }
  const auto observed = reprdyn::read_trajectory_csv(std::filesystem::path(a.input));
  reprdyn::EffectiveParams partial;
  partial.dx2 = a.dx2;
  partial.dyT2 = a.dyT2;
  reprdyn::FitOptions opts;
  opts.starts = a.starts;
  opts.seed = a.seed;
  const double energy = reprdyn::trajectory_energy(observed);
  auto out = nlohmann::ordered_json::array();
  for (auto v : variants) {
    const auto f = reprdyn::fit_rates(observed, partial, v, a.ybar && v == reprdyn::RhsVariant::True,
                                      opts);
    auto j = nlohmann::ordered_json::parse(reprdyn::to_json(f));
    j["normalized_fit_loss"] = energy > 0.0 && std::isfinite(f.fit_loss) ? nlohmann::ordered_json(f.fit_loss / energy)
                                                                         : nlohmann::ordered_json(nullptr);
    out.push_back(j);
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

struct MdsArgs {
  std::string input;
  int dims = 2;
  std::string out;
};

int cmd_mds(const MdsArgs& a) {
  const auto d = reprdyn::read_distance_csv(a.input);
  const auto mds = reprdyn::classical_mds(d, a.dims);
  std::vector<std::string> labels = d.labels;
  if (labels.empty()) {
    for (Eigen::Index i = 0; i < d.size(); ++i) labels.push_back(std::to_string(i));
  }
  if (mds.padded) std::cerr << "warning: fewer than " << a.dims << " non-negative eigenvalues\n";
  const std::string path = a.out.empty() ? "mds.csv" : a.out;
  reprdyn::write_mds_csv(path, mds, labels);
  std::cout << path << '\n';
  return 0;
}

struct PrepArgs {
  std::string input;
  std::string out_dir = "mnist";
  std::uint64_t shuffle_seed = 1;
  std::size_t limit = 0;
};

int cmd_mnist_prep(const PrepArgs& a) {
  const auto r = reprdyn::convert_mnist_csv(a.input, a.out_dir, a.shuffle_seed, a.limit);
  std::cout << "images: " << r.images.string() << '\n'
            << "labels: " << r.labels.string() << '\n'
            << "count: " << r.count << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-point representation dynamics: experiments and utilities"};
  app.set_version_flag("--version", reprdyn::library_version());
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run an experiment described by a config file");
  run->add_option("config", run_args.config, "Config file (key = value lines)")->required();
  run->add_flag("--paper-scale", run_args.paper_scale, "Use the published network sizes");
  run->add_option("--workers", run_args.workers, "Concurrent trials")->check(CLI::PositiveNumber);
  run->add_option("--out", run_args.out,
                  "Output root (default: config output_dir, then $REPRDYN_OUTPUT_ROOT, then ./runs)");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Integrate the theory and print the trajectory CSV");
  simulate->add_option("--dx2", sim.dx2, "Squared input distance")->check(CLI::NonNegativeNumber);
  simulate->add_option("--dyT2", sim.dyT2, "Squared target distance")->check(CLI::NonNegativeNumber);
  simulate->add_option("--inv-tau-h", sim.inv_tau_h, "Encoder rate")->check(CLI::PositiveNumber);
  simulate->add_option("--inv-tau-y", sim.inv_tau_y, "Decoder rate")->check(CLI::PositiveNumber);
  simulate->add_option("--dh2", sim.dh2, "Initial squared hidden distance")->check(CLI::PositiveNumber);
  simulate->add_option("--dy2", sim.dy2, "Initial squared output distance")->check(CLI::NonNegativeNumber);
  simulate->add_option("--w", sim.w, "Initial alignment");
  simulate->add_option("--t-end", sim.t_end, "Final time in epochs")->check(CLI::PositiveNumber);
  simulate->add_option("--samples", sim.samples, "Number of output samples")->check(CLI::Range(2, 10'000'000));
  simulate->add_option("--variant", sim.variant, "True, SquaredW, FactorTwo, SignFlip or DroppedTerm");
  simulate->add_option("--tol", sim.tol, "Relative tolerance")->check(CLI::PositiveNumber);
  simulate->add_option("-o,--out", sim.out, "Write to a file instead of stdout");

  FitArgs fit;
  auto* fitc = app.add_subcommand("fit", "Fit effective rates to a trajectory or training record CSV");
  fitc->add_option("input", fit.input, "CSV with t,dh2,dy2,w[,loss] or epoch,loss,dh2,dy2,w")
      ->required()
      ->check(CLI::ExistingFile);
  fitc->add_option("--dx2", fit.dx2, "Squared input distance")->check(CLI::NonNegativeNumber);
  fitc->add_option("--dyT2", fit.dyT2, "Squared target distance")->check(CLI::NonNegativeNumber);
  fitc->add_option("--variant", fit.variant, "A variant name, or all");
  fitc->add_option("--starts", fit.starts, "Multi-start count")->check(CLI::PositiveNumber);
  fitc->add_flag("--ybar", fit.ybar, "Also fit the output-mean rate to the loss column");
  fitc->add_option("--seed", fit.seed, "Start-point seed");

  MdsArgs mds;
  auto* mdsc = app.add_subcommand("mds", "Classical MDS of a squared-distance matrix CSV");
  mdsc->add_option("input", mds.input, "Distance matrix CSV")->required()->check(CLI::ExistingFile);
  mdsc->add_option("--dims", mds.dims, "Embedding dimension")->check(CLI::PositiveNumber);
  mdsc->add_option("-o,--out", mds.out, "Output CSV (default mds.csv)");

  PrepArgs prep;
  auto* prepc = app.add_subcommand("mnist-prep", "Convert an MNIST CSV (optionally gzipped) to IDX files");
  prepc->add_option("input", prep.input, "CSV: 784 pixel columns then the label")
      ->required()
      ->check(CLI::ExistingFile);
  prepc->add_option("--out", prep.out_dir, "Output directory");
  prepc->add_option("--shuffle-seed", prep.shuffle_seed, "Row permutation seed; 0 keeps file order");
  prepc->add_option("--limit", prep.limit, "Keep only the first N rows after shuffling");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*simulate) return cmd_simulate(sim);
    if (*fitc) return cmd_fit(fit);
    if (*mdsc) return cmd_mds(mds);
    if (*prepc) return cmd_mnist_prep(prep);
  } catch (const reprdyn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}
