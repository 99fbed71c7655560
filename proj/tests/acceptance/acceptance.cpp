// Acceptance checks. Each criterion prints one PASS/FAIL line with the
// measured values; the process exits nonzero if any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <unistd.h>

#include "reprdyn/analysis.hpp"
#include "reprdyn/datasets.hpp"
#include "reprdyn/experiments.hpp"
#include "reprdyn/fitter.hpp"
#include "reprdyn/network.hpp"
#include "reprdyn/observables.hpp"
#include "reprdyn/rng.hpp"
#include "reprdyn/theory.hpp"

using namespace reprdyn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> check;
};

double log_uniform(std::mt19937_64& gen, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(gen));
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  v.back() = b;
  return v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------- theory

Outcome analytic_agreement() {
  std::mt19937_64 gen(101);
  double worst = 0.0;
  int failures = 0;
  for (int i = 0; i < 100; ++i) {
    EffectiveParams p;
    p.dx2 = log_uniform(gen, 0.05, 2.0);
    p.dyT2 = 0.0;
    p.inv_tau_h = log_uniform(gen, 0.01, 2.0);
    p.inv_tau_y = log_uniform(gen, 0.01, 2.0);
    const double dy2 = log_uniform(gen, 1e-3, 1.0);
    const TheoryState s0{log_uniform(gen, 0.05, 2.0), dy2, dy2};
    // Five e-folds of the fastest exponential keep every channel well above atol.
    const double a_high = fixed_points(s0, p).a_high;
    const double t_end = 5.0 / (p.inv_tau_y * std::max(std::abs(a_high), 0.1));
    const auto times = linspace(0.0, t_end, 20);
    const auto r = integrate(s0, p, RhsVariant::True, t_end, times, 1e-8);
    if (!r.ok()) {
      ++failures;
      continue;
    }
    for (std::size_t k = 0; k < times.size(); ++k) {
      const auto exact = solve_identical_outputs(s0, p, times[k]);
      const auto& got = r.trajectory.states[k];
      worst = std::max({worst, rel_err(got.dh2, exact.dh2), rel_err(got.dy2, exact.dy2),
                        rel_err(got.w, exact.w)});
    }
  }
  return {failures == 0 && worst < 1e-6,
          "max relative error " + fmt(worst) + " (< 1e-6), integration failures " +
              std::to_string(failures)};
}

Outcome fixed_point_convergence() {
  std::mt19937_64 gen(102);
  double worst = 0.0, max_trace = -INFINITY, min_det = INFINITY;
  int failures = 0;
  for (int i = 0; i < 100; ++i) {
    EffectiveParams p;
    p.dx2 = log_uniform(gen, 0.1, 2.0);
    p.dyT2 = log_uniform(gen, 0.1, 2.0);
    p.inv_tau_h = log_uniform(gen, 0.05, 1.0);
    p.inv_tau_y = log_uniform(gen, 0.05, 1.0);
    const TheoryState s0{log_uniform(gen, 1e-6, 1e-3), log_uniform(gen, 1e-10, 1e-6), 0.0};
    const auto fp = fixed_points(s0, p);
    max_trace = std::max(max_trace, fp.trace);
    min_det = std::min(min_det, fp.determinant);
    const auto r = integrate(s0, p, RhsVariant::True, 1e5, {}, 1e-8);
    if (!r.ok()) {
      ++failures;
      continue;
    }
    worst = std::max(worst, rel_err(r.trajectory.states.back().dh2, fp.dh2_stable));
  }
  return {failures == 0 && worst < 1e-4 && max_trace < 0.0 && min_det > 0.0,
          "max relative distance to the stable root " + fmt(worst) + " (< 1e-4), max trace " +
              fmt(max_trace) + ", min determinant " + fmt(min_det) + ", failures " +
              std::to_string(failures)};
}

Outcome conserved_drift() {
  std::mt19937_64 gen(103);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  double worst = 0.0;
  int collapsed = 0, step_failures = 0;
  for (int i = 0; i < 100; ++i) {
    EffectiveParams p;
    p.dx2 = log_uniform(gen, 0.1, 2.0);
    p.dyT2 = log_uniform(gen, 0.1, 2.0);
    p.inv_tau_h = log_uniform(gen, 0.01, 1.0);
    p.inv_tau_y = log_uniform(gen, 0.01, 1.0);
    // Only |dy2 - w| <= |dy| |dyT| is reachable from a real network.
    const double dy2 = log_uniform(gen, 1e-4, 1.0);
    const TheoryState s0{log_uniform(gen, 1e-3, 1.0), dy2,
                         dy2 - 2.0 * u(gen) * std::sqrt(dy2 * p.dyT2)};
    const auto times = linspace(0.0, 1000.0, 101);
    const auto r = integrate(s0, p, RhsVariant::True, 1000.0, times, 1e-8);
    if (r.status == IntegrationStatus::StepFailure) ++step_failures;
    if (r.status == IntegrationStatus::Singular) ++collapsed;
    const double c0 = conserved_quantity(s0, p);
    const double scale =
        std::abs(s0.dy2 / s0.dh2) + std::abs(p.inv_tau_y / p.inv_tau_h * s0.dh2 / p.dx2);
    for (const auto& s : r.trajectory.states) {
      // Near the singular floor the quantity is a ratio of roundoff.
      if (s.dh2 < 1e-4 * s0.dh2) continue;
      worst = std::max(worst, std::abs(conserved_quantity(s, p) - c0) / scale);
    }
  }
  return {step_failures == 0 && worst < 1e-6,
          "max relative drift " + fmt(worst) + " (< 1e-6) over 100 trajectories, " +
              std::to_string(collapsed) + " collapse onto dh2 = 0 and are checked up to there"};
}

// ---------------------------------------------------------------- network

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  Pcg32 rng(seed, 99);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

double gradient_error(Network net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                      const DropoutMasks* masks) {
  const auto cache = net.forward_batch(x, masks);
  const Gradients g = net.backward(cache, y, masks);
  const double h = 1e-5;
  auto loss = [&]() { return mse_loss(net.forward_batch(x, masks).output, y); };
  double gmax = 0.0;
  for (const auto& w : g.weight) gmax = std::max(gmax, w.cwiseAbs().maxCoeff());
  const double floor = 1e-3 * gmax + 1e-10;
  double worst = 0.0;
  auto check = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double lp = loss();
    param = saved - h;
    const double lm = loss();
    param = saved;
    const double fd = (lp - lm) / (2 * h);
    worst = std::max(worst, std::abs(fd - analytic) /
                                std::max({std::abs(fd), std::abs(analytic), floor}));
  };
  auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (Eigen::Index i = 0; i < layers[l].weight.size(); ++i)
      check(layers[l].weight.data()[i], g.weight[l].data()[i]);
    for (Eigen::Index i = 0; i < layers[l].bias.size(); ++i) check(layers[l].bias[i], g.bias[l][i]);
  }
  return worst;
}

Outcome gradient_oracle() {
  const Eigen::MatrixXd x = random_matrix(3, 6, 10);
  const Eigen::MatrixXd y = random_matrix(2, 6, 11);
  auto config = [](Activation a, int layers) {
    NetworkConfig c;
    c.input_dim = 3;
    c.output_dim = 2;
    c.hidden_layers = layers;
    c.units = 6;
    c.activation = a;
    c.init_gain = 1.3;
    c.seed = 42;
    return c;
  };
  double worst = 0.0;
  std::string worst_case;
  auto record = [&](double e, const std::string& what) {
    if (e >= worst) {
      worst = e;
      worst_case = what;
    }
  };
  for (Activation a : {Activation::Linear, Activation::ReLU, Activation::LeakyReLU,
                       Activation::ELU, Activation::Tanh, Activation::Swish}) {
    for (int layers : {1, 2, 3, 4}) {
      Network net(config(a, layers));
      std::uint64_t seed = 20;
      for (auto& l : net.layers()) l.bias = 0.1 * random_matrix(l.bias.size(), 1, seed++);
      record(gradient_error(net, x, y, nullptr),
             std::string(to_string(a)) + " x" + std::to_string(layers));
    }
  }
  NetworkConfig skip = config(Activation::Tanh, 4);
  skip.skip_connections = true;
  record(gradient_error(Network(skip), x, y, nullptr), "skip");
  NetworkConfig drop = config(Activation::LeakyReLU, 4);
  drop.dropout_p = 0.25;
  drop.skip_connections = true;
  const Network net(drop);
  Pcg32 rng(9, 0);
  const DropoutMasks masks = net.sample_masks(x.cols(), rng);
  record(gradient_error(net, x, y, &masks), "dropout");
  return {worst < 1e-5, "max relative error " + fmt(worst) + " (< 1e-5, worst case " +
                            worst_case + ")"};
}

// ---------------------------------------------------------------- fitter

Outcome fitter_recovery() {
  EffectiveParams partial;
  partial.dx2 = 0.25;
  partial.dyT2 = 1.0;
  const TheoryState s0{1e-3, 1e-6, 0.0};
  const std::pair<double, double> rates[] = {{0.3, 0.05}, {0.02, 0.1}};
  double worst = 0.0;
  std::string worst_case;
  for (RhsVariant v : kAllVariants) {
    for (const auto& [h, y] : rates) {
      EffectiveParams p = partial;
      p.inv_tau_h = h;
      p.inv_tau_y = y;
      const auto times = linspace(0.0, 3000.0, 601);
      const auto truth = integrate(s0, p, v, 3000.0, times, 1e-10);
      if (!truth.ok()) {
        return {false, std::string(to_string(v)) + " synthetic trajectory failed: " +
                           std::string(to_string(truth.status))};
      }
      const auto f = fit_rates(truth.trajectory, partial, v);
      const double e = std::max(rel_err(f.inv_tau_h, h), rel_err(f.inv_tau_y, y));
      if (e >= worst) {
        worst = e;
        worst_case = std::string(to_string(v)) + " at (" + fmt(h) + ", " + fmt(y) + ")";
      }
    }
  }
  return {worst < 0.01, "max relative rate error " + fmt(worst) + " (< 0.01, worst " +
                            worst_case + ")"};
}

// ---------------------------------------------------------------- two-point

// The command-line runner seeds the networks from the run seed; do the same.
ExperimentConfig desk(Experiment e) {
  ExperimentConfig c = default_config(e);
  c.network.seed = c.seed;
  return c;
}

FitOptions fit_options() {
  FitOptions o;
  o.starts = 16;
  return o;
}

Outcome two_point_reproduction() {
  const auto c = desk(Experiment::TwoPoint);
  const auto r = two_point_experiment(c.network, c.schedule, c.data.dx, c.data.dy, kAllVariants,
                                      fit_options(), false);
  if (!r.run.status.retained()) return {false, "trial discarded: " + r.run.status.reason};
  const double truth = r.normalized(RhsVariant::True);
  bool beats = true;
  std::string detail = "normalized fit loss True " + fmt(truth) + " (< 0.05)";
  for (RhsVariant v : kAllVariants) {
    if (v == RhsVariant::True) continue;
    const double n = r.normalized(v);
    beats = beats && truth < n;
    detail += ", " + std::string(to_string(v)) + " " + fmt(n);
  }
  return {truth < 0.05 && beats, detail + (beats ? "; True is best" : "; True is not best")};
}

Outcome rich_lazy_transition() {
  auto c = desk(Experiment::InitSweep);
  const int trials = 3;
  const RhsVariant only_true[] = {RhsVariant::True};
  struct Level {
    double fit = 0.0, normalized = 0.0;
    int kept = 0, plateaus = 0, decaying = 0;
    bool plateau = true, decays = true;
    double window = 0.0;
  };
  std::vector<Level> levels(c.sweep.gains.size());
  for (std::size_t g = 0; g < c.sweep.gains.size(); ++g) {
    NetworkConfig net = c.network;
    net.init_gain = c.sweep.gains[g];
    TrainSchedule s = c.schedule;
    s.learning_rate = c.sweep.learning_rates[g];
    for (int t = 0; t < trials; ++t) {
      const auto r =
          two_point_experiment(net, s, c.data.dx, c.data.dy, only_true, fit_options(), false, t);
      if (!r.run.status.retained()) continue;
      auto& L = levels[g];
      const auto pl = detect_plateau(r.run.record.epochs, pair_loss(r.run.record));
      L.plateau = L.plateau && pl.plateau;
      L.decays = L.decays && pl.decays_from_start;
      L.plateaus += pl.plateau;
      L.decaying += pl.decays_from_start;
      L.window = std::max(L.window, pl.window_change);
      L.fit += r.fit(RhsVariant::True).fit_loss;
      L.normalized += r.normalized(RhsVariant::True);
      ++L.kept;
    }
  }
  for (std::size_t g = 0; g < levels.size(); ++g) {
    if (levels[g].kept == 0) return {false, "every trial discarded at gain " + fmt(c.sweep.gains[g])};
    levels[g].fit /= levels[g].kept;
    levels[g].normalized /= levels[g].kept;
  }
  const auto& small = levels[0];
  const auto& large = levels[1];
  const auto& huge = levels[2];
  const double degrade = huge.fit / small.fit;
  const bool ok = small.plateau && !large.plateau && large.decays && degrade >= 5.0;
  std::ostringstream d;
  d << "gain " << fmt(c.sweep.gains[0]) << ": plateau in " << small.plateaus << "/" << small.kept
    << " (max early change " << fmt(small.window) << "); gain " << fmt(c.sweep.gains[1])
    << ": plateau in " << large.plateaus << "/" << large.kept << " (max early change "
    << fmt(large.window) << "), decays from epoch 0 in " << large.decaying << "/" << large.kept
    << "; gain " << fmt(c.sweep.gains[2]) << ": mean fit loss " << fmt(huge.fit) << " vs "
    << fmt(small.fit) << ", ratio " << fmt(degrade) << " (>= 5; normalized "
    << fmt(huge.normalized) << " vs " << fmt(small.normalized) << "); retained " << small.kept << "/" << large.kept
    << "/" << huge.kept << " of " << trials;
  return {ok, d.str()};
}

// ---------------------------------------------------------------- XOR

struct XorOutcome {
  XorReport report;
  int kept = 0;
};

XorOutcome xor_run(const NetworkConfig& net, const TrainSchedule& s, int trials) {
  const Dataset data = xor_dataset();
  const std::vector<std::size_t> all{0, 1, 2, 3};
  std::vector<DistanceMatrix> kept;
  for (int t = 0; t < trials; ++t) {
    const auto r = run_trial(net, s, data, t);
    if (r.status.retained()) kept.push_back(pairwise_distances(*r.network, data, all));
  }
  XorOutcome o;
  o.kept = static_cast<int>(kept.size());
  if (!kept.empty()) o.report = xor_report(average_distances(kept));
  return o;
}

std::string describe(const XorOutcome& o) {
  return "equal-target ratios " + fmt(o.report.equal_ratio_a) + ", " +
         fmt(o.report.equal_ratio_b) + ", min ratio " + fmt(o.report.min_ratio) + ", retained " +
         std::to_string(o.kept);
}

Outcome xor_merging() {
  const auto c = desk(Experiment::Xor);
  const auto small = xor_run(c.network, c.schedule, c.trials);

  NetworkConfig large_net = c.network;
  large_net.init_gain = 2.0;
  TrainSchedule large_s = c.schedule;
  large_s.learning_rate = 1e-8;
  const auto large = xor_run(large_net, large_s, c.trials);

  // Two weight layers, i.e. a single hidden layer.
  NetworkConfig shallow_net = c.network;
  shallow_net.hidden_layers = 1;
  shallow_net.init_gain = 0.0015;
  TrainSchedule shallow_s = c.schedule;
  shallow_s.learning_rate = 0.06;
  shallow_s.epochs = 40000;
  const auto shallow = xor_run(shallow_net, shallow_s, c.trials);

  const bool ok = small.kept > 0 && small.report.merged() && large.kept > 0 &&
                  large.report.min_ratio >= 0.5 && shallow.kept > 0 && !shallow.report.merged();
  return {ok, "20 layers gain 0.8: " + describe(small) + " (< 0.1); gain 2: " + describe(large) +
                  " (min >= 0.5); 1 hidden layer gain 0.0015: " + describe(shallow) +
                  " (must not merge)"};
}

Outcome adam_check() {
  auto c = desk(Experiment::Xor);
  c.schedule.optimizer.kind = OptimizerKind::Adam;
  c.schedule.learning_rate = 5e-4;
  c.schedule.epochs = 3000;
  const auto merged = xor_run(c.network, c.schedule, c.trials);

  const auto tp = desk(Experiment::TwoPoint);
  const RhsVariant only_true[] = {RhsVariant::True};
  const auto sgd = two_point_experiment(tp.network, tp.schedule, tp.data.dx, tp.data.dy,
                                        only_true, fit_options(), false);
  TrainSchedule adam = tp.schedule;
  adam.optimizer.kind = OptimizerKind::Adam;
  adam.learning_rate = 1e-4;
  const auto ad = two_point_experiment(tp.network, adam, tp.data.dx, tp.data.dy, only_true,
                                       fit_options(), false);
  if (!sgd.run.status.retained() || !ad.run.status.retained()) {
    return {false, "two-point trial discarded: " + sgd.run.status.reason + ad.run.status.reason};
  }
  const double ratio = ad.fit(RhsVariant::True).fit_loss / sgd.fit(RhsVariant::True).fit_loss;
  const bool ok = merged.kept > 0 && merged.report.merged() && ratio >= 2.0;
  return {ok, "Adam XOR: " + describe(merged) + " (< 0.1); two-point fit loss Adam " +
                  fmt(ad.fit(RhsVariant::True).fit_loss) + " vs SGD " +
                  fmt(sgd.fit(RhsVariant::True).fit_loss) + ", ratio " + fmt(ratio) +
                  " (>= 2; normalized " + fmt(ad.normalized(RhsVariant::True)) + " vs " +
                  fmt(sgd.normalized(RhsVariant::True)) + ")"};
}

// ---------------------------------------------------------------- blobs

Outcome feature_collapse() {
  const auto c = desk(Experiment::Blobs);
  BlobOptions bo;
  bo.grid = c.data.blob_grid;
  bo.image = c.data.blob_image;
  bo.variance = c.data.blob_variance;
  const Dataset data = blobs(bo);
  struct Run {
    CollapseReport report;
    std::string note;
  };
  auto collapse = [&](double gain, double lr, int epochs) {
    NetworkConfig net = c.network;
    net.init_gain = gain;
    TrainSchedule s = c.schedule;
    s.learning_rate = lr;
    s.epochs = epochs;
    const auto r = run_trial(net, s, data, 0);
    Run out;
    if (r.network) out.report = blob_collapse(r.network->hidden(data.inputs), bo.grid);
    if (!r.status.retained()) out.note = " [discarded: " + r.status.reason + "]";
    return out;
  };
  const Run small = collapse(c.network.init_gain, c.schedule.learning_rate, c.schedule.epochs);
  const Run large = collapse(2.0, 0.01, 3000);
  const Run tiny = collapse(0.1, 0.4, 30000);
  const auto& sr = small.report.irrelevant_ratio;
  const auto& lr = large.report.irrelevant_ratio;
  const bool retained = small.note.empty() && large.note.empty() && tiny.note.empty();
  const bool ok = retained && std::max(sr[0], sr[1]) < 0.1 && std::min(lr[0], lr[1]) > 0.5 &&
                  tiny.report.context_separation < 0.25;
  return {ok, "gain " + fmt(c.network.init_gain) + " irrelevant/relevant " + fmt(sr[0]) + ", " +
                  fmt(sr[1]) + " (< 0.1)" + small.note + "; gain 2 " + fmt(lr[0]) + ", " +
                  fmt(lr[1]) + " (> 0.5)" + large.note + "; gain 0.1 context separation " +
                  fmt(tiny.report.context_separation) + " (< 0.25)" + tiny.note};
}

// ---------------------------------------------------------------- MNIST

Outcome mnist_structure() {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("reprdyn_acceptance_mnist_" + std::to_string(::getpid()));
  const auto prep = convert_mnist_csv(std::filesystem::path(REPRDYN_TEST_DATA_DIR) / "mnist_5k.csv.gz",
                                      dir, 1);
  Dataset data = load_mnist(prep.images, prep.labels);
  std::filesystem::remove_all(dir);
  const auto c = desk(Experiment::Mnist);
  std::vector<std::size_t> head(c.data.mnist_count);
  std::iota(head.begin(), head.end(), std::size_t{0});
  data = data.subset(head);
  const auto subset = first_sorted_by_label(data, c.data.structure_items);
  std::vector<DistanceMatrix> kept;
  for (int t = 0; t < c.trials; ++t) {
    const auto r = run_trial(c.network, c.schedule, data, t, {}, false);
    if (r.status.retained()) kept.push_back(pairwise_distances(*r.network, data, subset));
  }
  if (kept.empty()) return {false, "every trial diverged"};
  const auto rep = structure_report(average_distances(kept), data, subset);
  return {rep.pearson_weighted > 0.4,
          "weighted Pearson " + fmt(rep.pearson_weighted) + " (> 0.4), raw " +
              fmt(rep.pearson_raw) + ", cross-label only " + fmt(rep.pearson_weighted_off_block) +
              ", trials averaged " + std::to_string(kept.size())};
}

// ---------------------------------------------------------------- random features

Outcome random_feature_distribution() {
  const double dx2 = 0.25, a_low = 0.3;
  const int n = 1'000'000;
  std::mt19937_64 gen(111);
  std::vector<double> variances;
  double ks_worst = 0.0;
  for (double gain : {1.0, 0.1, 0.01}) {
    std::normal_distribution<double> a(0.0, std::sqrt(2.0) * dx2 * gain);
    std::vector<double> h(n);
    for (auto& v : h) v = stable_distance(a(gen), a_low);
    std::sort(h.begin(), h.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
      const double F = final_distance_cdf(h[static_cast<std::size_t>(i)], gain, a_low, dx2);
      ks = std::max({ks, std::abs(F - static_cast<double>(i) / n),
                     std::abs(F - static_cast<double>(i + 1) / n)});
    }
    ks_worst = std::max(ks_worst, ks);
    const double mean = std::accumulate(h.begin(), h.end(), 0.0) / n;
    double var = 0.0;
    for (double v : h) var += (v - mean) * (v - mean);
    variances.push_back(var / (n - 1));
  }
  const bool decreasing = variances[0] > variances[1] && variances[1] > variances[2];
  return {ks_worst < 0.01 && decreasing,
          "max KS distance " + fmt(ks_worst) + " (< 0.01); variance at G = 1, 0.1, 0.01: " +
              fmt(variances[0]) + ", " + fmt(variances[1]) + ", " + fmt(variances[2])};
}

// ---------------------------------------------------------------- depth sweep

Outcome depth_sweep() {
  const auto c = desk(Experiment::DepthSweep);
  const RhsVariant only_true[] = {RhsVariant::True};
  std::vector<double> enc, dec;
  std::string detail = "rates (encoder, decoder) by layer:";
  for (int h : c.sweep.hidden_indices) {
    NetworkConfig net = c.network;
    net.hidden_index = h;
    const auto r = two_point_experiment(net, c.schedule, c.data.dx, c.data.dy, only_true,
                                        fit_options(), false);
    if (!r.run.status.retained()) return {false, "trial discarded at layer " + std::to_string(h)};
    const auto& f = r.fit(RhsVariant::True);
    enc.push_back(f.inv_tau_h);
    dec.push_back(f.inv_tau_y);
    detail += " " + std::to_string(h) + ":(" + fmt(f.inv_tau_h) + ", " + fmt(f.inv_tau_y) + ")";
  }
  const int ei = inversions(enc, true), di = inversions(dec, false);
  return {ei <= 1 && di <= 1, detail + "; encoder inversions " + std::to_string(ei) +
                                  ", decoder inversions " + std::to_string(di) + " (<= 1 each)"};
}

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "analytic identical-output solution", 10, analytic_agreement},
      {2, "fixed-point convergence and stability", 30, fixed_point_convergence},
      {3, "conserved quantity", 10, conserved_drift},
      {4, "gradient oracle", 30, gradient_oracle},
      {5, "fitter self-consistency", 60, fitter_recovery},
      {6, "two-point dynamics reproduction", 300, two_point_reproduction},
      {7, "rich/lazy transition", 600, rich_lazy_transition},
      {8, "XOR merging", 600, xor_merging},
      {9, "feature collapse", 1200, feature_collapse},
      {10, "MNIST structure", 2400, mnist_structure},
      {11, "random-feature distribution", 60, random_feature_distribution},
      {12, "Adam qualitative check", 600, adam_check},
      {13, "depth sweep", 900, depth_sweep},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reprdyn acceptance checks"};
  std::vector<int> selected;
  app.add_option("--criterion,-c", selected, "Criteria to run (default: all)")
      ->check(CLI::Range(1, 13));
  CLI11_PARSE(app, argc, argv);

  bool all_pass = true;
  for (const auto& c : criteria()) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end())
      continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = o.pass && in_time;
    all_pass = all_pass && pass;
    std::printf("%s  criterion %d (%s): %s [%.1f s, budget %.0f s%s]\n", pass ? "PASS" : "FAIL",
                c.id, c.name, o.detail.c_str(), secs, c.budget_seconds,
                in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
