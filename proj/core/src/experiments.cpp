#include "reprdyn/experiments.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "reprdyn/csv.hpp"
#include "reprdyn/datasets.hpp"
#include "reprdyn/observables.hpp"

namespace reprdyn {

using json = nlohmann::ordered_json;

bool converged(const TrainingRecord& record) {
  if (record.loss.empty()) return false;
  return record.loss.back() < kConvergenceRatio * record.loss.front();
}

TrialRun run_trial(const NetworkConfig& net, const TrainSchedule& schedule, const Dataset& data,
                   int trial, const Probe& probe, bool require_convergence) {
  NetworkConfig c = net;
  c.input_dim = data.input_dim();
  c.output_dim = data.output_dim();
  c.seed = net.seed + static_cast<std::uint64_t>(trial);

  TrialRun r;
  r.status.trial = trial;
  r.status.seed = c.seed;
  Network network(c);
  try {
    r.record = train(network, data, schedule, probe);
  } catch (const DivergenceError& e) {
    r.status.diverged = true;
    r.status.reason = "diverged at epoch " + std::to_string(e.epoch()) + ": " + e.what();
    return r;
  }
  r.status.initial_loss = r.record.loss.front();
  r.status.final_loss = r.record.loss.back();
  r.status.converged = converged(r.record);
  if (require_convergence && !r.status.converged) {
    std::ostringstream why;
    why << "did not converge: final/initial loss = " << r.status.final_loss / r.status.initial_loss;
    r.status.reason = why.str();
  }
  r.network.emplace(std::move(network));
  return r;
}

const FitResult& TwoPointResult::fit(RhsVariant v) const {
  for (const auto& f : fits) {
    if (f.variant == v) return f;
  }
  throw RunError("two-point result has no fit for variant " + std::string(to_string(v)));
}

TwoPointResult two_point_experiment(const NetworkConfig& net, const TrainSchedule& schedule,
                                    double dx, double dy, std::span<const RhsVariant> variants,
                                    const FitOptions& fit_options, bool fit_ybar, int trial) {
  const Dataset data = two_point(dx, dy);
  TwoPointResult r;
  r.run = run_trial(net, schedule, data, trial, pair_probe(data));
  r.partial.dx2 = dx * dx;
  r.partial.dyT2 = dy * dy;
  if (!r.run.status.retained()) return r;
  r.observed = observed_trajectory(r.run.record);
  r.energy = trajectory_energy(r.observed);
  for (RhsVariant v : variants) {
    r.fits.push_back(
        fit_rates(r.observed, r.partial, v, fit_ybar && v == RhsVariant::True, fit_options));
  }
  return r;
}

std::vector<double> pair_loss(const TrainingRecord& record) {
  std::vector<double> out;
  out.reserve(record.probes.size());
  for (const auto& p : record.probes) out.push_back(p.loss - 0.5 * p.ybar_dev2);
  return out;
}

PlateauReport detect_plateau(const std::vector<int>& epochs, const std::vector<double>& values,
                             double fraction, double tolerance) {
  if (epochs.size() != values.size() || epochs.size() < 3) {
    throw RunError("detect_plateau: need at least three aligned samples");
  }
  if (!(values.front() > 0.0)) throw RunError("detect_plateau: initial value must be positive");
  const double horizon = fraction * (epochs.back() - epochs.front());
  std::size_t k = 0;
  while (k + 1 < epochs.size() && epochs[k + 1] - epochs.front() <= horizon) ++k;
  if (k == 0) throw RunError("detect_plateau: recording too sparse for the window");

  PlateauReport r;
  bool decreasing = true;
  for (std::size_t i = 1; i <= k; ++i) {
    r.window_change = std::max(r.window_change, std::abs(values[i] / values.front() - 1.0));
    if (!(values[i] < values[i - 1])) decreasing = false;
  }
  r.final_ratio = values.back() / values.front();
  r.plateau = r.window_change <= tolerance && r.final_ratio < 1.0 - tolerance;
  r.decays_from_start = decreasing && values[k] / values.front() < 1.0 - tolerance;
  return r;
}

XorReport xor_report(const DistanceMatrix& d) {
  if (d.size() != 4) throw RunError("xor_report: expected a 4x4 matrix");
  const auto& e = d.entries;
  XorReport r;
  r.mean_unequal = 0.25 * (e(0, 1) + e(0, 2) + e(1, 3) + e(2, 3));
  if (!(r.mean_unequal > 0.0)) throw RunError("xor_report: unequal-target pairs have zero distance");
  r.equal_ratio_a = e(1, 2) / r.mean_unequal;
  r.equal_ratio_b = e(0, 3) / r.mean_unequal;
  r.min_ratio = INFINITY;
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) r.min_ratio = std::min(r.min_ratio, e(i, j) / r.mean_unequal);
  }
  return r;
}

CollapseReport blob_collapse(const Eigen::MatrixXd& hidden, int grid) {
  const Eigen::Index per_context = static_cast<Eigen::Index>(grid) * grid;
  if (grid < 2 || hidden.cols() != 2 * per_context) {
    throw RunError("blob_collapse: column count does not match the grid");
  }
  CollapseReport r;
  Eigen::VectorXd centroid[2];
  double spread = 0.0;
  for (int ctx = 0; ctx < 2; ++ctx) {
    // The relevant coordinate is the lattice x index in context 0 and y in context 1.
    auto at = [&](int relevant, int irrelevant) {
      const int i = ctx == 0 ? relevant : irrelevant;
      const int j = ctx == 0 ? irrelevant : relevant;
      return hidden.col(ctx * per_context + i * grid + j);
    };
    double irr = 0.0, rel = 0.0;
    for (int a = 0; a < grid; ++a) {
      Eigen::VectorXd m_irr = Eigen::VectorXd::Zero(hidden.rows());
      Eigen::VectorXd m_rel = Eigen::VectorXd::Zero(hidden.rows());
      for (int b = 0; b < grid; ++b) {
        m_irr += at(a, b);
        m_rel += at(b, a);
      }
      m_irr /= grid;
      m_rel /= grid;
      for (int b = 0; b < grid; ++b) {
        irr += (at(a, b) - m_irr).squaredNorm();
        rel += (at(b, a) - m_rel).squaredNorm();
      }
    }
    r.irrelevant_ratio[ctx] = rel > 0.0 ? irr / rel : INFINITY;
    centroid[ctx] = hidden.middleCols(ctx * per_context, per_context).rowwise().mean();
    spread += (hidden.middleCols(ctx * per_context, per_context).colwise() - centroid[ctx])
                  .squaredNorm();
  }
  spread /= static_cast<double>(2 * per_context);
  r.context_separation = spread > 0.0 ? (centroid[0] - centroid[1]).norm() / std::sqrt(spread)
                                      : INFINITY;
  return r;
}

DistanceMatrix average_distances(const std::vector<DistanceMatrix>& ds) {
  if (ds.empty()) throw RunError("no retained trials to average");
  DistanceMatrix out = ds.front();
  for (std::size_t k = 1; k < ds.size(); ++k) {
    if (ds[k].size() != out.size()) throw RunError("average_distances: shape mismatch");
    out.entries += ds[k].entries;
  }
  out.entries /= static_cast<double>(ds.size());
  out.provenance = Provenance::Measured;
  return out;
}

StructureReport structure_report(const DistanceMatrix& measured, const Dataset& data,
                                 std::span<const std::size_t> subset) {
  StructureReport r;
  r.measured = measured;
  r.theory = theory_distance_matrix(data, subset, 1.0);
  r.weighted = exponential_weighing(rescale_to_median(r.theory, measured));
  r.pearson_raw = pearson(measured, r.theory);
  r.pearson_weighted = pearson(measured, r.weighted);
  if (!measured.labels.empty()) r.pearson_weighted_off_block = pearson(measured, r.weighted, true);
  return r;
}

int inversions(const std::vector<double>& xs, bool nondecreasing) {
  int n = 0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (nondecreasing ? xs[i] < xs[i - 1] : xs[i] > xs[i - 1]) ++n;
  }
  return n;
}

std::string library_version() { return REPRDYN_VERSION; }

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string utc_stamp(std::chrono::system_clock::time_point t, const char* fmt) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, fmt, &tm);
  return buf;
}

// Owns the run directory: every file written through it is listed in the
// manifest, and nothing else is.
class RunWriter {
 public:
  RunWriter(const std::filesystem::path& root, std::uint64_t seed,
            std::chrono::system_clock::time_point start) {
    std::filesystem::create_directories(root);
    const std::string base = utc_stamp(start, "%Y%m%dT%H%M%SZ") + "-seed" + std::to_string(seed);
    for (int k = 0;; ++k) {
      dir_ = root / (k == 0 ? base : base + "-" + std::to_string(k + 1));
      if (std::filesystem::create_directory(dir_)) break;
    }
  }

  [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path claim(const std::string& relative) {
    if (!claimed_.insert(relative).second) throw RunError("artifact written twice: " + relative);
    artifacts_.push_back(relative);
    const auto path = dir_ / relative;
    std::filesystem::create_directories(path.parent_path());
    return path;
  }

  std::ofstream open(const std::string& relative) {
    std::ofstream out(claim(relative));
    if (!out) throw RunError("cannot write " + (dir_ / relative).string());
    return out;
  }

  [[nodiscard]] const std::vector<std::string>& artifacts() const { return artifacts_; }

 private:
  std::filesystem::path dir_;
  std::set<std::string> claimed_;
  std::vector<std::string> artifacts_;
};

json config_echo(const ExperimentConfig& c) {
  json out = json::object();
  std::istringstream in(serialize(c));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

json trial_json(const TrialStatus& s) {
  return json{{"trial", s.trial},
              {"seed", s.seed},
              {"diverged", s.diverged},
              {"converged", s.converged},
              {"retained", s.retained()},
              {"reason", s.reason},
              {"initial_loss", number(s.initial_loss)},
              {"final_loss", number(s.final_loss)}};
}

json fit_json(const FitResult& f, double energy) {
  json j = json::parse(to_json(f));
  j["normalized_fit_loss"] = number(energy > 0.0 ? f.fit_loss / energy : INFINITY);
  return j;
}

std::string trial_dir(int trial) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trial_%03d", trial);
  return buf;
}

FitOptions fit_options(const ExperimentConfig& c) {
  FitOptions o;
  o.starts = c.fit.starts;
  o.seed = c.seed;
  return o;
}

void write_theory_fit(RunWriter& w, const std::string& relative, const Trajectory& observed,
                      const FitResult& f, const EffectiveParams& partial) {
  if (!std::isfinite(f.fit_loss)) return;
  const auto r = theory_on_grid(observed, f.params(partial), f.variant);
  write_trajectory_csv(w.claim(relative), r.trajectory);
}

struct Context {
  const ExperimentConfig& config;
  RunWriter& writer;
  json& results;
  json& trials;
  json& dataset;
  std::vector<std::uint64_t>& seeds;
  int total = 0;
  int discarded = 0;

  void note(const TrialStatus& s, json extra = json::object()) {
    json j = trial_json(s);
    for (auto& [k, v] : extra.items()) j[k] = v;
    trials.push_back(j);
    seeds.push_back(s.seed);
    ++total;
    if (!s.retained()) ++discarded;
  }
};

void run_simulate(Context& ctx) {
  const auto& c = ctx.config;
  EffectiveParams p;
  p.dx2 = c.theory.dx2.value_or(c.data.dx * c.data.dx);
  p.dyT2 = c.theory.dyT2.value_or(c.data.dy * c.data.dy);
  p.inv_tau_h = c.theory.inv_tau_h.value_or(1e-3);
  p.inv_tau_y = c.theory.inv_tau_y.value_or(1e-2);
  p.inv_tau_ybar = c.theory.inv_tau_ybar;
  p.validate();
  std::vector<double> times(static_cast<std::size_t>(c.theory.samples));
  for (std::size_t i = 0; i < times.size(); ++i) {
    times[i] = c.theory.t_end * static_cast<double>(i) / static_cast<double>(times.size() - 1);
  }
  const auto r = integrate(c.theory.initial, p, c.theory.variant, c.theory.t_end, times, 1e-8);
  write_trajectory_csv(ctx.writer.claim("theory.csv"), r.trajectory);
  const auto fp = fixed_points(c.theory.initial, p);
  ctx.results["integration_status"] = std::string(to_string(r.status));
  ctx.results["t_stop"] = r.t_stop;
  ctx.results["accepted_steps"] = r.accepted_steps;
  ctx.results["a_high"] = number(fp.a_high);
  ctx.results["a_low"] = number(fp.a_low);
  ctx.results["dh2_stable"] = number(fp.dh2_stable);
  ctx.results["jacobian_trace"] = number(fp.trace);
  ctx.results["jacobian_determinant"] = number(fp.determinant);
  ctx.dataset = json{{"name", "none"}, {"dx2", p.dx2}, {"dyT2", p.dyT2}};
  if (!r.ok()) {
    throw RunError("integration stopped at t = " + std::to_string(r.t_stop) + " (" +
                   std::string(to_string(r.status)) + ")");
  }
}

json dataset_json(const Dataset& d) {
  json j{{"name", d.name}, {"size", d.size()}, {"input_dim", d.input_dim()},
         {"output_dim", d.output_dim()}};
  for (const auto& [k, v] : d.generator) j[k] = v;
  return j;
}

void run_two_point(Context& ctx, bool all_variants) {
  const auto& c = ctx.config;
  std::vector<RhsVariant> variants{RhsVariant::True};
  if (all_variants) variants.assign(kAllVariants.begin(), kAllVariants.end());
  const auto opts = fit_options(c);
  const auto runs = parallel_map<TwoPointResult>(c.trials, c.workers, [&](int t) {
    return two_point_experiment(c.network, c.schedule, c.data.dx, c.data.dy, variants, opts,
                                c.fit.ybar, t);
  });
  ctx.dataset = dataset_json(two_point(c.data.dx, c.data.dy));
  json per_trial = json::array();
  for (const auto& r : runs) {
    const std::string dir = trial_dir(r.run.status.trial);
    ctx.note(r.run.status);
    if (r.run.status.diverged) continue;
    write_record_csv(ctx.writer.claim(dir + "/record.csv"), r.run.record);
    if (!r.run.status.retained()) continue;
    json t{{"trial", r.run.status.trial}, {"trajectory_energy", r.energy}};
    const auto pl = detect_plateau(r.run.record.epochs, pair_loss(r.run.record));
    t["pair_loss_plateau"] = {{"window_change", pl.window_change},
                              {"plateau", pl.plateau},
                              {"decays_from_start", pl.decays_from_start}};
    json fits = json::array();
    for (const auto& f : r.fits) fits.push_back(fit_json(f, r.energy));
    t["fits"] = fits;
    per_trial.push_back(t);
    write_theory_fit(ctx.writer, dir + "/theory.csv", r.observed, r.fit(RhsVariant::True),
                     r.partial);
    if (all_variants) {
      auto out = ctx.writer.open(dir + "/ablation.csv");
      out << "variant,inv_tau_h,inv_tau_y,fit_loss,normalized_fit_loss,converged\n";
      for (const auto& f : r.fits) {
        out << to_string(f.variant) << ',' << format_double(f.inv_tau_h) << ','
            << format_double(f.inv_tau_y) << ',' << format_double(f.fit_loss) << ','
            << format_double(f.fit_loss / r.energy) << ',' << (f.converged ? 1 : 0) << '\n';
      }
    }
  }
  ctx.results["trials"] = per_trial;
}

void run_init_sweep(Context& ctx) {
  const auto& c = ctx.config;
  const int n_gain = static_cast<int>(c.sweep.gains.size());
  const auto opts = fit_options(c);
  const RhsVariant only_true[] = {RhsVariant::True};
  const auto runs = parallel_map<TwoPointResult>(n_gain * c.trials, c.workers, [&](int job) {
    const int g = job / c.trials;
    NetworkConfig net = c.network;
    net.init_gain = c.sweep.gains[static_cast<std::size_t>(g)];
    TrainSchedule s = c.schedule;
    if (!c.sweep.learning_rates.empty()) s.learning_rate = c.sweep.learning_rates[static_cast<std::size_t>(g)];
    return two_point_experiment(net, s, c.data.dx, c.data.dy, only_true, opts, c.fit.ybar,
                                job % c.trials);
  });
  ctx.dataset = dataset_json(two_point(c.data.dx, c.data.dy));
  auto summary = ctx.writer.open("summary.csv");
  summary << "gain,learning_rate,trial,retained,fit_loss,normalized_fit_loss,inv_tau_h,inv_tau_y,"
             "plateau_window_change,decays_from_start\n";
  for (int job = 0; job < static_cast<int>(runs.size()); ++job) {
    const auto& r = runs[static_cast<std::size_t>(job)];
    const auto g = static_cast<std::size_t>(job / c.trials);
    const double lr = c.sweep.learning_rates.empty() ? c.schedule.learning_rate : c.sweep.learning_rates[g];
    ctx.note(r.run.status, {{"gain", c.sweep.gains[g]}, {"learning_rate", lr}});
    const std::string dir = "gain_" + std::to_string(g) + "/" + trial_dir(r.run.status.trial);
    if (!r.run.status.diverged) write_record_csv(ctx.writer.claim(dir + "/record.csv"), r.run.record);
    summary << format_double(c.sweep.gains[g]) << ',' << format_double(lr) << ','
            << r.run.status.trial << ',' << (r.run.status.retained() ? 1 : 0);
    if (!r.run.status.retained()) {
      summary << ",,,,,,\n";
      continue;
    }
    const auto& f = r.fit(RhsVariant::True);
    const auto pl = detect_plateau(r.run.record.epochs, pair_loss(r.run.record));
    summary << ',' << format_double(f.fit_loss) << ',' << format_double(f.fit_loss / r.energy)
            << ',' << format_double(f.inv_tau_h) << ',' << format_double(f.inv_tau_y) << ','
            << format_double(pl.window_change) << ',' << (pl.decays_from_start ? 1 : 0) << '\n';
    write_theory_fit(ctx.writer, dir + "/theory.csv", r.observed, f, r.partial);
  }
}

void run_grid_sweep(Context& ctx) {
  const auto& c = ctx.config;
  EffectiveParams rates;
  if (c.theory.inv_tau_h && c.theory.inv_tau_y) {
    rates.inv_tau_h = *c.theory.inv_tau_h;
    rates.inv_tau_y = *c.theory.inv_tau_y;
    ctx.results["rates_source"] = "config";
  } else {
    TrainSchedule s = c.schedule;
    s.record_every = 1;
    const RhsVariant only_true[] = {RhsVariant::True};
    const auto ref = two_point_experiment(c.network, s, c.data.dx, c.data.dy, only_true,
                                          fit_options(c), false, 0);
    if (!ref.run.status.retained()) {
      throw RunError("reference two-point run for the rate fit failed: " + ref.run.status.reason);
    }
    write_record_csv(ctx.writer.claim("reference/record.csv"), ref.run.record);
    const auto& f = ref.fit(RhsVariant::True);
    rates.inv_tau_h = f.inv_tau_h;
    rates.inv_tau_y = f.inv_tau_y;
    ctx.results["rates_source"] = "fit";
    ctx.results["reference_fit"] = fit_json(f, ref.energy);
  }
  ctx.results["inv_tau_h"] = rates.inv_tau_h;
  ctx.results["inv_tau_y"] = rates.inv_tau_y;

  const int nx = static_cast<int>(c.sweep.dx.size());
  const int ny = static_cast<int>(c.sweep.dy.size());
  struct Cell {
    TrialRun run;
    double dx = 0.0, dy = 0.0;
  };
  const auto cells = parallel_map<Cell>(nx * ny * c.trials, c.workers, [&](int job) {
    const int t = job % c.trials;
    const int cell = job / c.trials;
    Cell out;
    out.dx = c.sweep.dx[static_cast<std::size_t>(cell / ny)];
    out.dy = c.sweep.dy[static_cast<std::size_t>(cell % ny)];
    const Dataset data = two_point(out.dx, out.dy);
    out.run = run_trial(c.network, c.schedule, data, t, pair_probe(data));
    return out;
  });
  ctx.dataset = json{{"name", "two_point"}, {"dx", c.sweep.dx}, {"dy", c.sweep.dy}};
  auto summary = ctx.writer.open("summary.csv");
  summary << "dx,dy,trial,retained,initial_dh2,final_dh2,predicted_dh2\n";
  for (const auto& cell : cells) {
    ctx.note(cell.run.status, {{"dx", cell.dx}, {"dy", cell.dy}});
    summary << format_double(cell.dx) << ',' << format_double(cell.dy) << ','
            << cell.run.status.trial << ',' << (cell.run.status.retained() ? 1 : 0);
    if (!cell.run.status.retained()) {
      summary << ",,,\n";
      continue;
    }
    const auto& first = cell.run.record.probes.front();
    const auto& last = cell.run.record.probes.back();
    EffectiveParams p = rates;
    p.dx2 = cell.dx * cell.dx;
    p.dyT2 = cell.dy * cell.dy;
    std::string predicted;
    if (p.dx2 > 0.0 && first.dh2 > kSingularityFloor) {
      predicted = format_double(fixed_points({first.dh2, first.dy2, first.w}, p).dh2_stable);
    }
    summary << ',' << format_double(first.dh2) << ',' << format_double(last.dh2) << ','
            << predicted << '\n';
  }
}

void run_xor(Context& ctx) {
  const auto& c = ctx.config;
  const Dataset data = xor_dataset();
  const std::vector<std::size_t> all{0, 1, 2, 3};
  struct Out {
    TrialRun run;
    std::optional<DistanceMatrix> d;
  };
  const auto runs = parallel_map<Out>(c.trials, c.workers, [&](int t) {
    Out o;
    o.run = run_trial(c.network, c.schedule, data, t);
    if (o.run.network) o.d = pairwise_distances(*o.run.network, data, all);
    return o;
  });
  ctx.dataset = dataset_json(data);
  std::vector<DistanceMatrix> kept;
  for (const auto& o : runs) {
    ctx.note(o.run.status);
    if (o.run.status.diverged) continue;
    const std::string dir = trial_dir(o.run.status.trial);
    write_record_csv(ctx.writer.claim(dir + "/record.csv"), o.run.record);
    write_distance_csv(ctx.writer.claim(dir + "/distances.csv"), *o.d);
    if (o.run.status.retained()) kept.push_back(*o.d);
  }
  write_distance_csv(ctx.writer.claim("theory.csv"), theory_distance_matrix(data, all, 1.0));
  if (kept.empty()) throw RunError("every XOR trial was discarded");
  const auto mean = average_distances(kept);
  write_distance_csv(ctx.writer.claim("distances_mean.csv"), mean);
  const auto rep = xor_report(mean);
  ctx.results["retained_trials"] = kept.size();
  ctx.results["equal_target_ratio_10_01"] = rep.equal_ratio_a;
  ctx.results["equal_target_ratio_00_11"] = rep.equal_ratio_b;
  ctx.results["min_pair_ratio"] = rep.min_ratio;
  ctx.results["mean_unequal_target_distance"] = rep.mean_unequal;
  ctx.results["merged"] = rep.merged();
}

void run_blobs(Context& ctx) {
  const auto& c = ctx.config;
  BlobOptions bo;
  bo.grid = c.data.blob_grid;
  bo.image = c.data.blob_image;
  bo.variance = c.data.blob_variance;
  const Dataset data = blobs(bo);
  struct Out {
    TrialRun run;
    Eigen::MatrixXd hidden;
  };
  const auto runs = parallel_map<Out>(c.trials, c.workers, [&](int t) {
    Out o;
    o.run = run_trial(c.network, c.schedule, data, t);
    if (o.run.network) o.hidden = o.run.network->hidden(data.inputs);
    return o;
  });
  ctx.dataset = dataset_json(data);
  auto summary = ctx.writer.open("summary.csv");
  summary << "trial,retained,irrelevant_ratio_context0,irrelevant_ratio_context1,context_separation\n";
  bool mds_written = false;
  double r0 = 0.0, r1 = 0.0, sep = 0.0;
  int kept = 0;
  for (const auto& o : runs) {
    ctx.note(o.run.status);
    summary << o.run.status.trial << ',' << (o.run.status.retained() ? 1 : 0);
    if (o.run.status.diverged) {
      summary << ",,,\n";
      continue;
    }
    write_record_csv(ctx.writer.claim(trial_dir(o.run.status.trial) + "/record.csv"), o.run.record);
    const auto rep = blob_collapse(o.hidden, bo.grid);
    summary << ',' << format_double(rep.irrelevant_ratio[0]) << ','
            << format_double(rep.irrelevant_ratio[1]) << ',' << format_double(rep.context_separation)
            << '\n';
    if (!o.run.status.retained()) continue;
    r0 += rep.irrelevant_ratio[0];
    r1 += rep.irrelevant_ratio[1];
    sep += rep.context_separation;
    ++kept;
    if (!mds_written) {
      const auto mds = classical_mds(squared_distances(o.hidden), 2);
      std::vector<std::string> labels;
      for (std::size_t k = 0; k < data.size(); ++k) {
        const auto bc = blob_coord(k, bo.grid);
        labels.push_back("c" + std::to_string(bc.context) + "_" + std::to_string(bc.i) + "_" +
                         std::to_string(bc.j));
      }
      write_mds_csv(ctx.writer.claim("mds.csv"), mds, labels);
      ctx.results["mds_trial"] = o.run.status.trial;
      mds_written = true;
    }
  }
  ctx.results["retained_trials"] = kept;
  if (kept > 0) {
    ctx.results["irrelevant_ratio_context0"] = r0 / kept;
    ctx.results["irrelevant_ratio_context1"] = r1 / kept;
    ctx.results["context_separation"] = sep / kept;
  }
}

void run_mnist(Context& ctx) {
  const auto& c = ctx.config;
  Dataset data;
  try {
    data = load_mnist(c.data.mnist_images, c.data.mnist_labels);
  } catch (const DatasetError& e) {
    throw RunError(std::string("MNIST ingestion failed: ") + e.what());
  }
  if (c.data.mnist_count > 0 && c.data.mnist_count < data.size()) {
    std::vector<std::size_t> head(c.data.mnist_count);
    std::iota(head.begin(), head.end(), std::size_t{0});
    data = data.subset(head);
  }
  const auto subset = first_sorted_by_label(data, c.data.structure_items);
  const auto pair = random_pair_with_labels(data, 0, 1, c.seed);
  const Probe probe = pair_probe(data, pair.first, pair.second);
  struct Out {
    TrialRun run;
    std::optional<DistanceMatrix> d;
  };
  const auto runs = parallel_map<Out>(c.trials, c.workers, [&](int t) {
    Out o;
    o.run = run_trial(c.network, c.schedule, data, t, probe, false);
    if (o.run.network) o.d = pairwise_distances(*o.run.network, data, subset);
    return o;
  });
  ctx.dataset = dataset_json(data);
  ctx.dataset["probe_pair"] = {pair.first, pair.second};
  std::vector<DistanceMatrix> kept;
  for (const auto& o : runs) {
    ctx.note(o.run.status);
    if (!o.run.status.retained()) continue;
    write_record_csv(ctx.writer.claim(trial_dir(o.run.status.trial) + "/record.csv"), o.run.record);
    kept.push_back(*o.d);
  }
  if (kept.empty()) throw RunError("every MNIST trial diverged");
  const auto rep = structure_report(average_distances(kept), data, subset);
  write_distance_csv(ctx.writer.claim("distances_measured.csv"), rep.measured);
  write_distance_csv(ctx.writer.claim("distances_theory.csv"), rep.theory);
  write_distance_csv(ctx.writer.claim("distances_weighted.csv"), rep.weighted);
  ctx.results["retained_trials"] = kept.size();
  ctx.results["pearson_raw"] = rep.pearson_raw;
  ctx.results["pearson_weighted"] = rep.pearson_weighted;
  ctx.results["pearson_weighted_off_block"] = rep.pearson_weighted_off_block;
  ctx.results["theory_scaling"] = "theory rescaled to the measured median before weighing";
}

void run_depth_sweep(Context& ctx) {
  const auto& c = ctx.config;
  const int n = static_cast<int>(c.sweep.hidden_indices.size());
  const auto opts = fit_options(c);
  const RhsVariant only_true[] = {RhsVariant::True};
  const auto runs = parallel_map<TwoPointResult>(n * c.trials, c.workers, [&](int job) {
    NetworkConfig net = c.network;
    net.hidden_index = c.sweep.hidden_indices[static_cast<std::size_t>(job / c.trials)];
    return two_point_experiment(net, c.schedule, c.data.dx, c.data.dy, only_true, opts, false,
                                job % c.trials);
  });
  ctx.dataset = dataset_json(two_point(c.data.dx, c.data.dy));
  auto summary = ctx.writer.open("summary.csv");
  summary << "hidden_index,trial,retained,inv_tau_h,inv_tau_y,fit_loss,normalized_fit_loss\n";
  std::vector<double> enc(static_cast<std::size_t>(n), 0.0), dec(static_cast<std::size_t>(n), 0.0);
  std::vector<int> count(static_cast<std::size_t>(n), 0);
  for (int job = 0; job < static_cast<int>(runs.size()); ++job) {
    const auto& r = runs[static_cast<std::size_t>(job)];
    const auto h = static_cast<std::size_t>(job / c.trials);
    const int index = c.sweep.hidden_indices[h];
    ctx.note(r.run.status, {{"hidden_index", index}});
    summary << index << ',' << r.run.status.trial << ',' << (r.run.status.retained() ? 1 : 0);
    if (!r.run.status.retained()) {
      summary << ",,,,\n";
      continue;
    }
    const auto& f = r.fit(RhsVariant::True);
    summary << ',' << format_double(f.inv_tau_h) << ',' << format_double(f.inv_tau_y) << ','
            << format_double(f.fit_loss) << ',' << format_double(f.fit_loss / r.energy) << '\n';
    write_record_csv(ctx.writer.claim("layer_" + std::to_string(index) + "/" +
                                      trial_dir(r.run.status.trial) + "/record.csv"),
                     r.run.record);
    enc[h] += f.inv_tau_h;
    dec[h] += f.inv_tau_y;
    ++count[h];
  }
  json layers = json::array();
  std::vector<double> enc_mean, dec_mean;
  for (std::size_t h = 0; h < enc.size(); ++h) {
    if (count[h] == 0) continue;
    enc_mean.push_back(enc[h] / count[h]);
    dec_mean.push_back(dec[h] / count[h]);
    layers.push_back({{"hidden_index", c.sweep.hidden_indices[h]},
                      {"inv_tau_h", enc_mean.back()},
                      {"inv_tau_y", dec_mean.back()}});
  }
  ctx.results["layers"] = layers;
  ctx.results["encoder_inversions"] = inversions(enc_mean, true);
  ctx.results["decoder_inversions"] = inversions(dec_mean, false);
}

}  // namespace

RunSummary run(const ExperimentConfig& requested, const std::filesystem::path& output_root) {
  requested.validate();
  // The run seed drives network initialisation; trial t uses seed + t.
  ExperimentConfig config = requested;
  config.network.seed = config.seed;
  const auto start = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  RunWriter writer(output_root, config.seed, start);

  json results = json::object();
  json trials = json::array();
  json dataset = json::object();
  std::vector<std::uint64_t> seeds;
  Context ctx{config, writer, results, trials, dataset, seeds};

  std::string failure;
  try {
    switch (config.experiment) {
      case Experiment::Simulate: run_simulate(ctx); break;
      case Experiment::TwoPoint: run_two_point(ctx, false); break;
      case Experiment::Ablation: run_two_point(ctx, true); break;
      case Experiment::InitSweep: run_init_sweep(ctx); break;
      case Experiment::GridSweep: run_grid_sweep(ctx); break;
      case Experiment::Xor: run_xor(ctx); break;
      case Experiment::Blobs: run_blobs(ctx); break;
      case Experiment::Mnist: run_mnist(ctx); break;
      case Experiment::DepthSweep: run_depth_sweep(ctx); break;
    }
  } catch (const std::exception& e) {
    failure = e.what();
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  NetworkConfig net = config.network;
  json manifest{
      {"tool", "reprdyn"},
      {"version", library_version()},
      {"experiment", std::string(to_string(config.experiment))},
      {"status", failure.empty() ? "ok" : "failed"},
      {"error", failure},
      {"config", config_echo(config)},
      {"seed", config.seed},
      {"trial_seeds", seeds},
      {"started_utc", utc_stamp(start, "%Y-%m-%dT%H:%M:%SZ")},
      {"wall_clock_seconds", wall},
      {"probe", {{"layer", config.experiment == Experiment::Simulate ? 0 : net.probe_layer()},
                 {"values", "post-activation"},
                 {"mode", "eval (no dropout)"},
                 {"record_every", config.schedule.record_every}}},
      {"loss", "0.5 * mean over samples of the squared error"},
      {"convergence_rule",
       config.experiment == Experiment::Mnist
           ? "final loss < 1e-3 * initial loss, reported only; only diverged trials are discarded"
           : "final loss < 1e-3 * initial loss; non-converged trials are discarded"},
      {"dataset", dataset},
      {"trials", trials},
      {"discarded", json::array()},
      {"results", results},
  };
  for (const auto& t : trials) {
    if (!t["retained"].get<bool>()) {
      manifest["discarded"].push_back({{"trial", t["trial"]}, {"reason", t["reason"]}});
    }
  }
  manifest["artifacts"] = writer.artifacts();
  const auto manifest_path = writer.dir() / "manifest.json";
  {
    std::ofstream out(manifest_path);
    if (!out) throw RunError("cannot write " + manifest_path.string());
    out << manifest.dump(2) << '\n';
  }
  if (!failure.empty()) throw RunError(failure + " (manifest: " + manifest_path.string() + ")");

  RunSummary s;
  s.directory = writer.dir();
  s.manifest = manifest_path;
  s.trials_total = ctx.total;
  s.trials_discarded = ctx.discarded;
  return s;
}

}  // namespace reprdyn
