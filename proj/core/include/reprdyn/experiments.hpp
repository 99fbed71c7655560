#pragma once

// Experiment pipelines (train -> probe -> fit -> analyse) and the run
// directory writer. The building blocks are public so that tests can check
// the same quantities the runner reports.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "reprdyn/analysis.hpp"
#include "reprdyn/config.hpp"
#include "reprdyn/fitter.hpp"
#include "reprdyn/network.hpp"

namespace reprdyn {

class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Retention rule: final training loss below 1e-3 of the initial loss.
inline constexpr double kConvergenceRatio = 1e-3;
bool converged(const TrainingRecord& record);

struct TrialStatus {
  int trial = 0;
  std::uint64_t seed = 0;
  bool diverged = false;
  bool converged = false;
  std::string reason;  ///< empty for retained trials
  double initial_loss = 0.0;
  double final_loss = 0.0;

  [[nodiscard]] bool retained() const { return reason.empty(); }
};

/// Trains a fresh network built from `net` (dimensions taken from `data`),
/// catching divergence. `record` is empty when the trial diverged.
struct TrialRun {
  TrialStatus status;
  std::optional<Network> network;
  TrainingRecord record;
};
TrialRun run_trial(const NetworkConfig& net, const TrainSchedule& schedule, const Dataset& data,
                   int trial, const Probe& probe = {}, bool require_convergence = true);

/// Runs `count` independent jobs on up to `workers` threads; results keep
/// their index order.
template <class T>
std::vector<T> parallel_map(int count, int workers, const std::function<T(int)>& job) {
  std::vector<std::optional<T>> slots(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        slots[static_cast<std::size_t>(i)].emplace(job(i));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < std::min(workers, count); ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  std::vector<T> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

struct TwoPointResult {
  TrialRun run;
  Trajectory observed;
  EffectiveParams partial;  ///< dx2 and dyT2 of the task
  std::vector<FitResult> fits;  ///< one per requested variant
  double energy = 0.0;

  [[nodiscard]] const FitResult& fit(RhsVariant v) const;
  [[nodiscard]] double normalized(RhsVariant v) const { return fit(v).fit_loss / energy; }
};

/// Two-point training at (dx, dy) followed by fits of `variants`.
TwoPointResult two_point_experiment(const NetworkConfig& net, const TrainSchedule& schedule,
                                    double dx, double dy, std::span<const RhsVariant> variants,
                                    const FitOptions& fit_options, bool fit_ybar, int trial = 0);

/// Loss of the pair with the output-mean contribution removed,
/// loss - ybar_dev2 / 2, at every recorded epoch.
std::vector<double> pair_loss(const TrainingRecord& record);

struct PlateauReport {
  double window_change = 0.0;  ///< max |v_i / v_0 - 1| over the leading window
  double final_ratio = 0.0;    ///< v_end / v_0
  bool plateau = false;        ///< window_change <= tolerance and later decay
  bool decays_from_start = false;  ///< strictly decreasing over the window and below 1 - tolerance at its end
};

/// Inspects the first `fraction` of the epochs of a series recorded at `epochs`.
PlateauReport detect_plateau(const std::vector<int>& epochs, const std::vector<double>& values,
                             double fraction = 0.02, double tolerance = 0.05);

/// XOR pair structure from a (trial-averaged) 4x4 squared-distance matrix in
/// dataset order (0,0), (1,0), (0,1), (1,1).
struct XorReport {
  double equal_ratio_a = 0.0;  ///< d((1,0),(0,1)) / mean unequal-target distance
  double equal_ratio_b = 0.0;  ///< d((0,0),(1,1)) / mean unequal-target distance
  double min_ratio = 0.0;      ///< smallest of all six pair ratios
  double mean_unequal = 0.0;

  [[nodiscard]] bool merged(double threshold = 0.1) const {
    return equal_ratio_a < threshold && equal_ratio_b < threshold;
  }
};
XorReport xor_report(const DistanceMatrix& d);

/// Representation geometry of the blob task at one layer.
struct CollapseReport {
  double irrelevant_ratio[2] = {0.0, 0.0};  ///< per context: var(irrelevant) / var(relevant)
  double context_separation = 0.0;  ///< centroid distance / RMS within-context spread
};

/// `hidden` has one column per blob sample in the order produced by blobs().
CollapseReport blob_collapse(const Eigen::MatrixXd& hidden, int grid);

/// Mean of the retained matrices; throws RunError when none were retained.
DistanceMatrix average_distances(const std::vector<DistanceMatrix>& ds);

struct StructureReport {
  DistanceMatrix measured;
  DistanceMatrix theory;
  DistanceMatrix weighted;
  double pearson_raw = 0.0;
  double pearson_weighted = 0.0;
  double pearson_weighted_off_block = 0.0;
};

/// Rich-regime prediction against a measured matrix: theory rescaled to the
/// measured median, exponentially weighed, then correlated.
StructureReport structure_report(const DistanceMatrix& measured, const Dataset& data,
                                 std::span<const std::size_t> subset);

/// Number of adjacent pairs that break the requested monotone order.
int inversions(const std::vector<double>& xs, bool nondecreasing);

struct RunSummary {
  std::filesystem::path directory;
  std::filesystem::path manifest;
  int trials_total = 0;
  int trials_discarded = 0;
};

/// Executes the configured experiment and writes its artifacts into a new
/// directory under `output_root` named by timestamp and seed.
RunSummary run(const ExperimentConfig& config, const std::filesystem::path& output_root);

/// Version string compiled into the library.
std::string library_version();

}  // namespace reprdyn
