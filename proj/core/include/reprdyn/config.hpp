#pragma once

// Experiment configuration. The text format is one `key = value` per line
// with `#` comments; keys are dotted (`network.units`). Lists are
// comma-separated. Omitted keys take the experiment's desk-scale defaults.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "reprdyn/network.hpp"
#include "reprdyn/theory.hpp"

namespace reprdyn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Experiment {
  Simulate,
  TwoPoint,
  InitSweep,
  GridSweep,
  Xor,
  Blobs,
  Mnist,
  DepthSweep,
  Ablation,
};

std::string_view to_string(Experiment e);
std::optional<Experiment> parse_experiment(std::string_view name);

struct TheoryOverrides {
  std::optional<double> dx2;
  std::optional<double> dyT2;
  std::optional<double> inv_tau_h;
  std::optional<double> inv_tau_y;
  std::optional<double> inv_tau_ybar;
  TheoryState initial{1e-3, 1e-6, 0.0};  ///< Simulate only
  double t_end = 6000.0;
  int samples = 601;
  RhsVariant variant = RhsVariant::True;

  friend bool operator==(const TheoryOverrides&, const TheoryOverrides&) = default;
};

struct DataConfig {
  double dx = 0.5;
  double dy = 1.0;
  int blob_grid = 30;
  int blob_image = 5;
  double blob_variance = 1.0;
  std::string mnist_images;
  std::string mnist_labels;
  std::size_t mnist_count = 1000;     ///< leading items trained on; 0 = all
  std::size_t structure_items = 100;  ///< first-n-sorted subset for distance matrices

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct SweepConfig {
  std::vector<double> gains;
  std::vector<double> learning_rates;  ///< empty, or one per gain
  std::vector<double> dx;
  std::vector<double> dy;
  std::vector<int> hidden_indices;

  friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

struct FitConfig {
  int starts = 16;
  bool ybar = true;  ///< also fit the output-mean rate to the loss channel

  friend bool operator==(const FitConfig&, const FitConfig&) = default;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::Simulate;
  NetworkConfig network;  ///< input/output dims are taken from the dataset
  TrainSchedule schedule;
  TheoryOverrides theory;
  DataConfig data;
  SweepConfig sweep;
  FitConfig fit;
  int trials = 1;
  int workers = 1;
  std::string output_dir;  ///< empty: chosen by the caller
  std::uint64_t seed = 0;
  bool paper_scale = false;

  void validate() const;
};

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

/// Desk-scale defaults for one experiment.
ExperimentConfig default_config(Experiment e);

/// The paper's network sizes and schedules in place of the desk-scale ones.
ExperimentConfig with_paper_scale(ExperimentConfig config);

/// Throws ConfigError with a line number on syntax errors, unknown keys and
/// range violations.
ExperimentConfig parse_config(std::string_view text);

/// Every key, one per line, in a form parse_config reads back exactly.
std::string serialize(const ExperimentConfig& config);

}  // namespace reprdyn
