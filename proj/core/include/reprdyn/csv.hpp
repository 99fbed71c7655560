#pragma once

// Plain-text artifact formats. Every real number is written with 17
// significant digits so a write/read round trip is exact.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "reprdyn/analysis.hpp"
#include "reprdyn/datasets.hpp"
#include "reprdyn/network.hpp"
#include "reprdyn/theory.hpp"

namespace reprdyn {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_double(double v);

/// Header `t,dh2,dy2,w[,loss]`. The reader also accepts training records
/// (`epoch,loss,dh2,dy2,w`) that carry probe values.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& in);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

/// Header `epoch,loss,dh2,dy2,w`; probe columns are empty without probes.
void write_record_csv(const std::filesystem::path& path, const TrainingRecord& record);

/// Header is `label` followed by the labels (or indices); one row per item.
void write_distance_csv(const std::filesystem::path& path, const DistanceMatrix& d);
DistanceMatrix read_distance_csv(const std::filesystem::path& path);

/// Header `label,x,y` (further axes appended as z2, z3, ...).
void write_mds_csv(const std::filesystem::path& path, const MdsResult& mds,
                   const std::vector<std::string>& labels);

/// Header `x0..,y0..`, one row per sample.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

}  // namespace reprdyn
