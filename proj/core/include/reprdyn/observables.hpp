#pragma once

#include <Eigen/Dense>

#include "reprdyn/network.hpp"
#include "reprdyn/pair_observation.hpp"
#include "reprdyn/theory.hpp"

namespace reprdyn {

/// Evaluates the network (eval mode) at x1 and x2 and returns the observables.
/// The output mean is taken as the midpoint of the two predictions.
PairObservation measure_pair(const Network& net, const Eigen::VectorXd& x1,
                             const Eigen::VectorXd& y1, const Eigen::VectorXd& x2,
                             const Eigen::VectorXd& y2);

/// Probe for `train` that measures the dataset's pair_of_interest.
Probe pair_probe(const Dataset& data);
Probe pair_probe(const Dataset& data, std::size_t first, std::size_t second);

/// Repackages probe outputs as a theory trajectory (times in epochs). The loss
/// channel carries the recorded dataset loss.
Trajectory observed_trajectory(const TrainingRecord& record);

}  // namespace reprdyn
