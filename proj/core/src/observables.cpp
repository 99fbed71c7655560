#include "reprdyn/observables.hpp"

namespace reprdyn {

PairObservation measure_pair(const Network& net, const Eigen::VectorXd& x1,
                             const Eigen::VectorXd& y1, const Eigen::VectorXd& x2,
                             const Eigen::VectorXd& y2) {
  if (y1.size() != net.config().output_dim || y2.size() != net.config().output_dim) {
    throw NetworkError("measure_pair: target dimension mismatch");
  }
  Eigen::MatrixXd x(x1.size(), 2);
  x.col(0) = x1;
  x.col(1) = x2;
  const ForwardCache c = net.forward_batch(x);
  const auto& h = c.post[static_cast<std::size_t>(net.config().probe_layer())];

  const Eigen::VectorXd dh = h.col(1) - h.col(0);
  const Eigen::VectorXd dy = c.output.col(1) - c.output.col(0);
  const Eigen::VectorXd dy_target = y2 - y1;
  const Eigen::VectorXd ybar_dev = 0.5 * (c.output.col(0) + c.output.col(1)) - 0.5 * (y1 + y2);

  PairObservation o;
  o.dh2 = dh.squaredNorm();
  o.dy2 = dy.squaredNorm();
  o.w = o.dy2 - dy.dot(dy_target);
  o.ybar_dev2 = ybar_dev.squaredNorm();
  o.loss = 0.25 * ((c.output.col(0) - y1).squaredNorm() + (c.output.col(1) - y2).squaredNorm());
  return o;
}

Probe pair_probe(const Dataset& data, std::size_t first, std::size_t second) {
  if (first >= data.size() || second >= data.size()) {
    throw DatasetError("pair_probe: index out of range");
  }
  const auto a = static_cast<Eigen::Index>(first);
  const auto b = static_cast<Eigen::Index>(second);
  Eigen::VectorXd x1 = data.inputs.col(a), x2 = data.inputs.col(b);
  Eigen::VectorXd y1 = data.targets.col(a), y2 = data.targets.col(b);
  return [=](const Network& net) { return measure_pair(net, x1, y1, x2, y2); };
}

Probe pair_probe(const Dataset& data) {
  if (!data.pair_of_interest) throw DatasetError(data.name + ": no pair_of_interest");
  return pair_probe(data, data.pair_of_interest->first, data.pair_of_interest->second);
}

Trajectory observed_trajectory(const TrainingRecord& record) {
  if (record.probes.empty()) throw TheoryError("observed_trajectory: record has no probes");
  if (record.probes.size() != record.epochs.size()) {
    throw TheoryError("observed_trajectory: probe and epoch counts differ");
  }
  Trajectory t;
  for (std::size_t i = 0; i < record.probes.size(); ++i) {
    const PairObservation& o = record.probes[i];
    t.push_back(static_cast<double>(record.epochs[i]), {o.dh2, o.dy2, o.w});
  }
  if (record.loss.size() == record.epochs.size()) t.loss = record.loss;
  return t;
}

}  // namespace reprdyn
