#pragma once

namespace reprdyn {

/// Theory observables measured on a live network for one datapoint pair.
struct PairObservation {
  double dh2 = 0.0;        ///< ||h(x2) - h(x1)||^2 at the probe layer
  double dy2 = 0.0;        ///< ||f(x2) - f(x1)||^2
  double w = 0.0;          ///< dy2 - (f(x2) - f(x1)).(y2 - y1)
  double ybar_dev2 = 0.0;  ///< ||(f(x1) + f(x2))/2 - (y1 + y2)/2||^2
  double loss = 0.0;       ///< 1/2 mean squared error over the pair
};

}  // namespace reprdyn
