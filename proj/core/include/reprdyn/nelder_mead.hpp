#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace reprdyn {

struct NelderMeadOptions {
  double initial_step = 1.0;   ///< edge length of the starting simplex
  double diameter_tol = 1e-6;  ///< converged once the simplex is this small
  std::size_t max_evals = 2000;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;  ///< diameter criterion met before the evaluation cap
};

/// Downhill simplex (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
/// Non-finite objective values are treated as +infinity.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, const NelderMeadOptions& options = {});

}  // namespace reprdyn
