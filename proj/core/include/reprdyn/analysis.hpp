#pragma once

// Representational-structure analytics over squared pairwise distances.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "reprdyn/datasets.hpp"
#include "reprdyn/network.hpp"

namespace reprdyn {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Provenance { Measured, Theory, TheoryWeighted };
std::string_view to_string(Provenance p);

/// Symmetric, zero-diagonal matrix of squared distances.
struct DistanceMatrix {
  Eigen::MatrixXd entries;
  Provenance provenance = Provenance::Measured;
  std::vector<std::string> labels;

  [[nodiscard]] Eigen::Index size() const { return entries.rows(); }
  /// Strict upper triangle, row-major.
  [[nodiscard]] std::vector<double> upper_triangle() const;
  void validate(double tol = 1e-12) const;
};

/// ||h(x_i) - h(x_j)||^2 at the probe layer, eval mode.
DistanceMatrix pairwise_distances(const Network& net, const Dataset& data,
                                  std::span<const std::size_t> subset);

/// Squared distances between the columns of `points`.
DistanceMatrix squared_distances(const Eigen::MatrixXd& points);

/// Rich-regime prediction sqrt(rate_ratio) ||x_i - x_j|| ||y_i - y_j||, with
/// rate_ratio = tau_y / tau_h.
DistanceMatrix theory_distance_matrix(const Dataset& data, std::span<const std::size_t> subset,
                                      double rate_ratio);

/// Scales a theory matrix so its strict-upper-triangle median matches the
/// reference's.
DistanceMatrix rescale_to_median(const DistanceMatrix& theory, const DistanceMatrix& reference);

/// pred = E D E with E = exp(-D) elementwise, diagonal reset to zero.
DistanceMatrix exponential_weighing(const DistanceMatrix& theory);

/// Product-moment correlation over the strict upper triangle. With
/// `exclude_same_label`, pairs whose labels match are left out.
double pearson(const DistanceMatrix& a, const DistanceMatrix& b, bool exclude_same_label = false);

struct MdsResult {
  Eigen::MatrixXd coords;  ///< n x dims
  Eigen::VectorXd eigenvalues;  ///< top `dims`, descending
  bool padded = false;  ///< fewer than `dims` non-negative eigenvalues
};

/// Classical (Torgerson) MDS of a squared-distance matrix. Each axis is signed
/// so that its first nonzero coordinate is positive.
MdsResult classical_mds(const DistanceMatrix& d, int dims = 2);

}  // namespace reprdyn
