#include "reprdyn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace reprdyn {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Measured: return "measured";
    case Provenance::Theory: return "theory";
    case Provenance::TheoryWeighted: return "theory_weighted";
  }
  return "?";
}

std::vector<double> DistanceMatrix::upper_triangle() const {
  std::vector<double> v;
  const Eigen::Index n = size();
  v.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) v.push_back(entries(i, j));
  }
  return v;
}

void DistanceMatrix::validate(double tol) const {
  if (entries.rows() != entries.cols()) throw AnalysisError("distance matrix is not square");
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != size()) {
    throw AnalysisError("distance matrix label count mismatch");
  }
  for (Eigen::Index i = 0; i < size(); ++i) {
    if (entries(i, i) != 0.0) throw AnalysisError("distance matrix diagonal is not zero");
    for (Eigen::Index j = i + 1; j < size(); ++j) {
      const double scale = std::max({1.0, std::abs(entries(i, j)), std::abs(entries(j, i))});
      if (std::abs(entries(i, j) - entries(j, i)) > tol * scale) {
        throw AnalysisError("distance matrix is not symmetric");
      }
    }
  }
}

DistanceMatrix squared_distances(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.cols();
  DistanceMatrix d;
  d.entries.setZero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (points.col(i) - points.col(j)).squaredNorm();
      d.entries(i, j) = v;
      d.entries(j, i) = v;
    }
  }
  return d;
}

namespace {

Eigen::MatrixXd columns(const Eigen::MatrixXd& m, std::span<const std::size_t> subset) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(subset.size()));
  for (std::size_t k = 0; k < subset.size(); ++k) {
    if (subset[k] >= static_cast<std::size_t>(m.cols())) {
      throw AnalysisError("subset index out of range");
    }
    out.col(static_cast<Eigen::Index>(k)) = m.col(static_cast<Eigen::Index>(subset[k]));
  }
  return out;
}

std::vector<std::string> subset_labels(const Dataset& data, std::span<const std::size_t> subset) {
  std::vector<std::string> labels;
  if (data.labels.size() != data.size()) return labels;
  for (std::size_t k : subset) labels.push_back(std::to_string(data.labels[k]));
  return labels;
}

double median(std::vector<double> v) {
  if (v.empty()) throw AnalysisError("median of an empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

DistanceMatrix pairwise_distances(const Network& net, const Dataset& data,
                                  std::span<const std::size_t> subset) {
  DistanceMatrix d = squared_distances(net.hidden(columns(data.inputs, subset)));
  d.provenance = Provenance::Measured;
  d.labels = subset_labels(data, subset);
  return d;
}

DistanceMatrix theory_distance_matrix(const Dataset& data, std::span<const std::size_t> subset,
                                      double rate_ratio) {
  if (!(rate_ratio > 0.0)) throw AnalysisError("theory_distance_matrix: rate_ratio must be positive");
  const Eigen::MatrixXd x = columns(data.inputs, subset);
  const Eigen::MatrixXd y = columns(data.targets, subset);
  const auto n = static_cast<Eigen::Index>(subset.size());
  const double scale = std::sqrt(rate_ratio);
  DistanceMatrix d;
  d.provenance = Provenance::Theory;
  d.entries.setZero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = scale * (x.col(i) - x.col(j)).norm() * (y.col(i) - y.col(j)).norm();
      d.entries(i, j) = v;
      d.entries(j, i) = v;
    }
  }
  d.labels = subset_labels(data, subset);
  return d;
}

DistanceMatrix rescale_to_median(const DistanceMatrix& theory, const DistanceMatrix& reference) {
  const double m_theory = median(theory.upper_triangle());
  const double m_ref = median(reference.upper_triangle());
  if (!(m_theory > 0.0)) throw AnalysisError("rescale_to_median: theory median is not positive");
  DistanceMatrix out = theory;
  out.entries *= m_ref / m_theory;
  return out;
}

DistanceMatrix exponential_weighing(const DistanceMatrix& theory) {
  if (theory.provenance != Provenance::Theory) {
    throw AnalysisError("exponential_weighing: expects an unweighted theory matrix");
  }
  const Eigen::MatrixXd e = (-theory.entries.array()).exp().matrix();
  DistanceMatrix out;
  out.provenance = Provenance::TheoryWeighted;
  out.labels = theory.labels;
  out.entries = e * theory.entries * e;
  // Symmetrise away rounding, then self-distances are zero by definition.
  out.entries = 0.5 * (out.entries + out.entries.transpose()).eval();
  out.entries.diagonal().setZero();
  return out;
}

double pearson(const DistanceMatrix& a, const DistanceMatrix& b, bool exclude_same_label) {
  if (a.size() != b.size()) throw AnalysisError("pearson: shape mismatch");
  const std::vector<std::string>& labels = !a.labels.empty() ? a.labels : b.labels;
  if (exclude_same_label && static_cast<Eigen::Index>(labels.size()) != a.size()) {
    throw AnalysisError("pearson: label mask requested but no labels present");
  }
  std::vector<double> va, vb;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    for (Eigen::Index j = i + 1; j < a.size(); ++j) {
      if (exclude_same_label && labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
        continue;
      }
      va.push_back(a.entries(i, j));
      vb.push_back(b.entries(i, j));
    }
  }
  if (va.size() < 2) throw AnalysisError("pearson: fewer than two entries");
  const auto n = static_cast<double>(va.size());
  const double ma = std::accumulate(va.begin(), va.end(), 0.0) / n;
  const double mb = std::accumulate(vb.begin(), vb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t k = 0; k < va.size(); ++k) {
    sab += (va[k] - ma) * (vb[k] - mb);
    saa += (va[k] - ma) * (va[k] - ma);
    sbb += (vb[k] - mb) * (vb[k] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw AnalysisError("pearson: undefined for a constant argument");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

MdsResult classical_mds(const DistanceMatrix& d, int dims) {
  if (dims < 1) throw AnalysisError("classical_mds: dims must be positive");
  const Eigen::Index n = d.size();
  const Eigen::MatrixXd j =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  const Eigen::MatrixXd b = -0.5 * j * d.entries * j;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (b + b.transpose()));
  if (eig.info() != Eigen::Success) throw AnalysisError("classical_mds: eigensolver failed");

  // Descending eigenvalue, ties by index.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return ev(x) > ev(y); });

  MdsResult r;
  r.coords.setZero(n, dims);
  r.eigenvalues.setZero(dims);
  // Eigenvalues below this are numerical noise of a zero eigenvalue.
  const double noise = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (int k = 0; k < dims; ++k) {
    if (k >= n || ev(order[static_cast<std::size_t>(k)]) < -noise) {
      r.padded = true;
      continue;
    }
    const Eigen::Index idx = order[static_cast<std::size_t>(k)];
    const double lambda = ev(idx) > noise ? ev(idx) : 0.0;
    r.eigenvalues(k) = lambda;
    Eigen::VectorXd axis = eig.eigenvectors().col(idx) * std::sqrt(lambda);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(axis(i)) > 1e-12 * std::max(1.0, axis.cwiseAbs().maxCoeff())) {
        if (axis(i) < 0.0) axis = -axis;
        break;
      }
    }
    r.coords.col(k) = axis;
  }
  return r;
}

}  // namespace reprdyn
