#pragma once

// Fits the effective rates of the two-point theory to a measured trajectory by
// minimising the integrated squared discrepancy in (dh2, dy2, w).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "reprdyn/theory.hpp"

namespace reprdyn {

/// Trapezoid approximation of the summed integrals of squared channel
/// differences. Both trajectories must share the time grid.
double fit_loss(const Trajectory& observed, const Trajectory& theory);

/// Trapezoid integral of dh2^2 + dy2^2 + w^2; normalises fit_loss.
double trajectory_energy(const Trajectory& traj);

/// Trapezoid integral of the squared difference between two loss series.
double loss_fit_loss(const std::vector<double>& times, const std::vector<double>& observed,
                     const std::vector<double>& theory);

struct FitOptions {
  int starts = 16;
  double rate_min = 1e-6;  ///< start points are log-uniform in [rate_min, rate_max]
  double rate_max = 1e2;
  double simplex_tol = 1e-6;  ///< in log-rate space
  std::size_t max_evals = 2000;
  std::uint64_t seed = 0x5eed;
  IntegratorOptions integrator{1e-8, 1e-12, kSingularityFloor, 200'000};
  int workers = 1;  ///< variants fitted concurrently by `ablation`
};

struct FitResult {
  double inv_tau_h = 0.0;
  double inv_tau_y = 0.0;
  std::optional<double> inv_tau_ybar;
  double fit_loss = 0.0;
  std::optional<double> loss_fit_loss;  ///< set when the output-mean rate was fitted
  RhsVariant variant = RhsVariant::True;
  bool converged = false;
  int starts = 0;
  int converged_starts = 0;
  std::size_t evaluations = 0;
  std::size_t grid_points = 0;
  double grid_spacing = 0.0;  ///< mean probe spacing in epochs

  [[nodiscard]] EffectiveParams params(const EffectiveParams& partial) const;
};

/// Integrates the theory from the first observed sample over the observed
/// grid. The returned trajectory's times equal observed.times.
IntegrationResult theory_on_grid(const Trajectory& observed, const EffectiveParams& params,
                                 RhsVariant variant,
                                 const IntegratorOptions& options = IntegratorOptions{});

/// Multi-start Nelder-Mead over (log 1/tau_h, log 1/tau_y); with fit_ybar a
/// second stage fits 1/tau_ybar to the observed loss channel at the fitted pair.
FitResult fit_rates(const Trajectory& observed, const EffectiveParams& params_partial,
                    RhsVariant variant, bool fit_ybar = false, const FitOptions& options = {});

/// One independent fit per variant, ordered as kAllVariants.
std::vector<FitResult> ablation(const Trajectory& observed, const EffectiveParams& params_partial,
                                const FitOptions& options = {});

/// JSON record: rates, fit loss, variant, start count, grid resolution.
std::string to_json(const FitResult& r);

}  // namespace reprdyn
