#include "reprdyn/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

#include <json.hpp>

#include "reprdyn/nelder_mead.hpp"
#include "reprdyn/rng.hpp"

namespace reprdyn {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_same_grid(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) throw TheoryError("fit_loss: time grids differ in length");
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double tol = 1e-12 * std::max(1.0, std::abs(a.times[i]));
    if (std::abs(a.times[i] - b.times[i]) > tol) {
      throw TheoryError("fit_loss: time grids differ at sample " + std::to_string(i));
    }
  }
}

template <class F>
double trapezoid(const std::vector<double>& t, F&& value) {
  double sum = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    sum += 0.5 * (t[i] - t[i - 1]) * (value(i - 1) + value(i));
  }
  return sum;
}

}  // namespace

double fit_loss(const Trajectory& observed, const Trajectory& theory) {
  check_same_grid(observed, theory);
  return trapezoid(observed.times, [&](std::size_t i) {
    const TheoryState& a = observed.states[i];
    const TheoryState& b = theory.states[i];
    return (a.dh2 - b.dh2) * (a.dh2 - b.dh2) + (a.dy2 - b.dy2) * (a.dy2 - b.dy2) +
           (a.w - b.w) * (a.w - b.w);
  });
}

double trajectory_energy(const Trajectory& traj) {
  return trapezoid(traj.times, [&](std::size_t i) {
    const TheoryState& s = traj.states[i];
    return s.dh2 * s.dh2 + s.dy2 * s.dy2 + s.w * s.w;
  });
}

double loss_fit_loss(const std::vector<double>& times, const std::vector<double>& observed,
                     const std::vector<double>& theory) {
  if (observed.size() != times.size() || theory.size() != times.size()) {
    throw TheoryError("loss_fit_loss: length mismatch");
  }
  return trapezoid(times, [&](std::size_t i) {
    return (observed[i] - theory[i]) * (observed[i] - theory[i]);
  });
}

EffectiveParams FitResult::params(const EffectiveParams& partial) const {
  EffectiveParams p = partial;
  p.inv_tau_h = inv_tau_h;
  p.inv_tau_y = inv_tau_y;
  p.inv_tau_ybar = inv_tau_ybar;
  return p;
}

IntegrationResult theory_on_grid(const Trajectory& observed, const EffectiveParams& params,
                                 RhsVariant variant, const IntegratorOptions& options) {
  if (observed.empty()) throw TheoryError("theory_on_grid: empty trajectory");
  const double t0 = observed.times.front();
  std::vector<double> local(observed.times.size());
  for (std::size_t i = 0; i < local.size(); ++i) local[i] = observed.times[i] - t0;
  IntegrationResult r =
      integrate(observed.states.front(), params, variant, local.back(), local, options);
  // Report on the caller's clock.
  for (std::size_t i = 0; i < r.trajectory.times.size(); ++i) {
    r.trajectory.times[i] = observed.times[i];
  }
  return r;
}

FitResult fit_rates(const Trajectory& observed, const EffectiveParams& params_partial,
                    RhsVariant variant, bool fit_ybar, const FitOptions& opt) {
  observed.validate();
  if (observed.empty()) throw TheoryError("fit_rates: empty trajectory");
  if (fit_ybar && !observed.has_loss()) throw TheoryError("fit_rates: no loss channel to fit");

  FitResult res;
  res.variant = variant;
  res.starts = opt.starts;
  res.grid_points = observed.size();
  res.grid_spacing = observed.size() > 1
                         ? (observed.times.back() - observed.times.front()) /
                               static_cast<double>(observed.size() - 1)
                         : 0.0;

  // A trajectory starting at (or below) the singular point carries no rate
  // information: the objective is undefined everywhere.
  if (!(observed.states.front().dh2 > opt.integrator.floor)) {
    res.inv_tau_h = res.inv_tau_y = std::sqrt(opt.rate_min * opt.rate_max);
    res.fit_loss = kInf;
    res.converged = false;
    return res;
  }

  auto objective = [&](const std::vector<double>& log_rates) {
    EffectiveParams p = params_partial;
    p.inv_tau_h = std::exp(log_rates[0]);
    p.inv_tau_y = std::exp(log_rates[1]);
    if (!std::isfinite(p.inv_tau_h) || !std::isfinite(p.inv_tau_y) || p.inv_tau_h <= 0.0 ||
        p.inv_tau_y <= 0.0) {
      return kInf;
    }
    const IntegrationResult r = theory_on_grid(observed, p, variant, opt.integrator);
    if (!r.ok()) return kInf;
    return fit_loss(observed, r.trajectory);
  };

  Pcg32 rng(opt.seed, 0x66697474ULL);
  const double lo = std::log(opt.rate_min), hi = std::log(opt.rate_max);
  NelderMeadOptions nm;
  nm.diameter_tol = opt.simplex_tol;
  nm.max_evals = opt.max_evals;

  NelderMeadResult best;
  best.value = kInf;
  bool have_best = false;
  for (int s = 0; s < opt.starts; ++s) {
    const double a = lo + (hi - lo) * rng.uniform();
    const double b = lo + (hi - lo) * rng.uniform();
    NelderMeadResult r = nelder_mead(objective, {a, b}, nm);
    res.evaluations += r.evaluations;
    const bool usable = std::isfinite(r.value);
    if (r.converged && usable) ++res.converged_starts;
    if (!have_best || r.value < best.value) {
      best = std::move(r);
      have_best = true;
    }
  }
  res.inv_tau_h = std::exp(best.x[0]);
  res.inv_tau_y = std::exp(best.x[1]);
  // Recomputed rather than cached from the optimiser.
  res.fit_loss = objective(best.x);
  res.converged = res.converged_starts > 0 && std::isfinite(res.fit_loss);

  if (fit_ybar && std::isfinite(res.fit_loss)) {
    EffectiveParams p = res.params(params_partial);
    const Trajectory theory = theory_on_grid(observed, p, variant, opt.integrator).value();
    // Output-mean deviation at t0 recovered from the first observed loss value.
    const TheoryState& s0 = observed.states.front();
    const double pair0 = 0.25 * (s0.w + 0.5 * (params_partial.dyT2 - s0.dy2));
    const double q0 = std::max(0.0, 2.0 * (observed.loss.front() - pair0));
    std::vector<double> shifted(theory.times.size());
    for (std::size_t i = 0; i < shifted.size(); ++i) {
      shifted[i] = theory.times[i] - theory.times.front();
    }
    Trajectory local = theory;
    local.times = shifted;

    auto loss_objective = [&](const std::vector<double>& log_rate) {
      p.inv_tau_ybar = std::exp(log_rate[0]);
      if (!std::isfinite(*p.inv_tau_ybar) || *p.inv_tau_ybar <= 0.0) return kInf;
      return loss_fit_loss(observed.times, observed.loss, loss_curve(local, p, q0));
    };
    NelderMeadResult best_ybar;
    best_ybar.value = kInf;
    bool have = false;
    for (int s = 0; s < opt.starts; ++s) {
      NelderMeadResult r = nelder_mead(loss_objective, {lo + (hi - lo) * rng.uniform()}, nm);
      res.evaluations += r.evaluations;
      if (!have || r.value < best_ybar.value) {
        best_ybar = std::move(r);
        have = true;
      }
    }
    res.inv_tau_ybar = std::exp(best_ybar.x[0]);
    res.loss_fit_loss = loss_objective(best_ybar.x);
  }
  return res;
}

std::vector<FitResult> ablation(const Trajectory& observed, const EffectiveParams& params_partial,
                                const FitOptions& options) {
  std::vector<FitResult> out(kAllVariants.size());
  auto fit_one = [&](std::size_t i) {
    try {
      return fit_rates(observed, params_partial, kAllVariants[i], false, options);
    } catch (const TheoryError&) {
      FitResult failed;
      failed.variant = kAllVariants[i];
      failed.fit_loss = kInf;
      failed.converged = false;
      return failed;
    }
  };
  if (options.workers <= 1) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fit_one(i);
    return out;
  }
  std::vector<std::future<FitResult>> pending;
  for (std::size_t i = 0; i < out.size(); ++i) {
    pending.push_back(std::async(std::launch::async, fit_one, i));
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pending[i].get();
  return out;
}

std::string to_json(const FitResult& r) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::json j;
  j["variant"] = std::string(to_string(r.variant));
  j["inv_tau_h"] = num(r.inv_tau_h);
  j["inv_tau_y"] = num(r.inv_tau_y);
  j["inv_tau_ybar"] = r.inv_tau_ybar ? num(*r.inv_tau_ybar) : nlohmann::json(nullptr);
  j["fit_loss"] = num(r.fit_loss);
  j["loss_fit_loss"] = r.loss_fit_loss ? num(*r.loss_fit_loss) : nlohmann::json(nullptr);
  j["converged"] = r.converged;
  j["starts"] = r.starts;
  j["converged_starts"] = r.converged_starts;
  j["evaluations"] = r.evaluations;
  j["grid_points"] = r.grid_points;
  j["grid_spacing_epochs"] = r.grid_spacing;
  return j.dump(2);
}

}  // namespace reprdyn
