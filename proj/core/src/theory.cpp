#include "reprdyn/theory.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace reprdyn {

void EffectiveParams::validate() const {
  if (!(dx2 >= 0.0) || !(dyT2 >= 0.0)) {
    throw TheoryError("effective params: separations must be non-negative");
  }
  if (!(inv_tau_h > 0.0) || !(inv_tau_y > 0.0)) {
    throw TheoryError("effective params: rates must be positive");
  }
  if (inv_tau_ybar && !(*inv_tau_ybar > 0.0)) {
    throw TheoryError("effective params: inv_tau_ybar must be positive");
  }
}

std::string_view to_string(RhsVariant v) {
  switch (v) {
    case RhsVariant::True: return "True";
    case RhsVariant::SquaredW: return "SquaredW";
    case RhsVariant::FactorTwo: return "FactorTwo";
    case RhsVariant::SignFlip: return "SignFlip";
    case RhsVariant::DroppedTerm: return "DroppedTerm";
  }
  return "?";
}

std::optional<RhsVariant> parse_variant(std::string_view name) {
  for (RhsVariant v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  return std::nullopt;
}

std::string_view to_string(IntegrationStatus s) {
  switch (s) {
    case IntegrationStatus::Ok: return "ok";
    case IntegrationStatus::Singular: return "singular";
    case IntegrationStatus::StepFailure: return "step-failure";
  }
  return "?";
}

StateDerivative rhs(const TheoryState& s, const EffectiveParams& p, RhsVariant variant) {
  if (!(s.dh2 > kSingularityFloor)) {
    std::ostringstream msg;
    msg << "rhs: dh2 = " << s.dh2 << " is at or below the singularity floor";
    throw SingularityError(msg.str());
  }
  const double enc = p.inv_tau_h * p.dx2;  // (1/tau_h) ||x2 - x1||^2
  const double dec = p.inv_tau_y;

  StateDerivative d;
  d.d_dh2 = -enc * (variant == RhsVariant::SquaredW ? s.w * s.w : s.w);

  const double enc_dy = variant == RhsVariant::DroppedTerm ? 0.0 : enc * s.dy2 / s.dh2;
  d.d_dy2 = -s.w * (dec * s.dh2 + enc_dy);
  if (variant == RhsVariant::FactorTwo) d.d_dy2 *= 2.0;

  const double dec_w = -0.5 * dec * (3.0 * s.w - s.dy2 + p.dyT2) * s.dh2;
  const double enc_w = 0.5 * enc * (s.dy2 + s.w) * s.w / s.dh2;
  d.d_w = variant == RhsVariant::SignFlip ? dec_w + enc_w : dec_w - enc_w;
  return d;
}

void Trajectory::validate() const {
  if (states.size() != times.size()) {
    throw TheoryError("trajectory: times and states differ in length");
  }
  if (!loss.empty() && loss.size() != times.size()) {
    throw TheoryError("trajectory: loss channel length mismatch");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw TheoryError("trajectory: times must be strictly increasing");
    }
  }
}

const Trajectory& IntegrationResult::value() const& {
  if (status == IntegrationStatus::Singular) {
    throw SingularityError("integrate: dh2 reached the singularity floor at t = " +
                           std::to_string(t_stop));
  }
  if (status == IntegrationStatus::StepFailure) {
    throw TheoryError("integrate: step size underflow at t = " + std::to_string(t_stop));
  }
  return trajectory;
}

Trajectory IntegrationResult::value() && {
  static_cast<const IntegrationResult&>(*this).value();
  return std::move(trajectory);
}

std::vector<double> loss_curve(const Trajectory& traj, const EffectiveParams& params,
                               double ybar_dev2_at_0) {
  if (!params.inv_tau_ybar) {
    throw TheoryError("loss_curve: inv_tau_ybar is required");
  }
  if (traj.empty()) throw TheoryError("loss_curve: empty trajectory");
  const double rate = *params.inv_tau_ybar;
  std::vector<double> out;
  out.reserve(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const TheoryState& s = traj.states[i];
    const double mean_term = 0.5 * ybar_dev2_at_0 * std::exp(-2.0 * rate * traj.times[i]);
    const double pair_term = 0.25 * (s.w + 0.5 * (params.dyT2 - s.dy2));
    out.push_back(mean_term + pair_term);
  }
  return out;
}

double stable_distance(double a_high, double a_low) {
  const double root = std::sqrt(a_high * a_high + 4.0 * a_low * a_low);
  if (a_high >= 0.0) return 0.5 * (a_high + root);
  // Same value, rewritten to avoid cancellation when a_high is very negative.
  const double denom = root - a_high;
  return denom > 0.0 ? 2.0 * a_low * a_low / denom : 0.0;
}

FixedPointReport fixed_points(const TheoryState& initial, const EffectiveParams& params) {
  params.validate();
  if (!(initial.dh2 > 0.0)) throw TheoryError("fixed_points: initial dh2 must be positive");

  const double ratio = params.rate_ratio();  // tau_y / tau_h
  FixedPointReport r;
  r.a_high = initial.dh2 - ratio * params.dx2 * initial.dy2 / initial.dh2;
  r.a_low = std::sqrt(ratio * params.dx2 * params.dyT2);
  r.dh2_stable = stable_distance(r.a_high, r.a_low);

  const double root = std::sqrt(r.a_high * r.a_high + 4.0 * r.a_low * r.a_low);
  const double iy = params.inv_tau_y;
  r.trace = -iy * (0.5 * r.a_high + root);
  const double s = r.a_high + root;
  r.determinant = 0.25 * iy * iy * (2.0 * r.a_low * r.a_low + 0.5 * s * s);
  r.unstable_eigenvalues = {iy * 0.5 * (r.a_high + root), iy * 0.5 * (r.a_high - root)};
  return r;
}

TheoryState solve_identical_outputs(const TheoryState& initial, const EffectiveParams& params,
                                    double t) {
  params.validate();
  if (params.dyT2 != 0.0) {
    throw TheoryError("solve_identical_outputs: requires identical targets (dyT2 = 0)");
  }
  if (!(initial.dh2 > 0.0)) {
    throw TheoryError("solve_identical_outputs: initial dh2 must be positive");
  }
  if (std::abs(initial.w - initial.dy2) > 1e-12 * std::max(1.0, std::abs(initial.dy2))) {
    throw TheoryError("solve_identical_outputs: identical targets force w = dy2");
  }
  if (t < 0.0) throw TheoryError("solve_identical_outputs: negative time");

  // Logistic (Bernoulli) solution with rate a_high / tau_y. Written through
  // q = expm1(-x)/a_high so that a_high -> 0 stays finite.
  const double a_high = fixed_points(initial, params).a_high;
  const double x = a_high * params.inv_tau_y * t;
  double q;
  if (std::abs(x) < 1e-5) {
    q = -params.inv_tau_y * t * (1.0 - x / 2.0 + x * x / 6.0);
  } else {
    q = std::expm1(-x) / a_high;
  }
  const double den = 1.0 + (a_high - initial.dh2) * q;
  TheoryState s;
  s.dh2 = initial.dh2 / den;
  s.dy2 = initial.dy2 * std::exp(-x) / (den * den);
  s.w = s.dy2;
  return s;
}

TheoryState LazyRescaling::to_physical(const TheoryState& s) const {
  const double g = time_scale;
  return {g * s.dh2, g * g * s.dy2, g * g * s.w};
}

LazyRescaling lazy_rescale(const TheoryState& initial, const EffectiveParams& params, double gain) {
  if (!(gain > 0.0)) throw TheoryError("lazy_rescale: gain must be positive");
  const double g2 = gain * gain;
  LazyRescaling r;
  r.state = {initial.dh2 / gain, initial.dy2 / g2, initial.w / g2};
  r.params = params;
  r.params.dyT2 = params.dyT2 / g2;
  r.time_scale = gain;
  return r;
}

namespace {

double cdf_argument(double h, double gain, double a_low, double dx2) {
  if (!(h > 0.0) || !(gain > 0.0)) {
    throw TheoryError("final_distance_cdf: h and gain must be positive");
  }
  return (h - a_low * a_low / h) / (std::numbers::sqrt2 * dx2 * gain);
}

}  // namespace

double final_distance_cdf(double h, double gain, double a_low, double dx2) {
  const double z = cdf_argument(h, gain, a_low, dx2);
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double final_distance_density(double h, double gain, double a_low, double dx2) {
  const double z = cdf_argument(h, gain, a_low, dx2);
  const double jac = (1.0 + a_low * a_low / (h * h)) / (std::numbers::sqrt2 * dx2 * gain);
  return jac * std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double conserved_quantity(const TheoryState& s, const EffectiveParams& params) {
  return s.dy2 / s.dh2 - (params.inv_tau_y / params.inv_tau_h) * s.dh2 / params.dx2;
}

}  // namespace reprdyn
