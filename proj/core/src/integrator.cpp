// Dormand-Prince 5(4) with the standard 4th-order continuous extension
// (Hairer, Norsett & Wanner, Solving ODEs I, section II.6).

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>
#include <limits>

#include "reprdyn/theory.hpp"

namespace reprdyn {
namespace {

using Vec = std::array<double, 3>;

constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

struct System {
  const EffectiveParams& params;
  RhsVariant variant;
  double floor;

  // false when the stage state is outside the domain of the right-hand side
  bool operator()(const Vec& y, Vec& dy) const {
    if (!(y[0] > floor) || !std::isfinite(y[1]) || !std::isfinite(y[2])) return false;
    const StateDerivative d = rhs({y[0], y[1], y[2]}, params, variant);
    dy = {d.d_dh2, d.d_dy2, d.d_w};
    return std::isfinite(dy[0]) && std::isfinite(dy[1]) && std::isfinite(dy[2]);
  }
};

Vec axpy(const Vec& y, double h, std::initializer_list<std::pair<double, const Vec*>> terms) {
  Vec out = y;
  for (const auto& [coef, k] : terms) {
    for (int i = 0; i < 3; ++i) out[i] += h * coef * (*k)[i];
  }
  return out;
}

double error_norm(const Vec& err, const Vec& y0, const Vec& y1, double rtol, double atol) {
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    sum += (err[i] / sc) * (err[i] / sc);
  }
  return std::sqrt(sum / 3.0);
}

// Initial step guess (Hairer's HINIT).
double initial_step(const System& f, const Vec& y0, const Vec& f0, double span, double rtol,
                    double atol) {
  double dnf = 0.0, dny = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double sk = atol + rtol * std::abs(y0[i]);
    dnf += (f0[i] / sk) * (f0[i] / sk);
    dny += (y0[i] / sk) * (y0[i] / sk);
  }
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
  h = std::min(h, span);
  Vec y1 = axpy(y0, h, {{1.0, &f0}});
  Vec f1{};
  if (!f(y1, f1)) return std::min(h * 1e-3, span);
  double der2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double sk = atol + rtol * std::abs(y0[i]);
    der2 += ((f1[i] - f0[i]) / sk) * ((f1[i] - f0[i]) / sk);
  }
  der2 = std::sqrt(der2 / 3.0) / h;
  const double der12 = std::max(std::abs(der2), std::sqrt(dnf / 3.0));
  const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.2);
  return std::min({100.0 * h, h1, span});
}

}  // namespace

IntegrationResult integrate(const TheoryState& initial, const EffectiveParams& params,
                            RhsVariant variant, double t_end,
                            std::span<const double> sample_times, double tol) {
  IntegratorOptions opts;
  opts.rtol = tol;
  return integrate(initial, params, variant, t_end, sample_times, opts);
}

IntegrationResult integrate(const TheoryState& initial, const EffectiveParams& params,
                            RhsVariant variant, double t_end,
                            std::span<const double> sample_times,
                            const IntegratorOptions& opts) {
  params.validate();
  if (!(t_end >= 0.0)) throw TheoryError("integrate: t_end must be non-negative");
  if (!(opts.rtol > 0.0) || !(opts.atol >= 0.0)) throw TheoryError("integrate: bad tolerance");
  for (std::size_t i = 0; i < sample_times.size(); ++i) {
    if (sample_times[i] < 0.0 || sample_times[i] > t_end) {
      throw TheoryError("integrate: sample time outside [0, t_end]");
    }
    if (i > 0 && !(sample_times[i] > sample_times[i - 1])) {
      throw TheoryError("integrate: sample times must be strictly increasing");
    }
  }
  if (!(initial.dh2 > opts.floor)) {
    throw SingularityError("integrate: initial dh2 is at or below the singularity floor");
  }

  std::vector<double> samples(sample_times.begin(), sample_times.end());
  if (t_end == 0.0) {
    samples.assign(1, 0.0);
  } else if (samples.empty()) {
    samples = {0.0, t_end};
  }

  IntegrationResult result;
  Trajectory& traj = result.trajectory;
  traj.times.reserve(samples.size());
  traj.states.reserve(samples.size());

  const System f{params, variant, opts.floor};
  Vec y{initial.dh2, initial.dy2, initial.w};
  double t = 0.0;
  std::size_t next = 0;
  auto emit_exact = [&](double ts, const Vec& v) {
    traj.push_back(ts, {v[0], v[1], v[2]});
  };
  while (next < samples.size() && samples[next] == 0.0) emit_exact(samples[next++], y);
  if (next == samples.size()) {
    result.t_stop = 0.0;
    return result;
  }

  Vec k1{}, k2{}, k3{}, k4{}, k5{}, k6{}, k7{};
  f(y, k1);  // domain already checked above
  double h = initial_step(f, y, k1, t_end, opts.rtol, opts.atol);
  const double h_max = t_end;
  double err_old = 1e-4;  // PI controller memory
  bool rejected_last = false;
  bool singular_reject = false;

  while (t < t_end) {
    if (result.accepted_steps + result.rejected_steps >= opts.max_steps) {
      result.status = IntegrationStatus::StepFailure;
      break;
    }
    if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
      result.status = singular_reject ? IntegrationStatus::Singular : IntegrationStatus::StepFailure;
      break;
    }
    const bool last = t + h >= t_end;
    if (last) h = t_end - t;

    bool ok = f(axpy(y, h, {{a21, &k1}}), k2) &&
              f(axpy(y, h, {{a31, &k1}, {a32, &k2}}), k3) &&
              f(axpy(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}), k4) &&
              f(axpy(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}), k5) &&
              f(axpy(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}), k6);
    Vec y_new{};
    if (ok) {
      y_new = axpy(y, h, {{a71, &k1}, {a73, &k3}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
      ok = f(y_new, k7);
    }
    if (!ok) {
      // A stage left the domain (dh2 <= floor or overflow): shrink and retry.
      singular_reject = true;
      ++result.rejected_steps;
      h *= 0.25;
      rejected_last = true;
      continue;
    }
    singular_reject = false;

    Vec err{};
    for (int i = 0; i < 3; ++i) {
      err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    }
    const double en = error_norm(err, y, y_new, opts.rtol, opts.atol);

    if (en <= 1.0) {
      // Dense output coefficients for samples inside (t, t + h].
      const double t_new = last ? t_end : t + h;
      while (next < samples.size() && samples[next] <= t_new) {
        const double theta = (samples[next] - t) / h;
        const double theta1 = 1.0 - theta;
        Vec v{};
        for (int i = 0; i < 3; ++i) {
          const double ydiff = y_new[i] - y[i];
          const double bspl = h * k1[i] - ydiff;
          const double r4 = ydiff - h * k7[i] - bspl;
          const double r5 = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                                 d6 * k6[i] + d7 * k7[i]);
          v[i] = y[i] + theta * (ydiff + theta1 * (bspl + theta * (r4 + theta1 * r5)));
        }
        if (samples[next] == t_new) v = y_new;
        emit_exact(samples[next++], v);
      }
      t = t_new;
      y = y_new;
      k1 = k7;
      ++result.accepted_steps;

      if (!(y[0] > opts.floor)) {
        result.status = IntegrationStatus::Singular;
        break;
      }
      const double fac = 0.9 * std::pow(std::max(en, 1e-10), -0.7 / 5.0) * std::pow(err_old, 0.4 / 5.0);
      double scale = std::clamp(fac, 0.2, 10.0);
      if (rejected_last) scale = std::min(scale, 1.0);
      err_old = std::max(en, 1e-4);
      h = std::min(h * scale, h_max);
      rejected_last = false;
    } else {
      ++result.rejected_steps;
      const double fac = std::isfinite(en) ? 0.9 * std::pow(en, -0.2) : 0.2;
      h *= std::max(0.2, fac);
      rejected_last = true;
    }
  }
  result.t_stop = t;
  return result;
}

}  // namespace reprdyn
