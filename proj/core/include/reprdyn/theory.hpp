#pragma once

// Two-point effective theory of representation learning.
//
// The state is the triple (||dh||^2, ||dy||^2, w) for a pair of datapoints:
// squared hidden-representation distance, squared prediction distance, and
// the alignment w = ||dy||^2 - dy.(y2 - y1). Time is measured in training
// epochs; the effective rates 1/tau absorb the learning rate.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace reprdyn {

/// Lower bound on ||dh||^2. The right-hand side divides by it.
inline constexpr double kSingularityFloor = 1e-12;

class TheoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularityError : public TheoryError {
 public:
  using TheoryError::TheoryError;
};

struct EffectiveParams {
  double dx2 = 0.0;        ///< ||x2 - x1||^2
  double dyT2 = 0.0;       ///< ||y2 - y1||^2 (targets)
  double inv_tau_h = 1.0;  ///< encoder rate
  double inv_tau_y = 1.0;  ///< decoder rate
  std::optional<double> inv_tau_ybar;  ///< output-mean rate, loss curves only

  /// tau_y / tau_h.
  [[nodiscard]] double rate_ratio() const { return inv_tau_h / inv_tau_y; }

  /// Throws TheoryError when an invariant is violated.
  void validate() const;
};

struct TheoryState {
  double dh2 = 0.0;
  double dy2 = 0.0;
  double w = 0.0;

  friend bool operator==(const TheoryState&, const TheoryState&) = default;
};

struct StateDerivative {
  double d_dh2 = 0.0;
  double d_dy2 = 0.0;
  double d_w = 0.0;
};

/// The exact system and four single-term alterations of it, used to show the
/// fit quality is not an artefact of having two free rates.
enum class RhsVariant {
  True,         ///< unaltered
  SquaredW,     ///< w^2 in the dh2 equation
  FactorTwo,    ///< factor 2 in front of the dy2 equation
  SignFlip,     ///< + instead of - on the encoder term of the w equation
  DroppedTerm,  ///< encoder term of the dy2 equation removed
};

inline constexpr std::array<RhsVariant, 5> kAllVariants = {
    RhsVariant::True, RhsVariant::SquaredW, RhsVariant::FactorTwo,
    RhsVariant::SignFlip, RhsVariant::DroppedTerm};

std::string_view to_string(RhsVariant v);
std::optional<RhsVariant> parse_variant(std::string_view name);

/// Instantaneous derivatives. Throws SingularityError if dh2 <= kSingularityFloor.
StateDerivative rhs(const TheoryState& state, const EffectiveParams& params,
                    RhsVariant variant = RhsVariant::True);

/// Time series of theory states, either integrated or measured from a network.
/// `loss` is either empty or the same length as `times`.
struct Trajectory {
  std::vector<double> times;
  std::vector<TheoryState> states;
  std::vector<double> loss;

  [[nodiscard]] std::size_t size() const { return times.size(); }
  [[nodiscard]] bool empty() const { return times.empty(); }
  [[nodiscard]] bool has_loss() const { return !loss.empty(); }

  void push_back(double t, const TheoryState& s) {
    times.push_back(t);
    states.push_back(s);
  }

  /// Strictly increasing times, equal-length channels.
  void validate() const;
};

enum class IntegrationStatus { Ok, Singular, StepFailure };

std::string_view to_string(IntegrationStatus s);

struct IntegratorOptions {
  double rtol = 1e-8;
  double atol = 1e-12;
  double floor = kSingularityFloor;
  std::size_t max_steps = 2'000'000;
};

struct IntegrationResult {
  Trajectory trajectory;  ///< samples reached before any failure
  IntegrationStatus status = IntegrationStatus::Ok;
  double t_stop = 0.0;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;

  [[nodiscard]] bool ok() const { return status == IntegrationStatus::Ok; }

  /// The trajectory, or throws SingularityError / TheoryError on failure.
  const Trajectory& value() const&;
  Trajectory value() &&;
};

/// Dormand-Prince 5(4) integration with dense output from t = 0 to t_end.
/// States are reported at `sample_times` (strictly increasing, inside
/// [0, t_end]); with no sample times the endpoints 0 and t_end are reported.
IntegrationResult integrate(const TheoryState& initial, const EffectiveParams& params,
                            RhsVariant variant, double t_end,
                            std::span<const double> sample_times,
                            const IntegratorOptions& options);

/// Same with rtol = tol and the default absolute tolerance.
IntegrationResult integrate(const TheoryState& initial, const EffectiveParams& params,
                            RhsVariant variant, double t_end,
                            std::span<const double> sample_times, double tol = 1e-8);

/// Training loss implied by the theory at each sample of `traj`:
///   L(t) = 1/2 q exp(-2 t / tau_ybar) + 1/4 (w + 1/2 (dyT2 - dy2))
/// where q = ||ybar(0) - (y1 + y2)/2||^2.
std::vector<double> loss_curve(const Trajectory& traj, const EffectiveParams& params,
                               double ybar_dev2_at_0);

struct FixedPointReport {
  double a_high = 0.0;
  double a_low = 0.0;
  double dh2_stable = 0.0;
  double trace = 0.0;        ///< of the reduced (dh2, w) Jacobian at the stable point
  double determinant = 0.0;
  std::pair<double, double> unstable_eigenvalues;  ///< (lambda+, lambda-) at the origin
};

FixedPointReport fixed_points(const TheoryState& initial, const EffectiveParams& params);

/// Stable root of the final distance: a_high/2 + sqrt(a_high^2/4 + a_low^2).
double stable_distance(double a_high, double a_low);

/// Closed-form solution for y1 == y2 (dyT2 = 0, hence w = dy2).
TheoryState solve_identical_outputs(const TheoryState& initial, const EffectiveParams& params,
                                    double t);

/// Large-initialisation rescaling. A physical problem whose state is G times
/// (dh2) or G^2 times (dy2, w) a unit-scale state is mapped onto the unit-scale
/// state with dyT2 / G^2 and time t' = time_scale * t (time_scale = G).
/// As G grows the rescaled problem tends to the identical-outputs system.
struct LazyRescaling {
  TheoryState state;
  EffectiveParams params;
  double time_scale = 1.0;

  /// Map a state of the rescaled problem back to physical units.
  [[nodiscard]] TheoryState to_physical(const TheoryState& s) const;
};

LazyRescaling lazy_rescale(const TheoryState& initial, const EffectiveParams& params, double gain);

/// P(||dh(inf)||^2 < h) when a_high ~ Normal(0, 2 dx2^2 gain^2).
double final_distance_cdf(double h, double gain, double a_low, double dx2);
/// Density of the same distribution.
double final_distance_density(double h, double gain, double a_low, double dx2);

/// dy2/dh2 - (tau_h/tau_y) dh2/dx2, constant along exact trajectories of the
/// unaltered system.
double conserved_quantity(const TheoryState& s, const EffectiveParams& params);

}  // namespace reprdyn
