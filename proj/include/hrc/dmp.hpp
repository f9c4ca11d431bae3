#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace hrc::dmp {

/// Timestamped samples of a position vector. Row k of `y` is the sample at
/// `t[k]`; columns are dimensions.
struct Trajectory {
    Eigen::VectorXd t;
    Eigen::MatrixXd y;

    std::size_t size() const { return static_cast<std::size_t>(t.size()); }
    std::size_t dims() const { return static_cast<std::size_t>(y.cols()); }
    double duration() const { return size() == 0 ? 0.0 : t(t.size() - 1) - t(0); }
};

/// Throws Error(invalid_input) unless timestamps strictly increase, there are
/// at least three samples, 1..7 dimensions and every value is finite.
void validate(const Trajectory& traj);

/// How the forcing term is scaled in the transformation system.
enum class ForcingScale {
    goal_minus_state,  // f(x) (g - y)
    goal_minus_start,  // f(x) (g - y0)
};

struct DmpConfig {
    double alpha = 25.0;
    double beta = 6.25;
    double alpha_x = 4.6;
    int n_basis = 15;
    double tau = 1.0;
    ForcingScale scale = ForcingScale::goal_minus_state;
};

void validate(const DmpConfig& config);

/// Goal distance below which a dimension cannot be fitted.
inline constexpr double kGoalEpsilon = 1e-6;
/// Samples closer than this to the goal are dropped from the regression.
inline constexpr double kTargetSingularity = 1e-4;
/// Forcing term is defined as zero when the summed activation falls below this.
inline constexpr double kActivationFloor = 1e-12;

struct DmpModel {
    DmpConfig config;
    Eigen::MatrixXd weights;  // dims x n_basis
    Eigen::VectorXd y0_demo;
    Eigen::VectorXd g_demo;
    Eigen::VectorXd basis_centers;  // strictly decreasing in phase
    Eigen::VectorXd basis_widths;
    std::vector<bool> degenerate;  // per dimension

    std::size_t dims() const { return static_cast<std::size_t>(weights.rows()); }
    bool all_degenerate() const;
};

struct DmpState {
    Eigen::VectorXd y;
    Eigen::VectorXd yd;
    double x = 1.0;
};

// Centers sit at the phase reached at equally spaced times over [0, tau];
// widths make neighbouring Gaussians cross at half activation.
Eigen::VectorXd make_basis_centers(const DmpConfig& config);
Eigen::VectorXd make_basis_widths(const DmpConfig& config, const Eigen::VectorXd& centers);

/// Canonical phase at time t: x = exp(-alpha_x t / tau).
double phase_at(const DmpConfig& config, double t);

Eigen::VectorXd basis_activation(double x, const DmpModel& model);

/// Normalized weighted basis sum times x for one dimension. Returns 0 when the
/// total activation is below kActivationFloor.
double forcing_term(double x, const DmpModel& model, std::size_t dim);

/// Learns one DMP per dimension sharing a single canonical phase. tau is set to
/// the demonstration duration. Dimensions whose start and end coincide are
/// flagged degenerate and keep zero weights.
DmpModel fit_dmp(const Trajectory& demo, const DmpConfig& config = {});

/// Endpoint tolerance guaranteed by rollout for one dimension.
double goal_tolerance(double y0, double g);

/// Integrates the transformation system from rest at y0 toward g with a
/// semi-implicit Euler step. Sampling starts at t = 0 and covers `duration`;
/// if some dimension has not settled within goal_tolerance by then, the
/// integration continues (at most 3 tau more) until it has.
///
/// Throws Error(integration_divergence) naming the step if the state stops
/// being finite.
Trajectory rollout(const DmpModel& model, const Eigen::VectorXd& y0, const Eigen::VectorXd& g,
                   double duration, double dt);

/// Rollout to the demonstrated endpoints over the demonstrated duration.
Trajectory reproduce(const DmpModel& model, double dt);

/// Per-dimension RMSE of `b` against `a`, with `b` linearly interpolated at a's
/// timestamps (times beyond b's end use its last sample).
Eigen::VectorXd rmse(const Trajectory& a, const Trajectory& b);

}  // namespace hrc::dmp
