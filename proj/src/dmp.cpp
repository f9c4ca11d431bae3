#include "hrc/dmp.hpp"

#include "hrc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hrc::dmp {

namespace {

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

// Relative Tikhonov term keeping the normal equations well posed when a basis
// sees almost no samples.
constexpr double kRidge = 1e-10;

// Central differences on possibly uneven timestamps, one-sided at the ends.
Eigen::MatrixXd differentiate(const Eigen::VectorXd& t, const Eigen::MatrixXd& y)
{
    const Eigen::Index n = t.size();
    Eigen::MatrixXd d(n, y.cols());
    d.row(0) = (y.row(1) - y.row(0)) / (t(1) - t(0));
    d.row(n - 1) = (y.row(n - 1) - y.row(n - 2)) / (t(n - 1) - t(n - 2));
    for (Eigen::Index k = 1; k + 1 < n; ++k) {
        d.row(k) = (y.row(k + 1) - y.row(k - 1)) / (t(k + 1) - t(k - 1));
    }
    return d;
}

}  // namespace

void validate(const Trajectory& traj)
{
    if (traj.t.size() != traj.y.rows()) {
        throw Error(ErrorKind::invalid_input, "trajectory: timestamp and sample counts differ");
    }
    if (traj.size() < 3) {
        throw Error(ErrorKind::invalid_input,
                    "trajectory: need at least 3 samples, got " + std::to_string(traj.size()));
    }
    if (traj.dims() < 1 || traj.dims() > 7) {
        throw Error(ErrorKind::invalid_input,
                    "trajectory: dimension must be 1..7, got " + std::to_string(traj.dims()));
    }
    if (!traj.t.allFinite() || !all_finite(traj.y)) {
        throw Error(ErrorKind::invalid_input, "trajectory: non-finite sample");
    }
    for (Eigen::Index k = 1; k < traj.t.size(); ++k) {
        if (!(traj.t(k) > traj.t(k - 1))) {
            throw Error(ErrorKind::invalid_input,
                        "trajectory: timestamps not strictly increasing at sample " + std::to_string(k));
        }
    }
}

void validate(const DmpConfig& config)
{
    if (!(config.alpha > 0.0) || !(config.beta > 0.0) || !(config.alpha_x > 0.0)) {
        throw Error(ErrorKind::invalid_input, "dmp config: alpha, beta and alpha_x must be positive");
    }
    if (config.n_basis < 2) {
        throw Error(ErrorKind::invalid_input, "dmp config: n_basis must be at least 2");
    }
    if (!(config.tau > 0.0)) {
        throw Error(ErrorKind::invalid_input, "dmp config: tau must be positive");
    }
}

bool DmpModel::all_degenerate() const
{
    return std::all_of(degenerate.begin(), degenerate.end(), [](bool d) { return d; });
}

Eigen::VectorXd make_basis_centers(const DmpConfig& config)
{
    const int n = config.n_basis;
    Eigen::VectorXd c(n);
    for (int i = 0; i < n; ++i) {
        const double s = static_cast<double>(i) / static_cast<double>(n - 1);
        c(i) = std::exp(-config.alpha_x * s);
    }
    return c;
}

Eigen::VectorXd make_basis_widths(const DmpConfig& config, const Eigen::VectorXd& centers)
{
    // Adjacent centers differ by the factor exp(-alpha_x / (N-1)), so the
    // spacing below c_i is delta * c_i.
    const double delta = 1.0 - std::exp(-config.alpha_x / static_cast<double>(config.n_basis - 1));
    Eigen::VectorXd h(centers.size());
    for (Eigen::Index i = 0; i < centers.size(); ++i) {
        const double gap = delta * centers(i);
        h(i) = std::log(2.0) / (gap * gap);
    }
    return h;
}

double phase_at(const DmpConfig& config, double t) { return std::exp(-config.alpha_x * t / config.tau); }

Eigen::VectorXd basis_activation(double x, const DmpModel& model)
{
    const Eigen::VectorXd diff = Eigen::VectorXd::Constant(model.basis_centers.size(), x) - model.basis_centers;
    return (-model.basis_widths.array() * diff.array().square()).exp().matrix();
}

double forcing_term(double x, const DmpModel& model, std::size_t dim)
{
    const Eigen::VectorXd psi = basis_activation(x, model);
    const double total = psi.sum();
    if (total < kActivationFloor) {
        return 0.0;
    }
    return psi.dot(model.weights.row(static_cast<Eigen::Index>(dim)).transpose()) * x / total;
}

DmpModel fit_dmp(const Trajectory& demo, const DmpConfig& config)
{
    validate(demo);
    validate(config);

    const Eigen::Index n = demo.y.rows();
    const Eigen::Index dims = demo.y.cols();
    const Eigen::VectorXd t = demo.t.array() - demo.t(0);

    DmpModel model;
    model.config = config;
    model.config.tau = t(n - 1);
    const double tau = model.config.tau;
    const double alpha = config.alpha;
    const double beta = config.beta;

    model.basis_centers = make_basis_centers(model.config);
    model.basis_widths = make_basis_widths(model.config, model.basis_centers);
    model.y0_demo = demo.y.row(0).transpose();
    model.g_demo = demo.y.row(n - 1).transpose();
    model.weights = Eigen::MatrixXd::Zero(dims, config.n_basis);
    model.degenerate.assign(static_cast<std::size_t>(dims), false);

    const Eigen::MatrixXd yd = differentiate(t, demo.y);
    const Eigen::MatrixXd ydd = differentiate(t, yd);

    Eigen::VectorXd x(n);
    Eigen::MatrixXd psi(n, config.n_basis);
    for (Eigen::Index k = 0; k < n; ++k) {
        x(k) = phase_at(model.config, t(k));
        psi.row(k) = basis_activation(x(k), model).transpose();
    }

    for (Eigen::Index d = 0; d < dims; ++d) {
        const double g = model.g_demo(d);
        const double y0 = model.y0_demo(d);
        if (std::abs(g - y0) < kGoalEpsilon) {
            model.degenerate[static_cast<std::size_t>(d)] = true;
            continue;
        }
        // Weighted least squares over the normalized, phase-scaled basis:
        // forcing(k) ~ sum_i w_i psi_i(x_k) x_k scale_k / sum_i psi_i(x_k).
        // Samples near the goal have a small regressor and so little pull.
        Eigen::MatrixXd design(n, config.n_basis);
        Eigen::VectorXd target(n);
        Eigen::Index used = 0;
        for (Eigen::Index k = 0; k < n; ++k) {
            const double y = demo.y(k, d);
            const double scale = config.scale == ForcingScale::goal_minus_state ? g - y : g - y0;
            if (std::abs(scale) < kTargetSingularity) {
                continue;
            }
            const double spring = alpha * (beta * (g - y) - tau * yd(k, d));
            target(used) = tau * tau * ydd(k, d) - spring;
            design.row(used) = psi.row(k) * (x(k) * scale / psi.row(k).sum());
            ++used;
        }
        if (used == 0) {
            model.degenerate[static_cast<std::size_t>(d)] = true;
            continue;
        }
        const Eigen::MatrixXd a = design.topRows(used);
        Eigen::MatrixXd normal = a.transpose() * a;
        const double ridge = kRidge * normal.trace() / static_cast<double>(config.n_basis);
        normal.diagonal().array() += ridge;
        model.weights.row(d) = normal.ldlt().solve(a.transpose() * target.head(used)).transpose();
    }
    if (!model.weights.allFinite()) {
        throw Error(ErrorKind::invalid_input, "fit_dmp: regression produced non-finite weights");
    }
    return model;
}

double goal_tolerance(double y0, double g) { return std::max(1e-2 * std::abs(g - y0), 1e-3); }

Trajectory rollout(const DmpModel& model, const Eigen::VectorXd& y0, const Eigen::VectorXd& g,
                   double duration, double dt)
{
    if (!(dt > 0.0) || !(duration >= dt)) {
        throw Error(ErrorKind::invalid_input, "rollout: need dt > 0 and duration >= dt");
    }
    const auto dims = static_cast<Eigen::Index>(model.dims());
    if (y0.size() != dims || g.size() != dims) {
        throw Error(ErrorKind::invalid_input, "rollout: start/goal dimension does not match model");
    }
    if (!model.weights.allFinite() || !y0.allFinite() || !g.allFinite()) {
        throw Error(ErrorKind::invalid_input, "rollout: non-finite model or endpoints");
    }

    const DmpConfig& cfg = model.config;
    const double tau = cfg.tau;
    const auto nominal = static_cast<long>(std::ceil(duration / dt - 1e-9));
    const auto cap = nominal + static_cast<long>(std::ceil(3.0 * tau / dt));

    Eigen::VectorXd tol(dims);
    for (Eigen::Index d = 0; d < dims; ++d) {
        tol(d) = goal_tolerance(y0(d), g(d));
    }

    std::vector<double> times{0.0};
    std::vector<Eigen::VectorXd> samples{y0};
    Eigen::VectorXd y = y0;
    Eigen::VectorXd yd = Eigen::VectorXd::Zero(dims);

    for (long step = 1;; ++step) {
        const double t_prev = static_cast<double>(step - 1) * dt;
        const double x = phase_at(cfg, t_prev);
        const Eigen::VectorXd psi = basis_activation(x, model);
        const double total = psi.sum();
        for (Eigen::Index d = 0; d < dims; ++d) {
            double f = 0.0;
            if (total >= kActivationFloor) {
                f = psi.dot(model.weights.row(d).transpose()) * x / total;
            }
            const double scale = cfg.scale == ForcingScale::goal_minus_state ? g(d) - y(d) : g(d) - y0(d);
            const double acc = (cfg.alpha * (cfg.beta * (g(d) - y(d)) - tau * yd(d)) + f * scale) / (tau * tau);
            yd(d) += acc * dt;
            y(d) += yd(d) * dt;
        }
        if (!y.allFinite() || !yd.allFinite()) {
            throw Error(ErrorKind::integration_divergence,
                        "rollout: state diverged at step " + std::to_string(step));
        }
        times.push_back(static_cast<double>(step) * dt);
        samples.push_back(y);
        if (step >= nominal) {
            const bool settled = ((y - g).cwiseAbs().array() <= tol.array()).all();
            if (settled || step >= cap) {
                break;
            }
        }
    }

    Trajectory out;
    out.t = Eigen::Map<const Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size()));
    out.y.resize(static_cast<Eigen::Index>(samples.size()), dims);
    for (std::size_t k = 0; k < samples.size(); ++k) {
        out.y.row(static_cast<Eigen::Index>(k)) = samples[k].transpose();
    }
    return out;
}

Trajectory reproduce(const DmpModel& model, double dt)
{
    return rollout(model, model.y0_demo, model.g_demo, model.config.tau, dt);
}

Eigen::VectorXd rmse(const Trajectory& a, const Trajectory& b)
{
    const Eigen::Index dims = a.y.cols();
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dims);
    const double a0 = a.t(0);
    const double b0 = b.t(0);
    Eigen::Index j = 0;
    for (Eigen::Index k = 0; k < a.t.size(); ++k) {
        const double tk = a.t(k) - a0;
        while (j + 1 < b.t.size() && b.t(j + 1) - b0 < tk) {
            ++j;
        }
        Eigen::VectorXd yb;
        if (j + 1 >= b.t.size()) {
            yb = b.y.row(b.t.size() - 1).transpose();
        } else {
            const double t0 = b.t(j) - b0;
            const double t1 = b.t(j + 1) - b0;
            const double s = std::clamp((tk - t0) / (t1 - t0), 0.0, 1.0);
            yb = ((1.0 - s) * b.y.row(j) + s * b.y.row(j + 1)).transpose();
        }
        acc += (a.y.row(k).transpose() - yb).array().square().matrix();
    }
    return (acc / static_cast<double>(a.t.size())).cwiseSqrt();
}

}  // namespace hrc::dmp
