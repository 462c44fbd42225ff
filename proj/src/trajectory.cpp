#include "prism/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace prism
{

const char* to_string(GripperAction a) noexcept
{
    switch (a)
    {
    case GripperAction::suction_on:
        return "suction_on";
    case GripperAction::suction_off:
        return "suction_off";
    default:
        return "none";
    }
}

GripperAction gripper_action_from_string(const std::string& s)
{
    if (s == "none")
        return GripperAction::none;
    if (s == "suction_on")
        return GripperAction::suction_on;
    if (s == "suction_off")
        return GripperAction::suction_off;
    throw std::invalid_argument("unknown gripper action '" + s + "'");
}

Eigen::Vector3d pixel_to_workspace(double col, double row, const CorrectedGrid& grid, const PathSettings& settings)
{
    const MetricPoint m = grid.metric_of(col, row);
    return settings.plane_origin + Eigen::Vector3d(m.x_mm, m.y_mm, 0.0);
}

std::vector<Waypoint> build_sparse_path(const Eigen::Vector3d& grasp, const Eigen::Vector3d& bin,
                                        std::span<const Waypoint> intermediates, const PathSettings& settings)
{
    const Eigen::Vector3d up_approach(0.0, 0.0, settings.approach_height_mm);
    const Eigen::Vector3d up_lift(0.0, 0.0, settings.lift_height_mm);
    std::vector<Waypoint> path;
    path.push_back({grasp + up_approach, GripperAction::none, 0.0});
    path.push_back({grasp, GripperAction::suction_on, settings.grasp_dwell_s});
    path.push_back({grasp + up_lift, GripperAction::none, 0.0});
    for (const auto& w : intermediates)
        path.push_back(w);
    path.push_back({bin + up_approach, GripperAction::none, 0.0});
    path.push_back({bin, GripperAction::suction_off, settings.release_dwell_s});
    path.push_back({bin + up_lift, GripperAction::none, 0.0});
    for (std::size_t i = 0; i < path.size(); ++i)
        if (!settings.workspace.contains(path[i].position))
            throw std::out_of_range("build_sparse_path: waypoint " + std::to_string(i) + " leaves the workspace");
    return path;
}

void LqtConfig::validate() const
{
    if (!(sample_period_s > 0.0))
        throw std::invalid_argument("lqt: sample period must be > 0");
    if (!(q_position >= 0.0 && q_velocity >= 0.0))
        throw std::invalid_argument("lqt: state weights must be >= 0");
    if (!(r_input > 0.0))
        throw std::invalid_argument("lqt: input weight must be > 0");
    if (!(terminal_weight >= 1.0))
        throw std::invalid_argument("lqt: terminal weight must be >= 1");
    if (!(cruise_speed_mm_s > 0.0) || !(min_segment_s > 0.0) || !(settle_s >= 0.0))
        throw std::invalid_argument("lqt: cruise speed and segment horizon must be > 0");
    if (!(max_velocity_mm_s > 0.0) || !(max_acceleration_mm_s2 > 0.0))
        throw std::invalid_argument("lqt: infeasible velocity/acceleration limits");
}

std::size_t sample_count(double duration_s, double period_s)
{
    if (!(period_s > 0.0) || !(duration_s >= 0.0))
        throw std::invalid_argument("sample_count: invalid duration or period");
    return static_cast<std::size_t>(std::floor(duration_s / period_s + 1e-9)) + 1;
}

Reference build_reference(std::span<const Waypoint> path, const LqtConfig& config)
{
    config.validate();
    if (path.size() < 2)
        throw std::invalid_argument("lqt: need at least 2 waypoints");
    const double dt = config.sample_period_s;
    const auto steps_for = [&](double seconds) {
        return static_cast<std::size_t>(std::ceil(seconds / dt - 1e-9));
    };
    Reference ref;
    ref.position.push_back(path.front().position);
    const auto hold = [&](const Waypoint& w) {
        const std::size_t n = steps_for(w.dwell_s + config.settle_s);
        for (std::size_t i = 0; i < n; ++i)
            ref.position.push_back(w.position);
        ref.hold_end.push_back(ref.position.size() - 1);
    };
    hold(path.front());
    for (std::size_t i = 1; i < path.size(); ++i)
    {
        const Eigen::Vector3d a = path[i - 1].position, b = path[i].position;
        const double seconds = std::max(config.min_segment_s, (b - a).norm() / config.cruise_speed_mm_s);
        const std::size_t n = std::max<std::size_t>(1, steps_for(seconds));
        for (std::size_t k = 1; k <= n; ++k)
            ref.position.push_back(a + (b - a) * (double(k) / double(n)));
        hold(path[i]);
    }
    return ref;
}

AxisSolution lqt_solve_axis(std::span<const double> ref_position, std::span<const double> ref_velocity, double p0,
                            double v0, const LqtConfig& config)
{
    config.validate();
    if (ref_position.size() != ref_velocity.size() || ref_position.size() < 2)
        throw std::invalid_argument("lqt_solve_axis: need matching references of length >= 2");
    const std::size_t n = ref_position.size() - 1;
    const double dt = config.sample_period_s;
    Eigen::Matrix2d a;
    a << 1.0, dt, 0.0, 1.0;
    const Eigen::Vector2d b(0.0, dt);
    const Eigen::Matrix2d q = Eigen::Vector2d(config.q_position, config.q_velocity).asDiagonal();
    const double r = config.r_input;

    // Backward pass: value function x'P x - 2 s'x + const.
    std::vector<Eigen::RowVector2d> gain(n);
    std::vector<double> ff(n);
    Eigen::Matrix2d p = config.terminal_weight * q;
    Eigen::Vector2d s = p * Eigen::Vector2d(ref_position[n], ref_velocity[n]);
    for (std::size_t k = n; k-- > 0;)
    {
        const double denom = r + b.dot(p * b);
        const Eigen::RowVector2d kk = (b.transpose() * p * a) / denom;
        gain[k] = kk;
        ff[k] = b.dot(s) / denom;
        const Eigen::Matrix2d closed = a - b * kk;
        if (k > 0)
        {
            const Eigen::Vector2d rk(ref_position[k], ref_velocity[k]);
            s = closed.transpose() * s + q * rk;
            p = q + a.transpose() * p * closed;
            p = 0.5 * (p + p.transpose()).eval();
        }
    }

    AxisSolution out;
    out.position.resize(n + 1);
    out.velocity.resize(n + 1);
    out.control.resize(n);
    Eigen::Vector2d x(p0, v0);
    out.position[0] = p0;
    out.velocity[0] = v0;
    for (std::size_t k = 0; k < n; ++k)
    {
        const double u = -gain[k].dot(x) + ff[k];
        out.control[k] = u;
        x = a * x + b * u;
        out.position[k + 1] = x(0);
        out.velocity[k + 1] = x(1);
    }
    return out;
}

double tracking_cost(const AxisSolution& s, std::span<const double> ref_position, std::span<const double> ref_velocity,
                     const LqtConfig& config)
{
    double cost = 0.0;
    for (std::size_t k = 1; k < s.position.size(); ++k)
    {
        const double ep = s.position[k] - ref_position[k], ev = s.velocity[k] - ref_velocity[k];
        const double w = k + 1 == s.position.size() ? config.terminal_weight : 1.0;
        cost += w * (config.q_position * ep * ep + config.q_velocity * ev * ev);
    }
    for (double u : s.control)
        cost += config.r_input * u * u;
    return cost;
}

namespace
{
void finish_velocities(CartesianTrajectory& t)
{
    const std::size_t n = t.position.size();
    t.velocity.assign(n, Eigen::Vector3d::Zero());
    for (std::size_t k = 0; k + 1 < n; ++k)
        t.velocity[k] = (t.position[k + 1] - t.position[k]) / t.sample_period_s;
    if (n >= 2)
        t.velocity[n - 1] = Eigen::Vector3d::Zero();
}

void fill_times(CartesianTrajectory& t)
{
    t.time.resize(t.position.size());
    for (std::size_t k = 0; k < t.time.size(); ++k)
        t.time[k] = double(k) * t.sample_period_s;
}
}  // namespace

double peak_speed(const CartesianTrajectory& traj) noexcept
{
    double m = 0.0;
    for (const auto& v : traj.velocity)
        m = std::max(m, v.cwiseAbs().maxCoeff());
    return m;
}

double peak_acceleration(const CartesianTrajectory& traj) noexcept
{
    double m = 0.0;
    for (std::size_t k = 0; k + 2 < traj.velocity.size(); ++k)
        m = std::max(m, ((traj.velocity[k + 1] - traj.velocity[k]) / traj.sample_period_s).cwiseAbs().maxCoeff());
    return m;
}

CartesianTrajectory time_scale(const CartesianTrajectory& traj, double factor)
{
    if (!(factor >= 1.0))
        throw std::invalid_argument("time_scale: factor must be >= 1");
    CartesianTrajectory out;
    out.sample_period_s = traj.sample_period_s;
    const std::size_t n_old = traj.position.size();
    if (n_old == 0)
        return out;
    const double old_duration = double(n_old - 1);  // in samples
    const std::size_t n_new = static_cast<std::size_t>(std::floor(old_duration * factor + 1e-9)) + 1;
    out.position.resize(n_new);
    for (std::size_t k = 0; k < n_new; ++k)
    {
        const double s = std::min(double(k) / factor, old_duration);
        const auto i = std::min(static_cast<std::size_t>(s), n_old - 1);
        const double f = s - double(i);
        if (i + 1 >= n_old || f == 0.0)
        {
            out.position[k] = traj.position[i];
            continue;
        }
        // Catmull-Rom segment between samples i and i + 1, clamped at the ends.
        const Eigen::Vector3d& p1 = traj.position[i];
        const Eigen::Vector3d& p2 = traj.position[i + 1];
        const Eigen::Vector3d& p0 = traj.position[i > 0 ? i - 1 : i];
        const Eigen::Vector3d& p3 = traj.position[i + 2 < n_old ? i + 2 : i + 1];
        const Eigen::Vector3d m1 = 0.5 * (p2 - p0), m2 = 0.5 * (p3 - p1);
        const double f2 = f * f, f3 = f2 * f;
        out.position[k] = (2 * f3 - 3 * f2 + 1) * p1 + (f3 - 2 * f2 + f) * m1 + (-2 * f3 + 3 * f2) * p2 +
                          (f3 - f2) * m2;
    }
    out.position.back() = traj.position.back();
    fill_times(out);
    finish_velocities(out);
    const auto remap = [&](std::size_t idx) {
        return std::min(n_new - 1, static_cast<std::size_t>(std::lround(double(idx) * factor)));
    };
    for (const auto& m : traj.markers)
        out.markers.push_back({remap(m.sample), m.action});
    for (std::size_t w : traj.waypoint_samples)
        out.waypoint_samples.push_back(remap(w));
    return out;
}

CartesianTrajectory lqt_refine(std::span<const Waypoint> path, const LqtConfig& config)
{
    const Reference ref = build_reference(path, config);
    const std::size_t n = ref.position.size();
    CartesianTrajectory traj;
    traj.sample_period_s = config.sample_period_s;
    traj.position.assign(n, path.front().position);
    std::vector<double> rp, rv;
    for (int axis = 0; axis < 3; ++axis)
    {
        double p0 = path.front().position(axis), v0 = 0.0;
        for (std::size_t seg = 1; seg < ref.hold_end.size(); ++seg)
        {
            const std::size_t k0 = ref.hold_end[seg - 1], k1 = ref.hold_end[seg];
            rp.resize(k1 - k0 + 1);
            rv.resize(rp.size());
            for (std::size_t k = k0; k <= k1; ++k)
                rp[k - k0] = ref.position[k](axis);
            for (std::size_t k = 0; k + 1 < rp.size(); ++k)
                rv[k] = (rp[k + 1] - rp[k]) / config.sample_period_s;
            rv.back() = 0.0;
            const AxisSolution s = lqt_solve_axis(rp, rv, p0, v0, config);
            for (std::size_t k = k0 + 1; k <= k1; ++k)
                traj.position[k](axis) = s.position[k - k0];
            p0 = s.position.back();
            v0 = s.velocity.back();
        }
    }
    fill_times(traj);
    finish_velocities(traj);
    traj.waypoint_samples = ref.hold_end;
    for (std::size_t i = 0; i < path.size(); ++i)
        if (path[i].action != GripperAction::none)
            traj.markers.push_back({ref.hold_end[i], path[i].action});

    for (int iter = 0; iter < 16; ++iter)
    {
        const double sv = peak_speed(traj) / config.max_velocity_mm_s;
        const double sa = std::sqrt(peak_acceleration(traj) / config.max_acceleration_mm_s2);
        const double factor = std::max(sv, sa);
        if (factor <= 1.0)
            break;
        traj = time_scale(traj, factor * 1.0001);
    }
    return traj;
}

Eigen::Vector3d suction_on_position(const CartesianTrajectory& traj)
{
    if (traj.position.empty())
        throw std::invalid_argument("suction_on_position: empty trajectory");
    for (const auto& m : traj.markers)
        if (m.action == GripperAction::suction_on)
            return traj.position[m.sample];
    return traj.position.front();
}

}  // namespace prism
