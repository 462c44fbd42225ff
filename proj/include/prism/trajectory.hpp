#pragma once
/**
 * @file   trajectory.hpp
 * @brief  Sparse grasp-and-place waypoint paths and their refinement into
 *         uniformly sampled Cartesian trajectories by finite-horizon linear
 *         quadratic tracking of a per-axis double integrator.
 */

#include "prism/grid.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace prism
{

enum class GripperAction
{
    none,
    suction_on,
    suction_off
};

[[nodiscard]] const char* to_string(GripperAction a) noexcept;
[[nodiscard]] GripperAction gripper_action_from_string(const std::string& s);

struct Waypoint
{
    Eigen::Vector3d position = Eigen::Vector3d::Zero();  ///< mm
    GripperAction action = GripperAction::none;
    double dwell_s = 0.0;
};

struct Workspace
{
    Eigen::Vector3d min{-200.0, -700.0, -10.0};
    Eigen::Vector3d max{900.0, 700.0, 600.0};

    [[nodiscard]] bool contains(const Eigen::Vector3d& p) const noexcept
    {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
};

struct PathSettings
{
    double approach_height_mm = 80.0;  ///< hover and bin approach offset
    double lift_height_mm = 150.0;
    double grasp_dwell_s = 0.2;
    double release_dwell_s = 0.2;
    Eigen::Vector3d plane_origin{300.0, 0.0, 0.0};  ///< workspace position of the optical axis on the plane
    Workspace workspace;
};

/// Workspace position of a corrected-grid pixel lying on the work plane.
[[nodiscard]] Eigen::Vector3d pixel_to_workspace(double col, double row, const CorrectedGrid& grid,
                                                 const PathSettings& settings);

/// hover -> grasp (suction on) -> lift -> intermediates -> bin approach -> bin (suction off) -> retreat.
[[nodiscard]] std::vector<Waypoint> build_sparse_path(const Eigen::Vector3d& grasp, const Eigen::Vector3d& bin,
                                                      std::span<const Waypoint> intermediates = {},
                                                      const PathSettings& settings = {});

struct LqtConfig
{
    double sample_period_s = 0.01;
    double q_position = 100.0;
    double q_velocity = 1.0;
    double r_input = 0.1;
    double terminal_weight = 1000.0;  ///< multiplies Q at the last sample of each segment horizon
    double cruise_speed_mm_s = 250.0;
    double min_segment_s = 0.2;  ///< shortest time allotted to any segment
    double settle_s = 0.3;       ///< extra hold at every waypoint before moving on
    double max_velocity_mm_s = 800.0;
    double max_acceleration_mm_s2 = 4000.0;

    void validate() const;
};

struct ActionMarker
{
    std::size_t sample = 0;
    GripperAction action = GripperAction::none;
};

struct CartesianTrajectory
{
    double sample_period_s = 0.01;
    std::vector<double> time;
    std::vector<Eigen::Vector3d> position;
    std::vector<Eigen::Vector3d> velocity;
    std::vector<ActionMarker> markers;
    std::vector<std::size_t> waypoint_samples;  ///< sample at which each waypoint's hold ends

    [[nodiscard]] std::size_t size() const noexcept { return time.size(); }
    [[nodiscard]] double duration() const noexcept { return time.empty() ? 0.0 : time.back(); }
};

/// floor(duration / period) + 1, robust to representation error in the quotient.
[[nodiscard]] std::size_t sample_count(double duration_s, double period_s);

/// Piecewise-linear reference through the waypoints with holds, sampled at the configured rate.
struct Reference
{
    std::vector<Eigen::Vector3d> position;
    std::vector<std::size_t> hold_end;  ///< per waypoint
};
[[nodiscard]] Reference build_reference(std::span<const Waypoint> path, const LqtConfig& config);

/// One axis of the tracking problem: x = (p, v), x+ = A x + B u with A = [1 dt; 0 1], B = [0; dt].
/// Minimises sum_{k=1..N} w_k (x_k - r_k)' Q (x_k - r_k) + sum_{k=0..N-1} R u_k^2,
/// with w_k = 1 except w_N = terminal_weight.
struct AxisSolution
{
    std::vector<double> position;  ///< N + 1
    std::vector<double> velocity;  ///< N + 1
    std::vector<double> control;   ///< N
};
[[nodiscard]] AxisSolution lqt_solve_axis(std::span<const double> ref_position, std::span<const double> ref_velocity,
                                          double p0, double v0, const LqtConfig& config);

/// Objective value of an axis solution against its reference.
[[nodiscard]] double tracking_cost(const AxisSolution& s, std::span<const double> ref_position,
                                   std::span<const double> ref_velocity, const LqtConfig& config);

/// LQ tracking of the reference, one finite horizon per waypoint-to-waypoint segment (ending
/// with that waypoint's hold), then time scaling if the limits are exceeded.
[[nodiscard]] CartesianTrajectory lqt_refine(std::span<const Waypoint> path, const LqtConfig& config = {});

/// Stretches time by `factor` >= 1, resampling with a Catmull-Rom spline through the
/// original samples; velocities are recomputed as forward differences.
[[nodiscard]] CartesianTrajectory time_scale(const CartesianTrajectory& traj, double factor);

[[nodiscard]] double peak_speed(const CartesianTrajectory& traj) noexcept;
[[nodiscard]] double peak_acceleration(const CartesianTrajectory& traj) noexcept;

/// Position at which the gripper switches on, or the first sample when there is no such marker.
[[nodiscard]] Eigen::Vector3d suction_on_position(const CartesianTrajectory& traj);

}  // namespace prism
