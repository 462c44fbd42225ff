#include "prism/trajectory.hpp"

#include "doctest.h"

#include <stdexcept>
#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace prism;

namespace
{
struct DenseSolution
{
    Eigen::VectorXd u;
    Eigen::MatrixXd x;  ///< 2 x (N + 1)
};

/// Stacks the horizon and solves the unconstrained quadratic program directly.
DenseSolution batch_least_squares(const std::vector<double>& rp, const std::vector<double>& rv, double p0, double v0,
                                  const LqtConfig& c)
{
    const int n = static_cast<int>(rp.size()) - 1;
    const double dt = c.sample_period_s;
    Eigen::Matrix2d a;
    a << 1.0, dt, 0.0, 1.0;
    const Eigen::Vector2d b(0.0, dt);
    Eigen::MatrixXd phi(2 * n, 2), gamma = Eigen::MatrixXd::Zero(2 * n, n);
    Eigen::Matrix2d ak = Eigen::Matrix2d::Identity();
    for (int k = 1; k <= n; ++k)
    {
        ak = a * ak;
        phi.block(2 * (k - 1), 0, 2, 2) = ak;
        Eigen::Matrix2d apow = Eigen::Matrix2d::Identity();
        for (int j = k - 1; j >= 0; --j)
        {
            gamma.block(2 * (k - 1), j, 2, 1) = apow * b;
            apow = a * apow;
        }
    }
    Eigen::VectorXd r(2 * n), w(2 * n);
    for (int k = 1; k <= n; ++k)
    {
        r(2 * (k - 1)) = rp[std::size_t(k)];
        r(2 * (k - 1) + 1) = rv[std::size_t(k)];
        const double scale = k == n ? c.terminal_weight : 1.0;
        w(2 * (k - 1)) = scale * c.q_position;
        w(2 * (k - 1) + 1) = scale * c.q_velocity;
    }
    const Eigen::Vector2d x0(p0, v0);
    const Eigen::MatrixXd h =
        gamma.transpose() * w.asDiagonal() * gamma + c.r_input * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd g = gamma.transpose() * w.asDiagonal() * (r - phi * x0);
    DenseSolution s;
    s.u = h.ldlt().solve(g);
    const Eigen::VectorXd x = phi * x0 + gamma * s.u;
    s.x.resize(2, n + 1);
    s.x.col(0) = x0;
    for (int k = 1; k <= n; ++k)
        s.x.col(k) = x.segment(2 * (k - 1), 2);
    return s;
}
}  // namespace

TEST_CASE("riccati recursion matches the stacked least-squares solution")
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    LqtConfig c;
    for (int n : {1, 2, 5, 17, 50})
    {
        std::vector<double> rp(std::size_t(n) + 1), rv(std::size_t(n) + 1);
        for (int k = 0; k <= n; ++k)
        {
            rp[std::size_t(k)] = u(rng);
            rv[std::size_t(k)] = u(rng);
        }
        const double p0 = u(rng), v0 = u(rng);
        const AxisSolution s = lqt_solve_axis(rp, rv, p0, v0, c);
        const DenseSolution d = batch_least_squares(rp, rv, p0, v0, c);
        for (int k = 0; k < n; ++k)
            CHECK(std::abs(s.control[std::size_t(k)] - d.u(k)) <= 1e-6 * std::max(1.0, std::abs(d.u(k))));
        for (int k = 0; k <= n; ++k)
        {
            CHECK(std::abs(s.position[std::size_t(k)] - d.x(0, k)) <= 1e-6);
            CHECK(std::abs(s.velocity[std::size_t(k)] - d.x(1, k)) <= 1e-6);
        }
        // The optimum cannot be improved by perturbing a control.
        const double best = tracking_cost(s, rp, rv, c);
        AxisSolution t = s;
        t.control[0] += 1e-3;
        Eigen::Vector2d x(p0, v0);
        for (int k = 0; k < n; ++k)
        {
            x = Eigen::Vector2d(x(0) + c.sample_period_s * x(1), x(1) + c.sample_period_s * t.control[std::size_t(k)]);
            t.position[std::size_t(k) + 1] = x(0);
            t.velocity[std::size_t(k) + 1] = x(1);
        }
        CHECK(tracking_cost(t, rp, rv, c) >= best);
    }
}

TEST_CASE("sample count includes both ends")
{
    CHECK(sample_count(2.0, 0.01) == 201);
    CHECK(sample_count(0.0, 0.01) == 1);
    CHECK(sample_count(0.3, 0.1) == 4);
    CHECK_THROWS_AS((void)sample_count(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("sparse path order and gripper actions")
{
    const Eigen::Vector3d grasp(300, 20, 0), bin(650, -80, 50);
    const PathSettings s;
    const auto p = build_sparse_path(grasp, bin, {}, s);
    REQUIRE(p.size() == 6);
    CHECK(p[0].position.isApprox(grasp + Eigen::Vector3d(0, 0, s.approach_height_mm)));
    CHECK(p[1].position == grasp);
    CHECK(p[1].action == GripperAction::suction_on);
    CHECK(p[2].position.z() == doctest::Approx(s.lift_height_mm));
    CHECK(p[4].position == bin);
    CHECK(p[4].action == GripperAction::suction_off);
    CHECK(p[5].position.z() == doctest::Approx(bin.z() + s.lift_height_mm));
    const std::vector<Waypoint> via{{Eigen::Vector3d(500, 0, 200), GripperAction::none, 0.0}};
    CHECK(build_sparse_path(grasp, bin, via, s).size() == 7);
    CHECK_THROWS_AS((void)build_sparse_path(Eigen::Vector3d(5000, 0, 0), bin, {}, s), std::out_of_range);
}

TEST_CASE("pixel coordinates map through the grid onto the plane")
{
    const CorrectedGrid grid{0.5, 101, 201, -25.0, 50.0};
    const PathSettings s;
    const Eigen::Vector3d p = pixel_to_workspace(50.0, 100.0, grid, s);
    CHECK(p.isApprox(s.plane_origin));
    const Eigen::Vector3d q = pixel_to_workspace(0.0, 0.0, grid, s);
    CHECK(q.x() == doctest::Approx(s.plane_origin.x() - 25.0));
    CHECK(q.y() == doctest::Approx(s.plane_origin.y() + 50.0));
}

TEST_CASE("refined trajectory is uniformly sampled and reaches every waypoint")
{
    const auto path = build_sparse_path({320, 40, 0}, {650, 80, 50});
    const LqtConfig c;
    const CartesianTrajectory t = lqt_refine(path, c);
    REQUIRE(t.size() > 10);
    for (std::size_t k = 0; k < t.size(); ++k)
        CHECK(t.time[k] == doctest::Approx(k * c.sample_period_s).epsilon(1e-12));
    for (std::size_t k = 0; k + 1 < t.size(); ++k)
    {
        CHECK(t.time[k + 1] > t.time[k]);
        const Eigen::Vector3d fd = (t.position[k + 1] - t.position[k]) / c.sample_period_s;
        CHECK((fd - t.velocity[k]).norm() <= 1e-6);
    }
    REQUIRE(t.waypoint_samples.size() == path.size());
    for (std::size_t i = 0; i < path.size(); ++i)
        CHECK((t.position[t.waypoint_samples[i]] - path[i].position).norm() <= 1.0);
    REQUIRE(t.markers.size() == 2);
    CHECK(t.markers[0].action == GripperAction::suction_on);
    CHECK((suction_on_position(t) - path[1].position).norm() <= 1.0);
    CHECK(peak_speed(t) <= c.max_velocity_mm_s);
    CHECK(peak_acceleration(t) <= c.max_acceleration_mm_s2);
}

TEST_CASE("limits are enforced by time scaling")
{
    const auto path = build_sparse_path({320, 40, 0}, {650, 80, 50});
    LqtConfig c;
    c.max_velocity_mm_s = 120.0;
    c.max_acceleration_mm_s2 = 600.0;
    const CartesianTrajectory t = lqt_refine(path, c);
    CHECK(peak_speed(t) <= c.max_velocity_mm_s * 1.02);
    CHECK(peak_acceleration(t) <= c.max_acceleration_mm_s2 * 1.05);
    CHECK(t.duration() > lqt_refine(path, LqtConfig{}).duration());
}

TEST_CASE("time scaling keeps endpoints and stretches duration")
{
    const auto path = build_sparse_path({320, 40, 0}, {650, 80, 50});
    const CartesianTrajectory t = lqt_refine(path);
    const CartesianTrajectory s = time_scale(t, 2.0);
    CHECK(s.size() == 2 * (t.size() - 1) + 1);
    CHECK(s.position.front() == t.position.front());
    CHECK(s.position.back() == t.position.back());
    for (std::size_t k = 0; k < t.size(); ++k)
        REQUIRE((s.position[2 * k] - t.position[k]).norm() <= 1e-9);
    CHECK(peak_speed(s) <= 1.05 * peak_speed(t) / 2.0);
    CHECK(peak_acceleration(s) <= peak_acceleration(t) / 3.0);
    CHECK_THROWS_AS((void)time_scale(t, 0.5), std::invalid_argument);
}

TEST_CASE("reference holds each waypoint for its dwell plus settle time")
{
    LqtConfig c;
    const std::vector<Waypoint> path{{Eigen::Vector3d(0, 0, 0), GripperAction::none, 0.0},
                                     {Eigen::Vector3d(100, 0, 0), GripperAction::suction_on, 0.2}};
    const Reference r = build_reference(path, c);
    REQUIRE(r.hold_end.size() == 2);
    CHECK(r.hold_end[0] == 30);
    // 100 mm at 250 mm/s = 0.4 s = 40 samples, then 0.5 s hold.
    CHECK(r.hold_end[1] == 30 + 40 + 50);
    CHECK(r.position.size() == 121);
    CHECK(r.position[70].isApprox(path[1].position));
}

TEST_CASE("two-second horizon yields 201 samples")
{
    LqtConfig c;
    c.settle_s = 0.0;
    c.min_segment_s = 2.0;
    const std::vector<Waypoint> path{{Eigen::Vector3d(0, 0, 100), GripperAction::none, 0.0},
                                     {Eigen::Vector3d(100, 0, 100), GripperAction::none, 0.0}};
    const CartesianTrajectory t = lqt_refine(path, c);
    CHECK(t.size() == sample_count(2.0, c.sample_period_s));
    CHECK(t.size() == 201);
    CHECK(t.duration() == doctest::Approx(2.0));
}

TEST_CASE("config validation")
{
    LqtConfig c;
    CHECK_NOTHROW(c.validate());
    c.r_input = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    CHECK(gripper_action_from_string(to_string(GripperAction::suction_off)) == GripperAction::suction_off);
    CHECK_THROWS_AS((void)gripper_action_from_string("vent"), std::invalid_argument);
}
