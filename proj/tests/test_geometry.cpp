#include "prism/geometry.hpp"
#include "prism/grid.hpp"

#include "doctest.h"

#include <stdexcept>
#include <cmath>
#include <random>

using namespace prism;

TEST_CASE("fov follows 720 / n")
{
    CHECK(fov_degrees(10) == 72.0);
    CHECK(fov_degrees(8) == 90.0);
    CHECK(fov_degrees(12) == 60.0);
    CHECK_THROWS_AS((void)fov_degrees(2), std::invalid_argument);
}

TEST_CASE("scanned angle is linear in the motor angle and hits the window ends exactly")
{
    CHECK(gamma_of_theta({kThetaMin}).gamma == kPi / 5.0);
    CHECK(gamma_of_theta({kThetaMax}).gamma == -kPi / 5.0);
    CHECK(std::abs(gamma_of_theta({3.0 * kPi / 20.0}).gamma) < 1e-15);
    CHECK_THROWS_AS((void)gamma_of_theta({kThetaMin - 1e-3}), std::out_of_range);
    CHECK_THROWS_AS((void)gamma_of_theta({kThetaMax + 1e-3}), std::out_of_range);
}

TEST_CASE("scaling factor equals sec(gamma) across the window")
{
    for (int i = 0; i <= 1000; ++i)
    {
        const MotorAngle t{kThetaMin + kThetaSpan * i / 1000.0};
        const double k = scaling_factor_k(t);
        CHECK(std::abs(k * std::cos(gamma_of_theta(t).gamma) - 1.0) < 1e-12);
        CHECK(k >= 1.0 - 1e-15);
    }
    CHECK(scaling_factor_k({kThetaMin}) == doctest::Approx(1.0 / std::cos(kPi / 5.0)).epsilon(1e-14));
    CHECK(scaling_factor_k({kThetaMin}) == doctest::Approx(1.2360679775).epsilon(1e-10));
}

TEST_CASE("row mapping spans the window and inverts")
{
    const GeometryContext g;
    CHECK(theta_of_row(0, g).theta == kThetaMin);
    CHECK(std::abs(theta_of_row(g.rows - 1, g).theta - kThetaMax) < 1e-15);
    for (int r : {0, 1, 100, 435, 870})
        CHECK(row_of_theta(theta_of_row(r, g), g) == doctest::Approx(r).epsilon(1e-12));
    CHECK_THROWS_AS((void)theta_of_row(g.rows, g), std::out_of_range);
    CHECK_THROWS_AS((void)theta_of_row(-1, g), std::out_of_range);
}

TEST_CASE("pixel and metric coordinates round trip")
{
    const GeometryContext g;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uu(0.0, g.cols - 1.0), vv(0.0, g.rows - 1.0);
    for (int i = 0; i < 2000; ++i)
    {
        const double u = uu(rng), v = vv(rng);
        const PixelCoord back = metric_to_pixel(pixel_to_metric(u, v, g), g);
        CHECK(back.u == doctest::Approx(u).epsilon(1e-9));
        CHECK(back.v == doctest::Approx(v).epsilon(1e-9));
    }
}

TEST_CASE("centre row maps onto the optical axis line with unit magnification")
{
    const GeometryContext g;
    const MotorAngle centre{3.0 * kPi / 20.0};
    const MetricPoint left = metric_at(0.0, centre, g);
    const MetricPoint right = metric_at(g.cols - 1.0, centre, g);
    CHECK(std::abs(left.y_mm) < 1e-9);
    CHECK((right.x_mm - left.x_mm) == doctest::Approx((g.cols - 1) * g.line_resolution_dx_mm));
}

TEST_CASE("points outside the footprint are rejected")
{
    const GeometryContext g;
    CHECK_THROWS_AS((void)metric_to_pixel({0.0, footprint_half_height(g) + 1.0}, g), std::out_of_range);
    CHECK_THROWS_AS((void)metric_to_pixel({footprint_half_width_max(g) + 1.0, 0.0}, g), std::out_of_range);
    CHECK_NOTHROW((void)metric_to_pixel({0.0, 0.0}, g));
    CHECK_THROWS_AS((void)pixel_to_metric(-0.5, 0.0, g), std::out_of_range);
}

TEST_CASE("scan duration at 3 rpm is two seconds")
{
    PrismConfig c;
    CHECK(scan_duration_seconds(c) == doctest::Approx(2.0).epsilon(1e-12));
    c.motor_speed_rpm = 6.0;
    CHECK(scan_duration_seconds(c) == doctest::Approx(1.0).epsilon(1e-12));
    c.motor_speed_rpm = 0.0;
    CHECK_THROWS_AS((void)scan_duration_seconds(c), std::invalid_argument);
}

TEST_CASE("encoder quantization is opt-in")
{
    PrismConfig c;
    const MotorAngle t{0.4321};
    CHECK(quantize(t, c).theta == t.theta);
    c.encoder_resolution_deg = 0.01;
    const double step = 0.01 * kPi / 180.0;
    const double q = quantize(t, c).theta;
    CHECK(std::abs(q - t.theta) <= step / 2 + 1e-15);
    CHECK(std::abs(q / step - std::round(q / step)) < 1e-9);
}

TEST_CASE("configuration validation")
{
    PrismConfig p;
    CHECK_NOTHROW(p.validate());
    p.n_sides = 2;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    GeometryContext g;
    CHECK_NOTHROW(g.validate());
    g.working_height_mm = 0.0;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    PrismConfig q;
    CHECK(q.sensor_y_mm() == doctest::Approx(std::sqrt(2.0) / 2.0 * q.circumradius_mm));
}

TEST_CASE("footprint grid is symmetric about the optical axis")
{
    const GeometryContext g;
    const CorrectedGrid grid = footprint_grid(g, 0.5);
    CHECK(grid.cols % 2 == 1);
    CHECK(grid.rows % 2 == 1);
    const MetricPoint c = grid.metric_of(grid.center_col(), grid.center_row());
    CHECK(std::abs(c.x_mm) < 1e-12);
    CHECK(std::abs(c.y_mm) < 1e-12);
    const PixelCoord p = grid.pixel_of(grid.metric_of(12.25, 40.5));
    CHECK(p.u == doctest::Approx(12.25));
    CHECK(p.v == doctest::Approx(40.5));
}
