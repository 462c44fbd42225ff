#include "prism/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace prism
{

namespace
{
// Tolerance on the scan-window ends; row <-> theta arithmetic can land an ulp outside.
constexpr double kAngleSlack = 1e-12;

void require_window(double theta, const char* what)
{
    if (!(theta >= kThetaMin - kAngleSlack && theta <= kThetaMax + kAngleSlack))
        throw std::out_of_range(std::string(what) + ": motor angle " + std::to_string(theta) +
                                " rad outside the scan window [pi/20, pi/4]");
}
}  // namespace

void PrismConfig::validate() const
{
    if (n_sides < 3)
        throw std::invalid_argument("prism: n_sides must be >= 3");
    if (!(circumradius_mm > 0.0))
        throw std::invalid_argument("prism: circumradius must be > 0");
    if (!(reflectivity > 0.0 && reflectivity <= 1.0))
        throw std::invalid_argument("prism: reflectivity must lie in (0, 1]");
    if (!(motor_speed_rpm > 0.0))
        throw std::invalid_argument("prism: motor speed must be > 0");
    if (!(gear_ratio > 0.0))
        throw std::invalid_argument("prism: gear ratio must be > 0");
    if (encoder_resolution_deg < 0.0)
        throw std::invalid_argument("prism: encoder resolution must be >= 0");
}

void GeometryContext::validate() const
{
    if (!(working_height_mm > 0.0))
        throw std::invalid_argument("geometry: working height must be > 0");
    if (!(line_resolution_dx_mm > 0.0))
        throw std::invalid_argument("geometry: line resolution must be > 0");
    if (rows < 2 || cols < 2)
        throw std::invalid_argument("geometry: raster must be at least 2x2");
}

double fov_degrees(int n_sides)
{
    if (n_sides < 3)
        throw std::invalid_argument("fov_degrees: a prism needs at least 3 sides");
    return 720.0 / static_cast<double>(n_sides);
}

ScannedAngle gamma_of_theta(MotorAngle theta)
{
    require_window(theta.theta, "gamma_of_theta");
    return {3.0 * kPi / 10.0 - 2.0 * theta.theta};
}

MotorAngle theta_of_row(int row, const GeometryContext& geom)
{
    if (row < 0 || row >= geom.rows)
        throw std::out_of_range("theta_of_row: row " + std::to_string(row) + " outside [0, " +
                                std::to_string(geom.rows) + ")");
    return {kThetaMin + (static_cast<double>(row) / (geom.rows - 1)) * kThetaSpan};
}

double row_of_theta(MotorAngle theta, const GeometryContext& geom) noexcept
{
    return (theta.theta - kThetaMin) / kThetaSpan * (geom.rows - 1);
}

double scaling_factor_k(MotorAngle theta)
{
    require_window(theta.theta, "scaling_factor_k");
    const double arg = kPi / 5.0 + 2.0 * theta.theta;
    if (std::abs(std::sin(arg)) < 1e-12)
        throw std::domain_error("scaling_factor_k: singular tangent argument");
    const double t = std::tan(arg);
    return std::sqrt(1.0 + 1.0 / (t * t));
}

MetricPoint metric_at(double u, MotorAngle theta, const GeometryContext& geom)
{
    const double gamma = gamma_of_theta(theta).gamma;
    const double k = scaling_factor_k(theta);
    return {(u - geom.center_col()) * geom.line_resolution_dx_mm * k, geom.working_height_mm * std::tan(gamma)};
}

MetricPoint pixel_to_metric(double u, double v, const GeometryContext& geom)
{
    if (!(u >= 0.0 && u <= geom.cols - 1.0 && v >= 0.0 && v <= geom.rows - 1.0))
        throw std::out_of_range("pixel_to_metric: pixel outside the raster");
    const MotorAngle theta{kThetaMin + v / (geom.rows - 1) * kThetaSpan};
    return metric_at(u, theta, geom);
}

PixelCoord metric_to_pixel_unchecked(MetricPoint p, const GeometryContext& geom) noexcept
{
    const double gamma = std::atan(p.y_mm / geom.working_height_mm);
    const double theta = (3.0 * kPi / 10.0 - gamma) / 2.0;
    const double v = (theta - kThetaMin) / kThetaSpan * (geom.rows - 1);
    // k(theta) = 1 / cos(gamma) on the window; using the identity keeps this total.
    const double k = 1.0 / std::cos(gamma);
    const double u = p.x_mm / (geom.line_resolution_dx_mm * k) + geom.center_col();
    return {u, v};
}

bool in_footprint(PixelCoord px, const GeometryContext& geom) noexcept
{
    constexpr double slack = 1e-9;
    return px.u >= -slack && px.u <= geom.cols - 1.0 + slack && px.v >= -slack && px.v <= geom.rows - 1.0 + slack;
}

PixelCoord metric_to_pixel(MetricPoint p, const GeometryContext& geom)
{
    const PixelCoord px = metric_to_pixel_unchecked(p, geom);
    if (!in_footprint(px, geom))
        throw std::out_of_range("metric_to_pixel: point (" + std::to_string(p.x_mm) + ", " + std::to_string(p.y_mm) +
                                ") mm outside the scanned footprint");
    return px;
}

double scan_duration_seconds(const PrismConfig& config)
{
    if (!(config.motor_speed_rpm > 0.0))
        throw std::invalid_argument("scan_duration_seconds: motor speed must be > 0");
    const double span_deg = kThetaSpan * 180.0 / kPi;  // 36 degrees
    const double deg_per_s = config.motor_speed_rpm * 360.0 / 60.0;
    return span_deg / deg_per_s;
}

MotorAngle quantize(MotorAngle theta, const PrismConfig& config) noexcept
{
    if (config.encoder_resolution_deg <= 0.0)
        return theta;
    const double step = config.encoder_resolution_deg * kPi / 180.0;
    return {std::round(theta.theta / step) * step};
}

double footprint_half_height(const GeometryContext& geom) noexcept
{
    return geom.working_height_mm * std::tan(kGammaMax);
}

double footprint_half_width_max(const GeometryContext& geom)
{
    return geom.center_col() * geom.line_resolution_dx_mm * scaling_factor_k({kThetaMin});
}

double footprint_half_width_min(const GeometryContext& geom) noexcept
{
    return geom.center_col() * geom.line_resolution_dx_mm;
}

}  // namespace prism
