#pragma once
/**
 * @file   geometry.hpp
 * @brief  Rotational-reflection scan geometry: motor/scan angle mappings,
 *         field of view, per-row scaling and pixel <-> metric transforms.
 *
 * Conventions: angles are radians, lengths are millimetres. Row 0 of a
 * scan is the first acquired line and corresponds to the largest motor
 * angle offset from the window start, i.e. gamma = +pi/5. Column origin
 * is the image midline, so the optical axis maps to x = 0.
 */

#include <numbers>

namespace prism
{

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kThetaMin = kPi / 20.0;  ///< start of the scan window
inline constexpr double kThetaMax = kPi / 4.0;   ///< end of the scan window
inline constexpr double kThetaSpan = kPi / 5.0;  ///< kThetaMax - kThetaMin
inline constexpr double kGammaMax = kPi / 5.0;   ///< |gamma| bound

struct MotorAngle
{
    double theta = kThetaMin;
};

struct ScannedAngle
{
    double gamma = 0.0;
};

/// Mechanical description of the rotating prism and its drive.
struct PrismConfig
{
    int n_sides = 10;
    double circumradius_mm = 60.0;
    double sensor_x_mm = 0.0;  ///< x of the sensor point; carried, not used by any mapping
    double reflectivity = 0.95;
    double motor_speed_rpm = 3.0;
    double gear_ratio = 10.0;
    double encoder_resolution_deg = 0.0;  ///< 0 keeps exact angles

    /// Sensor y sits at sqrt(2)/2 times the circumradius.
    [[nodiscard]] double sensor_y_mm() const noexcept { return std::numbers::sqrt2 / 2.0 * circumradius_mm; }

    void validate() const;
};

/// Imaging geometry of one scan: detection height, line pitch and raster size.
struct GeometryContext
{
    double working_height_mm = 600.0;
    double line_resolution_dx_mm = 0.5;
    int rows = 871;
    int cols = 512;

    [[nodiscard]] double center_col() const noexcept { return (cols - 1) / 2.0; }
    void validate() const;

    friend bool operator==(const GeometryContext&, const GeometryContext&) = default;
};

struct MetricPoint
{
    double x_mm = 0.0;
    double y_mm = 0.0;
};

struct PixelCoord
{
    double u = 0.0;  ///< column, fractional
    double v = 0.0;  ///< row, fractional
};

/// Field of view in degrees of an n-sided prism: 720 / n.
[[nodiscard]] double fov_degrees(int n_sides);

/// gamma = 3pi/10 - 2 theta. Throws std::out_of_range outside [pi/20, pi/4].
[[nodiscard]] ScannedAngle gamma_of_theta(MotorAngle theta);

/// Motor angle of an integer row; rows are uniform in theta.
[[nodiscard]] MotorAngle theta_of_row(int row, const GeometryContext& geom);

/// Fractional row of a motor angle (inverse of theta_of_row, unchecked).
[[nodiscard]] double row_of_theta(MotorAngle theta, const GeometryContext& geom) noexcept;

/// Horizontal magnification of the line imaged at theta, sqrt(1 + cot^2(pi/5 + 2 theta)).
[[nodiscard]] double scaling_factor_k(MotorAngle theta);

/// Metric position of column u on the line imaged at motor angle theta.
[[nodiscard]] MetricPoint metric_at(double u, MotorAngle theta, const GeometryContext& geom);

/// Metric position of pixel (u, v); both may be fractional but must lie inside the raster.
[[nodiscard]] MetricPoint pixel_to_metric(double u, double v, const GeometryContext& geom);

/// Inverse of pixel_to_metric. Throws std::out_of_range outside the scanned footprint.
[[nodiscard]] PixelCoord metric_to_pixel(MetricPoint p, const GeometryContext& geom);

/// Same as metric_to_pixel but never throws; coordinates may fall outside the raster.
[[nodiscard]] PixelCoord metric_to_pixel_unchecked(MetricPoint p, const GeometryContext& geom) noexcept;

[[nodiscard]] bool in_footprint(PixelCoord px, const GeometryContext& geom) noexcept;

/// Seconds needed to sweep the pi/5 motor window at the configured speed.
[[nodiscard]] double scan_duration_seconds(const PrismConfig& config);

/// Round theta to the encoder grid when encoder_resolution_deg > 0.
[[nodiscard]] MotorAngle quantize(MotorAngle theta, const PrismConfig& config) noexcept;

/// Extreme |y| of the footprint: h * tan(pi/5).
[[nodiscard]] double footprint_half_height(const GeometryContext& geom) noexcept;

/// Extreme |x| of the footprint, reached on the outermost rows.
[[nodiscard]] double footprint_half_width_max(const GeometryContext& geom);

/// |x| half-width of the always-visible band (center row).
[[nodiscard]] double footprint_half_width_min(const GeometryContext& geom) noexcept;

}  // namespace prism
