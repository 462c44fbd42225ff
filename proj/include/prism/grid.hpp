#pragma once

#include "prism/geometry.hpp"

#include <cmath>

namespace prism
{

/// Uniform metric raster used by corrected cubes and ground-truth maps.
/// Pixel (0, 0) sits at (x0_mm, y0_mm); columns grow +x, rows grow -y.
struct CorrectedGrid
{
    double pitch_mm = 0.5;
    int cols = 0;
    int rows = 0;
    double x0_mm = 0.0;
    double y0_mm = 0.0;

    [[nodiscard]] MetricPoint metric_of(double col, double row) const noexcept
    {
        return {x0_mm + col * pitch_mm, y0_mm - row * pitch_mm};
    }

    [[nodiscard]] PixelCoord pixel_of(MetricPoint p) const noexcept
    {
        return {(p.x_mm - x0_mm) / pitch_mm, (y0_mm - p.y_mm) / pitch_mm};
    }

    [[nodiscard]] double center_col() const noexcept { return (cols - 1) / 2.0; }
    [[nodiscard]] double center_row() const noexcept { return (rows - 1) / 2.0; }

    friend bool operator==(const CorrectedGrid&, const CorrectedGrid&) = default;
};

/// Symmetric grid covering the whole scanned footprint, with a pixel centred on the optical axis.
[[nodiscard]] inline CorrectedGrid footprint_grid(const GeometryContext& geom, double pitch_mm)
{
    const int half_cols = static_cast<int>(std::ceil(footprint_half_width_max(geom) / pitch_mm - 1e-9));
    const int half_rows = static_cast<int>(std::ceil(footprint_half_height(geom) / pitch_mm - 1e-9));
    CorrectedGrid g;
    g.pitch_mm = pitch_mm;
    g.cols = 2 * half_cols + 1;
    g.rows = 2 * half_rows + 1;
    g.x0_mm = -half_cols * pitch_mm;
    g.y0_mm = half_rows * pitch_mm;
    return g;
}

}  // namespace prism
