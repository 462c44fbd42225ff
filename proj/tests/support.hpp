#pragma once
// Shared fixtures for the unit and acceptance tests.

#include "prism/cube.hpp"
#include "prism/geometry.hpp"
#include "prism/scene.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace prism::testing
{

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("prism_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Small raster for fast scene -> cube round trips.
inline GeometryContext small_geometry(int rows = 121, int cols = 96, double dx = 2.0)
{
    GeometryContext g;
    g.rows = rows;
    g.cols = cols;
    g.line_resolution_dx_mm = dx;
    return g;
}

/// Cube of independent uniform values.
inline HyperspectralCube random_cube(int rows, int cols, int bands, std::uint64_t seed)
{
    HyperspectralCube c(rows, cols, bands);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (auto& v : c.data())
        v = u(rng);
    return c;
}

/// Cube with a few smooth latent sources mixed into `bands` bands plus white noise of
/// band-dependent strength, so signal and noise covariances differ.
inline HyperspectralCube mixed_source_cube(int rows, int cols, int bands, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    const int sources = 3;
    Eigen::MatrixXd mix(bands, sources);
    for (int b = 0; b < bands; ++b)
        for (int s = 0; s < sources; ++s)
            mix(b, s) = n01(rng);
    Eigen::VectorXd noise_scale(bands);
    for (int b = 0; b < bands; ++b)
        noise_scale(b) = 0.05 * u(rng);
    std::vector<double> fx(sources), fy(sources), ph(sources);
    for (int s = 0; s < sources; ++s)
    {
        fx[std::size_t(s)] = 0.05 + 0.1 * u(rng);
        fy[std::size_t(s)] = 0.05 + 0.1 * u(rng);
        ph[std::size_t(s)] = 3.0 * u(rng);
    }
    HyperspectralCube c(rows, cols, bands);
    for (int r = 0; r < rows; ++r)
        for (int col = 0; col < cols; ++col)
        {
            Eigen::VectorXd z(sources);
            for (int s = 0; s < sources; ++s)
                z(s) = std::sin(fx[std::size_t(s)] * col + fy[std::size_t(s)] * r + ph[std::size_t(s)]);
            const Eigen::VectorXd x = mix * z;
            for (int b = 0; b < bands; ++b)
                c.at(r, col, b) = static_cast<float>(x(b) + noise_scale(b) * n01(rng));
        }
    return c;
}

/// Axis-aligned checkerboard of `square_mm` squares alternating two signatures over a
/// plane large enough to cover the scanned footprint.
inline SceneDescription checkerboard_scene(const GeometryContext& geom, double square_mm,
                                           const std::vector<double>& centers)
{
    SceneDescription s;
    const auto sigs = default_textile_signatures(centers);
    s.background = default_background(centers);
    s.signatures = {sigs[0], sigs[1]};
    const double half_w = footprint_half_width_max(geom) + square_mm;
    const double half_h = footprint_half_height(geom) + square_mm;
    s.plane_width_mm = 2.0 * half_w;
    s.plane_height_mm = 2.0 * half_h;
    const int nx = static_cast<int>(std::ceil(half_w / square_mm));
    const int ny = static_cast<int>(std::ceil(half_h / square_mm));
    for (int iy = -ny; iy < ny; ++iy)
        for (int ix = -nx; ix < nx; ++ix)
        {
            const double cx = (ix + 0.5) * square_mm, cy = (iy + 0.5) * square_mm;
            if (std::abs(cx) + square_mm / 2 > half_w || std::abs(cy) + square_mm / 2 > half_h)
                continue;
            s.objects.push_back({make_rectangle(cx, cy, square_mm, square_mm), ((ix + iy) % 2 + 2) % 2, 0});
        }
    return s;
}

/// Lengths of interior runs (both ends bounded by a label change) of a label row,
/// ignoring runs that touch an invalid pixel.
inline std::vector<int> interior_run_lengths(const std::vector<int>& labels, const std::vector<bool>& valid)
{
    std::vector<int> out;
    const int n = static_cast<int>(labels.size());
    int start = -1;
    for (int i = 1; i < n; ++i)
    {
        if (!valid[std::size_t(i)] || !valid[std::size_t(i - 1)])
        {
            start = -1;
            continue;
        }
        if (labels[std::size_t(i)] != labels[std::size_t(i - 1)])
        {
            if (start >= 0)
                out.push_back(i - start);
            start = i;
        }
    }
    return out;
}

}  // namespace prism::testing
