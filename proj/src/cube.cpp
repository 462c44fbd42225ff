#include "prism/cube.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace prism
{

HyperspectralCube::HyperspectralCube(int rows, int cols, int bands, float fill)
    : rows_(rows), cols_(cols), bands_(bands)
{
    if (rows < 0 || cols < 0 || bands < 0)
        throw std::invalid_argument("HyperspectralCube: negative dimension");
    data_.assign(std::size_t(rows) * cols * bands, fill);
}

// ---------------------------------------------------------------------------
// Reconstruction

HyperspectralCube reconstruct(std::span<const FramePacket> frames, const GeometryContext& geom,
                              const std::vector<double>& band_centers_nm)
{
    geom.validate();
    if (frames.empty())
        throw std::invalid_argument("reconstruct: empty frame stream");
    const int bands = frames.front().bands;
    for (const auto& f : frames)
    {
        if (f.cols != geom.cols)
            throw std::invalid_argument("reconstruct: frame width " + std::to_string(f.cols) +
                                        " does not match geometry width " + std::to_string(geom.cols));
        if (f.bands != bands || f.samples.size() != std::size_t(f.cols) * f.bands)
            throw std::invalid_argument("reconstruct: inconsistent frame band count");
    }
    if (!band_centers_nm.empty() && band_centers_nm.size() != std::size_t(bands))
        throw std::invalid_argument("reconstruct: band centre list does not match frame band count");

    // Pick, per row, the packet nearest in angle. Ties resolve on angle, then time, then
    // payload, so the choice is independent of arrival order.
    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> chosen(std::size_t(geom.rows), none);
    std::vector<double> chosen_dist(std::size_t(geom.rows), INFINITY);
    const auto better = [&](std::size_t a, std::size_t b, double da, double db) {
        if (da != db)
            return da < db;
        const auto& fa = frames[a];
        const auto& fb = frames[b];
        if (fa.theta.theta != fb.theta.theta)
            return fa.theta.theta < fb.theta.theta;
        if (fa.timestamp_s != fb.timestamp_s)
            return fa.timestamp_s < fb.timestamp_s;
        return std::lexicographical_compare(fa.samples.begin(), fa.samples.end(), fb.samples.begin(),
                                            fb.samples.end());
    };
    for (std::size_t i = 0; i < frames.size(); ++i)
    {
        const double rf = row_of_theta(frames[i].theta, geom);
        const double r = std::round(rf);
        if (r < 0.0 || r > geom.rows - 1.0)
            continue;
        const auto ri = static_cast<std::size_t>(r);
        const double d = std::abs(rf - r);
        if (chosen[ri] == none || better(i, chosen[ri], d, chosen_dist[ri]))
        {
            chosen[ri] = i;
            chosen_dist[ri] = d;
        }
    }

    std::vector<int> captured;
    for (int r = 0; r < geom.rows; ++r)
        if (chosen[std::size_t(r)] != none)
            captured.push_back(r);
    if (captured.empty())
        throw std::invalid_argument("reconstruct: no frame falls inside the scan window");

    HyperspectralCube cube(geom.rows, geom.cols, bands);
    cube.geom = geom;
    cube.band_centers_nm = band_centers_nm;
    cube.interpolated_rows.assign(std::size_t(geom.rows), 1);
    const std::size_t row_len = std::size_t(geom.cols) * bands;
    for (int r : captured)
    {
        const auto& f = frames[chosen[std::size_t(r)]];
        std::copy(f.samples.begin(), f.samples.end(), cube.spectrum(r, 0));
        cube.interpolated_rows[std::size_t(r)] = 0;
    }

    // Fill gaps from the bracketing captured rows; copy at the ends.
    std::size_t next = 0;
    for (int r = 0; r < geom.rows; ++r)
    {
        if (!cube.interpolated_rows[std::size_t(r)])
            continue;
        while (next < captured.size() && captured[next] < r)
            ++next;
        const int hi = next < captured.size() ? captured[next] : -1;
        const int lo = next > 0 ? captured[next - 1] : -1;
        float* dst = cube.spectrum(r, 0);
        if (lo < 0 || hi < 0)
        {
            const float* src = cube.spectrum(lo < 0 ? hi : lo, 0);
            std::copy(src, src + row_len, dst);
            continue;
        }
        const double t = double(r - lo) / double(hi - lo);
        const float* a = cube.spectrum(lo, 0);
        const float* b = cube.spectrum(hi, 0);
        for (std::size_t i = 0; i < row_len; ++i)
            dst[i] = static_cast<float>(a[i] + t * (double(b[i]) - a[i]));
    }
    return cube;
}

// ---------------------------------------------------------------------------
// Correction

CorrectionMap CorrectionMap::identity(const GeometryContext& geom, double pitch_mm)
{
    CorrectionMap m;
    m.geom = geom;
    m.grid = {pitch_mm, geom.cols, geom.rows, 0.0, 0.0};
    const std::size_t n = std::size_t(geom.rows) * geom.cols;
    m.src_u.resize(n);
    m.src_v.resize(n);
    m.valid.assign(n, 1);
    for (int r = 0; r < geom.rows; ++r)
        for (int c = 0; c < geom.cols; ++c)
        {
            m.src_u[std::size_t(r) * geom.cols + c] = c;
            m.src_v[std::size_t(r) * geom.cols + c] = r;
        }
    return m;
}

CorrectionMap build_correction_map(const GeometryContext& geom, double target_pitch_mm)
{
    geom.validate();
    if (!(target_pitch_mm > 0.0))
        throw std::invalid_argument("build_correction_map: target pitch must be > 0");
    CorrectionMap m;
    m.geom = geom;
    m.grid = footprint_grid(geom, target_pitch_mm);
    const std::size_t n = std::size_t(m.grid.rows) * m.grid.cols;
    m.src_u.resize(n);
    m.src_v.resize(n);
    m.valid.resize(n);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < m.grid.rows; ++r)
        for (int c = 0; c < m.grid.cols; ++c)
        {
            const std::size_t i = std::size_t(r) * m.grid.cols + c;
            const PixelCoord px = metric_to_pixel_unchecked(m.grid.metric_of(c, r), geom);
            m.src_u[i] = px.u;
            m.src_v[i] = px.v;
            m.valid[i] = in_footprint(px, geom) ? 1 : 0;
        }
    return m;
}

namespace
{
void resample_row(const HyperspectralCube& src, const CorrectionMap& map, HyperspectralCube& dst, int r)
{
    const int bands = src.bands();
    const int cols = map.grid.cols;
    for (int c = 0; c < cols; ++c)
    {
        const std::size_t i = std::size_t(r) * cols + c;
        float* out = dst.spectrum(r, c);
        if (!map.valid[i])
        {
            std::fill(out, out + bands, kOutOfFootprint);
            continue;
        }
        const double u = std::clamp(map.src_u[i], 0.0, src.cols() - 1.0);
        const double v = std::clamp(map.src_v[i], 0.0, src.rows() - 1.0);
        const int u0 = std::min(static_cast<int>(u), src.cols() - 2);
        const int v0 = std::min(static_cast<int>(v), src.rows() - 2);
        const double a = u - u0;
        const double b = v - v0;
        const float* s00 = src.spectrum(v0, u0);
        const float* s01 = src.spectrum(v0, u0 + 1);
        const float* s10 = src.spectrum(v0 + 1, u0);
        const float* s11 = src.spectrum(v0 + 1, u0 + 1);
        // Lerp-of-lerps in double: constants pass through exactly and every output stays
        // inside the hull of its four inputs after rounding back to float.
        for (int k = 0; k < bands; ++k)
        {
            const double top = s00[k] + a * (double(s01[k]) - s00[k]);
            const double bot = s10[k] + a * (double(s11[k]) - s10[k]);
            out[k] = static_cast<float>(top + b * (bot - top));
        }
    }
}
}  // namespace

HyperspectralCube correct_distortion(const HyperspectralCube& cube, const CorrectionMap& map, Execution exec)
{
    if (cube.corrected)
        throw std::invalid_argument("correct_distortion: cube is already corrected");
    if (!(cube.geom == map.geom) || cube.rows() != map.geom.rows || cube.cols() != map.geom.cols)
        throw std::invalid_argument("correct_distortion: correction map was built for a different geometry");

    HyperspectralCube out(map.grid.rows, map.grid.cols, cube.bands());
    out.geom = cube.geom;
    out.corrected = true;
    out.band_centers_nm = cube.band_centers_nm;
    out.grid = map.grid;
    out.valid = map.valid;
    if (exec == Execution::parallel)
    {
#pragma omp parallel for schedule(static)
        for (int r = 0; r < map.grid.rows; ++r)
            resample_row(cube, map, out, r);
    }
    else
    {
        for (int r = 0; r < map.grid.rows; ++r)
            resample_row(cube, map, out, r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pseudo-RGB

int nearest_band(const std::vector<double>& centers, double wavelength_nm)
{
    if (centers.empty())
        throw std::invalid_argument("nearest_band: no band centres");
    int best = 0;
    for (int i = 1; i < static_cast<int>(centers.size()); ++i)
        if (std::abs(centers[std::size_t(i)] - wavelength_nm) < std::abs(centers[std::size_t(best)] - wavelength_nm))
            best = i;
    return best;
}

RgbImage pseudo_rgb(const HyperspectralCube& cube, std::array<double, 3> wavelengths_nm)
{
    if (cube.bands() < 3)
        throw std::invalid_argument("pseudo_rgb: need at least 3 bands");
    std::array<int, 3> band{};
    for (int ch = 0; ch < 3; ++ch)
    {
        if (cube.band_centers_nm.empty())
            band[std::size_t(ch)] = std::min(cube.bands() - 1, (2 - ch) * (cube.bands() - 1) / 2);
        else
            band[std::size_t(ch)] = nearest_band(cube.band_centers_nm, wavelengths_nm[std::size_t(ch)]);
    }

    RgbImage img{cube.rows(), cube.cols(), std::vector<float>(cube.pixel_count() * 3, 0.0f)};
    for (int ch = 0; ch < 3; ++ch)
    {
        float lo = INFINITY, hi = -INFINITY;
        for (int r = 0; r < cube.rows(); ++r)
            for (int c = 0; c < cube.cols(); ++c)
                if (cube.is_valid(r, c))
                {
                    const float x = cube.at(r, c, band[std::size_t(ch)]);
                    lo = std::min(lo, x);
                    hi = std::max(hi, x);
                }
        for (int r = 0; r < cube.rows(); ++r)
            for (int c = 0; c < cube.cols(); ++c)
            {
                if (!cube.is_valid(r, c))
                    continue;
                const float x = cube.at(r, c, band[std::size_t(ch)]);
                img.pixel(r, c)[ch] = hi > lo ? (x - lo) / (hi - lo) : std::clamp(x, 0.0f, 1.0f);
            }
    }
    return img;
}

}  // namespace prism
