#include "prism/resolution.hpp"

#include "prism/detection.hpp"

#include <cmath>
#include <stdexcept>

namespace prism
{

void ResolutionSettings::validate() const
{
    if (heights_mm.empty())
        throw std::invalid_argument("resolution: need at least one height");
    for (double h : heights_mm)
        if (!(h > 0.0))
            throw std::invalid_argument("resolution: heights must be > 0");
    if (!(reference_height_mm > 0.0) || !(reference_dx_mm > 0.0))
        throw std::invalid_argument("resolution: reference height and pitch must be > 0");
    if (cols < 8 || bands < 2 || bars < 2 || phases < 1)
        throw std::invalid_argument("resolution: need >= 8 columns, >= 2 bands, >= 2 bars, >= 1 phase");
    if (!(width_step_mm > 0.0) || !(angle_threshold_rad > 0.0))
        throw std::invalid_argument("resolution: width step and threshold must be > 0");
}

double line_pitch_at(double height_mm, const ResolutionSettings& settings)
{
    return settings.reference_dx_mm * height_mm / settings.reference_height_mm;
}

SceneDescription bar_target_scene(double width_mm, double offset_mm, int bars,
                                  const std::vector<double>& band_centers_nm)
{
    SceneDescription s;
    s.background = default_background(band_centers_nm);
    s.signatures = {default_textile_signatures(band_centers_nm).front()};
    const double bar_height = 10.0;
    for (int i = 0; i < bars; ++i)
    {
        const double cx = offset_mm + (2.0 * i + 0.5) * width_mm;
        s.objects.push_back({make_rectangle(cx, 0.0, width_mm, bar_height), 0, 0});
    }
    return s;
}

int count_foreground_runs(const FramePacket& frame, const SpectralSignature& background, double threshold_rad)
{
    int runs = 0;
    bool inside = false;
    for (int u = 0; u < frame.cols; ++u)
    {
        const bool fg = spectral_angle(frame.spectrum(u), background.reflectance.data(), frame.bands) > threshold_rad;
        if (fg && !inside)
            ++runs;
        inside = fg;
    }
    return runs;
}

bool target_resolved(double width_mm, double height_mm, const ResolutionSettings& settings)
{
    const double pitch = line_pitch_at(height_mm, settings);
    GeometryContext geom;
    geom.working_height_mm = height_mm;
    geom.line_resolution_dx_mm = pitch;
    geom.cols = settings.cols;
    const auto centers = linear_band_centers(settings.bands);
    // Centre row: gamma = 0, so the line sits on y = 0 with unit magnification.
    const MotorAngle centre{(kThetaMin + kThetaMax) / 2.0};
    for (int p = 0; p < settings.phases; ++p)
    {
        // Offsets avoid landing bar edges exactly on sample positions.
        const double offset = pitch * (p + 0.3) / settings.phases;
        const SceneDescription scene = bar_target_scene(width_mm, offset, settings.bars, centers);
        const FramePacket frame = render_frame(scene, centre, geom);
        if (count_foreground_runs(frame, scene.background, settings.angle_threshold_rad) != settings.bars)
            return false;
    }
    return true;
}

ResolutionRow resolve_at_height(double height_mm, const ResolutionSettings& settings)
{
    settings.validate();
    ResolutionRow row;
    row.height_mm = height_mm;
    row.line_pitch_mm = line_pitch_at(height_mm, settings);
    const double widest = std::max(2.0, 4.0 * row.line_pitch_mm);
    const auto steps = static_cast<int>(std::floor(widest / settings.width_step_mm + 1e-9));
    for (int i = steps; i >= 1; --i)
    {
        const double w = i * settings.width_step_mm;
        if (!target_resolved(w, height_mm, settings))
            break;
        row.smallest_resolved_mm = w;
    }
    return row;
}

std::vector<ResolutionRow> resolution_chart(const ResolutionSettings& settings, Execution exec)
{
    settings.validate();
    const int n = static_cast<int>(settings.heights_mm.size());
    std::vector<ResolutionRow> rows(static_cast<std::size_t>(n));
    if (exec == Execution::parallel)
    {
#pragma omp parallel for schedule(dynamic, 1)
        for (int i = 0; i < n; ++i)
            rows[std::size_t(i)] = resolve_at_height(settings.heights_mm[std::size_t(i)], settings);
    }
    else
    {
        for (int i = 0; i < n; ++i)
            rows[std::size_t(i)] = resolve_at_height(settings.heights_mm[std::size_t(i)], settings);
    }
    return rows;
}

}  // namespace prism
