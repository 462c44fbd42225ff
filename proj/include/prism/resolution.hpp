#pragma once
/**
 * @file   resolution.hpp
 * @brief  Bar-target resolution sweep: smallest bar width whose bars stay
 *         separable in a rendered line, per working height.
 */

#include "prism/geometry.hpp"
#include "prism/parallel.hpp"
#include "prism/scene.hpp"

#include <vector>

namespace prism
{

struct ResolutionSettings
{
    std::vector<double> heights_mm{300.0, 450.0, 600.0, 750.0, 900.0};
    double reference_height_mm = 600.0;  ///< line pitch scales linearly with height from this point
    double reference_dx_mm = 0.5;
    int cols = 512;
    int bands = 16;
    int bars = 3;
    int phases = 4;              ///< sub-pixel target offsets tried per width
    double width_step_mm = 0.01;
    double angle_threshold_rad = 0.08;

    void validate() const;
};

struct ResolutionRow
{
    double height_mm = 0.0;
    double line_pitch_mm = 0.0;
    double smallest_resolved_mm = 0.0;  ///< 0 if even the widest target failed
};

/// Line pitch at `height_mm`: reference_dx * height / reference_height.
[[nodiscard]] double line_pitch_at(double height_mm, const ResolutionSettings& settings);

/// `bars` bars of width `width_mm` separated by equal gaps, starting at x = offset_mm, centred on y = 0.
[[nodiscard]] SceneDescription bar_target_scene(double width_mm, double offset_mm, int bars,
                                                const std::vector<double>& band_centers_nm);

/// Number of maximal foreground runs along one rendered line.
[[nodiscard]] int count_foreground_runs(const FramePacket& frame, const SpectralSignature& background,
                                        double threshold_rad);

/// True when every phase of the target shows exactly `bars` runs.
[[nodiscard]] bool target_resolved(double width_mm, double height_mm, const ResolutionSettings& settings);

/// Sweeps widths from wide to narrow and stops at the first failure.
[[nodiscard]] ResolutionRow resolve_at_height(double height_mm, const ResolutionSettings& settings);

[[nodiscard]] std::vector<ResolutionRow> resolution_chart(const ResolutionSettings& settings,
                                                          Execution exec = Execution::parallel);

}  // namespace prism
