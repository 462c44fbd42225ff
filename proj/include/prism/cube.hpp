#pragma once
/**
 * @file   cube.hpp
 * @brief  Hyperspectral cube storage, reconstruction from a frame stream and
 *         curvature-distortion correction onto a uniform metric grid.
 */

#include "prism/geometry.hpp"
#include "prism/grid.hpp"
#include "prism/parallel.hpp"
#include "prism/scene.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace prism
{

/// Rows x cols x bands cube, stored pixel-interleaved (band fastest).
class HyperspectralCube
{
  public:
    HyperspectralCube() = default;
    HyperspectralCube(int rows, int cols, int bands, float fill = 0.0f);

    [[nodiscard]] int rows() const noexcept { return rows_; }
    [[nodiscard]] int cols() const noexcept { return cols_; }
    [[nodiscard]] int bands() const noexcept { return bands_; }
    [[nodiscard]] std::size_t pixel_count() const noexcept { return std::size_t(rows_) * cols_; }

    [[nodiscard]] float* spectrum(int row, int col) noexcept { return data_.data() + offset(row, col); }
    [[nodiscard]] const float* spectrum(int row, int col) const noexcept { return data_.data() + offset(row, col); }
    [[nodiscard]] float& at(int row, int col, int band) noexcept { return data_[offset(row, col) + band]; }
    [[nodiscard]] float at(int row, int col, int band) const noexcept { return data_[offset(row, col) + band]; }

    [[nodiscard]] std::span<float> data() noexcept { return data_; }
    [[nodiscard]] std::span<const float> data() const noexcept { return data_; }

    GeometryContext geom;
    bool corrected = false;
    std::vector<double> band_centers_nm;
    /// Uncorrected cubes: 1 for rows filled by interpolation rather than a captured frame.
    std::vector<std::uint8_t> interpolated_rows;
    /// Corrected cubes: metric grid and 1 for pixels inside the scanned footprint.
    std::optional<CorrectedGrid> grid;
    std::vector<std::uint8_t> valid;

    [[nodiscard]] bool is_valid(int row, int col) const noexcept
    {
        return valid.empty() || valid[std::size_t(row) * cols_ + col] != 0;
    }

  private:
    [[nodiscard]] std::size_t offset(int row, int col) const noexcept
    {
        return (std::size_t(row) * cols_ + col) * bands_;
    }

    int rows_ = 0;
    int cols_ = 0;
    int bands_ = 0;
    std::vector<float> data_;
};

/// Places each packet on the row whose motor angle is nearest its recorded angle.
/// Rows no packet reaches are filled by linear interpolation between the nearest
/// captured rows and flagged. The result does not depend on packet order.
[[nodiscard]] HyperspectralCube reconstruct(std::span<const FramePacket> frames, const GeometryContext& geom,
                                            const std::vector<double>& band_centers_nm = {});

/// Inverse-warp table: for every target pixel, the fractional source pixel it samples.
struct CorrectionMap
{
    GeometryContext geom;
    CorrectedGrid grid;
    std::vector<double> src_u;
    std::vector<double> src_v;
    std::vector<std::uint8_t> valid;

    [[nodiscard]] std::size_t size() const noexcept { return src_u.size(); }

    /// Map whose target grid coincides with the source raster (used to check idempotence).
    [[nodiscard]] static CorrectionMap identity(const GeometryContext& geom, double pitch_mm = 1.0);
};

[[nodiscard]] CorrectionMap build_correction_map(const GeometryContext& geom, double target_pitch_mm);

/// Default target pitch: the centre-line pitch of the source.
[[nodiscard]] inline CorrectionMap build_correction_map(const GeometryContext& geom)
{
    return build_correction_map(geom, geom.line_resolution_dx_mm);
}

/// Value written to out-of-footprint targets (which are also masked invalid).
inline constexpr float kOutOfFootprint = 0.0f;

/// Bilinear, band-by-band resampling of an uncorrected cube through a correction map.
[[nodiscard]] HyperspectralCube correct_distortion(const HyperspectralCube& cube, const CorrectionMap& map,
                                                   Execution exec = Execution::parallel);

/// Index of the band whose centre is nearest the requested wavelength (ties go low).
[[nodiscard]] int nearest_band(const std::vector<double>& band_centers_nm, double wavelength_nm);

struct RgbImage
{
    int rows = 0;
    int cols = 0;
    std::vector<float> pixels;  ///< rows x cols x 3, each in [0, 1]

    [[nodiscard]] float* pixel(int r, int c) noexcept { return pixels.data() + (std::size_t(r) * cols + c) * 3; }
    [[nodiscard]] const float* pixel(int r, int c) const noexcept
    {
        return pixels.data() + (std::size_t(r) * cols + c) * 3;
    }
};

/// Three-band preview. Each channel is min-max stretched to [0, 1] over valid pixels;
/// a channel with no spread keeps its (clamped) value, so constant cubes come out gray.
[[nodiscard]] RgbImage pseudo_rgb(const HyperspectralCube& cube,
                                  std::array<double, 3> wavelengths_nm = {650.0, 550.0, 450.0});

}  // namespace prism
