#pragma once
/**
 * @file   detection.hpp
 * @brief  Object segmentation, pixel-to-object label aggregation and
 *         suction point ranking.
 */

#include "prism/classifier.hpp"
#include "prism/cube.hpp"
#include "prism/mnf.hpp"
#include "prism/parallel.hpp"
#include "prism/scene.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace prism
{

/// One object instance; the bitmap covers only its bounding box.
struct SegmentationMask
{
    int instance_id = 0;
    int image_rows = 0;
    int image_cols = 0;
    int row0 = 0;  ///< bounding box origin
    int col0 = 0;
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> bits;  ///< height x width

    [[nodiscard]] bool contains(int row, int col) const noexcept
    {
        const int r = row - row0, c = col - col0;
        return r >= 0 && c >= 0 && r < height && c < width && bits[std::size_t(r) * width + c] != 0;
    }
    [[nodiscard]] std::size_t area() const noexcept;

    /// Pixel indices (row * image_cols + col) in raster order.
    [[nodiscard]] std::vector<std::size_t> pixels() const;

    /// Builds a mask from a full-image bitmap (bounding box is computed).
    [[nodiscard]] static SegmentationMask from_bitmap(int instance_id, int rows, int cols,
                                                      std::span<const std::uint8_t> bitmap);
};

/// Full-image union of a set of masks.
[[nodiscard]] std::vector<std::uint8_t> union_mask(std::span<const SegmentationMask> masks, int rows, int cols);

struct SegmenterSettings
{
    double angle_threshold_rad = 0.08;
    int min_area = 25;
};

/// Angle in radians between two spectra treated as vectors.
[[nodiscard]] double spectral_angle(const float* a, const double* b, int bands) noexcept;

/// 1 where a valid pixel's spectral angle to the background exceeds the threshold.
[[nodiscard]] std::vector<std::uint8_t> foreground_map(const HyperspectralCube& cube,
                                                       const SpectralSignature& background, double threshold_rad,
                                                       Execution exec = Execution::parallel);

/// 4-connected components of a binary map with at least min_area pixels, ids 1.. in raster order.
[[nodiscard]] std::vector<SegmentationMask> connected_components(std::span<const std::uint8_t> binary, int rows,
                                                                 int cols, int min_area);

/// Source of object masks; the spectral-angle segmenter is the shipped implementation.
class MaskSource
{
  public:
    virtual ~MaskSource() = default;
    [[nodiscard]] virtual std::vector<SegmentationMask> segment(const HyperspectralCube& cube) const = 0;
};

class SpectralAngleSegmenter final : public MaskSource
{
  public:
    SpectralAngleSegmenter(SpectralSignature background, SegmenterSettings settings = {},
                           Execution exec = Execution::parallel);
    [[nodiscard]] std::vector<SegmentationMask> segment(const HyperspectralCube& cube) const override;

  private:
    SpectralSignature background_;
    SegmenterSettings settings_;
    Execution exec_;
};

/// Foreground by spectral angle against the background, then connected components.
/// An empty result means no objects remain.
[[nodiscard]] std::vector<SegmentationMask> segment_objects(const HyperspectralCube& cube,
                                                            const SpectralSignature& background,
                                                            const SegmenterSettings& settings = {},
                                                            Execution exec = Execution::parallel);

struct BoundingBox
{
    int row0 = 0, col0 = 0, row1 = 0, col1 = 0;  ///< inclusive
};

struct SuctionPoint
{
    double col = 0.0;
    double row = 0.0;
    double clearance_mm = 0.0;  ///< distance to the nearest pixel outside the mask
};

inline constexpr int kUnknownClass = -1;

struct DetectedObject
{
    int instance_id = 0;
    int class_label = kUnknownClass;  ///< class index, or kUnknownClass
    double purity = 0.0;              ///< share of surviving pixels that voted for class_label
    int pixel_count = 0;
    int votes_kept = 0;  ///< pixels left after the outlier filter
    BoundingBox bbox;
    double centroid_col = 0.0;
    double centroid_row = 0.0;
    std::vector<SuctionPoint> suction_points;
};

struct AggregationSettings
{
    int pca_components = 3;
    double outlier_percentile = 0.95;
    int min_votable_pixels = 5;
};

struct SuctionSettings
{
    int count = 3;
    double cup_radius_mm = 12.0;
};

struct Vote
{
    int label = kUnknownClass;
    double purity = 0.0;
    int kept = 0;
};

/// Majority vote over pixel labels (class index + 1, 0 never votes). When `features` has
/// one row per pixel, pixels whose reconstruction error from the top principal components
/// exceeds the configured percentile are discarded first. Ties go to the larger summed
/// confidence, then the lower class.
[[nodiscard]] Vote vote_object_label(std::span<const int> labels, std::span<const float> confidence,
                                     const Eigen::MatrixXd& features, int class_count,
                                     const AggregationSettings& settings = {});

/// Exact Euclidean distance (in pixels) from every pixel to the nearest zero pixel; pixels
/// beyond the border count as zero.
[[nodiscard]] std::vector<double> distance_transform(std::span<const std::uint8_t> bits, int rows, int cols);

/// Ranked grasp points: the centroid (or the interior pixel nearest it) first, then interior
/// pixels of largest clearance at least one cup radius from every earlier point.
[[nodiscard]] std::vector<SuctionPoint> suction_points(const SegmentationMask& mask, double pitch_mm,
                                                       const SuctionSettings& settings = {});

/// Object-level labels, geometry and suction points for every mask. Pixel spectra are
/// MNF-reduced for the outlier filter.
[[nodiscard]] std::vector<DetectedObject> aggregate_objects(const PixelLabelMap& labels,
                                                            std::span<const SegmentationMask> masks,
                                                            const HyperspectralCube& cube, const MnfModel& mnf,
                                                            const AggregationSettings& aggregation = {},
                                                            const SuctionSettings& suction = {},
                                                            Execution exec = Execution::parallel);

/// Draws boxes in class colours and suction point markers onto a preview image.
void draw_detections(RgbImage& image, std::span<const DetectedObject> objects);

/// Distinct display colour for a class index (grey for unknown).
[[nodiscard]] std::array<float, 3> class_color(int class_label) noexcept;

}  // namespace prism
