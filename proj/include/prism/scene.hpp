#pragma once
/**
 * @file   scene.hpp
 * @brief  Synthetic ground-truth scenes and the forward model that turns
 *         them into the (frame, motor angle) stream a rotating-prism
 *         line-scan camera emits.
 */

#include "prism/geometry.hpp"
#include "prism/grid.hpp"
#include "prism/parallel.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace prism
{

struct SpectralSignature
{
    std::string class_name;
    std::vector<double> reflectance;  ///< one value per band, in [0, 1]
    std::vector<double> band_centers_nm;

    [[nodiscard]] std::size_t bands() const noexcept { return reflectance.size(); }
    void validate() const;
};

/// Linear resampling of a signature onto new band centres (clamped at the ends).
[[nodiscard]] SpectralSignature resample(const SpectralSignature& sig, const std::vector<double>& band_centers_nm);

/// N band centres evenly spread over [first_nm, last_nm].
[[nodiscard]] std::vector<double> linear_band_centers(int bands, double first_nm = 400.0, double last_nm = 1000.0);

/// Four smooth, mutually distinct reflectance curves standing in for linen, silk, wool and acetate.
[[nodiscard]] std::vector<SpectralSignature> default_textile_signatures(const std::vector<double>& band_centers_nm);

/// Bright, nearly flat work-surface reflectance.
[[nodiscard]] SpectralSignature default_background(const std::vector<double>& band_centers_nm);

struct Polygon
{
    std::vector<MetricPoint> vertices;

    [[nodiscard]] bool contains(MetricPoint p) const noexcept;
    [[nodiscard]] double area() const noexcept;
    [[nodiscard]] MetricPoint centroid() const noexcept;
    void bounds(double& min_x, double& min_y, double& max_x, double& max_y) const noexcept;
};

/// Axis-aligned rectangle centred at (cx, cy), rotated by angle_rad about its centre.
[[nodiscard]] Polygon make_rectangle(double cx, double cy, double width, double height, double angle_rad = 0.0);

[[nodiscard]] bool polygons_intersect(const Polygon& a, const Polygon& b) noexcept;

/// Smallest distance between two disjoint convex polygons (0 if they touch or overlap).
[[nodiscard]] double polygon_distance(const Polygon& a, const Polygon& b) noexcept;

struct SceneObject
{
    Polygon shape;
    int signature = 0;  ///< index into SceneDescription::signatures; class label is signature + 1
    int z_order = 0;    ///< higher occludes lower
};

enum class SceneKind
{
    discrete,
    cluttered
};

struct SceneDescription
{
    double plane_width_mm = 250.0;
    double plane_height_mm = 860.0;
    SpectralSignature background;
    std::vector<SpectralSignature> signatures;
    std::vector<SceneObject> objects;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    [[nodiscard]] std::size_t bands() const noexcept { return background.bands(); }
    [[nodiscard]] const std::vector<double>& band_centers() const noexcept { return background.band_centers_nm; }

    /// Index of the top-most object covering p, or -1 for background.
    [[nodiscard]] int top_object_at(MetricPoint p) const noexcept;

    void validate() const;
};

/// Placement parameters for generated scenes.
struct SceneLayout
{
    double plane_width_mm = 250.0;
    double plane_height_mm = 860.0;
    double object_size_min_mm = 32.0;
    double object_size_max_mm = 40.0;
    double max_rotation_deg = 10.0;  ///< discrete condition only; cluttered draws any rotation
    double min_gap_mm = 8.0;
    double clutter_coverage = 0.6;  ///< summed object area / pile area in the cluttered condition
    double noise_sigma = 0.02;
};

[[nodiscard]] SceneDescription generate_scene(SceneKind kind, const std::vector<SpectralSignature>& class_set,
                                              const SpectralSignature& background, int count, std::uint64_t seed,
                                              const SceneLayout& layout = {});

struct FramePacket
{
    MotorAngle theta;
    double timestamp_s = 0.0;
    int cols = 0;
    int bands = 0;
    std::vector<float> samples;  ///< cols x bands, band fastest

    [[nodiscard]] const float* spectrum(int col) const noexcept { return samples.data() + std::size_t(col) * bands; }
};

/// One scan line at motor angle theta, with reproducible noise derived from (scene.seed, theta).
[[nodiscard]] FramePacket render_frame(const SceneDescription& scene, MotorAngle theta, const GeometryContext& geom);

/// All rows of a scan in acquisition order. Frames are rendered independently, so the
/// parallel and serial paths produce identical streams.
[[nodiscard]] std::vector<FramePacket> render_scan(const SceneDescription& scene, const PrismConfig& config,
                                                   const GeometryContext& geom,
                                                   Execution exec = Execution::parallel);

/// Per-pixel class on a uniform metric grid: 0 background, signature index + 1 otherwise.
[[nodiscard]] std::vector<int> ground_truth_label_map(const SceneDescription& scene, const CorrectedGrid& grid);

/// splitmix64 step; used to derive independent seeds.
[[nodiscard]] std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

}  // namespace prism
