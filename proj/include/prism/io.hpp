#pragma once
/**
 * @file   io.hpp
 * @brief  File formats: ENVI-style cubes, CRC-checked frame streams, model
 *         bundles, trajectory tables, detection reports, scenes and images.
 *
 * All binary payloads are little-endian. Readers reject files whose major
 * format version is newer than the one they were built for.
 */

#include "prism/classifier.hpp"
#include "prism/cube.hpp"
#include "prism/detection.hpp"
#include "prism/mnf.hpp"
#include "prism/scene.hpp"
#include "prism/trajectory.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace prism
{

/// Malformed, truncated, corrupted or incompatible file.
class FormatError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint16_t kFormatMajor = 1;
inline constexpr std::uint16_t kFormatMinor = 0;

enum class Interleave
{
    bsq,
    bil
};

/// Header path paired with a cube data file: the extension is replaced by ".hdr".
[[nodiscard]] std::filesystem::path envi_header_path(const std::filesystem::path& data_path);

/// Writes `data_path` (raw float32) and its ENVI header.
void write_cube(const std::filesystem::path& data_path, const HyperspectralCube& cube,
                Interleave interleave = Interleave::bsq);
[[nodiscard]] HyperspectralCube read_cube(const std::filesystem::path& data_path);

/// IEEE CRC-32 of a byte range.
[[nodiscard]] std::uint32_t crc32_of(const void* data, std::size_t size) noexcept;

void write_frame_stream(const std::filesystem::path& path, const std::vector<FramePacket>& frames);
[[nodiscard]] std::vector<FramePacket> read_frame_stream(const std::filesystem::path& path);

struct ModelBundle
{
    PixelClassifier classifier;
    MnfModel mnf;
    std::vector<std::string> class_names;
    std::vector<double> band_centers_nm;
};

/// Binary model file plus a human-readable manifest next to it (path + ".manifest").
void write_model(const std::filesystem::path& path, const ModelBundle& bundle);
[[nodiscard]] ModelBundle read_model(const std::filesystem::path& path);

void write_trajectory(const std::filesystem::path& path, const CartesianTrajectory& traj);
[[nodiscard]] CartesianTrajectory read_trajectory(const std::filesystem::path& path);

struct DetectionReport
{
    std::vector<std::string> class_names;
    CorrectedGrid grid;
    std::vector<DetectedObject> objects;
};

void write_detection_report(const std::filesystem::path& path, const DetectionReport& report);
[[nodiscard]] DetectionReport read_detection_report(const std::filesystem::path& path);

/// Binary PPM (P6), channels clamped to [0, 1].
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

/// Two-column text: wavelength_nm reflectance.
void write_signature(const std::filesystem::path& path, const SpectralSignature& sig);
[[nodiscard]] SpectralSignature read_signature(const std::filesystem::path& path, std::string class_name = {});

/// Scene as JSON: plane, signatures (inline, or {"file": ...} relative to the scene file), objects, seed.
void write_scene(const std::filesystem::path& path, const SceneDescription& scene);
[[nodiscard]] SceneDescription read_scene(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
[[nodiscard]] std::string read_text(const std::filesystem::path& path);

}  // namespace prism
