#pragma once
/**
 * @file   config.hpp
 * @brief  Strict JSON pipeline configuration shared by every CLI subcommand.
 *
 * Unknown keys anywhere in the document are rejected before any work starts.
 * Omitted keys keep their defaults.
 */

#include "prism/classifier.hpp"
#include "prism/detection.hpp"
#include "prism/geometry.hpp"
#include "prism/mnf.hpp"
#include "prism/scene.hpp"
#include "prism/sorting.hpp"
#include "prism/trajectory.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace prism
{

/// Malformed or out-of-range configuration.
class ConfigError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Environment variable naming the default config file.
inline constexpr const char* kConfigEnvVar = "PRISM_CONFIG";

struct BandSettings
{
    int count = 96;
    double first_nm = 400.0;
    double last_nm = 1000.0;
};

/// A class signature loaded from a two-column text file.
struct SignatureFile
{
    std::string class_name;
    std::filesystem::path file;
};

struct ScenarioSettings
{
    int object_count = 52;
    int trials = 5;                           ///< used when trial_seeds is empty
    std::vector<std::uint64_t> trial_seeds;   ///< empty: seed, seed + 1, ...
    std::vector<SceneKind> conditions{SceneKind::discrete, SceneKind::cluttered};
    std::vector<Eigen::Vector3d> bins;        ///< empty: default row of bins
    int training_objects = 24;
    int training_samples_per_class = 2000;
    std::uint64_t training_seed = 1000;
    int max_scans = 0;
};

struct PipelineConfig
{
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "prism_out";
    PrismConfig prism;
    GeometryContext geometry;
    BandSettings bands;
    std::vector<SignatureFile> signatures;  ///< empty: built-in synthetic textiles
    std::optional<SignatureFile> background;
    MnfSettings mnf;
    ClassifierSpec classifier;
    SegmenterSettings segmenter;
    AggregationSettings aggregation;
    SuctionSettings suction;
    PathSettings path;
    LqtConfig lqt;
    SceneLayout scene;
    ScenarioSettings scenario;

    /// Range checks across all sections; throws ConfigError.
    void validate() const;

    [[nodiscard]] std::vector<double> band_centers() const;
    [[nodiscard]] std::vector<SpectralSignature> class_signatures() const;
    [[nodiscard]] SpectralSignature background_signature() const;
    [[nodiscard]] std::vector<std::uint64_t> trial_seeds() const;

    /// Sorting scenario for one condition, built from every section.
    [[nodiscard]] SortingScenario scenario_for(SceneKind kind) const;
};

/// Parses a JSON document; `base` resolves relative file references.
[[nodiscard]] PipelineConfig parse_config(const std::string& json_text, const std::filesystem::path& base = {});
[[nodiscard]] PipelineConfig load_config(const std::filesystem::path& path);

/// Loads `explicit_path` if given, else the file named by PRISM_CONFIG, else defaults.
[[nodiscard]] PipelineConfig resolve_config(const std::optional<std::filesystem::path>& explicit_path);

/// Full configuration as JSON, suitable for parse_config.
[[nodiscard]] std::string config_to_json(const PipelineConfig& config);

}  // namespace prism
