#pragma once
/**
 * @file   sorting.hpp
 * @brief  Closed-loop sorting trials: scan, perceive, plan and pick against
 *         the synthetic scene with a point-in-polygon suction gripper, plus
 *         multi-trial campaign statistics.
 */

#include "prism/classifier.hpp"
#include "prism/cube.hpp"
#include "prism/detection.hpp"
#include "prism/mnf.hpp"
#include "prism/scene.hpp"
#include "prism/trajectory.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace prism
{

struct SortingScenario
{
    SceneKind kind = SceneKind::discrete;
    std::vector<SpectralSignature> classes;
    SpectralSignature background;
    int object_count = 52;
    std::vector<std::uint64_t> trial_seeds{1, 2, 3, 4, 5};
    std::vector<Eigen::Vector3d> bins;  ///< one per class, workspace mm
    SceneLayout layout;
    PrismConfig prism;
    GeometryContext geom;
    SegmenterSettings segmenter;
    AggregationSettings aggregation;
    SuctionSettings suction;
    PathSettings path;
    LqtConfig lqt;
    MnfSettings mnf;
    ClassifierSpec classifier;
    int training_objects = 24;
    int training_samples_per_class = 2000;
    std::uint64_t training_seed = 1000;
    int max_scans = 0;  ///< 0 means 4 x object_count

    [[nodiscard]] int scan_bound() const noexcept { return max_scans > 0 ? max_scans : 4 * object_count; }
    void validate() const;
};

/// Default four-class scenario over `bands` bands spanning 400-1000 nm.
[[nodiscard]] SortingScenario default_scenario(SceneKind kind, int bands = 96);

/// Bins in a row beside the work plane, one per class.
[[nodiscard]] std::vector<Eigen::Vector3d> default_bins(int class_count);

/// Trained perception stack shared by every trial of a campaign.
struct PerceptionModel
{
    CorrectionMap correction;
    MnfModel mnf;
    PixelClassifier classifier;
    std::vector<std::string> class_names;
    double training_accuracy = 0.0;
    int epochs_run = 0;
};

/// Per-pixel training spectra drawn from the eroded interiors of ground-truth objects.
[[nodiscard]] LabeledSpectra sample_training_pixels(const HyperspectralCube& corrected,
                                                    const std::vector<int>& truth_labels, int class_count,
                                                    int samples_per_class, std::uint64_t seed, int erosion = 2);

/// Renders a training scene, fits the MNF on its foreground and trains the pixel classifier.
[[nodiscard]] PerceptionModel train_perception(const SortingScenario& scenario);

enum class PickOutcome
{
    sorted,        ///< grasped object matches the commanded bin
    wrong_bin,     ///< grasped the intended object but it does not belong in that bin
    wrong_object,  ///< grasped a different (overlapping) object
    missed         ///< contact point on background
};

[[nodiscard]] const char* to_string(PickOutcome o) noexcept;

struct PickResult
{
    PickOutcome outcome = PickOutcome::missed;
    int object = -1;  ///< index into scene.objects of the grasped object
};

/// Grasps the top-most object under `contact`; `intended` is the object the detection covered (-1 if unknown).
[[nodiscard]] PickResult simulated_pick(const SceneDescription& scene, MetricPoint contact, int commanded_class,
                                        int intended = -1);

enum class FailureCause
{
    none,
    wrong_bin,
    wrong_object,
    missed_pick,
    unknown_class,
    never_detected,
    scan_bound
};

[[nodiscard]] const char* to_string(FailureCause c) noexcept;

struct ObjectOutcome
{
    int true_class = 0;
    bool picked = false;
    int bin = -1;
    bool correct = false;
    FailureCause cause = FailureCause::never_detected;

    friend bool operator==(const ObjectOutcome&, const ObjectOutcome&) = default;
};

struct StageTimings
{
    double render_s = 0.0;
    double reconstruct_s = 0.0;
    double correct_s = 0.0;
    double segment_s = 0.0;
    double classify_s = 0.0;
    double aggregate_s = 0.0;
    double plan_s = 0.0;
};

struct TrialReport
{
    std::uint64_t seed = 0;
    SceneKind kind = SceneKind::discrete;
    std::vector<ObjectOutcome> objects;  ///< one per ground-truth object, in generation order
    std::vector<double> class_success;
    std::vector<int> class_totals;
    int scans = 0;
    int picks_attempted = 0;
    bool scan_bound_exceeded = false;
    StageTimings timings;  ///< wall clock; not part of equality

    friend bool operator==(const TrialReport& a, const TrialReport& b)
    {
        return a.seed == b.seed && a.kind == b.kind && a.objects == b.objects && a.class_success == b.class_success &&
               a.class_totals == b.class_totals && a.scans == b.scans && a.picks_attempted == b.picks_attempted &&
               a.scan_bound_exceeded == b.scan_bound_exceeded;
    }
};

/// Scene generation seed used by a trial.
[[nodiscard]] std::uint64_t trial_scene_seed(std::uint64_t trial_seed) noexcept;

/// Runs the scan / perceive / pick loop on the scenario's generated scene for `seed`.
[[nodiscard]] TrialReport run_trial(const SortingScenario& scenario, const PerceptionModel& perception,
                                    std::uint64_t seed);

/// Same loop on a caller-supplied scene.
[[nodiscard]] TrialReport run_trial_on_scene(const SortingScenario& scenario, const PerceptionModel& perception,
                                             SceneDescription scene, std::uint64_t seed);

struct CampaignResult
{
    SceneKind kind = SceneKind::discrete;
    std::vector<std::string> class_names;
    std::vector<double> mean;
    std::vector<double> stddev;  ///< sample standard deviation (n - 1)
    std::vector<TrialReport> trials;
};

[[nodiscard]] CampaignResult run_campaign(const SortingScenario& scenario, const PerceptionModel& perception);

/// Aggregates finished trials into per-class mean and sample standard deviation.
[[nodiscard]] CampaignResult summarize_campaign(SceneKind kind, const std::vector<std::string>& class_names,
                                                std::vector<TrialReport> trials);

[[nodiscard]] const char* to_string(SceneKind k) noexcept;
[[nodiscard]] SceneKind scene_kind_from_string(const std::string& s);

/// condition,class,mean,std,trials; one row per class and condition.
[[nodiscard]] std::string campaign_csv(const std::vector<CampaignResult>& campaigns);

/// Grouped bar chart of per-class mean success with one-sigma whiskers.
[[nodiscard]] RgbImage campaign_chart(const std::vector<CampaignResult>& campaigns, int width = 640,
                                      int height = 400);

}  // namespace prism
