#include "prism/sorting.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

namespace prism
{

const char* to_string(SceneKind k) noexcept
{
    return k == SceneKind::discrete ? "discrete" : "cluttered";
}

SceneKind scene_kind_from_string(const std::string& s)
{
    if (s == "discrete")
        return SceneKind::discrete;
    if (s == "cluttered")
        return SceneKind::cluttered;
    throw std::invalid_argument("unknown scene kind '" + s + "' (expected discrete or cluttered)");
}

const char* to_string(PickOutcome o) noexcept
{
    switch (o)
    {
    case PickOutcome::sorted:
        return "sorted";
    case PickOutcome::wrong_bin:
        return "wrong_bin";
    case PickOutcome::wrong_object:
        return "wrong_object";
    default:
        return "missed";
    }
}

const char* to_string(FailureCause c) noexcept
{
    switch (c)
    {
    case FailureCause::none:
        return "none";
    case FailureCause::wrong_bin:
        return "wrong_bin";
    case FailureCause::wrong_object:
        return "wrong_object";
    case FailureCause::missed_pick:
        return "missed_pick";
    case FailureCause::unknown_class:
        return "unknown_class";
    case FailureCause::never_detected:
        return "never_detected";
    default:
        return "scan_bound";
    }
}

std::vector<Eigen::Vector3d> default_bins(int class_count)
{
    std::vector<Eigen::Vector3d> bins;
    const double spacing = 160.0;
    const double y0 = -spacing * (class_count - 1) / 2.0;
    for (int c = 0; c < class_count; ++c)
        bins.emplace_back(650.0, y0 + spacing * c, 50.0);
    return bins;
}

SortingScenario default_scenario(SceneKind kind, int bands)
{
    SortingScenario s;
    s.kind = kind;
    const auto centers = linear_band_centers(bands);
    s.classes = default_textile_signatures(centers);
    s.background = default_background(centers);
    s.bins = default_bins(static_cast<int>(s.classes.size()));
    s.classifier.class_count = static_cast<int>(s.classes.size());
    return s;
}

void SortingScenario::validate() const
{
    if (classes.empty())
        throw std::invalid_argument("scenario: class set is empty");
    if (bins.size() != classes.size())
        throw std::invalid_argument("scenario: need exactly one bin per class");
    if (object_count < 0)
        throw std::invalid_argument("scenario: object count must be >= 0");
    if (trial_seeds.empty())
        throw std::invalid_argument("scenario: need at least one trial seed");
    auto seeds = trial_seeds;
    std::sort(seeds.begin(), seeds.end());
    if (std::adjacent_find(seeds.begin(), seeds.end()) != seeds.end())
        throw std::invalid_argument("scenario: trial seeds must be distinct");
    if (classifier.class_count != static_cast<int>(classes.size()))
        throw std::invalid_argument("scenario: classifier class count differs from the class set");
    for (const auto& c : classes)
        if (c.bands() != background.bands())
            throw std::invalid_argument("scenario: class '" + c.class_name + "' band count differs from background");
    for (const auto& b : bins)
        if (!path.workspace.contains(b))
            throw std::invalid_argument("scenario: bin outside the workspace");
    prism.validate();
    geom.validate();
    lqt.validate();
}

// ---------------------------------------------------------------------------
// Perception training

LabeledSpectra sample_training_pixels(const HyperspectralCube& corrected, const std::vector<int>& truth,
                                      int class_count, int samples_per_class, std::uint64_t seed, int erosion)
{
    if (truth.size() != corrected.pixel_count())
        throw std::invalid_argument("sample_training_pixels: label map size differs from the cube");
    const int rows = corrected.rows(), cols = corrected.cols();
    std::vector<std::vector<std::size_t>> pool(static_cast<std::size_t>(class_count));
    for (int r = erosion; r < rows - erosion; ++r)
        for (int c = erosion; c < cols - erosion; ++c)
        {
            const int l = truth[std::size_t(r) * cols + c];
            if (l < 1 || l > class_count)
                continue;
            bool interior = true;
            for (int dr = -erosion; dr <= erosion && interior; ++dr)
                for (int dc = -erosion; dc <= erosion && interior; ++dc)
                    interior = truth[std::size_t(r + dr) * cols + (c + dc)] == l &&
                               corrected.is_valid(r + dr, c + dc);
            if (interior)
                pool[std::size_t(l - 1)].push_back(std::size_t(r) * cols + c);
        }

    LabeledSpectra data;
    data.length = corrected.bands();
    std::mt19937_64 rng(seed);
    std::vector<double> spectrum(static_cast<std::size_t>(corrected.bands()));
    for (int k = 0; k < class_count; ++k)
    {
        auto& p = pool[std::size_t(k)];
        if (static_cast<int>(p.size()) < samples_per_class)
            throw std::runtime_error("sample_training_pixels: class " + std::to_string(k) + " has only " +
                                     std::to_string(p.size()) + " interior pixels");
        std::shuffle(p.begin(), p.end(), rng);
        for (int i = 0; i < samples_per_class; ++i)
        {
            const float* s = corrected.data().data() + p[std::size_t(i)] * std::size_t(corrected.bands());
            std::copy(s, s + corrected.bands(), spectrum.begin());
            data.add(spectrum, k);
        }
    }
    return data;
}

PerceptionModel train_perception(const SortingScenario& scenario)
{
    scenario.validate();
    PerceptionModel pm;
    for (const auto& c : scenario.classes)
        pm.class_names.push_back(c.class_name);
    pm.correction = build_correction_map(scenario.geom);

    const SceneDescription scene =
        generate_scene(SceneKind::discrete, scenario.classes, scenario.background, scenario.training_objects,
                       scenario.training_seed, scenario.layout);
    const auto frames = render_scan(scene, scenario.prism, scenario.geom);
    const auto raw = reconstruct(frames, scenario.geom, scene.band_centers());
    const auto cube = correct_distortion(raw, pm.correction);

    const auto masks = segment_objects(cube, scenario.background, scenario.segmenter);
    const auto fg = union_mask(masks, cube.rows(), cube.cols());
    pm.mnf = mnf_fit(cube, fg, scenario.mnf);

    const auto truth = ground_truth_label_map(scene, *cube.grid);
    const int classes = static_cast<int>(scenario.classes.size());
    const LabeledSpectra raw_samples = sample_training_pixels(cube, truth, classes, scenario.training_samples_per_class,
                                                              mix_seed(scenario.training_seed, 2));
    LabeledSpectra reduced;
    reduced.length = pm.mnf.retained_k;
    Eigen::MatrixXd x(raw_samples.count(), raw_samples.length);
    for (int i = 0; i < raw_samples.count(); ++i)
        for (int b = 0; b < raw_samples.length; ++b)
            x(i, b) = raw_samples.values[std::size_t(i) * raw_samples.length + b];
    const Eigen::MatrixXd y = mnf_transform(pm.mnf, x);
    std::vector<double> row(static_cast<std::size_t>(reduced.length));
    for (int i = 0; i < raw_samples.count(); ++i)
    {
        for (int k = 0; k < reduced.length; ++k)
            row[std::size_t(k)] = y(i, k);
        reduced.add(row, raw_samples.labels[std::size_t(i)]);
    }

    auto trained = train_pixel_classifier(scenario.classifier, reduced);
    pm.classifier = std::move(trained.model);
    pm.training_accuracy = trained.training_accuracy;
    pm.epochs_run = trained.epochs_run;
    return pm;
}

// ---------------------------------------------------------------------------
// Trials

PickResult simulated_pick(const SceneDescription& scene, MetricPoint contact, int commanded_class, int intended)
{
    PickResult r;
    r.object = scene.top_object_at(contact);
    if (r.object < 0)
    {
        r.outcome = PickOutcome::missed;
        return r;
    }
    if (intended >= 0 && r.object != intended)
        r.outcome = PickOutcome::wrong_object;
    else if (scene.objects[std::size_t(r.object)].signature == commanded_class)
        r.outcome = PickOutcome::sorted;
    else
        r.outcome = PickOutcome::wrong_bin;
    return r;
}

std::uint64_t trial_scene_seed(std::uint64_t trial_seed) noexcept
{
    return mix_seed(trial_seed, 0x5ce7e);
}

namespace
{
using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0)
{
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

// Object (index into scene.objects) covering most of the mask, -1 if none.
int dominant_object(const SceneDescription& scene, const SegmentationMask& mask, const CorrectedGrid& grid)
{
    std::map<int, int> votes;
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c)
            if (mask.bits[std::size_t(r) * mask.width + c])
            {
                const int o = scene.top_object_at(grid.metric_of(c + mask.col0, r + mask.row0));
                if (o >= 0)
                    ++votes[o];
            }
    int best = -1, best_n = 0;
    for (const auto& [o, n] : votes)
        if (n > best_n)
        {
            best = o;
            best_n = n;
        }
    return best;
}
}  // namespace

TrialReport run_trial(const SortingScenario& scenario, const PerceptionModel& perception, std::uint64_t seed)
{
    SceneDescription scene = generate_scene(scenario.kind, scenario.classes, scenario.background,
                                            scenario.object_count, trial_scene_seed(seed), scenario.layout);
    return run_trial_on_scene(scenario, perception, std::move(scene), seed);
}

TrialReport run_trial_on_scene(const SortingScenario& scenario, const PerceptionModel& perception,
                               SceneDescription scene, std::uint64_t seed)
{
    scenario.validate();
    const int classes = static_cast<int>(scenario.classes.size());
    TrialReport rep;
    rep.seed = seed;
    rep.kind = scenario.kind;
    rep.objects.resize(scene.objects.size());
    std::vector<int> original(scene.objects.size());
    std::iota(original.begin(), original.end(), 0);
    for (std::size_t i = 0; i < scene.objects.size(); ++i)
        rep.objects[i].true_class = scene.objects[i].signature;

    const SpectralAngleSegmenter segmenter(scenario.background, scenario.segmenter);
    int stalls = 0;
    while (true)
    {
        if (rep.scans >= scenario.scan_bound())
        {
            rep.scan_bound_exceeded = !scene.objects.empty();
            break;
        }
        SceneDescription snapshot = scene;
        snapshot.seed = mix_seed(seed, 0x5ca9 + std::uint64_t(rep.scans));
        ++rep.scans;

        auto t0 = clock_type::now();
        const auto frames = render_scan(snapshot, scenario.prism, scenario.geom);
        rep.timings.render_s += seconds_since(t0);
        t0 = clock_type::now();
        const auto raw = reconstruct(frames, scenario.geom, scene.band_centers());
        rep.timings.reconstruct_s += seconds_since(t0);
        t0 = clock_type::now();
        const auto cube = correct_distortion(raw, perception.correction);
        rep.timings.correct_s += seconds_since(t0);
        t0 = clock_type::now();
        const auto masks = segmenter.segment(cube);
        rep.timings.segment_s += seconds_since(t0);
        if (masks.empty())
            break;

        t0 = clock_type::now();
        const auto region = union_mask(masks, cube.rows(), cube.cols());
        const auto labels = predict_pixel_labels(cube, region, perception.classifier, perception.mnf);
        rep.timings.classify_s += seconds_since(t0);
        t0 = clock_type::now();
        const auto detections =
            aggregate_objects(labels, masks, cube, perception.mnf, scenario.aggregation, scenario.suction);
        rep.timings.aggregate_s += seconds_since(t0);

        // Which current object each detection covers, fixed at scan time.
        std::vector<int> intended(detections.size());
        for (std::size_t d = 0; d < detections.size(); ++d)
            intended[d] = dominant_object(scene, masks[d], *cube.grid);
        std::vector<int> intended_id(detections.size(), -1);
        for (std::size_t d = 0; d < detections.size(); ++d)
            if (intended[d] >= 0)
                intended_id[d] = original[std::size_t(intended[d])];

        bool progress = false;
        t0 = clock_type::now();
        for (std::size_t d = 0; d < detections.size(); ++d)
        {
            const auto& det = detections[d];
            const int target = intended_id[d];
            if (det.class_label == kUnknownClass || det.class_label >= classes || det.suction_points.empty())
            {
                if (target >= 0)
                    rep.objects[std::size_t(target)].cause = FailureCause::unknown_class;
                continue;
            }
            const auto& sp = det.suction_points.front();
            const Eigen::Vector3d grasp = pixel_to_workspace(sp.col, sp.row, *cube.grid, scenario.path);
            const Eigen::Vector3d& bin = scenario.bins[std::size_t(det.class_label)];
            std::vector<Waypoint> path;
            try
            {
                path = build_sparse_path(grasp, bin, {}, scenario.path);
            }
            catch (const std::out_of_range&)
            {
                if (target >= 0)
                    rep.objects[std::size_t(target)].cause = FailureCause::missed_pick;
                continue;
            }
            const CartesianTrajectory traj = lqt_refine(path, scenario.lqt);
            const Eigen::Vector3d contact = suction_on_position(traj) - scenario.path.plane_origin;
            ++rep.picks_attempted;

            // Map the detection's intended object to its current index in the scene.
            int target_now = -1;
            for (std::size_t i = 0; i < original.size(); ++i)
                if (original[i] == target)
                    target_now = static_cast<int>(i);
            const PickResult pick = simulated_pick(scene, {contact.x(), contact.y()}, det.class_label, target_now);
            if (pick.outcome == PickOutcome::missed)
            {
                if (target >= 0)
                    rep.objects[std::size_t(target)].cause = FailureCause::missed_pick;
                continue;
            }
            const int id = original[std::size_t(pick.object)];
            auto& outcome = rep.objects[std::size_t(id)];
            outcome.picked = true;
            outcome.bin = det.class_label;
            outcome.correct = outcome.true_class == det.class_label;
            outcome.cause = outcome.correct ? FailureCause::none
                            : pick.outcome == PickOutcome::wrong_object ? FailureCause::wrong_object
                                                                        : FailureCause::wrong_bin;
            scene.objects.erase(scene.objects.begin() + pick.object);
            original.erase(original.begin() + pick.object);
            progress = true;
        }
        rep.timings.plan_s += seconds_since(t0);

        if (scene.objects.empty())
            continue;  // the next scan sees an empty plane and ends the loop
        stalls = progress ? 0 : stalls + 1;
        if (stalls >= 2)
            break;
    }
    if (rep.scan_bound_exceeded)
        for (auto& o : rep.objects)
            if (!o.picked)
                o.cause = FailureCause::scan_bound;

    rep.class_success.assign(std::size_t(classes), 0.0);
    rep.class_totals.assign(std::size_t(classes), 0);
    std::vector<int> ok(std::size_t(classes), 0);
    for (const auto& o : rep.objects)
    {
        ++rep.class_totals[std::size_t(o.true_class)];
        ok[std::size_t(o.true_class)] += o.correct ? 1 : 0;
    }
    for (int c = 0; c < classes; ++c)
        rep.class_success[std::size_t(c)] =
            rep.class_totals[std::size_t(c)] > 0 ? double(ok[std::size_t(c)]) / rep.class_totals[std::size_t(c)] : 1.0;
    return rep;
}

CampaignResult summarize_campaign(SceneKind kind, const std::vector<std::string>& class_names,
                                  std::vector<TrialReport> trials)
{
    CampaignResult res;
    res.kind = kind;
    res.class_names = class_names;
    const std::size_t classes = class_names.size();
    res.mean.assign(classes, 0.0);
    res.stddev.assign(classes, 0.0);
    const double n = double(trials.size());
    for (std::size_t c = 0; c < classes && !trials.empty(); ++c)
    {
        double s = 0.0;
        for (const auto& t : trials)
            s += t.class_success[c];
        const double mean = s / n;
        double v = 0.0;
        for (const auto& t : trials)
            v += (t.class_success[c] - mean) * (t.class_success[c] - mean);
        res.mean[c] = mean;
        res.stddev[c] = trials.size() > 1 ? std::sqrt(v / (n - 1.0)) : 0.0;
    }
    res.trials = std::move(trials);
    return res;
}

CampaignResult run_campaign(const SortingScenario& scenario, const PerceptionModel& perception)
{
    scenario.validate();
    std::vector<TrialReport> trials;
    for (std::uint64_t seed : scenario.trial_seeds)
        trials.push_back(run_trial(scenario, perception, seed));
    std::vector<std::string> names;
    for (const auto& c : scenario.classes)
        names.push_back(c.class_name);
    return summarize_campaign(scenario.kind, names, std::move(trials));
}

std::string campaign_csv(const std::vector<CampaignResult>& campaigns)
{
    std::string out = "condition,class,mean,std,trials\n";
    char buf[256];
    for (const auto& c : campaigns)
        for (std::size_t k = 0; k < c.class_names.size(); ++k)
        {
            std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%zu\n", to_string(c.kind), c.class_names[k].c_str(),
                          c.mean[k], c.stddev[k], c.trials.size());
            out += buf;
        }
    return out;
}

RgbImage campaign_chart(const std::vector<CampaignResult>& campaigns, int width, int height)
{
    RgbImage img{height, width, std::vector<float>(std::size_t(width) * height * 3, 1.0f)};
    const auto fill = [&](int r0, int r1, int c0, int c1, std::array<float, 3> col) {
        for (int r = std::max(0, r0); r <= std::min(height - 1, r1); ++r)
            for (int c = std::max(0, c0); c <= std::min(width - 1, c1); ++c)
            {
                float* p = img.pixel(r, c);
                p[0] = col[0];
                p[1] = col[1];
                p[2] = col[2];
            }
    };
    const int left = 40, right = width - 20, top = 20, bottom = height - 30;
    const auto y_of = [&](double v) { return bottom - static_cast<int>(std::lround(v * (bottom - top))); };
    const std::array<float, 3> grid{0.85f, 0.85f, 0.85f}, axis{0.0f, 0.0f, 0.0f};
    for (int t = 0; t <= 4; ++t)
        fill(y_of(t / 4.0), y_of(t / 4.0), left, right, grid);
    fill(top, bottom, left, left, axis);
    fill(bottom, bottom, left, right, axis);
    if (campaigns.empty())
        return img;

    static constexpr std::array<std::array<float, 3>, 4> colors{
        {{0.20f, 0.40f, 0.80f}, {0.90f, 0.50f, 0.10f}, {0.30f, 0.70f, 0.30f}, {0.60f, 0.30f, 0.60f}}};
    const std::size_t classes = campaigns.front().class_names.size();
    const int group = (right - left) / std::max<int>(1, int(classes));
    const int bar = std::max(2, (group - 12) / std::max<int>(1, int(campaigns.size())));
    for (std::size_t k = 0; k < classes; ++k)
        for (std::size_t j = 0; j < campaigns.size(); ++j)
        {
            if (k >= campaigns[j].mean.size())
                continue;
            const int c0 = left + int(k) * group + 6 + int(j) * bar;
            const double m = std::clamp(campaigns[j].mean[k], 0.0, 1.0);
            fill(y_of(m), bottom - 1, c0, c0 + bar - 3, colors[j % colors.size()]);
            const double s = campaigns[j].stddev[k];
            const int mid = c0 + (bar - 3) / 2;
            const int lo = y_of(std::clamp(m - s, 0.0, 1.0)), hi = y_of(std::clamp(m + s, 0.0, 1.0));
            fill(hi, lo, mid, mid, axis);
            fill(hi, hi, mid - 3, mid + 3, axis);
            fill(lo, lo, mid - 3, mid + 3, axis);
        }
    return img;
}

}  // namespace prism
