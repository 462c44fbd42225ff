// prism: command-line front end for the scan / correct / classify / plan / sort pipeline.

#include "prism/config.hpp"
#include "prism/cube.hpp"
#include "prism/detection.hpp"
#include "prism/geometry.hpp"
#include "prism/io.hpp"
#include "prism/resolution.hpp"
#include "prism/scene.hpp"
#include "prism/sorting.hpp"
#include "prism/trajectory.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace prism;

namespace
{

/// Error carrying a machine-readable code for the single-line report.
struct CliError : std::runtime_error
{
    CliError(std::string c, const std::string& msg) : std::runtime_error(msg), code(std::move(c)) {}
    std::string code;
};

struct Globals
{
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
};

PipelineConfig load(const Globals& g)
{
    PipelineConfig c = resolve_config(g.config_path ? std::optional<fs::path>(*g.config_path) : std::nullopt);
    if (g.seed)
        c.seed = *g.seed;
    if (g.output_dir)
        c.output_dir = *g.output_dir;
    c.validate();
    return c;
}

fs::path in_output(const PipelineConfig& c, const std::string& name)
{
    fs::create_directories(c.output_dir);
    return c.output_dir / name;
}

fs::path output_path(const PipelineConfig& c, const std::string& explicit_path, const std::string& default_name)
{
    if (!explicit_path.empty())
    {
        const fs::path p(explicit_path);
        if (p.has_parent_path())
            fs::create_directories(p.parent_path());
        return p;
    }
    return in_output(c, default_name);
}

// ---------------------------------------------------------------------------

struct GeomtestArgs
{
    std::optional<int> n;
    int samples = 11;
};

void run_geomtest(const Globals& g, const GeomtestArgs& a)
{
    PipelineConfig c = load(g);
    if (a.n)
        c.prism.n_sides = *a.n;
    c.prism.validate();
    std::printf("FOV %.1f\n", fov_degrees(c.prism.n_sides));
    std::printf("scan_duration_s %.3f\n", scan_duration_seconds(c.prism));
    std::printf("row theta_deg gamma_deg k\n");
    const int samples = std::max(2, a.samples);
    for (int i = 0; i < samples; ++i)
    {
        const int row = static_cast<int>(std::lround(double(i) * (c.geometry.rows - 1) / (samples - 1)));
        const MotorAngle theta = theta_of_row(row, c.geometry);
        std::printf("%d %.4f %.4f %.6f\n", row, theta.theta * 180.0 / kPi, gamma_of_theta(theta).gamma * 180.0 / kPi,
                    scaling_factor_k(theta));
    }
}

struct SimulateArgs
{
    std::string scene;
    std::string kind = "discrete";
    std::optional<int> count;
    std::string out;
    std::string scene_out;
};

void run_simulate(const Globals& g, const SimulateArgs& a)
{
    const PipelineConfig c = load(g);
    SceneDescription scene;
    if (!a.scene.empty())
        scene = read_scene(a.scene);
    else
        scene = generate_scene(scene_kind_from_string(a.kind), c.class_signatures(), c.background_signature(),
                               a.count.value_or(c.scenario.object_count), c.seed, c.scene);
    const auto frames = render_scan(scene, c.prism, c.geometry);
    const fs::path out = output_path(c, a.out, "frames.prsm");
    write_frame_stream(out, frames);
    const fs::path scene_out = output_path(c, a.scene_out, "scene.json");
    write_scene(scene_out, scene);
    std::printf("frames %zu objects %zu stream %s scene %s\n", frames.size(), scene.objects.size(),
                out.string().c_str(), scene_out.string().c_str());
}

Interleave parse_interleave(const std::string& s)
{
    if (s == "bsq")
        return Interleave::bsq;
    if (s == "bil")
        return Interleave::bil;
    throw CliError("usage", "interleave must be bsq or bil");
}

struct ReconstructArgs
{
    std::string frames;
    std::string out;
    std::string interleave = "bsq";
};

void run_reconstruct(const Globals& g, const ReconstructArgs& a)
{
    const PipelineConfig c = load(g);
    const auto frames = read_frame_stream(a.frames);
    if (!frames.empty() && frames.front().cols != c.geometry.cols)
        throw CliError("invalid", "frame width " + std::to_string(frames.front().cols) +
                                      " differs from the configured geometry (" + std::to_string(c.geometry.cols) +
                                      ")");
    std::vector<double> centers;
    if (!frames.empty() && frames.front().bands == c.bands.count)
        centers = c.band_centers();
    const auto cube = reconstruct(frames, c.geometry, centers);
    const fs::path out = output_path(c, a.out, "cube.raw");
    write_cube(out, cube, parse_interleave(a.interleave));
    std::printf("cube %dx%dx%d %s\n", cube.rows(), cube.cols(), cube.bands(), out.string().c_str());
}

struct CorrectArgs
{
    std::string cube;
    std::string out;
    std::optional<double> pitch;
    std::string interleave = "bsq";
    std::string preview;
};

void run_correct(const Globals& g, const CorrectArgs& a)
{
    const PipelineConfig c = load(g);
    const auto raw = read_cube(a.cube);
    if (raw.corrected)
        throw CliError("invalid", a.cube + " is already corrected");
    const auto map = build_correction_map(raw.geom, a.pitch.value_or(raw.geom.line_resolution_dx_mm));
    const auto cube = correct_distortion(raw, map);
    const fs::path out = output_path(c, a.out, "corrected.raw");
    write_cube(out, cube, parse_interleave(a.interleave));
    if (!a.preview.empty())
        write_ppm(a.preview, pseudo_rgb(cube));
    std::printf("corrected %dx%dx%d pitch_mm %.4f %s\n", cube.rows(), cube.cols(), cube.bands(), map.grid.pitch_mm,
                out.string().c_str());
}

struct TrainArgs
{
    std::string out;
};

void run_train(const Globals& g, const TrainArgs& a)
{
    const PipelineConfig c = load(g);
    const SortingScenario scenario = c.scenario_for(SceneKind::discrete);
    PerceptionModel pm = train_perception(scenario);
    ModelBundle bundle{std::move(pm.classifier), std::move(pm.mnf), pm.class_names, c.band_centers()};
    const fs::path out = output_path(c, a.out, "model.prsm");
    write_model(out, bundle);
    std::printf("model %s classes %zu mnf_k %d training_accuracy %.4f epochs %d\n", out.string().c_str(),
                bundle.class_names.size(), bundle.mnf.retained_k, pm.training_accuracy, pm.epochs_run);
}

struct ClassifyArgs
{
    std::string cube;
    std::string model;
    std::string report;
    std::string overlay;
};

void run_classify(const Globals& g, const ClassifyArgs& a)
{
    const PipelineConfig c = load(g);
    const auto cube = read_cube(a.cube);
    if (!cube.corrected || !cube.grid)
        throw CliError("invalid", a.cube + " is not a corrected cube; run 'prism correct' first");
    const ModelBundle bundle = read_model(a.model);
    if (bundle.mnf.bands() != cube.bands())
        throw CliError("invalid", "model expects " + std::to_string(bundle.mnf.bands()) + " bands, cube has " +
                                      std::to_string(cube.bands()));
    SpectralSignature background = c.background_signature();
    if (background.bands() != std::size_t(cube.bands()))
        background = resample(background, cube.band_centers_nm.empty() ? bundle.band_centers_nm : cube.band_centers_nm);
    const auto masks = segment_objects(cube, background, c.segmenter);
    const auto region = union_mask(masks, cube.rows(), cube.cols());
    const auto labels = predict_pixel_labels(cube, region, bundle.classifier, bundle.mnf);
    DetectionReport report;
    report.class_names = bundle.class_names;
    report.grid = *cube.grid;
    report.objects = aggregate_objects(labels, masks, cube, bundle.mnf, c.aggregation, c.suction);
    const fs::path rp = output_path(c, a.report, "detections.json");
    write_detection_report(rp, report);
    RgbImage overlay = pseudo_rgb(cube);
    draw_detections(overlay, report.objects);
    const fs::path op = output_path(c, a.overlay, "detections.ppm");
    write_ppm(op, overlay);
    for (const auto& o : report.objects)
    {
        const std::string name = o.class_label >= 0 ? report.class_names[std::size_t(o.class_label)] : "unknown";
        std::printf("object %d class %s purity %.3f pixels %d centroid %.1f,%.1f suction %zu\n", o.instance_id,
                    name.c_str(), o.purity, o.pixel_count, o.centroid_col, o.centroid_row, o.suction_points.size());
    }
    std::printf("objects %zu report %s overlay %s\n", report.objects.size(), rp.string().c_str(),
                op.string().c_str());
}

struct PlanArgs
{
    std::string report;
    int object = 0;
    std::string out;
};

void run_plan(const Globals& g, const PlanArgs& a)
{
    const PipelineConfig c = load(g);
    const DetectionReport report = read_detection_report(a.report);
    if (a.object < 0 || std::size_t(a.object) >= report.objects.size())
        throw CliError("invalid", "object index " + std::to_string(a.object) + " out of range (report has " +
                                      std::to_string(report.objects.size()) + " objects)");
    const DetectedObject& o = report.objects[std::size_t(a.object)];
    if (o.class_label < 0)
        throw CliError("invalid", "object " + std::to_string(a.object) + " has no class");
    if (o.suction_points.empty())
        throw CliError("invalid", "object " + std::to_string(a.object) + " has no suction point");
    const auto bins = c.scenario.bins.empty() ? default_bins(static_cast<int>(report.class_names.size()))
                                              : c.scenario.bins;
    if (std::size_t(o.class_label) >= bins.size())
        throw CliError("invalid", "no bin configured for class " + std::to_string(o.class_label));
    const auto& sp = o.suction_points.front();
    const Eigen::Vector3d grasp = pixel_to_workspace(sp.col, sp.row, report.grid, c.path);
    const auto path = build_sparse_path(grasp, bins[std::size_t(o.class_label)], {}, c.path);
    const auto traj = lqt_refine(path, c.lqt);
    const fs::path out = output_path(c, a.out, "trajectory.csv");
    write_trajectory(out, traj);
    std::printf("samples %zu duration_s %.2f peak_speed_mm_s %.1f %s\n", traj.size(), traj.time.back(),
                peak_speed(traj), out.string().c_str());
}

struct SortArgs
{
    std::optional<int> count;
    std::optional<int> trials;
    std::vector<std::string> kinds;
};

json trial_json(const TrialReport& t)
{
    json objects = json::array();
    for (const auto& o : t.objects)
        objects.push_back({{"true_class", o.true_class},
                           {"picked", o.picked},
                           {"bin", o.bin},
                           {"correct", o.correct},
                           {"cause", to_string(o.cause)}});
    return {{"seed", t.seed},
            {"condition", to_string(t.kind)},
            {"scans", t.scans},
            {"picks_attempted", t.picks_attempted},
            {"scan_bound_exceeded", t.scan_bound_exceeded},
            {"class_success", t.class_success},
            {"class_totals", t.class_totals},
            {"timings_s",
             {{"render", t.timings.render_s},
              {"reconstruct", t.timings.reconstruct_s},
              {"correct", t.timings.correct_s},
              {"segment", t.timings.segment_s},
              {"classify", t.timings.classify_s},
              {"aggregate", t.timings.aggregate_s},
              {"plan", t.timings.plan_s}}},
            {"objects", objects}};
}

void run_sort(const Globals& g, const SortArgs& a)
{
    PipelineConfig c = load(g);
    if (a.count)
        c.scenario.object_count = *a.count;
    if (a.trials)
    {
        c.scenario.trials = *a.trials;
        c.scenario.trial_seeds.clear();
    }
    if (!a.kinds.empty())
    {
        c.scenario.conditions.clear();
        for (const auto& k : a.kinds)
            c.scenario.conditions.push_back(scene_kind_from_string(k));
    }
    c.validate();
    const PerceptionModel pm = train_perception(c.scenario_for(SceneKind::discrete));
    std::vector<CampaignResult> campaigns;
    json trials = json::array();
    for (SceneKind kind : c.scenario.conditions)
    {
        campaigns.push_back(run_campaign(c.scenario_for(kind), pm));
        for (const auto& t : campaigns.back().trials)
            trials.push_back(trial_json(t));
    }
    const std::string csv = campaign_csv(campaigns);
    write_text(in_output(c, "campaign.csv"), csv);
    write_ppm(in_output(c, "campaign.ppm"), campaign_chart(campaigns));
    write_text(in_output(c, "trials.json"), trials.dump(2) + "\n");
    std::cout << csv;
    if (campaigns.size() == 2)
        for (std::size_t k = 0; k < campaigns[0].mean.size(); ++k)
            std::printf("drop %s %.1f%%\n", campaigns[0].class_names[k].c_str(),
                        100.0 * (campaigns[0].mean[k] - campaigns[1].mean[k]));
    std::printf("outputs %s\n", c.output_dir.string().c_str());
}

struct ResolutionArgs
{
    std::vector<double> heights;
};

void run_resolution(const Globals& g, const ResolutionArgs& a)
{
    const PipelineConfig c = load(g);
    ResolutionSettings s;
    s.reference_height_mm = c.geometry.working_height_mm;
    s.reference_dx_mm = c.geometry.line_resolution_dx_mm;
    s.cols = c.geometry.cols;
    s.angle_threshold_rad = c.segmenter.angle_threshold_rad;
    if (!a.heights.empty())
        s.heights_mm = a.heights;
    std::printf("height_mm line_pitch_mm smallest_resolved_mm\n");
    for (const auto& r : resolution_chart(s))
        std::printf("%.1f %.4f %.2f\n", r.height_mm, r.line_pitch_mm, r.smallest_resolved_mm);
}

std::string one_line(std::string s)
{
    for (auto& ch : s)
        if (ch == '\n' || ch == '\r')
            ch = ' ';
    return s;
}

int fail(const std::string& code, const std::string& message)
{
    std::fprintf(stderr, "error: %s: %s\n", code.c_str(), one_line(message).c_str());
    return code == "usage" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Rotating-prism hyperspectral scanning, perception and sorting pipeline", "prism"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed = 0;
    std::string config_path, output_dir;
    app.add_option("--config", config_path, "Pipeline config (JSON); defaults to $PRISM_CONFIG")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "Global seed, overrides the config");
    auto* out_opt = app.add_option("--output-dir", output_dir, "Output directory, overrides the config");

    GeomtestArgs geomtest;
    auto* geo = app.add_subcommand("geomtest", "Print FOV, k(theta) table and scan duration");
    geo->add_option("--n", geomtest.n, "Prism sides");
    geo->add_option("--samples", geomtest.samples, "Rows in the k(theta) table");

    SimulateArgs simulate;
    auto* sim = app.add_subcommand("simulate", "Render a scene into a frame stream");
    sim->add_option("--scene", simulate.scene, "Scene JSON; generated from the config when omitted");
    sim->add_option("--kind", simulate.kind, "discrete or cluttered")->check(CLI::IsMember({"discrete", "cluttered"}));
    sim->add_option("--count", simulate.count, "Objects in a generated scene");
    sim->add_option("--out", simulate.out, "Frame stream path");
    sim->add_option("--scene-out", simulate.scene_out, "Where to save the scene JSON");

    ReconstructArgs recon;
    auto* rec = app.add_subcommand("reconstruct", "Assemble a frame stream into a cube");
    rec->add_option("--frames", recon.frames, "Frame stream")->required();
    rec->add_option("--out", recon.out, "Cube data path (header written next to it)");
    rec->add_option("--interleave", recon.interleave, "bsq or bil");

    CorrectArgs correct;
    auto* cor = app.add_subcommand("correct", "Resample a cube onto a uniform metric grid");
    cor->add_option("--cube", correct.cube, "Uncorrected cube")->required();
    cor->add_option("--out", correct.out, "Corrected cube path");
    cor->add_option("--pitch", correct.pitch, "Target pitch in mm");
    cor->add_option("--interleave", correct.interleave, "bsq or bil");
    cor->add_option("--preview", correct.preview, "Pseudo-RGB PPM of the result");

    TrainArgs train;
    auto* tra = app.add_subcommand("train", "Train MNF + pixel classifier from the configured signatures");
    tra->add_option("--out", train.out, "Model path");

    ClassifyArgs classify;
    auto* cla = app.add_subcommand("classify", "Detect and classify objects in a corrected cube");
    cla->add_option("--cube", classify.cube, "Corrected cube")->required();
    cla->add_option("--model", classify.model, "Model file")->required();
    cla->add_option("--report", classify.report, "Detection report path (JSON)");
    cla->add_option("--overlay", classify.overlay, "Annotated PPM path");

    PlanArgs plan;
    auto* pla = app.add_subcommand("plan", "Plan a pick-and-place trajectory for one detection");
    pla->add_option("--report", plan.report, "Detection report")->required();
    pla->add_option("--object", plan.object, "Object index in the report");
    pla->add_option("--out", plan.out, "Trajectory table path");

    SortArgs sort;
    auto* sor = app.add_subcommand("sort", "Run sorting campaigns and write CSV, chart and trial reports");
    sor->add_option("--count", sort.count, "Objects per trial");
    sor->add_option("--trials", sort.trials, "Trials per condition (seeds from the global seed)");
    sor->add_option("--condition", sort.kinds, "discrete and/or cluttered")
        ->check(CLI::IsMember({"discrete", "cluttered"}));

    ResolutionArgs resolution;
    auto* res = app.add_subcommand("resolution-chart", "Smallest resolved bar width per working height");
    res->add_option("--height", resolution.heights, "Working height(s) in mm");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        return fail("usage", e.what());
    }
    if (!config_path.empty())
        g.config_path = config_path;
    if (seed_opt->count() > 0)
        g.seed = seed;
    if (out_opt->count() > 0)
        g.output_dir = output_dir;

    try
    {
        if (*geo)
            run_geomtest(g, geomtest);
        else if (*sim)
            run_simulate(g, simulate);
        else if (*rec)
            run_reconstruct(g, recon);
        else if (*cor)
            run_correct(g, correct);
        else if (*tra)
            run_train(g, train);
        else if (*cla)
            run_classify(g, classify);
        else if (*pla)
            run_plan(g, plan);
        else if (*sor)
            run_sort(g, sort);
        else if (*res)
            run_resolution(g, resolution);
        return 0;
    }
    catch (const CliError& e)
    {
        return fail(e.code, e.what());
    }
    catch (const ConfigError& e)
    {
        return fail("config", e.what());
    }
    catch (const FormatError& e)
    {
        return fail("format", e.what());
    }
    catch (const std::invalid_argument& e)
    {
        return fail("invalid", e.what());
    }
    catch (const std::out_of_range& e)
    {
        return fail("range", e.what());
    }
    catch (const fs::filesystem_error& e)
    {
        return fail("io", e.what());
    }
    catch (const std::exception& e)
    {
        return fail("runtime", e.what());
    }
}
