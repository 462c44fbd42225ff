#include "prism/config.hpp"

#include "prism/io.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdlib>

namespace prism
{

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace
{
/// Object reader that rejects keys it was not asked about.
class Section
{
  public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw ConfigError("config: '" + path_ + "' must be an object");
    }

    template <class T>
    void get(const char* key, T& out)
    {
        seen_.emplace_back(key);
        if (!j_.contains(key))
            return;
        try
        {
            out = j_.at(key).get<T>();
        }
        catch (const json::exception&)
        {
            throw ConfigError("config: '" + path_ + "." + key + "' has the wrong type");
        }
    }

    void get_vec3(const char* key, Eigen::Vector3d& out)
    {
        std::vector<double> v{out.x(), out.y(), out.z()};
        get(key, v);
        if (v.size() != 3)
            throw ConfigError("config: '" + path_ + "." + key + "' needs 3 values");
        out = {v[0], v[1], v[2]};
    }

    [[nodiscard]] const json* child(const char* key)
    {
        seen_.emplace_back(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    [[nodiscard]] std::string path(const char* key) const { return path_ + "." + key; }

    /// Call after all gets.
    void finish() const
    {
        for (const auto& [k, v] : j_.items())
            if (std::find(seen_.begin(), seen_.end(), k) == seen_.end())
                throw ConfigError("config: unknown key '" + path_ + "." + k + "'");
    }

  private:
    const json& j_;
    std::string path_;
    std::vector<std::string> seen_;
};

SignatureFile signature_file(const json& j, const std::string& where, const fs::path& base)
{
    Section s(j, where);
    SignatureFile f;
    std::string file;
    s.get("class_name", f.class_name);
    s.get("file", file);
    s.finish();
    if (file.empty())
        throw ConfigError("config: '" + where + ".file' is required");
    f.file = fs::path(file).is_absolute() ? fs::path(file) : base / file;
    if (!fs::exists(f.file))
        throw ConfigError("config: '" + where + ".file' does not exist: " + f.file.string());
    return f;
}

template <class F>
void section(Section& parent, const char* key, F&& body)
{
    if (const json* j = parent.child(key))
    {
        Section s(*j, parent.path(key));
        body(s);
        s.finish();
    }
}
}  // namespace

PipelineConfig parse_config(const std::string& json_text, const fs::path& base)
{
    json root;
    try
    {
        root = json::parse(json_text);
    }
    catch (const json::exception& e)
    {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    PipelineConfig c;
    Section top(root, "$");
    top.get("seed", c.seed);
    {
        std::string out = c.output_dir.string();
        top.get("output_dir", out);
        c.output_dir = out;
    }
    section(top, "prism", [&](Section& s) {
        s.get("n_sides", c.prism.n_sides);
        s.get("circumradius_mm", c.prism.circumradius_mm);
        s.get("sensor_x_mm", c.prism.sensor_x_mm);
        s.get("reflectivity", c.prism.reflectivity);
        s.get("motor_speed_rpm", c.prism.motor_speed_rpm);
        s.get("gear_ratio", c.prism.gear_ratio);
        s.get("encoder_resolution_deg", c.prism.encoder_resolution_deg);
    });
    section(top, "geometry", [&](Section& s) {
        s.get("working_height_mm", c.geometry.working_height_mm);
        s.get("line_resolution_dx_mm", c.geometry.line_resolution_dx_mm);
        s.get("rows", c.geometry.rows);
        s.get("cols", c.geometry.cols);
    });
    section(top, "bands", [&](Section& s) {
        s.get("count", c.bands.count);
        s.get("first_nm", c.bands.first_nm);
        s.get("last_nm", c.bands.last_nm);
    });
    if (const json* sigs = top.child("signatures"))
    {
        if (!sigs->is_array())
            throw ConfigError("config: '$.signatures' must be an array");
        for (std::size_t i = 0; i < sigs->size(); ++i)
            c.signatures.push_back(signature_file((*sigs)[i], "$.signatures[" + std::to_string(i) + "]", base));
    }
    if (const json* bg = top.child("background"))
        c.background = signature_file(*bg, "$.background", base);
    section(top, "mnf", [&](Section& s) { s.get("retain_fraction", c.mnf.retain_fraction); });
    section(top, "classifier", [&](Section& s) {
        if (const json* blocks = s.child("blocks"))
        {
            if (!blocks->is_array())
                throw ConfigError("config: '$.classifier.blocks' must be an array");
            c.classifier.blocks.clear();
            for (std::size_t i = 0; i < blocks->size(); ++i)
            {
                Section b((*blocks)[i], "$.classifier.blocks[" + std::to_string(i) + "]");
                ConvBlockSpec spec;
                b.get("kernel", spec.kernel);
                b.get("channels", spec.channels);
                b.get("pool", spec.pool);
                b.finish();
                c.classifier.blocks.push_back(spec);
            }
        }
        s.get("hidden", c.classifier.hidden);
        s.get("learning_rate", c.classifier.learning_rate);
        s.get("batch_size", c.classifier.batch_size);
        s.get("max_epochs", c.classifier.max_epochs);
        s.get("bn_epsilon", c.classifier.bn_epsilon);
        s.get("bn_momentum", c.classifier.bn_momentum);
    });
    section(top, "detection", [&](Section& s) {
        s.get("angle_threshold_rad", c.segmenter.angle_threshold_rad);
        s.get("min_area_px", c.segmenter.min_area);
        s.get("pca_components", c.aggregation.pca_components);
        s.get("outlier_percentile", c.aggregation.outlier_percentile);
        s.get("min_votable_pixels", c.aggregation.min_votable_pixels);
        s.get("suction_points", c.suction.count);
        s.get("cup_radius_mm", c.suction.cup_radius_mm);
    });
    section(top, "path", [&](Section& s) {
        s.get("approach_height_mm", c.path.approach_height_mm);
        s.get("lift_height_mm", c.path.lift_height_mm);
        s.get("grasp_dwell_s", c.path.grasp_dwell_s);
        s.get("release_dwell_s", c.path.release_dwell_s);
        s.get_vec3("plane_origin_mm", c.path.plane_origin);
        s.get_vec3("workspace_min_mm", c.path.workspace.min);
        s.get_vec3("workspace_max_mm", c.path.workspace.max);
    });
    section(top, "lqt", [&](Section& s) {
        s.get("sample_period_s", c.lqt.sample_period_s);
        s.get("q_position", c.lqt.q_position);
        s.get("q_velocity", c.lqt.q_velocity);
        s.get("r_input", c.lqt.r_input);
        s.get("terminal_weight", c.lqt.terminal_weight);
        s.get("cruise_speed_mm_s", c.lqt.cruise_speed_mm_s);
        s.get("min_segment_s", c.lqt.min_segment_s);
        s.get("settle_s", c.lqt.settle_s);
        s.get("max_velocity_mm_s", c.lqt.max_velocity_mm_s);
        s.get("max_acceleration_mm_s2", c.lqt.max_acceleration_mm_s2);
    });
    section(top, "scene", [&](Section& s) {
        s.get("plane_width_mm", c.scene.plane_width_mm);
        s.get("plane_height_mm", c.scene.plane_height_mm);
        s.get("object_size_min_mm", c.scene.object_size_min_mm);
        s.get("object_size_max_mm", c.scene.object_size_max_mm);
        s.get("max_rotation_deg", c.scene.max_rotation_deg);
        s.get("min_gap_mm", c.scene.min_gap_mm);
        s.get("clutter_coverage", c.scene.clutter_coverage);
        s.get("noise_sigma", c.scene.noise_sigma);
    });
    section(top, "scenario", [&](Section& s) {
        s.get("object_count", c.scenario.object_count);
        s.get("trials", c.scenario.trials);
        s.get("trial_seeds", c.scenario.trial_seeds);
        std::vector<std::string> conditions;
        s.get("conditions", conditions);
        if (!conditions.empty())
        {
            c.scenario.conditions.clear();
            for (const auto& k : conditions)
            {
                try
                {
                    c.scenario.conditions.push_back(scene_kind_from_string(k));
                }
                catch (const std::invalid_argument& e)
                {
                    throw ConfigError(std::string("config: '$.scenario.conditions': ") + e.what());
                }
            }
        }
        std::vector<std::vector<double>> bins;
        s.get("bins_mm", bins);
        for (const auto& b : bins)
        {
            if (b.size() != 3)
                throw ConfigError("config: '$.scenario.bins_mm' entries need 3 values");
            c.scenario.bins.emplace_back(b[0], b[1], b[2]);
        }
        s.get("training_objects", c.scenario.training_objects);
        s.get("training_samples_per_class", c.scenario.training_samples_per_class);
        s.get("training_seed", c.scenario.training_seed);
        s.get("max_scans", c.scenario.max_scans);
    });
    top.finish();
    c.validate();
    return c;
}

PipelineConfig load_config(const fs::path& path)
{
    std::string text;
    try
    {
        text = read_text(path);
    }
    catch (const std::exception&)
    {
        throw ConfigError("config: cannot read " + path.string());
    }
    return parse_config(text, path.parent_path());
}

PipelineConfig resolve_config(const std::optional<fs::path>& explicit_path)
{
    if (explicit_path)
        return load_config(*explicit_path);
    if (const char* env = std::getenv(kConfigEnvVar); env != nullptr && *env != '\0')
        return load_config(env);
    return PipelineConfig{};
}

void PipelineConfig::validate() const
{
    try
    {
        prism.validate();
        geometry.validate();
        lqt.validate();
        if (bands.count < 2 || !(bands.last_nm > bands.first_nm) || !(bands.first_nm > 0.0))
            throw std::invalid_argument("bands: need >= 2 bands over an increasing positive range");
        if (!(mnf.retain_fraction > 0.0 && mnf.retain_fraction <= 1.0))
            throw std::invalid_argument("mnf: retain_fraction must lie in (0, 1]");
        ClassifierSpec spec = classifier;
        spec.class_count = std::max<int>(1, static_cast<int>(signatures.empty() ? 4 : signatures.size()));
        spec.validate(default_retained_k(bands.count, mnf.retain_fraction));
        if (!(segmenter.angle_threshold_rad > 0.0) || segmenter.min_area < 1)
            throw std::invalid_argument("detection: threshold must be > 0 and min area >= 1");
        if (aggregation.pca_components < 1 || !(aggregation.outlier_percentile > 0.0) ||
            aggregation.outlier_percentile > 1.0 || aggregation.min_votable_pixels < 1)
            throw std::invalid_argument("detection: invalid aggregation settings");
        if (suction.count < 1 || !(suction.cup_radius_mm > 0.0))
            throw std::invalid_argument("detection: need >= 1 suction point and a positive cup radius");
        if (!(scene.object_size_min_mm > 0.0) || scene.object_size_max_mm < scene.object_size_min_mm ||
            scene.min_gap_mm < 0.0 || !(scene.clutter_coverage > 0.0) || scene.noise_sigma < 0.0 ||
            !(scene.plane_width_mm > 0.0) || !(scene.plane_height_mm > 0.0))
            throw std::invalid_argument("scene: invalid layout");
        if (scenario.object_count < 0 || scenario.trials < 1 || scenario.training_objects < 1 ||
            scenario.training_samples_per_class < 1 || scenario.max_scans < 0 || scenario.conditions.empty())
            throw std::invalid_argument("scenario: invalid counts");
        if (!scenario.bins.empty() && scenario.bins.size() != (signatures.empty() ? 4u : signatures.size()))
            throw std::invalid_argument("scenario: need exactly one bin per class");
        auto seeds = trial_seeds();
        std::sort(seeds.begin(), seeds.end());
        if (std::adjacent_find(seeds.begin(), seeds.end()) != seeds.end())
            throw std::invalid_argument("scenario: trial seeds must be distinct");
    }
    catch (const std::invalid_argument& e)
    {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

std::vector<double> PipelineConfig::band_centers() const
{
    return linear_band_centers(bands.count, bands.first_nm, bands.last_nm);
}

std::vector<SpectralSignature> PipelineConfig::class_signatures() const
{
    const auto centers = band_centers();
    if (signatures.empty())
        return default_textile_signatures(centers);
    std::vector<SpectralSignature> out;
    for (const auto& f : signatures)
        out.push_back(resample(read_signature(f.file, f.class_name), centers));
    return out;
}

SpectralSignature PipelineConfig::background_signature() const
{
    const auto centers = band_centers();
    if (!background)
        return default_background(centers);
    return resample(read_signature(background->file, background->class_name), centers);
}

std::vector<std::uint64_t> PipelineConfig::trial_seeds() const
{
    if (!scenario.trial_seeds.empty())
        return scenario.trial_seeds;
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < scenario.trials; ++i)
        seeds.push_back(seed + static_cast<std::uint64_t>(i));
    return seeds;
}

SortingScenario PipelineConfig::scenario_for(SceneKind kind) const
{
    SortingScenario s;
    s.kind = kind;
    s.classes = class_signatures();
    s.background = background_signature();
    s.object_count = scenario.object_count;
    s.trial_seeds = trial_seeds();
    s.bins = scenario.bins.empty() ? default_bins(static_cast<int>(s.classes.size())) : scenario.bins;
    s.layout = scene;
    s.prism = prism;
    s.geom = geometry;
    s.segmenter = segmenter;
    s.aggregation = aggregation;
    s.suction = suction;
    s.path = path;
    s.lqt = lqt;
    s.mnf = mnf;
    s.classifier = classifier;
    s.classifier.class_count = static_cast<int>(s.classes.size());
    s.classifier.seed = seed;
    s.training_objects = scenario.training_objects;
    s.training_samples_per_class = scenario.training_samples_per_class;
    s.training_seed = scenario.training_seed;
    s.max_scans = scenario.max_scans;
    s.validate();
    return s;
}

std::string config_to_json(const PipelineConfig& c)
{
    const auto vec3 = [](const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); };
    json j;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir.string();
    j["prism"] = {{"n_sides", c.prism.n_sides},
                  {"circumradius_mm", c.prism.circumradius_mm},
                  {"sensor_x_mm", c.prism.sensor_x_mm},
                  {"reflectivity", c.prism.reflectivity},
                  {"motor_speed_rpm", c.prism.motor_speed_rpm},
                  {"gear_ratio", c.prism.gear_ratio},
                  {"encoder_resolution_deg", c.prism.encoder_resolution_deg}};
    j["geometry"] = {{"working_height_mm", c.geometry.working_height_mm},
                     {"line_resolution_dx_mm", c.geometry.line_resolution_dx_mm},
                     {"rows", c.geometry.rows},
                     {"cols", c.geometry.cols}};
    j["bands"] = {{"count", c.bands.count}, {"first_nm", c.bands.first_nm}, {"last_nm", c.bands.last_nm}};
    if (!c.signatures.empty())
    {
        j["signatures"] = json::array();
        for (const auto& s : c.signatures)
            j["signatures"].push_back({{"class_name", s.class_name}, {"file", s.file.string()}});
    }
    if (c.background)
        j["background"] = {{"class_name", c.background->class_name}, {"file", c.background->file.string()}};
    j["mnf"] = {{"retain_fraction", c.mnf.retain_fraction}};
    json blocks = json::array();
    for (const auto& b : c.classifier.blocks)
        blocks.push_back({{"kernel", b.kernel}, {"channels", b.channels}, {"pool", b.pool}});
    j["classifier"] = {{"blocks", blocks},
                       {"hidden", c.classifier.hidden},
                       {"learning_rate", c.classifier.learning_rate},
                       {"batch_size", c.classifier.batch_size},
                       {"max_epochs", c.classifier.max_epochs},
                       {"bn_epsilon", c.classifier.bn_epsilon},
                       {"bn_momentum", c.classifier.bn_momentum}};
    j["detection"] = {{"angle_threshold_rad", c.segmenter.angle_threshold_rad},
                      {"min_area_px", c.segmenter.min_area},
                      {"pca_components", c.aggregation.pca_components},
                      {"outlier_percentile", c.aggregation.outlier_percentile},
                      {"min_votable_pixels", c.aggregation.min_votable_pixels},
                      {"suction_points", c.suction.count},
                      {"cup_radius_mm", c.suction.cup_radius_mm}};
    j["path"] = {{"approach_height_mm", c.path.approach_height_mm},
                 {"lift_height_mm", c.path.lift_height_mm},
                 {"grasp_dwell_s", c.path.grasp_dwell_s},
                 {"release_dwell_s", c.path.release_dwell_s},
                 {"plane_origin_mm", vec3(c.path.plane_origin)},
                 {"workspace_min_mm", vec3(c.path.workspace.min)},
                 {"workspace_max_mm", vec3(c.path.workspace.max)}};
    j["lqt"] = {{"sample_period_s", c.lqt.sample_period_s},
                {"q_position", c.lqt.q_position},
                {"q_velocity", c.lqt.q_velocity},
                {"terminal_weight", c.lqt.terminal_weight},
                {"r_input", c.lqt.r_input},
                {"cruise_speed_mm_s", c.lqt.cruise_speed_mm_s},
                {"min_segment_s", c.lqt.min_segment_s},
                {"settle_s", c.lqt.settle_s},
                {"max_velocity_mm_s", c.lqt.max_velocity_mm_s},
                {"max_acceleration_mm_s2", c.lqt.max_acceleration_mm_s2}};
    j["scene"] = {{"plane_width_mm", c.scene.plane_width_mm},
                  {"plane_height_mm", c.scene.plane_height_mm},
                  {"object_size_min_mm", c.scene.object_size_min_mm},
                  {"object_size_max_mm", c.scene.object_size_max_mm},
                  {"max_rotation_deg", c.scene.max_rotation_deg},
                  {"min_gap_mm", c.scene.min_gap_mm},
                  {"clutter_coverage", c.scene.clutter_coverage},
                  {"noise_sigma", c.scene.noise_sigma}};
    json conditions = json::array();
    for (auto k : c.scenario.conditions)
        conditions.push_back(to_string(k));
    json bins = json::array();
    for (const auto& b : c.scenario.bins)
        bins.push_back(vec3(b));
    j["scenario"] = {{"object_count", c.scenario.object_count},
                     {"trials", c.scenario.trials},
                     {"trial_seeds", c.scenario.trial_seeds},
                     {"conditions", conditions},
                     {"bins_mm", bins},
                     {"training_objects", c.scenario.training_objects},
                     {"training_samples_per_class", c.scenario.training_samples_per_class},
                     {"training_seed", c.scenario.training_seed},
                     {"max_scans", c.scenario.max_scans}};
    return j.dump(2) + "\n";
}

}  // namespace prism
