#include "prism/config.hpp"
#include "prism/io.hpp"

#include "doctest.h"
#include "support.hpp"

#include <stdexcept>
#include <cstdlib>

using namespace prism;
namespace fs = std::filesystem;

namespace
{
std::string error_of(const std::string& json, const fs::path& base = {})
{
    try
    {
        (void)parse_config(json, base);
    }
    catch (const ConfigError& e)
    {
        return e.what();
    }
    return {};
}
}  // namespace

TEST_CASE("empty document keeps every default")
{
    const PipelineConfig c = parse_config("{}");
    CHECK(c.seed == 1);
    CHECK(c.geometry.rows == 871);
    CHECK(c.geometry.cols == 512);
    CHECK(c.bands.count == 96);
    CHECK(c.classifier.blocks.size() == 2);
    CHECK(c.trial_seeds() == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
    CHECK(c.class_signatures().size() == 4);
    CHECK(c.band_centers().front() == 400.0);
    CHECK(c.band_centers().back() == 1000.0);
}

TEST_CASE("values are read from every section")
{
    const PipelineConfig c = parse_config(R"({
        "seed": 9,
        "geometry": {"working_height_mm": 450, "rows": 300},
        "bands": {"count": 16},
        "classifier": {"blocks": [{"kernel": 3, "channels": 8, "pool": 2}], "hidden": [12], "max_epochs": 4},
        "detection": {"min_area_px": 40, "cup_radius_mm": 10},
        "path": {"plane_origin_mm": [310, 5, 0]},
        "lqt": {"r_input": 0.5},
        "scene": {"noise_sigma": 0.01},
        "scenario": {"trials": 3, "conditions": ["cluttered"], "max_scans": 30}
    })");
    CHECK(c.seed == 9);
    CHECK(c.geometry.working_height_mm == 450.0);
    CHECK(c.geometry.rows == 300);
    CHECK(c.bands.count == 16);
    REQUIRE(c.classifier.blocks.size() == 1);
    CHECK(c.classifier.blocks[0].channels == 8);
    CHECK(c.classifier.hidden == std::vector<int>{12});
    CHECK(c.segmenter.min_area == 40);
    CHECK(c.suction.cup_radius_mm == 10.0);
    CHECK(c.path.plane_origin.x() == 310.0);
    CHECK(c.lqt.r_input == 0.5);
    CHECK(c.scene.noise_sigma == 0.01);
    CHECK(c.trial_seeds() == std::vector<std::uint64_t>{9, 10, 11});
    REQUIRE(c.scenario.conditions.size() == 1);
    CHECK(c.scenario.conditions[0] == SceneKind::cluttered);

    const SortingScenario s = c.scenario_for(SceneKind::cluttered);
    CHECK(s.classifier.seed == 9);
    CHECK(s.classifier.class_count == 4);
    CHECK(s.classes.front().bands() == 16);
    CHECK(s.max_scans == 30);
}

TEST_CASE("unknown keys are rejected with their location")
{
    CHECK(error_of(R"({"sede": 1})").find("sede") != std::string::npos);
    CHECK(error_of(R"({"lqt": {"q_pos": 1}})").find("$.lqt") != std::string::npos);
    CHECK(error_of(R"({"classifier": {"blocks": [{"kernel": 3, "width": 2}]}})").find("width") != std::string::npos);
}

TEST_CASE("malformed and out-of-range values are rejected")
{
    CHECK_FALSE(error_of("{").empty());
    CHECK_FALSE(error_of(R"({"seed": "one"})").empty());
    CHECK_FALSE(error_of(R"({"geometry": {"working_height_mm": -5}})").empty());
    CHECK_FALSE(error_of(R"({"mnf": {"retain_fraction": 1.5}})").empty());
    CHECK_FALSE(error_of(R"({"lqt": {"r_input": 0}})").empty());
    CHECK_FALSE(error_of(R"({"scenario": {"conditions": ["heap"]}})").empty());
    CHECK_FALSE(error_of(R"({"scenario": {"trial_seeds": [4, 4]}})").empty());
    CHECK_FALSE(error_of(R"({"scenario": {"bins_mm": [[1, 2]]}})").empty());
    CHECK_FALSE(error_of(R"({"classifier": {"blocks": [{"kernel": 5, "channels": 4, "pool": 128}]}})").empty());
}

TEST_CASE("signature files resolve relative to the config and must exist")
{
    const auto dir = testing::scratch_dir("config_sig");
    SpectralSignature s;
    s.band_centers_nm = {400, 700, 1000};
    s.reflectance = {0.2, 0.5, 0.3};
    write_signature(dir / "a.txt", s);
    s.reflectance = {0.6, 0.1, 0.4};
    write_signature(dir / "b.txt", s);
    write_text(dir / "cfg.json", R"({"bands": {"count": 8},
        "signatures": [{"class_name": "a", "file": "a.txt"}, {"class_name": "b", "file": "b.txt"}]})");
    const PipelineConfig c = load_config(dir / "cfg.json");
    const auto sigs = c.class_signatures();
    REQUIRE(sigs.size() == 2);
    CHECK(sigs[1].class_name == "b");
    CHECK(sigs[1].bands() == 8);
    CHECK(sigs[0].reflectance.front() == doctest::Approx(0.2));
    CHECK(c.scenario_for(SceneKind::discrete).classifier.class_count == 2);

    CHECK(error_of(R"({"signatures": [{"class_name": "x", "file": "missing.txt"}]})", dir).find("does not exist") !=
          std::string::npos);
    CHECK_THROWS_AS((void)load_config(dir / "nope.json"), ConfigError);
}

TEST_CASE("serialized config parses back to the same values")
{
    PipelineConfig c = parse_config(R"({"seed": 4, "bands": {"count": 24}, "lqt": {"q_velocity": 2.5},
        "scenario": {"trial_seeds": [8, 3]}})");
    const PipelineConfig r = parse_config(config_to_json(c));
    CHECK(config_to_json(r) == config_to_json(c));
    CHECK(r.seed == 4);
    CHECK(r.lqt.q_velocity == 2.5);
    CHECK(r.trial_seeds() == std::vector<std::uint64_t>{8, 3});
}

TEST_CASE("environment variable supplies the default file")
{
    const auto dir = testing::scratch_dir("config_env");
    write_text(dir / "env.json", R"({"seed": 77})");
    CHECK(resolve_config(std::nullopt).seed == 1);
    ::setenv(kConfigEnvVar, (dir / "env.json").c_str(), 1);
    CHECK(resolve_config(std::nullopt).seed == 77);
    write_text(dir / "explicit.json", R"({"seed": 5})");
    CHECK(resolve_config(dir / "explicit.json").seed == 5);
    ::unsetenv(kConfigEnvVar);
    CHECK(resolve_config(std::nullopt).seed == 1);
}
