#include "prism/geometry.hpp"
#include "prism/grid.hpp"
#include "prism/scene.hpp"

#include "doctest.h"
#include "support.hpp"

#include <stdexcept>
#include <cmath>
#include <random>

using namespace prism;

namespace
{
const std::vector<double>& centers()
{
    static const auto c = linear_band_centers(24);
    return c;
}
}  // namespace

TEST_CASE("rectangle area and containment agree with a sampled estimate")
{
    const Polygon p = make_rectangle(10.0, -5.0, 30.0, 20.0, 0.4);
    CHECK(p.area() == doctest::Approx(600.0).epsilon(1e-12));
    const MetricPoint c = p.centroid();
    CHECK(c.x_mm == doctest::Approx(10.0));
    CHECK(c.y_mm == doctest::Approx(-5.0));

    // Monte Carlo area over a bounding square.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    int inside = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i)
        inside += p.contains({10.0 + u(rng), -5.0 + u(rng)}) ? 1 : 0;
    CHECK(inside / double(n) * 3600.0 == doctest::Approx(600.0).epsilon(0.02));
}

TEST_CASE("polygon distance and intersection")
{
    const Polygon a = make_rectangle(0.0, 0.0, 10.0, 10.0);
    const Polygon b = make_rectangle(20.0, 0.0, 10.0, 10.0);
    const Polygon c = make_rectangle(8.0, 0.0, 10.0, 10.0);
    CHECK(polygon_distance(a, b) == doctest::Approx(10.0));
    CHECK_FALSE(polygons_intersect(a, b));
    CHECK(polygons_intersect(a, c));
    CHECK(polygon_distance(a, c) == 0.0);
}

TEST_CASE("band centres and signatures")
{
    const auto c = linear_band_centers(96);
    CHECK(c.size() == 96);
    CHECK(c.front() == 400.0);
    CHECK(c.back() == 1000.0);
    const auto sigs = default_textile_signatures(c);
    REQUIRE(sigs.size() == 4);
    for (const auto& s : sigs)
        CHECK_NOTHROW(s.validate());
    SpectralSignature bad = sigs[0];
    bad.reflectance[3] = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    const SpectralSignature r = resample(sigs[0], linear_band_centers(24));
    CHECK(r.bands() == 24);
    CHECK(r.reflectance.front() == doctest::Approx(sigs[0].reflectance.front()));
}

TEST_CASE("discrete scenes are separated, deterministic and cycle classes")
{
    const auto sigs = default_textile_signatures(centers());
    const auto bg = default_background(centers());
    SceneLayout layout;
    const SceneDescription a = generate_scene(SceneKind::discrete, sigs, bg, 52, 11, layout);
    const SceneDescription b = generate_scene(SceneKind::discrete, sigs, bg, 52, 11, layout);
    REQUIRE(a.objects.size() == 52);
    for (std::size_t i = 0; i < a.objects.size(); ++i)
    {
        CHECK(a.objects[i].signature == static_cast<int>(i % 4));
        CHECK(a.objects[i].shape.vertices.size() == b.objects[i].shape.vertices.size());
        for (std::size_t v = 0; v < a.objects[i].shape.vertices.size(); ++v)
        {
            CHECK(a.objects[i].shape.vertices[v].x_mm == b.objects[i].shape.vertices[v].x_mm);
            CHECK(a.objects[i].shape.vertices[v].y_mm == b.objects[i].shape.vertices[v].y_mm);
        }
        for (std::size_t j = i + 1; j < a.objects.size(); ++j)
            CHECK(polygon_distance(a.objects[i].shape, a.objects[j].shape) >= layout.min_gap_mm - 1e-9);
    }
}

TEST_CASE("cluttered scenes overlap")
{
    const auto sigs = default_textile_signatures(centers());
    const auto bg = default_background(centers());
    const SceneDescription s = generate_scene(SceneKind::cluttered, sigs, bg, 52, 5);
    int overlaps = 0;
    for (std::size_t i = 0; i < s.objects.size(); ++i)
        for (std::size_t j = i + 1; j < s.objects.size(); ++j)
            overlaps += polygons_intersect(s.objects[i].shape, s.objects[j].shape) ? 1 : 0;
    CHECK(overlaps > 10);
}

TEST_CASE("too many discrete objects is an error")
{
    const auto sigs = default_textile_signatures(centers());
    const auto bg = default_background(centers());
    CHECK_THROWS((void)generate_scene(SceneKind::discrete, sigs, bg, 500, 1));
    CHECK_THROWS_AS((void)generate_scene(SceneKind::discrete, sigs, bg, 0, 1), std::invalid_argument);
}

TEST_CASE("top object respects z order")
{
    SceneDescription s;
    s.background = default_background(centers());
    s.signatures = default_textile_signatures(centers());
    s.objects.push_back({make_rectangle(0, 0, 20, 20), 0, 0});
    s.objects.push_back({make_rectangle(5, 0, 20, 20), 1, 1});
    CHECK(s.top_object_at({-8, 0}) == 0);
    CHECK(s.top_object_at({2, 0}) == 1);
    CHECK(s.top_object_at({50, 0}) == -1);
}

TEST_CASE("rendered frames are noise free at sigma 0 and reproducible with noise")
{
    const GeometryContext g = testing::small_geometry();
    const auto sigs = default_textile_signatures(centers());
    SceneDescription s = generate_scene(SceneKind::discrete, sigs, default_background(centers()), 6, 3);
    s.noise_sigma = 0.0;
    const FramePacket clean = render_frame(s, {3.0 * kPi / 20.0}, g);
    CHECK(clean.cols == g.cols);
    CHECK(clean.bands == 24);
    for (int u = 0; u < clean.cols; ++u)
    {
        const MetricPoint p = metric_at(u, clean.theta, g);
        const int obj = s.top_object_at(p);
        const auto& refl = obj < 0 ? s.background.reflectance
                                   : s.signatures[std::size_t(s.objects[std::size_t(obj)].signature)].reflectance;
        for (int b = 0; b < clean.bands; ++b)
            CHECK(clean.spectrum(u)[b] == static_cast<float>(refl[std::size_t(b)]));
    }
    s.noise_sigma = 0.02;
    const FramePacket n1 = render_frame(s, {0.5}, g);
    const FramePacket n2 = render_frame(s, {0.5}, g);
    CHECK(n1.samples == n2.samples);
    for (float v : n1.samples)
        CHECK((v >= 0.0f && v <= 1.0f));
}

TEST_CASE("scan timestamps are uniform over the scan duration")
{
    const GeometryContext g = testing::small_geometry();
    const auto sigs = default_textile_signatures(centers());
    const SceneDescription s = generate_scene(SceneKind::discrete, sigs, default_background(centers()), 4, 3);
    const PrismConfig cfg;
    const auto frames = render_scan(s, cfg, g);
    REQUIRE(frames.size() == std::size_t(g.rows));
    for (std::size_t r = 1; r < frames.size(); ++r)
    {
        CHECK(frames[r].timestamp_s > frames[r - 1].timestamp_s);
        CHECK(frames[r].theta.theta > frames[r - 1].theta.theta);
    }
    CHECK(frames.back().timestamp_s < scan_duration_seconds(cfg));
}

TEST_CASE("ground truth map labels object interiors")
{
    const auto sigs = default_textile_signatures(centers());
    const SceneDescription s = generate_scene(SceneKind::discrete, sigs, default_background(centers()), 8, 9);
    const CorrectedGrid grid = footprint_grid(GeometryContext{}, 1.0);
    const auto labels = ground_truth_label_map(s, grid);
    for (const auto& o : s.objects)
    {
        const PixelCoord px = grid.pixel_of(o.shape.centroid());
        const int r = static_cast<int>(std::lround(px.v)), c = static_cast<int>(std::lround(px.u));
        CHECK(labels[std::size_t(r) * grid.cols + c] == o.signature + 1);
    }
    CHECK(labels[0] == 0);
}

TEST_CASE("seed mixing separates streams")
{
    CHECK(mix_seed(1, 2) != mix_seed(2, 1));
    CHECK(mix_seed(1, 2) == mix_seed(1, 2));
    CHECK(mix_seed(0, 0) != 0);
}
