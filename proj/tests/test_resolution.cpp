#include "prism/resolution.hpp"

#include "doctest.h"

#include <stdexcept>
#include <cmath>

using namespace prism;

TEST_CASE("line pitch scales with height")
{
    const ResolutionSettings s;
    CHECK(line_pitch_at(600.0, s) == doctest::Approx(0.5));
    CHECK(line_pitch_at(300.0, s) == doctest::Approx(0.25));
    CHECK(line_pitch_at(900.0, s) == doctest::Approx(0.75));
}

TEST_CASE("bar target layout")
{
    const auto c = linear_band_centers(8);
    const SceneDescription s = bar_target_scene(2.0, 1.0, 3, c);
    REQUIRE(s.objects.size() == 3);
    CHECK(s.objects[0].shape.contains({1.5, 0.0}));
    CHECK_FALSE(s.objects[0].shape.contains({3.5, 0.0}));
    CHECK(s.objects[1].shape.contains({5.5, 0.0}));
    CHECK(s.objects[2].shape.contains({9.5, 4.9}));
    CHECK_FALSE(s.objects[2].shape.contains({9.5, 5.1}));
}

TEST_CASE("foreground runs along a line")
{
    const auto c = linear_band_centers(8);
    const SpectralSignature bg = default_background(c);
    const SpectralSignature fg = default_textile_signatures(c).front();
    FramePacket f;
    f.cols = 10;
    f.bands = 8;
    const std::vector<int> pattern{0, 1, 1, 0, 1, 0, 0, 1, 1, 1};
    for (int u = 0; u < 10; ++u)
        for (int b = 0; b < 8; ++b)
            f.samples.push_back(float(pattern[std::size_t(u)] ? fg.reflectance[std::size_t(b)]
                                                               : bg.reflectance[std::size_t(b)]));
    CHECK(count_foreground_runs(f, bg, 0.08) == 3);
}

TEST_CASE("wide targets resolve and sub-pitch targets do not")
{
    ResolutionSettings s;
    s.cols = 128;
    s.bands = 8;
    CHECK(target_resolved(2.0, 600.0, s));
    CHECK(target_resolved(0.6, 600.0, s));
    CHECK_FALSE(target_resolved(0.2, 600.0, s));
}

TEST_CASE("smallest resolved width tracks the line pitch")
{
    ResolutionSettings s;
    s.cols = 128;
    s.bands = 8;
    s.heights_mm = {300.0, 600.0, 900.0};
    const auto rows = resolution_chart(s, Execution::serial);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows)
    {
        CAPTURE(r.height_mm);
        CHECK(r.smallest_resolved_mm > 0.5 * r.line_pitch_mm);
        CHECK(r.smallest_resolved_mm <= r.line_pitch_mm + s.width_step_mm);
    }
    CHECK(rows[0].smallest_resolved_mm < rows[1].smallest_resolved_mm);
    CHECK(rows[1].smallest_resolved_mm < rows[2].smallest_resolved_mm);
    CHECK(rows[1].smallest_resolved_mm == doctest::Approx(0.5).epsilon(0.3));
}

TEST_CASE("settings validation")
{
    ResolutionSettings s;
    CHECK_NOTHROW(s.validate());
    s.heights_mm.clear();
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    ResolutionSettings t;
    t.phases = 0;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}
