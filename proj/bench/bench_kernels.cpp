// Serial versus parallel timings for every kernel that has both paths.

#include "prism/classifier.hpp"
#include "prism/cube.hpp"
#include "prism/detection.hpp"
#include "prism/mnf.hpp"
#include "prism/resolution.hpp"
#include "prism/scene.hpp"

#include "CLI11.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

using namespace prism;

namespace
{
/// Median wall time in milliseconds over `repeats` runs.
double median_ms(int repeats, const std::function<void()>& fn)
{
    std::vector<double> t;
    for (int i = 0; i < repeats; ++i)
    {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(t.begin(), t.end());
    return t[t.size() / 2];
}

void report(const char* name, int repeats, const std::function<void(Execution)>& kernel)
{
    const double s = median_ms(repeats, [&] { kernel(Execution::serial); });
    const double p = median_ms(repeats, [&] { kernel(Execution::parallel); });
    std::printf("%-22s %10.2f %11.2f %8.2fx\n", name, s, p, s / p);
    std::fflush(stdout);
}
}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Serial versus parallel kernel timings"};
    int repeats = 3, bands = 32, objects = 24;
    std::uint64_t seed = 1;
    app.add_option("--repeats", repeats, "runs per measurement (median reported)")->check(CLI::PositiveNumber);
    app.add_option("--bands", bands, "spectral bands")->check(CLI::Range(4, 512));
    app.add_option("--objects", objects, "objects in the scene")->check(CLI::NonNegativeNumber);
    app.add_option("--seed", seed, "scene seed");
    CLI11_PARSE(app, argc, argv);

    const GeometryContext geom;
    const auto centers = linear_band_centers(bands);
    const SceneDescription scene = generate_scene(SceneKind::cluttered, default_textile_signatures(centers),
                                                  default_background(centers), objects, seed);
    const PrismConfig prism;
    const auto frames = render_scan(scene, prism, geom, Execution::serial);
    const HyperspectralCube raw = reconstruct(frames, geom, centers);
    const CorrectionMap map = build_correction_map(geom);
    const HyperspectralCube cube = correct_distortion(raw, map, Execution::serial);
    const auto masks = segment_objects(cube, scene.background, {}, Execution::serial);
    const auto fg = union_mask(masks, cube.rows(), cube.cols());
    const MnfModel mnf = mnf_fit(cube, fg, {}, Execution::serial);
    ClassifierSpec spec;
    spec.class_count = static_cast<int>(scene.signatures.size());
    const PixelClassifier net(spec, mnf.retained_k);
    const PixelLabelMap labels = predict_pixel_labels(cube, fg, net, mnf, Execution::serial);
    ResolutionSettings res;
    res.bands = 8;
    res.cols = 128;

    std::printf("threads %d, raster %dx%d, %d bands, %zu objects, median of %d runs\n", omp_get_max_threads(),
                geom.rows, geom.cols, bands, masks.size(), repeats);
    std::printf("%-22s %10s %11s %9s\n", "kernel", "serial ms", "parallel ms", "speedup");
    report("render_scan", repeats, [&](Execution e) { (void)render_scan(scene, prism, geom, e); });
    report("correct_distortion", repeats, [&](Execution e) { (void)correct_distortion(raw, map, e); });
    report("segment_objects", repeats, [&](Execution e) { (void)segment_objects(cube, scene.background, {}, e); });
    report("mnf_fit", repeats, [&](Execution e) { (void)mnf_fit(cube, fg, {}, e); });
    report("predict_pixel_labels", repeats, [&](Execution e) { (void)predict_pixel_labels(cube, fg, net, mnf, e); });
    report("aggregate_objects", repeats, [&](Execution e) { (void)aggregate_objects(labels, masks, cube, mnf, {}, {}, e); });
    report("resolution_chart", repeats, [&](Execution e) { (void)resolution_chart(res, e); });
    return 0;
}
