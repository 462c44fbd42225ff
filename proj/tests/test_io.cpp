#include "prism/io.hpp"

#include "doctest.h"
#include "support.hpp"

#include <stdexcept>
#include <fstream>
#include <iterator>

using namespace prism;
namespace fs = std::filesystem;

namespace
{
std::vector<char> file_bytes(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void put_bytes(const fs::path& p, const std::vector<char>& b)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

std::string error_of(const auto& fn)
{
    try
    {
        fn();
    }
    catch (const FormatError& e)
    {
        return e.what();
    }
    return {};
}

SceneDescription small_scene(std::uint64_t seed)
{
    const auto c = linear_band_centers(8);
    return generate_scene(SceneKind::discrete, default_textile_signatures(c), default_background(c), 5, seed);
}

void check_same_cube(const HyperspectralCube& a, const HyperspectralCube& b)
{
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    REQUIRE(a.bands() == b.bands());
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
    CHECK(a.corrected == b.corrected);
    CHECK(a.band_centers_nm == b.band_centers_nm);
    CHECK(a.interpolated_rows == b.interpolated_rows);
    CHECK(a.valid == b.valid);
    CHECK(a.geom.working_height_mm == b.geom.working_height_mm);
    CHECK(a.geom.line_resolution_dx_mm == b.geom.line_resolution_dx_mm);
    CHECK(a.geom.rows == b.geom.rows);
    CHECK(a.geom.cols == b.geom.cols);
    CHECK(a.grid.has_value() == b.grid.has_value());
    if (a.grid && b.grid)
    {
        CHECK(a.grid->pitch_mm == b.grid->pitch_mm);
        CHECK(a.grid->cols == b.grid->cols);
        CHECK(a.grid->rows == b.grid->rows);
        CHECK(a.grid->x0_mm == b.grid->x0_mm);
        CHECK(a.grid->y0_mm == b.grid->y0_mm);
    }
}
}  // namespace

TEST_CASE("cubes round trip bit-exactly in both interleaves")
{
    const auto dir = testing::scratch_dir("io_cube");
    const GeometryContext g = testing::small_geometry(61, 40, 4.0);
    auto frames = render_scan(small_scene(1), PrismConfig{}, g);
    frames.erase(frames.begin() + 20);
    const HyperspectralCube raw = reconstruct(frames, g, linear_band_centers(8));
    REQUIRE(raw.interpolated_rows[20] == 1);
    const HyperspectralCube corr = correct_distortion(raw, build_correction_map(g));
    for (Interleave il : {Interleave::bsq, Interleave::bil})
    {
        const fs::path p = dir / (il == Interleave::bsq ? "raw_bsq.img" : "raw_bil.img");
        write_cube(p, raw, il);
        CHECK(fs::exists(envi_header_path(p)));
        check_same_cube(raw, read_cube(p));
        const fs::path q = dir / (il == Interleave::bsq ? "corr_bsq.img" : "corr_bil.img");
        write_cube(q, corr, il);
        check_same_cube(corr, read_cube(q));
    }
    CHECK(read_text(envi_header_path(dir / "raw_bil.img")).find("interleave = bil") != std::string::npos);
}

TEST_CASE("cube reader rejects damaged files")
{
    const auto dir = testing::scratch_dir("io_cube_bad");
    const HyperspectralCube c = testing::random_cube(4, 5, 3, 1);
    const fs::path p = dir / "c.img";
    write_cube(p, c);
    auto data = file_bytes(p);
    data.resize(data.size() - 7);
    put_bytes(p, data);
    CHECK(error_of([&] { (void)read_cube(p); }).find("byte offset") != std::string::npos);

    write_cube(p, c);
    std::string hdr = read_text(envi_header_path(p));
    hdr.replace(hdr.find("data type = 4"), 13, "data type = 5");
    write_text(envi_header_path(p), hdr);
    CHECK_THROWS_AS((void)read_cube(p), FormatError);

    write_cube(p, c);
    hdr = read_text(envi_header_path(p));
    hdr.replace(hdr.find("prism format version = 1.0"), 26, "prism format version = 2.0");
    write_text(envi_header_path(p), hdr);
    CHECK(error_of([&] { (void)read_cube(p); }).find("newer") != std::string::npos);
}

TEST_CASE("frame streams round trip and detect damage")
{
    const auto dir = testing::scratch_dir("io_stream");
    const GeometryContext g = testing::small_geometry(31, 24, 8.0);
    const auto frames = render_scan(small_scene(2), PrismConfig{}, g);
    const fs::path p = dir / "scan.prs";
    write_frame_stream(p, frames);
    const auto back = read_frame_stream(p);
    REQUIRE(back.size() == frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i)
    {
        CHECK(back[i].theta.theta == frames[i].theta.theta);
        CHECK(back[i].timestamp_s == frames[i].timestamp_s);
        CHECK(back[i].samples == frames[i].samples);
    }

    const auto good = file_bytes(p);
    const std::size_t record = 16 + 24 * 8 * 4;
    CHECK(good.size() == 16 + frames.size() * record + 4);

    auto cut = good;
    cut.resize(cut.size() - 100);
    put_bytes(p, cut);
    const std::string trunc = error_of([&] { (void)read_frame_stream(p); });
    CHECK(trunc.find("truncated") != std::string::npos);
    CHECK(trunc.find("byte offset") != std::string::npos);

    auto flipped = good;
    flipped[16 + 5 * record + 40] ^= 0x10;
    put_bytes(p, flipped);
    const std::string crc = error_of([&] { (void)read_frame_stream(p); });
    CHECK(crc.find("checksum mismatch at byte offset") != std::string::npos);

    auto newer = good;
    newer[8] = 2;
    put_bytes(p, newer);
    CHECK(error_of([&] { (void)read_frame_stream(p); }).find("newer") != std::string::npos);

    put_bytes(p, std::vector<char>(good.begin(), good.begin() + 10));
    CHECK_THROWS_AS((void)read_frame_stream(p), FormatError);
    CHECK_THROWS_AS((void)read_frame_stream(dir / "absent.prs"), FormatError);
}

TEST_CASE("crc32 matches the standard check value")
{
    const char s[] = "123456789";
    CHECK(crc32_of(s, 9) == 0xCBF43926u);
}

TEST_CASE("model bundles round trip bit-exactly")
{
    const auto dir = testing::scratch_dir("io_model");
    const HyperspectralCube cube = testing::mixed_source_cube(12, 14, 8, 3);
    ModelBundle m;
    m.mnf = mnf_fit(cube);
    ClassifierSpec spec;
    spec.blocks = {{3, 4, 2}};
    spec.hidden = {6};
    spec.class_count = 3;
    spec.seed = 5;
    m.classifier = PixelClassifier(spec, m.mnf.retained_k);
    m.class_names = {"cotton", "wool", "poly blend"};
    m.band_centers_nm = linear_band_centers(8);
    const fs::path p = dir / "model.bin";
    write_model(p, m);
    CHECK(fs::exists(dir / "model.bin.manifest"));

    const ModelBundle r = read_model(p);
    CHECK(r.class_names == m.class_names);
    CHECK(r.band_centers_nm == m.band_centers_nm);
    CHECK(r.classifier.input_length() == m.classifier.input_length());
    const auto sa = m.classifier.state();
    const auto sb = r.classifier.state();
    REQUIRE(sa.size() == sb.size());
    for (std::size_t i = 0; i < sa.size(); ++i)
        CHECK(*sa[i] == *sb[i]);
    CHECK(r.mnf.retained_k == m.mnf.retained_k);
    CHECK(r.mnf.regularized == m.mnf.regularized);
    CHECK(r.mnf.mean == m.mnf.mean);
    CHECK(r.mnf.eigenvalues == m.mnf.eigenvalues);
    CHECK(r.mnf.components == m.mnf.components);
    CHECK(r.mnf.noise_covariance == m.mnf.noise_covariance);
    CHECK(r.mnf.signal_covariance == m.mnf.signal_covariance);

    auto bytes = file_bytes(p);
    bytes[bytes.size() / 2] ^= 0x01;
    put_bytes(p, bytes);
    CHECK(error_of([&] { (void)read_model(p); }).find("checksum mismatch") != std::string::npos);
}

TEST_CASE("trajectories round trip bit-exactly")
{
    const auto dir = testing::scratch_dir("io_traj");
    const CartesianTrajectory t = lqt_refine(build_sparse_path({310, 12, 0}, {650, -80, 50}));
    const fs::path p = dir / "t.csv";
    write_trajectory(p, t);
    const CartesianTrajectory r = read_trajectory(p);
    CHECK(r.sample_period_s == t.sample_period_s);
    CHECK(r.time == t.time);
    CHECK(r.position == t.position);
    CHECK(r.velocity == t.velocity);
    CHECK(r.waypoint_samples == t.waypoint_samples);
    REQUIRE(r.markers.size() == t.markers.size());
    for (std::size_t i = 0; i < t.markers.size(); ++i)
    {
        CHECK(r.markers[i].sample == t.markers[i].sample);
        CHECK(r.markers[i].action == t.markers[i].action);
    }
    const std::string text = read_text(p);
    CHECK(text.find("time,x,y,z,vx,vy,vz,action") != std::string::npos);
    write_text(p, "# prism trajectory 9.0 period_s=0.01\n");
    CHECK_THROWS_AS((void)read_trajectory(p), FormatError);
}

TEST_CASE("detection reports round trip")
{
    const auto dir = testing::scratch_dir("io_report");
    DetectionReport rep;
    rep.class_names = {"a", "b"};
    rep.grid = CorrectedGrid{0.5, 100, 80, -25.0, 20.0};
    DetectedObject o;
    o.instance_id = 3;
    o.class_label = 1;
    o.purity = 0.9375;
    o.pixel_count = 400;
    o.votes_kept = 380;
    o.bbox = {10, 11, 30, 31};
    o.centroid_col = 21.25;
    o.centroid_row = 20.5;
    o.suction_points = {{21.0, 20.0, 9.5}, {15.5, 20.0, 6.0}};
    rep.objects = {o};
    DetectedObject u = o;
    u.instance_id = 4;
    u.class_label = kUnknownClass;
    u.suction_points.clear();
    rep.objects.push_back(u);
    const fs::path p = dir / "r.json";
    write_detection_report(p, rep);
    const DetectionReport r = read_detection_report(p);
    CHECK(r.class_names == rep.class_names);
    CHECK(r.grid.x0_mm == rep.grid.x0_mm);
    CHECK(r.grid.rows == rep.grid.rows);
    REQUIRE(r.objects.size() == 2);
    CHECK(r.objects[0].class_label == 1);
    CHECK(r.objects[0].purity == o.purity);
    CHECK(r.objects[0].bbox.col1 == 31);
    CHECK(r.objects[0].centroid_col == o.centroid_col);
    REQUIRE(r.objects[0].suction_points.size() == 2);
    CHECK(r.objects[0].suction_points[1].col == 15.5);
    CHECK(r.objects[0].suction_points[1].clearance_mm == 6.0);
    CHECK(r.objects[1].class_label == kUnknownClass);
    write_text(p, "{\"format_version\": \"1.0\", \"objects\": [}");
    CHECK_THROWS_AS((void)read_detection_report(p), FormatError);
}

TEST_CASE("scenes and signatures round trip")
{
    const auto dir = testing::scratch_dir("io_scene");
    const SceneDescription s = small_scene(4);
    const fs::path p = dir / "scene.json";
    write_scene(p, s);
    const SceneDescription r = read_scene(p);
    CHECK(r.seed == s.seed);
    CHECK(r.noise_sigma == s.noise_sigma);
    CHECK(r.plane_width_mm == s.plane_width_mm);
    REQUIRE(r.objects.size() == s.objects.size());
    for (std::size_t i = 0; i < s.objects.size(); ++i)
    {
        CHECK(r.objects[i].signature == s.objects[i].signature);
        CHECK(r.objects[i].z_order == s.objects[i].z_order);
        REQUIRE(r.objects[i].shape.vertices.size() == s.objects[i].shape.vertices.size());
        for (std::size_t v = 0; v < s.objects[i].shape.vertices.size(); ++v)
        {
            CHECK(r.objects[i].shape.vertices[v].x_mm == s.objects[i].shape.vertices[v].x_mm);
            CHECK(r.objects[i].shape.vertices[v].y_mm == s.objects[i].shape.vertices[v].y_mm);
        }
    }
    REQUIRE(r.signatures.size() == s.signatures.size());
    CHECK(r.signatures[2].reflectance == s.signatures[2].reflectance);
    CHECK(r.background.reflectance == s.background.reflectance);

    const fs::path sig = dir / "wool.txt";
    write_signature(sig, s.signatures[1]);
    const SpectralSignature w = read_signature(sig, "wool");
    CHECK(w.class_name == "wool");
    CHECK(w.reflectance == s.signatures[1].reflectance);
    CHECK(w.band_centers_nm == s.signatures[1].band_centers_nm);

    write_text(dir / "bad.json", "{\"plane\": {}, \"surprise\": 1}");
    CHECK_THROWS_AS((void)read_scene(dir / "bad.json"), FormatError);
}

TEST_CASE("ppm header and payload size")
{
    const auto dir = testing::scratch_dir("io_ppm");
    RgbImage img{3, 4, std::vector<float>(36, 0.5f)};
    img.pixel(0, 0)[0] = 2.0f;
    write_ppm(dir / "x.ppm", img);
    const auto b = file_bytes(dir / "x.ppm");
    const std::string head(b.begin(), b.begin() + 11);
    CHECK(head == "P6\n4 3\n255\n");
    CHECK(b.size() == 11 + 36);
    CHECK(static_cast<unsigned char>(b[11]) == 255);
}
