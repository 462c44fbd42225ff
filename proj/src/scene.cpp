#include "prism/scene.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace prism
{

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept
{
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void SpectralSignature::validate() const
{
    if (reflectance.size() < 2)
        throw std::invalid_argument("signature '" + class_name + "': needs at least 2 bands");
    if (band_centers_nm.size() != reflectance.size())
        throw std::invalid_argument("signature '" + class_name + "': band count mismatch");
    for (double r : reflectance)
        if (!(r >= 0.0 && r <= 1.0))
            throw std::invalid_argument("signature '" + class_name + "': reflectance outside [0, 1]");
    for (std::size_t i = 1; i < band_centers_nm.size(); ++i)
        if (!(band_centers_nm[i] > band_centers_nm[i - 1]))
            throw std::invalid_argument("signature '" + class_name + "': band centres not strictly increasing");
}

SpectralSignature resample(const SpectralSignature& sig, const std::vector<double>& centers)
{
    sig.validate();
    SpectralSignature out{sig.class_name, {}, centers};
    out.reflectance.reserve(centers.size());
    const auto& x = sig.band_centers_nm;
    for (double c : centers)
    {
        if (c <= x.front())
        {
            out.reflectance.push_back(sig.reflectance.front());
            continue;
        }
        if (c >= x.back())
        {
            out.reflectance.push_back(sig.reflectance.back());
            continue;
        }
        const auto hi = std::upper_bound(x.begin(), x.end(), c);
        const std::size_t j = static_cast<std::size_t>(hi - x.begin());
        const double t = (c - x[j - 1]) / (x[j] - x[j - 1]);
        out.reflectance.push_back(sig.reflectance[j - 1] + t * (sig.reflectance[j] - sig.reflectance[j - 1]));
    }
    return out;
}

std::vector<double> linear_band_centers(int bands, double first_nm, double last_nm)
{
    if (bands < 2)
        throw std::invalid_argument("linear_band_centers: need at least 2 bands");
    std::vector<double> c(static_cast<std::size_t>(bands));
    for (int i = 0; i < bands; ++i)
        c[static_cast<std::size_t>(i)] = first_nm + (last_nm - first_nm) * i / (bands - 1);
    return c;
}

namespace
{
struct Bump
{
    double center_nm, width_nm, amplitude;
};

SpectralSignature bump_curve(std::string name, double base, std::initializer_list<Bump> bumps,
                             const std::vector<double>& centers)
{
    SpectralSignature s{std::move(name), {}, centers};
    for (double wl : centers)
    {
        double r = base;
        for (const auto& b : bumps)
        {
            const double d = (wl - b.center_nm) / b.width_nm;
            r += b.amplitude * std::exp(-0.5 * d * d);
        }
        s.reflectance.push_back(std::clamp(r, 0.0, 1.0));
    }
    return s;
}
}  // namespace

std::vector<SpectralSignature> default_textile_signatures(const std::vector<double>& c)
{
    return {
        bump_curve("linen", 0.10, {{860, 70, 0.32}, {560, 50, 0.08}}, c),
        bump_curve("silk", 0.08, {{700, 45, 0.34}, {950, 40, 0.10}}, c),
        bump_curve("wool", 0.12, {{960, 60, 0.26}, {620, 35, 0.14}}, c),
        bump_curve("acetate", 0.07, {{780, 35, 0.36}, {470, 30, 0.09}}, c),
    };
}

SpectralSignature default_background(const std::vector<double>& centers)
{
    SpectralSignature s{"background", {}, centers};
    for (double wl : centers)
        s.reflectance.push_back(0.62 + 0.06 * (wl - 700.0) / 300.0);
    return s;
}

// ---------------------------------------------------------------------------
// Polygons

bool Polygon::contains(MetricPoint p) const noexcept
{
    bool inside = false;
    const std::size_t n = vertices.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++)
    {
        const auto& a = vertices[i];
        const auto& b = vertices[j];
        if ((a.y_mm > p.y_mm) != (b.y_mm > p.y_mm))
        {
            const double x = a.x_mm + (p.y_mm - a.y_mm) * (b.x_mm - a.x_mm) / (b.y_mm - a.y_mm);
            if (p.x_mm < x)
                inside = !inside;
        }
    }
    return inside;
}

double Polygon::area() const noexcept
{
    double s = 0.0;
    const std::size_t n = vertices.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++)
        s += vertices[j].x_mm * vertices[i].y_mm - vertices[i].x_mm * vertices[j].y_mm;
    return std::abs(s) / 2.0;
}

MetricPoint Polygon::centroid() const noexcept
{
    double cx = 0.0, cy = 0.0, a2 = 0.0;
    const std::size_t n = vertices.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++)
    {
        const double cross = vertices[j].x_mm * vertices[i].y_mm - vertices[i].x_mm * vertices[j].y_mm;
        a2 += cross;
        cx += (vertices[j].x_mm + vertices[i].x_mm) * cross;
        cy += (vertices[j].y_mm + vertices[i].y_mm) * cross;
    }
    return {cx / (3.0 * a2), cy / (3.0 * a2)};
}

void Polygon::bounds(double& min_x, double& min_y, double& max_x, double& max_y) const noexcept
{
    min_x = min_y = INFINITY;
    max_x = max_y = -INFINITY;
    for (const auto& v : vertices)
    {
        min_x = std::min(min_x, v.x_mm);
        max_x = std::max(max_x, v.x_mm);
        min_y = std::min(min_y, v.y_mm);
        max_y = std::max(max_y, v.y_mm);
    }
}

Polygon make_rectangle(double cx, double cy, double width, double height, double angle_rad)
{
    const double c = std::cos(angle_rad), s = std::sin(angle_rad);
    const double hw = width / 2.0, hh = height / 2.0;
    Polygon p;
    for (auto [dx, dy] : {std::pair{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}})
        p.vertices.push_back({cx + c * dx - s * dy, cy + s * dx + c * dy});
    return p;
}

namespace
{
// Separating-axis test for convex polygons.
bool separated_on_axes_of(const Polygon& a, const Polygon& b) noexcept
{
    const std::size_t n = a.vertices.size();
    for (std::size_t i = 0; i < n; ++i)
    {
        const auto& p = a.vertices[i];
        const auto& q = a.vertices[(i + 1) % n];
        const double ax = -(q.y_mm - p.y_mm), ay = q.x_mm - p.x_mm;
        double amin = INFINITY, amax = -INFINITY, bmin = INFINITY, bmax = -INFINITY;
        for (const auto& v : a.vertices)
        {
            const double d = v.x_mm * ax + v.y_mm * ay;
            amin = std::min(amin, d);
            amax = std::max(amax, d);
        }
        for (const auto& v : b.vertices)
        {
            const double d = v.x_mm * ax + v.y_mm * ay;
            bmin = std::min(bmin, d);
            bmax = std::max(bmax, d);
        }
        if (amax < bmin || bmax < amin)
            return true;
    }
    return false;
}

double point_segment_distance(MetricPoint p, MetricPoint a, MetricPoint b) noexcept
{
    const double dx = b.x_mm - a.x_mm, dy = b.y_mm - a.y_mm;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p.x_mm - a.x_mm) * dx + (p.y_mm - a.y_mm) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x_mm - (a.x_mm + t * dx), p.y_mm - (a.y_mm + t * dy));
}
}  // namespace

bool polygons_intersect(const Polygon& a, const Polygon& b) noexcept
{
    return !separated_on_axes_of(a, b) && !separated_on_axes_of(b, a);
}

double polygon_distance(const Polygon& a, const Polygon& b) noexcept
{
    if (polygons_intersect(a, b))
        return 0.0;
    double d = INFINITY;
    for (int pass = 0; pass < 2; ++pass)
    {
        const Polygon& from = pass == 0 ? a : b;
        const Polygon& to = pass == 0 ? b : a;
        const std::size_t n = to.vertices.size();
        for (const auto& v : from.vertices)
            for (std::size_t i = 0; i < n; ++i)
                d = std::min(d, point_segment_distance(v, to.vertices[i], to.vertices[(i + 1) % n]));
    }
    return d;
}

// ---------------------------------------------------------------------------
// Scenes

int SceneDescription::top_object_at(MetricPoint p) const noexcept
{
    int best = -1;
    int best_z = 0;
    for (std::size_t i = 0; i < objects.size(); ++i)
    {
        const auto& o = objects[i];
        if ((best < 0 || o.z_order >= best_z) && o.shape.contains(p))
        {
            best = static_cast<int>(i);
            best_z = o.z_order;
        }
    }
    return best;
}

void SceneDescription::validate() const
{
    if (!(plane_width_mm > 0.0 && plane_height_mm > 0.0))
        throw std::invalid_argument("scene: plane size must be positive");
    background.validate();
    for (const auto& s : signatures)
    {
        s.validate();
        if (s.band_centers_nm != background.band_centers_nm)
            throw std::invalid_argument("scene: signature '" + s.class_name + "' bands differ from background");
    }
    if (noise_sigma < 0.0)
        throw std::invalid_argument("scene: noise sigma must be >= 0");
    const double hx = plane_width_mm / 2.0 + 1e-9, hy = plane_height_mm / 2.0 + 1e-9;
    for (const auto& o : objects)
    {
        if (o.signature < 0 || o.signature >= static_cast<int>(signatures.size()))
            throw std::invalid_argument("scene: object references unknown signature");
        if (o.shape.vertices.size() < 3)
            throw std::invalid_argument("scene: object polygon needs at least 3 vertices");
        for (const auto& v : o.shape.vertices)
            if (std::abs(v.x_mm) > hx || std::abs(v.y_mm) > hy)
                throw std::invalid_argument("scene: object polygon leaves the plane");
    }
}

SceneDescription generate_scene(SceneKind kind, const std::vector<SpectralSignature>& class_set,
                                const SpectralSignature& background, int count, std::uint64_t seed,
                                const SceneLayout& layout)
{
    if (count < 1)
        throw std::invalid_argument("generate_scene: count must be >= 1");
    if (class_set.empty())
        throw std::invalid_argument("generate_scene: class set is empty");
    if (!(layout.object_size_min_mm > 0.0 && layout.object_size_max_mm >= layout.object_size_min_mm))
        throw std::invalid_argument("generate_scene: invalid object size range");

    SceneDescription scene;
    scene.plane_width_mm = layout.plane_width_mm;
    scene.plane_height_mm = layout.plane_height_mm;
    scene.background = background;
    scene.signatures = class_set;
    scene.noise_sigma = layout.noise_sigma;
    scene.seed = seed;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    const int classes = static_cast<int>(class_set.size());

    if (kind == SceneKind::discrete)
    {
        // Jittered grid: each object stays inside its own cell shrunk by half the gap on
        // every side, which keeps any two objects at least min_gap apart.
        const double rot = layout.max_rotation_deg * kPi / 180.0;
        const double extent = layout.object_size_max_mm * (std::cos(rot) + std::sin(rot));
        const double cell = extent + layout.min_gap_mm;
        const int ncols = static_cast<int>(layout.plane_width_mm / cell);
        const int nrows = static_cast<int>(layout.plane_height_mm / cell);
        if (ncols * nrows < count)
            throw std::runtime_error("generate_scene: plane too small for " + std::to_string(count) +
                                     " separated objects (room for " + std::to_string(std::max(0, ncols * nrows)) +
                                     ")");
        std::vector<int> cells(static_cast<std::size_t>(ncols * nrows));
        std::iota(cells.begin(), cells.end(), 0);
        std::shuffle(cells.begin(), cells.end(), rng);
        const double gx0 = -ncols * cell / 2.0, gy0 = -nrows * cell / 2.0;
        for (int i = 0; i < count; ++i)
        {
            const int c = cells[static_cast<std::size_t>(i)];
            const double size = uniform(layout.object_size_min_mm, layout.object_size_max_mm);
            const double angle = uniform(-rot, rot);
            const double e = size * (std::abs(std::cos(angle)) + std::abs(std::sin(angle)));
            const double slack = std::max(0.0, cell - layout.min_gap_mm - e);
            const double cx = gx0 + (c % ncols + 0.5) * cell + uniform(-slack / 2.0, slack / 2.0);
            const double cy = gy0 + (c / ncols + 0.5) * cell + uniform(-slack / 2.0, slack / 2.0);
            scene.objects.push_back({make_rectangle(cx, cy, size, size, angle), i % classes, i});
        }
    }
    else
    {
        const double mean_size = (layout.object_size_min_mm + layout.object_size_max_mm) / 2.0;
        const double pile_area = count * mean_size * mean_size / layout.clutter_coverage;
        const double aspect = layout.plane_width_mm / layout.plane_height_mm;
        const double pile_w = std::min(layout.plane_width_mm, std::sqrt(pile_area * aspect));
        const double pile_h = std::min(layout.plane_height_mm, pile_area / pile_w);
        for (int i = 0; i < count; ++i)
        {
            const double size = uniform(layout.object_size_min_mm, layout.object_size_max_mm);
            const double angle = uniform(0.0, kPi / 2.0);
            const double r = size / std::sqrt(2.0);
            const double hx = std::max(0.0, std::min(pile_w / 2.0, layout.plane_width_mm / 2.0 - r));
            const double hy = std::max(0.0, std::min(pile_h / 2.0, layout.plane_height_mm / 2.0 - r));
            const double cx = uniform(-hx, hx);
            const double cy = uniform(-hy, hy);
            scene.objects.push_back({make_rectangle(cx, cy, size, size, angle), i % classes, i});
        }
    }
    scene.validate();
    return scene;
}

// ---------------------------------------------------------------------------
// Rendering

namespace
{
struct ObjectBounds
{
    double min_x, min_y, max_x, max_y;
};

std::vector<ObjectBounds> object_bounds(const SceneDescription& scene)
{
    std::vector<ObjectBounds> b(scene.objects.size());
    for (std::size_t i = 0; i < b.size(); ++i)
        scene.objects[i].shape.bounds(b[i].min_x, b[i].min_y, b[i].max_x, b[i].max_y);
    return b;
}

// Objects touching the horizontal line y, ordered top-most first.
std::vector<int> objects_on_line(const SceneDescription& scene, const std::vector<ObjectBounds>& bounds, double y)
{
    std::vector<int> idx;
    for (std::size_t i = 0; i < bounds.size(); ++i)
        if (y >= bounds[i].min_y && y <= bounds[i].max_y)
            idx.push_back(static_cast<int>(i));
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        const int za = scene.objects[static_cast<std::size_t>(a)].z_order;
        const int zb = scene.objects[static_cast<std::size_t>(b)].z_order;
        return za != zb ? za > zb : a > b;
    });
    return idx;
}

int top_on_line(const SceneDescription& scene, const std::vector<int>& candidates,
                const std::vector<ObjectBounds>& bounds, MetricPoint p) noexcept
{
    for (int i : candidates)
    {
        const auto& b = bounds[static_cast<std::size_t>(i)];
        if (p.x_mm < b.min_x || p.x_mm > b.max_x)
            continue;
        if (scene.objects[static_cast<std::size_t>(i)].shape.contains(p))
            return i;
    }
    return -1;
}

FramePacket render_frame_impl(const SceneDescription& scene, const std::vector<ObjectBounds>& bounds,
                              MotorAngle theta, const GeometryContext& geom)
{
    const int bands = static_cast<int>(scene.bands());
    FramePacket f;
    f.theta = theta;
    f.cols = geom.cols;
    f.bands = bands;
    f.samples.resize(std::size_t(geom.cols) * bands);

    const double y = geom.working_height_mm * std::tan(gamma_of_theta(theta).gamma);
    const double pitch = geom.line_resolution_dx_mm * scaling_factor_k(theta);
    const auto candidates = objects_on_line(scene, bounds, y);

    std::mt19937_64 rng(mix_seed(scene.seed, std::bit_cast<std::uint64_t>(theta.theta)));
    std::normal_distribution<double> noise(0.0, scene.noise_sigma > 0.0 ? scene.noise_sigma : 1.0);
    for (int u = 0; u < geom.cols; ++u)
    {
        const MetricPoint p{(u - geom.center_col()) * pitch, y};
        const int obj = top_on_line(scene, candidates, bounds, p);
        const auto& refl =
            obj < 0 ? scene.background.reflectance
                    : scene.signatures[static_cast<std::size_t>(scene.objects[static_cast<std::size_t>(obj)].signature)]
                          .reflectance;
        float* out = f.samples.data() + std::size_t(u) * bands;
        if (scene.noise_sigma > 0.0)
            for (int b = 0; b < bands; ++b)
                out[b] = static_cast<float>(std::clamp(refl[static_cast<std::size_t>(b)] + noise(rng), 0.0, 1.0));
        else
            for (int b = 0; b < bands; ++b)
                out[b] = static_cast<float>(refl[static_cast<std::size_t>(b)]);
    }
    return f;
}
}  // namespace

FramePacket render_frame(const SceneDescription& scene, MotorAngle theta, const GeometryContext& geom)
{
    return render_frame_impl(scene, object_bounds(scene), theta, geom);
}

std::vector<FramePacket> render_scan(const SceneDescription& scene, const PrismConfig& config,
                                     const GeometryContext& geom, Execution exec)
{
    config.validate();
    geom.validate();
    scene.validate();
    const auto bounds = object_bounds(scene);
    const double duration = scan_duration_seconds(config);
    std::vector<FramePacket> frames(static_cast<std::size_t>(geom.rows));
    const auto render_row = [&](int r) {
        const MotorAngle theta = quantize(theta_of_row(r, geom), config);
        auto& f = frames[static_cast<std::size_t>(r)];
        f = render_frame_impl(scene, bounds, theta, geom);
        f.timestamp_s = r * duration / geom.rows;
    };
    if (exec == Execution::parallel)
    {
#pragma omp parallel for schedule(dynamic, 8)
        for (int r = 0; r < geom.rows; ++r)
            render_row(r);
    }
    else
    {
        for (int r = 0; r < geom.rows; ++r)
            render_row(r);
    }
    return frames;
}

std::vector<int> ground_truth_label_map(const SceneDescription& scene, const CorrectedGrid& grid)
{
    const auto bounds = object_bounds(scene);
    std::vector<int> labels(std::size_t(grid.rows) * grid.cols, 0);
#pragma omp parallel for schedule(dynamic, 16)
    for (int r = 0; r < grid.rows; ++r)
    {
        const double y = grid.metric_of(0, r).y_mm;
        const auto candidates = objects_on_line(scene, bounds, y);
        if (candidates.empty())
            continue;
        for (int c = 0; c < grid.cols; ++c)
        {
            const int obj = top_on_line(scene, candidates, bounds, grid.metric_of(c, r));
            if (obj >= 0)
                labels[std::size_t(r) * grid.cols + c] = scene.objects[static_cast<std::size_t>(obj)].signature + 1;
        }
    }
    return labels;
}

}  // namespace prism
