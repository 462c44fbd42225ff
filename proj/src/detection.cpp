#include "prism/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace prism
{

std::size_t SegmentationMask::area() const noexcept
{
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

std::vector<std::size_t> SegmentationMask::pixels() const
{
    std::vector<std::size_t> out;
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
            if (bits[std::size_t(r) * width + c])
                out.push_back(std::size_t(r + row0) * image_cols + std::size_t(c + col0));
    return out;
}

SegmentationMask SegmentationMask::from_bitmap(int instance_id, int rows, int cols,
                                               std::span<const std::uint8_t> bitmap)
{
    if (bitmap.size() != std::size_t(rows) * cols)
        throw std::invalid_argument("SegmentationMask: bitmap size does not match dimensions");
    int r0 = rows, r1 = -1, c0 = cols, c1 = -1;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (bitmap[std::size_t(r) * cols + c])
            {
                r0 = std::min(r0, r);
                r1 = std::max(r1, r);
                c0 = std::min(c0, c);
                c1 = std::max(c1, c);
            }
    SegmentationMask m;
    m.instance_id = instance_id;
    m.image_rows = rows;
    m.image_cols = cols;
    if (r1 < 0)
        return m;
    m.row0 = r0;
    m.col0 = c0;
    m.height = r1 - r0 + 1;
    m.width = c1 - c0 + 1;
    m.bits.assign(std::size_t(m.height) * m.width, 0);
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c)
            m.bits[std::size_t(r - r0) * m.width + (c - c0)] = bitmap[std::size_t(r) * cols + c] ? 1 : 0;
    return m;
}

std::vector<std::uint8_t> union_mask(std::span<const SegmentationMask> masks, int rows, int cols)
{
    std::vector<std::uint8_t> out(std::size_t(rows) * cols, 0);
    for (const auto& m : masks)
        for (std::size_t i : m.pixels())
            if (i < out.size())
                out[i] = 1;
    return out;
}

// ---------------------------------------------------------------------------
// Segmentation

double spectral_angle(const float* a, const double* b, int bands) noexcept
{
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (int k = 0; k < bands; ++k)
    {
        ab += a[k] * b[k];
        aa += double(a[k]) * a[k];
        bb += b[k] * b[k];
    }
    if (aa <= 0.0 || bb <= 0.0)
        return kPi / 2.0;
    return std::acos(std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0));
}

std::vector<std::uint8_t> foreground_map(const HyperspectralCube& cube, const SpectralSignature& background,
                                         double threshold_rad, Execution exec)
{
    if (background.bands() != std::size_t(cube.bands()))
        throw std::invalid_argument("foreground_map: background has " + std::to_string(background.bands()) +
                                    " bands, cube has " + std::to_string(cube.bands()));
    std::vector<std::uint8_t> fg(cube.pixel_count(), 0);
    const double* bg = background.reflectance.data();
    const auto row = [&](int r) {
        for (int c = 0; c < cube.cols(); ++c)
            if (cube.is_valid(r, c) && spectral_angle(cube.spectrum(r, c), bg, cube.bands()) > threshold_rad)
                fg[std::size_t(r) * cube.cols() + c] = 1;
    };
    if (exec == Execution::parallel)
    {
#pragma omp parallel for schedule(static)
        for (int r = 0; r < cube.rows(); ++r)
            row(r);
    }
    else
    {
        for (int r = 0; r < cube.rows(); ++r)
            row(r);
    }
    return fg;
}

std::vector<SegmentationMask> connected_components(std::span<const std::uint8_t> binary, int rows, int cols,
                                                   int min_area)
{
    if (binary.size() != std::size_t(rows) * cols)
        throw std::invalid_argument("connected_components: map size does not match dimensions");
    std::vector<int> comp(binary.size(), 0);
    std::vector<SegmentationMask> out;
    std::vector<std::size_t> stack, members;
    int next_label = 0;
    for (std::size_t seed = 0; seed < binary.size(); ++seed)
    {
        if (!binary[seed] || comp[seed])
            continue;
        const int label = ++next_label;
        members.clear();
        stack.assign(1, seed);
        comp[seed] = label;
        int r0 = rows, r1 = -1, c0 = cols, c1 = -1;
        while (!stack.empty())
        {
            const std::size_t i = stack.back();
            stack.pop_back();
            members.push_back(i);
            const int r = static_cast<int>(i / cols), c = static_cast<int>(i % cols);
            r0 = std::min(r0, r);
            r1 = std::max(r1, r);
            c0 = std::min(c0, c);
            c1 = std::max(c1, c);
            const auto visit = [&](int rr, int cc) {
                if (rr < 0 || cc < 0 || rr >= rows || cc >= cols)
                    return;
                const std::size_t j = std::size_t(rr) * cols + cc;
                if (binary[j] && !comp[j])
                {
                    comp[j] = label;
                    stack.push_back(j);
                }
            };
            visit(r - 1, c);
            visit(r + 1, c);
            visit(r, c - 1);
            visit(r, c + 1);
        }
        if (static_cast<int>(members.size()) < min_area)
            continue;
        SegmentationMask m;
        m.instance_id = static_cast<int>(out.size()) + 1;
        m.image_rows = rows;
        m.image_cols = cols;
        m.row0 = r0;
        m.col0 = c0;
        m.height = r1 - r0 + 1;
        m.width = c1 - c0 + 1;
        m.bits.assign(std::size_t(m.height) * m.width, 0);
        for (std::size_t i : members)
            m.bits[(i / cols - r0) * m.width + (i % cols - c0)] = 1;
        out.push_back(std::move(m));
    }
    return out;
}

SpectralAngleSegmenter::SpectralAngleSegmenter(SpectralSignature background, SegmenterSettings settings,
                                               Execution exec)
    : background_(std::move(background)), settings_(settings), exec_(exec)
{
    if (!(settings_.angle_threshold_rad > 0.0) || settings_.min_area < 1)
        throw std::invalid_argument("SpectralAngleSegmenter: threshold must be > 0 and min area >= 1");
}

std::vector<SegmentationMask> SpectralAngleSegmenter::segment(const HyperspectralCube& cube) const
{
    const auto fg = foreground_map(cube, background_, settings_.angle_threshold_rad, exec_);
    return connected_components(fg, cube.rows(), cube.cols(), settings_.min_area);
}

std::vector<SegmentationMask> segment_objects(const HyperspectralCube& cube, const SpectralSignature& background,
                                              const SegmenterSettings& settings, Execution exec)
{
    return SpectralAngleSegmenter(background, settings, exec).segment(cube);
}

// ---------------------------------------------------------------------------
// Aggregation

Vote vote_object_label(std::span<const int> labels, std::span<const float> confidence,
                       const Eigen::MatrixXd& features, int class_count, const AggregationSettings& settings)
{
    const auto n = static_cast<Eigen::Index>(labels.size());
    if (!confidence.empty() && confidence.size() != labels.size())
        throw std::invalid_argument("vote_object_label: confidence count does not match label count");
    if (features.rows() != 0 && features.rows() != n)
        throw std::invalid_argument("vote_object_label: feature rows do not match label count");
    Vote vote;
    if (n < settings.min_votable_pixels)
        return vote;

    std::vector<std::uint8_t> keep(std::size_t(n), 1);
    const Eigen::Index p = std::min<Eigen::Index>(settings.pca_components, features.cols());
    if (features.rows() == n && n > p && p >= 1)
    {
        const Eigen::MatrixXd centered = features.rowwise() - features.colwise().mean();
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(centered.transpose() * centered);
        const Eigen::MatrixXd basis = eig.eigenvectors().rightCols(p);
        const Eigen::MatrixXd residual = centered - (centered * basis) * basis.transpose();
        const Eigen::VectorXd err = residual.rowwise().squaredNorm();
        std::vector<double> sorted(err.data(), err.data() + n);
        std::sort(sorted.begin(), sorted.end());
        const auto rank = static_cast<std::size_t>(std::ceil(settings.outlier_percentile * double(n)));
        const double threshold = sorted[std::clamp<std::size_t>(rank, 1, std::size_t(n)) - 1];
        for (Eigen::Index i = 0; i < n; ++i)
            keep[std::size_t(i)] = err(i) <= threshold ? 1 : 0;
    }

    std::vector<int> count(std::size_t(class_count), 0);
    std::vector<double> conf(std::size_t(class_count), 0.0);
    int total = 0;
    for (Eigen::Index i = 0; i < n; ++i)
    {
        const int l = labels[std::size_t(i)] - 1;
        if (!keep[std::size_t(i)] || l < 0 || l >= class_count)
            continue;
        ++count[std::size_t(l)];
        conf[std::size_t(l)] += confidence.empty() ? 1.0 : confidence[std::size_t(i)];
        ++total;
    }
    vote.kept = total;
    if (total == 0)
        return vote;
    int best = 0;
    for (int c = 1; c < class_count; ++c)
    {
        const auto cu = std::size_t(c), bu = std::size_t(best);
        if (count[cu] > count[bu] || (count[cu] == count[bu] && conf[cu] > conf[bu]))
            best = c;
    }
    vote.label = best;
    vote.purity = double(count[std::size_t(best)]) / total;
    return vote;
}

namespace
{
// Squared distance transform of a sampled function along one line.
void dt_line(const double* f, int n, double* d, int* v, double* z)
{
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q)
    {
        const auto cross = [&](int p) { return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p); };
        double s = cross(v[k]);
        while (s <= z[k])
            s = cross(v[--k]);
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q)
    {
        while (z[k + 1] < q)
            ++k;
        d[q] = double(q - v[k]) * (q - v[k]) + f[v[k]];
    }
}
}  // namespace

std::vector<double> distance_transform(std::span<const std::uint8_t> bits, int rows, int cols)
{
    if (bits.size() != std::size_t(rows) * cols)
        throw std::invalid_argument("distance_transform: size does not match dimensions");
    // Pad by one zero pixel on every side so the border acts as background.
    const int pr = rows + 2, pc = cols + 2;
    constexpr double big = 1e20;
    std::vector<double> g(std::size_t(pr) * pc, 0.0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            g[std::size_t(r + 1) * pc + (c + 1)] = bits[std::size_t(r) * cols + c] ? big : 0.0;

    const int m = std::max(pr, pc);
    const auto mu = static_cast<std::size_t>(m);
    std::vector<double> f(mu), d(mu), z(mu + 1);
    std::vector<int> v(mu);
    for (int c = 0; c < pc; ++c)
    {
        for (int r = 0; r < pr; ++r)
            f[std::size_t(r)] = g[std::size_t(r) * pc + c];
        dt_line(f.data(), pr, d.data(), v.data(), z.data());
        for (int r = 0; r < pr; ++r)
            g[std::size_t(r) * pc + c] = d[std::size_t(r)];
    }
    for (int r = 0; r < pr; ++r)
    {
        dt_line(g.data() + std::size_t(r) * pc, pc, d.data(), v.data(), z.data());
        std::copy_n(d.begin(), pc, g.begin() + std::ptrdiff_t(r) * pc);
    }
    std::vector<double> out(bits.size());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            out[std::size_t(r) * cols + c] = std::sqrt(g[std::size_t(r + 1) * pc + (c + 1)]);
    return out;
}

std::vector<SuctionPoint> suction_points(const SegmentationMask& mask, double pitch_mm, const SuctionSettings& settings)
{
    if (settings.count < 1)
        throw std::invalid_argument("suction_points: count must be >= 1");
    if (!(pitch_mm > 0.0))
        throw std::invalid_argument("suction_points: pitch must be > 0");
    const int h = mask.height, w = mask.width;
    const auto at = [&](int r, int c) {
        return r >= 0 && c >= 0 && r < h && c < w && mask.bits[std::size_t(r) * w + c] != 0;
    };
    double sr = 0.0, sc = 0.0;
    std::size_t n = 0;
    std::vector<std::pair<int, int>> interior, members;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (at(r, c))
            {
                sr += r;
                sc += c;
                ++n;
                members.emplace_back(r, c);
                if (at(r - 1, c) && at(r + 1, c) && at(r, c - 1) && at(r, c + 1))
                    interior.emplace_back(r, c);
            }
    if (n == 0)
        throw std::invalid_argument("suction_points: mask is empty");
    const double cr = sr / double(n), cc = sc / double(n);
    const auto dt = distance_transform(mask.bits, h, w);
    const auto& pool = interior.empty() ? members : interior;

    std::vector<SuctionPoint> out;
    const int rr = static_cast<int>(std::lround(cr)), rc = static_cast<int>(std::lround(cc));
    if (!interior.empty() && at(rr, rc) && at(rr - 1, rc) && at(rr + 1, rc) && at(rr, rc - 1) && at(rr, rc + 1))
    {
        out.push_back({cc + mask.col0, cr + mask.row0, dt[std::size_t(rr) * w + rc] * pitch_mm});
    }
    else
    {
        std::size_t best = 0;
        double best_d = INFINITY;
        for (std::size_t i = 0; i < pool.size(); ++i)
        {
            const double d = std::hypot(pool[i].first - cr, pool[i].second - cc);
            if (d < best_d)
            {
                best_d = d;
                best = i;
            }
        }
        const auto [br, bc] = pool[best];
        out.push_back({double(bc + mask.col0), double(br + mask.row0), dt[std::size_t(br) * w + bc] * pitch_mm});
    }

    if (settings.count > 1)
    {
        std::vector<std::size_t> order(pool.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return dt[std::size_t(pool[a].first) * w + pool[a].second] >
                   dt[std::size_t(pool[b].first) * w + pool[b].second];
        });
        const double sep = settings.cup_radius_mm / pitch_mm;
        for (std::size_t i : order)
        {
            if (static_cast<int>(out.size()) >= settings.count)
                break;
            const double pr = pool[i].first + mask.row0, pc = pool[i].second + mask.col0;
            const bool far = std::all_of(out.begin(), out.end(), [&](const SuctionPoint& s) {
                return std::hypot(s.row - pr, s.col - pc) >= sep;
            });
            if (far)
                out.push_back({pc, pr, dt[std::size_t(pool[i].first) * w + pool[i].second] * pitch_mm});
        }
    }
    return out;
}

std::vector<DetectedObject> aggregate_objects(const PixelLabelMap& labels, std::span<const SegmentationMask> masks,
                                              const HyperspectralCube& cube, const MnfModel& mnf,
                                              const AggregationSettings& aggregation, const SuctionSettings& suction,
                                              Execution exec)
{
    if (labels.rows != cube.rows() || labels.cols != cube.cols())
        throw std::invalid_argument("aggregate_objects: label map and cube dimensions differ");
    if (mnf.bands() != cube.bands())
        throw std::invalid_argument("aggregate_objects: MNF model band count differs from the cube");
    for (const auto& m : masks)
        if (m.image_rows != cube.rows() || m.image_cols != cube.cols())
            throw std::invalid_argument("aggregate_objects: mask dimensions differ from the cube");
    const double pitch = cube.grid ? cube.grid->pitch_mm : cube.geom.line_resolution_dx_mm;

    std::vector<DetectedObject> out(masks.size());
    const auto run = [&](int mi) {
        const SegmentationMask& m = masks[std::size_t(mi)];
        const auto px = m.pixels();
        DetectedObject obj;
        obj.instance_id = m.instance_id;
        obj.pixel_count = static_cast<int>(px.size());
        obj.bbox = {m.row0, m.col0, m.row0 + m.height - 1, m.col0 + m.width - 1};
        std::vector<int> lab(px.size());
        std::vector<float> conf(px.size());
        Eigen::MatrixXd spectra(Eigen::Index(px.size()), cube.bands());
        double sr = 0.0, sc = 0.0;
        for (std::size_t i = 0; i < px.size(); ++i)
        {
            lab[i] = labels.labels[px[i]];
            conf[i] = labels.confidence[px[i]];
            const float* s = cube.data().data() + px[i] * std::size_t(cube.bands());
            for (int b = 0; b < cube.bands(); ++b)
                spectra(Eigen::Index(i), b) = s[b];
            sr += double(px[i] / std::size_t(cube.cols()));
            sc += double(px[i] % std::size_t(cube.cols()));
        }
        if (!px.empty())
        {
            obj.centroid_row = sr / double(px.size());
            obj.centroid_col = sc / double(px.size());
            obj.suction_points = suction_points(m, pitch, suction);
        }
        const Eigen::MatrixXd reduced = px.empty() ? Eigen::MatrixXd() : mnf_transform(mnf, spectra);
        const Vote v = vote_object_label(lab, conf, reduced, labels.class_count, aggregation);
        obj.class_label = v.label;
        obj.purity = v.purity;
        obj.votes_kept = v.kept;
        out[std::size_t(mi)] = std::move(obj);
    };
    const int count = static_cast<int>(masks.size());
    if (exec == Execution::parallel)
    {
#pragma omp parallel for schedule(dynamic)
        for (int mi = 0; mi < count; ++mi)
            run(mi);
    }
    else
    {
        for (int mi = 0; mi < count; ++mi)
            run(mi);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Overlay

std::array<float, 3> class_color(int class_label) noexcept
{
    static constexpr std::array<std::array<float, 3>, 8> palette{{{0.90f, 0.10f, 0.10f},
                                                                  {0.10f, 0.75f, 0.15f},
                                                                  {0.15f, 0.35f, 0.95f},
                                                                  {0.95f, 0.75f, 0.05f},
                                                                  {0.80f, 0.20f, 0.80f},
                                                                  {0.05f, 0.80f, 0.80f},
                                                                  {0.95f, 0.50f, 0.10f},
                                                                  {0.50f, 0.30f, 0.10f}}};
    if (class_label < 0)
        return {0.5f, 0.5f, 0.5f};
    return palette[std::size_t(class_label) % palette.size()];
}

void draw_detections(RgbImage& image, std::span<const DetectedObject> objects)
{
    const auto put = [&](int r, int c, std::array<float, 3> col) {
        if (r < 0 || c < 0 || r >= image.rows || c >= image.cols)
            return;
        float* p = image.pixel(r, c);
        p[0] = col[0];
        p[1] = col[1];
        p[2] = col[2];
    };
    for (const auto& o : objects)
    {
        const auto col = class_color(o.class_label);
        for (int c = o.bbox.col0; c <= o.bbox.col1; ++c)
        {
            put(o.bbox.row0, c, col);
            put(o.bbox.row1, c, col);
        }
        for (int r = o.bbox.row0; r <= o.bbox.row1; ++r)
        {
            put(r, o.bbox.col0, col);
            put(r, o.bbox.col1, col);
        }
        for (std::size_t i = 0; i < o.suction_points.size(); ++i)
        {
            const auto& s = o.suction_points[i];
            const int r = static_cast<int>(std::lround(s.row)), c = static_cast<int>(std::lround(s.col));
            const std::array<float, 3> mark = i == 0 ? std::array<float, 3>{1.0f, 1.0f, 1.0f}
                                                     : std::array<float, 3>{0.0f, 0.0f, 0.0f};
            for (int d = -3; d <= 3; ++d)
            {
                put(r + d, c, mark);
                put(r, c + d, mark);
            }
        }
    }
}

}  // namespace prism
