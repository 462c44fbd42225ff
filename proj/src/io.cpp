#include "prism/io.hpp"

#include "json.hpp"
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace prism
{

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace
{
constexpr char kStreamMagic[8] = {'P', 'R', 'S', 'M', 'S', 'T', 'R', 'M'};
constexpr char kModelMagic[8] = {'P', 'R', 'S', 'M', 'M', 'O', 'D', 'L'};

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<char> slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& path, const char* data, std::size_t size)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out.write(data, static_cast<std::streamsize>(size));
    if (!out)
        throw std::runtime_error("write failed for " + path.string());
}

// Little-endian byte sink/source.
class Writer
{
  public:
    template <class T>
    void put(T v)
    {
        static_assert(std::is_trivially_copyable_v<T>);
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                     std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                        std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
        U u;
        std::memcpy(&u, &v, sizeof u);
        for (std::size_t i = 0; i < sizeof u; ++i)
            bytes.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
    }
    void raw(const void* p, std::size_t n) { bytes.insert(bytes.end(), (const char*)p, (const char*)p + n); }
    void doubles(const std::vector<double>& v)
    {
        put<std::uint64_t>(v.size());
        for (double x : v)
            put(x);
    }
    void string(const std::string& s)
    {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    std::vector<char> bytes;
};

class Reader
{
  public:
    Reader(const std::vector<char>& b, std::string what) : bytes_(b), what_(std::move(what)) {}

    template <class T>
    T get()
    {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                     std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                        std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
        need(sizeof(U));
        U u = 0;
        for (std::size_t i = 0; i < sizeof u; ++i)
            u |= U(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += sizeof u;
        T v;
        std::memcpy(&v, &u, sizeof v);
        return v;
    }
    void raw(void* p, std::size_t n)
    {
        need(n);
        std::memcpy(p, bytes_.data() + pos_, n);
        pos_ += n;
    }
    std::vector<double> doubles()
    {
        const auto n = get<std::uint64_t>();
        need(n * 8);
        std::vector<double> v(n);
        for (auto& x : v)
            x = get<double>();
        return v;
    }
    std::string string()
    {
        const auto n = get<std::uint32_t>();
        need(n);
        std::string s(bytes_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    [[nodiscard]] std::size_t pos() const noexcept { return pos_; }

  private:
    void need(std::size_t n) const
    {
        if (pos_ + n > bytes_.size())
            throw FormatError(what_ + ": truncated at byte offset " + std::to_string(bytes_.size()) + " (needed " +
                              std::to_string(pos_ + n) + " bytes)");
    }
    const std::vector<char>& bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

void check_version(std::uint16_t major, const std::string& what)
{
    if (major > kFormatMajor)
        throw FormatError(what + ": format version " + std::to_string(major) + " is newer than supported version " +
                          std::to_string(kFormatMajor));
    if (major == 0)
        throw FormatError(what + ": invalid format version 0");
}

std::string trim(const std::string& s)
{
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a])))
        ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])))
        --b;
    return s.substr(a, b - a);
}

std::string lower(std::string s)
{
    for (auto& c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> split_list(const std::string& value)
{
    std::string v = trim(value);
    if (!v.empty() && v.front() == '{')
        v = v.substr(1, v.size() - 2);
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        item = trim(item);
        if (!item.empty())
            out.push_back(item);
    }
    return out;
}

double to_double(const std::string& s, const std::string& what)
{
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw FormatError(what + ": expected a number, got '" + s + "'");
    return v;
}

long long to_int(const std::string& s, const std::string& what)
{
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw FormatError(what + ": expected an integer, got '" + s + "'");
    return v;
}

std::string join_doubles(const std::vector<double>& v)
{
    std::string out = "{";
    for (std::size_t i = 0; i < v.size(); ++i)
        out += (i ? ", " : "") + format_double(v[i]);
    return out + "}";
}
}  // namespace

std::uint32_t crc32_of(const void* data, std::size_t size) noexcept
{
    uLong crc = crc32(0L, Z_NULL, 0);
    const auto* p = static_cast<const Bytef*>(data);
    while (size > 0)
    {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
        crc = crc32(crc, p, chunk);
        p += chunk;
        size -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

// ---------------------------------------------------------------------------
// ENVI cube

fs::path envi_header_path(const fs::path& data_path)
{
    fs::path h = data_path;
    h.replace_extension(".hdr");
    if (h == data_path)
        h += ".hdr";
    return h;
}

void write_cube(const fs::path& data_path, const HyperspectralCube& cube, Interleave interleave)
{
    const int rows = cube.rows(), cols = cube.cols(), bands = cube.bands();
    std::ostringstream h;
    h << "ENVI\n";
    h << "description = {prism hyperspectral cube}\n";
    h << "samples = " << cols << "\n";
    h << "lines = " << rows << "\n";
    h << "bands = " << bands << "\n";
    h << "header offset = 0\n";
    h << "file type = ENVI Standard\n";
    h << "data type = 4\n";
    h << "interleave = " << (interleave == Interleave::bsq ? "bsq" : "bil") << "\n";
    h << "byte order = 0\n";
    if (!cube.band_centers_nm.empty())
    {
        h << "wavelength units = Nanometers\n";
        h << "wavelength = " << join_doubles(cube.band_centers_nm) << "\n";
    }
    h << "prism format version = " << kFormatMajor << "." << kFormatMinor << "\n";
    h << "prism corrected = " << (cube.corrected ? 1 : 0) << "\n";
    h << "prism geometry = "
      << join_doubles({cube.geom.working_height_mm, cube.geom.line_resolution_dx_mm, double(cube.geom.rows),
                       double(cube.geom.cols)})
      << "\n";
    if (cube.grid)
        h << "prism grid = "
          << join_doubles({cube.grid->pitch_mm, double(cube.grid->cols), double(cube.grid->rows), cube.grid->x0_mm,
                           cube.grid->y0_mm})
          << "\n";
    if (!cube.interpolated_rows.empty())
    {
        std::vector<double> flagged;
        for (std::size_t r = 0; r < cube.interpolated_rows.size(); ++r)
            if (cube.interpolated_rows[r])
                flagged.push_back(double(r));
        h << "prism interpolated rows = " << join_doubles(flagged) << "\n";
    }
    if (!cube.valid.empty())
    {
        // Alternating run lengths, starting with a run of invalid pixels.
        std::vector<double> runs;
        std::uint8_t state = 0;
        std::size_t run = 0;
        for (std::uint8_t v : cube.valid)
        {
            if ((v != 0) != (state != 0))
            {
                runs.push_back(double(run));
                run = 0;
                state = v ? 1 : 0;
            }
            ++run;
        }
        runs.push_back(double(run));
        h << "prism valid runs = " << join_doubles(runs) << "\n";
    }
    write_text(envi_header_path(data_path), h.str());

    std::vector<float> out(std::size_t(rows) * cols * bands);
    const auto src = cube.data();
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            for (int b = 0; b < bands; ++b)
            {
                const std::size_t i = interleave == Interleave::bsq
                                          ? (std::size_t(b) * rows + r) * cols + c
                                          : (std::size_t(r) * bands + b) * cols + c;
                out[i] = src[(std::size_t(r) * cols + c) * bands + b];
            }
    Writer w;
    w.bytes.reserve(out.size() * 4);
    for (float v : out)
        w.put(v);
    spit(data_path, w.bytes.data(), w.bytes.size());
}

HyperspectralCube read_cube(const fs::path& data_path)
{
    const fs::path hp = envi_header_path(data_path);
    const std::string text = read_text(hp);
    const std::string what = "cube header " + hp.string();
    if (text.rfind("ENVI", 0) != 0)
        throw FormatError(what + ": missing ENVI magic");
    std::map<std::string, std::string> kv;
    std::size_t pos = text.find('\n');
    while (pos != std::string::npos && pos < text.size())
    {
        const std::size_t eol = text.find('\n', pos + 1);
        std::string line = text.substr(pos + 1, eol == std::string::npos ? std::string::npos : eol - pos - 1);
        pos = eol;
        const auto eq = line.find('=');
        if (trim(line).empty())
            continue;
        if (eq == std::string::npos)
            throw FormatError(what + ": malformed line '" + line + "'");
        const std::string key = lower(trim(line.substr(0, eq)));
        std::string value = trim(line.substr(eq + 1));
        if (!value.empty() && value.front() == '{')
            while (value.find('}') == std::string::npos && pos != std::string::npos)
            {
                const std::size_t e2 = text.find('\n', pos + 1);
                value += text.substr(pos + 1, e2 == std::string::npos ? std::string::npos : e2 - pos - 1);
                pos = e2;
            }
        kv[key] = value;
    }
    const auto req = [&](const std::string& k) {
        const auto it = kv.find(k);
        if (it == kv.end())
            throw FormatError(what + ": missing key '" + k + "'");
        return it->second;
    };
    if (kv.count("prism format version"))
    {
        const auto v = req("prism format version");
        check_version(static_cast<std::uint16_t>(to_int(v.substr(0, v.find('.')), what)), what);
    }
    if (to_int(req("data type"), what) != 4)
        throw FormatError(what + ": only data type 4 (float32) is supported");
    if (kv.count("byte order") && to_int(kv["byte order"], what) != 0)
        throw FormatError(what + ": only little-endian payloads are supported");
    const int cols = static_cast<int>(to_int(req("samples"), what));
    const int rows = static_cast<int>(to_int(req("lines"), what));
    const int bands = static_cast<int>(to_int(req("bands"), what));
    const long long offset = kv.count("header offset") ? to_int(kv["header offset"], what) : 0;
    const std::string il = lower(req("interleave"));
    if (il != "bsq" && il != "bil")
        throw FormatError(what + ": unsupported interleave '" + il + "'");
    if (rows < 0 || cols < 0 || bands < 0)
        throw FormatError(what + ": negative dimension");

    HyperspectralCube cube(rows, cols, bands);
    if (kv.count("wavelength"))
        for (const auto& s : split_list(kv["wavelength"]))
            cube.band_centers_nm.push_back(to_double(s, what));
    if (kv.count("prism corrected"))
        cube.corrected = to_int(kv["prism corrected"], what) != 0;
    if (kv.count("prism geometry"))
    {
        const auto g = split_list(kv["prism geometry"]);
        if (g.size() != 4)
            throw FormatError(what + ": prism geometry needs 4 values");
        cube.geom.working_height_mm = to_double(g[0], what);
        cube.geom.line_resolution_dx_mm = to_double(g[1], what);
        cube.geom.rows = static_cast<int>(to_double(g[2], what));
        cube.geom.cols = static_cast<int>(to_double(g[3], what));
    }
    else
    {
        cube.geom.rows = rows;
        cube.geom.cols = cols;
    }
    if (kv.count("prism grid"))
    {
        const auto g = split_list(kv["prism grid"]);
        if (g.size() != 5)
            throw FormatError(what + ": prism grid needs 5 values");
        cube.grid = CorrectedGrid{to_double(g[0], what), static_cast<int>(to_double(g[1], what)),
                                  static_cast<int>(to_double(g[2], what)), to_double(g[3], what),
                                  to_double(g[4], what)};
    }
    if (kv.count("prism interpolated rows"))
    {
        cube.interpolated_rows.assign(std::size_t(rows), 0);
        for (const auto& s : split_list(kv["prism interpolated rows"]))
        {
            const auto r = to_int(s, what);
            if (r < 0 || r >= rows)
                throw FormatError(what + ": interpolated row out of range");
            cube.interpolated_rows[std::size_t(r)] = 1;
        }
    }
    if (kv.count("prism valid runs"))
    {
        std::uint8_t state = 0;
        for (const auto& s : split_list(kv["prism valid runs"]))
        {
            const auto n = to_int(s, what);
            if (n < 0 || cube.valid.size() + std::size_t(n) > cube.pixel_count())
                throw FormatError(what + ": valid runs exceed the pixel count");
            cube.valid.insert(cube.valid.end(), std::size_t(n), state);
            state ^= 1;
        }
        if (cube.valid.size() != cube.pixel_count())
            throw FormatError(what + ": valid runs do not cover the image");
    }

    const std::vector<char> raw = slurp(data_path);
    const std::size_t expected = std::size_t(offset) + cube.pixel_count() * std::size_t(bands) * 4;
    if (raw.size() < expected)
        throw FormatError("cube data " + data_path.string() + ": truncated at byte offset " +
                          std::to_string(raw.size()) + ", expected " + std::to_string(expected) + " bytes");
    Reader rd(raw, "cube data " + data_path.string());
    std::vector<char> skip(static_cast<std::size_t>(offset));
    if (offset > 0)
        rd.raw(skip.data(), skip.size());
    auto dst = cube.data();
    for (std::size_t i = 0; i < cube.pixel_count() * std::size_t(bands); ++i)
    {
        const float v = rd.get<float>();
        std::size_t r, c, b;
        if (il == "bsq")
        {
            b = i / (std::size_t(rows) * cols);
            r = (i / cols) % rows;
            c = i % cols;
        }
        else
        {
            r = i / (std::size_t(bands) * cols);
            b = (i / cols) % bands;
            c = i % cols;
        }
        dst[(r * cols + c) * bands + b] = v;
    }
    return cube;
}

// ---------------------------------------------------------------------------
// Frame stream

void write_frame_stream(const fs::path& path, const std::vector<FramePacket>& frames)
{
    const int cols = frames.empty() ? 0 : frames.front().cols;
    const int bands = frames.empty() ? 0 : frames.front().bands;
    if (cols > 0xffff || bands > 0xffff)
        throw std::invalid_argument("write_frame_stream: frame dimensions exceed the format limit");
    Writer w;
    w.raw(kStreamMagic, 8);
    w.put<std::uint16_t>(kFormatMajor);
    w.put<std::uint16_t>(kFormatMinor);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(cols));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(bands));
    for (const auto& f : frames)
    {
        if (f.cols != cols || f.bands != bands || f.samples.size() != std::size_t(cols) * bands)
            throw std::invalid_argument("write_frame_stream: inconsistent frame dimensions");
        w.put(f.theta.theta);
        w.put(f.timestamp_s);
        for (float v : f.samples)
            w.put(v);
    }
    w.put<std::uint32_t>(crc32_of(w.bytes.data(), w.bytes.size()));
    spit(path, w.bytes.data(), w.bytes.size());
}

std::vector<FramePacket> read_frame_stream(const fs::path& path)
{
    const std::vector<char> bytes = slurp(path);
    const std::string what = "frame stream " + path.string();
    if (bytes.size() < 16 + 4)
        throw FormatError(what + ": truncated at byte offset " + std::to_string(bytes.size()) +
                          " (shorter than preamble and checksum)");
    if (std::memcmp(bytes.data(), kStreamMagic, 8) != 0)
        throw FormatError(what + ": bad magic");
    Reader rd(bytes, what);
    char magic[8];
    rd.raw(magic, 8);
    check_version(rd.get<std::uint16_t>(), what);
    rd.get<std::uint16_t>();
    const int cols = rd.get<std::uint16_t>();
    const int bands = rd.get<std::uint16_t>();
    const std::size_t record = 16 + std::size_t(cols) * bands * 4;
    const std::size_t body = bytes.size() - 16 - 4;
    if (body % record != 0)
    {
        const std::size_t complete = body / record;
        throw FormatError(what + ": checksum region truncated; record " + std::to_string(complete) +
                          " is incomplete at byte offset " + std::to_string(16 + complete * record) +
                          " (file ends at byte offset " + std::to_string(bytes.size()) + ")");
    }
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i)
        stored |= std::uint32_t(static_cast<unsigned char>(bytes[bytes.size() - 4 + std::size_t(i)])) << (8 * i);
    const std::uint32_t computed = crc32_of(bytes.data(), bytes.size() - 4);
    if (stored != computed)
    {
        char buf[160];
        std::snprintf(buf, sizeof buf, ": checksum mismatch at byte offset %zu (stored %08x, computed %08x)",
                      bytes.size() - 4, stored, computed);
        throw FormatError(what + buf);
    }
    std::vector<FramePacket> frames(body / record);
    for (auto& f : frames)
    {
        f.theta.theta = rd.get<double>();
        f.timestamp_s = rd.get<double>();
        f.cols = cols;
        f.bands = bands;
        f.samples.resize(std::size_t(cols) * bands);
        for (auto& v : f.samples)
            v = rd.get<float>();
    }
    return frames;
}

// ---------------------------------------------------------------------------
// Model bundle

void write_model(const fs::path& path, const ModelBundle& bundle)
{
    const ClassifierSpec& spec = bundle.classifier.spec();
    Writer w;
    w.raw(kModelMagic, 8);
    w.put<std::uint16_t>(kFormatMajor);
    w.put<std::uint16_t>(kFormatMinor);
    w.put<std::uint32_t>(0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.blocks.size()));
    for (const auto& b : spec.blocks)
    {
        w.put<std::int32_t>(b.kernel);
        w.put<std::int32_t>(b.channels);
        w.put<std::int32_t>(b.pool);
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.hidden.size()));
    for (int h : spec.hidden)
        w.put<std::int32_t>(h);
    w.put<std::int32_t>(spec.class_count);
    w.put(spec.learning_rate);
    w.put<std::int32_t>(spec.batch_size);
    w.put<std::int32_t>(spec.max_epochs);
    w.put<std::uint64_t>(spec.seed);
    w.put(spec.bn_epsilon);
    w.put(spec.bn_momentum);
    w.put<std::int32_t>(bundle.classifier.input_length());

    const auto state = bundle.classifier.state();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(state.size()));
    for (const auto* t : state)
        w.doubles(*t);

    const MnfModel& m = bundle.mnf;
    const int n = m.bands();
    w.put<std::int32_t>(n);
    w.put<std::int32_t>(m.retained_k);
    w.put<std::uint8_t>(m.regularized ? 1 : 0);
    const auto put_vec = [&](const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i)
            w.put(v(i));
    };
    const auto put_mat = [&](const Eigen::MatrixXd& a) {
        for (Eigen::Index r = 0; r < a.rows(); ++r)
            for (Eigen::Index c = 0; c < a.cols(); ++c)
                w.put(a(r, c));
    };
    put_vec(m.mean);
    put_vec(m.eigenvalues);
    put_mat(m.components);
    put_mat(m.noise_covariance);
    put_mat(m.signal_covariance);

    w.put<std::uint32_t>(static_cast<std::uint32_t>(bundle.class_names.size()));
    for (const auto& s : bundle.class_names)
        w.string(s);
    w.doubles(bundle.band_centers_nm);
    w.put<std::uint32_t>(crc32_of(w.bytes.data(), w.bytes.size()));
    spit(path, w.bytes.data(), w.bytes.size());

    std::ostringstream man;
    man << "prism model manifest\n";
    man << "format_version " << kFormatMajor << "." << kFormatMinor << "\n";
    man << "input_length " << bundle.classifier.input_length() << "\n";
    man << "mnf_bands " << n << "\n";
    man << "mnf_retained_k " << m.retained_k << "\n";
    man << "classes " << bundle.class_names.size() << "\n";
    for (std::size_t i = 0; i < bundle.class_names.size(); ++i)
        man << "class " << i << " " << bundle.class_names[i] << "\n";
    man << "band_centers_nm";
    for (double c : bundle.band_centers_nm)
        man << " " << format_double(c);
    man << "\n";
    write_text(fs::path(path.string() + ".manifest"), man.str());
}

ModelBundle read_model(const fs::path& path)
{
    const std::vector<char> bytes = slurp(path);
    const std::string what = "model " + path.string();
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kModelMagic, 8) != 0)
        throw FormatError(what + ": bad magic");
    Reader rd(bytes, what);
    char magic[8];
    rd.raw(magic, 8);
    check_version(rd.get<std::uint16_t>(), what);
    rd.get<std::uint16_t>();
    rd.get<std::uint32_t>();
    {
        std::uint32_t stored = 0;
        for (int i = 0; i < 4; ++i)
            stored |= std::uint32_t(static_cast<unsigned char>(bytes[bytes.size() - 4 + std::size_t(i)])) << (8 * i);
        if (stored != crc32_of(bytes.data(), bytes.size() - 4))
            throw FormatError(what + ": checksum mismatch at byte offset " + std::to_string(bytes.size() - 4));
    }

    ClassifierSpec spec;
    spec.blocks.resize(rd.get<std::uint32_t>());
    for (auto& b : spec.blocks)
    {
        b.kernel = rd.get<std::int32_t>();
        b.channels = rd.get<std::int32_t>();
        b.pool = rd.get<std::int32_t>();
    }
    spec.hidden.resize(rd.get<std::uint32_t>());
    for (auto& h : spec.hidden)
        h = rd.get<std::int32_t>();
    spec.class_count = rd.get<std::int32_t>();
    spec.learning_rate = rd.get<double>();
    spec.batch_size = rd.get<std::int32_t>();
    spec.max_epochs = rd.get<std::int32_t>();
    spec.seed = rd.get<std::uint64_t>();
    spec.bn_epsilon = rd.get<double>();
    spec.bn_momentum = rd.get<double>();
    const int input_length = rd.get<std::int32_t>();

    ModelBundle b;
    try
    {
        b.classifier = PixelClassifier(spec, input_length);
    }
    catch (const std::invalid_argument& e)
    {
        throw FormatError(what + ": invalid classifier spec: " + e.what());
    }
    auto state = b.classifier.state();
    if (rd.get<std::uint32_t>() != state.size())
        throw FormatError(what + ": tensor count does not match the network layout");
    for (auto* t : state)
    {
        auto v = rd.doubles();
        if (v.size() != t->size())
            throw FormatError(what + ": tensor size does not match the network layout");
        *t = std::move(v);
    }

    const int n = rd.get<std::int32_t>();
    if (n < 1 || n > 1 << 16)
        throw FormatError(what + ": invalid MNF band count");
    b.mnf.retained_k = rd.get<std::int32_t>();
    b.mnf.regularized = rd.get<std::uint8_t>() != 0;
    const auto get_vec = [&](Eigen::VectorXd& v) {
        v.resize(n);
        for (Eigen::Index i = 0; i < n; ++i)
            v(i) = rd.get<double>();
    };
    const auto get_mat = [&](Eigen::MatrixXd& a) {
        a.resize(n, n);
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < n; ++c)
                a(r, c) = rd.get<double>();
    };
    get_vec(b.mnf.mean);
    get_vec(b.mnf.eigenvalues);
    get_mat(b.mnf.components);
    get_mat(b.mnf.noise_covariance);
    get_mat(b.mnf.signal_covariance);

    b.class_names.resize(rd.get<std::uint32_t>());
    for (auto& s : b.class_names)
        s = rd.string();
    b.band_centers_nm = rd.doubles();
    return b;
}

// ---------------------------------------------------------------------------
// Trajectory table

void write_trajectory(const fs::path& path, const CartesianTrajectory& traj)
{
    std::ostringstream out;
    out << "# prism trajectory " << kFormatMajor << "." << kFormatMinor
        << " period_s=" << format_double(traj.sample_period_s) << "\n";
    out << "# waypoint_samples";
    for (std::size_t w : traj.waypoint_samples)
        out << " " << w;
    out << "\n";
    out << "time,x,y,z,vx,vy,vz,action\n";
    std::vector<GripperAction> action(traj.size(), GripperAction::none);
    for (const auto& m : traj.markers)
        if (m.sample < action.size())
            action[m.sample] = m.action;
    for (std::size_t k = 0; k < traj.size(); ++k)
    {
        out << format_double(traj.time[k]);
        for (int a = 0; a < 3; ++a)
            out << "," << format_double(traj.position[k](a));
        for (int a = 0; a < 3; ++a)
            out << "," << format_double(traj.velocity[k](a));
        out << "," << to_string(action[k]) << "\n";
    }
    write_text(path, out.str());
}

CartesianTrajectory read_trajectory(const fs::path& path)
{
    std::istringstream in(read_text(path));
    const std::string what = "trajectory " + path.string();
    std::string line;
    CartesianTrajectory t;
    if (!std::getline(in, line) || line.rfind("# prism trajectory ", 0) != 0)
        throw FormatError(what + ": missing header");
    {
        std::istringstream hs(line.substr(19));
        std::string ver, period;
        hs >> ver >> period;
        check_version(static_cast<std::uint16_t>(to_int(ver.substr(0, ver.find('.')), what)), what);
        if (period.rfind("period_s=", 0) != 0)
            throw FormatError(what + ": missing sample period");
        t.sample_period_s = to_double(period.substr(9), what);
    }
    if (!std::getline(in, line) || line.rfind("# waypoint_samples", 0) != 0)
        throw FormatError(what + ": missing waypoint line");
    {
        std::istringstream ws(line.substr(18));
        std::string tok;
        while (ws >> tok)
            t.waypoint_samples.push_back(static_cast<std::size_t>(to_int(tok, what)));
    }
    if (!std::getline(in, line) || trim(line) != "time,x,y,z,vx,vy,vz,action")
        throw FormatError(what + ": missing column header");
    while (std::getline(in, line))
    {
        if (trim(line).empty())
            continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ','))
            f.push_back(trim(item));
        if (f.size() != 8)
            throw FormatError(what + ": expected 8 columns on line " + std::to_string(t.size() + 4));
        t.time.push_back(to_double(f[0], what));
        t.position.emplace_back(to_double(f[1], what), to_double(f[2], what), to_double(f[3], what));
        t.velocity.emplace_back(to_double(f[4], what), to_double(f[5], what), to_double(f[6], what));
        const GripperAction a = gripper_action_from_string(f[7]);
        if (a != GripperAction::none)
            t.markers.push_back({t.size() - 1, a});
    }
    return t;
}

// ---------------------------------------------------------------------------
// Detection report

void write_detection_report(const fs::path& path, const DetectionReport& report)
{
    json j;
    j["format_version"] = {kFormatMajor, kFormatMinor};
    j["class_names"] = report.class_names;
    j["grid"] = {{"pitch_mm", report.grid.pitch_mm},
                 {"cols", report.grid.cols},
                 {"rows", report.grid.rows},
                 {"x0_mm", report.grid.x0_mm},
                 {"y0_mm", report.grid.y0_mm}};
    j["objects"] = json::array();
    for (const auto& o : report.objects)
    {
        json pts = json::array();
        for (const auto& s : o.suction_points)
            pts.push_back({{"col", s.col}, {"row", s.row}, {"clearance_mm", s.clearance_mm}});
        const std::string name = o.class_label >= 0 && std::size_t(o.class_label) < report.class_names.size()
                                     ? report.class_names[std::size_t(o.class_label)]
                                     : "unknown";
        j["objects"].push_back({{"id", o.instance_id},
                                {"class", o.class_label},
                                {"class_name", name},
                                {"purity", o.purity},
                                {"pixel_count", o.pixel_count},
                                {"votes_kept", o.votes_kept},
                                {"bbox", {o.bbox.row0, o.bbox.col0, o.bbox.row1, o.bbox.col1}},
                                {"centroid", {o.centroid_col, o.centroid_row}},
                                {"suction_points", pts}});
    }
    write_text(path, j.dump(2) + "\n");
}

DetectionReport read_detection_report(const fs::path& path)
{
    const std::string what = "detection report " + path.string();
    try
    {
        const json j = json::parse(read_text(path));
        check_version(j.at("format_version").at(0).get<std::uint16_t>(), what);
        DetectionReport r;
        r.class_names = j.at("class_names").get<std::vector<std::string>>();
        const auto& g = j.at("grid");
        r.grid = {g.at("pitch_mm").get<double>(), g.at("cols").get<int>(), g.at("rows").get<int>(),
                  g.at("x0_mm").get<double>(), g.at("y0_mm").get<double>()};
        for (const auto& o : j.at("objects"))
        {
            DetectedObject d;
            d.instance_id = o.at("id").get<int>();
            d.class_label = o.at("class").get<int>();
            d.purity = o.at("purity").get<double>();
            d.pixel_count = o.at("pixel_count").get<int>();
            d.votes_kept = o.at("votes_kept").get<int>();
            const auto bb = o.at("bbox").get<std::vector<int>>();
            if (bb.size() != 4)
                throw FormatError(what + ": bbox needs 4 values");
            d.bbox = {bb[0], bb[1], bb[2], bb[3]};
            const auto c = o.at("centroid").get<std::vector<double>>();
            if (c.size() != 2)
                throw FormatError(what + ": centroid needs 2 values");
            d.centroid_col = c[0];
            d.centroid_row = c[1];
            for (const auto& s : o.at("suction_points"))
                d.suction_points.push_back(
                    {s.at("col").get<double>(), s.at("row").get<double>(), s.at("clearance_mm").get<double>()});
            r.objects.push_back(std::move(d));
        }
        return r;
    }
    catch (const json::exception& e)
    {
        throw FormatError(what + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Images and text

void write_ppm(const fs::path& path, const RgbImage& image)
{
    std::string out = "P6\n" + std::to_string(image.cols) + " " + std::to_string(image.rows) + "\n255\n";
    out.reserve(out.size() + image.pixels.size());
    for (float v : image.pixels)
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f))));
    spit(path, out.data(), out.size());
}

void write_text(const fs::path& path, const std::string& text)
{
    spit(path, text.data(), text.size());
}

std::string read_text(const fs::path& path)
{
    const auto bytes = slurp(path);
    return {bytes.begin(), bytes.end()};
}

void write_signature(const fs::path& path, const SpectralSignature& sig)
{
    std::string out = "# wavelength_nm reflectance\n";
    for (std::size_t i = 0; i < sig.bands(); ++i)
        out += format_double(sig.band_centers_nm[i]) + " " + format_double(sig.reflectance[i]) + "\n";
    write_text(path, out);
}

SpectralSignature read_signature(const fs::path& path, std::string class_name)
{
    std::istringstream in(read_text(path));
    const std::string what = "signature " + path.string();
    SpectralSignature sig;
    sig.class_name = class_name.empty() ? path.stem().string() : std::move(class_name);
    std::string line;
    while (std::getline(in, line))
    {
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.resize(hash);
        if (trim(line).empty())
            continue;
        std::istringstream ls(line);
        std::string a, b, extra;
        ls >> a >> b;
        if (b.empty() || (ls >> extra))
            throw FormatError(what + ": expected two columns in '" + line + "'");
        sig.band_centers_nm.push_back(to_double(a, what));
        sig.reflectance.push_back(to_double(b, what));
    }
    try
    {
        sig.validate();
    }
    catch (const std::invalid_argument& e)
    {
        throw FormatError(what + ": " + e.what());
    }
    return sig;
}

// ---------------------------------------------------------------------------
// Scene description

namespace
{
void require_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& what)
{
    if (!j.is_object())
        throw FormatError(what + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
            throw FormatError(what + ": unknown key '" + k + "'");
}

json signature_json(const SpectralSignature& s)
{
    return {{"class_name", s.class_name}, {"band_centers_nm", s.band_centers_nm}, {"reflectance", s.reflectance}};
}

SpectralSignature signature_from_json(const json& j, const fs::path& base, const std::string& what)
{
    require_keys(j, {"class_name", "band_centers_nm", "reflectance", "file"}, what);
    if (j.contains("file"))
        return read_signature(base / j.at("file").get<std::string>(), j.value("class_name", std::string{}));
    SpectralSignature s;
    s.class_name = j.value("class_name", std::string{});
    s.band_centers_nm = j.at("band_centers_nm").get<std::vector<double>>();
    s.reflectance = j.at("reflectance").get<std::vector<double>>();
    return s;
}
}  // namespace

void write_scene(const fs::path& path, const SceneDescription& scene)
{
    json j;
    j["format_version"] = {kFormatMajor, kFormatMinor};
    j["plane"] = {{"width_mm", scene.plane_width_mm}, {"height_mm", scene.plane_height_mm}};
    j["noise_sigma"] = scene.noise_sigma;
    j["seed"] = scene.seed;
    j["background"] = signature_json(scene.background);
    j["signatures"] = json::array();
    for (const auto& s : scene.signatures)
        j["signatures"].push_back(signature_json(s));
    j["objects"] = json::array();
    for (const auto& o : scene.objects)
    {
        json verts = json::array();
        for (const auto& v : o.shape.vertices)
            verts.push_back({v.x_mm, v.y_mm});
        j["objects"].push_back({{"signature", o.signature}, {"z_order", o.z_order}, {"vertices", verts}});
    }
    write_text(path, j.dump(1) + "\n");
}

SceneDescription read_scene(const fs::path& path)
{
    const std::string what = "scene " + path.string();
    try
    {
        const json j = json::parse(read_text(path));
        require_keys(j, {"format_version", "plane", "noise_sigma", "seed", "background", "signatures", "objects"},
                     what);
        if (j.contains("format_version"))
            check_version(j.at("format_version").at(0).get<std::uint16_t>(), what);
        SceneDescription s;
        const auto& plane = j.at("plane");
        require_keys(plane, {"width_mm", "height_mm"}, what + " plane");
        s.plane_width_mm = plane.at("width_mm").get<double>();
        s.plane_height_mm = plane.at("height_mm").get<double>();
        s.noise_sigma = j.value("noise_sigma", 0.0);
        s.seed = j.value("seed", std::uint64_t{0});
        const fs::path base = path.parent_path();
        s.background = signature_from_json(j.at("background"), base, what + " background");
        for (const auto& sj : j.at("signatures"))
            s.signatures.push_back(signature_from_json(sj, base, what + " signature"));
        for (const auto& oj : j.at("objects"))
        {
            require_keys(oj, {"signature", "z_order", "vertices"}, what + " object");
            SceneObject o;
            o.signature = oj.at("signature").get<int>();
            o.z_order = oj.value("z_order", 0);
            for (const auto& v : oj.at("vertices"))
                o.shape.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
            s.objects.push_back(std::move(o));
        }
        s.validate();
        return s;
    }
    catch (const json::exception& e)
    {
        throw FormatError(what + ": " + e.what());
    }
    catch (const std::invalid_argument& e)
    {
        throw FormatError(what + ": " + e.what());
    }
}

}  // namespace prism
