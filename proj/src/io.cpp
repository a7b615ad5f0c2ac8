#include "dift/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace dift {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_io("cannot open " + path.string() + " for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) fail_io("read error on " + path.string());
    return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail_io("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail_io("write error on " + path.string());
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                      bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return s;
    }
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            fail(what_ + ": truncated at byte offset " + std::to_string(pos_) + " (need " + std::to_string(n) +
                 " more bytes)");
        }
    }
    [[nodiscard]] std::size_t pos() const noexcept { return pos_; }
    [[nodiscard]] std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

// ---- PNM ------------------------------------------------------------------

struct PnmHeader {
    int channels = 0;
    int width = 0;
    int height = 0;
    std::size_t payload_offset = 0;
};

PnmHeader parse_pnm_header(const std::vector<std::uint8_t>& b) {
    auto err = [](std::size_t off, const std::string& msg) -> void {
        fail("image: " + msg + " at byte offset " + std::to_string(off));
    };
    if (b.size() < 2 || b[0] != 'P' || (b[1] != '5' && b[1] != '6')) {
        err(0, "expected binary PGM (P5) or PPM (P6) magic");
    }
    PnmHeader h;
    h.channels = b[1] == '5' ? 1 : 3;
    std::size_t pos = 2;
    auto skip_space = [&] {
        while (pos < b.size()) {
            if (b[pos] == '#') {
                while (pos < b.size() && b[pos] != '\n') ++pos;
            } else if (std::isspace(b[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&](const char* name) {
        skip_space();
        const std::size_t start = pos;
        long long v = 0;
        while (pos < b.size() && std::isdigit(b[pos])) {
            v = v * 10 + (b[pos] - '0');
            if (v > 1'000'000) err(start, std::string(name) + " too large");
            ++pos;
        }
        if (pos == start) err(start, std::string("missing ") + name);
        return static_cast<int>(v);
    };
    h.width = read_int("width");
    h.height = read_int("height");
    const std::size_t maxval_pos = pos;
    const int maxval = read_int("maxval");
    if (h.width <= 0 || h.height <= 0) err(2, "zero image dimension");
    if (maxval != 255) err(maxval_pos, "unsupported maxval " + std::to_string(maxval) + " (only 255)");
    if (pos >= b.size() || !std::isspace(b[pos])) err(pos, "expected single whitespace after maxval");
    h.payload_offset = pos + 1;
    return h;
}

}  // namespace

Tensor decode_image(const std::vector<std::uint8_t>& bytes) {
    const PnmHeader h = parse_pnm_header(bytes);
    const std::size_t need = static_cast<std::size_t>(h.width) * h.height * h.channels;
    if (bytes.size() - h.payload_offset < need) {
        fail("image: truncated payload at byte offset " + std::to_string(bytes.size()) + " (expected " +
             std::to_string(h.payload_offset + need) + " bytes)");
    }
    Tensor t(Shape{h.channels, h.height, h.width});
    const std::uint8_t* p = bytes.data() + h.payload_offset;
    for (int y = 0; y < h.height; ++y) {
        for (int x = 0; x < h.width; ++x) {
            for (int c = 0; c < h.channels; ++c) t.at(c, y, x) = static_cast<float>(*p++) / 255.0f;
        }
    }
    return t;
}

Tensor read_image(const std::filesystem::path& path) {
    try {
        return decode_image(read_file(path));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Io) throw;
        fail(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_image(const Tensor& image) {
    require(image.channels() == 1 || image.channels() == 3,
            "write_image: need 1 or 3 channels, got " + std::to_string(image.channels()));
    const std::string header = std::string(image.channels() == 1 ? "P5" : "P6") + "\n" +
                               std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + image.size());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < image.channels(); ++c) {
                const double v = std::floor(static_cast<double>(image.at(c, y, x)) * 255.0 + 0.5);
                out.push_back(static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0)));
            }
        }
    }
    return out;
}

void write_image(const std::filesystem::path& path, const Tensor& image) { write_file(path, encode_image(image)); }

// ---- .flo -------------------------------------------------------------------

std::vector<std::uint8_t> encode_flo(const FlowField& flow) {
    std::vector<std::uint8_t> out;
    out.reserve(12 + 8 * flow.pixels());
    put_f32(out, kFloMagic);
    put_u32(out, static_cast<std::uint32_t>(flow.width()));
    put_u32(out, static_cast<std::uint32_t>(flow.height()));
    for (float v : flow.data()) put_f32(out, v);
    return out;
}

FlowField decode_flo(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes, "flo");
    const float magic = r.f32();
    if (std::bit_cast<std::uint32_t>(magic) != std::bit_cast<std::uint32_t>(kFloMagic)) {
        std::ostringstream os;
        os.precision(9);
        os << "flo: magic check failed (read " << magic << ", expected 202021.25)";
        fail(os.str());
    }
    const auto w = static_cast<std::int32_t>(r.u32());
    const auto h = static_cast<std::int32_t>(r.u32());
    if (w <= 0 || h <= 0 || w > (1 << 20) || h > (1 << 20)) {
        fail("flo: bad dimensions " + std::to_string(w) + "x" + std::to_string(h));
    }
    const std::size_t payload = 8ull * static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (r.remaining() != payload) {
        fail("flo: length mismatch, payload has " + std::to_string(r.remaining()) + " bytes, expected " +
             std::to_string(payload));
    }
    FlowField f(h, w);
    for (auto& v : f.data()) v = r.f32();
    return f;
}

FlowField read_flo(const std::filesystem::path& path) {
    try {
        return decode_flo(read_file(path));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Io) throw;
        fail(path.string() + ": " + e.what());
    }
}

void write_flo(const std::filesystem::path& path, const FlowField& flow) { write_file(path, encode_flo(flow)); }

// ---- weights ----------------------------------------------------------------

namespace {
constexpr char kWeightsMagic[8] = {'D', 'I', 'F', 'T', 'W', 'T', 'S', '\0'};

std::size_t element_count(const std::vector<std::uint32_t>& dims) {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}
}  // namespace

std::vector<std::uint8_t> encode_weights(const ParamStore& store) {
    std::vector<std::uint8_t> out(std::begin(kWeightsMagic), std::end(kWeightsMagic));
    put_u32(out, kWeightsVersion);
    put_u32(out, static_cast<std::uint32_t>(store.size()));
    for (const auto& [name, arr] : store) {
        require(!name.empty(), "weights: empty tensor name");
        require(arr.data.size() == element_count(arr.dims), "weights: '" + name + "' payload does not match dims");
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put_u32(out, static_cast<std::uint32_t>(arr.dims.size()));
        for (auto d : arr.dims) put_u32(out, d);
        for (float v : arr.data) put_f32(out, v);
    }
    return out;
}

ParamStore decode_weights(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes, "weights");
    const std::string magic = r.str(8);
    if (magic != std::string(kWeightsMagic, 8)) fail("weights: bad magic");
    const std::uint32_t version = r.u32();
    if (version != kWeightsVersion) fail("weights: unsupported version " + std::to_string(version));
    const std::uint32_t count = r.u32();
    ParamStore store;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32();
        if (name_len == 0 || name_len > 4096) fail("weights: bad name length at byte offset " + std::to_string(r.pos()));
        std::string name = r.str(name_len);
        const std::uint32_t rank = r.u32();
        if (rank > 8) fail("weights: '" + name + "' has rank " + std::to_string(rank));
        NamedArray arr;
        for (std::uint32_t k = 0; k < rank; ++k) arr.dims.push_back(r.u32());
        const std::size_t n = element_count(arr.dims);
        r.need(4 * n);
        arr.data.resize(n);
        for (auto& v : arr.data) v = r.f32();
        if (!store.emplace(name, std::move(arr)).second) fail("weights: duplicate tensor name '" + name + "'");
    }
    if (r.remaining() != 0) fail("weights: " + std::to_string(r.remaining()) + " trailing bytes");
    return store;
}

void write_weights(const std::filesystem::path& path, const ParamStore& store) {
    write_file(path, encode_weights(store));
}

ParamStore read_weights(const std::filesystem::path& path) {
    try {
        return decode_weights(read_file(path));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Io) throw;
        fail(path.string() + ": " + e.what());
    }
}

// ---- run config -------------------------------------------------------------

void RunConfig::validate() const {
    require(downsample == 8 || downsample == 16, "config: K must be 8 or 16");
    require(feature_dim > 0, "config: D must be positive");
    require(radius >= 1, "config: r must be >= 1");
    require(iterations >= 1, "config: iterations must be >= 1");
    require(pyramid_depth >= 1 && pyramid_depth <= 6, "config: pyramid_depth must be in [1, 6]");
    require(n_slice >= 1, "config: n_slice must be >= 1");
    require(bytes_per_element >= 1, "config: bytes_per_element must be >= 1");
}

PipelineConfig RunConfig::to_pipeline(int height, int width) const {
    validate();
    PipelineConfig p;
    p.height = height;
    p.width = width;
    p.downsample = downsample;
    p.feature_dim = feature_dim;
    p.radius = radius;
    p.iterations = iterations;
    p.levels_per_iter = 1;
    p.bytes_per_element = bytes_per_element;
    p.mode = mode;
    p.pyramid_depth = pyramid_depth;
    p.concat = concat;
    const std::int64_t positions = ((height + downsample - 1) / downsample) * ((width + downsample - 1) / downsample);
    p.n_slice = std::min<std::int64_t>(n_slice, positions);
    p.validate();
    return p;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& key, const std::string& v, int line) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) {
        fail("config line " + std::to_string(line) + ": '" + key + "' expects an integer, got '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v, int line) {
    if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
    if (v == "off" || v == "false" || v == "0" || v == "no") return false;
    fail("config line " + std::to_string(line) + ": '" + key + "' expects on/off, got '" + v + "'");
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    std::set<std::string> seen;
    while (std::getline(in, raw)) {
        ++line;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string s = trim(raw);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) fail("config line " + std::to_string(line) + ": expected key = value");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (!seen.insert(key).second) fail("config line " + std::to_string(line) + ": duplicate key '" + key + "'");
        auto as_int = [&] { return static_cast<int>(parse_int(key, value, line)); };
        if (key == "K") {
            cfg.downsample = as_int();
        } else if (key == "D") {
            cfg.feature_dim = as_int();
        } else if (key == "r") {
            cfg.radius = as_int();
        } else if (key == "iterations") {
            cfg.iterations = as_int();
        } else if (key == "mode") {
            if (value == "single_level") {
                cfg.mode = LookupMode::SingleLevel;
            } else if (value == "coarse_to_fine") {
                cfg.mode = LookupMode::CoarseToFine;
            } else {
                fail("config line " + std::to_string(line) + ": mode must be single_level or coarse_to_fine");
            }
        } else if (key == "pyramid_depth") {
            cfg.pyramid_depth = as_int();
        } else if (key == "n_slice") {
            cfg.n_slice = as_int();
        } else if (key == "concat") {
            cfg.concat = parse_bool(key, value, line);
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(parse_int(key, value, line));
        } else if (key == "weights") {
            if (value.empty()) fail("config line " + std::to_string(line) + ": empty weights path");
            cfg.weights = value;
        } else if (key == "bytes_per_element") {
            cfg.bytes_per_element = as_int();
        } else {
            fail("config line " + std::to_string(line) + ": unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig read_run_config(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return parse_run_config(std::string(bytes.begin(), bytes.end()));
    } catch (const Error& e) {
        fail(path.string() + ": " + e.what());
    }
}

std::string format_run_config(const RunConfig& c) {
    std::ostringstream os;
    os << "K = " << c.downsample << '\n'
       << "D = " << c.feature_dim << '\n'
       << "r = " << c.radius << '\n'
       << "iterations = " << c.iterations << '\n'
       << "mode = " << (c.mode == LookupMode::SingleLevel ? "single_level" : "coarse_to_fine") << '\n'
       << "pyramid_depth = " << c.pyramid_depth << '\n'
       << "n_slice = " << c.n_slice << '\n'
       << "concat = " << (c.concat ? "on" : "off") << '\n'
       << "seed = " << c.seed << '\n'
       << "bytes_per_element = " << c.bytes_per_element << '\n';
    if (c.weights) os << "weights = " << c.weights->string() << '\n';
    return os.str();
}

}  // namespace dift
