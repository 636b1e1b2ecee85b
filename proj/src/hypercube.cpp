#include "specsr/hypercube.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace specsr {

HyperCube::HyperCube(int h_, int w_, std::vector<float> wavelengths_)
    : h(h_), w(w_), wavelengths(std::move(wavelengths_)) {
    if (h < 0 || w < 0)
        throw ShapeError("HyperCube: negative dimension " + std::to_string(h) + "x" +
                         std::to_string(w));
    data.assign(static_cast<std::size_t>(bands()) * plane_size(), 0.0f);
    validate();
}

void HyperCube::validate() const {
    if (wavelengths.empty()) throw ShapeError("HyperCube: no spectral bands");
    for (std::size_t i = 1; i < wavelengths.size(); ++i)
        if (!(wavelengths[i] > wavelengths[i - 1]))
            throw ShapeError("HyperCube: wavelengths must be strictly increasing, band " +
                             std::to_string(i) + " is " + std::to_string(wavelengths[i]) +
                             " after " + std::to_string(wavelengths[i - 1]));
    if (data.size() != static_cast<std::size_t>(bands()) * plane_size())
        throw ShapeError("HyperCube: data length " + std::to_string(data.size()) +
                         " != bands*h*w = " +
                         std::to_string(static_cast<std::size_t>(bands()) * plane_size()));
}

std::vector<float> standard_wavelengths() {
    std::vector<float> wl(31);
    for (int i = 0; i < 31; ++i) wl[i] = 400.0f + 10.0f * i;
    return wl;
}

// --------------------------------------------------------------------------
// HSCB IO
// --------------------------------------------------------------------------

namespace {

constexpr char kCubeMagic[4] = {'H', 'S', 'C', 'B'};
constexpr std::uint16_t kCubeVersion = 1;
constexpr std::uint64_t kMaxDim = 1u << 20;
constexpr std::uint64_t kMaxElements = 1ull << 31;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    put_u16(out, static_cast<std::uint16_t>(v & 0xffff));
    put_u16(out, static_cast<std::uint16_t>(v >> 16));
}

struct CubeReader {
    std::string bytes;
    std::size_t pos = 0;
    std::string path;

    void need(std::size_t n) const {
        if (pos + n > bytes.size())
            throw IoError(path + ": truncated at byte offset " + std::to_string(pos) +
                          " (need " + std::to_string(n) + " more bytes, have " +
                          std::to_string(bytes.size() - pos) + ")");
    }
    std::uint16_t u16() {
        need(2);
        auto v = static_cast<std::uint16_t>(
            static_cast<unsigned char>(bytes[pos]) |
            (static_cast<unsigned char>(bytes[pos + 1]) << 8));
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        const std::uint32_t lo = u16();
        const std::uint32_t hi = u16();
        return lo | (hi << 16);
    }
    float f32() { return std::bit_cast<float>(u32()); }
};

}  // namespace

void save_cube(const HyperCube& cube, const std::string& path) {
    cube.validate();
    std::string out;
    out.reserve(16 + 4 * cube.data.size());
    out.append(kCubeMagic, 4);
    put_u16(out, kCubeVersion);
    put_u32(out, static_cast<std::uint32_t>(cube.h));
    put_u32(out, static_cast<std::uint32_t>(cube.w));
    put_u32(out, static_cast<std::uint32_t>(cube.bands()));
    for (float wl : cube.wavelengths) put_u32(out, std::bit_cast<std::uint32_t>(wl));
    for (float v : cube.data) put_u32(out, std::bit_cast<std::uint32_t>(v));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open cube for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to cube: " + path);
}

HyperCube load_cube(const std::string& path) {
    CubeReader r;
    r.path = path;
    {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot open cube: " + path);
        r.bytes.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    }
    r.need(4);
    if (std::memcmp(r.bytes.data(), kCubeMagic, 4) != 0)
        throw IoError(path + ": bad magic at byte offset 0 (expected \"HSCB\")");
    r.pos = 4;
    const std::uint16_t version = r.u16();
    if (version != kCubeVersion)
        throw IoError(path + ": unsupported cube version " + std::to_string(version) +
                      " at byte offset 4");
    const std::uint64_t h = r.u32();
    const std::uint64_t w = r.u32();
    const std::uint64_t c = r.u32();
    if (h > kMaxDim || w > kMaxDim || c > kMaxDim || h * w * c > kMaxElements)
        throw IoError(path + ": dimension overflow " + std::to_string(h) + "x" +
                      std::to_string(w) + "x" + std::to_string(c) + " at byte offset 6");

    HyperCube cube;
    cube.h = static_cast<int>(h);
    cube.w = static_cast<int>(w);
    cube.wavelengths.resize(c);
    for (auto& wl : cube.wavelengths) wl = r.f32();
    cube.data.resize(h * w * c);
    for (std::size_t i = 0; i < cube.data.size(); ++i) {
        const std::size_t at = r.pos;
        cube.data[i] = r.f32();
        if (!std::isfinite(cube.data[i]))
            throw IoError(path + ": non-finite sample at byte offset " + std::to_string(at));
    }
    if (r.pos != r.bytes.size())
        throw IoError(path + ": " + std::to_string(r.bytes.size() - r.pos) +
                      " trailing bytes at byte offset " + std::to_string(r.pos));
    cube.validate();
    return cube;
}

// --------------------------------------------------------------------------
// Spectral responses
// --------------------------------------------------------------------------

void SpectralResponse::validate() const {
    if (wavelengths.size() < 2)
        throw ConfigError("SpectralResponse " + name + ": needs at least 2 grid points");
    for (std::size_t i = 1; i < wavelengths.size(); ++i)
        if (!(wavelengths[i] > wavelengths[i - 1]))
            throw ConfigError("SpectralResponse " + name +
                              ": wavelengths must be strictly increasing at row " +
                              std::to_string(i));
    for (const auto& curve : curves) {
        if (curve.size() != wavelengths.size())
            throw ConfigError("SpectralResponse " + name + ": curve length " +
                              std::to_string(curve.size()) + " != grid length " +
                              std::to_string(wavelengths.size()));
        for (float v : curve)
            if (!(v >= 0.0f) || !std::isfinite(v))
                throw ConfigError("SpectralResponse " + name +
                                  ": curve values must be finite and >= 0");
    }
}

SpectralResponse cie1964_observer() {
    // CIE 1964 10-degree standard observer, 400..700 nm at 10 nm.
    static constexpr float kTable[31][3] = {
        {0.019110f, 0.002004f, 0.086011f}, {0.084736f, 0.008756f, 0.389366f},
        {0.204492f, 0.021391f, 0.972542f}, {0.314679f, 0.038676f, 1.553480f},
        {0.383734f, 0.062077f, 1.967280f}, {0.370702f, 0.089456f, 1.994800f},
        {0.302273f, 0.128201f, 1.745370f}, {0.195618f, 0.185190f, 1.317560f},
        {0.080507f, 0.253589f, 0.772125f}, {0.016172f, 0.339133f, 0.415254f},
        {0.003816f, 0.460777f, 0.218502f}, {0.037465f, 0.606741f, 0.112044f},
        {0.117749f, 0.761757f, 0.060709f}, {0.236491f, 0.875211f, 0.030451f},
        {0.376772f, 0.961988f, 0.013676f}, {0.529826f, 0.991761f, 0.003988f},
        {0.705224f, 0.997340f, 0.000000f}, {0.878655f, 0.955552f, 0.000000f},
        {1.014160f, 0.868934f, 0.000000f}, {1.118520f, 0.777405f, 0.000000f},
        {1.123990f, 0.658341f, 0.000000f}, {1.030480f, 0.527963f, 0.000000f},
        {0.856297f, 0.398057f, 0.000000f}, {0.647467f, 0.283493f, 0.000000f},
        {0.431567f, 0.179828f, 0.000000f}, {0.268329f, 0.107633f, 0.000000f},
        {0.152568f, 0.060281f, 0.000000f}, {0.081261f, 0.031800f, 0.000000f},
        {0.040851f, 0.015905f, 0.000000f}, {0.019941f, 0.007749f, 0.000000f},
        {0.009577f, 0.003718f, 0.000000f}};
    SpectralResponse resp;
    resp.name = "cie1964";
    resp.wavelengths = standard_wavelengths();
    for (int ch = 0; ch < 3; ++ch) {
        resp.curves[ch].resize(31);
        for (int i = 0; i < 31; ++i) resp.curves[ch][i] = kTable[i][ch];
    }
    resp.validate();
    return resp;
}

SpectralResponse load_response_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open response CSV: " + path);
    SpectralResponse resp;
    resp.name = path;
    std::string line;
    if (!std::getline(f, line)) throw IoError(path + ": empty response CSV");
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        float vals[4];
        for (int i = 0; i < 4; ++i) {
            if (!std::getline(ss, field, ','))
                throw IoError(path + ": line " + std::to_string(lineno) +
                              ": expected 4 comma-separated values");
            try {
                vals[i] = std::stof(field);
            } catch (const std::exception&) {
                throw IoError(path + ": line " + std::to_string(lineno) +
                              ": cannot parse '" + field + "' as a number");
            }
        }
        resp.wavelengths.push_back(vals[0]);
        for (int ch = 0; ch < 3; ++ch) resp.curves[ch].push_back(vals[ch + 1]);
    }
    resp.validate();
    return resp;
}

void save_response_csv(const SpectralResponse& resp, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open response CSV for writing: " + path);
    f << "wavelength_nm,c1,c2,c3\n";
    char buf[128];
    for (std::size_t i = 0; i < resp.wavelengths.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f\n", resp.wavelengths[i],
                      resp.curves[0][i], resp.curves[1][i], resp.curves[2][i]);
        f << buf;
    }
    if (!f) throw IoError("short write to response CSV: " + path);
}

// --------------------------------------------------------------------------
// RGB synthesis
// --------------------------------------------------------------------------

namespace {

double interp_response(const SpectralResponse& resp, int channel, double lambda) {
    const auto& grid = resp.wavelengths;
    const auto& curve = resp.curves[channel];
    auto it = std::lower_bound(grid.begin(), grid.end(), static_cast<float>(lambda));
    if (it == grid.end()) return curve.back();
    const std::size_t i = static_cast<std::size_t>(it - grid.begin());
    if (grid[i] == lambda || i == 0) return curve[i];
    const double t = (lambda - grid[i - 1]) / (static_cast<double>(grid[i]) - grid[i - 1]);
    return (1.0 - t) * curve[i - 1] + t * curve[i];
}

}  // namespace

Tensor4<float> synthesize_rgb_raw(const HyperCube& cube, const SpectralResponse& resp) {
    cube.validate();
    resp.validate();

    std::string missing;
    for (float wl : cube.wavelengths)
        if (wl < resp.wavelengths.front() || wl > resp.wavelengths.back())
            missing += (missing.empty() ? "" : ", ") + std::to_string(wl);
    if (!missing.empty())
        throw ConfigError("synthesize_rgb: response '" + resp.name +
                          "' does not cover cube bands (nm): " + missing);

    const int bands = cube.bands();
    // Trapezoid quadrature weight per band on the cube's grid.
    std::vector<double> weight(bands);
    if (bands == 1) {
        weight[0] = 1.0;
    } else {
        weight[0] = 0.5 * (static_cast<double>(cube.wavelengths[1]) - cube.wavelengths[0]);
        weight[bands - 1] =
            0.5 * (static_cast<double>(cube.wavelengths[bands - 1]) - cube.wavelengths[bands - 2]);
        for (int b = 1; b + 1 < bands; ++b)
            weight[b] =
                0.5 * (static_cast<double>(cube.wavelengths[b + 1]) - cube.wavelengths[b - 1]);
    }

    std::array<std::vector<double>, 3> coeff;
    for (int ch = 0; ch < 3; ++ch) {
        coeff[ch].resize(bands);
        for (int b = 0; b < bands; ++b)
            coeff[ch][b] = weight[b] * interp_response(resp, ch, cube.wavelengths[b]);
    }

    Tensor4<float> rgb(1, 3, cube.h, cube.w);
    const std::size_t plane = cube.plane_size();
    for (int ch = 0; ch < 3; ++ch) {
        float* dst = rgb.plane(0, ch);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(plane); ++p) {
            double acc = 0.0;
            for (int b = 0; b < bands; ++b) acc += coeff[ch][b] * cube.plane(b)[p];
            dst[p] = static_cast<float>(acc);
        }
    }
    return rgb;
}

Tensor4<float> synthesize_rgb(const HyperCube& cube, const SpectralResponse& resp) {
    Tensor4<float> rgb = synthesize_rgb_raw(cube, resp);
    float maxv = 0.0f;
    for (float v : rgb.data) maxv = std::max(maxv, v);
    if (maxv > 0.0f) {
        const float scale = 1.0f / maxv;
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rgb.data.size()); ++i)
            rgb.data[i] *= scale;
    }
    return rgb;
}

Tensor4<float> cube_to_tensor(const HyperCube& cube) {
    Tensor4<float> t(1, cube.bands(), cube.h, cube.w);
    std::copy(cube.data.begin(), cube.data.end(), t.data.begin());
    return t;
}

HyperCube tensor_to_cube(const Tensor4<float>& t, std::vector<float> wavelengths) {
    if (t.n != 1)
        throw ShapeError("tensor_to_cube: batch axis must be 1, got n=" + std::to_string(t.n));
    if (static_cast<int>(wavelengths.size()) != t.c)
        throw ShapeError("tensor_to_cube: " + std::to_string(wavelengths.size()) +
                         " wavelengths for c=" + std::to_string(t.c) + " bands");
    HyperCube cube(t.h, t.w, std::move(wavelengths));
    std::copy(t.data.begin(), t.data.end(), cube.data.begin());
    return cube;
}

}  // namespace specsr
