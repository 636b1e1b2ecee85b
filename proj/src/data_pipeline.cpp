#include "specsr/data_pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "specsr/geometry.hpp"
#include "specsr/rng.hpp"

namespace specsr {

std::vector<PatchPair> extract_patches(const Tensor4<float>& rgb,
                                       const Tensor4<float>& label_src, int patch_in,
                                       int patch_out, int stride) {
    if (rgb.h != label_src.h || rgb.w != label_src.w)
        throw ShapeError("extract_patches: rgb " + std::to_string(rgb.h) + "x" +
                         std::to_string(rgb.w) + " and label source " +
                         std::to_string(label_src.h) + "x" + std::to_string(label_src.w) +
                         " are not registered");
    if (patch_in < 1 || patch_out < 1 || patch_out > patch_in)
        throw ConfigError("extract_patches: need 1 <= patch_out <= patch_in, got " +
                          std::to_string(patch_out) + " / " + std::to_string(patch_in));
    if ((patch_in - patch_out) % 2 != 0)
        throw ConfigError("extract_patches: patch_in - patch_out must be even, got " +
                          std::to_string(patch_in - patch_out));
    if (stride < 1) throw ConfigError("extract_patches: stride must be >= 1");

    std::vector<PatchPair> out;
    if (rgb.h < patch_in || rgb.w < patch_in) {
        std::cerr << "warning: image " << rgb.h << "x" << rgb.w << " smaller than patch "
                  << patch_in << "x" << patch_in << ", no patches extracted\n";
        return out;
    }

    const int offset = (patch_in - patch_out) / 2;
    for (int y = 0; y + patch_in <= rgb.h; y += stride)
        for (int x = 0; x + patch_in <= rgb.w; x += stride) {
            PatchPair pair;
            pair.rgb = Tensor4<float>(1, rgb.c, patch_in, patch_in);
            pair.label = Tensor4<float>(1, label_src.c, patch_out, patch_out);
            for (int c = 0; c < rgb.c; ++c)
                for (int py = 0; py < patch_in; ++py)
                    std::copy(rgb.plane(0, c) + static_cast<std::size_t>(y + py) * rgb.w + x,
                              rgb.plane(0, c) + static_cast<std::size_t>(y + py) * rgb.w + x +
                                  patch_in,
                              pair.rgb.plane(0, c) + static_cast<std::size_t>(py) * patch_in);
            for (int c = 0; c < label_src.c; ++c)
                for (int py = 0; py < patch_out; ++py)
                    std::copy(label_src.plane(0, c) +
                                  static_cast<std::size_t>(y + offset + py) * label_src.w + x +
                                  offset,
                              label_src.plane(0, c) +
                                  static_cast<std::size_t>(y + offset + py) * label_src.w + x +
                                  offset + patch_out,
                              pair.label.plane(0, c) + static_cast<std::size_t>(py) * patch_out);
            out.push_back(std::move(pair));
        }
    return out;
}

std::vector<AugmentSpec> augment_specs() {
    std::vector<AugmentSpec> specs;
    specs.reserve(32);
    for (int scale_num : {10, 9, 8, 7})
        for (int flip = 0; flip < 2; ++flip)
            for (int rot = 0; rot < 4; ++rot)
                specs.push_back({rot, flip != 0, scale_num});
    return specs;
}

std::pair<Tensor4<float>, Tensor4<float>> apply_augment(const Tensor4<float>& rgb,
                                                        const Tensor4<float>& cube,
                                                        const AugmentSpec& spec) {
    if (rgb.h != cube.h || rgb.w != cube.w)
        throw ShapeError("apply_augment: rgb and cube are not registered");
    auto one = [&spec](const Tensor4<float>& t) {
        Tensor4<float> out = t;
        if (spec.scale_num != 10) {
            const int oh = static_cast<int>(std::lround(t.h * (spec.scale_num / 10.0)));
            const int ow = static_cast<int>(std::lround(t.w * (spec.scale_num / 10.0)));
            out = rescale_bilinear(out, oh, ow);
        }
        if (spec.flip) out = flip_h(out);
        if (spec.rot != 0) out = rot90(out, spec.rot);
        return out;
    };
    return {one(rgb), one(cube)};
}

std::vector<AugmentedPair> augment(const Tensor4<float>& rgb, const Tensor4<float>& cube) {
    std::vector<AugmentedPair> out;
    out.reserve(32);
    for (const AugmentSpec& spec : augment_specs()) {
        auto [r, c] = apply_augment(rgb, cube, spec);
        out.push_back({spec, std::move(r), std::move(c)});
    }
    return out;
}

void append_patch_pool(const Tensor4<float>& rgb, const Tensor4<float>& cube, int patch_in,
                       int patch_out, int stride, std::vector<PatchPair>& pool) {
    for (const AugmentSpec& spec : augment_specs()) {
        auto [r, c] = apply_augment(rgb, cube, spec);
        auto pairs = extract_patches(r, c, patch_in, patch_out, stride);
        for (auto& p : pairs) pool.push_back(std::move(p));
    }
}

// --------------------------------------------------------------------------
// Folds
// --------------------------------------------------------------------------

int FoldSplit::fold_of(const std::string& name) const {
    for (const auto& [n, f] : entries)
        if (n == name) return f;
    throw ConfigError("FoldSplit: image '" + name + "' not present in the split");
}

std::vector<std::string> FoldSplit::names_in_fold(int fold) const {
    std::vector<std::string> out;
    for (const auto& [n, f] : entries)
        if (f == fold) out.push_back(n);
    return out;
}

FoldSplit make_folds(const std::vector<std::string>& image_names, std::uint64_t seed) {
    if (image_names.size() < 2)
        throw ConfigError("make_folds: need at least 2 images, got " +
                          std::to_string(image_names.size()));
    std::unordered_set<std::string> seen;
    for (const auto& n : image_names)
        if (!seen.insert(n).second)
            throw ConfigError("make_folds: duplicate image name '" + n + "'");

    std::vector<std::string> names = image_names;
    std::mt19937_64 rng(seed);
    for (std::size_t i = names.size() - 1; i > 0; --i)
        std::swap(names[i], names[bounded_uint(rng, i + 1)]);

    FoldSplit split;
    const std::size_t half = (names.size() + 1) / 2;
    for (std::size_t i = 0; i < names.size(); ++i)
        split.entries.emplace_back(names[i], i < half ? 0 : 1);
    return split;
}

FoldSplit load_split(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open split file: " + path);
    FoldSplit split;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw IoError(path + ": line " + std::to_string(lineno) + ": expected 'name,fold'");
        const std::string name = line.substr(0, comma);
        int fold = 0;
        try {
            fold = std::stoi(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw IoError(path + ": line " + std::to_string(lineno) + ": bad fold index '" +
                          line.substr(comma + 1) + "'");
        }
        if (fold < 0 || fold > 1)
            throw IoError(path + ": line " + std::to_string(lineno) + ": fold must be 0 or 1");
        if (!seen.insert(name).second)
            throw ConfigError(path + ": duplicate image name '" + name + "' at line " +
                              std::to_string(lineno));
        split.entries.emplace_back(name, fold);
    }
    if (split.entries.empty()) throw IoError(path + ": empty split file");
    return split;
}

void save_split(const FoldSplit& split, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open split file for writing: " + path);
    for (const auto& [name, fold] : split.entries) f << name << "," << fold << "\n";
    if (!f) throw IoError("short write to split file: " + path);
}

// --------------------------------------------------------------------------
// Raster IO
// --------------------------------------------------------------------------

std::uint8_t quantize_u8(float v) {
    const long q = std::lround(static_cast<double>(v) * 255.0);  // half away from zero
    return static_cast<std::uint8_t>(std::clamp(q, 0L, 255L));
}

static void check_rgb_image(const Tensor4<float>& rgb, const char* what) {
    if (rgb.n != 1 || rgb.c != 3)
        throw ShapeError(std::string(what) + ": expected a (1, 3, h, w) image, got (" +
                         rgb.dims_str() + ")");
}

void save_ppm(const Tensor4<float>& rgb, const std::string& path) {
    check_rgb_image(rgb, "save_ppm");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open PPM for writing: " + path);
    f << "P6\n" << rgb.w << " " << rgb.h << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(rgb.w) * 3);
    for (int y = 0; y < rgb.h; ++y) {
        for (int x = 0; x < rgb.w; ++x)
            for (int c = 0; c < 3; ++c)
                row[static_cast<std::size_t>(x) * 3 + c] = quantize_u8(rgb(0, c, y, x));
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw IoError("short write to PPM: " + path);
}

Tensor4<float> load_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open PPM: " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    if (magic != "P6" || maxval != 255 || w < 1 || h < 1)
        throw IoError(path + ": not an 8-bit P6 PPM");
    f.get();  // single whitespace after header
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (f.gcount() != static_cast<std::streamsize>(raw.size()))
        throw IoError(path + ": truncated pixel data");
    Tensor4<float> rgb(1, 3, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                rgb(0, c, y, x) =
                    raw[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0f;
    return rgb;
}

void save_pfm(const Tensor4<float>& rgb, const std::string& path) {
    check_rgb_image(rgb, "save_pfm");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open PFM for writing: " + path);
    f << "PF\n" << rgb.w << " " << rgb.h << "\n-1.0\n";  // -1.0: little-endian
    std::vector<float> row(static_cast<std::size_t>(rgb.w) * 3);
    for (int y = rgb.h - 1; y >= 0; --y) {  // PFM stores bottom-up
        for (int x = 0; x < rgb.w; ++x)
            for (int c = 0; c < 3; ++c) row[static_cast<std::size_t>(x) * 3 + c] = rgb(0, c, y, x);
        f.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!f) throw IoError("short write to PFM: " + path);
}

Tensor4<float> load_pfm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open PFM: " + path);
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    f >> magic >> w >> h >> scale;
    if (magic != "PF" || w < 1 || h < 1 || scale >= 0.0)
        throw IoError(path + ": not a little-endian color PFM");
    f.get();
    Tensor4<float> rgb(1, 3, h, w);
    std::vector<float> row(static_cast<std::size_t>(w) * 3);
    for (int y = h - 1; y >= 0; --y) {
        f.read(reinterpret_cast<char*>(row.data()),
               static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (f.gcount() != static_cast<std::streamsize>(row.size() * sizeof(float)))
            throw IoError(path + ": truncated pixel data");
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) rgb(0, c, y, x) = row[static_cast<std::size_t>(x) * 3 + c];
    }
    return rgb;
}

}  // namespace specsr
