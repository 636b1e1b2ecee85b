#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "specsr/data_pipeline.hpp"
#include "specsr/geometry.hpp"
#include "specsr/hypercube.hpp"
#include "specsr/rng.hpp"

using namespace specsr;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

HyperCube random_cube(std::mt19937_64& rng, int h, int w, int bands = 31) {
    std::vector<float> wl(bands);
    for (int i = 0; i < bands; ++i) wl[i] = 400.0f + 10.0f * i;
    HyperCube cube(h, w, wl);
    for (float& v : cube.data) v = static_cast<float>(uniform01(rng));
    return cube;
}

Tensor4<float> random_image(std::mt19937_64& rng, int c, int h, int w) {
    Tensor4<float> t(1, c, h, w);
    for (float& v : t.data) v = static_cast<float>(uniform01(rng));
    return t;
}

std::size_t argmax(const std::vector<float>& v) {
    return static_cast<std::size_t>(
        std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST_CASE("HSCB round-trip is bitwise lossless including denormals") {
    std::mt19937_64 rng(41);
    HyperCube cube = random_cube(rng, 7, 9, 31);
    cube.data[0] = 0.0f;
    cube.data[1] = 1e-41f;                                   // denormal
    cube.data[2] = std::numeric_limits<float>::denorm_min();
    cube.data[3] = std::numeric_limits<float>::max();
    cube.data[4] = std::numeric_limits<float>::min();

    const std::string p1 = temp_path("specsr_cube1.hscb");
    const std::string p2 = temp_path("specsr_cube2.hscb");
    save_cube(cube, p1);
    HyperCube loaded = load_cube(p1);
    CHECK(loaded.h == cube.h);
    CHECK(loaded.w == cube.w);
    CHECK(loaded.wavelengths == cube.wavelengths);
    REQUIRE(loaded.data.size() == cube.data.size());
    for (std::size_t i = 0; i < cube.data.size(); ++i) {
        CHECK(std::memcmp(&loaded.data[i], &cube.data[i], sizeof(float)) == 0);
    }
    save_cube(loaded, p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("HSCB loader rejects damage with byte offsets") {
    std::mt19937_64 rng(42);
    HyperCube cube = random_cube(rng, 4, 4, 5);
    const std::string path = temp_path("specsr_cube_bad.hscb");
    save_cube(cube, path);

    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
    }
    CHECK_THROWS_WITH_AS(load_cube(path), doctest::Contains("truncated"), IoError);

    {
        std::string bad = bytes;
        bad[0] = 'X';
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
    }
    CHECK_THROWS_WITH_AS(load_cube(path), doctest::Contains("magic"), IoError);

    {
        std::string bad = bytes;
        bad.push_back('\0');
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
    }
    CHECK_THROWS_WITH_AS(load_cube(path), doctest::Contains("trailing"), IoError);
    std::filesystem::remove(path);
}

TEST_CASE("standard 31-band cube validates") {
    HyperCube cube(3, 3, standard_wavelengths());
    CHECK(cube.bands() == 31);
    CHECK(cube.wavelengths.front() == 400.0f);
    CHECK(cube.wavelengths.back() == 700.0f);
    cube.validate();

    std::vector<float> bad = standard_wavelengths();
    std::swap(bad[3], bad[4]);
    CHECK_THROWS_WITH_AS(HyperCube(3, 3, bad), doctest::Contains("increasing"), ShapeError);
}

TEST_CASE("CIE 1964 asset CSV matches the built-in observer") {
    SpectralResponse builtin = cie1964_observer();
    SpectralResponse csv = load_response_csv(std::string(SPECSR_DATA_DIR) + "/cie1964_10deg.csv");
    REQUIRE(csv.wavelengths.size() == builtin.wavelengths.size());
    for (std::size_t i = 0; i < builtin.wavelengths.size(); ++i) {
        CHECK(csv.wavelengths[i] == builtin.wavelengths[i]);
        for (int ch = 0; ch < 3; ++ch) CHECK(csv.curves[ch][i] == builtin.curves[ch][i]);
    }
}

TEST_CASE("synthesize_rgb: zero cube, single band, scale invariance") {
    SpectralResponse resp = cie1964_observer();
    HyperCube zeros(4, 4, standard_wavelengths());
    Tensor4<float> rgb = synthesize_rgb(zeros, resp);
    for (float v : rgb.data) CHECK(v == 0.0f);

    // single nonzero band at 550 nm: RGB proportional to the response there
    HyperCube one_band(2, 2, standard_wavelengths());
    const int b550 = 15;
    for (std::size_t i = 0; i < one_band.plane_size(); ++i) one_band.plane(b550)[i] = 1.0f;
    Tensor4<float> raw = synthesize_rgb_raw(one_band, resp);
    const double x550 = resp.curves[0][b550], y550 = resp.curves[1][b550],
                 z550 = resp.curves[2][b550];
    CHECK(raw(0, 0, 0, 0) / raw(0, 1, 0, 0) == doctest::Approx(x550 / y550).epsilon(1e-5));
    CHECK(raw(0, 2, 0, 0) / raw(0, 1, 0, 0) == doctest::Approx(z550 / y550).epsilon(1e-5));

    // doubling radiance leaves the normalized image unchanged
    std::mt19937_64 rng(43);
    HyperCube cube = random_cube(rng, 5, 5);
    HyperCube doubled = cube;
    for (float& v : doubled.data) v *= 2.0f;
    Tensor4<float> a = synthesize_rgb(cube, resp);
    Tensor4<float> b = synthesize_rgb(doubled, resp);
    for (std::size_t i = 0; i < a.data.size(); ++i)
        CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-6));
}

TEST_CASE("synthesize_rgb_raw is linear in the cube") {
    std::mt19937_64 rng(44);
    SpectralResponse resp = cie1964_observer();
    HyperCube a = random_cube(rng, 4, 6);
    HyperCube b = random_cube(rng, 4, 6);
    HyperCube sum = a;
    for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += b.data[i];
    Tensor4<float> ra = synthesize_rgb_raw(a, resp);
    Tensor4<float> rb = synthesize_rgb_raw(b, resp);
    Tensor4<float> rsum = synthesize_rgb_raw(sum, resp);
    for (std::size_t i = 0; i < rsum.data.size(); ++i)
        CHECK(rsum.data[i] == doctest::Approx(ra.data[i] + rb.data[i]).epsilon(1e-5));
}

TEST_CASE("synthesize_rgb rejects coverage gaps listing the bands") {
    SpectralResponse resp = cie1964_observer();
    std::vector<float> wl = standard_wavelengths();
    wl.push_back(710.0f);
    HyperCube cube(2, 2, wl);
    CHECK_THROWS_WITH_AS(synthesize_rgb(cube, resp), doctest::Contains("710"), ConfigError);
}

TEST_CASE("extract_patches: counts and label alignment") {
    std::mt19937_64 rng(45);
    Tensor4<float> rgb = random_image(rng, 3, 36, 36);
    Tensor4<float> cube = random_image(rng, 31, 36, 36);

    auto one = extract_patches(rgb, cube, 36, 20, 20);
    REQUIRE(one.size() == 1);
    CHECK(one[0].rgb.h == 36);
    CHECK(one[0].label.h == 20);
    CHECK(one[0].label.c == 31);

    // label of the origin patch covers rows/cols 8..27
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x)
            CHECK(one[0].label(0, 5, y, x) == cube(0, 5, y + 8, x + 8));

    Tensor4<float> wide = random_image(rng, 3, 36, 56);
    Tensor4<float> wide_cube = random_image(rng, 31, 36, 56);
    auto two = extract_patches(wide, wide_cube, 36, 20, 20);
    CHECK(two.size() == 2);

    Tensor4<float> small = random_image(rng, 3, 20, 20);
    Tensor4<float> small_cube = random_image(rng, 31, 20, 20);
    auto none = extract_patches(small, small_cube, 36, 20, 20);
    CHECK(none.empty());
}

TEST_CASE("augment: exactly 32 distinct members, identity first and bitwise") {
    std::mt19937_64 rng(46);
    Tensor4<float> rgb = random_image(rng, 3, 36, 36);
    Tensor4<float> cube = random_image(rng, 8, 36, 36);

    auto members = augment(rgb, cube);
    REQUIRE(members.size() == 32);

    std::set<std::tuple<int, bool, int>> specs;
    for (const auto& m : members) specs.insert({m.spec.rot, m.spec.flip, m.spec.scale_num});
    CHECK(specs.size() == 32);

    CHECK(members[0].spec == AugmentSpec{0, false, 10});
    CHECK(members[0].rgb.data == rgb.data);
    CHECK(members[0].cube.data == cube.data);
}

TEST_CASE("augment: rot90 is a four-cycle and flips/scales have expected dims") {
    std::mt19937_64 rng(47);
    Tensor4<float> rgb = random_image(rng, 3, 24, 36);
    Tensor4<float> r1 = rot90(rgb, 1);
    CHECK(r1.h == 36);
    CHECK(r1.w == 24);
    Tensor4<float> r4 = rot90(rot90(rot90(rot90(rgb, 1), 1), 1), 1);
    CHECK(r4.data == rgb.data);
    Tensor4<float> f2 = flip_h(flip_h(rgb));
    CHECK(f2.data == rgb.data);

    Tensor4<float> cube = random_image(rng, 5, 24, 36);
    for (const auto& m : augment(rgb, cube)) {
        const double s = m.spec.scale_num / 10.0;
        const int eh = static_cast<int>(std::lround(24 * s));
        const int ew = static_cast<int>(std::lround(36 * s));
        if (m.spec.rot % 2 == 0) {
            CHECK(m.rgb.h == eh);
            CHECK(m.rgb.w == ew);
        } else {
            CHECK(m.rgb.h == ew);
            CHECK(m.rgb.w == eh);
        }
        CHECK(m.cube.h == m.rgb.h);
        CHECK(m.cube.w == m.rgb.w);
    }
}

TEST_CASE("augment: marker pixel stays co-located through all 32 members") {
    Tensor4<float> rgb(1, 3, 36, 36);
    Tensor4<float> cube(1, 4, 36, 36);
    // flat background with one bright marker at the same spot in both
    for (float& v : rgb.data) v = 0.1f;
    for (float& v : cube.data) v = 0.1f;
    for (int c = 0; c < 3; ++c) rgb(0, c, 11, 23) = 1.0f;
    for (int c = 0; c < 4; ++c) cube(0, c, 11, 23) = 1.0f;

    for (const auto& m : augment(rgb, cube)) {
        const std::size_t plane = m.rgb.plane_size();
        const std::size_t rgb_at = argmax({m.rgb.data.begin(), m.rgb.data.begin() + plane});
        const std::size_t cube_at = argmax({m.cube.data.begin(), m.cube.data.begin() + plane});
        CHECK(rgb_at == cube_at);
    }
}

TEST_CASE("augment: transforms commute with exact-fit patch extraction") {
    std::mt19937_64 rng(48);
    Tensor4<float> rgb = random_image(rng, 3, 36, 36);
    Tensor4<float> cube = random_image(rng, 6, 36, 36);

    Tensor4<float> rot_rgb = rot90(rgb, 1);
    Tensor4<float> rot_cube = rot90(cube, 1);
    auto direct = extract_patches(rot_rgb, rot_cube, 36, 20, 20);
    auto pre = extract_patches(rgb, cube, 36, 20, 20);
    REQUIRE(direct.size() == 1);
    REQUIRE(pre.size() == 1);
    Tensor4<float> rotated_patch = rot90(pre[0].rgb, 1);
    CHECK(rotated_patch.data == direct[0].rgb.data);
    Tensor4<float> rotated_label = rot90(pre[0].label, 1);
    CHECK(rotated_label.data == direct[0].label.data);
}

TEST_CASE("make_folds: even split, deterministic, rejects duplicates") {
    std::vector<std::string> names;
    for (int i = 0; i < 10; ++i) names.push_back("img" + std::to_string(i));
    FoldSplit split = make_folds(names, 5);
    CHECK(split.names_in_fold(0).size() == 5);
    CHECK(split.names_in_fold(1).size() == 5);

    FoldSplit again = make_folds(names, 5);
    CHECK(split.entries == again.entries);
    FoldSplit other = make_folds(names, 6);
    CHECK(split.entries != other.entries);

    names.push_back("img3");
    CHECK_THROWS_WITH_AS(make_folds(names, 5), doctest::Contains("duplicate"), ConfigError);
    CHECK_THROWS_AS(make_folds({"only"}, 1), ConfigError);
}

TEST_CASE("split file round-trip echoes the assignment verbatim") {
    const std::string path = temp_path("specsr_split.csv");
    {
        std::ofstream f(path, std::ios::trunc);
        f << "scene_a,0\nscene_b,1\nscene_c,0\n";
    }
    FoldSplit split = load_split(path);
    REQUIRE(split.entries.size() == 3);
    CHECK(split.fold_of("scene_b") == 1);
    const std::string out = temp_path("specsr_split_out.csv");
    save_split(split, out);
    std::ifstream f1(path), f2(out);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);

    {
        std::ofstream f(path, std::ios::trunc);
        f << "scene_a,0\nscene_a,1\n";
    }
    CHECK_THROWS_WITH_AS(load_split(path), doctest::Contains("duplicate"), ConfigError);
    std::filesystem::remove(path);
    std::filesystem::remove(out);
}

TEST_CASE("8-bit quantization rounds half away from zero") {
    CHECK(quantize_u8(0.0f) == 0);
    CHECK(quantize_u8(1.0f) == 255);
    CHECK(quantize_u8(0.5f) == 128);             // 127.5 rounds away to 128
    CHECK(quantize_u8(127.4f / 255.0f) == 127);
    CHECK(quantize_u8(-0.2f) == 0);              // clamped
    CHECK(quantize_u8(1.7f) == 255);             // clamped
}

TEST_CASE("PPM and PFM round-trips") {
    std::mt19937_64 rng(49);
    Tensor4<float> rgb = random_image(rng, 3, 9, 13);

    const std::string ppm = temp_path("specsr_test.ppm");
    save_ppm(rgb, ppm);
    Tensor4<float> loaded = load_ppm(ppm);
    REQUIRE(loaded.same_dims(rgb));
    for (std::size_t i = 0; i < rgb.data.size(); ++i)
        CHECK(quantize_u8(loaded.data[i]) == quantize_u8(rgb.data[i]));

    const std::string pfm = temp_path("specsr_test.pfm");
    save_pfm(rgb, pfm);
    Tensor4<float> exact = load_pfm(pfm);
    REQUIRE(exact.same_dims(rgb));
    CHECK(exact.data == rgb.data);

    std::filesystem::remove(ppm);
    std::filesystem::remove(pfm);
}

TEST_CASE("reflect padding mirrors without repeating the edge") {
    Tensor4<float> x(1, 1, 1, 3);
    x.data = {1.0f, 2.0f, 3.0f};
    Tensor4<float> p = reflect_pad(x, 0);
    CHECK(p.data == x.data);

    Tensor4<float> row(1, 1, 3, 3);
    for (int i = 0; i < 9; ++i) row.data[i] = static_cast<float>(i);
    Tensor4<float> padded = reflect_pad(row, 2);
    CHECK(padded.h == 7);
    // row pattern around the left edge: [6 3 | 0 3 6] per column stride
    CHECK(padded(0, 0, 2, 2) == row(0, 0, 0, 0));
    CHECK(padded(0, 0, 2, 1) == row(0, 0, 0, 1));
    CHECK(padded(0, 0, 2, 0) == row(0, 0, 0, 2));
    CHECK(padded(0, 0, 1, 2) == row(0, 0, 1, 0));
    CHECK(padded(0, 0, 0, 2) == row(0, 0, 2, 0));

    CHECK_THROWS_AS(reflect_pad(row, 3), ShapeError);
}

TEST_CASE("dihedral transforms invert exactly") {
    std::mt19937_64 rng(50);
    Tensor4<float> x = random_image(rng, 3, 12, 17);
    for (int i = 0; i < 8; ++i) {
        Tensor4<float> round = dihedral_invert(dihedral_apply(x, i), i);
        CHECK(round.data == x.data);
    }
}
