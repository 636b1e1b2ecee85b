#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "specsr/ops.hpp"
#include "specsr/rng.hpp"

using namespace specsr;

namespace {

Tensor4<float> random_tensor(std::mt19937_64& rng, int n, int c, int h, int w) {
    Tensor4<float> t(n, c, h, w);
    for (float& v : t.data) v = static_cast<float>(uniform_sym(rng, 1.0));
    return t;
}

ConvFilter<float> random_filter(std::mt19937_64& rng, int co, int ci, int kh, int kw) {
    ConvFilter<float> f(co, ci, kh, kw);
    for (float& v : f.w) v = static_cast<float>(uniform_sym(rng, 0.5));
    for (float& v : f.b) v = static_cast<float>(uniform_sym(rng, 0.5));
    return f;
}

double max_rel_diff(const std::vector<float>& a, const std::vector<float>& b) {
    REQUIRE(a.size() == b.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = std::abs(static_cast<double>(a[i]) - b[i]);
        const double mag = std::max({std::abs(static_cast<double>(a[i])),
                                     std::abs(static_cast<double>(b[i])), 1e-12});
        worst = std::max(worst, diff / mag);
    }
    return worst;
}

}  // namespace

TEST_CASE("valid conv output shapes follow the shape law") {
    std::mt19937_64 rng(11);
    Tensor4<float> x = random_tensor(rng, 1, 3, 36, 36);

    ConvFilter<float> feat(128, 3, 5, 5);
    Tensor4<float> y = conv2d_valid(x, feat);
    CHECK(y.n == 1);
    CHECK(y.c == 128);
    CHECK(y.h == 32);
    CHECK(y.w == 32);

    ConvFilter<float> skip(31, 3, 7, 7);
    Tensor4<float> z = conv2d_valid(x, skip);
    CHECK(z.c == 31);
    CHECK(z.h == 30);
    CHECK(z.w == 30);
}

TEST_CASE("valid conv shape law holds across random shapes") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        const int kh = 1 + 2 * static_cast<int>(bounded_uint(rng, 3));
        const int kw = 1 + 2 * static_cast<int>(bounded_uint(rng, 3));
        const int h = kh + static_cast<int>(bounded_uint(rng, 8));
        const int w = kw + static_cast<int>(bounded_uint(rng, 8));
        const int ci = 1 + static_cast<int>(bounded_uint(rng, 4));
        const int co = 1 + static_cast<int>(bounded_uint(rng, 4));
        Tensor4<float> x = random_tensor(rng, 1 + static_cast<int>(bounded_uint(rng, 2)), ci, h, w);
        ConvFilter<float> f = random_filter(rng, co, ci, kh, kw);
        Tensor4<float> y = conv2d_valid(x, f);
        CHECK(y.h == h - kh + 1);
        CHECK(y.w == w - kw + 1);
        CHECK(y.c == co);
        CHECK(y.n == x.n);
    }
}

TEST_CASE("all-ones 3x3 conv sums to 9") {
    Tensor4<float> x(1, 1, 3, 3);
    for (float& v : x.data) v = 1.0f;
    ConvFilter<float> f(1, 1, 3, 3);
    for (float& v : f.w) v = 1.0f;
    Tensor4<float> y = conv2d_valid(x, f);
    CHECK(y.h == 1);
    CHECK(y.w == 1);
    CHECK(y.data[0] == doctest::Approx(9.0f));
}

TEST_CASE("fast conv matches the serial direct reference") {
    std::mt19937_64 rng(13);
    Tensor4<float> x = random_tensor(rng, 2, 3, 8, 8);
    ConvFilter<float> f = random_filter(rng, 4, 3, 3, 3);
    Tensor4<float> fast = conv2d_valid(x, f);
    Tensor4<float> ref = conv2d_valid_ref(x, f);
    CHECK(max_rel_diff(fast.data, ref.data) < 1e-5);
}

TEST_CASE("fast conv matches the reference on 100 random shapes") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + static_cast<int>(bounded_uint(rng, 2));
        const int ci = 1 + static_cast<int>(bounded_uint(rng, 4));
        const int co = 1 + static_cast<int>(bounded_uint(rng, 5));
        const int kh = 1 + 2 * static_cast<int>(bounded_uint(rng, 3));
        const int kw = 1 + 2 * static_cast<int>(bounded_uint(rng, 3));
        const int h = kh + static_cast<int>(bounded_uint(rng, 10 - kh + 1));
        const int w = kw + static_cast<int>(bounded_uint(rng, 10 - kw + 1));
        Tensor4<float> x = random_tensor(rng, n, ci, h, w);
        ConvFilter<float> f = random_filter(rng, co, ci, kh, kw);
        CHECK(max_rel_diff(conv2d_valid(x, f).data, conv2d_valid_ref(x, f).data) < 1e-5);
    }
}

TEST_CASE("conv backward matches the serial reference") {
    std::mt19937_64 rng(15);
    Tensor4<float> x = random_tensor(rng, 2, 3, 7, 9);
    ConvFilter<float> f = random_filter(rng, 5, 3, 3, 5);
    Tensor4<float> gout = random_tensor(rng, 2, 5, 5, 5);
    ConvGrads<float> fast = conv2d_valid_backward(x, f, gout);
    ConvGrads<float> ref = conv2d_valid_backward_ref(x, f, gout);
    CHECK(max_rel_diff(fast.input.data, ref.input.data) < 1e-4);
    CHECK(max_rel_diff(fast.weights, ref.weights) < 1e-4);
    CHECK(max_rel_diff(fast.bias, ref.bias) < 1e-4);
}

TEST_CASE("conv backward of zero grad_out is zero") {
    std::mt19937_64 rng(16);
    Tensor4<float> x = random_tensor(rng, 1, 2, 6, 6);
    ConvFilter<float> f = random_filter(rng, 3, 2, 3, 3);
    Tensor4<float> gout(1, 3, 4, 4);
    ConvGrads<float> g = conv2d_valid_backward(x, f, gout);
    for (float v : g.input.data) CHECK(v == 0.0f);
    for (float v : g.weights) CHECK(v == 0.0f);
    for (float v : g.bias) CHECK(v == 0.0f);
}

TEST_CASE("1x1 conv backward: grad_input is the scalar-scaled grad_out") {
    std::mt19937_64 rng(17);
    Tensor4<float> x = random_tensor(rng, 1, 1, 4, 4);
    ConvFilter<float> f(1, 1, 1, 1);
    const float weight = 0.75f;
    f.w[0] = weight;
    Tensor4<float> gout = random_tensor(rng, 1, 1, 4, 4);
    ConvGrads<float> g = conv2d_valid_backward(x, f, gout);
    for (std::size_t i = 0; i < gout.data.size(); ++i)
        CHECK(g.input.data[i] == doctest::Approx(weight * gout.data[i]));
}

TEST_CASE("conv rejects mismatched shapes naming the axis") {
    Tensor4<float> x(1, 3, 8, 8);
    ConvFilter<float> f(4, 2, 3, 3);
    CHECK_THROWS_WITH_AS(conv2d_valid(x, f),
                         doctest::Contains("channel axis c=3"), ShapeError);
    ConvFilter<float> big(4, 3, 9, 9);
    CHECK_THROWS_WITH_AS(conv2d_valid(x, big), doctest::Contains("height h=8"), ShapeError);
    Tensor4<float> gout(1, 4, 5, 5);
    ConvFilter<float> ok(4, 3, 3, 3);
    CHECK_THROWS_WITH_AS(conv2d_valid_backward(x, ok, gout), doctest::Contains("grad_out"),
                         ShapeError);
}

TEST_CASE("prelu elementwise rule") {
    Tensor4<float> x(1, 2, 1, 2);
    x(0, 0, 0, 0) = 2.0f;
    x(0, 0, 0, 1) = -1.0f;
    x(0, 1, 0, 0) = 0.0f;
    x(0, 1, 0, 1) = -3.0f;
    PReluSlopes<float> s;
    s.a = {0.25f, 0.9f};
    Tensor4<float> y = prelu(x, s);
    CHECK(y(0, 0, 0, 0) == 2.0f);
    CHECK(y(0, 0, 0, 1) == doctest::Approx(-0.25f));
    CHECK(y(0, 1, 0, 0) == 0.0f);
    CHECK(y(0, 1, 0, 1) == doctest::Approx(-2.7f));
}

TEST_CASE("prelu is exact identity on positive input and positively homogeneous") {
    std::mt19937_64 rng(18);
    Tensor4<float> x = random_tensor(rng, 1, 3, 6, 6);
    PReluSlopes<float> s;
    s.a = {0.3f, -0.2f, 0.7f};

    Tensor4<float> pos = x;
    for (float& v : pos.data) v = std::abs(v) + 0.01f;
    Tensor4<float> y = prelu(pos, s);
    for (std::size_t i = 0; i < y.data.size(); ++i) CHECK(y.data[i] == pos.data[i]);

    const float lambda = 2.0f;  // power of two: scaling is exact
    Tensor4<float> xs = x;
    for (float& v : xs.data) v *= lambda;
    Tensor4<float> lhs = prelu(xs, s);
    Tensor4<float> rhs = prelu(x, s);
    for (std::size_t i = 0; i < lhs.data.size(); ++i)
        CHECK(lhs.data[i] == lambda * rhs.data[i]);
}

TEST_CASE("prelu backward hand case and zero-slope-grad case") {
    Tensor4<float> x(1, 1, 1, 1);
    x.data[0] = -2.0f;
    PReluSlopes<float> s;
    s.a = {0.5f};
    Tensor4<float> gout(1, 1, 1, 1);
    gout.data[0] = 1.0f;
    PreluGrads<float> g = prelu_backward(x, s, gout);
    CHECK(g.input.data[0] == doctest::Approx(0.5f));
    CHECK(g.slopes[0] == doctest::Approx(-2.0f));

    std::mt19937_64 rng(19);
    Tensor4<float> pos = random_tensor(rng, 2, 3, 4, 4);
    for (float& v : pos.data) v = std::abs(v) + 0.01f;
    PReluSlopes<float> s3;
    s3.a = {0.1f, 0.2f, 0.3f};
    Tensor4<float> go = random_tensor(rng, 2, 3, 4, 4);
    PreluGrads<float> g3 = prelu_backward(pos, s3, go);
    for (float v : g3.slopes) CHECK(v == 0.0f);
    for (std::size_t i = 0; i < go.data.size(); ++i) CHECK(g3.input.data[i] == go.data[i]);
}

TEST_CASE("prelu rejects slope-count mismatch") {
    Tensor4<float> x(1, 3, 2, 2);
    PReluSlopes<float> s;
    s.a = {0.1f, 0.2f};
    CHECK_THROWS_AS(prelu(x, s), ShapeError);
    CHECK_THROWS_AS(prelu_backward(x, s, x), ShapeError);
}

TEST_CASE("center crop: hand-indexed window, identity, and composition") {
    Tensor4<float> x(1, 1, 4, 4);
    for (int i = 0; i < 16; ++i) x.data[i] = static_cast<float>(i + 1);
    Tensor4<float> y = center_crop(x, 2, 2);
    CHECK(y(0, 0, 0, 0) == 6.0f);
    CHECK(y(0, 0, 0, 1) == 7.0f);
    CHECK(y(0, 0, 1, 0) == 10.0f);
    CHECK(y(0, 0, 1, 1) == 11.0f);

    Tensor4<float> same = center_crop(x, 4, 4);
    for (std::size_t i = 0; i < x.data.size(); ++i) CHECK(same.data[i] == x.data[i]);

    std::mt19937_64 rng(20);
    Tensor4<float> big = random_tensor(rng, 1, 2, 10, 10);
    Tensor4<float> once = center_crop(big, 4, 4);
    Tensor4<float> twice = center_crop(center_crop(big, 8, 8), 4, 4);
    for (std::size_t i = 0; i < once.data.size(); ++i) CHECK(once.data[i] == twice.data[i]);
}

TEST_CASE("center crop dims from the residual pipeline") {
    Tensor4<float> x(1, 31, 30, 30);
    Tensor4<float> y = center_crop(x, 20, 20);
    CHECK(y.c == 31);
    CHECK(y.h == 20);
    CHECK(y.w == 20);
}

TEST_CASE("center crop rejects bad targets") {
    Tensor4<float> x(1, 1, 4, 4);
    CHECK_THROWS_WITH_AS(center_crop(x, 6, 4), doctest::Contains("exceeds"), ShapeError);
    CHECK_THROWS_WITH_AS(center_crop(x, 3, 4), doctest::Contains("even"), ShapeError);
}

TEST_CASE("center crop backward embeds at the window") {
    std::mt19937_64 rng(21);
    Tensor4<float> gout = random_tensor(rng, 1, 1, 2, 2);
    Tensor4<float> g = center_crop_backward(gout, 4, 4);
    CHECK(g(0, 0, 1, 1) == gout(0, 0, 0, 0));
    CHECK(g(0, 0, 1, 2) == gout(0, 0, 0, 1));
    CHECK(g(0, 0, 0, 0) == 0.0f);
    CHECK(g(0, 0, 3, 3) == 0.0f);
}

TEST_CASE("add: identity, hand case, commutativity") {
    Tensor4<float> x(1, 1, 1, 2);
    x.data = {1.0f, 2.0f};
    Tensor4<float> y(1, 1, 1, 2);
    y.data = {3.0f, 4.0f};
    Tensor4<float> z = add(x, y);
    CHECK(z.data[0] == 4.0f);
    CHECK(z.data[1] == 6.0f);

    Tensor4<float> zeros(1, 1, 1, 2);
    Tensor4<float> same = add(x, zeros);
    CHECK(same.data[0] == x.data[0]);
    CHECK(same.data[1] == x.data[1]);

    std::mt19937_64 rng(22);
    Tensor4<float> a = random_tensor(rng, 2, 3, 5, 5);
    Tensor4<float> b = random_tensor(rng, 2, 3, 5, 5);
    Tensor4<float> ab = add(a, b);
    Tensor4<float> ba = add(b, a);
    for (std::size_t i = 0; i < ab.data.size(); ++i) CHECK(ab.data[i] == ba.data[i]);

    Tensor4<float> bad(1, 3, 5, 5);
    CHECK_THROWS_AS(add(a, bad), ShapeError);
}

TEST_CASE("kernels are bitwise identical serial vs parallel") {
    std::mt19937_64 rng(23);
    Tensor4<float> x = random_tensor(rng, 4, 3, 12, 12);
    ConvFilter<float> f = random_filter(rng, 8, 3, 3, 3);

    Tensor4<float> a, b;
    ConvGrads<float> ga, gb;
    Tensor4<float> gout = random_tensor(rng, 4, 8, 10, 10);
#ifdef _OPENMP
    omp_set_num_threads(1);
#endif
    a = conv2d_valid(x, f);
    ga = conv2d_valid_backward(x, f, gout);
#ifdef _OPENMP
    omp_set_num_threads(2);
#endif
    b = conv2d_valid(x, f);
    gb = conv2d_valid_backward(x, f, gout);
    CHECK(a.data == b.data);
    CHECK(ga.input.data == gb.input.data);
    CHECK(ga.weights == gb.weights);
    CHECK(ga.bias == gb.bias);
}
