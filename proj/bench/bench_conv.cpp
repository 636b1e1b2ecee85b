// Times the two convolution routes against each other on the network's
// real layer shapes: the serial direct reference and the OpenMP im2col +
// GEMM path, forward and backward, plus a whole-network forward.
//
//   bench_conv [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "specsr/model.hpp"
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
    for (float& v : f.w) v = static_cast<float>(uniform_sym(rng, 0.1));
    return f;
}

template <typename Fn>
double time_best_ms(int repeats, const Fn& fn) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

double conv_gflop(const Tensor4<float>& x, const ConvFilter<float>& f) {
    const double oh = x.h - f.kh + 1, ow = x.w - f.kw + 1;
    return 2.0 * x.n * f.c_out * oh * ow * f.c_in * f.kh * f.kw / 1e9;
}

struct Case {
    const char* name;
    int n, ci, h, w, co, k;
};

}  // namespace

int main(int argc, char** argv) {
    const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
    std::mt19937_64 rng(1234);

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#endif
    std::printf("%-28s %12s %12s %9s %9s %8s\n", "case", "ref_ms", "im2col_ms", "ref_GF/s",
                "fast_GF/s", "speedup");

    const Case cases[] = {
        {"feat 5x5 3->128, 64x36^2", 64, 3, 36, 36, 128, 5},
        {"res 3x3 32->32, 64x30^2", 64, 32, 30, 30, 32, 3},
        {"recon 5x5 128->31, 64x24^2", 64, 128, 24, 24, 31, 5},
        {"skip 7x7 3->31, 1x512^2", 1, 3, 512, 512, 31, 7},
        {"feat 5x5 3->128, 1x256^2", 1, 3, 256, 256, 128, 5},
    };

    for (const Case& c : cases) {
        Tensor4<float> x = random_tensor(rng, c.n, c.ci, c.h, c.w);
        ConvFilter<float> f = random_filter(rng, c.co, c.ci, c.k, c.k);
        const double gf = conv_gflop(x, f);

        const double ref_ms = time_best_ms(repeats, [&] {
            Tensor4<float> y = conv2d_valid_ref(x, f);
            (void)y;
        });
        const double fast_ms = time_best_ms(repeats, [&] {
            Tensor4<float> y = conv2d_valid(x, f);
            (void)y;
        });
        std::printf("%-28s %12.2f %12.2f %9.2f %9.2f %7.1fx\n", c.name, ref_ms, fast_ms,
                    1000.0 * gf / ref_ms, 1000.0 * gf / fast_ms, ref_ms / fast_ms);
    }

    {
        Tensor4<float> x = random_tensor(rng, 8, 3, 36, 36);
        ConvFilter<float> f = random_filter(rng, 32, 3, 3, 3);
        Tensor4<float> gout = random_tensor(rng, 8, 32, 34, 34);
        const double ref_ms = time_best_ms(repeats, [&] {
            ConvGrads<float> g = conv2d_valid_backward_ref(x, f, gout);
            (void)g;
        });
        const double fast_ms = time_best_ms(repeats, [&] {
            ConvGrads<float> g = conv2d_valid_backward(x, f, gout);
            (void)g;
        });
        std::printf("%-28s %12.2f %12.2f %9s %9s %7.1fx\n", "backward 3x3 3->32, 8x36^2",
                    ref_ms, fast_ms, "-", "-", ref_ms / fast_ms);
    }

    {
        ModelParams<float> params = init_params<float>(ModelConfig{}, 7);
        Tensor4<float> batch = random_tensor(rng, 64, 3, 36, 36);
        const double ms = time_best_ms(repeats, [&] {
            Tensor4<float> y = forward(params, batch);
            (void)y;
        });
        std::printf("%-28s %12s %12.2f %9s %9s %8s\n", "model fwd, 64x36^2 batch", "-", ms, "-",
                    "-", "-");
    }
    return 0;
}
