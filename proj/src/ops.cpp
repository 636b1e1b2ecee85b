#include "specsr/ops.hpp"

#include <algorithm>
#include <cstring>

namespace specsr {

namespace {

template <typename T>
void check_conv_pre(const Tensor4<T>& x, const ConvFilter<T>& f) {
    f.validate_dims();
    if (f.w.size() != f.weight_count())
        throw ShapeError("conv2d: weight buffer has " + std::to_string(f.w.size()) +
                         " elements, dims (" + f.dims_str() + ") require " +
                         std::to_string(f.weight_count()));
    if (f.b.size() != static_cast<std::size_t>(f.c_out))
        throw ShapeError("conv2d: bias length " + std::to_string(f.b.size()) +
                         " != c_out " + std::to_string(f.c_out));
    if (x.c != f.c_in)
        throw ShapeError("conv2d: input channel axis c=" + std::to_string(x.c) +
                         " does not match filter c_in=" + std::to_string(f.c_in));
    if (x.h < f.kh)
        throw ShapeError("conv2d: input height h=" + std::to_string(x.h) +
                         " smaller than kernel kh=" + std::to_string(f.kh));
    if (x.w < f.kw)
        throw ShapeError("conv2d: input width w=" + std::to_string(x.w) +
                         " smaller than kernel kw=" + std::to_string(f.kw));
}

template <typename T>
void check_conv_grad_out(const Tensor4<T>& x, const ConvFilter<T>& f,
                         const Tensor4<T>& gout) {
    const int oh = x.h - f.kh + 1, ow = x.w - f.kw + 1;
    if (gout.n != x.n || gout.c != f.c_out || gout.h != oh || gout.w != ow)
        throw ShapeError("conv2d backward: grad_out dims (" + gout.dims_str() +
                         ") != forward output dims (" + std::to_string(x.n) + "," +
                         std::to_string(f.c_out) + "," + std::to_string(oh) + "," +
                         std::to_string(ow) + ")");
}

template <typename T>
T dot(const T* a, const T* b, std::size_t len) {
    T acc = T(0);
    for (std::size_t i = 0; i < len; ++i) acc += a[i] * b[i];
    return acc;
}

/// Transposed, spatially flipped copy of f: (c_in, c_out, kh, kw), zero bias.
/// Valid convolution of the (kh-1, kw-1) zero-padded output gradient with
/// this filter is exactly the input gradient.
template <typename T>
ConvFilter<T> flip_transpose(const ConvFilter<T>& f) {
    ConvFilter<T> t(f.c_in, f.c_out, f.kh, f.kw);
    for (int co = 0; co < f.c_out; ++co)
        for (int ci = 0; ci < f.c_in; ++ci)
            for (int y = 0; y < f.kh; ++y)
                for (int x = 0; x < f.kw; ++x)
                    t.wat(ci, co, y, x) = f.wat(co, ci, f.kh - 1 - y, f.kw - 1 - x);
    return t;
}

}  // namespace

namespace detail {

template <typename T>
void gemm_acc(const T* A, const T* B, T* C, int M, int N, int K, bool parallel) {
#pragma omp parallel for schedule(static) if (parallel)
    for (int m = 0; m < M; ++m) {
        T* crow = C + static_cast<std::size_t>(m) * N;
        const T* arow = A + static_cast<std::size_t>(m) * K;
        int k = 0;
        // Four B rows per pass over crow, accumulated one after another so
        // every element sees the same k-sequential FMA chain as the direct
        // reference kernel.
        for (; k + 4 <= K; k += 4) {
            const T a0 = arow[k], a1 = arow[k + 1], a2 = arow[k + 2], a3 = arow[k + 3];
            const T* b0 = B + static_cast<std::size_t>(k) * N;
            const T* b1 = b0 + N;
            const T* b2 = b1 + N;
            const T* b3 = b2 + N;
            for (int j = 0; j < N; ++j) {
                T t = crow[j];
                t += a0 * b0[j];
                t += a1 * b1[j];
                t += a2 * b2[j];
                t += a3 * b3[j];
                crow[j] = t;
            }
        }
        for (; k < K; ++k) {
            const T a = arow[k];
            const T* brow = B + static_cast<std::size_t>(k) * N;
            for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
        }
    }
}

template <typename T>
void im2col(const T* x, int c, int h, int w, int kh, int kw, T* col) {
    const int oh = h - kh + 1, ow = w - kw + 1;
    const std::size_t patch = static_cast<std::size_t>(oh) * ow;
    for (int ci = 0; ci < c; ++ci) {
        const T* src = x + static_cast<std::size_t>(ci) * h * w;
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                T* dst = col + ((static_cast<std::size_t>(ci) * kh + ky) * kw + kx) * patch;
                for (int oy = 0; oy < oh; ++oy) {
                    const T* s = src + static_cast<std::size_t>(oy + ky) * w + kx;
                    std::copy(s, s + ow, dst + static_cast<std::size_t>(oy) * ow);
                }
            }
    }
}

template void gemm_acc<float>(const float*, const float*, float*, int, int, int, bool);
template void gemm_acc<double>(const double*, const double*, double*, int, int, int, bool);
template void im2col<float>(const float*, int, int, int, int, int, float*);
template void im2col<double>(const double*, int, int, int, int, int, double*);

}  // namespace detail

template <typename T>
Tensor4<T> conv2d_valid(const Tensor4<T>& x, const ConvFilter<T>& f) {
    check_conv_pre(x, f);
    const int oh = x.h - f.kh + 1, ow = x.w - f.kw + 1;
    const int k = f.c_in * f.kh * f.kw;
    const std::size_t patch = static_cast<std::size_t>(oh) * ow;
    Tensor4<T> out(x.n, f.c_out, oh, ow);

    auto run_sample = [&](int n, T* col, bool par) {
        detail::im2col(x.plane(n, 0), x.c, x.h, x.w, f.kh, f.kw, col);
        T* o = out.plane(n, 0);
        for (int co = 0; co < f.c_out; ++co)
            std::fill(o + co * patch, o + (co + 1) * patch, f.b[co]);
        detail::gemm_acc(f.w.data(), col, o, f.c_out, oh * ow, k, par);
    };

    if (x.n > 1) {
#pragma omp parallel
        {
            std::vector<T> col(static_cast<std::size_t>(k) * patch);
#pragma omp for schedule(static)
            for (int n = 0; n < x.n; ++n) run_sample(n, col.data(), false);
        }
    } else if (x.n == 1) {
        std::vector<T> col(static_cast<std::size_t>(k) * patch);
        run_sample(0, col.data(), true);
    }
    return out;
}

template <typename T>
ConvGrads<T> conv2d_valid_backward(const Tensor4<T>& x, const ConvFilter<T>& f,
                                   const Tensor4<T>& gout) {
    check_conv_pre(x, f);
    check_conv_grad_out(x, f, gout);
    const int oh = gout.h, ow = gout.w;
    const int k = f.c_in * f.kh * f.kw;
    const std::size_t patch = static_cast<std::size_t>(oh) * ow;

    ConvGrads<T> g;
    g.weights.assign(f.weight_count(), T(0));
    g.bias.assign(static_cast<std::size_t>(f.c_out), T(0));

#pragma omp parallel for schedule(static)
    for (int co = 0; co < f.c_out; ++co) {
        T acc = T(0);
        for (int n = 0; n < gout.n; ++n) {
            const T* go = gout.plane(n, co);
            for (std::size_t p = 0; p < patch; ++p) acc += go[p];
        }
        g.bias[co] = acc;
    }

    // Weight gradient: batch loop stays sequential, rows of the weight
    // matrix are parallel, so accumulation order is fixed.
    std::vector<T> col(static_cast<std::size_t>(k) * patch);
    for (int n = 0; n < x.n; ++n) {
        detail::im2col(x.plane(n, 0), x.c, x.h, x.w, f.kh, f.kw, col.data());
#pragma omp parallel for schedule(static)
        for (int co = 0; co < f.c_out; ++co) {
            const T* go = gout.plane(n, co);
            T* gw = g.weights.data() + static_cast<std::size_t>(co) * k;
            for (int j = 0; j < k; ++j)
                gw[j] += dot(go, col.data() + static_cast<std::size_t>(j) * patch, patch);
        }
    }

    Tensor4<T> gpad = zero_pad(gout, f.kh - 1, f.kw - 1);
    g.input = conv2d_valid(gpad, flip_transpose(f));
    return g;
}

template <typename T>
Tensor4<T> conv2d_valid_ref(const Tensor4<T>& x, const ConvFilter<T>& f) {
    check_conv_pre(x, f);
    const int oh = x.h - f.kh + 1, ow = x.w - f.kw + 1;
    Tensor4<T> out(x.n, f.c_out, oh, ow);
    for (int n = 0; n < x.n; ++n)
        for (int co = 0; co < f.c_out; ++co)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    T acc = f.b[co];
                    for (int ci = 0; ci < f.c_in; ++ci)
                        for (int ky = 0; ky < f.kh; ++ky)
                            for (int kx = 0; kx < f.kw; ++kx)
                                acc += x(n, ci, oy + ky, ox + kx) * f.wat(co, ci, ky, kx);
                    out(n, co, oy, ox) = acc;
                }
    return out;
}

template <typename T>
ConvGrads<T> conv2d_valid_backward_ref(const Tensor4<T>& x, const ConvFilter<T>& f,
                                       const Tensor4<T>& gout) {
    check_conv_pre(x, f);
    check_conv_grad_out(x, f, gout);
    const int oh = gout.h, ow = gout.w;

    ConvGrads<T> g;
    g.input = Tensor4<T>(x.n, x.c, x.h, x.w);
    g.weights.assign(f.weight_count(), T(0));
    g.bias.assign(static_cast<std::size_t>(f.c_out), T(0));

    for (int n = 0; n < x.n; ++n)
        for (int co = 0; co < f.c_out; ++co)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const T go = gout(n, co, oy, ox);
                    g.bias[co] += go;
                    for (int ci = 0; ci < f.c_in; ++ci)
                        for (int ky = 0; ky < f.kh; ++ky)
                            for (int kx = 0; kx < f.kw; ++kx) {
                                g.weights[f.widx(co, ci, ky, kx)] += x(n, ci, oy + ky, ox + kx) * go;
                                g.input(n, ci, oy + ky, ox + kx) += f.wat(co, ci, ky, kx) * go;
                            }
                }
    return g;
}

template <typename T>
Tensor4<T> prelu(const Tensor4<T>& x, const PReluSlopes<T>& s) {
    if (static_cast<int>(s.a.size()) != x.c)
        throw ShapeError("prelu: " + std::to_string(s.a.size()) + " slopes for c=" +
                         std::to_string(x.c) + " channels");
    Tensor4<T> y(x.n, x.c, x.h, x.w);
    const std::size_t plane = x.plane_size();
#pragma omp parallel for schedule(static) collapse(2)
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c) {
            const T a = s.a[c];
            const T* px = x.plane(n, c);
            T* py = y.plane(n, c);
            for (std::size_t p = 0; p < plane; ++p)
                py[p] = px[p] > T(0) ? px[p] : a * px[p];
        }
    return y;
}

template <typename T>
PreluGrads<T> prelu_backward(const Tensor4<T>& x, const PReluSlopes<T>& s,
                             const Tensor4<T>& gout) {
    if (static_cast<int>(s.a.size()) != x.c)
        throw ShapeError("prelu backward: " + std::to_string(s.a.size()) +
                         " slopes for c=" + std::to_string(x.c) + " channels");
    if (!x.same_dims(gout))
        throw ShapeError("prelu backward: grad_out dims (" + gout.dims_str() +
                         ") != input dims (" + x.dims_str() + ")");
    PreluGrads<T> g;
    g.input = Tensor4<T>(x.n, x.c, x.h, x.w);
    g.slopes.assign(s.a.size(), T(0));
    const std::size_t plane = x.plane_size();
#pragma omp parallel for schedule(static)
    for (int c = 0; c < x.c; ++c) {
        const T a = s.a[c];
        T sacc = T(0);
        for (int n = 0; n < x.n; ++n) {
            const T* px = x.plane(n, c);
            const T* pg = gout.plane(n, c);
            T* pi = g.input.plane(n, c);
            for (std::size_t p = 0; p < plane; ++p) {
                if (px[p] > T(0)) {
                    pi[p] = pg[p];
                } else {
                    pi[p] = a * pg[p];
                    sacc += px[p] * pg[p];
                }
            }
        }
        g.slopes[c] = sacc;
    }
    return g;
}

template <typename T>
Tensor4<T> add(const Tensor4<T>& a, const Tensor4<T>& b) {
    if (!a.same_dims(b))
        throw ShapeError("add: dims (" + a.dims_str() + ") != (" + b.dims_str() + ")");
    Tensor4<T> out(a.n, a.c, a.h, a.w);
    const std::size_t total = a.size();
    const T* pa = a.data.data();
    const T* pb = b.data.data();
    T* po = out.data.data();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(total); ++i)
        po[i] = pa[i] + pb[i];
    return out;
}

template <typename T>
Tensor4<T> center_crop(const Tensor4<T>& x, int target_h, int target_w) {
    if (target_h > x.h || target_w > x.w)
        throw ShapeError("center_crop: target " + std::to_string(target_h) + "x" +
                         std::to_string(target_w) + " exceeds source " +
                         std::to_string(x.h) + "x" + std::to_string(x.w));
    if ((x.h - target_h) % 2 != 0 || (x.w - target_w) % 2 != 0)
        throw ShapeError("center_crop: difference must be even per axis, got h " +
                         std::to_string(x.h) + "->" + std::to_string(target_h) + ", w " +
                         std::to_string(x.w) + "->" + std::to_string(target_w));
    const int oy = (x.h - target_h) / 2, ox = (x.w - target_w) / 2;
    Tensor4<T> out(x.n, x.c, target_h, target_w);
#pragma omp parallel for schedule(static) collapse(2)
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c) {
            const T* src = x.plane(n, c);
            T* dst = out.plane(n, c);
            for (int y = 0; y < target_h; ++y)
                std::copy(src + static_cast<std::size_t>(y + oy) * x.w + ox,
                          src + static_cast<std::size_t>(y + oy) * x.w + ox + target_w,
                          dst + static_cast<std::size_t>(y) * target_w);
        }
    return out;
}

template <typename T>
Tensor4<T> center_crop_backward(const Tensor4<T>& gout, int h, int w) {
    if (gout.h > h || gout.w > w)
        throw ShapeError("center_crop backward: window " + std::to_string(gout.h) + "x" +
                         std::to_string(gout.w) + " exceeds target " + std::to_string(h) +
                         "x" + std::to_string(w));
    if ((h - gout.h) % 2 != 0 || (w - gout.w) % 2 != 0)
        throw ShapeError("center_crop backward: difference must be even per axis");
    const int oy = (h - gout.h) / 2, ox = (w - gout.w) / 2;
    Tensor4<T> out(gout.n, gout.c, h, w);
#pragma omp parallel for schedule(static) collapse(2)
    for (int n = 0; n < gout.n; ++n)
        for (int c = 0; c < gout.c; ++c) {
            const T* src = gout.plane(n, c);
            T* dst = out.plane(n, c);
            for (int y = 0; y < gout.h; ++y)
                std::copy(src + static_cast<std::size_t>(y) * gout.w,
                          src + static_cast<std::size_t>(y + 1) * gout.w,
                          dst + static_cast<std::size_t>(y + oy) * w + ox);
        }
    return out;
}

template <typename T>
Tensor4<T> zero_pad(const Tensor4<T>& x, int pad_h, int pad_w) {
    if (pad_h < 0 || pad_w < 0)
        throw ShapeError("zero_pad: negative padding");
    Tensor4<T> out(x.n, x.c, x.h + 2 * pad_h, x.w + 2 * pad_w);
#pragma omp parallel for schedule(static) collapse(2)
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c) {
            const T* src = x.plane(n, c);
            T* dst = out.plane(n, c);
            for (int y = 0; y < x.h; ++y)
                std::copy(src + static_cast<std::size_t>(y) * x.w,
                          src + static_cast<std::size_t>(y + 1) * x.w,
                          dst + static_cast<std::size_t>(y + pad_h) * out.w + pad_w);
        }
    return out;
}

#define SPECSR_INSTANTIATE_OPS(T)                                                          \
    template Tensor4<T> conv2d_valid<T>(const Tensor4<T>&, const ConvFilter<T>&);          \
    template ConvGrads<T> conv2d_valid_backward<T>(const Tensor4<T>&, const ConvFilter<T>&, \
                                                   const Tensor4<T>&);                     \
    template Tensor4<T> conv2d_valid_ref<T>(const Tensor4<T>&, const ConvFilter<T>&);      \
    template ConvGrads<T> conv2d_valid_backward_ref<T>(const Tensor4<T>&,                  \
                                                       const ConvFilter<T>&,               \
                                                       const Tensor4<T>&);                 \
    template Tensor4<T> prelu<T>(const Tensor4<T>&, const PReluSlopes<T>&);                \
    template PreluGrads<T> prelu_backward<T>(const Tensor4<T>&, const PReluSlopes<T>&,     \
                                             const Tensor4<T>&);                           \
    template Tensor4<T> add<T>(const Tensor4<T>&, const Tensor4<T>&);                      \
    template Tensor4<T> center_crop<T>(const Tensor4<T>&, int, int);                       \
    template Tensor4<T> center_crop_backward<T>(const Tensor4<T>&, int, int);              \
    template Tensor4<T> zero_pad<T>(const Tensor4<T>&, int, int);

SPECSR_INSTANTIATE_OPS(float)
SPECSR_INSTANTIATE_OPS(double)

#undef SPECSR_INSTANTIATE_OPS

}  // namespace specsr
