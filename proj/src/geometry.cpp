#include "specsr/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace specsr {

Tensor4<float> rot90(const Tensor4<float>& x, int k) {
    k = ((k % 4) + 4) % 4;
    if (k == 0) return x;
    const int oh = (k % 2 == 0) ? x.h : x.w;
    const int ow = (k % 2 == 0) ? x.w : x.h;
    Tensor4<float> out(x.n, x.c, oh, ow);
#pragma omp parallel for schedule(static) collapse(2)
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c) {
            const float* src = x.plane(n, c);
            float* dst = out.plane(n, c);
            for (int y = 0; y < oh; ++y)
                for (int xx = 0; xx < ow; ++xx) {
                    int sy = 0, sx = 0;
                    switch (k) {
                        case 1: sy = xx; sx = x.w - 1 - y; break;
                        case 2: sy = x.h - 1 - y; sx = x.w - 1 - xx; break;
                        default: sy = x.h - 1 - xx; sx = y; break;  // k == 3
                    }
                    dst[static_cast<std::size_t>(y) * ow + xx] =
                        src[static_cast<std::size_t>(sy) * x.w + sx];
                }
        }
    return out;
}

Tensor4<float> flip_h(const Tensor4<float>& x) {
    Tensor4<float> out(x.n, x.c, x.h, x.w);
#pragma omp parallel for schedule(static) collapse(2)
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c) {
            const float* src = x.plane(n, c);
            float* dst = out.plane(n, c);
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx)
                    dst[static_cast<std::size_t>(y) * x.w + xx] =
                        src[static_cast<std::size_t>(y) * x.w + (x.w - 1 - xx)];
        }
    return out;
}

Tensor4<float> rescale_bilinear(const Tensor4<float>& x, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1)
        throw ShapeError("rescale_bilinear: target " + std::to_string(out_h) + "x" +
                         std::to_string(out_w) + " must be >= 1 per side");
    if (out_h == x.h && out_w == x.w) return x;
    Tensor4<float> out(x.n, x.c, out_h, out_w);
    const double sy = static_cast<double>(x.h) / out_h;
    const double sx = static_cast<double>(x.w) / out_w;
#pragma omp parallel for schedule(static) collapse(2)
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c) {
            const float* src = x.plane(n, c);
            float* dst = out.plane(n, c);
            for (int y = 0; y < out_h; ++y) {
                const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, x.h - 1.0);
                const int y0 = static_cast<int>(fy);
                const int y1 = std::min(y0 + 1, x.h - 1);
                const double wy = fy - y0;
                for (int xx = 0; xx < out_w; ++xx) {
                    const double fx = std::clamp((xx + 0.5) * sx - 0.5, 0.0, x.w - 1.0);
                    const int x0 = static_cast<int>(fx);
                    const int x1 = std::min(x0 + 1, x.w - 1);
                    const double wx = fx - x0;
                    const double v00 = src[static_cast<std::size_t>(y0) * x.w + x0];
                    const double v01 = src[static_cast<std::size_t>(y0) * x.w + x1];
                    const double v10 = src[static_cast<std::size_t>(y1) * x.w + x0];
                    const double v11 = src[static_cast<std::size_t>(y1) * x.w + x1];
                    dst[static_cast<std::size_t>(y) * out_w + xx] = static_cast<float>(
                        (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11));
                }
            }
        }
    return out;
}

Tensor4<float> reflect_pad(const Tensor4<float>& x, int pad) {
    if (pad < 0) throw ShapeError("reflect_pad: negative pad");
    if (pad == 0) return x;
    if (x.h <= pad || x.w <= pad)
        throw ShapeError("reflect_pad: pad " + std::to_string(pad) + " needs input > " +
                         std::to_string(pad) + " per side, got " + std::to_string(x.h) + "x" +
                         std::to_string(x.w));
    auto mirror = [](int i, int size) {
        const int period = 2 * (size - 1);
        i = ((i % period) + period) % period;
        return i < size ? i : period - i;
    };
    Tensor4<float> out(x.n, x.c, x.h + 2 * pad, x.w + 2 * pad);
#pragma omp parallel for schedule(static) collapse(2)
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c) {
            const float* src = x.plane(n, c);
            float* dst = out.plane(n, c);
            for (int y = 0; y < out.h; ++y) {
                const int sy = mirror(y - pad, x.h);
                for (int xx = 0; xx < out.w; ++xx)
                    dst[static_cast<std::size_t>(y) * out.w + xx] =
                        src[static_cast<std::size_t>(sy) * x.w + mirror(xx - pad, x.w)];
            }
        }
    return out;
}

Tensor4<float> dihedral_apply(const Tensor4<float>& x, int index) {
    if (index < 0 || index > 7)
        throw ConfigError("dihedral_apply: index must be 0..7, got " + std::to_string(index));
    const Tensor4<float>& flipped = (index & 1) ? flip_h(x) : x;
    return rot90(flipped, index >> 1);
}

Tensor4<float> dihedral_invert(const Tensor4<float>& x, int index) {
    if (index < 0 || index > 7)
        throw ConfigError("dihedral_invert: index must be 0..7, got " + std::to_string(index));
    Tensor4<float> unrot = rot90(x, (4 - (index >> 1)) % 4);
    return (index & 1) ? flip_h(unrot) : unrot;
}

}  // namespace specsr
