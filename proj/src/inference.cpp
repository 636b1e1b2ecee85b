#include "specsr/inference.hpp"

#include <algorithm>
#include <atomic>

#include "specsr/geometry.hpp"

namespace specsr {

namespace {
std::atomic<std::uint64_t> g_predict_calls{0};
}

std::uint64_t predict_call_count() { return g_predict_calls.load(); }
void reset_predict_call_count() { g_predict_calls.store(0); }

Tensor4<float> predict_tensor(const ModelParams<float>& params, const Tensor4<float>& rgb,
                              int tile) {
    const int rf = receptive_field(params.config);
    if (rgb.n != 1 || rgb.c != kInputChannels)
        throw ShapeError("predict: expected a (1, 3, h, w) image, got (" + rgb.dims_str() + ")");
    if (rgb.h < rf || rgb.w < rf)
        throw ShapeError("predict: image " + std::to_string(rgb.h) + "x" +
                         std::to_string(rgb.w) + " smaller than the receptive field " +
                         std::to_string(rf) + "x" + std::to_string(rf));
    g_predict_calls.fetch_add(1);

    const int pad = (rf - 1) / 2;
    Tensor4<float> padded = reflect_pad(rgb, pad);

    if (tile == 0) return forward(params, padded);

    if (tile < rf)
        throw ConfigError("predict: tile " + std::to_string(tile) +
                          " smaller than the receptive field " + std::to_string(rf));

    const int out_h = rgb.h, out_w = rgb.w;
    const int out_tile = tile - (rf - 1);
    Tensor4<float> out(1, params.config.out_channels, out_h, out_w);
    for (int oy = 0; oy < out_h; oy += out_tile) {
        const int y0 = std::max(0, std::min(oy, out_h - out_tile));
        for (int ox = 0; ox < out_w; ox += out_tile) {
            const int x0 = std::max(0, std::min(ox, out_w - out_tile));
            Tensor4<float> tin(1, padded.c, std::min(tile, padded.h - y0),
                               std::min(tile, padded.w - x0));
            for (int c = 0; c < padded.c; ++c)
                for (int y = 0; y < tin.h; ++y)
                    std::copy(padded.plane(0, c) + static_cast<std::size_t>(y0 + y) * padded.w + x0,
                              padded.plane(0, c) + static_cast<std::size_t>(y0 + y) * padded.w +
                                  x0 + tin.w,
                              tin.plane(0, c) + static_cast<std::size_t>(y) * tin.w);
            Tensor4<float> tout = forward(params, tin);
            for (int c = 0; c < out.c; ++c)
                for (int y = 0; y < tout.h; ++y)
                    std::copy(tout.plane(0, c) + static_cast<std::size_t>(y) * tout.w,
                              tout.plane(0, c) + static_cast<std::size_t>(y + 1) * tout.w,
                              out.plane(0, c) + static_cast<std::size_t>(y0 + y) * out.w + x0);
        }
    }
    return out;
}

HyperCube predict_image(const ModelParams<float>& params, const Tensor4<float>& rgb,
                        std::vector<float> wavelengths, int tile) {
    return tensor_to_cube(predict_tensor(params, rgb, tile), std::move(wavelengths));
}

std::vector<Tensor4<float>> dihedral_members(const Predictor& predict,
                                             const Tensor4<float>& rgb) {
    std::vector<Tensor4<float>> members;
    members.reserve(8);
    for (int i = 0; i < 8; ++i)
        members.push_back(dihedral_invert(predict(dihedral_apply(rgb, i)), i));
    for (int i = 1; i < 8; ++i)
        if (!members[i].same_dims(members[0]))
            throw ShapeError("dihedral_average: member " + std::to_string(i) + " dims (" +
                             members[i].dims_str() + ") != member 0 dims (" +
                             members[0].dims_str() + ")");
    return members;
}

Tensor4<float> dihedral_average(const Predictor& predict, const Tensor4<float>& rgb) {
    std::vector<Tensor4<float>> m = dihedral_members(predict, rgb);
    Tensor4<float> out(m[0].n, m[0].c, m[0].h, m[0].w);
    const std::size_t total = out.size();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(total); ++i) {
        // Pairwise tree so that 8 equal members average to themselves exactly.
        const float s01 = m[0].data[i] + m[1].data[i];
        const float s23 = m[2].data[i] + m[3].data[i];
        const float s45 = m[4].data[i] + m[5].data[i];
        const float s67 = m[6].data[i] + m[7].data[i];
        out.data[i] = ((s01 + s23) + (s45 + s67)) * 0.125f;
    }
    return out;
}

Tensor4<float> enhanced_predict_tensor(const ModelParams<float>& params,
                                       const Tensor4<float>& rgb, int tile) {
    return dihedral_average(
        [&params, tile](const Tensor4<float>& img) { return predict_tensor(params, img, tile); },
        rgb);
}

HyperCube enhanced_predict(const ModelParams<float>& params, const Tensor4<float>& rgb,
                           std::vector<float> wavelengths, int tile) {
    return tensor_to_cube(enhanced_predict_tensor(params, rgb, tile), std::move(wavelengths));
}

}  // namespace specsr
