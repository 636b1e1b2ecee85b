#include "specsr/model.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>

#include "specsr/rng.hpp"

namespace specsr {

void ModelConfig::validate() const {
    if (n_res_blocks < 0)
        throw ConfigError("ModelConfig: n_res_blocks must be >= 0, got " +
                          std::to_string(n_res_blocks));
    if (n_bottleneck < 1)
        throw ConfigError("ModelConfig: n_bottleneck must be >= 1, got " +
                          std::to_string(n_bottleneck));
    if (n_features < n_bottleneck)
        throw ConfigError("ModelConfig: n_features (" + std::to_string(n_features) +
                          ") must be >= n_bottleneck (" + std::to_string(n_bottleneck) + ")");
    if (out_channels < 1)
        throw ConfigError("ModelConfig: out_channels must be >= 1, got " +
                          std::to_string(out_channels));
}

int receptive_field(const ModelConfig& config) {
    config.validate();
    return 1 + 4 + 4 * config.n_res_blocks + 4;
}

template <typename T>
ModelParams<T> make_params(const ModelConfig& config) {
    config.validate();
    ModelParams<T> p;
    p.config = config;
    p.feat = ConvFilter<T>(config.n_features, kInputChannels, 5, 5);
    p.feat_act = PReluSlopes<T>(config.n_features, T(0));
    p.shrink = ConvFilter<T>(config.n_bottleneck, config.n_features, 1, 1);
    p.shrink_act = PReluSlopes<T>(config.n_bottleneck, T(0));
    p.blocks.resize(config.n_res_blocks);
    for (auto& blk : p.blocks) {
        blk.conv_a = ConvFilter<T>(config.n_bottleneck, config.n_bottleneck, 3, 3);
        blk.act_a = PReluSlopes<T>(config.n_bottleneck, T(0));
        blk.conv_b = ConvFilter<T>(config.n_bottleneck, config.n_bottleneck, 3, 3);
        blk.act_b = PReluSlopes<T>(config.n_bottleneck, T(0));
    }
    p.expand = ConvFilter<T>(config.n_features, config.n_bottleneck, 1, 1);
    p.expand_act = PReluSlopes<T>(config.n_features, T(0));
    p.recon = ConvFilter<T>(config.out_channels, config.n_features, 5, 5);
    p.skip = ConvFilter<T>(config.out_channels, kInputChannels, 7, 7);
    return p;
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed) {
    ModelParams<T> p = make_params<T>(config);
    std::mt19937_64 rng(seed);

    auto xavier = [&rng](ConvFilter<T>& f) {
        const double fan_in = static_cast<double>(f.c_in) * f.kh * f.kw;
        const double fan_out = static_cast<double>(f.c_out) * f.kh * f.kw;
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (T& w : f.w) w = static_cast<T>(uniform_sym(rng, bound));
        // biases stay zero
    };
    auto slopes = [](PReluSlopes<T>& s) {
        for (T& a : s.a) a = T(0.25);
    };

    xavier(p.feat);
    slopes(p.feat_act);
    xavier(p.shrink);
    slopes(p.shrink_act);
    for (auto& blk : p.blocks) {
        xavier(blk.conv_a);
        slopes(blk.act_a);
        xavier(blk.conv_b);
        slopes(blk.act_b);
    }
    xavier(p.expand);
    slopes(p.expand_act);
    xavier(p.recon);
    xavier(p.skip);
    return p;
}

template <typename T>
void for_each_param(ModelParams<T>& p,
                    const std::function<void(const std::string&, std::vector<T>&)>& fn) {
    fn("feat.w", p.feat.w);
    fn("feat.b", p.feat.b);
    fn("feat_act.a", p.feat_act.a);
    fn("shrink.w", p.shrink.w);
    fn("shrink.b", p.shrink.b);
    fn("shrink_act.a", p.shrink_act.a);
    for (std::size_t i = 0; i < p.blocks.size(); ++i) {
        const std::string base = "res" + std::to_string(i + 1);
        fn(base + ".conv_a.w", p.blocks[i].conv_a.w);
        fn(base + ".conv_a.b", p.blocks[i].conv_a.b);
        fn(base + ".act_a.a", p.blocks[i].act_a.a);
        fn(base + ".conv_b.w", p.blocks[i].conv_b.w);
        fn(base + ".conv_b.b", p.blocks[i].conv_b.b);
        fn(base + ".act_b.a", p.blocks[i].act_b.a);
    }
    fn("expand.w", p.expand.w);
    fn("expand.b", p.expand.b);
    fn("expand_act.a", p.expand_act.a);
    fn("recon.w", p.recon.w);
    fn("recon.b", p.recon.b);
    fn("skip.w", p.skip.w);
    fn("skip.b", p.skip.b);
}

template <typename T>
std::vector<std::vector<T>*> param_buffers(ModelParams<T>& p) {
    std::vector<std::vector<T>*> out;
    for_each_param<T>(p, [&out](const std::string&, std::vector<T>& buf) { out.push_back(&buf); });
    return out;
}

template <typename T>
static void check_input(const ModelParams<T>& p, const Tensor4<T>& rgb) {
    if (rgb.c != kInputChannels)
        throw ShapeError("forward: input channel axis c=" + std::to_string(rgb.c) +
                         " must be " + std::to_string(kInputChannels));
    const int rf = receptive_field(p.config);
    if (rgb.h < rf || rgb.w < rf)
        throw ShapeError("forward: input " + std::to_string(rgb.h) + "x" +
                         std::to_string(rgb.w) + " smaller than the receptive field " +
                         std::to_string(rf) + "x" + std::to_string(rf));
}

template <typename T>
ForwardTrace<T> forward_trace(const ModelParams<T>& p, const Tensor4<T>& rgb) {
    check_input(p, rgb);
    ForwardTrace<T> t;
    t.feat_pre = conv2d_valid(rgb, p.feat);
    t.feat_out = prelu(t.feat_pre, p.feat_act);
    t.shrink_pre = conv2d_valid(t.feat_out, p.shrink);
    t.shrink_out = prelu(t.shrink_pre, p.shrink_act);

    const Tensor4<T>* cur = &t.shrink_out;
    t.blocks.resize(p.blocks.size());
    for (std::size_t i = 0; i < p.blocks.size(); ++i) {
        auto& bt = t.blocks[i];
        bt.a_pre = conv2d_valid(*cur, p.blocks[i].conv_a);
        bt.a_out = prelu(bt.a_pre, p.blocks[i].act_a);
        bt.b_pre = conv2d_valid(bt.a_out, p.blocks[i].conv_b);
        bt.b_out = prelu(bt.b_pre, p.blocks[i].act_b);
        bt.sum = add(bt.b_out, center_crop(*cur, bt.b_out.h, bt.b_out.w));
        cur = &bt.sum;
    }

    t.expand_pre = conv2d_valid(*cur, p.expand);
    t.expand_out = prelu(t.expand_pre, p.expand_act);
    Tensor4<T> main_out = conv2d_valid(t.expand_out, p.recon);
    Tensor4<T> skip_out = conv2d_valid(rgb, p.skip);
    t.output = add(main_out, center_crop(skip_out, main_out.h, main_out.w));
    return t;
}

template <typename T>
Tensor4<T> forward(const ModelParams<T>& p, const Tensor4<T>& rgb) {
    return forward_trace(p, rgb).output;
}

template <typename T>
BackwardResult<T> backward_from_trace(const ModelParams<T>& p, const Tensor4<T>& rgb,
                                      const ForwardTrace<T>& t, const Tensor4<T>& grad_out) {
    if (!grad_out.same_dims(t.output))
        throw ShapeError("backward: grad_out dims (" + grad_out.dims_str() +
                         ") != output dims (" + t.output.dims_str() + ")");

    BackwardResult<T> r;
    r.grads = make_params<T>(p.config);

    // Output join: gradient flows unchanged into both branches.
    ConvGrads<T> skip_g = conv2d_valid_backward(
        rgb, p.skip, center_crop_backward(grad_out, rgb.h - p.skip.kh + 1, rgb.w - p.skip.kw + 1));
    r.grads.skip.w = std::move(skip_g.weights);
    r.grads.skip.b = std::move(skip_g.bias);

    const Tensor4<T>& expand_in =
        p.blocks.empty() ? t.shrink_out : t.blocks.back().sum;

    ConvGrads<T> recon_g = conv2d_valid_backward(t.expand_out, p.recon, grad_out);
    r.grads.recon.w = std::move(recon_g.weights);
    r.grads.recon.b = std::move(recon_g.bias);

    PreluGrads<T> expand_pg = prelu_backward(t.expand_pre, p.expand_act, recon_g.input);
    r.grads.expand_act.a = std::move(expand_pg.slopes);
    ConvGrads<T> expand_g = conv2d_valid_backward(expand_in, p.expand, expand_pg.input);
    r.grads.expand.w = std::move(expand_g.weights);
    r.grads.expand.b = std::move(expand_g.bias);

    Tensor4<T> grad_cur = std::move(expand_g.input);
    for (int i = static_cast<int>(p.blocks.size()) - 1; i >= 0; --i) {
        const auto& bt = t.blocks[i];
        const Tensor4<T>& block_in = (i == 0) ? t.shrink_out : t.blocks[i - 1].sum;

        PreluGrads<T> b_pg = prelu_backward(bt.b_pre, p.blocks[i].act_b, grad_cur);
        r.grads.blocks[i].act_b.a = std::move(b_pg.slopes);
        ConvGrads<T> b_g = conv2d_valid_backward(bt.a_out, p.blocks[i].conv_b, b_pg.input);
        r.grads.blocks[i].conv_b.w = std::move(b_g.weights);
        r.grads.blocks[i].conv_b.b = std::move(b_g.bias);

        PreluGrads<T> a_pg = prelu_backward(bt.a_pre, p.blocks[i].act_a, b_g.input);
        r.grads.blocks[i].act_a.a = std::move(a_pg.slopes);
        ConvGrads<T> a_g = conv2d_valid_backward(block_in, p.blocks[i].conv_a, a_pg.input);
        r.grads.blocks[i].conv_a.w = std::move(a_g.weights);
        r.grads.blocks[i].conv_a.b = std::move(a_g.bias);

        // The block skip: grad of the cropped input adds to the conv path.
        grad_cur = add(a_g.input, center_crop_backward(grad_cur, block_in.h, block_in.w));
    }

    PreluGrads<T> shrink_pg = prelu_backward(t.shrink_pre, p.shrink_act, grad_cur);
    r.grads.shrink_act.a = std::move(shrink_pg.slopes);
    ConvGrads<T> shrink_g = conv2d_valid_backward(t.feat_out, p.shrink, shrink_pg.input);
    r.grads.shrink.w = std::move(shrink_g.weights);
    r.grads.shrink.b = std::move(shrink_g.bias);

    PreluGrads<T> feat_pg = prelu_backward(t.feat_pre, p.feat_act, shrink_g.input);
    r.grads.feat_act.a = std::move(feat_pg.slopes);
    ConvGrads<T> feat_g = conv2d_valid_backward(rgb, p.feat, feat_pg.input);
    r.grads.feat.w = std::move(feat_g.weights);
    r.grads.feat.b = std::move(feat_g.bias);

    r.grad_input = add(feat_g.input, skip_g.input);
    return r;
}

template <typename T>
BackwardResult<T> backward(const ModelParams<T>& p, const Tensor4<T>& rgb,
                           const Tensor4<T>& grad_out) {
    ForwardTrace<T> t = forward_trace(p, rgb);
    return backward_from_trace(p, rgb, t, grad_out);
}

template <typename T>
std::pair<double, Tensor4<T>> l2_loss(const Tensor4<T>& pred, const Tensor4<T>& label) {
    if (!pred.same_dims(label))
        throw ShapeError("l2_loss: pred dims (" + pred.dims_str() + ") != label dims (" +
                         label.dims_str() + ")");
    const std::size_t count = pred.size();
    if (count == 0) return {0.0, Tensor4<T>(pred.n, pred.c, pred.h, pred.w)};
    double acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double d = static_cast<double>(pred.data[i]) - static_cast<double>(label.data[i]);
        acc += d * d;
    }
    Tensor4<T> grad(pred.n, pred.c, pred.h, pred.w);
    const T scale = T(2) / static_cast<T>(count);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i)
        grad.data[i] = scale * (pred.data[i] - label.data[i]);
    return {acc / static_cast<double>(count), std::move(grad)};
}

// --------------------------------------------------------------------------
// Checkpoint IO
// --------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'R', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, float v) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

struct Reader {
    std::string bytes;
    std::size_t pos = 0;
    std::string path;

    void need(std::size_t n) const {
        if (pos + n > bytes.size())
            throw IoError(path + ": truncated at byte offset " + std::to_string(pos) +
                          " (need " + std::to_string(n) + " more bytes)");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i)
            v = (v << 8) | static_cast<unsigned char>(bytes[pos + i]);
        pos += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
};

}  // namespace

void save_checkpoint(const ModelParams<float>& params, const std::string& path) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(params.config.n_res_blocks));
    put_u32(out, static_cast<std::uint32_t>(params.config.n_features));
    put_u32(out, static_cast<std::uint32_t>(params.config.n_bottleneck));
    put_u32(out, static_cast<std::uint32_t>(params.config.out_channels));

    auto put_conv = [&out](const ConvFilter<float>& f) {
        put_u32(out, static_cast<std::uint32_t>(f.c_out));
        put_u32(out, static_cast<std::uint32_t>(f.c_in));
        put_u32(out, static_cast<std::uint32_t>(f.kh));
        put_u32(out, static_cast<std::uint32_t>(f.kw));
        for (float v : f.w) put_f32(out, v);
        for (float v : f.b) put_f32(out, v);
    };
    auto put_prelu = [&out](const PReluSlopes<float>& s) {
        put_u32(out, static_cast<std::uint32_t>(s.a.size()));
        for (float v : s.a) put_f32(out, v);
    };

    put_conv(params.feat);
    put_prelu(params.feat_act);
    put_conv(params.shrink);
    put_prelu(params.shrink_act);
    for (const auto& blk : params.blocks) {
        put_conv(blk.conv_a);
        put_prelu(blk.act_a);
        put_conv(blk.conv_b);
        put_prelu(blk.act_b);
    }
    put_conv(params.expand);
    put_prelu(params.expand_act);
    put_conv(params.recon);
    put_conv(params.skip);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open checkpoint for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to checkpoint: " + path);
}

ModelParams<float> load_checkpoint(const std::string& path) {
    Reader r;
    r.path = path;
    {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot open checkpoint: " + path);
        r.bytes.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    }
    r.need(4);
    if (std::memcmp(r.bytes.data(), kMagic, 4) != 0)
        throw IoError(path + ": bad magic at byte offset 0 (expected \"SRCK\")");
    r.pos = 4;
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw IoError(path + ": unsupported checkpoint version " + std::to_string(version) +
                      " at byte offset 4");

    ModelConfig config;
    config.n_res_blocks = static_cast<int>(r.u32());
    config.n_features = static_cast<int>(r.u32());
    config.n_bottleneck = static_cast<int>(r.u32());
    config.out_channels = static_cast<int>(r.u32());
    try {
        config.validate();
    } catch (const ConfigError& e) {
        throw IoError(path + ": invalid config in header: " + e.what());
    }

    ModelParams<float> p = make_params<float>(config);

    auto get_conv = [&r, &path](ConvFilter<float>& f) {
        const std::size_t at = r.pos;
        const int c_out = static_cast<int>(r.u32());
        const int c_in = static_cast<int>(r.u32());
        const int kh = static_cast<int>(r.u32());
        const int kw = static_cast<int>(r.u32());
        if (c_out != f.c_out || c_in != f.c_in || kh != f.kh || kw != f.kw)
            throw IoError(path + ": layer dims (" + std::to_string(c_out) + "," +
                          std::to_string(c_in) + "," + std::to_string(kh) + "," +
                          std::to_string(kw) + ") at byte offset " + std::to_string(at) +
                          " do not match config (" + f.dims_str() + ")");
        for (float& v : f.w) v = r.f32();
        for (float& v : f.b) v = r.f32();
    };
    auto get_prelu = [&r, &path](PReluSlopes<float>& s) {
        const std::size_t at = r.pos;
        const std::uint32_t count = r.u32();
        if (count != s.a.size())
            throw IoError(path + ": PReLU slope count " + std::to_string(count) +
                          " at byte offset " + std::to_string(at) + " does not match config (" +
                          std::to_string(s.a.size()) + ")");
        for (float& v : s.a) v = r.f32();
    };

    get_conv(p.feat);
    get_prelu(p.feat_act);
    get_conv(p.shrink);
    get_prelu(p.shrink_act);
    for (auto& blk : p.blocks) {
        get_conv(blk.conv_a);
        get_prelu(blk.act_a);
        get_conv(blk.conv_b);
        get_prelu(blk.act_b);
    }
    get_conv(p.expand);
    get_prelu(p.expand_act);
    get_conv(p.recon);
    get_conv(p.skip);

    if (r.pos != r.bytes.size())
        throw IoError(path + ": " + std::to_string(r.bytes.size() - r.pos) +
                      " trailing bytes at byte offset " + std::to_string(r.pos));
    return p;
}

// --------------------------------------------------------------------------

#define SPECSR_INSTANTIATE_MODEL(T)                                                       \
    template ModelParams<T> make_params<T>(const ModelConfig&);                           \
    template ModelParams<T> init_params<T>(const ModelConfig&, std::uint64_t);            \
    template void for_each_param<T>(                                                      \
        ModelParams<T>&, const std::function<void(const std::string&, std::vector<T>&)>&); \
    template std::vector<std::vector<T>*> param_buffers<T>(ModelParams<T>&);              \
    template Tensor4<T> forward<T>(const ModelParams<T>&, const Tensor4<T>&);             \
    template ForwardTrace<T> forward_trace<T>(const ModelParams<T>&, const Tensor4<T>&);  \
    template BackwardResult<T> backward<T>(const ModelParams<T>&, const Tensor4<T>&,      \
                                           const Tensor4<T>&);                            \
    template BackwardResult<T> backward_from_trace<T>(                                    \
        const ModelParams<T>&, const Tensor4<T>&, const ForwardTrace<T>&,                 \
        const Tensor4<T>&);                                                               \
    template std::pair<double, Tensor4<T>> l2_loss<T>(const Tensor4<T>&, const Tensor4<T>&);

SPECSR_INSTANTIATE_MODEL(float)
SPECSR_INSTANTIATE_MODEL(double)

#undef SPECSR_INSTANTIATE_MODEL

}  // namespace specsr
