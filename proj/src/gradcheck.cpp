#include "specsr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "specsr/model.hpp"
#include "specsr/ops.hpp"
#include "specsr/rng.hpp"

namespace specsr {

namespace {

using Td = Tensor4<double>;

Td random_tensor(std::mt19937_64& rng, int n, int c, int h, int w, double scale = 1.0) {
    Td t(n, c, h, w);
    for (double& v : t.data) v = uniform_sym(rng, scale);
    return t;
}

/// err = |a - f| / max(|a|, |f|), zero when the difference is under the floor.
double rel_err(double analytic, double fd, double abs_floor) {
    const double diff = std::abs(analytic - fd);
    if (diff <= abs_floor) return 0.0;
    return diff / std::max(std::abs(analytic), std::abs(fd));
}

constexpr double kFdStep = 1e-5;

/// Central finite difference of `loss` w.r.t. one entry of `buf`.
template <typename LossFn>
double fd_probe(std::vector<double>& buf, std::size_t i, const LossFn& loss,
                double step = kFdStep) {
    const double saved = buf[i];
    buf[i] = saved + step;
    const double up = loss();
    buf[i] = saved - step;
    const double down = loss();
    buf[i] = saved;
    return (up - down) / (2.0 * step);
}

struct Checker {
    const GradCheckOptions& opt;
    GradCheckReport& report;

    OpCheckResult* begin_op(const std::string& name) {
        report.ops.push_back({name, 0.0, 0, true});
        return &report.ops.back();
    }

    void record(OpCheckResult* r, double analytic, double fd) {
        const double e = rel_err(analytic, fd, opt.abs_floor);
        r->max_rel_err = std::max(r->max_rel_err, e);
        ++r->checked;
    }

    /// Like record, but when the probe disagrees it re-probes at h/2 and
    /// h/4 first: if those disagree with each other the loss is not smooth
    /// at this point (a PReLU kink inside the stencil) and the probe is
    /// discarded; if they agree, the refined estimate is judged.
    template <typename ReprobeFn>
    void record_smooth(OpCheckResult* r, double analytic, double fd, const ReprobeFn& reprobe) {
        double e = rel_err(analytic, fd, opt.abs_floor);
        if (e >= opt.tolerance) {
            const double fd2 = reprobe(kFdStep / 2.0);
            const double fd4 = reprobe(kFdStep / 4.0);
            if (rel_err(fd2, fd4, opt.abs_floor) > 1e-3) return;  // kink in the stencil
            e = rel_err(analytic, fd4, opt.abs_floor);
        }
        r->max_rel_err = std::max(r->max_rel_err, e);
        ++r->checked;
    }

    void finish_op(OpCheckResult* r) {
        if (r->op == opt.inject_fault) r->max_rel_err += 1.0;  // fault hook
        r->pass = r->max_rel_err < opt.tolerance;
    }
};

// Scalar probe loss: sum of the op output weighted by a fixed random mask,
// so d(loss)/d(out) is exactly the mask.

void check_conv_backward(Checker& ck, std::mt19937_64& rng) {
    OpCheckResult* r = ck.begin_op("conv_backward");
    Td x = random_tensor(rng, 2, 3, 6, 7);
    ConvFilter<double> f(4, 3, 3, 3);
    for (double& v : f.w) v = uniform_sym(rng, 0.5);
    for (double& v : f.b) v = uniform_sym(rng, 0.5);
    Td mask = random_tensor(rng, 2, 4, 4, 5);

    auto loss = [&]() {
        Td out = conv2d_valid(x, f);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) acc += out.data[i] * mask.data[i];
        return acc;
    };
    ConvGrads<double> g = conv2d_valid_backward(x, f, mask);

    for (std::size_t i = 0; i < x.data.size(); ++i)
        ck.record(r, g.input.data[i], fd_probe(x.data, i, loss));
    for (std::size_t i = 0; i < f.w.size(); ++i)
        ck.record(r, g.weights[i], fd_probe(f.w, i, loss));
    for (std::size_t i = 0; i < f.b.size(); ++i)
        ck.record(r, g.bias[i], fd_probe(f.b, i, loss));
    ck.finish_op(r);
}

void check_prelu_backward(Checker& ck, std::mt19937_64& rng) {
    OpCheckResult* r = ck.begin_op("prelu_backward");
    Td x = random_tensor(rng, 2, 3, 5, 5);
    PReluSlopes<double> s;
    s.a.resize(3);
    for (double& v : s.a) v = uniform_sym(rng, 0.5);
    Td mask = random_tensor(rng, 2, 3, 5, 5);

    auto loss = [&]() {
        Td out = prelu(x, s);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) acc += out.data[i] * mask.data[i];
        return acc;
    };
    PreluGrads<double> g = prelu_backward(x, s, mask);

    // FD across the x == 0 kink is meaningless; keep probes away from it.
    for (std::size_t i = 0; i < x.data.size(); ++i)
        if (std::abs(x.data[i]) > 10.0 * kFdStep)
            ck.record(r, g.input.data[i], fd_probe(x.data, i, loss));
    for (std::size_t i = 0; i < s.a.size(); ++i)
        ck.record(r, g.slopes[i], fd_probe(s.a, i, loss));
    ck.finish_op(r);
}

void check_center_crop_backward(Checker& ck, std::mt19937_64& rng) {
    OpCheckResult* r = ck.begin_op("center_crop_backward");
    Td x = random_tensor(rng, 1, 2, 8, 8);
    Td mask = random_tensor(rng, 1, 2, 4, 4);
    auto loss = [&]() {
        Td out = center_crop(x, 4, 4);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) acc += out.data[i] * mask.data[i];
        return acc;
    };
    Td g = center_crop_backward(mask, 8, 8);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        ck.record(r, g.data[i], fd_probe(x.data, i, loss));
    ck.finish_op(r);
}

void check_add_backward(Checker& ck, std::mt19937_64& rng) {
    OpCheckResult* r = ck.begin_op("add_backward");
    Td a = random_tensor(rng, 1, 2, 4, 4);
    Td b = random_tensor(rng, 1, 2, 4, 4);
    Td mask = random_tensor(rng, 1, 2, 4, 4);
    auto loss = [&]() {
        Td out = add(a, b);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) acc += out.data[i] * mask.data[i];
        return acc;
    };
    // add passes the gradient through unchanged to both operands
    for (std::size_t i = 0; i < a.data.size(); ++i)
        ck.record(r, mask.data[i], fd_probe(a.data, i, loss));
    for (std::size_t i = 0; i < b.data.size(); ++i)
        ck.record(r, mask.data[i], fd_probe(b.data, i, loss));
    ck.finish_op(r);
}

void check_l2_loss_grad(Checker& ck, std::mt19937_64& rng) {
    OpCheckResult* r = ck.begin_op("l2_loss_grad");
    Td pred = random_tensor(rng, 2, 3, 4, 4);
    Td label = random_tensor(rng, 2, 3, 4, 4);
    auto loss = [&]() { return l2_loss(pred, label).first; };
    Td g = l2_loss(pred, label).second;
    for (std::size_t i = 0; i < pred.data.size(); ++i)
        ck.record(r, g.data[i], fd_probe(pred.data, i, loss));
    ck.finish_op(r);
}

void check_model(Checker& ck, std::mt19937_64& rng, const std::string& op_name,
                 const ModelConfig& config, int input_side, long samples_per_buffer) {
    OpCheckResult* r = ck.begin_op(op_name);
    ModelParams<double> params = init_params<double>(config, rng());
    Td x = random_tensor(rng, 1, kInputChannels, input_side, input_side, 0.5);
    const int out_side = input_side - (receptive_field(config) - 1);
    Td mask = random_tensor(rng, 1, config.out_channels, out_side, out_side);

    auto loss = [&]() {
        Td out = forward(params, x);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) acc += out.data[i] * mask.data[i];
        return acc;
    };
    BackwardResult<double> back = backward(params, x, mask);

    auto check_entry = [&](std::vector<double>& buf, double analytic, std::size_t i) {
        ck.record_smooth(r, analytic, fd_probe(buf, i, loss),
                         [&](double step) { return fd_probe(buf, i, loss, step); });
    };

    auto grad_buffers = param_buffers(back.grads);
    auto buffers = param_buffers(params);
    for (std::size_t bi = 0; bi < buffers.size(); ++bi) {
        std::vector<double>& buf = *buffers[bi];
        const std::vector<double>& gbuf = *grad_buffers[bi];
        if (buf.empty()) continue;
        if (samples_per_buffer <= 0 ||
            samples_per_buffer >= static_cast<long>(buf.size())) {
            for (std::size_t i = 0; i < buf.size(); ++i) check_entry(buf, gbuf[i], i);
        } else {
            for (long s = 0; s < samples_per_buffer; ++s) {
                const std::size_t i = bounded_uint(rng, buf.size());
                check_entry(buf, gbuf[i], i);
            }
        }
    }
    // Input gradient, sampled the same way.
    const long input_samples =
        samples_per_buffer <= 0 ? static_cast<long>(x.data.size())
                                : std::min<long>(samples_per_buffer * 4,
                                                 static_cast<long>(x.data.size()));
    if (input_samples >= static_cast<long>(x.data.size())) {
        for (std::size_t i = 0; i < x.data.size(); ++i)
            check_entry(x.data, back.grad_input.data[i], i);
    } else {
        for (long s = 0; s < input_samples; ++s) {
            const std::size_t i = bounded_uint(rng, x.data.size());
            check_entry(x.data, back.grad_input.data[i], i);
        }
    }
    ck.finish_op(r);
}

}  // namespace

GradCheckReport run_gradcheck(const GradCheckOptions& options) {
    GradCheckReport report;
    Checker ck{options, report};
    std::mt19937_64 rng(mix_seed(options.seed, 0x9c));

    check_conv_backward(ck, rng);
    check_prelu_backward(ck, rng);
    check_center_crop_backward(ck, rng);
    check_add_backward(ck, rng);
    check_l2_loss_grad(ck, rng);

    ModelConfig small;
    small.n_res_blocks = 2;
    small.n_features = 8;
    small.n_bottleneck = 4;
    small.out_channels = 5;
    check_model(ck, rng, "model_backward_small", small, 20, 0);  // every parameter

    check_model(ck, rng, "model_backward_default", ModelConfig{}, 20, 24);

    report.all_pass = std::all_of(report.ops.begin(), report.ops.end(),
                                  [](const OpCheckResult& r) { return r.pass; });
    return report;
}

}  // namespace specsr
