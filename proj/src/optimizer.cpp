#include "specsr/optimizer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "specsr/rng.hpp"

namespace specsr {

void TrainConfig::validate(const ModelConfig& model) const {
    if (lr0 <= 0.0) throw ConfigError("TrainConfig: lr0 must be > 0");
    if (decay_factor <= 0.0 || decay_factor > 1.0)
        throw ConfigError("TrainConfig: decay_factor must be in (0, 1]");
    if (decay_every < 1) throw ConfigError("TrainConfig: decay_every must be >= 1");
    if (total_iters < 0) throw ConfigError("TrainConfig: total_iters must be >= 0");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    const int rf = receptive_field(model);
    if (patch_in - patch_out != rf - 1)
        throw ConfigError("TrainConfig: patch_in - patch_out (" +
                          std::to_string(patch_in - patch_out) +
                          ") must equal receptive_field - 1 (" + std::to_string(rf - 1) + ")");
    if (patch_out < 1) throw ConfigError("TrainConfig: patch_out must be >= 1");
}

double lr_at(const TrainConfig& config, long iter) {
    if (iter < 0) throw ConfigError("lr_at: iteration must be >= 0");
    const long k = iter / config.decay_every;
    double lr = config.lr0;
    for (long i = 0; i < k; ++i) lr *= config.decay_factor;
    return lr;
}

AdamState make_adam_state(const ModelConfig& config, AdamConfig adam) {
    AdamState st;
    st.m = make_params<float>(config);
    st.v = make_params<float>(config);
    st.t = 0;
    st.config = adam;
    return st;
}

void adam_step_buffer(float* param, const float* grad, float* m, float* v, std::size_t len,
                      long t, const AdamConfig& config, double lr) {
    const double b1 = config.beta1, b2 = config.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(len); ++i) {
        const double g = grad[i];
        const double mi = b1 * m[i] + (1.0 - b1) * g;
        const double vi = b2 * v[i] + (1.0 - b2) * g * g;
        m[i] = static_cast<float>(mi);
        v[i] = static_cast<float>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        param[i] = static_cast<float>(param[i] - lr * mhat / (std::sqrt(vhat) + config.epsilon));
    }
}

void adam_step(ModelParams<float>& params, ModelParams<float>& grads, AdamState& state,
               double lr) {
    if (!(lr > 0.0)) throw ConfigError("adam_step: lr must be > 0");
    auto pb = param_buffers(params);
    auto gb = param_buffers(grads);
    auto mb = param_buffers(state.m);
    auto vb = param_buffers(state.v);
    if (pb.size() != gb.size() || pb.size() != mb.size())
        throw ShapeError("adam_step: parameter/gradient/moment structure mismatch");
    ++state.t;
    for (std::size_t i = 0; i < pb.size(); ++i) {
        if (pb[i]->size() != gb[i]->size() || pb[i]->size() != mb[i]->size() ||
            pb[i]->size() != vb[i]->size())
            throw ShapeError("adam_step: buffer " + std::to_string(i) + " length mismatch (" +
                             std::to_string(pb[i]->size()) + " vs " +
                             std::to_string(gb[i]->size()) + ")");
        adam_step_buffer(pb[i]->data(), gb[i]->data(), mb[i]->data(), vb[i]->data(),
                         pb[i]->size(), state.t, state.config, lr);
    }
}

namespace {

void assemble_batch(const std::vector<PatchPair>& dataset, const std::vector<std::size_t>& idx,
                    Tensor4<float>& rgb, Tensor4<float>& label) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(idx.size()); ++b) {
        const PatchPair& p = dataset[idx[b]];
        std::copy(p.rgb.data.begin(), p.rgb.data.end(),
                  rgb.data.begin() + static_cast<std::size_t>(b) * p.rgb.size());
        std::copy(p.label.data.begin(), p.label.data.end(),
                  label.data.begin() + static_cast<std::size_t>(b) * p.label.size());
    }
}

std::string checkpoint_name(long iter) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ckpt_%08ld.srck", iter);
    return buf;
}

}  // namespace

TrainResult train(ModelParams<float> params, const TrainConfig& config,
                  const std::vector<PatchPair>& dataset, const TrainOptions& options) {
    config.validate(params.config);
    if (dataset.empty()) throw ConfigError("train: empty dataset");
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& p = dataset[i];
        if (p.rgb.n != 1 || p.rgb.c != kInputChannels || p.rgb.h != config.patch_in ||
            p.rgb.w != config.patch_in)
            throw ShapeError("train: patch " + std::to_string(i) + " rgb dims (" +
                             p.rgb.dims_str() + ") != (1," + std::to_string(kInputChannels) +
                             "," + std::to_string(config.patch_in) + "," +
                             std::to_string(config.patch_in) + ")");
        if (p.label.n != 1 || p.label.c != params.config.out_channels ||
            p.label.h != config.patch_out || p.label.w != config.patch_out)
            throw ShapeError("train: patch " + std::to_string(i) + " label dims (" +
                             p.label.dims_str() + ") != (1," +
                             std::to_string(params.config.out_channels) + "," +
                             std::to_string(config.patch_out) + "," +
                             std::to_string(config.patch_out) + ")");
    }

    namespace fs = std::filesystem;
    std::ofstream loss_csv;
    if (!options.run_dir.empty()) {
        fs::create_directories(options.run_dir);
        fs::create_directories(fs::path(options.run_dir) / "checkpoints");
        const auto loss_path = fs::path(options.run_dir) / "loss.csv";
        const bool fresh = !fs::exists(loss_path) || options.start_iter == 0;
        loss_csv.open(loss_path, fresh ? std::ios::trunc : std::ios::app);
        if (!loss_csv) throw IoError("cannot open loss log: " + loss_path.string());
        if (fresh) loss_csv << "iter,lr,loss\n";
    }

    AdamState adam = make_adam_state(params.config);
    adam.t = options.start_iter;  // keeps bias correction consistent on resume

    TrainResult result;
    Tensor4<float> batch_rgb(config.batch_size, kInputChannels, config.patch_in, config.patch_in);
    Tensor4<float> batch_label(config.batch_size, params.config.out_channels, config.patch_out,
                               config.patch_out);
    std::vector<std::size_t> idx(config.batch_size);

    auto emit = [&](const LossRecord& rec) {
        result.history.push_back(rec);
        if (loss_csv) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%ld,%.10g,%.10g\n", rec.iter, rec.lr, rec.loss);
            loss_csv << buf << std::flush;
        }
        if (options.on_log) options.on_log(rec);
    };

    for (long iter = options.start_iter; iter < config.total_iters; ++iter) {
        std::mt19937_64 rng(mix_seed(config.seed, static_cast<std::uint64_t>(iter)));
        for (int b = 0; b < config.batch_size; ++b)
            idx[b] = bounded_uint(rng, dataset.size());
        assemble_batch(dataset, idx, batch_rgb, batch_label);

        ForwardTrace<float> trace = forward_trace(params, batch_rgb);
        auto [loss, grad_pred] = l2_loss(trace.output, batch_label);
        if (!std::isfinite(loss))
            throw NumericalError("train: non-finite loss at iteration " + std::to_string(iter));

        const double lr = lr_at(config, iter);
        BackwardResult<float> back = backward_from_trace(params, batch_rgb, trace, grad_pred);
        adam_step(params, back.grads, adam, lr);

        if (options.log_every > 0 &&
            (iter % options.log_every == 0 || iter + 1 == config.total_iters))
            emit({iter, lr, loss});
        if (!options.run_dir.empty() && options.checkpoint_every > 0 &&
            (iter + 1) % options.checkpoint_every == 0 && iter + 1 != config.total_iters)
            save_checkpoint(params, (std::filesystem::path(options.run_dir) / "checkpoints" /
                                     checkpoint_name(iter + 1))
                                        .string());
    }

    if (!options.run_dir.empty())
        save_checkpoint(params, (std::filesystem::path(options.run_dir) / "checkpoints" /
                                 checkpoint_name(config.total_iters))
                                    .string());

    result.params = std::move(params);
    return result;
}

}  // namespace specsr
