#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "specsr/data_pipeline.hpp"
#include "specsr/model.hpp"

namespace specsr {

/// Training hyperparameters. Defaults are the reference recipe: Adam at
/// 5e-4 decayed by 0.93 every 50k of 400k iterations, batches of 64
/// patches of 36 -> 20 pixels.
struct TrainConfig {
    double lr0 = 0.0005;
    double decay_factor = 0.93;
    long decay_every = 50000;
    long total_iters = 400000;
    int batch_size = 64;
    int patch_in = 36;
    int patch_out = 20;
    std::uint64_t seed = 0;

    /// Also checks patch_in - patch_out == receptive_field(model) - 1.
    void validate(const ModelConfig& model) const;
};

/// Step-decay schedule: lr0 * decay_factor^floor(iter / decay_every),
/// evaluated by repeated multiplication so consecutive segments are exact
/// products. Iteration decay_every is the first decayed step.
double lr_at(const TrainConfig& config, long iter);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First and second moment estimates, mirroring the parameter shapes.
struct AdamState {
    ModelParams<float> m;
    ModelParams<float> v;
    long t = 0;
    AdamConfig config;
};

AdamState make_adam_state(const ModelConfig& config, AdamConfig adam = {});

/// One bias-corrected Adam update over a flat buffer; `t` is the 1-based
/// step number.
void adam_step_buffer(float* param, const float* grad, float* m, float* v, std::size_t len,
                      long t, const AdamConfig& config, double lr);

/// Applies one Adam step to every parameter; increments state.t once.
void adam_step(ModelParams<float>& params, ModelParams<float>& grads, AdamState& state,
               double lr);

struct LossRecord {
    long iter = 0;
    double lr = 0.0;
    double loss = 0.0;
};

/// Artifact-level knobs of the training driver (not part of the recipe).
struct TrainOptions {
    long start_iter = 0;
    long log_every = 100;
    long checkpoint_every = 0;  // 0 = final checkpoint only
    std::string run_dir;        // empty = no files written
    std::function<void(const LossRecord&)> on_log;
};

struct TrainResult {
    ModelParams<float> params;
    std::vector<LossRecord> history;
};

/// Runs the training loop: sample a batch uniformly with replacement,
/// forward, l2 loss, backward, Adam step at lr_at(iter). Batch sampling at
/// iteration k is a pure function of (seed, k), so resumed runs sample the
/// same batches they would have seen. Throws NumericalError naming the
/// iteration if the loss goes non-finite.
TrainResult train(ModelParams<float> params, const TrainConfig& config,
                  const std::vector<PatchPair>& dataset, const TrainOptions& options = {});

}  // namespace specsr
