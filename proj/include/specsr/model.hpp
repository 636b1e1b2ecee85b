#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "specsr/ops.hpp"
#include "specsr/tensor.hpp"

namespace specsr {

inline constexpr int kInputChannels = 3;

/// Network hyperparameters. The defaults are the reference configuration:
/// two residual blocks, 128 feature maps shrunk to a 32-map bottleneck,
/// 31 output bands.
struct ModelConfig {
    int n_res_blocks = 2;
    int n_features = 128;
    int n_bottleneck = 32;
    int out_channels = 31;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// One output pixel depends on exactly this many input pixels per side:
/// 1 + 4 (5x5 head) + 4 per residual block + 4 (5x5 reconstruction).
int receptive_field(const ModelConfig& config);

/// All learnable parameters of the network.
///
/// Topology: feat 5x5 (3 -> n_features) -> PReLU -> shrink 1x1
/// (-> n_bottleneck) -> PReLU -> residual blocks (two 3x3 convs, PReLU
/// after each, input center-cropped by 2 per side added back) -> expand 1x1
/// (-> n_features) -> PReLU -> recon 5x5 (-> out_channels); a 7x7 skip conv
/// maps the RGB input directly to out_channels and is added to the
/// reconstruction after center-cropping to its size.
template <typename T>
struct ModelParams {
    ModelConfig config;

    ConvFilter<T> feat;
    PReluSlopes<T> feat_act;
    ConvFilter<T> shrink;
    PReluSlopes<T> shrink_act;

    struct ResBlock {
        ConvFilter<T> conv_a;
        PReluSlopes<T> act_a;
        ConvFilter<T> conv_b;
        PReluSlopes<T> act_b;
    };
    std::vector<ResBlock> blocks;

    ConvFilter<T> expand;
    PReluSlopes<T> expand_act;
    ConvFilter<T> recon;
    ConvFilter<T> skip;
};

/// Allocates zero-valued parameters with the shapes `config` dictates.
template <typename T>
ModelParams<T> make_params(const ModelConfig& config);

/// Xavier-uniform weights (fan as c_in*kh*kw and c_out*kh*kw), zero biases,
/// PReLU slopes at 0.25. Bitwise deterministic per seed.
template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed);

/// Visits every parameter buffer in the canonical (checkpoint) order:
/// feat.w, feat.b, feat_act.a, shrink.w, shrink.b, shrink_act.a, then per
/// block conv_a.w/.b, act_a.a, conv_b.w/.b, act_b.a, then expand.w/.b,
/// expand_act.a, recon.w/.b, skip.w/.b.
template <typename T>
void for_each_param(ModelParams<T>& p,
                    const std::function<void(const std::string&, std::vector<T>&)>& fn);

template <typename T>
std::vector<std::vector<T>*> param_buffers(ModelParams<T>& p);

/// Intermediate activations of one forward pass, retained for backward.
template <typename T>
struct ForwardTrace {
    Tensor4<T> feat_pre, feat_out;
    Tensor4<T> shrink_pre, shrink_out;
    struct BlockTrace {
        Tensor4<T> a_pre, a_out, b_pre, b_out, sum;
    };
    std::vector<BlockTrace> blocks;
    Tensor4<T> expand_pre, expand_out;
    Tensor4<T> output;
};

template <typename T>
Tensor4<T> forward(const ModelParams<T>& params, const Tensor4<T>& rgb);

template <typename T>
ForwardTrace<T> forward_trace(const ModelParams<T>& params, const Tensor4<T>& rgb);

template <typename T>
struct BackwardResult {
    ModelParams<T> grads;   // same shapes as the parameters
    Tensor4<T> grad_input;  // dims of rgb
};

template <typename T>
BackwardResult<T> backward(const ModelParams<T>& params, const Tensor4<T>& rgb,
                           const Tensor4<T>& grad_out);

template <typename T>
BackwardResult<T> backward_from_trace(const ModelParams<T>& params, const Tensor4<T>& rgb,
                                      const ForwardTrace<T>& trace,
                                      const Tensor4<T>& grad_out);

/// Mean squared error over all elements and its gradient w.r.t. pred.
template <typename T>
std::pair<double, Tensor4<T>> l2_loss(const Tensor4<T>& pred, const Tensor4<T>& label);

// ---------------------------------------------------------------------------
// Checkpoint container. Single binary file:
//   magic "SRCK", u32 version (currently 1),
//   u32 n_res_blocks, n_features, n_bottleneck, out_channels,
//   then every buffer in for_each_param order, convs as u32 dims
//   (c_out, c_in, kh, kw) + f32 weights + f32 bias, PReLU sites as
//   u32 count + f32 slopes. All scalars little-endian.
// ---------------------------------------------------------------------------

void save_checkpoint(const ModelParams<float>& params, const std::string& path);
ModelParams<float> load_checkpoint(const std::string& path);

}  // namespace specsr
