#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "specsr/hypercube.hpp"
#include "specsr/model.hpp"
#include "specsr/tensor.hpp"

namespace specsr {

using Predictor = std::function<Tensor4<float>(const Tensor4<float>&)>;

/// Whole-image prediction. The input is reflect-padded by half the
/// network's total shrinkage so the output cube matches the input size.
/// tile == 0 runs the padded image in one pass; tile >= receptive field
/// covers it with overlapping tiles instead (same values, bounded memory).
Tensor4<float> predict_tensor(const ModelParams<float>& params, const Tensor4<float>& rgb,
                              int tile = 0);

HyperCube predict_image(const ModelParams<float>& params, const Tensor4<float>& rgb,
                        std::vector<float> wavelengths, int tile = 0);

/// The 8 dihedral round-trips of `predict`: transform, predict, map back.
std::vector<Tensor4<float>> dihedral_members(const Predictor& predict,
                                             const Tensor4<float>& rgb);

/// Mean of the 8 members, averaged pairwise so that 8 identical members
/// reproduce their value bitwise.
Tensor4<float> dihedral_average(const Predictor& predict, const Tensor4<float>& rgb);

/// Enhanced prediction: dihedral_average over predict_tensor.
Tensor4<float> enhanced_predict_tensor(const ModelParams<float>& params,
                                       const Tensor4<float>& rgb, int tile = 0);

HyperCube enhanced_predict(const ModelParams<float>& params, const Tensor4<float>& rgb,
                           std::vector<float> wavelengths, int tile = 0);

/// Number of predict_tensor invocations since the last reset. Enhanced
/// prediction performs 8 per image, plain prediction 1.
std::uint64_t predict_call_count();
void reset_predict_call_count();

}  // namespace specsr
