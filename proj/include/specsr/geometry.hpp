#pragma once

#include "specsr/tensor.hpp"

namespace specsr {

/// Rotates the spatial plane counter-clockwise by k quarter turns.
Tensor4<float> rot90(const Tensor4<float>& x, int k);

/// Mirrors the spatial plane left-right.
Tensor4<float> flip_h(const Tensor4<float>& x);

/// Bilinear resampling at pixel centers: source coordinate of output pixel
/// y is (y + 0.5) * h / out_h - 0.5, clamped at the borders. Channels are
/// resampled independently.
Tensor4<float> rescale_bilinear(const Tensor4<float>& x, int out_h, int out_w);

/// Reflect padding (mirror without repeating the edge sample) by `pad`
/// pixels on every spatial side. Requires h, w > pad.
Tensor4<float> reflect_pad(const Tensor4<float>& x, int pad);

// The 8 dihedral transforms, indexed 0..7 as (rot = i >> 1, flip = i & 1);
// flip is applied before the rotation.

Tensor4<float> dihedral_apply(const Tensor4<float>& x, int index);
Tensor4<float> dihedral_invert(const Tensor4<float>& x, int index);

}  // namespace specsr
