#pragma once

#include "specsr/tensor.hpp"

namespace specsr {

template <typename T>
struct ConvGrads {
    Tensor4<T> input;        // same dims as the forward input
    std::vector<T> weights;  // same layout as ConvFilter::w
    std::vector<T> bias;     // length c_out
};

template <typename T>
struct PreluGrads {
    Tensor4<T> input;
    std::vector<T> slopes;  // length c
};

// ---------------------------------------------------------------------------
// Valid (no padding) 2-D convolution, cross-correlation convention.
//
// Two routes exist on purpose:
//   * conv2d_valid / conv2d_valid_backward — im2col + GEMM, OpenMP-parallel.
//   * conv2d_valid_ref / conv2d_valid_backward_ref — serial direct loops,
//     kept as the correctness reference for tests and the benchmark.
//
// Every output element is accumulated by exactly one thread in a fixed
// order, so results are bitwise identical for any fixed thread count.
// ---------------------------------------------------------------------------

template <typename T>
Tensor4<T> conv2d_valid(const Tensor4<T>& x, const ConvFilter<T>& f);

template <typename T>
ConvGrads<T> conv2d_valid_backward(const Tensor4<T>& x, const ConvFilter<T>& f,
                                   const Tensor4<T>& grad_out);

template <typename T>
Tensor4<T> conv2d_valid_ref(const Tensor4<T>& x, const ConvFilter<T>& f);

template <typename T>
ConvGrads<T> conv2d_valid_backward_ref(const Tensor4<T>& x, const ConvFilter<T>& f,
                                       const Tensor4<T>& grad_out);

// Parametric ReLU, one learnable slope per channel. x == 0 takes the slope
// branch (contribution is zero in the forward value but fixes the
// subgradient convention in backward).

template <typename T>
Tensor4<T> prelu(const Tensor4<T>& x, const PReluSlopes<T>& s);

template <typename T>
PreluGrads<T> prelu_backward(const Tensor4<T>& x, const PReluSlopes<T>& s,
                             const Tensor4<T>& grad_out);

/// Elementwise sum; dims must match exactly.
template <typename T>
Tensor4<T> add(const Tensor4<T>& a, const Tensor4<T>& b);

/// Centered spatial window; both side differences must be even.
template <typename T>
Tensor4<T> center_crop(const Tensor4<T>& x, int target_h, int target_w);

/// Adjoint of center_crop: embeds grad_out into an (n, c, h, w) tensor of
/// zeros at the centered window.
template <typename T>
Tensor4<T> center_crop_backward(const Tensor4<T>& grad_out, int h, int w);

/// Zero padding by (pad_h, pad_w) on each spatial side.
template <typename T>
Tensor4<T> zero_pad(const Tensor4<T>& x, int pad_h, int pad_w);

namespace detail {

/// C(M x N) += A(M x K) * B(K x N), all row-major. Parallelizes over rows
/// of C when `parallel`; the k accumulation order per element is fixed.
template <typename T>
void gemm_acc(const T* A, const T* B, T* C, int M, int N, int K, bool parallel);

/// Unfolds one (c, h, w) image into a (c*kh*kw) x (oh*ow) patch matrix.
template <typename T>
void im2col(const T* x, int c, int h, int w, int kh, int kw, T* col);

}  // namespace detail

}  // namespace specsr
