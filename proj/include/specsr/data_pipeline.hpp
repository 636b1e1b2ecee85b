#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "specsr/hypercube.hpp"
#include "specsr/tensor.hpp"

namespace specsr {

/// One training sample: an RGB patch and the spatially centered label
/// window of the cube. The label window is the rgb window shrunk by
/// (patch_in - patch_out) / 2 pixels per side.
struct PatchPair {
    Tensor4<float> rgb;    // (1, 3, patch_in, patch_in)
    Tensor4<float> label;  // (1, bands, patch_out, patch_out)
};

/// Cuts aligned patch pairs on a regular stride grid. `label_src` must be
/// spatially registered with `rgb` (same h, w). Images smaller than
/// patch_in yield an empty list.
std::vector<PatchPair> extract_patches(const Tensor4<float>& rgb,
                                       const Tensor4<float>& label_src, int patch_in,
                                       int patch_out, int stride);

/// One member of the augmentation set: rotation quarter-turns, optional
/// horizontal flip, downscale numerator (10 = none, 9/8/7 = x0.9/0.8/0.7).
struct AugmentSpec {
    int rot = 0;
    bool flip = false;
    int scale_num = 10;

    bool operator==(const AugmentSpec&) const = default;
};

/// The 32 augmentation members: {4 rotations} x {no flip, horizontal flip}
/// x {scale 1.0, 0.9, 0.8, 0.7}, identity first.
std::vector<AugmentSpec> augment_specs();

/// Applies one member to a registered pair; both receive the identical
/// geometric transform (scale, then flip, then rotation).
std::pair<Tensor4<float>, Tensor4<float>> apply_augment(const Tensor4<float>& rgb,
                                                        const Tensor4<float>& cube,
                                                        const AugmentSpec& spec);

struct AugmentedPair {
    AugmentSpec spec;
    Tensor4<float> rgb;
    Tensor4<float> cube;
};

/// All 32 transformed copies of a pair.
std::vector<AugmentedPair> augment(const Tensor4<float>& rgb, const Tensor4<float>& cube);

/// Full training-set preparation for one image: every augmentation member
/// is generated, patched, and discarded in turn, so peak memory stays at
/// one transformed copy.
void append_patch_pool(const Tensor4<float>& rgb, const Tensor4<float>& cube, int patch_in,
                       int patch_out, int stride, std::vector<PatchPair>& pool);

// --------------------------------------------------------------------------
// Fold management
// --------------------------------------------------------------------------

enum class SplitMode { TwoFold, Provided };

/// Image-name -> fold assignment. In two-fold mode both folds train one
/// model each and every image is scored by the opposite fold's model; in
/// provided mode fold 0 is the training set and fold 1 the test set.
struct FoldSplit {
    std::vector<std::pair<std::string, int>> entries;  // file order preserved

    int fold_of(const std::string& name) const;
    std::vector<std::string> names_in_fold(int fold) const;
};

FoldSplit make_folds(const std::vector<std::string>& image_names, std::uint64_t seed);
FoldSplit load_split(const std::string& path);
void save_split(const FoldSplit& split, const std::string& path);

// --------------------------------------------------------------------------
// Raster export (for RGB previews and 8-bit metric parity checks)
// --------------------------------------------------------------------------

/// Rounds a [0,1] float to 0..255, half away from zero, clamped.
std::uint8_t quantize_u8(float v);

/// Binary PPM (P6), 8-bit, from a (1, 3, h, w) float image in [0,1].
void save_ppm(const Tensor4<float>& rgb, const std::string& path);
Tensor4<float> load_ppm(const std::string& path);

/// PFM (PF, little-endian), lossless float raster, from a (1, 3, h, w) image.
void save_pfm(const Tensor4<float>& rgb, const std::string& path);
Tensor4<float> load_pfm(const std::string& path);

}  // namespace specsr
