#pragma once

#include <array>
#include <string>
#include <vector>

#include "specsr/tensor.hpp"

namespace specsr {

/// Radiance cube: C spectral planes of h x w floats with the band centers
/// in nm. Planes are stored band-major, matching Tensor4 (1, C, h, w).
struct HyperCube {
    int h = 0, w = 0;
    std::vector<float> wavelengths;
    std::vector<float> data;

    HyperCube() = default;
    HyperCube(int h_, int w_, std::vector<float> wavelengths_);

    int bands() const { return static_cast<int>(wavelengths.size()); }
    std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }
    float* plane(int b) { return data.data() + static_cast<std::size_t>(b) * plane_size(); }
    const float* plane(int b) const {
        return data.data() + static_cast<std::size_t>(b) * plane_size();
    }
    float& at(int b, int y, int x) {
        return data[(static_cast<std::size_t>(b) * h + y) * w + x];
    }
    float at(int b, int y, int x) const {
        return data[(static_cast<std::size_t>(b) * h + y) * w + x];
    }

    /// Checks sizes and strictly increasing wavelengths.
    void validate() const;
};

/// The 31 standard band centers, 400..700 nm in 10 nm steps.
std::vector<float> standard_wavelengths();

// HSCB container: magic "HSCB", u16 version (1), u32 h, w, c, then c f32
// wavelengths, then c planes of h*w f32. All scalars little-endian.
// Round-trips are bit-exact for every finite value including denormals.

void save_cube(const HyperCube& cube, const std::string& path);
HyperCube load_cube(const std::string& path);

/// Three spectral sensitivity curves on a common wavelength grid: a color
/// matching function (x,y,z) or a camera response (r,g,b).
struct SpectralResponse {
    std::string name;
    std::vector<float> wavelengths;
    std::array<std::vector<float>, 3> curves;

    void validate() const;
};

/// CIE 1964 10-degree standard observer at the 31 standard band centers.
SpectralResponse cie1964_observer();

/// CSV with a header line, then `wavelength_nm,c1,c2,c3` rows.
SpectralResponse load_response_csv(const std::string& path);
void save_response_csv(const SpectralResponse& resp, const std::string& path);

/// Projects the cube through the response: per pixel and output channel,
/// the trapezoid-weighted sum over bands of response(lambda) * radiance,
/// with the response linearly interpolated at each band center. The result
/// is scaled so its global maximum is 1.0 (all-zero cubes stay zero).
Tensor4<float> synthesize_rgb(const HyperCube& cube, const SpectralResponse& resp);

/// Same projection without the final normalization; linear in the cube.
Tensor4<float> synthesize_rgb_raw(const HyperCube& cube, const SpectralResponse& resp);

Tensor4<float> cube_to_tensor(const HyperCube& cube);
HyperCube tensor_to_cube(const Tensor4<float>& t, std::vector<float> wavelengths);

}  // namespace specsr
