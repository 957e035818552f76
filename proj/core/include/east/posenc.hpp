#pragma once

#include <cmath>

namespace east::model {

// Fixed sin-cos encodings, factorized as concatenated temporal / vertical /
// horizontal bands that fill the feature width. Each band is the standard
// interleaved sin/cos ramp over its own dimension.
struct PosencLayout {
    int temporal = 0;  // band widths; temporal + 2*spatial == F
    int spatial = 0;
};

inline PosencLayout posenc_layout(int feat) {
    PosencLayout l;
    l.spatial = 2 * (feat / 6);
    l.temporal = feat - 2 * l.spatial;
    return l;
}

// Writes a dim-wide sin/cos band for scalar position pos into out[0..dim).
inline void sincos_band(double pos, int dim, double* out) {
    for (int q = 0; q < dim / 2; ++q) {
        const double freq = std::pow(10000.0, -2.0 * q / dim);
        out[2 * q] = std::sin(pos * freq);
        out[2 * q + 1] = std::cos(pos * freq);
    }
    if (dim % 2 == 1) out[dim - 1] = std::sin(pos);
}

// Full (t, i, j) encoding for tokenizer inputs.
inline void spatio_temporal_posenc(int t, int i, int j, int feat, double* out) {
    const PosencLayout l = posenc_layout(feat);
    sincos_band(double(t), l.temporal, out);
    sincos_band(double(i), l.spatial, out + l.temporal);
    sincos_band(double(j), l.spatial, out + l.temporal + l.spatial);
}

// Temporal-only encoding for decoder slots (future positions have no
// spatial identity); spatial bands stay zero.
inline void temporal_posenc(int t, int feat, double* out) {
    const PosencLayout l = posenc_layout(feat);
    for (int q = 0; q < feat; ++q) out[q] = 0.0;
    sincos_band(double(t), l.temporal, out);
}

}  // namespace east::model
