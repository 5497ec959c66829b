#pragma once

#include <vector>

#include "tdn/fft.hpp"
#include "tdn/geometry.hpp"
#include "tdn/mat.hpp"

namespace tdn {

// Traversal order and Hermitian-mirror bookkeeping for the non-redundant half
// spectrum (columns 0..w/2) of an h x w real-input DFT. Entries are sorted by
// non-decreasing radius, ties by ascending angle, so low frequencies come
// first.
struct HalfSpectrumPlan {
    struct Pos {
        int u, v;        // DFT grid indices
        double radius;   // |(fu, fv)| with fu the signed vertical frequency
        double angle;    // atan2(fu, fv), in [-pi/2, pi/2]
        bool has_mirror;
        int mu, mv;      // conjugate-mirror indices when has_mirror
    };
    int h = 0, w = 0, length = 0;
    std::vector<Pos> pos;

    // Cached per (h, w).
    static const HalfSpectrumPlan& get(int h, int w);
};

// Unrolled half spectrum as (amplitude, phase) pairs with polar positions.
struct FourierSequence {
    int src_h = 0, src_w = 0;
    std::vector<double> amp;    // >= 0
    std::vector<double> phase;  // in (-pi, pi]

    int length() const { return static_cast<int>(amp.size()); }
    const HalfSpectrumPlan& plan() const { return HalfSpectrumPlan::get(src_h, src_w); }
};

// Convert the DFT of a real-valued input into a FourierSequence. Rejects
// spectra that are not Hermitian-symmetric within 1e-6 (relative to the
// largest magnitude, floored at 1).
FourierSequence unroll_half_spectrum(const std::vector<cd>& spec, int h, int w);

// Rebuild the full Hermitian spectrum from the sequence, inverse DFT, return
// the real part.
Mat reroll_and_idft(const FourierSequence& seq, int h, int w);

// Amplitude normalization used by the encodings: log(1 + a) scaled by the
// sequence's maximum log-amplitude (0 when the sequence is all zero).
std::vector<double> normalized_amplitudes(const FourierSequence& seq);
double log_amp_scale(const FourierSequence& seq);

// Per-coefficient embedding: first half lifts (normalized amplitude, cos phi,
// sin phi), second half is a fixed sinusoidal encoding of (radius, angle).
// F must be even and >= 8. Result is length x F.
Mat encode_fde(const FourierSequence& seq, int F);

// Max-abs deviation between the unit-max-normalized 1D spectrum of projection
// row `angle_index` and the matching central slice of the image's 2D spectrum
// (bilinearly interpolated on a zero-padded grid).
double check_fourier_slice(const Image& img, const Geometry& geom, int angle_index,
                           double step = 0.5);

}  // namespace tdn
