#pragma once

#include <cstdint>

#include "tdn/geometry.hpp"
#include "tdn/mat.hpp"

namespace tdn {

// Forward projection: entry (i, j) is the line integral of the image along
// the ray at angles[i], detector offset (j - M/2) * spacing. Bilinear
// interpolation along equidistant sample points of length `step` pixels.
Sinogram radon(const Image& img, const Geometry& geom, double step = 0.5);

// Exact adjoint of radon under the same sampling: identical sample points,
// transposed interpolation weights.
Image backproject(const Sinogram& sino, const Geometry& geom, double step = 0.5);

// Ramp (Ram-Lak) filtering of each detector row in the frequency domain,
// apodized by a raised-cosine (Hann) window. Self-adjoint.
Mat filter_rows_ramp(const Mat& sino, double detector_spacing);

// Filtered back-projection, scaled by pi/N (and detector spacing) so the
// reconstruction amplitude is view-count independent.
Image fbp(const Sinogram& sino, const Geometry& geom, double step = 0.5);

// Deterministic random superposition of 3..8 ellipses, clipped to [0, 1].
// At least one ellipse covers >= 10% of the grid. Requires h, w >= 16.
Image make_phantom(uint64_t seed, int h, int w);

// Fixed head-like ellipse phantom with intensities in [0, 1].
Image shepp_logan(int h, int w);

namespace detail {
// Shared ray-sampling kernel. For every (view, detector, sample) the bilinear
// footprint weights are visited in a fixed order; `forward` accumulates
// image->sinogram, otherwise the transpose. `det_center_shift` offsets the
// detector grid in bins (used by the simulation pipeline).
void project_rays(const Geometry& geom, double step, double det_center_shift, bool forward,
                  const Mat& img_in, Mat* sino_out, const Mat* sino_in, Mat* img_out);
}  // namespace detail

}  // namespace tdn
