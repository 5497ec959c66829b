#pragma once

#include "tdn/mat.hpp"

namespace tdn::metrics {

// 10*log10(range^2 / mse), returning the 99 dB cap when mse < 1e-12.
double psnr(const Image& x, const Image& y, double data_range = 1.0);

double rmse(const Image& x, const Image& y);

// Gaussian-windowed SSIM (7x7, sigma 1.5, C1=(0.01 r)^2, C2=(0.03 r)^2),
// averaged over positions where the full window fits.
double ssim(const Image& x, const Image& y, double data_range = 1.0);

}  // namespace tdn::metrics
