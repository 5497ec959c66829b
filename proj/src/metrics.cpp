#include "tdn/metrics.hpp"

#include <cmath>

namespace tdn::metrics {

namespace {

double mse_of(const Image& x, const Image& y) {
    check(x.h() == y.h() && x.w() == y.w(),
          "metrics: shapes " + shape_str({x.h(), x.w()}) + " and " + shape_str({y.h(), y.w()}) +
              " must match");
    double acc = 0;
    for (size_t i = 0; i < x.data.v.size(); ++i) {
        const double d = x.data.v[i] - y.data.v[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.data.v.size());
}

}  // namespace

double psnr(const Image& x, const Image& y, double data_range) {
    check(data_range > 0, "psnr: data_range must be positive");
    const double mse = mse_of(x, y);
    if (mse < 1e-12) return 99.0;
    return 10.0 * std::log10(data_range * data_range / mse);
}

double rmse(const Image& x, const Image& y) { return std::sqrt(mse_of(x, y)); }

double ssim(const Image& x, const Image& y, double data_range) {
    check(data_range > 0, "ssim: data_range must be positive");
    check(x.h() == y.h() && x.w() == y.w(),
          "ssim: shapes " + shape_str({x.h(), x.w()}) + " and " + shape_str({y.h(), y.w()}) +
              " must match");
    constexpr int kWin = 7, kHalf = 3;
    check(x.h() >= kWin && x.w() >= kWin, "ssim: images smaller than the 7x7 window");
    double kernel[kWin][kWin];
    double ksum = 0;
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
            const double dy = i - kHalf, dx = j - kHalf;
            kernel[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
            ksum += kernel[i][j];
        }
    for (auto& row : kernel)
        for (double& k : row) k /= ksum;

    const double c1 = (0.01 * data_range) * (0.01 * data_range);
    const double c2 = (0.03 * data_range) * (0.03 * data_range);
    double acc = 0;
    int count = 0;
    for (int r = kHalf; r < x.h() - kHalf; ++r) {
        for (int c = kHalf; c < x.w() - kHalf; ++c) {
            double mx = 0, my = 0;
            for (int i = 0; i < kWin; ++i)
                for (int j = 0; j < kWin; ++j) {
                    mx += kernel[i][j] * x.at(r + i - kHalf, c + j - kHalf);
                    my += kernel[i][j] * y.at(r + i - kHalf, c + j - kHalf);
                }
            double vx = 0, vy = 0, cov = 0;
            for (int i = 0; i < kWin; ++i)
                for (int j = 0; j < kWin; ++j) {
                    const double dx = x.at(r + i - kHalf, c + j - kHalf) - mx;
                    const double dy = y.at(r + i - kHalf, c + j - kHalf) - my;
                    vx += kernel[i][j] * dx * dx;
                    vy += kernel[i][j] * dy * dy;
                    cov += kernel[i][j] * dx * dy;
                }
            acc += ((2 * mx * my + c1) * (2 * cov + c2)) /
                   ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    }
    return acc / count;
}

}  // namespace tdn::metrics
