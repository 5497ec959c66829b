#include "tdn/tomo.hpp"

#include <algorithm>
#include <cmath>

#include "tdn/fft.hpp"
#include "tdn/rng.hpp"

namespace tdn {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

namespace detail {

void project_rays(const Geometry& geom, double step, double det_center_shift, bool forward,
                  const Mat& img_in, Mat* sino_out, const Mat* sino_in, Mat* img_out) {
    const int n_views = geom.num_views, n_det = geom.num_detectors;
    const int h = geom.image_h, w = geom.image_w;
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
    const double half = 0.5 * std::hypot(static_cast<double>(h), static_cast<double>(w));
    const int n_samples = static_cast<int>(std::ceil(2.0 * half / step)) + 1;

    for (int i = 0; i < n_views; ++i) {
        const double c = std::cos(geom.angles[i]), s = std::sin(geom.angles[i]);
        for (int j = 0; j < n_det; ++j) {
            const double off = (j - n_det / 2.0 + det_center_shift) * geom.detector_spacing;
            // ray: p(t) = off*(c, s) + t*(-s, c), t in [-half, half]
            const double bx = cx + off * c, by = cy + off * s;
            double acc = 0.0;
            const double sino_val = forward ? 0.0 : sino_in->at(i, j) * step;
            for (int m = 0; m < n_samples; ++m) {
                const double t = -half + m * step;
                const double x = bx - t * s;
                const double y = by + t * c;
                if (x < -1.0 || x > w || y < -1.0 || y > h) continue;
                const int c0 = static_cast<int>(std::floor(x));
                const int r0 = static_cast<int>(std::floor(y));
                const double fx = x - c0, fy = y - r0;
                const double w00 = (1 - fx) * (1 - fy), w01 = fx * (1 - fy);
                const double w10 = (1 - fx) * fy, w11 = fx * fy;
                const bool c0in = c0 >= 0 && c0 < w, c1in = c0 + 1 >= 0 && c0 + 1 < w;
                const bool r0in = r0 >= 0 && r0 < h, r1in = r0 + 1 >= 0 && r0 + 1 < h;
                if (forward) {
                    double v = 0.0;
                    if (r0in && c0in) v += w00 * img_in.at(r0, c0);
                    if (r0in && c1in) v += w01 * img_in.at(r0, c0 + 1);
                    if (r1in && c0in) v += w10 * img_in.at(r0 + 1, c0);
                    if (r1in && c1in) v += w11 * img_in.at(r0 + 1, c0 + 1);
                    acc += v;
                } else {
                    if (r0in && c0in) img_out->at(r0, c0) += w00 * sino_val;
                    if (r0in && c1in) img_out->at(r0, c0 + 1) += w01 * sino_val;
                    if (r1in && c0in) img_out->at(r0 + 1, c0) += w10 * sino_val;
                    if (r1in && c1in) img_out->at(r0 + 1, c0 + 1) += w11 * sino_val;
                }
            }
            if (forward) sino_out->at(i, j) = acc * step;
        }
    }
}

}  // namespace detail

Sinogram radon(const Image& img, const Geometry& geom, double step) {
    geom.validate();
    check(step > 0 && step <= 0.5, "radon: step must be in (0, 0.5]");
    check(img.h() == geom.image_h && img.w() == geom.image_w,
          "radon: image shape " + shape_str({img.h(), img.w()}) + " does not match geometry " +
              shape_str({geom.image_h, geom.image_w}));
    Sinogram out(geom.num_views, geom.num_detectors);
    detail::project_rays(geom, step, 0.0, true, img.data, &out.data, nullptr, nullptr);
    return out;
}

Image backproject(const Sinogram& sino, const Geometry& geom, double step) {
    geom.validate();
    check(step > 0 && step <= 0.5, "backproject: step must be in (0, 0.5]");
    check(sino.views() == geom.num_views && sino.detectors() == geom.num_detectors,
          "backproject: sinogram shape " + shape_str({sino.views(), sino.detectors()}) +
              " does not match geometry " + shape_str({geom.num_views, geom.num_detectors}));
    Image out(geom.image_h, geom.image_w);
    detail::project_rays(geom, step, 0.0, false, Mat(), nullptr, &sino.data, &out.data);
    return out;
}

Mat filter_rows_ramp(const Mat& sino, double detector_spacing) {
    const int m = sino.cols;
    const int n = next_pow2(2 * m);
    const double nyquist = 1.0 / (2.0 * detector_spacing);
    std::vector<double> filt(n);
    for (int k = 0; k < n; ++k) {
        const int ks = (k <= n / 2) ? k : k - n;
        const double nu = ks / (n * detector_spacing);
        double w = std::abs(nu) * 0.5 * (1.0 + std::cos(kPi * nu / nyquist));
        if (ks != 0) {
            // deapodize the bilinear sample/splat footprint: forward + adjoint
            // each contribute a triangle kernel, sinc^4 in frequency
            const double x = kPi * nu * detector_spacing;
            const double sinc = std::sin(x) / x;
            w /= sinc * sinc * sinc * sinc;
        }
        filt[k] = w;
    }
    Mat out(sino.rows, m);
    std::vector<cd> row(n);
    for (int i = 0; i < sino.rows; ++i) {
        std::fill(row.begin(), row.end(), cd(0, 0));
        for (int j = 0; j < m; ++j) row[j] = cd(sino.at(i, j), 0.0);
        fft(row, false);
        for (int k = 0; k < n; ++k) row[k] *= filt[k];
        fft(row, true);
        const double inv_n = 1.0 / n;
        for (int j = 0; j < m; ++j) out.at(i, j) = row[j].real() * inv_n;
    }
    return out;
}

Image fbp(const Sinogram& sino, const Geometry& geom, double step) {
    geom.validate();
    check(sino.views() == geom.num_views && sino.detectors() == geom.num_detectors,
          "fbp: sinogram shape " + shape_str({sino.views(), sino.detectors()}) +
              " does not match geometry " + shape_str({geom.num_views, geom.num_detectors}));
    Mat filtered = filter_rows_ramp(sino.data, geom.detector_spacing);
    Image img = backproject(Sinogram(std::move(filtered)), geom, step);
    const double scale = kPi / geom.num_views * geom.detector_spacing;
    for (double& v : img.data.v) v *= scale;
    return img;
}

namespace {

struct Ellipse {
    double cx, cy;     // center, fraction of (w, h) relative to image center
    double ax, ay;     // semi-axes, fraction of (w, h)
    double theta;      // rotation
    double intensity;  // additive
};

// Coverage-weighted rasterization (4x4 subsamples) so edges are band-limited
// to the grid instead of stair-stepped.
void add_ellipse(Image& img, const Ellipse& e) {
    const int h = img.h(), w = img.w();
    const double cx = (w - 1) / 2.0 + e.cx * w;
    const double cy = (h - 1) / 2.0 + e.cy * h;
    const double ax = e.ax * w, ay = e.ay * h;
    const double ct = std::cos(e.theta), st = std::sin(e.theta);
    constexpr int kSub = 4;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            int inside = 0;
            for (int sr = 0; sr < kSub; ++sr) {
                for (int sc = 0; sc < kSub; ++sc) {
                    const double dx = c + (sc + 0.5) / kSub - 0.5 - cx;
                    const double dy = r + (sr + 0.5) / kSub - 0.5 - cy;
                    const double u = (dx * ct + dy * st) / ax;
                    const double v = (-dx * st + dy * ct) / ay;
                    if (u * u + v * v <= 1.0) ++inside;
                }
            }
            if (inside) img.at(r, c) += e.intensity * inside / (kSub * kSub);
        }
    }
}

}  // namespace

Image make_phantom(uint64_t seed, int h, int w) {
    check(h >= 16 && w >= 16, "make_phantom: size must be at least 16x16");
    Rng rng(Rng::derive(seed, 0x70686e746dULL));
    Image img(h, w);
    const int n = rng.uniform_int(3, 8);
    for (int i = 0; i < n; ++i) {
        Ellipse e;
        if (i == 0) {
            // dominant ellipse, area >= pi*0.2*0.2 > 10% of the grid
            e.ax = rng.uniform(0.20, 0.42);
            e.ay = rng.uniform(0.20, 0.42);
            e.cx = rng.uniform(-0.05, 0.05);
            e.cy = rng.uniform(-0.05, 0.05);
            e.intensity = rng.uniform(0.25, 0.75);
        } else {
            e.ax = rng.uniform(0.04, 0.22);
            e.ay = rng.uniform(0.04, 0.22);
            e.cx = rng.uniform(-0.32, 0.32);
            e.cy = rng.uniform(-0.32, 0.32);
            e.intensity = rng.uniform(-0.35, 0.45);
        }
        e.theta = rng.uniform(0.0, kPi);
        add_ellipse(img, e);
    }
    for (double& v : img.data.v) v = std::clamp(v, 0.0, 1.0);
    return img;
}

Image shepp_logan(int h, int w) {
    check(h >= 16 && w >= 16, "shepp_logan: size must be at least 16x16");
    // Head-style phantom: skull ring, brain, two ventricles, small lesions.
    const Ellipse parts[] = {
        {0.00, 0.00, 0.46, 0.48, 0.0, 0.75},    // skull
        {0.00, 0.00, 0.39, 0.41, 0.0, -0.45},   // brain interior
        {-0.10, 0.00, 0.13, 0.19, 0.30, -0.10}, // left ventricle
        {0.10, 0.00, 0.13, 0.19, -0.30, -0.10}, // right ventricle
        {0.00, -0.20, 0.09, 0.06, 0.0, 0.22},   // upper lesion
        {0.00, 0.05, 0.04, 0.04, 0.0, 0.25},    // center dot
        {-0.05, 0.24, 0.05, 0.04, 0.0, 0.20},   // lower-left dot
        {0.06, 0.26, 0.04, 0.05, 0.0, 0.20},    // lower-right dot
    };
    Image img(h, w);
    for (const auto& e : parts) add_ellipse(img, e);
    for (double& v : img.data.v) v = std::clamp(v, 0.0, 1.0);
    return img;
}

}  // namespace tdn
