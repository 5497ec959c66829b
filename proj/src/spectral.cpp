#include "tdn/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "tdn/tomo.hpp"

namespace tdn {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

const HalfSpectrumPlan& HalfSpectrumPlan::get(int h, int w) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::unique_ptr<HalfSpectrumPlan>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{h, w}];
    if (!slot) {
        check(h > 0 && w > 0, "HalfSpectrumPlan: dimensions must be positive");
        auto plan = std::make_unique<HalfSpectrumPlan>();
        plan->h = h;
        plan->w = w;
        const int half_cols = w / 2 + 1;
        for (int u = 0; u < h; ++u) {
            for (int v = 0; v < half_cols; ++v) {
                Pos p;
                p.u = u;
                p.v = v;
                const int fu = (u <= h / 2) ? u : u - h;  // signed vertical frequency
                p.radius = std::hypot(static_cast<double>(fu), static_cast<double>(v));
                p.angle = std::atan2(static_cast<double>(fu), static_cast<double>(v));
                // columns 0 and w/2 (w even) are self-conjugate; both halves of
                // those columns are already in the kept range
                p.has_mirror = v != 0 && !(w % 2 == 0 && v == w / 2);
                p.mu = (h - u) % h;
                p.mv = (w - v) % w;
                plan->pos.push_back(p);
            }
        }
        std::sort(plan->pos.begin(), plan->pos.end(), [](const Pos& a, const Pos& b) {
            if (a.radius != b.radius) return a.radius < b.radius;
            if (a.angle != b.angle) return a.angle < b.angle;
            return std::pair(a.u, a.v) < std::pair(b.u, b.v);
        });
        plan->length = static_cast<int>(plan->pos.size());
        slot = std::move(plan);
    }
    return *slot;
}

FourierSequence unroll_half_spectrum(const std::vector<cd>& spec, int h, int w) {
    check(spec.size() == static_cast<size_t>(h) * w,
          "unroll_half_spectrum: spectrum size does not match " + shape_str({h, w}));
    double max_mag = 1.0;
    for (const auto& c : spec) max_mag = std::max(max_mag, std::abs(c));
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            const cd a = spec[static_cast<size_t>(u) * w + v];
            const cd b = spec[static_cast<size_t>((h - u) % h) * w + (w - v) % w];
            check(std::abs(a - std::conj(b)) <= 1e-6 * max_mag,
                  "unroll_half_spectrum: spectrum is not Hermitian-symmetric "
                  "(source is not real-valued)");
        }
    const auto& plan = HalfSpectrumPlan::get(h, w);
    FourierSequence seq;
    seq.src_h = h;
    seq.src_w = w;
    seq.amp.resize(plan.length);
    seq.phase.resize(plan.length);
    for (int i = 0; i < plan.length; ++i) {
        const cd c = spec[static_cast<size_t>(plan.pos[i].u) * w + plan.pos[i].v];
        seq.amp[i] = std::abs(c);
        double ph = std::atan2(c.imag(), c.real());
        if (ph <= -kPi) ph = kPi;  // land exactly-pi phases on the (-pi, pi] side
        seq.phase[i] = ph;
    }
    return seq;
}

Mat reroll_and_idft(const FourierSequence& seq, int h, int w) {
    const auto& plan = HalfSpectrumPlan::get(h, w);
    check(seq.length() == plan.length,
          "reroll_and_idft: sequence length " + std::to_string(seq.length()) +
              " does not match half-spectrum size " + std::to_string(plan.length));
    std::vector<cd> spec(static_cast<size_t>(h) * w, cd(0, 0));
    for (int i = 0; i < plan.length; ++i) {
        const auto& p = plan.pos[i];
        const cd c = std::polar(seq.amp[i], seq.phase[i]);
        spec[static_cast<size_t>(p.u) * w + p.v] = c;
        if (p.has_mirror) spec[static_cast<size_t>(p.mu) * w + p.mv] = std::conj(c);
    }
    return idft2_real(spec, h, w);
}

double log_amp_scale(const FourierSequence& seq) {
    double m = 0.0;
    for (double a : seq.amp) m = std::max(m, std::log1p(a));
    return m;
}

std::vector<double> normalized_amplitudes(const FourierSequence& seq) {
    const double scale = log_amp_scale(seq);
    std::vector<double> out(seq.amp.size(), 0.0);
    if (scale > 0.0)
        for (size_t i = 0; i < out.size(); ++i) out[i] = std::log1p(seq.amp[i]) / scale;
    return out;
}

namespace {

// Fills out[0..n) with interleaved sin/cos pairs of x at frequencies
// 1, 1/4, 1/16, ...
void sinusoid_fill(double x, double* out, int n) {
    double freq = 1.0;
    for (int k = 0; 2 * k < n; ++k) {
        out[2 * k] = std::sin(x * freq);
        if (2 * k + 1 < n) out[2 * k + 1] = std::cos(x * freq);
        freq *= 0.25;
    }
}

}  // namespace

Mat encode_fde(const FourierSequence& seq, int F) {
    check(F >= 8 && F % 2 == 0, "encode_fde: embedding width must be even and >= 8");
    const auto& plan = seq.plan();
    check(seq.length() == plan.length, "encode_fde: sequence/plan length mismatch");
    const auto norm_amp = normalized_amplitudes(seq);
    Mat out(seq.length(), F);
    const int half = F / 2;
    const int pr = (half + 1) / 2;  // radius channels; the rest encode angle
    for (int i = 0; i < seq.length(); ++i) {
        double* row = &out.at(i, 0);
        const double vals[3] = {norm_amp[i], std::cos(seq.phase[i]), std::sin(seq.phase[i])};
        for (int d = 0; d < half; ++d) row[d] = vals[d % 3];
        sinusoid_fill(plan.pos[i].radius, row + half, pr);
        sinusoid_fill(plan.pos[i].angle, row + half + pr, half - pr);
    }
    return out;
}

double check_fourier_slice(const Image& img, const Geometry& geom, int angle_index,
                           double step) {
    geom.validate();
    check(angle_index >= 0 && angle_index < geom.num_views,
          "check_fourier_slice: angle index out of range");
    check(img.h() == geom.image_h && img.w() == geom.image_w,
          "check_fourier_slice: image does not match geometry");

    // 1D spectrum magnitudes of the projection row
    Sinogram sino = radon(img, geom, step);
    const int m = geom.num_detectors;
    std::vector<cd> row(m);
    for (int j = 0; j < m; ++j) row[j] = cd(sino.at(angle_index, j), 0.0);
    fft(row, false);

    // 2D spectrum magnitudes on a zero-padded grid (pad refines the frequency
    // sampling; magnitudes are translation-invariant so placement is free)
    const int pad = next_pow2(4 * std::max(img.h(), img.w()));
    Mat padded(pad, pad);
    for (int r = 0; r < img.h(); ++r)
        for (int c = 0; c < img.w(); ++c) padded.at(r, c) = img.at(r, c);
    const auto spec2 = dft2(padded);
    Mat mag2(pad, pad);
    for (int u = 0; u < pad; ++u)
        for (int v = 0; v < pad; ++v)
            mag2.at(u, v) = std::abs(spec2[static_cast<size_t>(u) * pad + v]);

    const double ct = std::cos(geom.angles[angle_index]);
    const double st = std::sin(geom.angles[angle_index]);
    std::vector<double> proj_mag(m), slice_mag(m);
    for (int k = 0; k < m; ++k) {
        const int ks = (k <= m / 2) ? k : k - m;
        const double nu = ks / (m * geom.detector_spacing);  // cycles per pixel
        proj_mag[k] = std::abs(row[k]);
        // central slice at (kx, ky) = nu * (cos, sin); x is the column axis
        double gc = nu * ct * pad, gr = nu * st * pad;
        gc -= pad * std::floor(gc / pad);
        gr -= pad * std::floor(gr / pad);
        const int c0 = static_cast<int>(gc) % pad, r0 = static_cast<int>(gr) % pad;
        const double fc = gc - std::floor(gc), fr = gr - std::floor(gr);
        const int c1 = (c0 + 1) % pad, r1 = (r0 + 1) % pad;
        slice_mag[k] = (1 - fr) * ((1 - fc) * mag2.at(r0, c0) + fc * mag2.at(r0, c1)) +
                       fr * ((1 - fc) * mag2.at(r1, c0) + fc * mag2.at(r1, c1));
    }
    const double pm = *std::max_element(proj_mag.begin(), proj_mag.end());
    const double sm = *std::max_element(slice_mag.begin(), slice_mag.end());
    double dev = 0.0;
    for (int k = 0; k < m; ++k) {
        const double a = pm > 0 ? proj_mag[k] / pm : 0.0;
        const double b = sm > 0 ? slice_mag[k] / sm : 0.0;
        dev = std::max(dev, std::abs(a - b));
    }
    return dev;
}

}  // namespace tdn
