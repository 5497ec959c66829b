#pragma once

#include <vector>

#include "tdn/common.hpp"

namespace tdn {

// Dense row-major matrix of doubles.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {
        check(r >= 0 && c >= 0, "Mat: negative dimensions");
    }

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return v.size(); }
};

// H x W attenuation grid. Ground-truth phantoms lie in [0, 1]; network
// outputs are unconstrained.
struct Image {
    Mat data;
    Image() = default;
    Image(int h, int w, double fill = 0.0) : data(h, w, fill) {}
    explicit Image(Mat m) : data(std::move(m)) {}
    int h() const { return data.rows; }
    int w() const { return data.cols; }
    double& at(int r, int c) { return data.at(r, c); }
    double at(int r, int c) const { return data.at(r, c); }
};

// views x detectors line-integral matrix.
struct Sinogram {
    Mat data;
    Sinogram() = default;
    Sinogram(int views, int dets, double fill = 0.0) : data(views, dets, fill) {}
    explicit Sinogram(Mat m) : data(std::move(m)) {}
    int views() const { return data.rows; }
    int detectors() const { return data.cols; }
    double& at(int r, int c) { return data.at(r, c); }
    double at(int r, int c) const { return data.at(r, c); }
};

}  // namespace tdn
