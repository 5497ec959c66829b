#pragma once

#include <cmath>
#include <vector>

#include "tdn/common.hpp"

namespace tdn {

// Parallel-beam projection configuration. Detector offsets are
// (j - num_detectors/2) * detector_spacing, in image-pixel units, relative to
// the image center ((W-1)/2, (H-1)/2).
struct Geometry {
    int num_views = 0;
    int num_detectors = 0;
    int image_h = 0, image_w = 0;
    std::vector<double> angles;  // radians in [0, pi), strictly increasing
    double detector_spacing = 1.0;

    void validate() const {
        check(num_views > 0 && num_detectors > 0, "Geometry: counts must be positive");
        check(image_h > 0 && image_w > 0, "Geometry: image size must be positive");
        check(detector_spacing > 0, "Geometry: detector spacing must be positive");
        check(static_cast<int>(angles.size()) == num_views, "Geometry: angle count != num_views");
        for (int i = 0; i < num_views; ++i) {
            check(angles[i] >= 0.0 && angles[i] < 3.14159265358979323846,
                  "Geometry: angle outside [0, pi)");
            if (i > 0) check(angles[i] > angles[i - 1], "Geometry: angles not strictly increasing");
        }
        double diag = std::hypot(static_cast<double>(image_h), static_cast<double>(image_w));
        check(num_detectors * detector_spacing >= diag,
              "Geometry: detector row does not cover the image diagonal");
    }
};

// ceil(sqrt(2) * max(h, w)), rounded up to even: full diagonal coverage.
inline int default_detector_count(int h, int w) {
    int m = static_cast<int>(std::ceil(std::sqrt(2.0) * std::max(h, w)));
    return (m % 2 == 0) ? m : m + 1;
}

inline std::vector<double> uniform_angles(int n) {
    std::vector<double> a(n);
    for (int i = 0; i < n; ++i) a[i] = 3.14159265358979323846 * i / n;
    return a;
}

inline Geometry make_parallel_geometry(int num_views, int image_h, int image_w,
                                       double detector_spacing = 1.0) {
    Geometry g;
    g.num_views = num_views;
    g.image_h = image_h;
    g.image_w = image_w;
    g.detector_spacing = detector_spacing;
    g.num_detectors = default_detector_count(image_h, image_w);
    g.angles = uniform_angles(num_views);
    g.validate();
    return g;
}

}  // namespace tdn
