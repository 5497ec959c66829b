#include "tdn/data.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tdn/rng.hpp"
#include "tdn/tensor_io.hpp"

namespace tdn::data {

namespace fs = std::filesystem;

Image upscale_bilinear(const Image& img, int factor) {
    check(factor >= 1, "upscale_bilinear: factor must be >= 1");
    const int h = img.h(), w = img.w();
    const int nh = h * factor, nw = w * factor;
    Image out(nh, nw);
    for (int r = 0; r < nh; ++r) {
        const double sy = (r + 0.5) / factor - 0.5;
        const int r0 = static_cast<int>(std::floor(sy));
        const double fy = sy - r0;
        for (int c = 0; c < nw; ++c) {
            const double sx = (c + 0.5) / factor - 0.5;
            const int c0 = static_cast<int>(std::floor(sx));
            const double fx = sx - c0;
            auto clamped = [&](int rr, int cc) {
                rr = std::min(std::max(rr, 0), h - 1);
                cc = std::min(std::max(cc, 0), w - 1);
                return img.at(rr, cc);
            };
            out.at(r, c) = (1 - fy) * ((1 - fx) * clamped(r0, c0) + fx * clamped(r0, c0 + 1)) +
                           fy * ((1 - fx) * clamped(r0 + 1, c0) + fx * clamped(r0 + 1, c0 + 1));
        }
    }
    return out;
}

SimPair simulate_pair(const Image& phantom, const Geometry& geom, double noise_level, int upscale,
                      uint64_t noise_seed) {
    geom.validate();
    check(upscale >= 2, "simulate_pair: upscale factor must be >= 2");
    check(phantom.h() == geom.image_h && phantom.w() == geom.image_w,
          "simulate_pair: phantom does not match geometry");
    SimPair out;
    out.i_gt = phantom;

    // project at high resolution, then collapse each group of `upscale`
    // detector bins; the fine grid is shifted so group centers align with the
    // coarse bins
    Geometry hi = geom;
    hi.image_h = geom.image_h * upscale;
    hi.image_w = geom.image_w * upscale;
    hi.num_detectors = geom.num_detectors * upscale;
    hi.detector_spacing = geom.detector_spacing;  // in hi-res pixels
    Image big = upscale_bilinear(phantom, upscale);
    Sinogram s_hi(hi.num_views, hi.num_detectors);
    detail::project_rays(hi, 0.5, -(upscale - 1) / 2.0, true, big.data, &s_hi.data, nullptr,
                         nullptr);

    out.s_gt = Sinogram(geom.num_views, geom.num_detectors);
    for (int i = 0; i < geom.num_views; ++i)
        for (int j = 0; j < geom.num_detectors; ++j) {
            double acc = 0;
            for (int k = 0; k < upscale; ++k) acc += s_hi.at(i, j * upscale + k);
            // line integrals at hi-res are in hi-res pixel units
            out.s_gt.at(i, j) = acc / upscale / upscale;
        }

    out.s = out.s_gt;
    if (noise_level > 0) {
        double mean_abs = 0;
        for (double v : out.s_gt.data.v) mean_abs += std::abs(v);
        mean_abs /= static_cast<double>(out.s_gt.data.v.size());
        const double sigma = noise_level * mean_abs;
        Rng rng(noise_seed);
        for (auto& v : out.s.data.v) v += sigma * rng.normal();
    }
    return out;
}

namespace {

std::string entry_path(const std::string& dir, int id, const std::string& what, int views) {
    std::ostringstream ss;
    ss << dir << "/t" << id << "_" << what;
    if (views > 0) ss << "_p" << views;
    return ss.str() + ".tdn";
}

}  // namespace

void build_dataset(const DatasetSpec& spec, const std::string& out_dir) {
    spec.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create dataset directory " + out_dir + ": " +
                                     ec.message());
    const std::string tdir = out_dir + "/tensors";
    fs::create_directories(tdir, ec);
    if (ec) throw std::runtime_error("cannot create " + tdir + ": " + ec.message());

    std::ostringstream manifest;
    const int total = spec.train + spec.val + spec.test;
    for (int id = 0; id < total; ++id) {
        const std::string split =
            id < spec.train ? "train" : (id < spec.train + spec.val ? "val" : "test");
        const uint64_t phantom_seed = Rng::derive(spec.seed, 0x7068 + id, 1);
        Image phantom = make_phantom(phantom_seed, spec.image_h, spec.image_w);
        const std::string igt = entry_path(tdir, id, "igt", 0);
        write_mat(igt, phantom.data);
        for (int p : spec.views) {
            Geometry geom = make_parallel_geometry(p, spec.image_h, spec.image_w,
                                                   spec.detector_spacing);
            const uint64_t noise_seed = Rng::derive(spec.seed, 0x6e6f69 + id, p);
            SimPair pair = simulate_pair(phantom, geom, spec.noise_level, spec.upscale,
                                         noise_seed);
            Sinogram direct = radon(phantom, geom);
            const std::string s = entry_path(tdir, id, "s", p);
            const std::string sgt = entry_path(tdir, id, "sgt", p);
            const std::string sdir = entry_path(tdir, id, "sdirect", p);
            write_mat(s, pair.s.data);
            write_mat(sgt, pair.s_gt.data);
            write_mat(sdir, direct.data);
            manifest << id << "\t" << split << "\t" << p << "\t" << igt << "\t" << s << "\t"
                     << sgt << "\t" << sdir << "\t" << noise_seed << "\n";
        }
    }
    std::ofstream mf(out_dir + "/manifest.tsv", std::ios::binary | std::ios::trunc);
    if (!mf) throw std::runtime_error("cannot write manifest in " + out_dir);
    mf << manifest.str();
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    std::vector<ManifestEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        ManifestEntry e;
        std::string id_s, views_s, seed_s;
        if (!std::getline(ss, id_s, '\t') || !std::getline(ss, e.split, '\t') ||
            !std::getline(ss, views_s, '\t') || !std::getline(ss, e.igt_path, '\t') ||
            !std::getline(ss, e.s_path, '\t') || !std::getline(ss, e.sgt_path, '\t') ||
            !std::getline(ss, e.sdirect_path, '\t') || !std::getline(ss, seed_s, '\t'))
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": malformed manifest row");
        e.id = std::stoi(id_s);
        e.views = std::stoi(views_s);
        e.seed = std::stoull(seed_s);
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace tdn::data
