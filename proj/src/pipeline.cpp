#include "tdn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "tdn/metrics.hpp"
#include "tdn/tensor_io.hpp"

namespace tdn::pipeline {

namespace fs = std::filesystem;
using config::ExperimentConfig;

namespace {

double f32(double x) { return static_cast<double>(static_cast<float>(x)); }

void quantize(std::vector<double>& v) {
    for (double& x : v) x = f32(x);
}

Geometry geometry_for(const ExperimentConfig& cfg, int views) {
    return make_parallel_geometry(views, cfg.dataset.image_h, cfg.dataset.image_w,
                                  cfg.dataset.detector_spacing);
}

struct Sample {
    int id = 0, views = 0;
    Mat s, s_gt, igt;
};

struct LoadedDataset {
    // train samples grouped by id, then view count; val/test flat
    std::map<int, std::map<int, Sample>> train;
    std::vector<Sample> val, test;
    std::vector<int> train_ids;
};

LoadedDataset load_dataset(const ExperimentConfig& cfg, bool want_train, bool want_val,
                           bool want_test) {
    const std::string dir = cfg.dataset_dir;
    if (!fs::exists(dir + "/manifest.tsv"))
        throw std::runtime_error("dataset manifest not found: " + dir + "/manifest.tsv");
    LoadedDataset ds;
    const auto nviews = cfg.dataset.views.size();
    for (const auto& e : data::read_manifest(dir + "/manifest.tsv")) {
        const bool is_train = e.split == "train", is_val = e.split == "val",
                   is_test = e.split == "test";
        if ((is_train && !want_train) || (is_val && !want_val) || (is_test && !want_test))
            continue;
        if (is_val && e.views != cfg.dataset.views[e.id % nviews])
            continue;  // fixed per-id view assignment keeps the metric stable
        Sample s;
        s.id = e.id;
        s.views = e.views;
        s.s = read_mat(e.s_path);
        s.igt = read_mat(e.igt_path);
        if (is_train) s.s_gt = read_mat(e.sgt_path);
        if (is_train) {
            ds.train[e.id][e.views] = std::move(s);
        } else if (is_val) {
            ds.val.push_back(std::move(s));
        } else if (is_test) {
            ds.test.push_back(std::move(s));
        }
    }
    for (const auto& [id, group] : ds.train) ds.train_ids.push_back(id);
    return ds;
}

double validation_mse(const net::TDNet& model, const ExperimentConfig& cfg,
                      const std::vector<Sample>& val) {
    double acc = 0;
    for (const auto& v : val) {
        Geometry g = geometry_for(cfg, v.views);
        auto f = model.forward(Sinogram(v.s), g);
        double mse = 0;
        for (size_t i = 0; i < v.igt.v.size(); ++i) {
            const double d = f.i_hat.val()[i] - v.igt.v[i];
            mse += d * d;
        }
        acc += mse / static_cast<double>(v.igt.v.size());
    }
    return acc / static_cast<double>(val.size());
}

void write_pgm(const std::string& path, const std::vector<unsigned char>& pixels, int w, int h) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "P5\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
}

unsigned char to_byte(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(c * 255.0));
}

}  // namespace

// ------------------------------------------------------------- checkpoint ---

void save_checkpoint(const std::string& path, net::TDNet& model, optim::RAdam& opt,
                     optim::PlateauScheduler& sched, int next_epoch, double best_val) {
    // live training state is rounded to the container's float32 so a resumed
    // run continues from exactly the persisted values
    auto& params = model.params().items;
    std::vector<ArchiveEntry> entries;
    for (size_t i = 0; i < params.size(); ++i) {
        quantize(params[i].second.val());
        entries.push_back({"param." + params[i].first, params[i].second.shape(),
                           params[i].second.val()});
    }
    for (size_t i = 0; i < params.size(); ++i) {
        quantize(opt.moments1()[i]);
        quantize(opt.moments2()[i]);
        entries.push_back({"opt.m." + params[i].first, params[i].second.shape(),
                           opt.moments1()[i]});
        entries.push_back({"opt.v." + params[i].first, params[i].second.shape(),
                           opt.moments2()[i]});
    }
    const double lr_q = f32(sched.lr()), best_q = f32(sched.best()), bv_q = f32(best_val);
    sched.restore(lr_q, best_q, sched.bad_epochs());
    opt.set_lr(lr_q);
    entries.push_back({"state", {6},
                       {static_cast<double>(opt.t()), lr_q, best_q,
                        static_cast<double>(sched.bad_epochs()),
                        static_cast<double>(next_epoch), bv_q}});
    write_archive(path, entries);
}

namespace {

void restore_params(const std::vector<ArchiveEntry>& entries, net::TDNet& model,
                    optim::RAdam* opt, const std::string& path) {
    auto find = [&](const std::string& name) -> const ArchiveEntry& {
        for (const auto& e : entries)
            if (e.name == name) return e;
        throw std::runtime_error(path + ": missing checkpoint entry " + name);
    };
    auto& params = model.params().items;
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& e = find("param." + params[i].first);
        if (e.dims != params[i].second.shape())
            throw std::runtime_error(path + ": shape mismatch for " + params[i].first +
                                     " (checkpoint " + shape_str(e.dims) + ", model " +
                                     shape_str(params[i].second.shape()) + ")");
        params[i].second.val() = e.data;
        if (opt) {
            opt->moments1()[i] = find("opt.m." + params[i].first).data;
            opt->moments2()[i] = find("opt.v." + params[i].first).data;
        }
    }
}

}  // namespace

CheckpointState load_checkpoint(const std::string& path, net::TDNet& model, optim::RAdam* opt,
                                optim::PlateauScheduler* sched) {
    const auto entries = read_archive(path);
    restore_params(entries, model, opt, path);
    CheckpointState st;
    for (const auto& e : entries) {
        if (e.name != "state") continue;
        if (e.data.size() != 6) throw std::runtime_error(path + ": malformed state entry");
        if (opt) {
            opt->set_t(static_cast<int64_t>(e.data[0]));
            opt->set_lr(e.data[1]);
        }
        if (sched) sched->restore(e.data[1], e.data[2], static_cast<int>(e.data[3]));
        st.next_epoch = static_cast<int>(e.data[4]);
        st.best_val = e.data[5];
        return st;
    }
    throw std::runtime_error(path + ": missing state entry");
}

void load_model_weights(const std::string& path, net::TDNet& model) {
    restore_params(read_archive(path), model, nullptr, path);
}

// ----------------------------------------------------------------- simulate -

void cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir) {
    data::build_dataset(cfg.dataset, out_dir);
    const auto rows = data::read_manifest(out_dir + "/manifest.tsv");
    std::printf("simulate: wrote %zu manifest rows under %s\n", rows.size(), out_dir.c_str());
}

// -------------------------------------------------------------------- train -

void cmd_train(const ExperimentConfig& cfg, const std::string& out_dir,
               const std::string& resume_path) {
    fs::create_directories(out_dir);
    LoadedDataset ds = load_dataset(cfg, true, true, false);
    if (ds.train.empty()) throw std::runtime_error("no training samples in " + cfg.dataset_dir);
    if (ds.val.empty()) throw std::runtime_error("no validation samples in " + cfg.dataset_dir);

    net::TDNet model(cfg.model, cfg.seed);
    optim::RAdam opt(model.params(), cfg.lr, cfg.weight_decay);
    optim::PlateauScheduler sched(cfg.lr, cfg.patience, cfg.factor, cfg.min_lr);

    int start_epoch = 0;
    double best_val = std::numeric_limits<double>::infinity();
    if (!resume_path.empty()) {
        if (!fs::exists(resume_path))
            throw std::runtime_error("resume checkpoint not found: " + resume_path);
        CheckpointState st = load_checkpoint(resume_path, model, &opt, &sched);
        start_epoch = st.next_epoch;
        best_val = st.best_val;
    }

    std::ofstream log(out_dir + "/train_log.txt", std::ios::app);
    if (!log) throw std::runtime_error("cannot open " + out_dir + "/train_log.txt");

    const auto& views = cfg.dataset.views;
    const std::string last_path = out_dir + "/ckpt_last.tdna";
    const std::string best_path = out_dir + "/ckpt_best.tdna";

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        // deterministic per-epoch order and view rotation
        std::vector<int> order = ds.train_ids;
        Rng shuffle_rng(Rng::derive(cfg.seed, 0x65706f63, epoch));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.next_u64() % i]);

        double loss_sum = 0;
        for (int id : order) {
            const int p = views[(id + epoch) % views.size()];
            auto it = ds.train.at(id).find(p);
            if (it == ds.train.at(id).end())
                throw std::runtime_error("dataset lacks P=" + std::to_string(p) + " for id " +
                                         std::to_string(id));
            const Sample& smp = it->second;
            Geometry g = geometry_for(cfg, p);
            auto f = model.forward(Sinogram(smp.s), g);
            auto losses = loss::l_total(f, Sinogram(smp.s_gt), Image(smp.igt), cfg.weights);
            const double lv = losses.total.item();
            if (!std::isfinite(lv))
                throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch + 1) +
                                         ", sample " + std::to_string(id) +
                                         "; last checkpoint preserved");
            opt.zero_grad();
            losses.total.backward();
            opt.step();
            loss_sum += lv;
        }
        const double train_loss = loss_sum / static_cast<double>(order.size());
        const double val_mse = validation_mse(model, cfg, ds.val);
        if (!std::isfinite(val_mse))
            throw std::runtime_error("non-finite validation loss at epoch " +
                                     std::to_string(epoch + 1) + "; last checkpoint preserved");
        opt.set_lr(sched.observe(val_mse));

        const bool improved = val_mse < best_val;
        if (improved) best_val = val_mse;
        save_checkpoint(last_path, model, opt, sched, epoch + 1, best_val);
        if (improved) fs::copy_file(last_path, best_path, fs::copy_options::overwrite_existing);

        char line[256];
        std::snprintf(line, sizeof(line), "epoch %d train_loss %.9g val_mse %.9g lr %.9g",
                      epoch + 1, train_loss, val_mse, opt.lr());
        log << line << "\n";
        log.flush();
        std::printf("%s\n", line);
        std::fflush(stdout);
    }
}

// --------------------------------------------------------------------- eval -

void cmd_eval(const ExperimentConfig& cfg, const std::string& out_dir,
              const std::string& checkpoint_path) {
    if (!fs::exists(checkpoint_path))
        throw std::runtime_error("checkpoint not found: " + checkpoint_path);
    fs::create_directories(out_dir);
    LoadedDataset ds = load_dataset(cfg, false, false, true);
    if (ds.test.empty()) throw std::runtime_error("no test samples in " + cfg.dataset_dir);

    net::TDNet model(cfg.model, cfg.seed);
    load_model_weights(checkpoint_path, model);

    struct Acc {
        double psnr = 0, ssim = 0, rmse = 0;
        int n = 0;
    };
    std::map<std::pair<std::string, int>, Acc> table;
    for (const auto& t : ds.test) {
        Geometry g = geometry_for(cfg, t.views);
        const Image gt(t.igt);
        Image fbp_img = fbp(Sinogram(t.s), g);
        auto f = model.forward(Sinogram(t.s), g);
        Mat recon(gt.h(), gt.w());
        recon.v = f.i_hat.val();
        const Image net_img(recon);
        auto& a = table[{"fbp", t.views}];
        a.psnr += metrics::psnr(fbp_img, gt);
        a.ssim += metrics::ssim(fbp_img, gt);
        a.rmse += metrics::rmse(fbp_img, gt);
        ++a.n;
        auto& b = table[{"tdnet", t.views}];
        b.psnr += metrics::psnr(net_img, gt);
        b.ssim += metrics::ssim(net_img, gt);
        b.rmse += metrics::rmse(net_img, gt);
        ++b.n;
    }

    std::ofstream tsv(out_dir + "/eval.tsv", std::ios::binary | std::ios::trunc);
    if (!tsv) throw std::runtime_error("cannot write " + out_dir + "/eval.tsv");
    tsv << "method\tviews\tpsnr\tssim\trmse\n";
    std::printf("%-8s %6s %10s %8s %8s\n", "method", "views", "psnr", "ssim", "rmse");
    for (const auto& [key, acc] : table) {
        char row[160];
        std::snprintf(row, sizeof(row), "%s\t%d\t%.6f\t%.6f\t%.6f", key.first.c_str(), key.second,
                      acc.psnr / acc.n, acc.ssim / acc.n, acc.rmse / acc.n);
        tsv << row << "\n";
        std::printf("%-8s %6d %10.3f %8.4f %8.4f\n", key.first.c_str(), key.second,
                    acc.psnr / acc.n, acc.ssim / acc.n, acc.rmse / acc.n);
    }
}

// -------------------------------------------------------------------- render -

void cmd_render(const ExperimentConfig& cfg, const std::string& out_dir,
                const std::string& checkpoint_path, const std::vector<int>& ids) {
    if (!fs::exists(checkpoint_path))
        throw std::runtime_error("checkpoint not found: " + checkpoint_path);
    fs::create_directories(out_dir);
    LoadedDataset ds = load_dataset(cfg, false, false, true);
    net::TDNet model(cfg.model, cfg.seed);
    load_model_weights(checkpoint_path, model);

    std::vector<int> known;
    for (const auto& t : ds.test) known.push_back(t.id);
    std::sort(known.begin(), known.end());
    known.erase(std::unique(known.begin(), known.end()), known.end());

    for (int id : ids) {
        bool found = false;
        for (const auto& t : ds.test) {
            if (t.id != id) continue;
            found = true;
            Geometry g = geometry_for(cfg, t.views);
            const Image gt(t.igt);
            Image fbp_img = fbp(Sinogram(t.s), g);
            auto f = model.forward(Sinogram(t.s), g);
            const int h = gt.h(), w = gt.w(), margin = 4;
            const int gw = 3 * (w + margin);
            std::vector<unsigned char> pix(static_cast<size_t>(gw) * h, 0);
            auto blit = [&](const std::vector<double>& img, int col) {
                const int x0 = col * (w + margin);
                for (int r = 0; r < h; ++r)
                    for (int c = 0; c < w; ++c)
                        pix[static_cast<size_t>(r) * gw + x0 + c] =
                            to_byte(img[static_cast<size_t>(r) * w + c]);
            };
            blit(gt.data.v, 0);
            blit(fbp_img.data.v, 1);
            blit(f.i_hat.val(), 2);
            const std::string path = out_dir + "/render_" + std::to_string(id) + "_p" +
                                     std::to_string(t.views) + ".pgm";
            write_pgm(path, pix, gw, h);
            std::printf("render: %s\n", path.c_str());
        }
        if (!found) {
            std::string valid;
            for (int k : known) valid += (valid.empty() ? "" : ", ") + std::to_string(k);
            throw std::runtime_error("unknown sample id " + std::to_string(id) +
                                     "; valid test ids: " + valid);
        }
    }
}

// --------------------------------------------------------------- reconstruct -

void cmd_reconstruct(const ExperimentConfig& cfg, const std::string& out_dir,
                     const std::string& checkpoint_path, const std::string& input_path) {
    if (!fs::exists(checkpoint_path))
        throw std::runtime_error("checkpoint not found: " + checkpoint_path);
    if (!fs::exists(input_path)) throw std::runtime_error("input not found: " + input_path);
    fs::create_directories(out_dir);
    Mat sino = read_mat(input_path);
    Geometry g = geometry_for(cfg, sino.rows);
    check(sino.cols == g.num_detectors,
          "reconstruct: sinogram has " + std::to_string(sino.cols) + " detectors, geometry " +
              std::to_string(g.num_detectors));
    net::TDNet model(cfg.model, cfg.seed);
    load_model_weights(checkpoint_path, model);
    Image fbp_img = fbp(Sinogram(sino), g);
    auto f = model.forward(Sinogram(sino), g);
    write_mat(out_dir + "/recon_fbp.tdn", fbp_img.data);
    Mat recon(g.image_h, g.image_w);
    recon.v = f.i_hat.val();
    write_mat(out_dir + "/recon_tdnet.tdn", recon);
    std::printf("reconstruct: wrote %s/recon_fbp.tdn and %s/recon_tdnet.tdn\n", out_dir.c_str(),
                out_dir.c_str());
}

}  // namespace tdn::pipeline
