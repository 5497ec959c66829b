#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tdn/pipeline.hpp"
#include "tdn/tensor_io.hpp"

using namespace tdn;
using namespace tdn::pipeline;
namespace fs = std::filesystem;

namespace {

config::ExperimentConfig tiny_config(const std::string& dataset_dir) {
    config::ExperimentConfig cfg;
    cfg.dataset.train = 8;
    cfg.dataset.val = 2;
    cfg.dataset.test = 3;
    cfg.dataset.image_h = cfg.dataset.image_w = 16;
    cfg.dataset.views = {8, 12};
    cfg.model.srm = {1, 2, 4, 8, 2};
    cfg.model.fsm = {8, 1, 2, 16};
    cfg.model.irm = {8, 1, 4};
    cfg.epochs = 2;
    cfg.seed = 5;
    cfg.dataset.seed = 5;
    cfg.dataset_dir = dataset_dir;
    return cfg;
}

std::string scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> log_lines(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::vector<std::string> lines;
    std::string l;
    while (std::getline(in, l)) lines.push_back(l);
    return lines;
}

}  // namespace

TEST_CASE("train smoke: two epochs on eight samples write two log lines and checkpoints") {
    const std::string ds = scratch("tdnp_ds");
    const std::string run = scratch("tdnp_run");
    auto cfg = tiny_config(ds);
    cmd_simulate(cfg, ds);
    cmd_train(cfg, run);
    auto lines = log_lines(run + "/train_log.txt");
    REQUIRE(lines.size() == 2);
    CHECK(lines[0].rfind("epoch 1 ", 0) == 0);
    CHECK(lines[1].rfind("epoch 2 ", 0) == 0);
    CHECK(fs::exists(run + "/ckpt_last.tdna"));
    CHECK(fs::exists(run + "/ckpt_best.tdna"));

    // best-checkpoint val MSE is no worse than the first epoch's
    double v1, vbest = 1e30;
    {
        std::istringstream ss(lines[0]);
        std::string tok;
        ss >> tok >> tok >> tok >> tok >> tok >> v1;
    }
    for (const auto& l : lines) {
        std::istringstream ss(l);
        std::string tok;
        double v;
        ss >> tok >> tok >> tok >> tok >> tok >> v;
        vbest = std::min(vbest, v);
    }
    CHECK(vbest <= v1);
    fs::remove_all(ds);
    fs::remove_all(run);
}

TEST_CASE("resume reproduces the uninterrupted trajectory bit for bit") {
    const std::string ds = scratch("tdnp_ds_resume");
    auto cfg = tiny_config(ds);
    cmd_simulate(cfg, ds);

    const std::string full = scratch("tdnp_full");
    auto cfg4 = cfg;
    cfg4.epochs = 4;
    cmd_train(cfg4, full);

    const std::string part = scratch("tdnp_part");
    cmd_train(cfg, part);  // epochs 1..2
    const std::string cont = scratch("tdnp_cont");
    cmd_train(cfg4, cont, part + "/ckpt_last.tdna");  // epochs 3..4

    auto full_lines = log_lines(full + "/train_log.txt");
    auto cont_lines = log_lines(cont + "/train_log.txt");
    REQUIRE(full_lines.size() == 4);
    REQUIRE(cont_lines.size() == 2);
    CHECK(cont_lines[0] == full_lines[2]);
    CHECK(cont_lines[1] == full_lines[3]);
    CHECK(slurp(cont + "/ckpt_last.tdna") == slurp(full + "/ckpt_last.tdna"));

    for (const auto& d : {ds, full, part, cont}) fs::remove_all(d);
}

TEST_CASE("identical config and seed give byte-identical logs, checkpoints and eval tables") {
    const std::string ds1 = scratch("tdnp_det_ds1"), ds2 = scratch("tdnp_det_ds2");
    const std::string r1 = scratch("tdnp_det_r1"), r2 = scratch("tdnp_det_r2");
    auto cfg1 = tiny_config(ds1);
    auto cfg2 = tiny_config(ds2);
    cmd_simulate(cfg1, ds1);
    cmd_simulate(cfg2, ds2);
    // manifests embed their own directory; identical after normalizing it
    auto normalized = [](const std::string& text, const std::string& dir) {
        std::string out = text;
        size_t pos;
        while ((pos = out.find(dir)) != std::string::npos) out.erase(pos, dir.size());
        return out;
    };
    CHECK(normalized(slurp(ds1 + "/manifest.tsv"), ds1) ==
          normalized(slurp(ds2 + "/manifest.tsv"), ds2));
    // tensor payloads are byte-identical
    auto m1 = data::read_manifest(ds1 + "/manifest.tsv");
    auto m2 = data::read_manifest(ds2 + "/manifest.tsv");
    REQUIRE(m1.size() == m2.size());
    CHECK(slurp(m1[0].s_path) == slurp(m2[0].s_path));
    CHECK(slurp(m1.back().igt_path) == slurp(m2.back().igt_path));
    cmd_train(cfg1, r1);
    cmd_train(cfg2, r2);
    CHECK(slurp(r1 + "/train_log.txt") == slurp(r2 + "/train_log.txt"));
    CHECK(slurp(r1 + "/ckpt_last.tdna") == slurp(r2 + "/ckpt_last.tdna"));
    cmd_eval(cfg1, r1, r1 + "/ckpt_best.tdna");
    cmd_eval(cfg2, r2, r2 + "/ckpt_best.tdna");
    CHECK(slurp(r1 + "/eval.tsv") == slurp(r2 + "/eval.tsv"));
    for (const auto& d : {ds1, ds2, r1, r2}) fs::remove_all(d);
}

TEST_CASE("eval emits one row per method and view count") {
    const std::string ds = scratch("tdnp_eval_ds"), run = scratch("tdnp_eval_run");
    auto cfg = tiny_config(ds);
    cfg.epochs = 1;
    cmd_simulate(cfg, ds);
    cmd_train(cfg, run);
    cmd_eval(cfg, run, run + "/ckpt_best.tdna");
    auto lines = log_lines(run + "/eval.tsv");
    REQUIRE(lines.size() == 1 + 2 * 2);  // header + {fbp,tdnet} x {8,12}
    CHECK(lines[0] == "method\tviews\tpsnr\tssim\trmse");
    int fbp_rows = 0, net_rows = 0;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].rfind("fbp\t", 0) == 0) ++fbp_rows;
        if (lines[i].rfind("tdnet\t", 0) == 0) ++net_rows;
    }
    CHECK(fbp_rows == 2);
    CHECK(net_rows == 2);
    CHECK_THROWS_AS(cmd_eval(cfg, run, run + "/no_such.tdna"), std::runtime_error);
    fs::remove_all(ds);
    fs::remove_all(run);
}

TEST_CASE("render writes a 3-column grid whose first column round-trips the phantom") {
    const std::string ds = scratch("tdnp_rend_ds"), run = scratch("tdnp_rend_run");
    auto cfg = tiny_config(ds);
    cfg.epochs = 1;
    cmd_simulate(cfg, ds);
    cmd_train(cfg, run);
    const int test_id = cfg.dataset.train + cfg.dataset.val;  // first test id
    cmd_render(cfg, run, run + "/ckpt_best.tdna", {test_id});
    const std::string pgm = run + "/render_" + std::to_string(test_id) + "_p8.pgm";
    std::string bytes = slurp(pgm);
    // header: P5\n<w> <h>\n255\n
    REQUIRE(bytes.rfind("P5\n", 0) == 0);
    std::istringstream hdr(bytes.substr(3));
    int w, h, maxv;
    hdr >> w >> h >> maxv;
    const int margin = 4, iw = 16, ih = 16;
    CHECK(w == 3 * (iw + margin));
    CHECK(h == ih);
    CHECK(maxv == 255);
    const size_t pix_off = bytes.size() - static_cast<size_t>(w) * h;
    // first column decodes back to the stored phantom within quantization
    auto manifest = data::read_manifest(ds + "/manifest.tsv");
    Mat igt;
    for (const auto& e : manifest)
        if (e.id == test_id) igt = read_mat(e.igt_path);
    REQUIRE(igt.rows == ih);
    for (int r = 0; r < ih; ++r)
        for (int c = 0; c < iw; ++c) {
            const auto byte = static_cast<unsigned char>(bytes[pix_off + r * w + c]);
            CHECK(std::abs(byte / 255.0 - igt.at(r, c)) <= 1.0 / 255.0);
        }
    // unknown id lists valid ids
    CHECK_THROWS_WITH_AS(cmd_render(cfg, run, run + "/ckpt_best.tdna", {9999}),
                         doctest::Contains("valid test ids"), std::runtime_error);
    fs::remove_all(ds);
    fs::remove_all(run);
}

TEST_CASE("reconstruct writes fbp and model tensors for a stored sinogram") {
    const std::string ds = scratch("tdnp_rec_ds"), run = scratch("tdnp_rec_run");
    auto cfg = tiny_config(ds);
    cfg.epochs = 1;
    cmd_simulate(cfg, ds);
    cmd_train(cfg, run);
    auto manifest = data::read_manifest(ds + "/manifest.tsv");
    cmd_reconstruct(cfg, run, run + "/ckpt_best.tdna", manifest[0].s_path);
    Mat fbp_rec = read_mat(run + "/recon_fbp.tdn");
    CHECK(fbp_rec.rows == 16);
    CHECK(fbp_rec.cols == 16);
    Mat net_rec = read_mat(run + "/recon_tdnet.tdn");
    CHECK(net_rec.rows == 16);
    // sanity: fbp output matches a direct fbp of the stored sinogram
    Mat sino = read_mat(manifest[0].s_path);
    Geometry g = make_parallel_geometry(manifest[0].views, 16, 16);
    Image direct = fbp(Sinogram(sino), g);
    for (size_t i = 0; i < direct.data.v.size(); ++i)
        CHECK(std::abs(direct.data.v[i] - fbp_rec.v[i]) < 1e-5);
    fs::remove_all(ds);
    fs::remove_all(run);
}

#ifdef TDNET_BIN
TEST_CASE("cli exit codes: 0 on success, 1 on usage errors, 2 on runtime failures") {
    const std::string base = scratch("tdnp_cli");
    fs::create_directories(base);
    const std::string cfg_path = base + "/exp.cfg";
    {
        std::ofstream out(cfg_path);
        out << "data.train = 4\ndata.val = 2\ndata.test = 2\n"
            << "data.image_h = 16\ndata.image_w = 16\ndata.views = 8\n"
            << "srm.blocks = 1\nsrm.channels = 8\nsrm.heads = 2\n"
            << "fsm.embed = 8\nfsm.layers = 1\nfsm.heads = 2\nfsm.cond = 8\n"
            << "irm.channels = 8\nirm.reduction = 4\n"
            << "train.epochs = 1\nexp.dataset = " << base << "/ds\n";
    }
    auto run = [&](const std::string& args) {
        const std::string cmd = std::string(TDNET_BIN) + " " + args + " >/dev/null 2>&1";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };
    CHECK(run("simulate --config " + cfg_path + " --out " + base + "/ds") == 0);
    CHECK(run("train --config " + cfg_path + " --out " + base + "/run") == 0);
    CHECK(run("eval --config " + cfg_path + " --out " + base + "/run --checkpoint " + base +
              "/run/ckpt_best.tdna") == 0);
    // usage errors
    CHECK(run("") == 1);                                             // no subcommand
    CHECK(run("train --config " + base + "/missing.cfg") == 1);      // missing config file
    CHECK(run("eval --config " + cfg_path) == 1);                    // missing required option
    // malformed config: line-numbered usage error
    const std::string bad_cfg = base + "/bad.cfg";
    std::ofstream(bad_cfg) << "data.train = what\n";
    CHECK(run("simulate --config " + bad_cfg + " --out " + base + "/ds2") == 1);
    // runtime failures
    CHECK(run("eval --config " + cfg_path + " --out " + base + "/run --checkpoint " + base +
              "/nope.tdna") == 2);
    CHECK(run("render --config " + cfg_path + " --out " + base + "/run --checkpoint " + base +
              "/run/ckpt_best.tdna --ids 9999") == 2);
    fs::remove_all(base);
}
#endif
