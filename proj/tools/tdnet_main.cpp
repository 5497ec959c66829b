#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "tdn/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    int64_t seed = -1;  // < 0: keep the config's seed
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "override exp.seed from the config");
}

tdn::config::ExperimentConfig load(const CommonArgs& args) {
    auto cfg = tdn::config::load_config(args.config_path);
    if (args.seed >= 0) {
        cfg.seed = static_cast<uint64_t>(args.seed);
        cfg.dataset.seed = cfg.seed;
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tdnet: tri-domain sparse-view CT reconstruction"};
    app.require_subcommand(1);

    CommonArgs sim_args, train_args, eval_args, render_args, rec_args;
    std::string resume_path, checkpoint_path, input_path;
    std::vector<int> render_ids;

    CLI::App* sim = app.add_subcommand("simulate", "generate a phantom dataset");
    add_common(sim, sim_args);

    CLI::App* train = app.add_subcommand("train", "train the model");
    add_common(train, train_args);
    train->add_option("--resume", resume_path, "checkpoint to resume from");

    CLI::App* eval = app.add_subcommand("eval", "evaluate FBP and the model on the test split");
    add_common(eval, eval_args);
    eval->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();

    CLI::App* render = app.add_subcommand("render", "write comparison grids for test samples");
    add_common(render, render_args);
    render->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    render->add_option("--ids", render_ids, "test sample ids")->required();

    CLI::App* rec = app.add_subcommand("reconstruct", "reconstruct a stored sinogram");
    add_common(rec, rec_args);
    rec->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    rec->add_option("--input", input_path, "sinogram tensor file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp")
            return app.exit(e);
        app.exit(e);
        return 1;
    }

    try {
        using namespace tdn::pipeline;
        if (sim->parsed()) cmd_simulate(load(sim_args), sim_args.out_dir);
        if (train->parsed()) cmd_train(load(train_args), train_args.out_dir, resume_path);
        if (eval->parsed()) cmd_eval(load(eval_args), eval_args.out_dir, checkpoint_path);
        if (render->parsed())
            cmd_render(load(render_args), render_args.out_dir, checkpoint_path, render_ids);
        if (rec->parsed())
            cmd_reconstruct(load(rec_args), rec_args.out_dir, checkpoint_path, input_path);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
