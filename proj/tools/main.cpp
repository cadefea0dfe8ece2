#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "lpnuq/config.hpp"
#include "lpnuq/experiment.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string data_dir;
    std::string output_dir;
    std::string checkpoint;
    std::optional<int> jobs;
    std::optional<std::uint64_t> seed;
    std::optional<int> n_views;
    std::optional<double> threshold;
};

void add_common(CLI::App* cmd, CommonFlags& f)
{
    cmd->add_option("--config", f.config_path, "key = value configuration file");
    cmd->add_option("--data-dir", f.data_dir,
                    "MNIST directory (also via LPNUQ_DATA_DIR)");
    cmd->add_option("--output-dir", f.output_dir, "output directory");
    cmd->add_option("--checkpoint", f.checkpoint, "model checkpoint path");
    cmd->add_option("--jobs", f.jobs, "parallel sweep workers (0 = all cores)")
        ->check(CLI::Range(0, 4096));
}

lpnuq::Config build_config(const CommonFlags& f)
{
    lpnuq::Config c = f.config_path.empty()
        ? lpnuq::Config()
        : lpnuq::Config::from_file(f.config_path);
    // Precedence: flags > environment > file.
    if (const char* env = std::getenv("LPNUQ_DATA_DIR"))
        c.set("data_dir", env);
    if (!f.data_dir.empty())
        c.set("data_dir", f.data_dir);
    if (!f.output_dir.empty())
        c.set("output_dir", f.output_dir);
    if (!f.checkpoint.empty())
        c.set("checkpoint", f.checkpoint);
    if (f.jobs)
        c.set("jobs", std::to_string(*f.jobs));
    if (f.n_views)
        c.set("n_views", std::to_string(*f.n_views));
    if (f.threshold)
        c.set("threshold", std::to_string(*f.threshold));
    return c;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Sparse-view fan-beam reconstruction with a learned "
                 "proximal prior and resampling-based uncertainty scores"};
    app.require_subcommand(1);

    CommonFlags train_f, recon_f, uq_f, exp_f;
    int digit = 0, index = 0, unit_seed = 0;
    std::string method = "lpn";

    CLI::App* train = app.add_subcommand(
        "train", "Train the prior on the configured digit and save a checkpoint");
    add_common(train, train_f);
    train->add_option("--digit", digit, "digit to train on (default 0)")
        ->check(CLI::Range(0, 9));
    train->add_option("--seed", train_f.seed, "training RNG seed");

    CLI::App* recon = app.add_subcommand(
        "reconstruct", "Reconstruct one eval image from one seeded measurement");
    add_common(recon, recon_f);
    recon->add_option("--digit", digit, "eval digit")
        ->required()
        ->check(CLI::Range(0, 9));
    recon->add_option("--index", index, "eval image index within the digit")
        ->required()
        ->check(CLI::Range(0, 999));
    recon->add_option("--n-views", recon_f.n_views, "number of views");
    recon->add_option("--seed", unit_seed, "seed index within the unit")
        ->check(CLI::Range(0, 1000000));
    recon->add_option("--method", method, "lpn or fbp")
        ->check(CLI::IsMember({"lpn", "fbp"}));

    CLI::App* uq = app.add_subcommand(
        "uq", "Resample measurements, reconstruct per seed, report variability");
    add_common(uq, uq_f);
    uq->add_option("--digit", digit, "eval digit")
        ->required()
        ->check(CLI::Range(0, 9));
    uq->add_option("--index", index, "eval image index within the digit")
        ->required()
        ->check(CLI::Range(0, 999));
    uq->add_option("--n-views", uq_f.n_views, "number of views");
    uq->add_option("--seed", uq_f.seed, "base seed");
    uq->add_option("--threshold", uq_f.threshold, "flag score above this")
        ->check(CLI::NonNegativeNumber);

    CLI::App* exp = app.add_subcommand(
        "experiment", "Full sweep: digits x images x budgets x {lpn, fbp}");
    add_common(exp, exp_f);
    exp->add_option("--seed", exp_f.seed, "base seed");
    exp->add_option("--n-views", exp_f.n_views,
                    "restrict the sweep to a single budget");
    exp->add_option("--threshold", exp_f.threshold, "flag scores above this")
        ->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    // Phase 1: assemble and validate the run configuration (usage errors).
    lpnuq::ExperimentConfig cfg;
    try {
        if (train->parsed()) {
            lpnuq::Config c = build_config(train_f);
            if (train->count("--digit"))
                c.set("train_digit", std::to_string(digit));
            if (train_f.seed)
                c.set("train_seed", std::to_string(*train_f.seed));
            cfg = lpnuq::make_experiment_config(c);
        } else if (recon->parsed()) {
            cfg = lpnuq::make_experiment_config(build_config(recon_f));
        } else if (uq->parsed()) {
            lpnuq::Config c = build_config(uq_f);
            if (uq_f.seed)
                c.set("base_seed", std::to_string(*uq_f.seed));
            cfg = lpnuq::make_experiment_config(c);
        } else {
            lpnuq::Config c = build_config(exp_f);
            if (exp_f.seed)
                c.set("base_seed", std::to_string(*exp_f.seed));
            if (exp_f.n_views)
                c.set("budgets", std::to_string(*exp_f.n_views));
            cfg = lpnuq::make_experiment_config(c);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    // Phase 2: run (runtime errors).
    try {
        if (train->parsed())
            return lpnuq::cmd_train(cfg);
        if (recon->parsed())
            return lpnuq::cmd_reconstruct(cfg, digit, index, cfg.n_views,
                                          unit_seed, method);
        if (uq->parsed())
            return lpnuq::cmd_uq(cfg, digit, index, cfg.n_views);
        return lpnuq::cmd_experiment(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
