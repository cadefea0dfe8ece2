#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lpnuq/config.hpp"
#include "lpnuq/fbp.hpp"
#include "lpnuq/geometry.hpp"
#include "lpnuq/mnist.hpp"
#include "lpnuq/prior.hpp"
#include "lpnuq/solver.hpp"
#include "lpnuq/uq.hpp"

namespace lpnuq {

struct ExperimentConfig {
    ScanGeometry geometry;
    std::vector<int> budgets{11, 22, 33};
    int n_views = 11; // default budget for single-shot commands
    int n_seeds = 10;
    double sigma = 2.0;
    std::uint64_t base_seed = 0;
    ResampleMode resample_mode = ResampleMode::FreshAcquisition;
    SolveConfig solver;
    FbpConfig fbp;
    int train_digit = 0;
    int eval_per_digit = 10;
    std::uint64_t split_seed = 0;
    ProxMatchConfig training;
    std::string data_dir = "data";
    std::string output_dir = "out";
    std::string checkpoint = "out/model.lpn";
    int jobs = 0; // 0: one worker per hardware thread
    std::optional<double> threshold;
};

/// Materialize and validate a run configuration from parsed key/value
/// pairs. Flag and environment overrides are applied to the Config by the
/// caller before this call.
ExperimentConfig make_experiment_config(const Config& cfg);

/// Root seed of one (digit, image, budget) unit. Reconstruct, uq and the
/// sweep all derive their per-seed angle/noise streams from this, so the
/// same unit sees the same measurements everywhere (and both methods
/// reconstruct from identical data).
std::uint64_t cell_seed(std::uint64_t base, int digit, int image, int n_views);

/// Load the train/eval splits from the MNIST files in cfg.data_dir.
Splits load_splits(const ExperimentConfig& cfg);

int cmd_train(const ExperimentConfig& cfg);
int cmd_reconstruct(const ExperimentConfig& cfg, int digit, int index,
                    int n_views, int seed, const std::string& method);
int cmd_uq(const ExperimentConfig& cfg, int digit, int index, int n_views);

/// Full sweep over digits x eval images x budgets x {lpn, fbp}. Completed
/// units are skipped on rerun; returns 3 when some units failed.
int cmd_experiment(const ExperimentConfig& cfg);

} // namespace lpnuq
