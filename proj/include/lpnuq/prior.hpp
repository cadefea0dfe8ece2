#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpnuq/common.hpp"

namespace lpnuq {

/// Scalar potential psi(z) that is convex in z by construction: hidden-to-
/// hidden weights are kept non-negative and the activation (softplus) is
/// convex and non-decreasing. Layout:
///
///   a1 = w1x z + b1
///   a2 = wz2 softplus(a1) + w2x z + b2
///   psi = w3 . softplus(a2) + w3x . z + (alpha/2) ||z||^2
///
/// The learned proximal map is the input gradient f(z) = grad psi(z).
struct PriorModel {
    int input_dim = 784;
    int hidden1 = 512;
    int hidden2 = 512;
    double beta = 2.0;   // softplus sharpness
    double alpha = 0.01; // quadratic term coefficient

    Mat w1x; // hidden1 x input_dim
    Vec b1;  // hidden1
    Mat wz2; // hidden2 x hidden1, entries >= 0
    Mat w2x; // hidden2 x input_dim
    Vec b2;  // hidden2
    Vec w3;  // hidden2, entries >= 0
    Vec w3x; // input_dim
};

/// Gradient (or momentum buffer) with the same shapes as the weights.
struct PriorGrads {
    Mat w1x;
    Vec b1;
    Mat wz2;
    Mat w2x;
    Vec b2;
    Vec w3;
    Vec w3x;
};

/// Deterministic random initialization; non-negative weights start
/// non-negative, so the model is convex from the first step.
PriorModel init_prior(int input_dim, int hidden1, int hidden2, double beta,
                      double alpha, std::uint64_t seed);

/// psi(z).
double potential(const PriorModel& m, const Vec& z);

/// f(z) = grad psi(z), computed in closed form (reverse mode), not by
/// finite differences.
Vec prox_apply(const PriorModel& m, const Vec& z);

/// Mean over the batch of 1 - exp(-||f(z_i) - x_i||^2 / gamma^2).
/// When grads is non-null it receives the exact parameter gradients of
/// that mean (differentiating through the input-gradient map).
double prox_match_loss(const PriorModel& m, const std::vector<Vec>& x,
                       const std::vector<Vec>& z, double gamma,
                       PriorGrads* grads = nullptr);

struct ProxMatchConfig {
    double gamma0 = 8.0;
    double gamma_min = 1.0;
    double gamma_decay = 0.8;   // applied between stages
    int gamma_stage_epochs = 12; // epochs spent at each gamma value
    double sigma_train = 0.1;
    int epochs = 132;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int hidden1 = 512;
    int hidden2 = 512;
    double beta = 2.0;
    double alpha = 0.01;
    std::uint64_t seed = 0;
};

struct TrainEpoch {
    int epoch = 0;
    double gamma = 0.0;
    double loss = 0.0;
};

struct TrainResult {
    PriorModel model;
    std::vector<TrainEpoch> log;
};

/// Raised when training produces a non-finite loss; carries the log of
/// the epochs completed before the failure.
struct TrainingError : std::runtime_error {
    TrainingError(const std::string& what, std::vector<TrainEpoch> partial)
        : std::runtime_error(what), log(std::move(partial))
    {
    }
    std::vector<TrainEpoch> log;
};

/// Adam training with staged gamma annealing and projection of the
/// non-negative weights after every step. Deterministic for a fixed
/// config, seed and dataset.
TrainResult train_prior(const std::vector<Vec>& images,
                        const ProxMatchConfig& cfg);

/// Versioned binary checkpoint (magic, version, layer sizes, little-endian
/// 64-bit floats). Round-trips bit-exactly.
void save_model(const PriorModel& m, const std::string& path);
PriorModel load_model(const std::string& path);

} // namespace lpnuq
