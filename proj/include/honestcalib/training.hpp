#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "honestcalib/mining.hpp"
#include "honestcalib/records.hpp"

namespace honestcalib {

struct ProjectionHead {
    std::size_t out_dim = 0;
    std::size_t in_dim = 0;
    std::vector<double> weights;  // row-major out_dim x in_dim
    Vec bias;

    double w(std::size_t r, std::size_t c) const { return weights[r * in_dim + c]; }
};

// Rescales recovered logits (ln p)/t before a re-softmax. softmax(ln p) is
// the identity on the simplex, so t = 1 reproduces the input distribution.
struct TemperatureScaler {
    double log_t = 0.0;

    double temperature() const;
    void clamp();  // keeps t within [0.01, 100]
};

struct TrainState {
    ProjectionHead head;
    TemperatureScaler scaler;
    std::uint64_t step = 0;
    std::uint64_t rng_seed = 0;
    std::vector<double> loss_history;  // per-epoch mean total loss
};

struct Gradients {
    std::vector<double> d_weights;  // same layout as head.weights
    Vec d_bias;
    double d_log_t = 0.0;
};

Vec project(const ProjectionHead& head, const Vec& v);

double cosine_sim(const Vec& u, const Vec& v);

// Tempered probabilities softmax((ln p)/t) over the distribution's entries.
std::vector<double> tempered_probs(const AnswerDistribution& dist, double t);

// Record with its distribution replaced by the tempered one. Strictly
// positive temperature preserves the argmax, so predicted_id is unchanged.
PredictionRecord apply_temperature(const PredictionRecord& record, double t);

double alignment_loss(const PredictionRecord& record, double alpha, double beta,
                      const TemperatureScaler& scaler);

double contrastive_loss(const Triplet& triplet, const ProjectionHead& head, double margin_m);

double total_loss(const std::vector<PredictionRecord>& batch, const std::vector<Triplet>& triplets,
                  const Hyperparams& params, const TrainState& state);

Gradients gradients(const std::vector<PredictionRecord>& batch,
                    const std::vector<Triplet>& triplets, const Hyperparams& params,
                    const TrainState& state);

TrainState init_state(const Hyperparams& params, std::size_t input_dim);

// Algorithm: per epoch, seeded shuffle -> batches -> mine triplets ->
// analytic gradients -> plain gradient-descent step. Input records are
// never mutated. Deterministic given params.seed.
TrainState train(const std::vector<PredictionRecord>& records, const Hyperparams& params);

void save_checkpoint(const std::string& path, const TrainState& state, const Hyperparams& params);
std::pair<TrainState, Hyperparams> load_checkpoint(const std::string& path);

std::string params_to_json(const Hyperparams& params);
Hyperparams params_from_json(const std::string& text);

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t n_configs = 0;
    bool pass = false;
};

// Compares analytic gradients against central finite differences (h = 1e-6)
// on randomized small configurations.
GradCheckResult gradcheck(std::uint64_t seed, std::size_t n_configs = 50);

}  // namespace honestcalib
