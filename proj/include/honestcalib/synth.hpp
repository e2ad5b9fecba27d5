#pragma once

#include <cstdint>
#include <vector>

#include "honestcalib/records.hpp"

namespace honestcalib {

// Generator knobs. rho controls how strongly confidence tracks correctness:
// 0 gives confidence independent of correctness, 1 gives near-perfect
// separation. contamination is the base rate of overconfident-failure
// injection; it is scaled by (1 - rho) so a fully calibrated corpus has none.
struct SynthConfig {
    std::size_t n_records = 500;
    int vocab_size = 16;
    double rho = 0.3;
    std::size_t embedding_dim = 16;
    std::size_t token_dim = 8;
    double noise_sigma = 0.1;
    double contamination = 0.18;
    std::uint64_t seed = 0;
};

// Deterministic given the full config. Every record passes validate_record
// and carries gold labels, token bags, embeddings and masks.
std::vector<PredictionRecord> generate(const SynthConfig& config);

}  // namespace honestcalib
