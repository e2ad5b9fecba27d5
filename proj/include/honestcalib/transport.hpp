#pragma once

#include <map>
#include <string>
#include <vector>

#include "honestcalib/vecmath.hpp"

namespace honestcalib {

// Weighted token multiset; duplicate token strings are merged and weights
// normalized to sum 1 on construction.
struct TokenBag {
    struct Item {
        std::string token;
        double weight = 0.0;
        Vec embedding;
    };
    std::vector<Item> items;
};

struct TransportPlan {
    std::size_t rows = 0;  // source tokens
    std::size_t cols = 0;  // target tokens
    std::vector<double> flows;  // row-major, >= 0
    double cost = 0.0;

    double flow(std::size_t i, std::size_t j) const { return flows[i * cols + j]; }
};

// Uniform-weight bag (1/n per occurrence, duplicates merged). Throws when a
// token has no embedding, naming the token.
TokenBag make_bag(const std::vector<std::string>& tokens,
                  const std::map<std::string, Vec>& token_embeddings);

// Pairwise Euclidean distances between the bags' token embeddings.
std::vector<double> ground_distances(const TokenBag& a, const TokenBag& b);

// Exact balanced optimal transport via the transportation simplex.
// Bags above 64 merged tokens are rejected ("instance too large").
TransportPlan solve_emd(const TokenBag& a, const TokenBag& b);

// Word Mover's Distance between two token sequences.
double wmd(const std::vector<std::string>& pred_tokens,
           const std::vector<std::string>& gold_tokens,
           const std::map<std::string, Vec>& token_embeddings);

// Debug dump of a plan as "row,col,flow" CSV lines.
std::string plan_to_csv(const TransportPlan& plan);

}  // namespace honestcalib
