#pragma once

#include <map>
#include <string>
#include <vector>

#include "honestcalib/vecmath.hpp"

namespace honestcalib::testsupport {

// Independent optimal-transport reference: successive-shortest-path
// min-cost flow over integer token multiplicities (cross-scaled so both
// sides have the same integral total). Exact up to float summation of the
// ground distances, so it shares no code path with the production solver.
double emd_oracle(const std::vector<std::string>& pred_tokens,
                  const std::vector<std::string>& gold_tokens,
                  const std::map<std::string, Vec>& token_embeddings);

}  // namespace honestcalib::testsupport
