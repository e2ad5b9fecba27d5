#pragma once

#include "honestcalib/records.hpp"

namespace honestcalib {

enum class DecisionOutcome { answer, abstain_low_confidence, abstain_high_entropy };

struct Decision {
    DecisionOutcome outcome = DecisionOutcome::answer;
    int answer_id = -1;  // valid only when outcome == answer
    double confidence_c = 0.0;
    double entropy_u = 0.0;
};

// Inference-time abstention. Checks run in fixed order: confidence first
// (C < c_min), then entropy (U > u_max_frac * ln(k), k = entry count).
// Needs no gold answer.
Decision decide(const PredictionRecord& record, double c_min, double u_max_frac);

const char* outcome_name(DecisionOutcome outcome);

}  // namespace honestcalib
