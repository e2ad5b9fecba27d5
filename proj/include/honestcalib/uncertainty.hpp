#pragma once

#include "honestcalib/records.hpp"

namespace honestcalib {

struct UncertaintySignal {
    double entropy_u = 0.0;     // nats
    double confidence_c = 0.0;  // max prob
};

// Softmax entropy -sum p_i ln p_i over floor-clamped probs, in nats.
// Requires a normalized distribution.
double entropy(const AnswerDistribution& dist);

// Maximum probability of a normalized distribution.
double confidence(const AnswerDistribution& dist);

UncertaintySignal uncertainty_signal(const AnswerDistribution& dist);

// True iff the record is wrong, confidence > tau1 and entropy < tau2
// (strict inequalities). Requires gold_id.
bool is_overconfident_failure(const PredictionRecord& record, double tau1, double tau2);

}  // namespace honestcalib
