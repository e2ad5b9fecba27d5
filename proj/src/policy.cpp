#include "honestcalib/policy.hpp"

#include <cmath>

#include "honestcalib/uncertainty.hpp"

namespace honestcalib {

Decision decide(const PredictionRecord& record, double c_min, double u_max_frac) {
    Decision d;
    d.confidence_c = confidence(record.distribution);
    d.entropy_u = entropy(record.distribution);
    const double k = static_cast<double>(record.distribution.entries.size());
    if (d.confidence_c < c_min) {
        d.outcome = DecisionOutcome::abstain_low_confidence;
    } else if (d.entropy_u > u_max_frac * std::log(k)) {
        d.outcome = DecisionOutcome::abstain_high_entropy;
    } else {
        d.outcome = DecisionOutcome::answer;
        d.answer_id = record.predicted_id;
    }
    return d;
}

const char* outcome_name(DecisionOutcome outcome) {
    switch (outcome) {
        case DecisionOutcome::answer: return "answer";
        case DecisionOutcome::abstain_low_confidence: return "low_confidence";
        case DecisionOutcome::abstain_high_entropy: return "high_entropy";
    }
    return "?";
}

}  // namespace honestcalib
