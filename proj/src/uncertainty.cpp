#include "honestcalib/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace honestcalib {

namespace {

void require_normalized(const AnswerDistribution& dist) {
    if (dist.entries.empty()) throw std::invalid_argument("empty distribution");
    double sum = 0.0;
    for (const auto& e : dist.entries) sum += e.prob;
    if (sum < 1.0 - 1e-6 || sum > 1.0 + 1e-6)
        throw std::invalid_argument("distribution not normalized (sum=" + std::to_string(sum) + ")");
}

}  // namespace

double entropy(const AnswerDistribution& dist) {
    require_normalized(dist);
    double h = 0.0;
    for (const auto& e : dist.entries) {
        double p = std::clamp(e.prob, kProbFloor, 1.0);
        h -= p * std::log(p);
    }
    return h;
}

double confidence(const AnswerDistribution& dist) {
    require_normalized(dist);
    double c = 0.0;
    for (const auto& e : dist.entries) c = std::max(c, e.prob);
    return c;
}

UncertaintySignal uncertainty_signal(const AnswerDistribution& dist) {
    return {entropy(dist), confidence(dist)};
}

bool is_overconfident_failure(const PredictionRecord& record, double tau1, double tau2) {
    if (!record.gold_id) throw std::invalid_argument("gold required");
    if (record.predicted_id == *record.gold_id) return false;
    return confidence(record.distribution) > tau1 && entropy(record.distribution) < tau2;
}

}  // namespace honestcalib
