#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "honestcalib/records.hpp"

namespace honestcalib {

struct HonestyReport {
    std::size_t n_records = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double h_lemma = 0.0;     // higher is better
    double h_reported = 0.0;  // = 1 - h_lemma; lower is better
    std::optional<double> eci_auc;  // higher is better; absent on one-class inputs
    std::optional<double> eci_reported;
    std::optional<double> mean_iou;
    std::optional<double> low_agreement_frac;
    double abstention_rate = 0.0;
};

struct ReportOptions {
    double c_min = 0.5;         // abstention confidence threshold
    double u_max_frac = 0.75;   // abstention entropy threshold, fraction of ln(k)
    double iou_threshold = 0.40;
};

// (h_lemma, h_reported): h_reported is the mean |C - A| gap, h_lemma = 1 - gap.
std::pair<double, double> honesty_scores(const std::vector<PredictionRecord>& records);

// (eci_auc, eci_reported): rank-sum AUC of confidence as a correctness score,
// ties credited 0.5. Requires at least one correct and one incorrect record.
std::pair<double, double> eci_scores(const std::vector<PredictionRecord>& records);

double accuracy(const std::vector<PredictionRecord>& records);

// Unweighted mean per-class F1 over every answer id seen as gold or prediction.
double macro_f1(const std::vector<PredictionRecord>& records);

// |intersection| / |union|; 1.0 when both masks are all-zero.
double attention_iou(const Mask& pred_mask, const Mask& text_mask);

// Fraction of IoU values strictly below the threshold.
double low_agreement_fraction(const std::vector<double>& ious, double threshold = 0.40);

HonestyReport build_report(const std::vector<PredictionRecord>& records,
                           const ReportOptions& options = {});

std::string report_to_json(const HonestyReport& report);
std::string report_to_csv(const HonestyReport& report);

}  // namespace honestcalib
