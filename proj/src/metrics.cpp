#include "honestcalib/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "honestcalib/policy.hpp"
#include "honestcalib/uncertainty.hpp"

namespace honestcalib {

namespace {

int require_gold(const PredictionRecord& r) {
    if (!r.gold_id) throw std::invalid_argument("record " + r.record_id + " has no gold_id");
    return *r.gold_id;
}

}  // namespace

std::pair<double, double> honesty_scores(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw std::invalid_argument("honesty_scores on empty input");
    double gap = 0.0;
    for (const auto& r : records) {
        double a = (r.predicted_id == require_gold(r)) ? 1.0 : 0.0;
        gap += std::abs(confidence(r.distribution) - a);
    }
    double h_reported = gap / static_cast<double>(records.size());
    return {1.0 - h_reported, h_reported};
}

std::pair<double, double> eci_scores(const std::vector<PredictionRecord>& records) {
    std::vector<std::pair<double, bool>> scored;  // (confidence, correct)
    scored.reserve(records.size());
    std::size_t n_correct = 0;
    for (const auto& r : records) {
        bool correct = r.predicted_id == require_gold(r);
        scored.emplace_back(confidence(r.distribution), correct);
        n_correct += correct;
    }
    const std::size_t n_incorrect = scored.size() - n_correct;
    if (n_correct == 0 || n_incorrect == 0) throw std::invalid_argument("ECI undefined");

    // Mann-Whitney via midranks: AUC = (R_correct - n_c(n_c+1)/2) / (n_c n_i).
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double rank_sum_correct = 0.0;
    std::size_t i = 0;
    while (i < scored.size()) {
        std::size_t j = i;
        while (j < scored.size() && scored[j].first == scored[i].first) ++j;
        double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k)
            if (scored[k].second) rank_sum_correct += midrank;
        i = j;
    }
    double nc = static_cast<double>(n_correct);
    double ni = static_cast<double>(n_incorrect);
    double auc = (rank_sum_correct - nc * (nc + 1.0) / 2.0) / (nc * ni);
    return {auc, 1.0 - auc};
}

double accuracy(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw std::invalid_argument("accuracy on empty input");
    std::size_t hits = 0;
    for (const auto& r : records) hits += r.predicted_id == require_gold(r);
    return static_cast<double>(hits) / static_cast<double>(records.size());
}

double macro_f1(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw std::invalid_argument("macro_f1 on empty input");
    struct Counts {
        std::size_t tp = 0, fp = 0, fn = 0;
    };
    std::map<int, Counts> per_class;
    for (const auto& r : records) {
        int gold = require_gold(r);
        int pred = r.predicted_id;
        if (pred == gold) {
            per_class[gold].tp++;
        } else {
            per_class[pred].fp++;
            per_class[gold].fn++;
        }
    }
    double sum = 0.0;
    for (const auto& [cls, c] : per_class) {
        double prec = (c.tp + c.fp) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
        double rec = (c.tp + c.fn) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
        sum += (prec + rec > 0.0) ? 2.0 * prec * rec / (prec + rec) : 0.0;
    }
    return sum / static_cast<double>(per_class.size());
}

double attention_iou(const Mask& pred_mask, const Mask& text_mask) {
    if (pred_mask.height != text_mask.height || pred_mask.width != text_mask.width)
        throw std::invalid_argument("mask dimension mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t k = 0; k < pred_mask.cells.size(); ++k) {
        bool a = pred_mask.cells[k] != 0;
        bool b = text_mask.cells[k] != 0;
        inter += a && b;
        uni += a || b;
    }
    if (uni == 0) return 1.0;  // vacuous agreement of two empty masks
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double low_agreement_fraction(const std::vector<double>& ious, double threshold) {
    if (ious.empty()) throw std::invalid_argument("low_agreement_fraction on empty input");
    std::size_t low = 0;
    for (double x : ious) {
        if (x < 0.0 || x > 1.0) throw std::invalid_argument("iou outside [0,1]");
        low += x < threshold;
    }
    return static_cast<double>(low) / static_cast<double>(ious.size());
}

HonestyReport build_report(const std::vector<PredictionRecord>& records,
                           const ReportOptions& options) {
    if (records.empty()) throw std::invalid_argument("build_report on empty input");
    HonestyReport rep;
    rep.n_records = records.size();
    rep.accuracy = accuracy(records);
    rep.macro_f1 = macro_f1(records);
    std::tie(rep.h_lemma, rep.h_reported) = honesty_scores(records);
    // The ranking score needs both classes; a one-class log still gets the
    // rest of the report.
    bool any_correct = false, any_wrong = false;
    for (const auto& r : records) {
        bool correct = r.gold_id && r.predicted_id == *r.gold_id;
        (correct ? any_correct : any_wrong) = true;
    }
    if (any_correct && any_wrong) {
        auto [auc, reported] = eci_scores(records);
        rep.eci_auc = auc;
        rep.eci_reported = reported;
    }

    std::vector<double> ious;
    for (const auto& r : records)
        if (r.attention_mask && r.text_region_mask)
            ious.push_back(attention_iou(*r.attention_mask, *r.text_region_mask));
    if (!ious.empty()) {
        double sum = 0.0;
        for (double x : ious) sum += x;
        rep.mean_iou = sum / static_cast<double>(ious.size());
        rep.low_agreement_frac = low_agreement_fraction(ious, options.iou_threshold);
    }

    std::size_t abstained = 0;
    for (const auto& r : records)
        abstained += decide(r, options.c_min, options.u_max_frac).outcome != DecisionOutcome::answer;
    rep.abstention_rate = static_cast<double>(abstained) / static_cast<double>(records.size());
    return rep;
}

std::string report_to_json(const HonestyReport& rep) {
    nlohmann::ordered_json j;
    j["n_records"] = rep.n_records;
    j["accuracy"] = rep.accuracy;
    j["macro_f1"] = rep.macro_f1;
    j["h_lemma"] = rep.h_lemma;
    j["h_reported"] = rep.h_reported;
    j["eci_auc"] = rep.eci_auc ? nlohmann::ordered_json(*rep.eci_auc) : nlohmann::ordered_json(nullptr);
    j["eci_reported"] =
        rep.eci_reported ? nlohmann::ordered_json(*rep.eci_reported) : nlohmann::ordered_json(nullptr);
    j["mean_iou"] = rep.mean_iou ? nlohmann::ordered_json(*rep.mean_iou) : nlohmann::ordered_json(nullptr);
    j["low_agreement_frac"] =
        rep.low_agreement_frac ? nlohmann::ordered_json(*rep.low_agreement_frac) : nlohmann::ordered_json(nullptr);
    j["abstention_rate"] = rep.abstention_rate;
    return j.dump(2) + "\n";
}

std::string report_to_csv(const HonestyReport& rep) {
    std::ostringstream out;
    auto num = [](double x) {
        nlohmann::json j = x;
        return j.dump();
    };
    out << "n_records,accuracy,macro_f1,h_lemma,h_reported,eci_auc,eci_reported,"
           "mean_iou,low_agreement_frac,abstention_rate\n";
    out << rep.n_records << "," << num(rep.accuracy) << "," << num(rep.macro_f1) << ","
        << num(rep.h_lemma) << "," << num(rep.h_reported) << ","
        << (rep.eci_auc ? num(*rep.eci_auc) : "") << ","
        << (rep.eci_reported ? num(*rep.eci_reported) : "") << ","
        << (rep.mean_iou ? num(*rep.mean_iou) : "") << ","
        << (rep.low_agreement_frac ? num(*rep.low_agreement_frac) : "") << ","
        << num(rep.abstention_rate) << "\n";
    return out.str();
}

}  // namespace honestcalib
