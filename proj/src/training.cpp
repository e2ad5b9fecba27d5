#include "honestcalib/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "honestcalib/rng.hpp"
#include "json.hpp"

namespace honestcalib {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kMinTemperature = 0.01;
constexpr double kMaxTemperature = 100.0;
constexpr double kNormTol = 1e-12;

// Seed-stream tags. Keeping the (a, b) spaces disjoint guarantees that the
// head init, the per-epoch shuffles and the per-batch mining draws never
// share an engine state.
std::uint64_t init_seed(std::uint64_t seed) { return mix_seed(seed, 1, 0); }
std::uint64_t shuffle_seed(std::uint64_t seed, std::uint64_t epoch) {
    return mix_seed(seed, 2, epoch);
}
std::uint64_t mining_seed(std::uint64_t seed, std::uint64_t epoch, std::uint64_t batch) {
    return mix_seed(seed, 3 + epoch, batch);
}
std::uint64_t gradcheck_seed(std::uint64_t seed, std::uint64_t config) {
    return mix_seed(seed, 4, config);
}

struct TemperedView {
    std::vector<double> z;  // recovered logits ln p
    std::vector<double> q;  // softmax(z / t)
    double zbar = 0.0;      // sum_i q_i z_i
};

TemperedView temper_dist(const AnswerDistribution& dist, double t) {
    if (dist.entries.empty()) throw std::invalid_argument("tempering requires a non-empty distribution");
    if (!std::isfinite(t) || t <= 0.0) throw std::invalid_argument("temperature must be positive and finite");
    TemperedView tv;
    tv.z.reserve(dist.entries.size());
    for (const auto& e : dist.entries) tv.z.push_back(std::log(std::clamp(e.prob, kProbFloor, 1.0)));
    double wmax = -std::numeric_limits<double>::infinity();
    for (double z : tv.z) wmax = std::max(wmax, z / t);
    tv.q.resize(tv.z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < tv.z.size(); ++i) {
        tv.q[i] = std::exp(tv.z[i] / t - wmax);
        sum += tv.q[i];
    }
    for (std::size_t i = 0; i < tv.q.size(); ++i) {
        tv.q[i] /= sum;
        tv.zbar += tv.q[i] * tv.z[i];
    }
    return tv;
}

int entry_index(const AnswerDistribution& dist, int answer_id) {
    for (std::size_t i = 0; i < dist.entries.size(); ++i)
        if (dist.entries[i].answer_id == answer_id) return static_cast<int>(i);
    return -1;
}

// d cos(u, v) / du_i = v_i / (|u||v|) - cos(u, v) * u_i / |u|^2
void add_cos_grad_u(Vec& out, const Vec& u, const Vec& v, double s, double nu, double nv,
                    double coef) {
    for (std::size_t i = 0; i < u.size(); ++i)
        out[i] += coef * (v[i] / (nu * nv) - s * u[i] / (nu * nu));
}

struct ProjectedTriplet {
    Vec pa, pp, pn;
    double na = 0.0, np = 0.0, nn = 0.0;
    double s_ap = 0.0, s_an = 0.0;
    double arg = 0.0;  // margin - s_ap + s_an
};

ProjectedTriplet project_triplet(const Triplet& t, const ProjectionHead& head, double margin) {
    ProjectedTriplet pt;
    pt.pa = project(head, t.anchor);
    pt.pp = project(head, t.positive);
    pt.pn = project(head, t.negative);
    pt.na = norm(pt.pa);
    pt.np = norm(pt.pp);
    pt.nn = norm(pt.pn);
    if (pt.na <= kNormTol || pt.np <= kNormTol || pt.nn <= kNormTol)
        throw std::invalid_argument("cosine similarity undefined for zero-norm vector");
    pt.s_ap = dot(pt.pa, pt.pp) / (pt.na * pt.np);
    pt.s_an = dot(pt.pa, pt.pn) / (pt.na * pt.nn);
    pt.arg = margin - pt.s_ap + pt.s_an;
    return pt;
}

ordered_json params_json(const Hyperparams& p) {
    ordered_json j;
    j["alpha"] = p.alpha;
    j["beta"] = p.beta;
    j["margin_m"] = p.margin_m;
    j["lambda1"] = p.lambda1;
    j["lambda2"] = p.lambda2;
    j["delta"] = p.delta;
    j["tau1"] = p.tau1;
    j["tau2"] = p.tau2;
    j["learning_rate"] = p.learning_rate;
    j["epochs"] = p.epochs;
    j["seed"] = p.seed;
    j["projection_dim"] = p.projection_dim;
    j["batch_size"] = p.batch_size;
    j["strict_alignment"] = p.strict_alignment;
    j["hard_negatives"] = p.hard_negatives;
    j["use_gold_positive"] = p.use_gold_positive;
    j["calibrate_temperature"] = p.calibrate_temperature;
    return j;
}

Hyperparams params_from(const ordered_json& j) {
    static const char* keys[] = {"alpha",       "beta",          "margin_m",
                                 "lambda1",     "lambda2",       "delta",
                                 "tau1",        "tau2",          "learning_rate",
                                 "epochs",      "seed",          "projection_dim",
                                 "batch_size",  "strict_alignment", "hard_negatives",
                                 "use_gold_positive", "calibrate_temperature"};
    if (!j.is_object()) throw std::invalid_argument("hyperparams: expected a JSON object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : keys) known = known || item.key() == k;
        if (!known) throw std::invalid_argument("hyperparams: unknown key \"" + item.key() + "\"");
    }
    for (const char* k : keys)
        if (!j.contains(k)) throw std::invalid_argument(std::string("hyperparams: missing key \"") + k + "\"");
    Hyperparams p;
    p.alpha = j.at("alpha").get<double>();
    p.beta = j.at("beta").get<double>();
    p.margin_m = j.at("margin_m").get<double>();
    p.lambda1 = j.at("lambda1").get<double>();
    p.lambda2 = j.at("lambda2").get<double>();
    p.delta = j.at("delta").get<double>();
    p.tau1 = j.at("tau1").get<double>();
    p.tau2 = j.at("tau2").get<double>();
    p.learning_rate = j.at("learning_rate").get<double>();
    p.epochs = j.at("epochs").get<int>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.projection_dim = j.at("projection_dim").get<int>();
    p.batch_size = j.at("batch_size").get<int>();
    p.strict_alignment = j.at("strict_alignment").get<bool>();
    p.hard_negatives = j.at("hard_negatives").get<bool>();
    p.use_gold_positive = j.at("use_gold_positive").get<bool>();
    p.calibrate_temperature = j.at("calibrate_temperature").get<bool>();
    return p;
}

}  // namespace

double TemperatureScaler::temperature() const { return std::exp(log_t); }

void TemperatureScaler::clamp() {
    if (!std::isfinite(log_t)) throw std::runtime_error("temperature diverged: non-finite log_t");
    log_t = std::clamp(log_t, std::log(kMinTemperature), std::log(kMaxTemperature));
}

Vec project(const ProjectionHead& head, const Vec& v) {
    if (v.size() != head.in_dim) throw std::invalid_argument("projection input dim mismatch");
    if (head.weights.size() != head.out_dim * head.in_dim || head.bias.size() != head.out_dim)
        throw std::invalid_argument("projection head shape mismatch");
    Vec out(head.out_dim);
    for (std::size_t r = 0; r < head.out_dim; ++r) {
        double acc = head.bias[r];
        const double* row = head.weights.data() + r * head.in_dim;
        for (std::size_t c = 0; c < head.in_dim; ++c) acc += row[c] * v[c];
        out[r] = acc;
    }
    return out;
}

double cosine_sim(const Vec& u, const Vec& v) {
    double nu = norm(u);
    double nv = norm(v);
    if (nu <= kNormTol || nv <= kNormTol)
        throw std::invalid_argument("cosine similarity undefined for zero-norm vector");
    return dot(u, v) / (nu * nv);
}

std::vector<double> tempered_probs(const AnswerDistribution& dist, double t) {
    return temper_dist(dist, t).q;
}

PredictionRecord apply_temperature(const PredictionRecord& record, double t) {
    PredictionRecord out = record;
    auto q = tempered_probs(record.distribution, t);
    for (std::size_t i = 0; i < q.size(); ++i)
        out.distribution.entries[i].prob = std::clamp(q[i], kProbFloor, 1.0);
    return out;
}

double alignment_loss(const PredictionRecord& record, double alpha, double beta,
                      const TemperatureScaler& scaler) {
    if (!record.gold_id) throw std::invalid_argument("alignment loss requires gold_id");
    TemperedView tv = temper_dist(record.distribution, scaler.temperature());
    int pred_idx = entry_index(record.distribution, record.predicted_id);
    if (pred_idx < 0) throw std::invalid_argument("predicted_id missing from distribution");
    double c_t = tv.q[static_cast<std::size_t>(pred_idx)];
    bool wrong = record.predicted_id != *record.gold_id;
    int gold_idx = entry_index(record.distribution, *record.gold_id);
    double q_gold = gold_idx >= 0 ? tv.q[static_cast<std::size_t>(gold_idx)] : 0.0;
    double ce = -std::log(std::max(q_gold, kProbFloor));
    return alpha * (wrong ? 1.0 : 0.0) * c_t + beta * ce;
}

double contrastive_loss(const Triplet& triplet, const ProjectionHead& head, double margin_m) {
    ProjectedTriplet pt = project_triplet(triplet, head, margin_m);
    return std::max(0.0, pt.arg);
}

double total_loss(const std::vector<PredictionRecord>& batch, const std::vector<Triplet>& triplets,
                  const Hyperparams& params, const TrainState& state) {
    double align_sum = 0.0;
    std::size_t n_gold = 0;
    for (const auto& r : batch) {
        if (!r.gold_id) continue;
        align_sum += alignment_loss(r, params.alpha, params.beta, state.scaler);
        ++n_gold;
    }
    if (n_gold == 0) throw std::invalid_argument("total loss requires at least one gold-bearing record");
    double loss = params.lambda1 * (align_sum / static_cast<double>(n_gold));
    if (!triplets.empty()) {
        double contr_sum = 0.0;
        for (const auto& t : triplets) contr_sum += contrastive_loss(t, state.head, params.margin_m);
        loss += params.lambda2 * (contr_sum / static_cast<double>(triplets.size()));
    }
    return loss;
}

Gradients gradients(const std::vector<PredictionRecord>& batch,
                    const std::vector<Triplet>& triplets, const Hyperparams& params,
                    const TrainState& state) {
    Gradients g;
    g.d_weights.assign(state.head.weights.size(), 0.0);
    g.d_bias.assign(state.head.out_dim, 0.0);

    // Temperature gradient. With s = log_t, z_i = ln p_i and q = softmax(z/t):
    //   dq_i/ds = (q_i / t) (zbar - z_i)
    // so the misranking term contributes alpha * (q_m / t)(zbar - z_m) and the
    // cross-entropy term beta * (z_g - zbar) / t (zero when the gold id is
    // absent, i.e. when the floored constant is in effect).
    double t = state.scaler.temperature();
    double ds_sum = 0.0;
    std::size_t n_gold = 0;
    for (const auto& r : batch) {
        if (!r.gold_id) continue;
        TemperedView tv = temper_dist(r.distribution, t);
        int pred_idx = entry_index(r.distribution, r.predicted_id);
        if (pred_idx < 0) throw std::invalid_argument("predicted_id missing from distribution");
        bool wrong = r.predicted_id != *r.gold_id;
        double ds = 0.0;
        if (wrong) {
            double qm = tv.q[static_cast<std::size_t>(pred_idx)];
            double zm = tv.z[static_cast<std::size_t>(pred_idx)];
            ds += params.alpha * (qm / t) * (tv.zbar - zm);
        }
        int gold_idx = entry_index(r.distribution, *r.gold_id);
        if (gold_idx >= 0 && tv.q[static_cast<std::size_t>(gold_idx)] > kProbFloor) {
            double zg = tv.z[static_cast<std::size_t>(gold_idx)];
            ds += params.beta * (zg - tv.zbar) / t;
        }
        ds_sum += ds;
        ++n_gold;
    }
    if (n_gold == 0) throw std::invalid_argument("gradients require at least one gold-bearing record");
    g.d_log_t = params.lambda1 * ds_sum / static_cast<double>(n_gold);

    if (triplets.empty() || params.lambda2 == 0.0) return g;

    const std::size_t out_dim = state.head.out_dim;
    const std::size_t in_dim = state.head.in_dim;
    Vec dpa(out_dim), dpp(out_dim), dpn(out_dim);
    for (const auto& trip : triplets) {
        ProjectedTriplet pt = project_triplet(trip, state.head, params.margin_m);
        if (pt.arg <= 0.0) continue;  // hinge inactive; subgradient 0 at the kink
        std::fill(dpa.begin(), dpa.end(), 0.0);
        std::fill(dpp.begin(), dpp.end(), 0.0);
        std::fill(dpn.begin(), dpn.end(), 0.0);
        add_cos_grad_u(dpa, pt.pa, pt.pp, pt.s_ap, pt.na, pt.np, -1.0);
        add_cos_grad_u(dpa, pt.pa, pt.pn, pt.s_an, pt.na, pt.nn, +1.0);
        add_cos_grad_u(dpp, pt.pp, pt.pa, pt.s_ap, pt.np, pt.na, -1.0);
        add_cos_grad_u(dpn, pt.pn, pt.pa, pt.s_an, pt.nn, pt.na, +1.0);
        for (std::size_t r = 0; r < out_dim; ++r) {
            double* wrow = g.d_weights.data() + r * in_dim;
            for (std::size_t c = 0; c < in_dim; ++c)
                wrow[c] += dpa[r] * trip.anchor[c] + dpp[r] * trip.positive[c] +
                           dpn[r] * trip.negative[c];
            g.d_bias[r] += dpa[r] + dpp[r] + dpn[r];
        }
    }
    double coef = params.lambda2 / static_cast<double>(triplets.size());
    for (auto& w : g.d_weights) w *= coef;
    for (auto& b : g.d_bias) b *= coef;
    return g;
}

TrainState init_state(const Hyperparams& params, std::size_t input_dim) {
    if (input_dim == 0) throw std::invalid_argument("input dim must be positive");
    if (params.projection_dim <= 0) throw std::invalid_argument("projection_dim must be positive");
    TrainState st;
    st.head.out_dim = static_cast<std::size_t>(params.projection_dim);
    st.head.in_dim = input_dim;
    st.head.weights.resize(st.head.out_dim * st.head.in_dim);
    Rng rng(init_seed(params.seed));
    for (auto& w : st.head.weights) w = rng.uniform(-0.05, 0.05);
    st.head.bias.assign(st.head.out_dim, 0.0);
    st.scaler.log_t = 0.0;
    st.rng_seed = params.seed;
    return st;
}

TrainState train(const std::vector<PredictionRecord>& records, const Hyperparams& params) {
    if (records.empty()) throw std::invalid_argument("training requires records");
    if (params.batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
    if (params.epochs < 0) throw std::invalid_argument("epochs must be non-negative");
    if (!(params.learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be non-negative");
    const std::size_t d_in = records[0].anchor_embedding.size();
    bool any_gold = false;
    for (const auto& r : records) {
        if (r.anchor_embedding.size() != d_in || r.answer_embedding.size() != d_in)
            throw std::invalid_argument("inconsistent embedding dims across records");
        any_gold = any_gold || r.gold_id.has_value();
    }
    if (!any_gold) throw std::invalid_argument("training requires at least one gold-bearing record");

    TrainState st = init_state(params, d_in);
    const std::size_t bs = static_cast<std::size_t>(params.batch_size);
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        Rng shuffle_rng(shuffle_seed(params.seed, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        double epoch_sum = 0.0;
        std::size_t counted = 0;
        for (std::size_t start = 0, bi = 0; start < order.size(); start += bs, ++bi) {
            std::size_t stop = std::min(start + bs, order.size());
            std::vector<PredictionRecord> batch;
            batch.reserve(stop - start);
            bool batch_gold = false;
            for (std::size_t i = start; i < stop; ++i) {
                batch.push_back(records[order[i]]);
                batch_gold = batch_gold || batch.back().gold_id.has_value();
            }
            if (!batch_gold) continue;
            auto triplets = mine_triplets(
                batch, params, mining_seed(params.seed, static_cast<std::uint64_t>(epoch), bi));
            double loss = total_loss(batch, triplets, params, st);
            if (!std::isfinite(loss)) throw std::runtime_error("training diverged: non-finite loss");
            Gradients g = gradients(batch, triplets, params, st);
            for (std::size_t i = 0; i < st.head.weights.size(); ++i)
                st.head.weights[i] -= params.learning_rate * g.d_weights[i];
            for (std::size_t i = 0; i < st.head.bias.size(); ++i)
                st.head.bias[i] -= params.learning_rate * g.d_bias[i];
            if (params.calibrate_temperature) {
                st.scaler.log_t -= params.learning_rate * g.d_log_t;
                st.scaler.clamp();
            }
            ++st.step;
            epoch_sum += loss;
            ++counted;
        }
        double mean_loss = counted > 0 ? epoch_sum / static_cast<double>(counted) : 0.0;
        if (!std::isfinite(mean_loss)) throw std::runtime_error("training diverged: non-finite loss");
        st.loss_history.push_back(mean_loss);
    }
    return st;
}

void save_checkpoint(const std::string& path, const TrainState& state, const Hyperparams& params) {
    ordered_json j;
    j["format"] = "honestcalib-checkpoint";
    j["version"] = 1;
    j["head"] = {{"out_dim", state.head.out_dim},
                 {"in_dim", state.head.in_dim},
                 {"weights", state.head.weights},
                 {"bias", state.head.bias}};
    j["log_t"] = state.scaler.log_t;
    j["step"] = state.step;
    j["seed"] = state.rng_seed;
    j["loss_history"] = state.loss_history;
    j["params"] = params_json(params);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

std::pair<TrainState, Hyperparams> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const std::exception& e) {
        throw std::runtime_error("checkpoint " + path + ": " + e.what());
    }
    if (!j.is_object() || j.value("format", std::string{}) != "honestcalib-checkpoint")
        throw std::runtime_error("checkpoint " + path + ": unrecognized format");
    if (j.value("version", 0) != 1)
        throw std::runtime_error("checkpoint " + path + ": unsupported version");
    TrainState st;
    const auto& h = j.at("head");
    st.head.out_dim = h.at("out_dim").get<std::size_t>();
    st.head.in_dim = h.at("in_dim").get<std::size_t>();
    st.head.weights = h.at("weights").get<std::vector<double>>();
    st.head.bias = h.at("bias").get<Vec>();
    if (st.head.weights.size() != st.head.out_dim * st.head.in_dim ||
        st.head.bias.size() != st.head.out_dim)
        throw std::runtime_error("checkpoint " + path + ": head shape mismatch");
    st.scaler.log_t = j.at("log_t").get<double>();
    st.scaler.clamp();
    st.step = j.at("step").get<std::uint64_t>();
    st.rng_seed = j.at("seed").get<std::uint64_t>();
    st.loss_history = j.at("loss_history").get<std::vector<double>>();
    Hyperparams p = params_from(j.at("params"));
    return {std::move(st), p};
}

std::string params_to_json(const Hyperparams& params) { return params_json(params).dump(2) + "\n"; }

Hyperparams params_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("hyperparams: ") + e.what());
    }
    return params_from(j);
}

GradCheckResult gradcheck(std::uint64_t seed, std::size_t n_configs) {
    GradCheckResult res;
    res.n_configs = n_configs;
    const double h = 1e-6;
    // Relative error with a small absolute floor so that near-zero
    // coordinates are compared at a meaningful scale.
    auto rel_err = [](double a, double b) {
        return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-2});
    };

    for (std::size_t cfg = 0; cfg < n_configs; ++cfg) {
        Rng rng(gradcheck_seed(seed, cfg));
        std::size_t d_in = 2 + rng.below(7);
        std::size_t d_proj = 2 + rng.below(3);
        std::size_t bsz = 2 + rng.below(5);

        Hyperparams hp;
        hp.alpha = rng.uniform(0.3, 1.5);
        hp.beta = rng.uniform(0.3, 1.5);
        hp.lambda1 = rng.uniform(0.3, 1.5);
        hp.lambda2 = rng.uniform(0.3, 1.5);
        hp.margin_m = rng.uniform(0.1, 0.8);
        hp.projection_dim = static_cast<int>(d_proj);

        TrainState st;
        st.head.out_dim = d_proj;
        st.head.in_dim = d_in;
        st.head.weights.resize(d_proj * d_in);
        for (auto& w : st.head.weights) w = rng.uniform(-0.6, 0.6);
        st.head.bias.resize(d_proj);
        for (auto& b : st.head.bias) b = rng.uniform(-0.2, 0.2);
        st.scaler.log_t = rng.uniform(-0.5, 0.5);

        std::vector<PredictionRecord> batch;
        for (std::size_t i = 0; i < bsz; ++i) {
            PredictionRecord r;
            r.record_id = "g" + std::to_string(i);
            std::size_t k = 2 + rng.below(4);
            double sum = 0.0;
            for (std::size_t jj = 0; jj < k; ++jj) {
                double p = 0.2 + rng.uniform01();
                r.distribution.entries.push_back({static_cast<int>(jj), p});
                sum += p;
            }
            for (auto& e : r.distribution.entries) e.prob /= sum;
            r.distribution.vocab_size = static_cast<int>(k);
            r.predicted_id = r.distribution.entries[argmax_entry(r.distribution)].answer_id;
            r.gold_id = rng.bernoulli(0.5) ? r.predicted_id : static_cast<int>(rng.below(k));
            batch.push_back(std::move(r));
        }

        // Raw vector triplets kept away from the hinge kink and from
        // degenerate projections so central differences stay valid.
        std::vector<Triplet> triplets;
        std::size_t want = 1 + rng.below(3);
        for (std::size_t ti = 0; ti < want; ++ti) {
            for (int attempt = 0; attempt < 50; ++attempt) {
                Triplet t;
                t.anchor.resize(d_in);
                t.positive.resize(d_in);
                t.negative.resize(d_in);
                for (auto& x : t.anchor) x = rng.gaussian();
                for (auto& x : t.positive) x = rng.gaussian();
                for (auto& x : t.negative) x = rng.gaussian();
                t.anchor_record_id = "a";
                t.positive_record_id = "p";
                t.negative_record_id = "n";
                ProjectedTriplet pt;
                try {
                    pt = project_triplet(t, st.head, hp.margin_m);
                } catch (const std::invalid_argument&) {
                    continue;
                }
                if (pt.na < 0.05 || pt.np < 0.05 || pt.nn < 0.05) continue;
                if (std::fabs(pt.arg) < 1e-3) continue;
                triplets.push_back(std::move(t));
                break;
            }
        }

        Gradients g = gradients(batch, triplets, hp, st);
        auto eval = [&](const TrainState& s) { return total_loss(batch, triplets, hp, s); };

        for (std::size_t i = 0; i < st.head.weights.size(); ++i) {
            TrainState plus = st, minus = st;
            plus.head.weights[i] += h;
            minus.head.weights[i] -= h;
            double fd = (eval(plus) - eval(minus)) / (2.0 * h);
            res.max_rel_err = std::max(res.max_rel_err, rel_err(fd, g.d_weights[i]));
        }
        for (std::size_t i = 0; i < st.head.bias.size(); ++i) {
            TrainState plus = st, minus = st;
            plus.head.bias[i] += h;
            minus.head.bias[i] -= h;
            double fd = (eval(plus) - eval(minus)) / (2.0 * h);
            res.max_rel_err = std::max(res.max_rel_err, rel_err(fd, g.d_bias[i]));
        }
        {
            TrainState plus = st, minus = st;
            plus.scaler.log_t += h;
            minus.scaler.log_t -= h;
            double fd = (eval(plus) - eval(minus)) / (2.0 * h);
            res.max_rel_err = std::max(res.max_rel_err, rel_err(fd, g.d_log_t));
        }
    }
    res.pass = res.max_rel_err < 1e-5;
    return res;
}

}  // namespace honestcalib
