#include "honestcalib/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "honestcalib/rng.hpp"

namespace honestcalib {

namespace {

constexpr double kAccuracy = 0.7;       // base correctness rate
constexpr double kConfFloor = 0.10;     // confidence clamp band
constexpr double kConfCeil = 0.99;
constexpr double kContamLo = 0.85;      // injected overconfidence band
constexpr double kContamHi = 0.97;
constexpr double kRunnerShare = 0.95;   // runner-up share of residual mass (contaminated)
constexpr double kGoldShare = 0.60;     // gold share of residual mass (plain wrong)
constexpr double kOffsetScale = 1.5;
constexpr std::size_t kMaskSize = 8;
constexpr std::size_t kRectSize = 3;

Vec gaussian_vec(Rng& rng, std::size_t dim) {
    Vec v(dim);
    for (auto& x : v) x = rng.gaussian();
    return v;
}

Vec unit_direction(std::uint64_t seed, std::size_t dim) {
    Rng rng(seed);
    Vec v = gaussian_vec(rng, dim);
    double n = norm(v);
    for (auto& x : v) x /= n;
    return v;
}

Mask rect_mask(std::size_t r0, std::size_t c0) {
    Mask m;
    m.height = kMaskSize;
    m.width = kMaskSize;
    m.cells.assign(kMaskSize * kMaskSize, 0);
    for (std::size_t r = r0; r < r0 + kRectSize; ++r)
        for (std::size_t c = c0; c < c0 + kRectSize; ++c) m.cells[r * kMaskSize + c] = 1;
    return m;
}

std::string answer_token(int id) { return "ans" + std::to_string(id); }

}  // namespace

std::vector<PredictionRecord> generate(const SynthConfig& config) {
    if (config.n_records == 0) throw std::invalid_argument("n_records must be positive");
    if (config.vocab_size < 4) throw std::invalid_argument("vocab_size must be at least 4");
    if (!(config.rho >= 0.0 && config.rho <= 1.0)) throw std::invalid_argument("rho must be in [0, 1]");
    if (config.embedding_dim == 0 || config.token_dim == 0)
        throw std::invalid_argument("embedding dims must be positive");
    if (!(config.noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be non-negative");
    if (!(config.contamination >= 0.0 && config.contamination <= 1.0))
        throw std::invalid_argument("contamination must be in [0, 1]");

    const int k = config.vocab_size;
    const Vec dir_pos = unit_direction(mix_seed(config.seed, 7, 0), config.embedding_dim);
    const Vec dir_neg = unit_direction(mix_seed(config.seed, 7, 1), config.embedding_dim);
    auto token_embedding = [&](int id) {
        Rng rng(mix_seed(config.seed, 5, static_cast<std::uint64_t>(id)));
        return gaussian_vec(rng, config.token_dim);
    };
    Rng the_rng(mix_seed(config.seed, 6, 0));
    const Vec the_embedding = gaussian_vec(the_rng, config.token_dim);

    std::vector<PredictionRecord> out;
    out.reserve(config.n_records);
    for (std::size_t i = 0; i < config.n_records; ++i) {
        Rng rng(mix_seed(config.seed, 8, i));
        PredictionRecord rec;
        char idbuf[32];
        std::snprintf(idbuf, sizeof idbuf, "synth-%06zu", i);
        rec.record_id = idbuf;

        const bool correct = rng.bernoulli(kAccuracy);
        const int gold = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
        const int pred =
            correct ? gold
                    : static_cast<int>((static_cast<std::uint64_t>(gold) + 1 +
                                        rng.below(static_cast<std::uint64_t>(k - 1))) %
                                       static_cast<std::uint64_t>(k));
        const double u = rng.uniform01();
        const bool contaminated = rng.bernoulli(config.contamination * (1.0 - config.rho));

        double conf;
        if (contaminated) {
            conf = rng.uniform(kContamLo, kContamHi);
        } else {
            conf = std::clamp(config.rho * (correct ? 1.0 : 0.0) + (1.0 - config.rho) * u,
                              kConfFloor, kConfCeil);
        }

        // Residual mass layout keeps the predicted id the strict argmax:
        // a contaminated record concentrates it on one runner-up, a plain
        // wrong record gives the gold id a large-but-capped share, and the
        // rest spreads uniformly.
        std::vector<double> probs(static_cast<std::size_t>(k), 0.0);
        const double residual = 1.0 - conf;
        int runner = -1;
        double runner_mass = 0.0;
        if (contaminated) {
            runner = correct ? (pred + 1) % k : gold;
            runner_mass = kRunnerShare * residual;
        } else if (!correct) {
            runner = gold;
            runner_mass = std::min(kGoldShare * residual, 0.85 * conf);
        }
        probs[static_cast<std::size_t>(pred)] = conf;
        if (runner >= 0) probs[static_cast<std::size_t>(runner)] = runner_mass;
        const int spread_count = k - 1 - (runner >= 0 ? 1 : 0);
        const double spread = (residual - runner_mass) / spread_count;
        for (int a = 0; a < k; ++a) {
            if (a == pred || a == runner) continue;
            probs[static_cast<std::size_t>(a)] = spread;
        }
        rec.distribution.vocab_size = k;
        for (int a = 0; a < k; ++a)
            rec.distribution.entries.push_back({a, probs[static_cast<std::size_t>(a)]});
        rec.predicted_id = pred;
        rec.gold_id = gold;

        rec.predicted_tokens = {"the", answer_token(pred)};
        rec.gold_tokens = {"the", answer_token(gold)};
        rec.token_embeddings["the"] = the_embedding;
        rec.token_embeddings[answer_token(pred)] = token_embedding(pred);
        rec.token_embeddings[answer_token(gold)] = token_embedding(gold);

        rec.anchor_embedding = gaussian_vec(rng, config.embedding_dim);
        const Vec noise = gaussian_vec(rng, config.embedding_dim);
        const Vec& dir = correct ? dir_pos : dir_neg;
        rec.answer_embedding.resize(config.embedding_dim);
        for (std::size_t d = 0; d < config.embedding_dim; ++d)
            rec.answer_embedding[d] =
                rec.anchor_embedding[d] + kOffsetScale * dir[d] + config.noise_sigma * noise[d];

        const std::size_t span = kMaskSize - kRectSize + 1;  // valid rect offsets
        const std::size_t r0 = rng.below(span);
        const std::size_t c0 = rng.below(span);
        rec.attention_mask = rect_mask(r0, c0);
        rec.text_region_mask =
            correct ? rect_mask(r0, c0) : rect_mask((r0 + kRectSize) % span, (c0 + kRectSize) % span);

        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace honestcalib
