#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "honestcalib/vecmath.hpp"

namespace honestcalib {

// Floor applied to probabilities before any logarithm is taken.
inline constexpr double kProbFloor = 1e-12;

struct DistEntry {
    int answer_id = 0;
    double prob = 0.0;
};

// Sparse distribution over an answer vocabulary of size vocab_size.
struct AnswerDistribution {
    std::vector<DistEntry> entries;
    int vocab_size = 0;
};

struct Mask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> cells;  // row-major, values 0/1

    std::uint8_t at(std::size_t r, std::size_t c) const { return cells[r * width + c]; }
};

// One logged (document, question) inference.
struct PredictionRecord {
    std::string record_id;
    AnswerDistribution distribution;
    int predicted_id = 0;
    std::optional<int> gold_id;
    std::vector<std::string> predicted_tokens;
    std::vector<std::string> gold_tokens;
    std::map<std::string, Vec> token_embeddings;
    Vec anchor_embedding;
    Vec answer_embedding;
    std::optional<Mask> attention_mask;
    std::optional<Mask> text_region_mask;
};

struct Hyperparams {
    double alpha = 1.0;
    double beta = 0.5;
    double margin_m = 0.3;
    double lambda1 = 1.0;
    double lambda2 = 0.7;
    double delta = 0.4;
    double tau1 = 0.8;
    double tau2 = 0.5;
    double learning_rate = 0.05;
    int epochs = 200;
    std::uint64_t seed = 0;
    int projection_dim = 64;
    int batch_size = 32;
    bool strict_alignment = true;
    bool hard_negatives = false;
    bool use_gold_positive = false;
    bool calibrate_temperature = true;

    bool operator==(const Hyperparams&) const = default;
};

// Index of the entry with maximal prob; ties broken by lowest answer_id.
std::size_t argmax_entry(const AnswerDistribution& dist);

// Divides probs by their sum and clamps each into [kProbFloor, 1].
// Throws on an all-zero distribution.
AnswerDistribution normalize_distribution(const AnswerDistribution& dist);

// Returns std::nullopt when every invariant holds, otherwise a short
// description of the first failed one.
std::optional<std::string> validate_record(const PredictionRecord& record);

// Reads the JSONL prediction-log format. Every returned record has a
// normalized distribution and passes validate_record; errors carry the
// 1-based line number.
std::vector<PredictionRecord> load_records(const std::string& path);

// Writes records in the same JSONL format (inline embeddings).
void write_records(const std::string& path, const std::vector<PredictionRecord>& records);

std::string record_to_json_line(const PredictionRecord& record);

}  // namespace honestcalib
