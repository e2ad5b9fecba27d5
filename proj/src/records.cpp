#include "honestcalib/records.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace honestcalib {

namespace {

using json = nlohmann::ordered_json;

// Distribution sums inside this band are silently renormalized; anything
// outside is treated as a corrupt log line.
constexpr double kSumBandLo = 0.5;
constexpr double kSumBandHi = 1.5;

struct SidecarFile {
    std::uint32_t count = 0;
    std::uint32_t dim = 0;
    std::vector<float> data;
};

SidecarFile load_sidecar(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open embedding sidecar: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "HVQE", 4) != 0)
        throw std::runtime_error("bad sidecar magic in " + path);
    std::uint32_t version = 0, count = 0, dim = 0;
    auto read_u32 = [&](std::uint32_t& v) {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
            (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    };
    read_u32(version);
    read_u32(count);
    read_u32(dim);
    if (!in) throw std::runtime_error("truncated sidecar header in " + path);
    if (version != 1) throw std::runtime_error("unsupported sidecar version in " + path);
    SidecarFile f;
    f.count = count;
    f.dim = dim;
    f.data.resize(static_cast<std::size_t>(count) * dim);
    in.read(reinterpret_cast<char*>(f.data.data()),
            static_cast<std::streamsize>(f.data.size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated sidecar data in " + path);
    return f;
}

class SidecarCache {
  public:
    explicit SidecarCache(std::filesystem::path base_dir) : base_dir_(std::move(base_dir)) {}

    Vec fetch(const std::string& file, std::uint32_t index) {
        auto it = files_.find(file);
        if (it == files_.end()) {
            auto resolved = (base_dir_ / file).string();
            it = files_.emplace(file, load_sidecar(resolved)).first;
        }
        const SidecarFile& f = it->second;
        if (index >= f.count)
            throw std::runtime_error("emb_ref index " + std::to_string(index) +
                                     " out of range for " + file);
        Vec v(f.dim);
        const float* row = f.data.data() + static_cast<std::size_t>(index) * f.dim;
        for (std::uint32_t i = 0; i < f.dim; ++i) v[i] = static_cast<double>(row[i]);
        return v;
    }

  private:
    std::filesystem::path base_dir_;
    std::unordered_map<std::string, SidecarFile> files_;
};

// An embedding slot holds either an inline float array or an
// {"emb_ref": {"file":..., "index":...}} reference into a sidecar.
Vec parse_embedding(const json& j, const char* field, SidecarCache& cache) {
    if (j.is_array()) {
        Vec v;
        v.reserve(j.size());
        for (const auto& x : j) {
            if (!x.is_number()) throw std::runtime_error(std::string(field) + ": non-numeric entry");
            v.push_back(x.get<double>());
        }
        return v;
    }
    if (j.is_object() && j.contains("emb_ref")) {
        const auto& ref = j.at("emb_ref");
        return cache.fetch(ref.at("file").get<std::string>(), ref.at("index").get<std::uint32_t>());
    }
    throw std::runtime_error(std::string(field) + ": expected float array or emb_ref object");
}

Mask parse_mask(const json& j, const char* field) {
    if (!j.is_array() || j.empty()) throw std::runtime_error(std::string(field) + ": expected non-empty 2-d array");
    Mask m;
    m.height = j.size();
    m.width = j.at(0).size();
    m.cells.reserve(m.height * m.width);
    for (const auto& row : j) {
        if (!row.is_array() || row.size() != m.width)
            throw std::runtime_error(std::string(field) + ": ragged rows");
        for (const auto& c : row) {
            int v = c.get<int>();
            if (v != 0 && v != 1) throw std::runtime_error(std::string(field) + ": cells must be 0 or 1");
            m.cells.push_back(static_cast<std::uint8_t>(v));
        }
    }
    return m;
}

PredictionRecord parse_record(const json& j, SidecarCache& cache) {
    PredictionRecord r;
    r.record_id = j.at("id").get<std::string>();
    r.distribution.vocab_size = j.at("vocab_size").get<int>();
    for (const auto& pair : j.at("dist")) {
        if (!pair.is_array() || pair.size() != 2)
            throw std::runtime_error("dist: expected [answer_id, prob] pairs");
        r.distribution.entries.push_back({pair.at(0).get<int>(), pair.at(1).get<double>()});
    }
    r.predicted_id = j.at("pred_id").get<int>();
    if (j.contains("gold_id") && !j.at("gold_id").is_null()) r.gold_id = j.at("gold_id").get<int>();
    r.predicted_tokens = j.at("pred_tokens").get<std::vector<std::string>>();
    r.gold_tokens = j.at("gold_tokens").get<std::vector<std::string>>();
    for (const auto& [tok, emb] : j.at("tok_emb").items())
        r.token_embeddings[tok] = parse_embedding(emb, "tok_emb", cache);
    r.anchor_embedding = parse_embedding(j.at("anchor_emb"), "anchor_emb", cache);
    r.answer_embedding = parse_embedding(j.at("answer_emb"), "answer_emb", cache);
    if (j.contains("attn_mask") && !j.at("attn_mask").is_null())
        r.attention_mask = parse_mask(j.at("attn_mask"), "attn_mask");
    if (j.contains("text_mask") && !j.at("text_mask").is_null())
        r.text_region_mask = parse_mask(j.at("text_mask"), "text_mask");
    return r;
}

json mask_to_json(const Mask& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.height; ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < m.width; ++c) row.push_back(static_cast<int>(m.at(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::size_t argmax_entry(const AnswerDistribution& dist) {
    if (dist.entries.empty()) throw std::invalid_argument("argmax of empty distribution");
    std::size_t best = 0;
    for (std::size_t i = 1; i < dist.entries.size(); ++i) {
        const auto& e = dist.entries[i];
        const auto& b = dist.entries[best];
        if (e.prob > b.prob || (e.prob == b.prob && e.answer_id < b.answer_id)) best = i;
    }
    return best;
}

AnswerDistribution normalize_distribution(const AnswerDistribution& dist) {
    double sum = 0.0;
    for (const auto& e : dist.entries) sum += e.prob;
    if (!(sum > 0.0)) throw std::runtime_error("degenerate distribution");
    AnswerDistribution out = dist;
    for (auto& e : out.entries) e.prob = std::clamp(e.prob / sum, kProbFloor, 1.0);
    return out;
}

std::optional<std::string> validate_record(const PredictionRecord& record) {
    const auto& entries = record.distribution.entries;
    if (entries.empty()) return "non-empty entries";
    for (const auto& e : entries) {
        if (!(e.prob >= 0.0)) return "prob >= 0";
        if (!std::isfinite(e.prob)) return "finite prob";
    }
    double sum = 0.0;
    for (const auto& e : entries) sum += e.prob;
    if (sum < 1.0 - 1e-6 || sum > 1.0 + 1e-6) return "probs sum to 1";
    std::vector<int> ids;
    ids.reserve(entries.size());
    for (const auto& e : entries) {
        if (e.answer_id < 0 || e.answer_id >= record.distribution.vocab_size)
            return "answer_id < vocab_size";
        ids.push_back(e.answer_id);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) return "unique answer_ids";
    if (record.predicted_id != entries[argmax_entry(record.distribution)].answer_id)
        return "predicted_id = argmax";
    if (record.gold_id &&
        (*record.gold_id < 0 || *record.gold_id >= record.distribution.vocab_size))
        return "gold_id < vocab_size";
    if (record.anchor_embedding.empty() ||
        record.anchor_embedding.size() != record.answer_embedding.size())
        return "anchor/answer embedding dims equal and > 0";
    if (!all_finite(record.anchor_embedding) || !all_finite(record.answer_embedding))
        return "finite embeddings";
    std::size_t tok_dim = 0;
    for (const auto& [tok, emb] : record.token_embeddings) {
        if (!all_finite(emb)) return "finite token embeddings";
        if (tok_dim == 0)
            tok_dim = emb.size();
        else if (emb.size() != tok_dim)
            return "token embedding dims equal";
    }
    if (record.attention_mask && record.text_region_mask) {
        const Mask& a = *record.attention_mask;
        const Mask& t = *record.text_region_mask;
        if (a.height != t.height || a.width != t.width) return "mask dims equal";
    }
    return std::nullopt;
}

std::vector<PredictionRecord> load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    SidecarCache cache(std::filesystem::path(path).parent_path());
    std::vector<PredictionRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fail = [&](const std::string& what) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + what);
        };
        json j;
        try {
            j = json::parse(line);
        } catch (const std::exception& e) {
            fail(std::string("parse error: ") + e.what());
        }
        PredictionRecord r;
        try {
            r = parse_record(j, cache);
        } catch (const std::exception& e) {
            fail(e.what());
        }
        double sum = 0.0;
        for (const auto& e : r.distribution.entries) sum += e.prob;
        if (!(sum >= kSumBandLo && sum <= kSumBandHi))
            fail("distribution sum " + std::to_string(sum) + " outside [0.5, 1.5]");
        try {
            r.distribution = normalize_distribution(r.distribution);
        } catch (const std::exception& e) {
            fail(e.what());
        }
        if (auto violation = validate_record(r)) fail("invalid record: " + *violation);
        out.push_back(std::move(r));
    }
    return out;
}

std::string record_to_json_line(const PredictionRecord& r) {
    json j;
    j["id"] = r.record_id;
    j["vocab_size"] = r.distribution.vocab_size;
    json dist = json::array();
    for (const auto& e : r.distribution.entries) dist.push_back(json::array({e.answer_id, e.prob}));
    j["dist"] = std::move(dist);
    j["pred_id"] = r.predicted_id;
    j["gold_id"] = r.gold_id ? json(*r.gold_id) : json(nullptr);
    j["pred_tokens"] = r.predicted_tokens;
    j["gold_tokens"] = r.gold_tokens;
    json tok = json::object();
    for (const auto& [t, emb] : r.token_embeddings) tok[t] = emb;
    j["tok_emb"] = std::move(tok);
    j["anchor_emb"] = r.anchor_embedding;
    j["answer_emb"] = r.answer_embedding;
    j["attn_mask"] = r.attention_mask ? mask_to_json(*r.attention_mask) : json(nullptr);
    j["text_mask"] = r.text_region_mask ? mask_to_json(*r.text_region_mask) : json(nullptr);
    return j.dump();
}

void write_records(const std::string& path, const std::vector<PredictionRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (const auto& r : records) out << record_to_json_line(r) << "\n";
}

}  // namespace honestcalib
