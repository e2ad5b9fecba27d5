#include "honestcalib/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "honestcalib/metrics.hpp"
#include "honestcalib/mining.hpp"
#include "honestcalib/policy.hpp"
#include "honestcalib/records.hpp"
#include "honestcalib/runtime.hpp"
#include "honestcalib/synth.hpp"
#include "honestcalib/training.hpp"

namespace honestcalib::cli {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInvalid = 2;

// User-facing input problem (bad file, bad flag value, bad record).
struct InvalidInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<PredictionRecord> load_input(const std::string& path) {
    try {
        return load_records(path);
    } catch (const std::exception& e) {
        throw InvalidInput(e.what());
    }
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write output file: " + path);
    return out;
}

// Shortest round-trip double formatting, shared with the JSON outputs.
std::string fmt_double(double v) { return ordered_json(v).dump(); }

void add_mining_options(CLI::App* cmd, Hyperparams& p) {
    cmd->add_option("--delta", p.delta, "positive-pool distance threshold");
    cmd->add_option("--tau1", p.tau1, "negative-pool confidence threshold");
    cmd->add_option("--tau2", p.tau2, "negative-pool entropy threshold");
    cmd->add_flag("--strict-alignment,!--no-strict-alignment", p.strict_alignment,
                  "require exact id agreement for positives");
    cmd->add_flag("--hard-negatives,!--no-hard-negatives", p.hard_negatives,
                  "pick negatives by highest cosine similarity");
    cmd->add_flag("--use-gold-positive,!--no-use-gold-positive", p.use_gold_positive,
                  "prefer pool records predicting the anchor's gold id");
    cmd->add_option("--seed", p.seed, "rng seed");
}

void add_train_options(CLI::App* cmd, Hyperparams& p) {
    add_mining_options(cmd, p);
    cmd->add_option("--alpha", p.alpha, "misranking penalty weight");
    cmd->add_option("--beta", p.beta, "cross-entropy weight");
    cmd->add_option("--margin", p.margin_m, "contrastive margin");
    cmd->add_option("--lambda1", p.lambda1, "alignment loss weight");
    cmd->add_option("--lambda2", p.lambda2, "contrastive loss weight");
    cmd->add_option("--lr,--learning-rate", p.learning_rate, "gradient-descent step size");
    cmd->add_option("--epochs", p.epochs, "training epochs");
    cmd->add_option("--projection-dim", p.projection_dim, "projection head output dim");
    cmd->add_option("--batch-size", p.batch_size, "records per batch");
    cmd->add_flag("--calibrate-temperature,!--no-calibrate-temperature", p.calibrate_temperature,
                  "learn the temperature parameter");
}

void apply_checkpoint(std::vector<PredictionRecord>& records, const std::string& ckpt_path) {
    TrainState state;
    Hyperparams params;
    try {
        std::tie(state, params) = load_checkpoint(ckpt_path);
    } catch (const std::exception& e) {
        throw InvalidInput(e.what());
    }
    double t = state.scaler.temperature();
    for (auto& r : records) r = apply_temperature(r, t);
}

int cmd_metrics(const std::string& in_path, const std::string& out_path,
                const std::string& csv_path, const std::string& ckpt_path,
                const ReportOptions& opts) {
    auto records = load_input(in_path);
    if (!ckpt_path.empty()) apply_checkpoint(records, ckpt_path);
    HonestyReport report = build_report(records, opts);
    std::string json = report_to_json(report);
    if (out_path.empty()) {
        std::cout << json;
    } else {
        auto out = open_output(out_path);
        out << json;
    }
    if (!csv_path.empty()) {
        auto out = open_output(csv_path);
        out << report_to_csv(report);
    }
    return kExitOk;
}

int cmd_mine(const std::string& in_path, const std::string& out_path, const Hyperparams& params) {
    auto records = load_input(in_path);
    auto triplets = mine_triplets(records, params, params.seed);
    auto out = open_output(out_path);
    for (const auto& t : triplets) out << triplet_to_json_line(t) << "\n";
    std::cerr << "triplets: " << triplets.size() << "\n";
    return kExitOk;
}

int cmd_train(const std::string& in_path, const std::string& out_path,
              const std::string& history_path, const Hyperparams& params) {
    auto records = load_input(in_path);
    TrainState state = train(records, params);
    save_checkpoint(out_path, state, params);
    if (!history_path.empty()) {
        auto out = open_output(history_path);
        out << "epoch,mean_loss\n";
        for (std::size_t e = 0; e < state.loss_history.size(); ++e)
            out << e << "," << fmt_double(state.loss_history[e]) << "\n";
    }
    return kExitOk;
}

int cmd_infer(const std::string& in_path, const std::string& out_path,
              const std::string& ckpt_path, double c_min, double u_max_frac) {
    auto records = load_input(in_path);
    if (!ckpt_path.empty()) apply_checkpoint(records, ckpt_path);
    auto out = open_output(out_path);
    for (const auto& r : records) {
        Decision d = decide(r, c_min, u_max_frac);
        ordered_json j;
        j["id"] = r.record_id;
        j["outcome"] = d.outcome == DecisionOutcome::answer ? "answer" : "abstain";
        if (d.outcome == DecisionOutcome::answer) {
            j["answer_id"] = d.answer_id;
            j["reason"] = nullptr;
        } else {
            j["answer_id"] = nullptr;
            j["reason"] = outcome_name(d.outcome);
        }
        j["confidence"] = d.confidence_c;
        j["entropy"] = d.entropy_u;
        out << j.dump() << "\n";
    }
    return kExitOk;
}

int cmd_synth(const std::string& out_path, const SynthConfig& config) {
    std::vector<PredictionRecord> records;
    try {
        records = generate(config);
    } catch (const std::invalid_argument& e) {
        throw InvalidInput(e.what());
    }
    write_records(out_path, records);
    return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t configs) {
    GradCheckResult res = gradcheck(seed, configs);
    std::cout << "gradcheck: configs=" << res.n_configs
              << " max_rel_err=" << fmt_double(res.max_rel_err) << " "
              << (res.pass ? "PASS" : "FAIL") << "\n";
    return res.pass ? kExitOk : kExitInternal;
}

void apply_thread_env() {
    const char* env = std::getenv("HONESTCALIB_THREADS");
    if (env == nullptr || *env == '\0') return;
    char* end = nullptr;
    long n = std::strtol(env, &end, 10);
    if (end == nullptr || *end != '\0' || n < 0)
        throw InvalidInput(std::string("invalid HONESTCALIB_THREADS value: ") + env);
    set_max_threads(static_cast<std::size_t>(n));
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"honestcalib: honesty-aware calibration toolkit for document VQA logs"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file; command-line flags win");
    app.allow_config_extras(false);

    // metrics
    std::string m_in, m_out, m_csv, m_ckpt;
    ReportOptions m_opts;
    auto* metrics = app.add_subcommand("metrics", "evaluate a prediction log");
    metrics->add_option("--in", m_in, "input records JSONL")->required();
    metrics->add_option("--out", m_out, "report JSON path (stdout when omitted)");
    metrics->add_option("--csv", m_csv, "also write the report as CSV");
    metrics->add_option("--checkpoint", m_ckpt, "apply a trained temperature first");
    metrics->add_option("--c-min", m_opts.c_min, "abstention confidence threshold");
    metrics->add_option("--u-max-frac", m_opts.u_max_frac, "abstention entropy fraction of ln(k)");
    metrics->add_option("--iou-threshold", m_opts.iou_threshold, "low-agreement IoU threshold");

    // mine
    std::string n_in, n_out;
    Hyperparams n_params;
    auto* mine = app.add_subcommand("mine", "mine contrastive triplets");
    mine->add_option("--in", n_in, "input records JSONL")->required();
    mine->add_option("--out", n_out, "output triplets JSONL")->required();
    add_mining_options(mine, n_params);

    // train
    std::string t_in, t_out, t_hist;
    Hyperparams t_params;
    auto* train_cmd = app.add_subcommand("train", "fit projection head and temperature");
    train_cmd->add_option("--in", t_in, "input records JSONL")->required();
    train_cmd->add_option("--out", t_out, "output checkpoint JSON")->required();
    train_cmd->add_option("--loss-history", t_hist, "per-epoch mean loss CSV");
    add_train_options(train_cmd, t_params);

    // infer
    std::string i_in, i_out, i_ckpt;
    double i_cmin = ReportOptions{}.c_min;
    double i_umax = ReportOptions{}.u_max_frac;
    auto* infer = app.add_subcommand("infer", "apply the abstention policy");
    infer->add_option("--in", i_in, "input records JSONL")->required();
    infer->add_option("--out", i_out, "output decisions JSONL")->required();
    infer->add_option("--checkpoint", i_ckpt, "apply a trained temperature first");
    infer->add_option("--c-min", i_cmin, "abstention confidence threshold");
    infer->add_option("--u-max-frac", i_umax, "abstention entropy fraction of ln(k)");

    // synth
    std::string s_out;
    SynthConfig s_cfg;
    auto* synth = app.add_subcommand("synth", "generate a synthetic prediction log");
    synth->add_option("--out", s_out, "output records JSONL")->required();
    synth->add_option("--n", s_cfg.n_records, "record count");
    synth->add_option("--vocab", s_cfg.vocab_size, "answer vocabulary size");
    synth->add_option("--rho", s_cfg.rho, "calibration strength in [0, 1]");
    synth->add_option("--embedding-dim", s_cfg.embedding_dim, "anchor/answer embedding dim");
    synth->add_option("--token-dim", s_cfg.token_dim, "token embedding dim");
    synth->add_option("--noise-sigma", s_cfg.noise_sigma, "answer embedding noise");
    synth->add_option("--contamination", s_cfg.contamination, "overconfident-failure base rate");
    synth->add_option("--seed", s_cfg.seed, "rng seed");

    // gradcheck
    std::uint64_t g_seed = 0;
    std::size_t g_configs = 50;
    auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    grad->add_option("--seed", g_seed, "rng seed");
    grad->add_option("--configs", g_configs, "number of random configurations");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        apply_thread_env();
        if (metrics->parsed()) return cmd_metrics(m_in, m_out, m_csv, m_ckpt, m_opts);
        if (mine->parsed()) return cmd_mine(n_in, n_out, n_params);
        if (train_cmd->parsed()) return cmd_train(t_in, t_out, t_hist, t_params);
        if (infer->parsed()) return cmd_infer(i_in, i_out, i_ckpt, i_cmin, i_umax);
        if (synth->parsed()) return cmd_synth(s_out, s_cfg);
        if (grad->parsed()) return cmd_gradcheck(g_seed, g_configs);
        std::cerr << "error: no subcommand\n";
        return kExitInvalid;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

}  // namespace honestcalib::cli
