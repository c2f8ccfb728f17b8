// Command-line front end: alert ingestion, splitting, training, filtered
// ranking evaluation, complex-query evaluation, ablation suites and report
// rendering. Every command honours --seed; outputs are deterministic for a
// fixed configuration.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "alertstar/cq.hpp"
#include "alertstar/ingest.hpp"
#include "alertstar/report.hpp"
#include "alertstar/splits.hpp"
#include "alertstar/training.hpp"

namespace fs = std::filesystem;
using namespace alertstar;

namespace {

std::string default_out_dir() {
    const char* env = std::getenv("ALERTSTAR_OUT");
    return env ? std::string(env) : std::string(".");
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

struct DataSet {
    Vocab vocab;
    SplitResult splits;
};

DataSet load_split_data(const std::string& data_dir, double regime, uint64_t regime_seed) {
    DataSet d;
    d.vocab = read_vocab_file(data_dir + "/vocab.tsv");
    for (const char* name : {"train", "valid", "test"}) {
        const std::string path = data_dir + "/" + name + ".tsv";
        if (!fs::exists(path))
            throw std::runtime_error("missing " + path + "; run `alertstar split` first");
    }
    d.splits.train = read_statements_file(data_dir + "/train.tsv", d.vocab);
    d.splits.valid = read_statements_file(data_dir + "/valid.tsv", d.vocab);
    d.splits.test = read_statements_file(data_dir + "/test.tsv", d.vocab);
    if (regime < 1.0) {
        d.splits.train = apply_density_regime(d.splits.train, regime, regime_seed);
        d.splits.valid = apply_density_regime(d.splits.valid, regime, regime_seed);
        d.splits.test = apply_density_regime(d.splits.test, regime, regime_seed);
    }
    return d;
}

// flat `key = value` config file; CLI flags keep precedence
void apply_config_file(const std::string& path, TrainConfig& cfg) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read config file " + path);
    std::string line;
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t");
            return s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!key.empty() && !value.empty()) cfg.apply_field(key, value);
    }
}

struct LoadedCheckpoint {
    AnyModel model;
    TrainConfig cfg;
    CheckpointFile file;
    std::string regime_label;
};

LoadedCheckpoint load_model_checkpoint(const std::string& stem, const Vocab& vocab) {
    LoadedCheckpoint lc;
    lc.file = read_checkpoint(stem);
    for (const auto& [k, v] : lc.file.meta.fields)
        if (k.rfind("config.", 0) == 0) lc.cfg.apply_field(k.substr(7), v);
    auto it = lc.file.meta.fields.find("vocab_hash");
    std::ostringstream vh;
    vh << std::hex << vocab.hash();
    if (it != lc.file.meta.fields.end() && it->second != vh.str())
        throw std::runtime_error("checkpoint vocab hash " + it->second + " does not match data vocab " + vh.str());
    auto rg = lc.file.meta.fields.find("regime");
    if (rg != lc.file.meta.fields.end()) lc.regime_label = rg->second;
    lc.model = make_model(model_kind_from(lc.file.meta.model_kind), vocab, lc.cfg);
    auto np = lc.model.named_params();
    load_checkpoint_into(lc.file, np);
    return lc;
}

int cmd_ingest(const std::string& alerts, const std::string& out_dir, bool lenient, const SchemaConfig& schema) {
    std::ifstream is(alerts);
    if (!is) {
        std::cerr << "error: cannot read " << alerts << "\n";
        return 1;
    }
    auto res = parse_alert_records(is, schema);
    for (const auto& rej : res.rejected)
        std::cerr << "line " << rej.line << ": " << rej.reason << "\n";
    if (res.statements.empty()) {
        std::cerr << "error: no records\n";
        return 1;
    }
    ensure_dir(out_dir);
    write_statements_file(out_dir + "/statements.tsv", res.statements, res.vocab);
    write_vocab_file(out_dir + "/vocab.tsv", res.vocab);
    std::cout << "ingested " << res.statements.size() << " statements, rejected " << res.rejected.size()
              << "\nentities " << res.vocab.num_entities() << ", categories " << res.vocab.num_relations()
              << ", qualifier values " << res.vocab.num_qual_values() << "\n";
    return (!res.rejected.empty() && !lenient) ? 1 : 0;
}

int cmd_split(const std::string& data_dir, const std::string& out_dir, const std::string& mode,
              const std::string& fractions, uint64_t seed) {
    Vocab vocab = read_vocab_file(data_dir + "/vocab.tsv");
    auto statements = read_statements_file(data_dir + "/statements.tsv", vocab);
    SplitSpec spec;
    spec.seed = seed;
    spec.mode = mode == "inductive" ? SplitMode::inductive : SplitMode::transductive;
    auto f = split_fields(fractions, ',');
    if (f.size() != 3) throw std::runtime_error("--fractions must be train,valid,test");
    spec.train_fraction = std::stod(f[0]);
    spec.valid_fraction = std::stod(f[1]);
    spec.test_fraction = std::stod(f[2]);
    auto result = split(statements, spec);
    ensure_dir(out_dir);
    write_statements_file(out_dir + "/train.tsv", result.train, vocab);
    write_statements_file(out_dir + "/valid.tsv", result.valid, vocab);
    write_statements_file(out_dir + "/test.tsv", result.test, vocab);
    write_vocab_file(out_dir + "/vocab.tsv", vocab);
    std::ofstream meta(out_dir + "/split.meta");
    meta << "mode\t" << mode << "\nseed\t" << seed << "\n";
    std::cout << "split " << statements.size() << " statements into " << result.train.size() << "/"
              << result.valid.size() << "/" << result.test.size() << " (" << mode << ")\n";
    return 0;
}

std::string read_split_mode(const std::string& data_dir) {
    std::ifstream is(data_dir + "/split.meta");
    std::string line;
    while (std::getline(is, line)) {
        auto f = split_fields(line, '\t');
        if (f.size() == 2 && f[0] == "mode") return f[1];
    }
    return "unknown";
}

std::string regime_label(double p) {
    std::ostringstream os;
    os << "q" << static_cast<int>(std::lround(p * 100));
    return os.str();
}

int cmd_train(const std::string& data_dir, const std::string& out_dir, const std::string& model_name,
              double regime, const TrainConfig& cfg) {
    const ModelKind kind = model_kind_from(model_name);
    if (kind != ModelKind::alertstar && (cfg.no_qual || cfg.no_path || cfg.no_gate))
        throw std::runtime_error("component ablation flags apply to alertstar only");
    auto data = load_split_data(data_dir, regime, cfg.seed);
    auto model = make_model(kind, data.vocab, cfg);
    ensure_dir(out_dir);
    const std::string split_mode = read_split_mode(data_dir);
    auto outcome = train_model(model, data.splits, data.vocab, cfg, out_dir + "/checkpoint", split_mode,
                               regime_label(regime));
    for (const auto& r : outcome.history) {
        std::cout << "epoch " << r.epoch << "  train_loss " << r.train_loss << "  val_mrr " << r.val_mrr;
        if (!std::isnan(r.gate_post)) std::cout << "  gate " << r.gate_post;
        std::cout << "\n";
    }
    write_history_file(out_dir + "/history.tsv", outcome.history);
    std::cout << "best val MRR " << outcome.best_val_mrr << " at epoch " << outcome.best_epoch << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir, const std::string& split_name,
             const std::string& out_dir, double regime_override) {
    Vocab vocab = read_vocab_file(data_dir + "/vocab.tsv");
    auto lc = load_model_checkpoint(checkpoint, vocab);
    double regime = regime_override;
    if (regime <= 0.0 && !lc.regime_label.empty())
        regime = std::stod(lc.regime_label.substr(1)) / 100.0;
    if (regime <= 0.0) regime = 1.0;
    auto data = load_split_data(data_dir, regime, lc.cfg.seed);

    const std::vector<QualifiedStatement>* eval_set = &data.splits.test;
    if (split_name == "valid") eval_set = &data.splits.valid;
    else if (split_name == "train") eval_set = &data.splits.train;

    auto graph = build_graph(data.splits.train, data.vocab, lc.cfg.q_max);
    auto filters = build_filter_sets({&data.splits.train, &data.splits.valid, &data.splits.test});
    auto report = evaluate_tail_ranking(lc.model, graph, *eval_set, filters);
    const std::string split_mode = read_split_mode(data_dir);

    std::vector<ReportRow> rows{{std::string(lc.file.meta.model_kind) + " (tail)", report, std::nullopt, false}};
    bool with_acc = false;
    if (lc.model.kind == ModelKind::mt_alertstar) {
        auto extras = evaluate_mt_extras(*lc.model.mtas, *eval_set);
        rows.push_back({"mt-alertstar (relation)", extras.relation, extras.relation_accuracy, false});
        if (extras.qual_value) rows.push_back({"mt-alertstar (qual-value)", *extras.qual_value, std::nullopt, false});
        with_acc = true;
    }
    ensure_dir(out_dir);
    write_report_tsv(out_dir + "/report.tsv", rows, split_mode, regime_label(regime));
    const std::string table =
        render_report_table("tail prediction on " + split_name + " [" + split_mode + ", " + regime_label(regime) + "]",
                            rows, with_acc);
    std::ofstream(out_dir + "/report.txt") << table;
    std::cout << table;
    return 0;
}

int cmd_cq(const std::string& checkpoint, const std::string& data_dir, const std::string& out_dir,
           int64_t cap, double regime_override, uint64_t mine_seed, const std::string& queries_out) {
    Vocab vocab = read_vocab_file(data_dir + "/vocab.tsv");
    auto lc = load_model_checkpoint(checkpoint, vocab);
    if (lc.model.kind != ModelKind::hr_nbfnet_cq)
        throw std::runtime_error("complex-query evaluation needs an hr-nbfnet-cq checkpoint");
    double regime = regime_override;
    if (regime <= 0.0 && !lc.regime_label.empty())
        regime = std::stod(lc.regime_label.substr(1)) / 100.0;
    if (regime <= 0.0) regime = 1.0;
    auto data = load_split_data(data_dir, regime, lc.cfg.seed);

    // gold answers come from exhaustive lookup over every split
    std::vector<QualifiedStatement> all = data.splits.train;
    all.insert(all.end(), data.splits.valid.begin(), data.splits.valid.end());
    all.insert(all.end(), data.splits.test.begin(), data.splits.test.end());
    auto full_graph = build_graph(all, data.vocab, lc.cfg.q_max);
    auto mined = mine_instances(full_graph, data.splits.test, cap, mine_seed);
    auto rep = evaluate_queries(*lc.model.cq, mined);

    std::vector<ReportRow> rows;
    for (const char* kind : {"1p", "2p", "2i", "2u"}) {
        auto it = rep.per_type.find(kind);
        if (it == rep.per_type.end()) rows.push_back({kind, RankingReport{}, std::nullopt, true});
        else rows.push_back({kind, it->second, std::nullopt, false});
    }
    ensure_dir(out_dir);
    const std::string split_mode = read_split_mode(data_dir);
    write_report_tsv(out_dir + "/cq_report.tsv", rows, split_mode, regime_label(regime));
    const std::string table =
        render_report_table("complex queries [" + split_mode + ", " + regime_label(regime) + "]", rows);
    std::ofstream(out_dir + "/cq_report.txt") << table;
    std::cout << table;

    if (!queries_out.empty()) {
        std::ofstream qs(queries_out);
        for (const auto* set : {&mined.q1p, &mined.q2p, &mined.q2i, &mined.q2u})
            for (const auto& q : *set) qs << format_query_line(q) << '\n';
    }
    return 0;
}

int cmd_ablate(const std::string& suite, const std::string& data_dir, const std::string& out_dir,
               const std::string& model_name, double regime, const TrainConfig& cfg) {
    ensure_dir(out_dir);
    const std::string split_mode = read_split_mode(data_dir);
    std::vector<ReportRow> rows;

    auto run_variant = [&](const std::string& label, ModelKind kind, TrainConfig vcfg, double vregime) {
        auto data = load_split_data(data_dir, vregime, vcfg.seed);
        auto model = make_model(kind, data.vocab, vcfg);
        train_model(model, data.splits, data.vocab, vcfg, "");
        auto graph = build_graph(data.splits.train, data.vocab, vcfg.q_max);
        auto filters = build_filter_sets({&data.splits.train, &data.splits.valid, &data.splits.test});
        auto rep = evaluate_tail_ranking(model, graph, data.splits.test, filters);
        rows.push_back({label, rep, std::nullopt, false});
        std::cout << label << ": test MRR " << rep.mrr << "\n";
    };

    if (suite == "A1") {
        TrainConfig c = cfg;
        c.no_qual = true;
        run_variant("AS-NoQual", ModelKind::alertstar, c, regime);
        c = cfg;
        c.no_path = true;
        run_variant("AS-NoPath", ModelKind::alertstar, c, regime);
        c = cfg;
        c.no_gate = true;
        run_variant("AS-NoGate", ModelKind::alertstar, c, regime);
        run_variant("AS-Full", ModelKind::alertstar, cfg, regime);
    } else if (suite == "A3") {
        TrainConfig c = cfg;
        c.lambda_rel = 0.0;
        c.lambda_qv = 0.0;
        run_variant("MT-TailOnly", ModelKind::mt_alertstar, c, regime);
        c = cfg;
        c.lambda_qv = 0.0;
        run_variant("MT-Tail+Rel", ModelKind::mt_alertstar, c, regime);
        c = cfg;
        c.lambda_rel = 0.0;
        run_variant("MT-Tail+QualVal", ModelKind::mt_alertstar, c, regime);
        run_variant("MT-Full", ModelKind::mt_alertstar, cfg, regime);
    } else if (suite == "A4") {
        const ModelKind kind = model_kind_from(model_name);
        run_variant("Q33", kind, cfg, 0.33);
        run_variant("Q66", kind, cfg, 0.66);
        run_variant("Q100", kind, cfg, 1.0);
    } else if (suite == "A2") {
        throw std::runtime_error(
            "A2 is the gate trajectory; it is written automatically to history.tsv by every alertstar training run");
    } else {
        throw std::runtime_error("unknown ablation suite '" + suite + "' (expected A1, A3 or A4)");
    }

    const std::string stem = out_dir + "/ablation_" + suite;
    write_report_tsv(stem + ".tsv", rows, split_mode, suite == "A4" ? "varies" : regime_label(regime));
    const std::string table = render_report_table("ablation " + suite + " [" + split_mode + "]", rows);
    std::ofstream(stem + ".txt") << table;
    std::cout << table;
    return 0;
}

int cmd_report(const std::string& in_path) {
    std::ifstream is(in_path);
    if (!is) throw std::runtime_error("cannot read " + in_path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty report " + in_path);
    std::vector<ReportRow> rows;
    std::string split_label, regime;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto f = split_fields(line, '\t');
        if (f.size() < 9) continue;
        ReportRow row;
        row.label = f[0];
        split_label = f[1];
        regime = f[2];
        if (f[3] == "absent") {
            row.absent = true;
        } else {
            row.report = aggregate({1});
            row.report.mr = std::stod(f[3]);
            row.report.mrr = std::stod(f[4]);
            row.report.hits1 = std::stod(f[5]);
            row.report.hits3 = std::stod(f[6]);
            row.report.hits10 = std::stod(f[7]);
            if (f[8] != "-") row.accuracy = std::stod(f[8]);
        }
        rows.push_back(std::move(row));
    }
    bool with_acc = false;
    for (const auto& r : rows) with_acc = with_acc || r.accuracy.has_value();
    std::cout << render_report_table(in_path + " [" + split_label + ", " + regime + "]", rows, with_acc);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hyper-relational alert prediction toolkit"};
    app.require_subcommand(1);

    auto* ingest = app.add_subcommand("ingest", "parse alert records into statements + vocab");
    std::string in_alerts, out_dir = default_out_dir();
    bool lenient = false;
    SchemaConfig schema;
    ingest->add_option("--alerts", in_alerts, "alert file (TSV or CSV with header)")->required();
    ingest->add_option("--out", out_dir, "output directory");
    ingest->add_flag("--lenient", lenient, "exit 0 even when records were rejected");
    ingest->add_flag("!--no-time", schema.include_detect_time, "drop the detect-time qualifier");
    ingest->add_flag("!--no-flow", schema.include_flow_count, "drop the flow-count qualifier");
    ingest->add_flag("!--no-port", schema.include_port, "drop the port qualifier");
    ingest->add_flag("!--no-protocol", schema.include_protocol, "drop the protocol qualifier");

    auto* split_cmd = app.add_subcommand("split", "make train/valid/test statement files");
    std::string split_data, split_out = default_out_dir(), split_mode = "transductive", fractions = "0.8,0.1,0.1";
    uint64_t split_seed = 0;
    split_cmd->add_option("--data", split_data, "directory with statements.tsv + vocab.tsv")->required();
    split_cmd->add_option("--out", split_out, "output directory");
    split_cmd->add_option("--mode", split_mode, "transductive | inductive")
        ->check(CLI::IsMember({"transductive", "inductive"}));
    split_cmd->add_option("--fractions", fractions, "train,valid,test fractions");
    split_cmd->add_option("--seed", split_seed, "split seed");

    auto* train_cmd = app.add_subcommand("train", "train a model and checkpoint the best epoch");
    std::string train_data, train_out = default_out_dir(), model_name = "alertstar", config_file;
    double regime = 1.0;
    TrainConfig cfg;
    train_cmd->add_option("--data", train_data, "directory with split files")->required();
    train_cmd->add_option("--out", train_out, "output directory");
    train_cmd->add_option("--model", model_name,
                          "alertstar | mt-alertstar | hr-nbfnet | mt-hr-nbfnet | hr-nbfnet-cq");
    train_cmd->add_option("--regime", regime, "qualifier density fraction (0.33, 0.66, 1.0)");
    train_cmd->add_option("--config", config_file, "flat key = value config file");
    auto add_train_flags = [&cfg](CLI::App* c) {
        c->add_option("--seed", cfg.seed, "run seed");
        c->add_option("--dim", cfg.dim, "embedding dimension");
        c->add_option("--lr", cfg.lr, "learning rate");
        c->add_option("--epochs", cfg.epochs, "training epochs");
        c->add_option("--margin", cfg.margin, "ranking margin");
        c->add_option("--clip-norm", cfg.clip_norm, "gradient clipping norm");
        c->add_option("--batch", cfg.batch, "batch size (0 = model default)");
        c->add_option("--k-max", cfg.k_max, "max tails per (h,r) group per step");
        c->add_option("--q-max", cfg.q_max, "max qualifier pairs per edge");
        c->add_option("--dropout", cfg.dropout, "dropout rate");
        c->add_option("--layers", cfg.layers, "propagation layers");
        c->add_option("--chunk", cfg.chunk, "edge chunk size");
        c->add_option("--heads", cfg.heads, "attention heads");
        c->add_option("--enc-layers", cfg.enc_layers, "encoder layers");
        c->add_option("--ffn-width", cfg.ffn_width, "encoder FFN width");
        c->add_option("--lambda-tail", cfg.lambda_tail, "tail task weight");
        c->add_option("--lambda-rel", cfg.lambda_rel, "relation task weight");
        c->add_option("--lambda-qv", cfg.lambda_qv, "qualifier-value task weight");
        c->add_flag("--no-qual", cfg.no_qual, "ablation: bypass qualifier attention");
        c->add_flag("--no-path", cfg.no_path, "ablation: attention branch only");
        c->add_flag("--no-gate", cfg.no_gate, "ablation: fixed 0.5 gate");
    };
    add_train_flags(train_cmd);

    auto* eval_cmd = app.add_subcommand("eval", "filtered ranking evaluation of a checkpoint");
    std::string eval_ck, eval_data, eval_out = default_out_dir(), eval_split = "test";
    double eval_regime = 0.0;
    eval_cmd->add_option("--checkpoint", eval_ck, "checkpoint stem")->required();
    eval_cmd->add_option("--data", eval_data, "directory with split files")->required();
    eval_cmd->add_option("--out", eval_out, "output directory");
    eval_cmd->add_option("--split", eval_split, "train | valid | test")
        ->check(CLI::IsMember({"train", "valid", "test"}));
    eval_cmd->add_option("--regime", eval_regime, "override the checkpoint's qualifier regime");

    auto* cq_cmd = app.add_subcommand("cq", "complex-query evaluation (1p/2p/2i/2u)");
    std::string cq_ck, cq_data, cq_out = default_out_dir(), cq_queries_out;
    int64_t cq_cap = 200;
    double cq_regime = 0.0;
    uint64_t cq_seed = 0;
    cq_cmd->add_option("--checkpoint", cq_ck, "hr-nbfnet-cq checkpoint stem")->required();
    cq_cmd->add_option("--data", cq_data, "directory with split files")->required();
    cq_cmd->add_option("--out", cq_out, "output directory");
    cq_cmd->add_option("--cap", cq_cap, "max queries per type");
    cq_cmd->add_option("--regime", cq_regime, "override the checkpoint's qualifier regime");
    cq_cmd->add_option("--seed", cq_seed, "mining seed");
    cq_cmd->add_option("--queries-out", cq_queries_out, "also write the mined query set");

    auto* ablate_cmd = app.add_subcommand("ablate", "run an ablation suite (A1, A3, A4)");
    std::string ab_suite, ab_data, ab_out = default_out_dir(), ab_model = "mt-alertstar", ab_config;
    double ab_regime = 1.0;
    ablate_cmd->add_option("--suite", ab_suite, "A1 | A3 | A4")->required();
    ablate_cmd->add_option("--data", ab_data, "directory with split files")->required();
    ablate_cmd->add_option("--out", ab_out, "output directory");
    ablate_cmd->add_option("--model", ab_model, "model for suite A4");
    ablate_cmd->add_option("--regime", ab_regime, "qualifier density for A1/A3");
    ablate_cmd->add_option("--config", ab_config, "flat key = value config file");
    add_train_flags(ablate_cmd);

    auto* report_cmd = app.add_subcommand("report", "render a report TSV as an aligned table");
    std::string report_in;
    report_cmd->add_option("--in", report_in, "report .tsv file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(ingest)) return cmd_ingest(in_alerts, out_dir, lenient, schema);
        if (app.got_subcommand(split_cmd)) return cmd_split(split_data, split_out, split_mode, fractions, split_seed);
        if (app.got_subcommand(train_cmd)) {
            const ModelKind kind = model_kind_from(model_name);
            const bool multi_task = kind == ModelKind::mt_alertstar || kind == ModelKind::mt_hr_nbfnet;
            if (!multi_task)
                for (const char* flag : {"--lambda-tail", "--lambda-rel", "--lambda-qv"})
                    if (train_cmd->get_option(flag)->count() > 0)
                        throw std::runtime_error(std::string(flag) + " applies to multi-task models only");
            if (!config_file.empty()) {
                // file values fill every flag the user did not pass explicitly
                TrainConfig file_cfg;
                apply_config_file(config_file, file_cfg);
                auto pick = [&](const char* flag, auto& target, auto file_value) {
                    if (train_cmd->get_option(flag)->count() == 0) target = file_value;
                };
                pick("--seed", cfg.seed, file_cfg.seed);
                pick("--dim", cfg.dim, file_cfg.dim);
                pick("--lr", cfg.lr, file_cfg.lr);
                pick("--epochs", cfg.epochs, file_cfg.epochs);
                pick("--margin", cfg.margin, file_cfg.margin);
                pick("--clip-norm", cfg.clip_norm, file_cfg.clip_norm);
                pick("--batch", cfg.batch, file_cfg.batch);
                pick("--k-max", cfg.k_max, file_cfg.k_max);
                pick("--q-max", cfg.q_max, file_cfg.q_max);
                pick("--dropout", cfg.dropout, file_cfg.dropout);
                pick("--layers", cfg.layers, file_cfg.layers);
                pick("--chunk", cfg.chunk, file_cfg.chunk);
                pick("--heads", cfg.heads, file_cfg.heads);
                pick("--enc-layers", cfg.enc_layers, file_cfg.enc_layers);
                pick("--ffn-width", cfg.ffn_width, file_cfg.ffn_width);
                pick("--lambda-tail", cfg.lambda_tail, file_cfg.lambda_tail);
                pick("--lambda-rel", cfg.lambda_rel, file_cfg.lambda_rel);
                pick("--lambda-qv", cfg.lambda_qv, file_cfg.lambda_qv);
            }
            return cmd_train(train_data, train_out, model_name, regime, cfg);
        }
        if (app.got_subcommand(eval_cmd)) return cmd_eval(eval_ck, eval_data, eval_split, eval_out, eval_regime);
        if (app.got_subcommand(cq_cmd))
            return cmd_cq(cq_ck, cq_data, cq_out, cq_cap, cq_regime, cq_seed, cq_queries_out);
        if (app.got_subcommand(ablate_cmd)) {
            if (!ab_config.empty()) apply_config_file(ab_config, cfg);
            return cmd_ablate(ab_suite, ab_data, ab_out, ab_model, ab_regime, cfg);
        }
        if (app.got_subcommand(report_cmd)) return cmd_report(report_in);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
