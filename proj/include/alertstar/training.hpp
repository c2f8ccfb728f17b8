#pragma once
// The shared training loop: per-epoch shuffling, model-specific batching
// ((h, r) grouping with k_max sampled tails for the propagation family,
// statement batches otherwise), margin or joint objectives, unit-norm
// clipping, Adam, per-epoch validation MRR and best-checkpoint selection.

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "alertstar/alertstar_model.hpp"
#include "alertstar/checkpoint.hpp"
#include "alertstar/cq.hpp"
#include "alertstar/graph.hpp"
#include "alertstar/metrics.hpp"
#include "alertstar/mt_alertstar_model.hpp"
#include "alertstar/mt_hr_nbfnet_model.hpp"
#include "alertstar/optim.hpp"
#include "alertstar/splits.hpp"

namespace alertstar {

enum class ModelKind { alertstar, mt_alertstar, hr_nbfnet, mt_hr_nbfnet, hr_nbfnet_cq };

inline const char* model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::alertstar: return "alertstar";
        case ModelKind::mt_alertstar: return "mt-alertstar";
        case ModelKind::hr_nbfnet: return "hr-nbfnet";
        case ModelKind::mt_hr_nbfnet: return "mt-hr-nbfnet";
        case ModelKind::hr_nbfnet_cq: return "hr-nbfnet-cq";
    }
    return "?";
}

inline ModelKind model_kind_from(const std::string& s) {
    if (s == "alertstar") return ModelKind::alertstar;
    if (s == "mt-alertstar") return ModelKind::mt_alertstar;
    if (s == "hr-nbfnet") return ModelKind::hr_nbfnet;
    if (s == "mt-hr-nbfnet") return ModelKind::mt_hr_nbfnet;
    if (s == "hr-nbfnet-cq") return ModelKind::hr_nbfnet_cq;
    throw std::invalid_argument("unknown model kind '" + s + "'");
}

struct TrainConfig {
    int64_t dim = 200;
    double lr = 5e-4;
    int epochs = 20;
    double margin = 1.0;
    double clip_norm = 1.0;
    int batch = 0;  // 0 = per-model default
    uint64_t seed = 0;
    int k_max = 8;
    int64_t q_max = 8;
    double dropout = 0.2;
    int layers = 3;
    int64_t chunk = 5000;
    int heads = 4;
    int enc_layers = 3;
    int64_t ffn_width = 800;
    double lambda_tail = 1.0;
    double lambda_rel = 0.8;
    double lambda_qv = 0.8;
    int64_t cq_cap = 200;
    bool no_qual = false;
    bool no_path = false;
    bool no_gate = false;

    int effective_batch(ModelKind k) const {
        if (batch > 0) return batch;
        switch (k) {
            case ModelKind::alertstar: return 128;
            case ModelKind::mt_alertstar: return 64;
            default: return 32;
        }
    }
    void validate() const {
        if (dim < 1 || lr <= 0 || epochs < 1 || margin <= 0 || clip_norm <= 0 || k_max < 1 || q_max < 1 ||
            layers < 1 || chunk < 1 || heads < 1 || enc_layers < 1 || ffn_width < 1 || cq_cap < 1)
            throw std::invalid_argument("train config: all sizes and rates must be positive");
        if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("train config: dropout must be in [0,1)");
    }
    // Inverse of as_fields for checkpoint restore; unknown keys are ignored.
    void apply_field(const std::string& key, const std::string& value) {
        const auto d = [&] { return std::stod(value); };
        const auto i = [&] { return std::stoll(value); };
        if (key == "dim") dim = i();
        else if (key == "lr") lr = d();
        else if (key == "epochs") epochs = static_cast<int>(i());
        else if (key == "margin") margin = d();
        else if (key == "clip_norm") clip_norm = d();
        else if (key == "batch") batch = static_cast<int>(i());
        else if (key == "seed") seed = static_cast<uint64_t>(i());
        else if (key == "k_max") k_max = static_cast<int>(i());
        else if (key == "q_max") q_max = i();
        else if (key == "dropout") dropout = d();
        else if (key == "layers") layers = static_cast<int>(i());
        else if (key == "chunk") chunk = i();
        else if (key == "heads") heads = static_cast<int>(i());
        else if (key == "enc_layers") enc_layers = static_cast<int>(i());
        else if (key == "ffn_width") ffn_width = i();
        else if (key == "lambda_tail") lambda_tail = d();
        else if (key == "lambda_rel") lambda_rel = d();
        else if (key == "lambda_qv") lambda_qv = d();
        else if (key == "no_qual") no_qual = i() != 0;
        else if (key == "no_path") no_path = i() != 0;
        else if (key == "no_gate") no_gate = i() != 0;
    }

    std::map<std::string, std::string> as_fields() const {
        std::map<std::string, std::string> f;
        auto put = [&f](const std::string& k, auto v) {
            std::ostringstream os;
            os.precision(17);
            os << v;
            f["config." + k] = os.str();
        };
        put("dim", dim);
        put("lr", lr);
        put("epochs", epochs);
        put("margin", margin);
        put("clip_norm", clip_norm);
        put("batch", batch);
        put("seed", seed);
        put("k_max", k_max);
        put("q_max", q_max);
        put("dropout", dropout);
        put("layers", layers);
        put("chunk", chunk);
        put("heads", heads);
        put("enc_layers", enc_layers);
        put("ffn_width", ffn_width);
        put("lambda_tail", lambda_tail);
        put("lambda_rel", lambda_rel);
        put("lambda_qv", lambda_qv);
        put("no_qual", no_qual ? 1 : 0);
        put("no_path", no_path ? 1 : 0);
        put("no_gate", no_gate ? 1 : 0);
        return f;
    }
};

// One model of any kind behind a single surface, so the trainer, evaluator
// and CLI stay model-agnostic.
struct AnyModel {
    ModelKind kind = ModelKind::alertstar;
    std::shared_ptr<AlertStarModel> as;
    std::shared_ptr<MtAlertStarModel> mtas;
    std::shared_ptr<HrNbfModel> hr;
    std::shared_ptr<MtHrModel> mthr;
    std::shared_ptr<CqModel> cq;

    NamedParams named_params() const {
        switch (kind) {
            case ModelKind::alertstar: return as->named_params();
            case ModelKind::mt_alertstar: return mtas->named_params();
            case ModelKind::hr_nbfnet: return hr->named_params();
            case ModelKind::mt_hr_nbfnet: return mthr->named_params();
            case ModelKind::hr_nbfnet_cq: return cq->named_params();
        }
        throw std::logic_error("unreachable");
    }
    std::vector<Array> trainable() const {
        std::vector<Array> out;
        for (auto& [name, a] : named_params())
            if (a.tracked()) out.push_back(a);
        return out;
    }

    // Eval-mode tail scores over every entity for one query statement.
    std::vector<double> tail_scores(const QualifiedStatement& s, const HyperRelGraph& train_graph) const {
        switch (kind) {
            case ModelKind::alertstar:
                return as->score_all(as->forward(s.head, s.relation, s.qualifiers, ModeCtx::eval())).values();
            case ModelKind::mt_alertstar:
                return mtas->tail_logits(s, ModeCtx::eval()).values();
            case ModelKind::hr_nbfnet:
                return hr->infer(s.head, s.relation, s.qualifiers, train_graph).values();
            case ModelKind::mt_hr_nbfnet: {
                auto st = mthr->backbone.propagate_full(s.head, s.relation, s.qualifiers, train_graph,
                                                        ModeCtx::eval());
                return mthr->tail_scores_all(st, s.relation, ModeCtx::eval()).values();
            }
            case ModelKind::hr_nbfnet_cq: {
                QueryInstance q;
                q.kind = QueryKind::q1p;
                q.head1 = s.head;
                q.rel1 = s.relation;
                q.quals = s.qualifiers;
                return cq->score_all(cq->build_query(q, ModeCtx::eval())).values();
            }
        }
        throw std::logic_error("unreachable");
    }

    double gate_value() const { return kind == ModelKind::alertstar ? as->gate_value() : std::nan(""); }
};

inline AnyModel make_model(ModelKind kind, const Vocab& vocab, const TrainConfig& cfg) {
    cfg.validate();
    AnyModel m;
    m.kind = kind;
    const Id n = vocab.num_entities(), r = vocab.num_relations(), qk = std::max<Id>(1, vocab.num_qual_keys()),
             qv = std::max<Id>(1, vocab.num_qual_values());
    switch (kind) {
        case ModelKind::alertstar: {
            AlertStarConfig c;
            c.dim = cfg.dim;
            c.heads = cfg.heads;
            c.dropout = cfg.dropout;
            c.no_qual = cfg.no_qual;
            c.no_path = cfg.no_path;
            c.no_gate = cfg.no_gate;
            m.as = std::make_shared<AlertStarModel>(AlertStarModel::init(n, r, qk, qv, c, cfg.seed));
            break;
        }
        case ModelKind::mt_alertstar: {
            MtAlertStarConfig c;
            c.dim = cfg.dim;
            c.enc_layers = cfg.enc_layers;
            c.heads = cfg.heads;
            c.ffn_width = cfg.ffn_width;
            c.dropout = cfg.dropout;
            c.lambda_tail = cfg.lambda_tail;
            c.lambda_rel = cfg.lambda_rel;
            c.lambda_qv = cfg.lambda_qv;
            m.mtas = std::make_shared<MtAlertStarModel>(MtAlertStarModel::init(n, r, qk, qv, c, cfg.seed));
            break;
        }
        case ModelKind::hr_nbfnet: {
            HrConfig c;
            c.dim = cfg.dim;
            c.layers = cfg.layers;
            c.chunk = cfg.chunk;
            c.dropout = cfg.dropout;
            m.hr = std::make_shared<HrNbfModel>(HrNbfModel::init(n, r, qk, qv, c, cfg.seed));
            break;
        }
        case ModelKind::mt_hr_nbfnet: {
            MtHrConfig c;
            c.hr.dim = cfg.dim;
            c.hr.layers = cfg.layers;
            c.hr.chunk = cfg.chunk;
            c.hr.dropout = cfg.dropout;
            c.lambda_tail = cfg.lambda_tail;
            c.lambda_rel = cfg.lambda_rel;
            c.lambda_qv = cfg.lambda_qv;
            c.margin = cfg.margin;
            c.clip_norm = cfg.clip_norm;
            m.mthr = std::make_shared<MtHrModel>(MtHrModel::init(n, r, qk, qv, c, cfg.seed));
            break;
        }
        case ModelKind::hr_nbfnet_cq: {
            CqConfig c;
            c.dim = cfg.dim;
            c.heads = cfg.heads;
            c.dropout = cfg.dropout;
            c.margin = cfg.margin;
            c.clip_norm = cfg.clip_norm;
            c.per_type_cap = cfg.cq_cap;
            m.cq = std::make_shared<CqModel>(CqModel::init(n, r, qk, qv, c, cfg.seed));
            break;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

inline RankingReport evaluate_tail_ranking(const AnyModel& model, const HyperRelGraph& train_graph,
                                           const std::vector<QualifiedStatement>& eval_statements,
                                           const FilterSets& filters) {
    std::vector<int64_t> ranks;
    for (const auto& s : eval_statements) {
        auto scores = model.tail_scores(s, train_graph);
        auto it = filters.find({s.head, s.relation});
        static const std::vector<Id> none;
        ranks.push_back(filtered_rank(scores, s.tail, it == filters.end() ? none : it->second));
    }
    return aggregate(std::move(ranks));
}

struct MtExtraReports {
    RankingReport relation;
    double relation_accuracy = 0.0;
    std::optional<RankingReport> qual_value;
};

// Auxiliary-head metrics for MT-AlertStar: relation ranking plus exact-match
// accuracy, and qualifier-value ranking over every qualifier pair.
inline MtExtraReports evaluate_mt_extras(const MtAlertStarModel& m,
                                         const std::vector<QualifiedStatement>& eval_statements) {
    MtExtraReports out;
    std::vector<int64_t> rel_ranks;
    int64_t exact = 0;
    std::vector<int64_t> qv_ranks;
    for (const auto& s : eval_statements) {
        const auto rel_scores = m.relation_logits(s, ModeCtx::eval()).values();
        rel_ranks.push_back(filtered_rank(rel_scores, s.relation, {}));
        Id argmax = 0;
        for (Id c = 1; c < static_cast<Id>(rel_scores.size()); ++c)
            if (rel_scores[static_cast<size_t>(c)] > rel_scores[static_cast<size_t>(argmax)]) argmax = c;
        if (argmax == s.relation) ++exact;
        for (size_t j = 0; j < s.qualifiers.size(); ++j) {
            const auto qv_scores = m.qual_value_logits(s, static_cast<int64_t>(j), ModeCtx::eval()).values();
            qv_ranks.push_back(filtered_rank(qv_scores, s.qualifiers[j].value, {}));
        }
    }
    out.relation = aggregate(std::move(rel_ranks));
    out.relation_accuracy = static_cast<double>(exact) / static_cast<double>(eval_statements.size());
    if (!qv_ranks.empty()) out.qual_value = aggregate(std::move(qv_ranks));
    return out;
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_mrr = 0.0;
    double gate_pre = std::nan("");
    double gate_post = std::nan("");
};

struct TrainOutcome {
    std::vector<EpochRecord> history;
    double best_val_mrr = 0.0;
    int best_epoch = 0;
};

namespace detail {

struct GroupedQueries {
    // (head, relation) -> tails, in first-appearance order for determinism
    std::vector<std::pair<std::pair<Id, Id>, std::vector<Id>>> groups;
    std::vector<std::vector<QualPair>> rep_quals;  // first statement of each group
};

inline GroupedQueries group_statements(const std::vector<QualifiedStatement>& sts) {
    GroupedQueries g;
    std::map<std::pair<Id, Id>, size_t> index;
    for (const auto& s : sts) {
        auto key = std::make_pair(s.head, s.relation);
        auto it = index.find(key);
        if (it == index.end()) {
            index.emplace(key, g.groups.size());
            g.groups.push_back({key, {s.tail}});
            g.rep_quals.push_back(s.qualifiers);
        } else {
            g.groups[it->second].second.push_back(s.tail);
        }
    }
    return g;
}

}  // namespace detail

// Trains one model kind on the split, evaluating validation MRR per epoch and
// writing a checkpoint at every new best (stem may be empty to skip saving).
inline TrainOutcome train_model(AnyModel& model, const SplitResult& split_data, const Vocab& vocab,
                                const TrainConfig& cfg, const std::string& checkpoint_stem,
                                const std::string& split_label = "", const std::string& regime_label = "") {
    cfg.validate();
    const auto graph = build_graph(split_data.train, vocab, cfg.q_max);
    const auto filters = build_filter_sets({&split_data.train, &split_data.valid, &split_data.test});
    auto params = model.trainable();
    Adam opt(cfg.lr);
    Rng run_rng(mix64(cfg.seed ^ 0x747261696eull));

    TrainOutcome out;
    const int batch_size = cfg.effective_batch(model.kind);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.gate_pre = model.gate_value();

        Rng shuffle_rng(mix64(cfg.seed ^ (0x65706f63ull + static_cast<uint64_t>(epoch))));
        double loss_sum = 0.0;
        int64_t loss_count = 0;
        auto check_finite = [&](double loss, const char* what, int64_t index) {
            if (!std::isfinite(loss))
                throw std::runtime_error("training aborted: non-finite loss at epoch " + std::to_string(epoch) +
                                         ", " + what + " " + std::to_string(index));
        };

        if (model.kind == ModelKind::alertstar) {
            std::vector<size_t> order(split_data.train.size());
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), shuffle_rng);
            for (size_t b = 0; b < order.size(); b += static_cast<size_t>(batch_size)) {
                const size_t e = std::min(order.size(), b + static_cast<size_t>(batch_size));
                Array batch_loss;
                ModeCtx mode = ModeCtx::train(cfg.dropout, run_rng);
                for (size_t i = b; i < e; ++i) {
                    const auto& s = split_data.train[order[i]];
                    Array z = model.as->forward(s.head, s.relation, s.qualifiers, mode);
                    Array pos = model.as->score_one(z, s.tail, mode);
                    Array neg = model.as->score_one(z, sample_negative(vocab.num_entities(), run_rng), mode);
                    Array l = margin_loss(pos, neg, cfg.margin);
                    batch_loss = batch_loss.defined() ? add(batch_loss, l) : l;
                }
                batch_loss = scale(batch_loss, 1.0 / static_cast<double>(e - b));
                const double lv = batch_loss.item();
                check_finite(lv, "batch", static_cast<int64_t>(b / batch_size));
                loss_sum += lv;
                ++loss_count;
                for (auto& p : params) p.zero_grad();
                backward(batch_loss);
                clip_global_norm(params, cfg.clip_norm);
                opt.step(params);
            }
        } else if (model.kind == ModelKind::mt_alertstar) {
            std::vector<size_t> order(split_data.train.size());
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), shuffle_rng);
            // one qualifier-value target pair per statement per epoch
            std::vector<int64_t> qv_pick(split_data.train.size(), 0);
            for (size_t i = 0; i < split_data.train.size(); ++i) {
                const size_t n = split_data.train[i].qualifiers.size();
                if (n > 1) qv_pick[i] = static_cast<int64_t>(shuffle_rng() % n);
            }
            for (size_t b = 0; b < order.size(); b += static_cast<size_t>(batch_size)) {
                const size_t e = std::min(order.size(), b + static_cast<size_t>(batch_size));
                Array batch_loss;
                ModeCtx mode = ModeCtx::train(cfg.dropout, run_rng);
                for (size_t i = b; i < e; ++i) {
                    const auto& s = split_data.train[order[i]];
                    Array l = model.mtas->multitask_loss(s, mode, qv_pick[order[i]]).total;
                    batch_loss = batch_loss.defined() ? add(batch_loss, l) : l;
                }
                batch_loss = scale(batch_loss, 1.0 / static_cast<double>(e - b));
                const double lv = batch_loss.item();
                check_finite(lv, "batch", static_cast<int64_t>(b / batch_size));
                loss_sum += lv;
                ++loss_count;
                for (auto& p : params) p.zero_grad();
                backward(batch_loss);
                clip_global_norm(params, cfg.clip_norm);
                opt.step(params);
            }
        } else if (model.kind == ModelKind::hr_nbfnet || model.kind == ModelKind::mt_hr_nbfnet) {
            auto grouped = detail::group_statements(split_data.train);
            std::vector<size_t> order(grouped.groups.size());
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), shuffle_rng);
            for (size_t gi : order) {
                const auto& [key, tails] = grouped.groups[gi];
                std::vector<Id> sampled = tails;
                if (static_cast<int>(sampled.size()) > cfg.k_max) {
                    std::shuffle(sampled.begin(), sampled.end(), run_rng);
                    sampled.resize(static_cast<size_t>(cfg.k_max));
                }
                ModeCtx mode = ModeCtx::train(cfg.dropout, run_rng);
                double lv;
                if (model.kind == ModelKind::hr_nbfnet) {
                    lv = model.hr
                             ->training_step(key.first, key.second, sampled, grouped.rep_quals[gi], graph,
                                             params, opt, run_rng, mode, cfg.margin, cfg.clip_norm)
                             .loss;
                } else {
                    lv = model.mthr
                             ->training_step(key.first, key.second, sampled, grouped.rep_quals[gi], graph,
                                             params, opt, run_rng, mode)
                             .total;
                }
                check_finite(lv, "group", static_cast<int64_t>(gi));
                loss_sum += lv;
                ++loss_count;
            }
        } else {  // hr_nbfnet_cq
            std::vector<size_t> order(split_data.train.size());
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), shuffle_rng);
            for (size_t i : order) {
                ModeCtx mode = ModeCtx::train(cfg.dropout, run_rng);
                const double lv =
                    model.cq->training_step(split_data.train[i], graph, params, opt, run_rng, mode).total;
                check_finite(lv, "statement", static_cast<int64_t>(i));
                loss_sum += lv;
                ++loss_count;
            }
        }

        rec.train_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
        rec.gate_post = model.gate_value();
        rec.val_mrr =
            split_data.valid.empty() ? 0.0 : evaluate_tail_ranking(model, graph, split_data.valid, filters).mrr;
        out.history.push_back(rec);

        if (rec.val_mrr > out.best_val_mrr || out.best_epoch == 0) {
            out.best_val_mrr = rec.val_mrr;
            out.best_epoch = epoch;
            if (!checkpoint_stem.empty()) {
                CheckpointMeta meta;
                meta.model_kind = model_kind_name(model.kind);
                meta.fields = cfg.as_fields();
                std::ostringstream mrr, vh;
                mrr.precision(17);
                mrr << rec.val_mrr;
                meta.fields["best_val_mrr"] = mrr.str();
                meta.fields["best_epoch"] = std::to_string(epoch);
                vh << std::hex << vocab.hash();
                meta.fields["vocab_hash"] = vh.str();
                if (!split_label.empty()) meta.fields["split_mode"] = split_label;
                if (!regime_label.empty()) meta.fields["regime"] = regime_label;
                save_checkpoint(checkpoint_stem, meta, model.named_params());
            }
        }
    }
    return out;
}

inline void write_history_file(const std::string& path, const std::vector<EpochRecord>& history) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "epoch\ttrain_loss\tval_mrr\tgate_pre\tgate_post\n";
    os.precision(17);
    for (const auto& r : history) {
        os << r.epoch << '\t' << r.train_loss << '\t' << r.val_mrr << '\t';
        if (std::isnan(r.gate_pre)) os << '-';
        else os << r.gate_pre;
        os << '\t';
        if (std::isnan(r.gate_post)) os << '-';
        else os << r.gate_post;
        os << '\n';
    }
}

}  // namespace alertstar
