#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "alertstar/checkpoint.hpp"
#include "alertstar/report.hpp"
#include "alertstar/training.hpp"

using namespace alertstar;

namespace {

// A learnable synthetic graph: the tail is a deterministic function of
// (head, relation), so every model can memorise it.
struct Synthetic {
    std::vector<QualifiedStatement> statements;
    Vocab vocab;
};

Synthetic learnable_graph(int num_entities, int num_relations, int num_statements, uint64_t seed) {
    Synthetic out;
    for (int i = 0; i < num_entities; ++i) out.vocab.entities.intern("ip" + std::to_string(i));
    for (int i = 0; i < num_relations; ++i) out.vocab.relations.intern("cat" + std::to_string(i));
    out.vocab.qual_keys.intern("port");
    out.vocab.qual_values.intern("22");
    out.vocab.qual_values.intern("443");
    Rng rng(seed);
    std::uniform_int_distribution<Id> de(0, num_entities - 1), dr(0, num_relations - 1);
    for (int i = 0; i < num_statements; ++i) {
        QualifiedStatement s;
        s.head = de(rng);
        s.relation = dr(rng);
        s.tail = (s.head * 7 + s.relation * 3 + 1) % num_entities;
        if (s.tail == s.head) s.tail = (s.tail + 1) % num_entities;
        s.qualifiers.push_back({0, static_cast<Id>((s.head + s.relation) % 2)});
        out.statements.push_back(s);
    }
    return out;
}

TrainConfig fast_config(int64_t dim, int epochs, uint64_t seed) {
    TrainConfig cfg;
    cfg.dim = dim;
    cfg.epochs = epochs;
    cfg.seed = seed;
    cfg.lr = 5e-3;
    cfg.dropout = 0.0;
    cfg.heads = 2;
    cfg.enc_layers = 1;
    cfg.ffn_width = 2 * dim;
    cfg.layers = 2;
    cfg.batch = 32;
    return cfg;
}

std::string temp_dir() {
    auto p = std::filesystem::temp_directory_path() / "alertstar_test";
    std::filesystem::create_directories(p);
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

}  // namespace

TEST(Checkpoint, RoundTripRestoresValues) {
    auto syn = learnable_graph(8, 2, 20, 1);
    auto cfg = fast_config(8, 1, 2);
    auto model = make_model(ModelKind::alertstar, syn.vocab, cfg);
    const std::string stem = temp_dir() + "/ck_roundtrip";

    CheckpointMeta meta;
    meta.model_kind = "alertstar";
    meta.fields["vocab_hash"] = "abc";
    save_checkpoint(stem, meta, model.named_params());

    auto model2 = make_model(ModelKind::alertstar, syn.vocab, fast_config(8, 1, 99));  // different init
    auto ck = read_checkpoint(stem);
    EXPECT_EQ(ck.meta.model_kind, "alertstar");
    EXPECT_EQ(ck.meta.fields.at("vocab_hash"), "abc");
    auto np2 = model2.named_params();
    load_checkpoint_into(ck, np2);
    auto np1 = model.named_params();
    for (size_t i = 0; i < np1.size(); ++i) {
        const auto& a = np1[i].second.values();
        const auto& b = np2[i].second.values();
        ASSERT_EQ(a.size(), b.size());
        for (size_t j = 0; j < a.size(); ++j) EXPECT_EQ(a[j], b[j]);
    }
}

TEST(Checkpoint, ShapeMismatchRejected) {
    auto syn = learnable_graph(8, 2, 20, 1);
    auto model = make_model(ModelKind::alertstar, syn.vocab, fast_config(8, 1, 2));
    const std::string stem = temp_dir() + "/ck_mismatch";
    CheckpointMeta meta;
    meta.model_kind = "alertstar";
    save_checkpoint(stem, meta, model.named_params());
    auto bigger = make_model(ModelKind::alertstar, syn.vocab, fast_config(16, 1, 2));
    auto ck = read_checkpoint(stem);
    auto np = bigger.named_params();
    EXPECT_THROW(load_checkpoint_into(ck, np), std::runtime_error);
}

TEST(Training, HistoryHasOneRowPerEpoch) {
    auto syn = learnable_graph(10, 2, 40, 3);
    SplitSpec sp;
    sp.seed = 1;
    auto split_data = split(syn.statements, sp);
    auto cfg = fast_config(8, 5, 4);
    auto model = make_model(ModelKind::alertstar, syn.vocab, cfg);
    auto out = train_model(model, split_data, syn.vocab, cfg, "");
    EXPECT_EQ(out.history.size(), 5u);
    for (const auto& r : out.history) EXPECT_TRUE(std::isfinite(r.train_loss));
}

TEST(Training, BestValMrrIsMaxOverHistory) {
    auto syn = learnable_graph(10, 2, 60, 5);
    SplitSpec sp;
    sp.seed = 2;
    auto split_data = split(syn.statements, sp);
    auto cfg = fast_config(8, 6, 6);
    auto model = make_model(ModelKind::alertstar, syn.vocab, cfg);
    auto out = train_model(model, split_data, syn.vocab, cfg, "");
    double max_mrr = 0.0;
    for (const auto& r : out.history) max_mrr = std::max(max_mrr, r.val_mrr);
    EXPECT_DOUBLE_EQ(out.best_val_mrr, max_mrr);
}

TEST(Training, GateHistoryStartsAtSigmoidOfInit) {
    auto syn = learnable_graph(10, 2, 30, 7);
    SplitSpec sp;
    sp.seed = 3;
    auto split_data = split(syn.statements, sp);
    auto cfg = fast_config(8, 2, 8);
    auto model = make_model(ModelKind::alertstar, syn.vocab, cfg);
    auto out = train_model(model, split_data, syn.vocab, cfg, "");
    EXPECT_NEAR(out.history[0].gate_pre, 1.0 / (1.0 + std::exp(-0.5)), 1e-15);
    // the next epoch picks up exactly where the previous one ended
    EXPECT_EQ(out.history[1].gate_pre, out.history[0].gate_post);
}

TEST(Training, LossDecreasesOnLearnableGraphForEveryModelKind) {
    auto syn = learnable_graph(12, 2, 50, 9);
    SplitSpec sp;
    sp.seed = 4;
    auto split_data = split(syn.statements, sp);
    for (ModelKind kind : {ModelKind::alertstar, ModelKind::mt_alertstar, ModelKind::hr_nbfnet,
                           ModelKind::mt_hr_nbfnet, ModelKind::hr_nbfnet_cq}) {
        auto cfg = fast_config(8, 4, 10);
        auto model = make_model(kind, syn.vocab, cfg);
        auto out = train_model(model, split_data, syn.vocab, cfg, "");
        EXPECT_LT(out.history.back().train_loss, out.history.front().train_loss)
            << model_kind_name(kind);
    }
}

TEST(Training, DeterministicHistoryAndCheckpointBytes) {
    auto syn = learnable_graph(10, 2, 40, 11);
    SplitSpec sp;
    sp.seed = 5;
    auto split_data = split(syn.statements, sp);
    const std::string stem_a = temp_dir() + "/det_a", stem_b = temp_dir() + "/det_b";
    auto cfg = fast_config(8, 3, 12);

    auto ma = make_model(ModelKind::alertstar, syn.vocab, cfg);
    auto oa = train_model(ma, split_data, syn.vocab, cfg, stem_a);
    auto mb = make_model(ModelKind::alertstar, syn.vocab, cfg);
    auto ob = train_model(mb, split_data, syn.vocab, cfg, stem_b);

    ASSERT_EQ(oa.history.size(), ob.history.size());
    for (size_t i = 0; i < oa.history.size(); ++i) {
        EXPECT_EQ(oa.history[i].train_loss, ob.history[i].train_loss);
        EXPECT_EQ(oa.history[i].val_mrr, ob.history[i].val_mrr);
        EXPECT_EQ(oa.history[i].gate_post, ob.history[i].gate_post);
    }
    EXPECT_EQ(slurp(checkpoint_values_path(stem_a)), slurp(checkpoint_values_path(stem_b)));
}

TEST(Training, NonFiniteLossAborts) {
    auto syn = learnable_graph(8, 2, 20, 13);
    SplitSpec sp;
    sp.seed = 6;
    auto split_data = split(syn.statements, sp);
    auto cfg = fast_config(8, 2, 14);
    auto model = make_model(ModelKind::alertstar, syn.vocab, cfg);
    // poison one embedding so the first loss is NaN
    model.as->entity_table.mutable_values()[0] = std::nan("");
    try {
        train_model(model, split_data, syn.vocab, cfg, "");
        FAIL() << "expected abort";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
    }
}

TEST(Evaluation, PerfectMemorisationGivesUnitMrr) {
    // heads 0..5 map to disjoint tails 6..11, so steering a tail row never
    // disturbs another query's fused vector
    Vocab vocab;
    for (int i = 0; i < 12; ++i) vocab.entities.intern("ip" + std::to_string(i));
    vocab.relations.intern("cat0");
    vocab.qual_keys.intern("port");
    vocab.qual_values.intern("22");
    std::vector<QualifiedStatement> sts;
    for (Id h = 0; h < 6; ++h) sts.push_back({h, 0, h + 6, {{0, 0}}});

    auto cfg = fast_config(8, 1, 16);
    auto model = make_model(ModelKind::alertstar, vocab, cfg);
    auto graph = build_graph(sts, vocab, cfg.q_max);
    auto filters = build_filter_sets({&sts});
    for (const auto& s : sts) {
        Array z = model.as->forward(s.head, s.relation, s.qualifiers, ModeCtx::eval());
        auto& ev = model.as->entity_table.mutable_values();
        for (int64_t j = 0; j < cfg.dim; ++j) ev[s.tail * cfg.dim + j] = 1e3 * z.at(0, j);
    }
    auto rep = evaluate_tail_ranking(model, graph, sts, filters);
    EXPECT_DOUBLE_EQ(rep.mrr, 1.0);
}

TEST(Evaluation, MtExtrasIncludeAccuracyAndQualValue) {
    auto syn = learnable_graph(8, 3, 30, 17);
    auto cfg = fast_config(8, 1, 18);
    auto model = make_model(ModelKind::mt_alertstar, syn.vocab, cfg);
    auto extras = evaluate_mt_extras(*model.mtas, syn.statements);
    EXPECT_GE(extras.relation_accuracy, 0.0);
    EXPECT_LE(extras.relation_accuracy, 1.0);
    EXPECT_TRUE(extras.qual_value.has_value());
    EXPECT_GE(extras.relation.mr, 1.0);
}

TEST(Report, TableHasExpectedColumns) {
    RankingReport r = aggregate({1, 2, 10});
    ReportRow row{"alertstar", r, std::nullopt, false};
    auto text = render_report_table("tail prediction", {row});
    EXPECT_NE(text.find("MR"), std::string::npos);
    EXPECT_NE(text.find("MRR"), std::string::npos);
    EXPECT_NE(text.find("H@1"), std::string::npos);
    EXPECT_NE(text.find("H@3"), std::string::npos);
    EXPECT_NE(text.find("H@10"), std::string::npos);
    EXPECT_EQ(text.find("Acc"), std::string::npos);
}

TEST(Report, AbsentRowsRenderAsAbsent) {
    ReportRow present{"1p", aggregate({2, 3}), std::nullopt, false};
    ReportRow missing{"2p", RankingReport{}, std::nullopt, true};
    auto text = render_report_table("complex queries", {present, missing});
    EXPECT_NE(text.find("absent"), std::string::npos);
    const std::string path = temp_dir() + "/absent.tsv";
    write_report_tsv(path, {present, missing}, "inductive", "q100");
    auto tsv = slurp(path);
    EXPECT_NE(tsv.find("2p\tinductive\tq100\tabsent"), std::string::npos);
}

TEST(Report, TsvRoundTripsLabels) {
    RankingReport r = aggregate({1, 1});
    r.split_label = "inductive";
    const std::string path = temp_dir() + "/report.tsv";
    write_report_tsv(path, {{"alertstar", r, std::nullopt, false}}, "inductive", "q100");
    auto text = slurp(path);
    EXPECT_NE(text.find("inductive"), std::string::npos);
    EXPECT_NE(text.find("q100"), std::string::npos);
    EXPECT_NE(text.find("alertstar"), std::string::npos);
}

TEST(Report, HistoryFileHasHeaderAndRows)
{
    std::vector<EpochRecord> hist(2);
    hist[0] = {1, 0.5, 0.3, 0.62, 0.63};
    hist[1] = {2, 0.4, 0.35, 0.63, 0.64};
    const std::string path = temp_dir() + "/history.tsv";
    write_history_file(path, hist);
    auto text = slurp(path);
    EXPECT_NE(text.find("epoch\ttrain_loss\tval_mrr\tgate_pre\tgate_post"), std::string::npos);
    EXPECT_NE(text.find("\n2\t"), std::string::npos);
}
