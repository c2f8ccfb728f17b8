#include <gtest/gtest.h>

#include <cmath>

#include "alertstar/mt_alertstar_model.hpp"
#include "support/gradcheck.hpp"
#include "support/scalar_oracles.hpp"

using namespace alertstar;
namespace ts = testsupport;

namespace {

MtAlertStarModel tiny_model(Id n = 6, Id r = 3, Id qk = 4, Id qv = 5, int64_t d = 4, int layers = 1,
                            int heads = 1, uint64_t seed = 3) {
    MtAlertStarConfig cfg;
    cfg.dim = d;
    cfg.enc_layers = layers;
    cfg.heads = heads;
    cfg.ffn_width = 2 * d;
    cfg.dropout = 0.0;
    return MtAlertStarModel::init(n, r, qk, qv, cfg, seed);
}

QualifiedStatement stmt(Id h, Id r, Id t, std::vector<QualPair> q = {}) {
    QualifiedStatement s;
    s.head = h;
    s.relation = r;
    s.tail = t;
    s.qualifiers = std::move(q);
    return s;
}

// Scalar-loop encoder layer oracle for single-head layers.
ts::Mat encoder_layer_oracle(const EncoderLayer& l, const ts::Mat& x) {
    const int64_t d = l.w_out.shape()[0];
    const size_t S = x.size();
    ts::Mat q, k, v;
    for (const auto& row : x) {
        q.push_back(ts::sc_matvec_rowmajor(l.w_query[0].values(), d, d, row));
        k.push_back(ts::sc_matvec_rowmajor(l.w_key[0].values(), d, d, row));
        v.push_back(ts::sc_matvec_rowmajor(l.w_value[0].values(), d, d, row));
    }
    ts::Mat h1(S);
    for (size_t i = 0; i < S; ++i) {
        ts::Vec s(S, 0.0);
        for (size_t t = 0; t < S; ++t) {
            for (int64_t j = 0; j < d; ++j) s[t] += q[i][static_cast<size_t>(j)] * k[t][static_cast<size_t>(j)];
            s[t] /= std::sqrt(static_cast<double>(d));
        }
        ts::Vec w = ts::sc_softmax(s);
        ts::Vec mixed(static_cast<size_t>(d), 0.0);
        for (size_t t = 0; t < S; ++t)
            for (int64_t j = 0; j < d; ++j) mixed[static_cast<size_t>(j)] += w[t] * v[t][static_cast<size_t>(j)];
        ts::Vec attn = ts::sc_matvec_rowmajor(l.w_out.values(), d, d, mixed);
        h1[i] = ts::sc_layernorm(l.ln1, ts::sc_add(x[i], attn));
    }
    ts::Mat out(S);
    for (size_t i = 0; i < S; ++i) {
        ts::Vec f = ts::sc_linear(l.ffn2, ts::sc_relu(ts::sc_linear(l.ffn1, h1[i])));
        out[i] = ts::sc_layernorm(l.ln2, ts::sc_add(h1[i], f));
    }
    return out;
}

}  // namespace

TEST(MtSequence, TailTaskZeroesRowTwo) {
    auto m = tiny_model();
    auto s = stmt(0, 1, 2, {{0, 1}, {2, 3}});
    Array x = m.build_sequence(s, MtTask::tail);
    ASSERT_EQ(x.shape()[0], 7);  // 3 + 2*2
    for (int64_t j = 0; j < 4; ++j) EXPECT_EQ(x.at(2, j), 0.0);
    for (int64_t j = 0; j < 4; ++j) EXPECT_EQ(x.at(0, j), m.entity_table.at(0, j));
    for (int64_t j = 0; j < 4; ++j) EXPECT_EQ(x.at(1, j), m.relation_table.at(1, j));
}

TEST(MtSequence, QualValueTaskRemovesTargetPair) {
    auto m = tiny_model();
    auto s = stmt(0, 1, 2, {{0, 1}});
    Array x = m.build_sequence(s, MtTask::qual_value, 0);
    EXPECT_EQ(x.shape()[0], 3);
}

TEST(MtSequence, RelationTaskZeroesRowOne) {
    auto m = tiny_model();
    auto s = stmt(0, 1, 2);
    Array x = m.build_sequence(s, MtTask::relation);
    ASSERT_EQ(x.shape()[0], 3);
    for (int64_t j = 0; j < 4; ++j) EXPECT_EQ(x.at(1, j), 0.0);
}

TEST(MtSequence, QualValueOnBareTripleRejected) {
    auto m = tiny_model();
    EXPECT_THROW(m.build_sequence(stmt(0, 1, 2), MtTask::qual_value, 0), std::invalid_argument);
}

TEST(MtEncode, SingleHeadLayerMatchesScalarOracle) {
    auto m = tiny_model(6, 3, 4, 5, 4, 1, 1, 11);
    auto s = stmt(1, 0, 3, {{1, 2}});
    Array seq = m.build_sequence(s, MtTask::tail);
    Array ctx = m.encode_context(seq, ModeCtx::eval());

    ts::Mat x;
    for (int64_t i = 0; i < seq.shape()[0]; ++i) {
        ts::Vec row(4);
        for (int64_t j = 0; j < 4; ++j) row[static_cast<size_t>(j)] = seq.at(i, j);
        x.push_back(row);
    }
    auto out = encoder_layer_oracle(m.layers[0], x);
    for (int64_t j = 0; j < 4; ++j) EXPECT_NEAR(ctx.at(0, j), out[1][static_cast<size_t>(j)], 1e-10);
}

TEST(MtEncode, QualifierPairPermutationInvariant) {
    auto m = tiny_model(6, 3, 4, 5, 4, 2, 2, 13);
    auto a = stmt(0, 1, 2, {{0, 1}, {2, 3}, {1, 0}});
    auto b = stmt(0, 1, 2, {{1, 0}, {0, 1}, {2, 3}});
    Array ca = m.encode_context(m.build_sequence(a, MtTask::tail), ModeCtx::eval());
    Array cb = m.encode_context(m.build_sequence(b, MtTask::tail), ModeCtx::eval());
    for (int64_t j = 0; j < 4; ++j) EXPECT_EQ(ca.at(0, j), cb.at(0, j));
}

TEST(MtEncode, EvalModeDeterministic) {
    auto m = tiny_model(6, 3, 4, 5, 4, 2, 2, 17);
    auto s = stmt(2, 1, 4, {{0, 2}});
    Array c1 = m.encode_context(m.build_sequence(s, MtTask::tail), ModeCtx::eval());
    Array c2 = m.encode_context(m.build_sequence(s, MtTask::tail), ModeCtx::eval());
    for (int64_t j = 0; j < 4; ++j) EXPECT_EQ(c1.at(0, j), c2.at(0, j));
}

TEST(MtLoss, UniformTailLogitsGiveLogN) {
    auto m = tiny_model(4, 2, 2, 2);
    // zero the tail head entirely: logits are uniform over N = 4
    for (auto& v : m.head_tail.l2.w.mutable_values()) v = 0.0;
    for (auto& v : m.head_tail.l2.b.mutable_values()) v = 0.0;
    auto s = stmt(0, 1, 2);
    Array loss = cross_entropy(m.tail_logits(s, ModeCtx::eval()), s.tail);
    EXPECT_NEAR(loss.item(), std::log(4.0), 1e-12);
}

TEST(MtLoss, AuxWeightsZeroDegeneratesToTailLoss) {
    auto m = tiny_model();
    m.cfg.lambda_rel = 0.0;
    m.cfg.lambda_qv = 0.0;
    auto s = stmt(0, 1, 2, {{0, 1}});
    auto b = m.multitask_loss(s, ModeCtx::eval());
    EXPECT_DOUBLE_EQ(b.total.item(), b.tail.item() * m.cfg.lambda_tail);
}

TEST(MtLoss, TotalIsWeightedSumOfTaskLosses) {
    auto m = tiny_model();
    m.cfg.lambda_tail = 1.0;
    m.cfg.lambda_rel = 0.8;
    m.cfg.lambda_qv = 0.7;
    auto s = stmt(1, 2, 3, {{0, 4}, {3, 2}});
    auto b = m.multitask_loss(s, ModeCtx::eval(), 1);
    const double expect = 1.0 * b.tail.item() + 0.8 * b.relation.item() + 0.7 * b.qual_value.item();
    EXPECT_EQ(b.total.item(), expect);
}

TEST(MtLoss, GoldIdOutOfRangeRejected) {
    auto m = tiny_model(4, 2, 2, 2);
    auto s = stmt(0, 1, 2);
    s.tail = 9;  // outside entity vocab
    EXPECT_THROW(m.multitask_loss(s, ModeCtx::eval()), std::out_of_range);
}

TEST(MtLeakage, TailLossIgnoresGoldTailEmbedding) {
    auto m = tiny_model(6, 3, 4, 5, 4, 2, 2, 19);
    auto s = stmt(0, 1, 2, {{0, 1}});
    Array before = cross_entropy(m.tail_logits(s, ModeCtx::eval()), s.tail);
    // overwrite the gold tail's embedding row; the masked row is zero either way
    for (int64_t j = 0; j < 4; ++j) m.entity_table.mutable_values()[2 * 4 + j] = 123.0 + static_cast<double>(j);
    Array after = cross_entropy(m.tail_logits(s, ModeCtx::eval()), s.tail);
    EXPECT_EQ(before.item(), after.item());
}

TEST(MtGrad, FullEncoderMatchesFiniteDifferences) {
    // reduced config: d=8, 1 layer, 2 heads
    auto m = tiny_model(5, 3, 3, 4, 8, 1, 2, 23);
    auto s = stmt(0, 1, 2, {{0, 1}, {2, 3}});
    auto params = m.trainable();
    auto loss = [&] { return m.multitask_loss(s, ModeCtx::eval(), 0).total; };
    auto res = testsupport::gradcheck(params, loss);
    EXPECT_LT(res.max_rel_err, 1e-4) << res.worst;
}
