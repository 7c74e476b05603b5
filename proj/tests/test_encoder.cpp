#include "fixtures.hpp"
#include "oracles.hpp"

#include "mocos/encoder.hpp"
#include "mocos/errors.hpp"
#include "mocos/optim.hpp"
#include "mocos/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace mocos;
using mocos::ad::Parameter;
using mocos::ad::Tape;
using mocos::ad::Var;

namespace {

using namespace fixture;

SkeletonSequence random_sequence(int joints, std::size_t frames, Rng& rng, int label = 1) {
    SkeletonSequence s;
    s.seq_id = "s";
    s.label = label;
    s.frames = random_matrix(frames, static_cast<std::size_t>(joints) * 3, rng);
    return s;
}

const LimbSets kLimbs5{{1, 2}, {3, 4}};

} // namespace

TEST_CASE("embed_nodes examples") {
    EncoderConfig cfg = small_config(3, 1, 3, 0, 2, MaskMode::Literal);
    EncoderParams p = EncoderParams::initialize(cfg, 3);
    Rng rng(4);
    const Matrix frame = random_matrix(4, 3, rng), pe = random_matrix(4, 2, rng);

    for (Parameter* q : {&p.coord_map, &p.pe_map}) q->value.fill(0.0);
    {
        Tape t;
        for (double v : embed_nodes(t, frame, pe, p).value().data()) CHECK(v == 0.0);
    }
    for (std::size_t i = 0; i < 3; ++i) p.coord_map.value(i, i) = 1.0;
    {
        Tape t;
        CHECK(embed_nodes(t, frame, pe, p).value() == frame);
    }
}

TEST_CASE("embed_nodes matches a per-joint affine evaluation") {
    EncoderConfig cfg = small_config(6, 2, 3, 0, 3, MaskMode::Literal);
    EncoderParams p = EncoderParams::initialize(cfg, 5);
    Rng rng(6);
    randomize_biases(p, rng);
    const Matrix frame = random_matrix(5, 3, rng), pe = random_matrix(5, 3, rng);
    Tape t;
    const Matrix got = embed_nodes(t, frame, pe, p).value();
    const oracle::Grid want = oracle::encode_frame(frame, pe, p, HeadMaskTable{}, cfg);
    CHECK(max_abs_diff(want, got) == 0.0);
}

TEST_CASE("embed_nodes rejects mismatched shapes") {
    EncoderConfig cfg = small_config(4, 2, 2, 0, 3, MaskMode::Literal);
    EncoderParams p = EncoderParams::initialize(cfg, 1);
    Tape t;
    CHECK_THROWS_AS(embed_nodes(t, Matrix::matrix(5, 2), Matrix::matrix(5, 3), p), ValidationError);
    CHECK_THROWS_AS(embed_nodes(t, Matrix::matrix(5, 3), Matrix::matrix(4, 3), p), ValidationError);
    CHECK_THROWS_AS(embed_nodes(t, Matrix::matrix(5, 3), Matrix::matrix(5, 2), p), ValidationError);
}

TEST_CASE("literal mask zeroes one logit") {
    // One-dimensional nodes with identity Q and K give logits h_i h_j; row 1
    // is (2, 5, -1) before masking.
    const double r2 = std::sqrt(2.0);
    Parameter q("q", Matrix::from_rows({{1.0}})), k("k", Matrix::from_rows({{1.0}}));
    Tape t;
    const Var nodes = t.constant(Matrix::from_rows({{r2}, {5.0 / r2}, {-1.0 / r2}}));
    MotifMatrix mask = full_motif(3);
    mask.values(0, 1) = 0.0;
    const Matrix rel = relation_head(t, nodes, mask, q, k, MaskMode::Literal).value();
    const double z = std::exp(2.0) + std::exp(0.0) + std::exp(-1.0);
    CHECK(std::abs(rel(0, 0) - std::exp(2.0) / z) < 1e-12);
    CHECK(std::abs(rel(0, 1) - 1.0 / z) < 1e-12);
    CHECK(std::abs(rel(0, 2) - std::exp(-1.0) / z) < 1e-12);
}

TEST_CASE("additive mask restricts the softmax support") {
    Rng rng(8);
    Parameter q("q", random_matrix(2, 4, rng)), k("k", random_matrix(2, 4, rng));
    JointLayout path{"custom", 6, {{1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}}};
    const MotifMatrix mask = build_hsm(build_adjacency(path), 1);
    Tape t;
    const Matrix rel = relation_head(t, t.constant(random_matrix(6, 4, rng)), mask, q, k, MaskMode::Additive).value();
    for (std::size_t i = 0; i < 6; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 6; ++j) {
            if (mask.values(i, j) == 0.0) CHECK(rel(i, j) == 0.0);
            else CHECK(rel(i, j) > 0.0);
            s += rel(i, j);
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
    }

    MotifMatrix empty = mask;
    for (std::size_t j = 0; j < 6; ++j) empty.values(2, j) = 0.0;
    Tape t2;
    CHECK_THROWS(relation_head(t2, t2.constant(random_matrix(6, 4, rng)), empty, q, k, MaskMode::Additive));
    Tape t3;
    CHECK_NOTHROW(relation_head(t3, t3.constant(random_matrix(6, 4, rng)), empty, q, k, MaskMode::Literal));
}

TEST_CASE("all-ones masks reduce to the plain graph transformer bit for bit") {
    for (MaskMode mode : {MaskMode::Literal, MaskMode::Additive}) {
        const EncoderConfig cfg = small_config(8, 4, 2, 2, 4, mode);
        const JointLayout layout = synthetic10_layout();
        EncoderParams params = EncoderParams::initialize(cfg, 17);
        Rng rng(18);
        randomize_biases(params, rng);
        const Encoder enc(cfg, make_graph_context(layout, 4), full_table(10, 4), params);
        for (int trial = 0; trial < 5; ++trial) {
            const Matrix frame = random_matrix(10, 3, rng);
            Tape t;
            Var h = embed_nodes(t, frame, enc.context().pe, params);
            for (const LayerParams& lp : params.layers) h = plain_layer(t, h, lp, cfg);
            CHECK(enc.encode_frame(frame).nodes == h.value());

            Tape t2;
            const Var nodes = t2.constant(random_matrix(10, 8, rng));
            const Matrix masked =
                relation_head(t2, nodes, full_motif(10), params.layers[0].query[1], params.layers[0].key[1], mode)
                    .value();
            const Matrix plain = plain_relation(t2, nodes, params.layers[0].query[1], params.layers[0].key[1]).value();
            CHECK(masked == plain);
        }
    }
}

TEST_CASE("uniform attention averages the value-mapped nodes") {
    EncoderConfig cfg = small_config(4, 2, 2, 1, 2, MaskMode::Literal);
    cfg.block = BlockStyle::AttentionOnly;
    EncoderParams p = EncoderParams::initialize(cfg, 2);
    LayerParams& lp = p.layers[0];
    for (std::size_t k = 0; k < 2; ++k) {
        lp.query[k].value.fill(0.0);
        lp.key[k].value.fill(0.0);
        lp.value[k].value.fill(0.0);
        lp.value[k].value(0, 2 * k) = 1.0;
        lp.value[k].value(1, 2 * k + 1) = 1.0;
    }
    lp.output.value.fill(0.0);
    for (std::size_t i = 0; i < 4; ++i) lp.output.value(i, i) = 1.0;
    Rng rng(3);
    const Matrix nodes = random_matrix(5, 4, rng);
    Tape t;
    const Matrix out = mgt_layer(t, t.constant(nodes), full_table(5, 2), lp, cfg).value();
    for (std::size_t c = 0; c < 4; ++c) {
        double mean = 0.0;
        for (std::size_t j = 0; j < 5; ++j) mean += nodes(j, c) / 5.0;
        for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(out(i, c) - mean) < 1e-14);
    }
}

TEST_CASE("one layer matches the scalar-loop oracle") {
    std::mt19937_64 gen(41);
    const JointLayout layout = oracle::random_tree(4, gen);
    const LimbSets limbs{{1}, {2, 3}};
    for (MaskMode mode : {MaskMode::Literal, MaskMode::Additive}) {
        const EncoderConfig cfg = small_config(4, 2, 2, 1, 3, mode);
        const MotifSet motifs = build_motif_set(build_adjacency(layout), limbs, HsmSelf::Include);
        const HeadMaskTable heads = build_head_table(motifs, 2, true, true);
        EncoderParams params = EncoderParams::initialize(cfg, 42);
        Rng rng(43);
        randomize_biases(params, rng);
        const Matrix nodes = random_matrix(4, 4, rng);
        Tape t;
        const Matrix got = mgt_layer(t, t.constant(nodes), heads, params.layers[0], cfg).value();
        const oracle::Grid want = oracle::layer(grid_of(nodes), heads, params.layers[0], cfg);
        CHECK(max_abs_diff(want, got) <= 1e-12);
    }
}

TEST_CASE("two-layer encoder matches the scalar-loop oracle at J=5, H=5, D=10") {
    std::mt19937_64 gen(51);
    for (int trial = 0; trial < 10; ++trial) {
        const JointLayout layout = oracle::random_tree(5, gen);
        for (MaskMode mode : {MaskMode::Literal, MaskMode::Additive}) {
            const EncoderConfig cfg = small_config(10, 5, 2, 2, 4, mode);
            const Encoder enc = make_encoder(layout, kLimbs5, cfg, true, mode == MaskMode::Literal, 52 + trial);
            Rng rng(53 + trial);
            const Matrix frame = random_matrix(5, 3, rng);
            const oracle::Grid want = oracle::encode_frame(frame, enc.context().pe, enc.params(), enc.heads(), cfg);
            CHECK(max_abs_diff(want, enc.encode_frame(frame).nodes) <= 1e-10);
        }
    }
}

TEST_CASE("permuting nodes permutes the layer output under full masks") {
    const EncoderConfig cfg = small_config(6, 3, 2, 1, 2, MaskMode::Literal);
    EncoderParams params = EncoderParams::initialize(cfg, 61);
    Rng rng(62);
    randomize_biases(params, rng);
    const Matrix nodes = random_matrix(7, 6, rng);
    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 gen(63);
    std::shuffle(perm.begin(), perm.end(), gen);
    Matrix permuted = Matrix::matrix(7, 6);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t c = 0; c < 6; ++c) permuted(i, c) = nodes(perm[i], c);
    Tape t;
    const Matrix out = mgt_layer(t, t.constant(nodes), full_table(7, 3), params.layers[0], cfg).value();
    const Matrix pout = mgt_layer(t, t.constant(permuted), full_table(7, 3), params.layers[0], cfg).value();
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t c = 0; c < 6; ++c) CHECK(std::abs(pout(i, c) - out(perm[i], c)) < 1e-12);
}

TEST_CASE("relation rows are probability distributions") {
    const JointLayout layout = kinect20_layout();
    for (MaskMode mode : {MaskMode::Literal, MaskMode::Additive}) {
        const EncoderConfig cfg = small_config(16, 8, 2, 2, 8, mode);
        const Encoder enc =
            make_encoder(layout, default_limb_sets("kinect20"), cfg, true, mode == MaskMode::Literal, 71);
        Rng rng(72);
        for (int trial = 0; trial < 20; ++trial) {
            const FrameEncoding e = enc.encode_frame(random_matrix(20, 3, rng), true);
            REQUIRE(e.relations.has_value());
            REQUIRE(e.relations->size() == 2);
            for (std::size_t l = 0; l < 2; ++l) {
                REQUIRE((*e.relations)[l].size() == 8);
                for (std::size_t k = 0; k < 8; ++k) {
                    const Matrix& r = (*e.relations)[l][k];
                    for (std::size_t i = 0; i < 20; ++i) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < 20; ++j) {
                            CHECK(r(i, j) >= 0.0);
                            if (mode == MaskMode::Additive && enc.heads().masks[k].values(i, j) == 0.0)
                                CHECK(r(i, j) == 0.0);
                            s += r(i, j);
                        }
                        CHECK(std::abs(s - 1.0) <= 1e-9);
                    }
                }
            }
        }
    }
}

TEST_CASE("encoder contracts") {
    const JointLayout layout = synthetic10_layout();
    const LimbSets limbs = default_limb_sets("synthetic10");
    Rng rng(81);
    const Matrix frame = random_matrix(10, 3, rng);

    SUBCASE("empty stack returns the embedding") {
        const Encoder enc = make_encoder(layout, limbs, small_config(8, 4, 2, 0, 4, MaskMode::Literal), true, true, 82);
        Tape t;
        CHECK(enc.encode_frame(frame).nodes == embed_nodes(t, frame, enc.context().pe, enc.params()).value());
    }
    SUBCASE("shape and determinism") {
        const EncoderConfig cfg = small_config(8, 4, 2, 2, 4, MaskMode::Literal);
        const Encoder a = make_encoder(layout, limbs, cfg, true, true, 83);
        const Encoder b = make_encoder(layout, limbs, cfg, true, true, 83);
        const Matrix out = a.encode_frame(frame).nodes;
        CHECK(out.rows() == 10);
        CHECK(out.cols() == 8);
        CHECK(out == b.encode_frame(frame).nodes);
    }
    SUBCASE("head width must tile the model width") {
        CHECK_THROWS_AS(small_config(10, 4, 2, 1, 4, MaskMode::Literal).validate(), ValidationError);
    }
    SUBCASE("head table must match H") {
        const EncoderConfig cfg = small_config(8, 4, 2, 1, 4, MaskMode::Literal);
        CHECK_THROWS_AS(Encoder(cfg, make_graph_context(layout, 4), full_table(10, 3),
                                EncoderParams::initialize(cfg, 1)),
                        ValidationError);
    }
}

TEST_CASE("sequence representation is the spatio-temporal mean") {
    SUBCASE("single frame, single joint") {
        const Matrix one = Matrix::from_rows({{0.5, -2.0, 3.0}});
        CHECK(sequence_mean({one}) == one);
    }
    SUBCASE("constant representations") {
        const Matrix c = Matrix::from_rows({{1.25, -0.5}, {1.25, -0.5}, {1.25, -0.5}});
        const Matrix v = sequence_mean({c, c, c, c});
        CHECK(v(0, 0) == 1.25);
        CHECK(v(0, 1) == -0.5);
    }
    SUBCASE("two frames, two joints") {
        const Matrix f1 = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
        const Matrix f2 = Matrix::from_rows({{5.0, 7.0}, {-1.0, 0.5}});
        const Matrix v = sequence_mean({f1, f2});
        CHECK(std::abs(v(0, 0) - (1.0 + 3.0 + 5.0 - 1.0) / 4.0) < 1e-15);
        CHECK(std::abs(v(0, 1) - (2.0 + 4.0 + 7.0 + 0.5) / 4.0) < 1e-15);
    }
    SUBCASE("encode_sequence agrees with per-frame encoding") {
        const EncoderConfig cfg = small_config(8, 4, 2, 1, 4, MaskMode::Literal);
        const Encoder enc = make_encoder(synthetic10_layout(), default_limb_sets("synthetic10"), cfg, true, true, 91);
        Rng rng(92);
        const SkeletonSequence seq = random_sequence(10, 3, rng);
        const auto e = enc.encode_sequence(seq);
        REQUIRE(e.frames.size() == 3);
        for (std::size_t t = 0; t < 3; ++t) CHECK(e.frames[t] == enc.encode_frame(seq.frame(t)).nodes);
        for (std::size_t c = 0; c < 8; ++c) {
            double s = 0.0;
            for (const Matrix& f : e.frames)
                for (std::size_t j = 0; j < 10; ++j) s += f(j, c);
            CHECK(std::abs(e.sequence(0, c) - s / 30.0) < 1e-12);
        }
    }
}

TEST_CASE("mean relations") {
    const LimbSets limbs = default_limb_sets("synthetic10");
    Rng rng(101);

    SUBCASE("one frame, one head equals that frame's relation") {
        const EncoderConfig cfg = small_config(4, 1, 4, 1, 4, MaskMode::Literal);
        const Encoder enc = make_encoder(synthetic10_layout(), limbs, cfg, true, true, 102);
        const SkeletonSequence seq = random_sequence(10, 1, rng);
        const RelationStack mean = enc.mean_relations({seq});
        CHECK(mean[0][0] == (*enc.encode_frame(seq.frame(0), true).relations)[0][0]);
    }
    SUBCASE("two frames average entry-wise and rows stay stochastic") {
        const EncoderConfig cfg = small_config(8, 4, 2, 2, 4, MaskMode::Literal);
        const Encoder enc = make_encoder(synthetic10_layout(), limbs, cfg, true, true, 103);
        const SkeletonSequence a = random_sequence(10, 1, rng), b = random_sequence(10, 1, rng);
        const RelationStack mean = enc.mean_relations({a, b});
        const RelationStack ra = *enc.encode_frame(a.frame(0), true).relations;
        const RelationStack rb = *enc.encode_frame(b.frame(0), true).relations;
        for (std::size_t l = 0; l < 2; ++l)
            for (std::size_t k = 0; k < 4; ++k)
                for (std::size_t i = 0; i < 10; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < 10; ++j) {
                        CHECK(std::abs(mean[l][k](i, j) - (ra[l][k](i, j) + rb[l][k](i, j)) / 2.0) < 1e-15);
                        s += mean[l][k](i, j);
                    }
                    CHECK(std::abs(s - 1.0) <= 1e-9);
                }
    }
    SUBCASE("empty dataset") {
        const Encoder enc = make_encoder(synthetic10_layout(), limbs, small_config(4, 1, 4, 1, 4, MaskMode::Literal),
                                         true, true, 104);
        CHECK_THROWS_AS(enc.mean_relations({}), ValidationError);
    }
}

TEST_CASE("encode_frame gradients match central differences") {
    const EncoderConfig cfg = small_config(6, 3, 2, 2, 4, MaskMode::Literal);
    Encoder enc = make_encoder(synthetic10_layout(), default_limb_sets("synthetic10"), cfg, true, true, 111);
    Rng rng(112);
    const Matrix frame = random_matrix(10, 3, rng);
    const Matrix weights = random_matrix(10, 6, rng);
    const std::vector<Parameter*> inputs = enc.params().all();
    const double err = ad::check_gradients(
        [&](Tape& t) { return ad::sum_all(ad::mul(enc.forward_frame(t, frame), t.constant(weights))); }, inputs);
    CHECK(err <= 1e-4);
}
