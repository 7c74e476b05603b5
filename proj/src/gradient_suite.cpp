#include "mocos/csp.hpp"
#include "mocos/encoder.hpp"
#include "mocos/optim.hpp"
#include "mocos/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string_view>

namespace mocos::ad {

namespace {

constexpr double kOpTolerance = 1e-5;
constexpr double kComposedTolerance = 1e-4;
constexpr double kKinkMargin = 2e-4;
constexpr std::uint64_t kMaxRedraws = 64;

// Smallest |x| over the inputs of every relu recorded on the tape.
double min_relu_gap(const Tape& tape) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t id = 0; id < tape.size(); ++id) {
        if (std::string_view(tape.op_name(id)) != "relu") continue;
        for (double v : tape.value(tape.inputs(id)[0]).data()) gap = std::min(gap, std::abs(v));
    }
    return gap;
}

Parameter random_param(const std::string& name, std::size_t r, std::size_t c, Rng& rng, double lo = -1.0,
                       double hi = 1.0) {
    Tensor t = Tensor::matrix(r, c);
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return Parameter(name, std::move(t));
}

// Values with |x| in [0.2, 1] and random sign, away from the relu kink.
Parameter signed_param(const std::string& name, std::size_t r, std::size_t c, Rng& rng) {
    Tensor t = Tensor::matrix(r, c);
    for (double& v : t.data()) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.2, 1.0);
    return Parameter(name, std::move(t));
}

Tensor random_weights(std::size_t r, std::size_t c, Rng& rng) {
    Tensor t = Tensor::matrix(r, c);
    for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
    return t;
}

// Random-weighted sum keeps every input coordinate's gradient away from zero.
Var weighted_sum(Var x, const Tensor& weights) { return sum_all(mul(x, x.tape().constant(weights))); }

struct Suite {
    Rng rng;
    std::vector<GradCheckResult> results;

    void check(const std::string& name, const TapeProgram& program, std::vector<Parameter*> inputs,
               double tolerance = kOpTolerance) {
        results.push_back({name, check_gradients(program, inputs), tolerance});
    }

    // Unary op on an r x c input followed by a random-weighted sum.
    void unary(const std::string& name, Parameter x, std::size_t out_r, std::size_t out_c,
               const std::function<Var(Var)>& op) {
        const Tensor w = random_weights(out_r, out_c, rng);
        check(name, [&](Tape& t) { return weighted_sum(op(t.parameter(x)), w); }, {&x});
    }
};

} // namespace

std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed) {
    Suite s{Rng(seed), {}};
    Rng& rng = s.rng;

    {
        Parameter a = random_param("a", 3, 4, rng), b = random_param("b", 4, 5, rng);
        const Tensor w = random_weights(3, 5, rng);
        s.check("matmul", [&](Tape& t) { return weighted_sum(matmul(t.parameter(a), t.parameter(b)), w); }, {&a, &b});
    }
    for (const char* op : {"add", "sub", "mul"}) {
        for (bool row : {false, true}) {
            Parameter a = random_param("a", 3, 4, rng), b = random_param("b", row ? 1 : 3, 4, rng);
            const Tensor w = random_weights(3, 4, rng);
            const std::string name = std::string(op) + (row ? "_row_broadcast" : "");
            s.check(name,
                    [&](Tape& t) {
                        const Var x = t.parameter(a), y = t.parameter(b);
                        const Var z = op[0] == 'a' ? add(x, y) : op[0] == 's' ? sub(x, y) : mul(x, y);
                        return weighted_sum(z, w);
                    },
                    {&a, &b});
        }
    }
    s.unary("scale", random_param("x", 3, 4, rng), 3, 4, [](Var x) { return scale(x, -1.7); });
    for (std::size_t axis : {0u, 1u}) {
        Parameter a = random_param("a", 2, 3, rng), b = random_param("b", 2, 3, rng);
        const Tensor w = random_weights(axis == 0 ? 4 : 2, axis == 0 ? 3 : 6, rng);
        s.check(axis == 0 ? "concat_rows" : "concat_cols",
                [&](Tape& t) {
                    const Var parts[] = {t.parameter(a), t.parameter(b)};
                    return weighted_sum(concat(parts, axis), w);
                },
                {&a, &b});
    }
    s.unary("row_softmax", random_param("x", 4, 5, rng, -2, 2), 4, 5, [](Var x) { return row_softmax(x); });
    {
        Tensor support = Tensor::matrix(4, 5);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 5; ++j) support(i, j) = (i + j) % 3 == 0 || j == i ? 1.0 : 0.0;
        s.unary("masked_row_softmax", random_param("x", 4, 5, rng, -2, 2), 4, 5,
                [support](Var x) { return masked_row_softmax(x, support); });
    }
    s.unary("row_log_softmax", random_param("x", 4, 5, rng, -2, 2), 4, 5, [](Var x) { return row_log_softmax(x); });
    s.unary("layer_normalize", random_param("x", 3, 6, rng, -2, 2), 3, 6,
            [](Var x) { return layer_normalize(x, 1e-5); });
    s.unary("relu", signed_param("x", 3, 5, rng), 3, 5, [](Var x) { return relu(x); });
    s.unary("mean_axis0", random_param("x", 4, 3, rng), 1, 3, [](Var x) { return mean(x, 0); });
    s.unary("mean_axis1", random_param("x", 4, 3, rng), 4, 1, [](Var x) { return mean(x, 1); });
    s.unary("sum_axis0", random_param("x", 4, 3, rng), 1, 3, [](Var x) { return sum(x, 0); });
    s.unary("sum_axis1", random_param("x", 4, 3, rng), 4, 1, [](Var x) { return sum(x, 1); });
    {
        Parameter x = random_param("x", 3, 4, rng);
        s.check("sum_all", [&](Tape& t) { return scale(sum_all(t.parameter(x)), 0.5); }, {&x});
    }
    s.unary("l2_normalize_rows", random_param("x", 3, 4, rng), 3, 4,
            [](Var x) { return l2_normalize_rows(x, 1e-12); });
    s.unary("log", random_param("x", 3, 4, rng, 0.5, 2.0), 3, 4, [](Var x) { return log(x); });
    s.unary("exp", random_param("x", 3, 4, rng), 3, 4, [](Var x) { return exp(x); });
    s.unary("transpose", random_param("x", 3, 4, rng), 4, 3, [](Var x) { return transpose(x); });
    {
        const std::vector<std::size_t> rows = {2, 0, 2, 3};
        s.unary("gather_rows", random_param("x", 4, 3, rng), 4, 3, [rows](Var x) { return gather_rows(x, rows); });
    }
    {
        Parameter x = random_param("x", 3, 4, rng), w = random_param("w", 5, 4, rng), b = random_param("b", 1, 5, rng);
        const Tensor wt = random_weights(3, 5, rng);
        s.check("affine", [&](Tape& t) { return weighted_sum(affine(t.parameter(x), w, b), wt); }, {&x, &w, &b});
    }

    // Composed checks on the 10-joint synthetic layout.
    const JointLayout layout = synthetic10_layout();
    const SkeletonGraphContext ctx = make_graph_context(layout, 4);
    const MotifSet motifs = build_motif_set(ctx.adjacency, default_limb_sets(layout.name), HsmSelf::Include);

    for (MaskMode mode : {MaskMode::Literal, MaskMode::Additive}) {
        EncoderConfig cfg;
        cfg.d_model = 8;
        cfg.heads = 4;
        cfg.d_head = 2;
        cfg.layers = 1;
        cfg.pe_width = 4;
        cfg.mask_mode = mode;
        const HeadMaskTable heads = build_head_table(motifs, cfg.heads, true, mode == MaskMode::Literal);
        EncoderParams params = EncoderParams::initialize(cfg, Rng::mix(seed, 11));
        LayerParams& lp = params.layers[0];
        for (Parameter* b : {&lp.ffn_in_b, &lp.ffn_out_b, &lp.norm1_bias, &lp.norm2_bias})
            for (double& v : b->value.data()) v = rng.uniform(-0.3, 0.3);
        Parameter nodes = random_param("nodes", 10, 8, rng);
        const Tensor w = random_weights(10, 8, rng);
        std::vector<Parameter*> inputs = {&nodes};
        for (auto* group : {&lp.query, &lp.key, &lp.value})
            for (Parameter& p : *group) inputs.push_back(&p);
        for (Parameter* p : {&lp.output, &lp.ffn_in_w, &lp.ffn_in_b, &lp.ffn_out_w, &lp.ffn_out_b, &lp.norm1_gain,
                             &lp.norm1_bias, &lp.norm2_gain, &lp.norm2_bias})
            inputs.push_back(p);
        s.check(mode == MaskMode::Literal ? "mgt_layer" : "mgt_layer_additive",
                [&](Tape& t) { return weighted_sum(mgt_layer(t, t.parameter(nodes), heads, lp, cfg), w); }, inputs,
                kComposedTolerance);
    }

    // Frozen inputs for the CSP check are redrawn until every relu input sits
    // at least kKinkMargin from zero, so the difference stencil never
    // straddles a kink.
    for (std::uint64_t attempt = 0;; ++attempt) {
        const std::uint64_t base = Rng::mix(seed, 0x200 + attempt);
        EncoderConfig cfg;
        cfg.d_model = 10;
        cfg.heads = 5;
        cfg.d_head = 2;
        cfg.layers = 2;
        cfg.pe_width = 4;
        Encoder encoder(cfg, ctx, build_head_table(motifs, cfg.heads, true, true),
                        EncoderParams::initialize(cfg, Rng::mix(base, 12)));
        ProjectionHead head = ProjectionHead::initialize(cfg.d_model, Rng::mix(base, 13));

        std::vector<SkeletonSequence> seqs;
        const auto profiles = generate_identities(3, Rng::mix(base, 14), Difficulty::Easy, layout);
        for (std::size_t i = 0; i < profiles.size(); ++i)
            for (int k = 0; k < 2; ++k) {
                Rng seq_rng(Rng::mix(base, 100 + 2 * i + k));
                SkeletonSequence seq = generate_sequence(profiles[i], layout, 3, 0.01, seq_rng);
                seq.label = static_cast<int>(i + 1);
                seqs.push_back(std::move(seq));
            }
        std::vector<int> labels;
        for (const auto& q : seqs) labels.push_back(q.label);
        const PrototypeTable prototypes = compute_prototypes(encode_all(encoder, seqs), labels, 3);

        CspConfig csp;
        csp.tau1 = csp.tau2 = 0.5;
        std::vector<const SkeletonSequence*> batch;
        std::vector<SequenceMasks> masks;
        Rng mask_rng(Rng::mix(base, 15));
        for (const auto& q : seqs) {
            batch.push_back(&q);
            masks.push_back(sample_sequence_masks(q, 0.25, 0.25, mask_rng));
        }
        const TapeProgram program = [&](Tape& t) {
            return csp_batch_loss(t, encoder, head, batch, masks, prototypes, csp).loss;
        };
        {
            Tape probe(false);
            program(probe);
            if (min_relu_gap(probe) < kKinkMargin && attempt + 1 < kMaxRedraws) continue;
        }
        std::vector<Parameter*> inputs = encoder.params().all();
        for (Parameter* p : head.all()) inputs.push_back(p);
        s.check("csp_loss_end_to_end", program, inputs, kComposedTolerance);
        break;
    }
    return s.results;
}

} // namespace mocos::ad
