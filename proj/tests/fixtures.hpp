#pragma once

// Encoder fixtures shared by the unit and acceptance tests.

#include "mocos/encoder.hpp"
#include "mocos/motifs.hpp"
#include "mocos/rng.hpp"
#include "oracles.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace fixture {

using namespace mocos;
using mocos::ad::Parameter;
using mocos::ad::Tape;
using mocos::ad::Var;

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m = Matrix::matrix(r, c);
    for (double& v : m.data()) v = rng.uniform(lo, hi);
    return m;
}

inline void randomize_biases(EncoderParams& p, Rng& rng) {
    for (double& v : p.coord_bias.value.data()) v = rng.uniform(-0.5, 0.5);
    for (double& v : p.pe_bias.value.data()) v = rng.uniform(-0.5, 0.5);
    for (LayerParams& lp : p.layers)
        for (Parameter* b : {&lp.ffn_in_b, &lp.ffn_out_b, &lp.norm1_bias, &lp.norm2_bias, &lp.norm1_gain,
                             &lp.norm2_gain})
            for (double& v : b->value.data()) v += rng.uniform(-0.3, 0.3);
}

inline EncoderConfig small_config(int d, int heads, int d_head, int layers, int k, MaskMode mode) {
    EncoderConfig cfg;
    cfg.d_model = d;
    cfg.heads = heads;
    cfg.d_head = d_head;
    cfg.layers = layers;
    cfg.pe_width = k;
    cfg.mask_mode = mode;
    return cfg;
}

inline HeadMaskTable full_table(int joints, int heads) {
    HeadMaskTable t;
    for (int k = 0; k < heads; ++k) t.masks.push_back(full_motif(joints));
    return t;
}

inline Encoder make_encoder(const JointLayout& layout, const LimbSets& limbs, const EncoderConfig& cfg, bool use_hsm,
                     bool use_gcm, std::uint64_t seed) {
    SkeletonGraphContext ctx = make_graph_context(layout, cfg.pe_width);
    const MotifSet motifs = build_motif_set(ctx.adjacency, limbs, HsmSelf::Include);
    EncoderParams params = EncoderParams::initialize(cfg, seed);
    Rng rng(Rng::mix(seed, 99));
    randomize_biases(params, rng);
    return Encoder(cfg, std::move(ctx), build_head_table(motifs, cfg.heads, use_hsm, use_gcm), std::move(params));
}

inline double max_abs_diff(const oracle::Grid& a, const Matrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) worst = std::max(worst, std::abs(a[i][j] - b(i, j)));
    return worst;
}

inline oracle::Grid grid_of(const Matrix& m) { return oracle::to_grid(m); }

// Plain graph-transformer relation: softmax of scaled dot products, no mask.
inline Var plain_relation(Tape& tape, Var nodes, const Parameter& q, const Parameter& k) {
    const double d_head = static_cast<double>(q.value.rows());
    const Var qh = ad::matmul(nodes, tape.parameter_transposed(q));
    const Var kh = ad::matmul(nodes, tape.parameter_transposed(k));
    return ad::row_softmax(ad::scale(ad::matmul(qh, ad::transpose(kh)), 1.0 / std::sqrt(d_head)));
}

inline Var plain_layer(Tape& tape, Var nodes, const LayerParams& p, const EncoderConfig& cfg) {
    std::vector<Var> heads;
    for (std::size_t k = 0; k < p.query.size(); ++k) {
        const Var rel = plain_relation(tape, nodes, p.query[k], p.key[k]);
        heads.push_back(ad::matmul(rel, ad::matmul(nodes, tape.parameter_transposed(p.value[k]))));
    }
    const Var attended = ad::matmul(ad::concat(heads, 1), tape.parameter_transposed(p.output));
    auto norm = [&](Var x, const Parameter& g, const Parameter& b) {
        return ad::add(ad::mul(ad::layer_normalize(x, cfg.ln_eps), tape.parameter(g)), tape.parameter(b));
    };
    const Var mid = norm(ad::add(nodes, attended), p.norm1_gain, p.norm1_bias);
    const Var ffn = ad::affine(ad::relu(ad::affine(mid, p.ffn_in_w, p.ffn_in_b)), p.ffn_out_w, p.ffn_out_b);
    return norm(ad::add(mid, ffn), p.norm2_gain, p.norm2_bias);
}

} // namespace fixture
