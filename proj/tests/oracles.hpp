#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls into the library's numerical kernels.

#include "mocos/encoder.hpp"
#include "mocos/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using Grid = std::vector<std::vector<double>>;

/// Random labelled tree on J nodes: node k attaches to a uniform earlier
/// node, then labels are shuffled.
inline mocos::JointLayout random_tree(int joints, std::mt19937_64& gen) {
    std::vector<int> label(joints);
    std::iota(label.begin(), label.end(), 1);
    std::shuffle(label.begin(), label.end(), gen);
    mocos::JointLayout layout;
    layout.name = "custom";
    layout.joints = joints;
    for (int k = 1; k < joints; ++k) {
        std::uniform_int_distribution<int> pick(0, k - 1);
        layout.edges.emplace_back(label[pick(gen)], label[k]);
    }
    return layout;
}

/// All-pairs hop distances by Floyd-Warshall.
inline std::vector<std::vector<int>> floyd_warshall(const mocos::JointLayout& layout) {
    const int n = layout.joints;
    const int inf = std::numeric_limits<int>::max() / 4;
    std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
    for (int i = 0; i < n; ++i) d[i][i] = 0;
    for (auto [a, b] : layout.edges) d[a - 1][b - 1] = d[b - 1][a - 1] = 1;
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    return d;
}

inline Grid hsm(const std::vector<std::vector<int>>& dist, int m, bool include_self) {
    const std::size_t n = dist.size();
    Grid a(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            a[i][j] = (i == j) ? (include_self ? 1.0 : 0.0) : (dist[i][j] <= m ? 1.0 : 0.0);
    return a;
}

/// B^m_ij = 1 iff i in I^m, j in I^1 u I^2, j != i (1-based index sets).
inline Grid gcm(int joints, const std::vector<int>& upper, const std::vector<int>& lower, bool which_upper) {
    auto in = [](const std::vector<int>& s, int v) { return std::find(s.begin(), s.end(), v) != s.end(); };
    const auto& own = which_upper ? upper : lower;
    Grid b(joints, std::vector<double>(joints, 0.0));
    for (int i = 1; i <= joints; ++i)
        for (int j = 1; j <= joints; ++j)
            if (in(own, i) && (in(upper, j) || in(lower, j)) && j != i) b[i - 1][j - 1] = 1.0;
    return b;
}

inline Grid to_grid(const mocos::Matrix& m) {
    Grid g(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) g[i][j] = m(i, j);
    return g;
}

// ---------------------------------------------------------------------------
// Scalar-loop encoder: embedding, motif-guided relations, aggregation and
// the residual / norm / feed-forward block, written as plain index loops.

inline double at(const mocos::ad::Parameter& p, std::size_t r, std::size_t c) { return p.value(r, c); }

/// y = W x + b for a row vector x, with W stored out x in.
inline std::vector<double> affine(const mocos::ad::Parameter& w, const mocos::ad::Parameter* b,
                                  const std::vector<double>& x) {
    const std::size_t out = w.value.rows(), in = w.value.cols();
    std::vector<double> y(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
        double s = 0.0;
        for (std::size_t i = 0; i < in; ++i) s += at(w, o, i) * x[i];
        y[o] = s + (b ? b->value[o] : 0.0);
    }
    return y;
}

inline std::vector<double> layer_norm(const std::vector<double>& x, const mocos::ad::Parameter& gain,
                                      const mocos::ad::Parameter& bias, double eps) {
    const double n = static_cast<double>(x.size());
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= n;
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= n;
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mu) / std::sqrt(var + eps) * gain.value[i] + bias.value[i];
    return y;
}

/// Relation matrix of one head.
inline Grid relation(const Grid& h, const mocos::Matrix& mask, const mocos::ad::Parameter& q,
                     const mocos::ad::Parameter& k, mocos::MaskMode mode) {
    const std::size_t n = h.size();
    const double dk = static_cast<double>(q.value.rows());
    std::vector<std::vector<double>> qh, kh;
    for (const auto& row : h) {
        qh.push_back(affine(q, nullptr, row));
        kh.push_back(affine(k, nullptr, row));
    }
    Grid r(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> logit(n);
        for (std::size_t j = 0; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < qh[i].size(); ++c) dot += qh[i][c] * kh[j][c];
            logit[j] = dot / std::sqrt(dk);
            if (mode == mocos::MaskMode::Literal) logit[j] *= mask(i, j);
        }
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j)
            if (mode == mocos::MaskMode::Literal || mask(i, j) != 0.0) mx = std::max(mx, logit[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (mode == mocos::MaskMode::Literal || mask(i, j) != 0.0) z += std::exp(logit[j] - mx);
        for (std::size_t j = 0; j < n; ++j)
            r[i][j] = (mode == mocos::MaskMode::Literal || mask(i, j) != 0.0) ? std::exp(logit[j] - mx) / z : 0.0;
    }
    return r;
}

inline Grid layer(const Grid& h, const mocos::HeadMaskTable& heads, const mocos::LayerParams& p,
                  const mocos::EncoderConfig& cfg) {
    const std::size_t n = h.size(), d = static_cast<std::size_t>(cfg.d_model);
    Grid concat(n);
    for (std::size_t k = 0; k < heads.heads(); ++k) {
        const Grid r = relation(h, heads.masks[k].values, p.query[k], p.key[k], cfg.mask_mode);
        std::vector<std::vector<double>> vh;
        for (const auto& row : h) vh.push_back(affine(p.value[k], nullptr, row));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < vh[0].size(); ++c) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) s += r[i][j] * vh[j][c];
                concat[i].push_back(s);
            }
    }
    Grid out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> att = affine(p.output, nullptr, concat[i]);
        if (cfg.block == mocos::BlockStyle::AttentionOnly) {
            out[i] = att;
            continue;
        }
        std::vector<double> res(d);
        for (std::size_t c = 0; c < d; ++c) res[c] = h[i][c] + att[c];
        const std::vector<double> mid = layer_norm(res, p.norm1_gain, p.norm1_bias, cfg.ln_eps);
        std::vector<double> hidden = affine(p.ffn_in_w, &p.ffn_in_b, mid);
        for (double& v : hidden) v = std::max(0.0, v);
        const std::vector<double> ffn = affine(p.ffn_out_w, &p.ffn_out_b, hidden);
        for (std::size_t c = 0; c < d; ++c) res[c] = mid[c] + ffn[c];
        out[i] = layer_norm(res, p.norm2_gain, p.norm2_bias, cfg.ln_eps);
    }
    return out;
}

inline Grid encode_frame(const mocos::Matrix& frame, const mocos::Matrix& pe, const mocos::EncoderParams& params,
                         const mocos::HeadMaskTable& heads, const mocos::EncoderConfig& cfg) {
    Grid h(frame.rows());
    for (std::size_t i = 0; i < frame.rows(); ++i) {
        const std::vector<double> v = {frame(i, 0), frame(i, 1), frame(i, 2)};
        std::vector<double> lam(pe.cols());
        for (std::size_t c = 0; c < pe.cols(); ++c) lam[c] = pe(i, c);
        const auto a = affine(params.coord_map, &params.coord_bias, v);
        const auto b = affine(params.pe_map, &params.pe_bias, lam);
        for (std::size_t c = 0; c < a.size(); ++c) h[i].push_back(a[c] + b[c]);
    }
    for (const auto& lp : params.layers) h = layer(h, heads, lp, cfg);
    return h;
}

// ---------------------------------------------------------------------------
// Brute-force retrieval metrics: rank by repeated minimum search with ties
// resolved toward the lower gallery index.

inline std::vector<std::size_t> brute_rank(const std::vector<double>& dist) {
    std::vector<std::size_t> order;
    std::vector<bool> used(dist.size(), false);
    for (std::size_t r = 0; r < dist.size(); ++r) {
        std::size_t best = dist.size();
        for (std::size_t j = 0; j < dist.size(); ++j)
            if (!used[j] && (best == dist.size() || dist[j] < dist[best])) best = j;
        used[best] = true;
        order.push_back(best);
    }
    return order;
}

/// Rank-k accuracy: fraction of probes whose first match is within the top k.
inline double brute_rank_k(const Grid& dist, const std::vector<int>& pl, const std::vector<int>& gl, std::size_t k) {
    double hits = 0.0;
    for (std::size_t i = 0; i < pl.size(); ++i) {
        const auto order = brute_rank(dist[i]);
        for (std::size_t r = 0; r < std::min(k, order.size()); ++r)
            if (gl[order[r]] == pl[i]) {
                hits += 1.0;
                break;
            }
    }
    return hits / static_cast<double>(pl.size());
}

/// AP as the mean over relevant items of precision at that item's rank.
inline double brute_ap(const std::vector<double>& dist, int label, const std::vector<int>& gl) {
    const auto order = brute_rank(dist);
    std::vector<double> precisions;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (gl[order[r]] != label) continue;
        std::size_t relevant_so_far = 0;
        for (std::size_t q = 0; q <= r; ++q) relevant_so_far += gl[order[q]] == label ? 1 : 0;
        precisions.push_back(static_cast<double>(relevant_so_far) / static_cast<double>(r + 1));
    }
    double s = 0.0;
    for (double p : precisions) s += p;
    return s / static_cast<double>(precisions.size());
}

} // namespace oracle
