#include "mocos/encoder.hpp"

#include "mocos/errors.hpp"
#include "mocos/rng.hpp"

#include <cmath>

namespace mocos {

using ad::Parameter;
using ad::Tape;
using ad::Tensor;
using ad::Var;

void EncoderConfig::validate() const {
    if (d_model < 1 || layers < 0 || heads < 1 || d_head < 1 || pe_width < 1)
        throw ValidationError("encoder: D, H, D_k, K must be >= 1 and L >= 0");
    if (heads * d_head != d_model)
        throw ValidationError("encoder: H * D_k must equal D (" + std::to_string(heads) + " * " +
                              std::to_string(d_head) + " != " + std::to_string(d_model) + ")");
    if (!(ln_eps > 0.0)) throw ValidationError("encoder: ln_eps must be > 0");
}

namespace {

Parameter glorot(std::string name, std::size_t out, std::size_t in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    Tensor w = Tensor::matrix(out, in);
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    return Parameter(std::move(name), std::move(w));
}

Parameter constant_row(std::string name, std::size_t n, double fill) {
    return Parameter(std::move(name), Tensor::matrix(1, n, fill));
}

} // namespace

EncoderParams EncoderParams::initialize(const EncoderConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    const auto d = static_cast<std::size_t>(config.d_model);
    const auto dk = static_cast<std::size_t>(config.d_head);

    EncoderParams p;
    p.coord_map = glorot("embed.coord_map", d, 3, rng);
    p.coord_bias = constant_row("embed.coord_bias", d, 0.0);
    p.pe_map = glorot("embed.pe_map", d, static_cast<std::size_t>(config.pe_width), rng);
    p.pe_bias = constant_row("embed.pe_bias", d, 0.0);
    for (int l = 0; l < config.layers; ++l) {
        const std::string pre = "layer" + std::to_string(l + 1) + ".";
        LayerParams lp;
        for (int k = 0; k < config.heads; ++k) {
            const std::string h = std::to_string(k + 1);
            lp.query.push_back(glorot(pre + "query" + h, dk, d, rng));
            lp.key.push_back(glorot(pre + "key" + h, dk, d, rng));
            lp.value.push_back(glorot(pre + "value" + h, dk, d, rng));
        }
        lp.output = glorot(pre + "output", d, d, rng);
        lp.ffn_in_w = glorot(pre + "ffn_in_w", 2 * d, d, rng);
        lp.ffn_in_b = constant_row(pre + "ffn_in_b", 2 * d, 0.0);
        lp.ffn_out_w = glorot(pre + "ffn_out_w", d, 2 * d, rng);
        lp.ffn_out_b = constant_row(pre + "ffn_out_b", d, 0.0);
        lp.norm1_gain = constant_row(pre + "norm1_gain", d, 1.0);
        lp.norm1_bias = constant_row(pre + "norm1_bias", d, 0.0);
        lp.norm2_gain = constant_row(pre + "norm2_gain", d, 1.0);
        lp.norm2_bias = constant_row(pre + "norm2_bias", d, 0.0);
        p.layers.push_back(std::move(lp));
    }
    return p;
}

std::vector<Parameter*> EncoderParams::all() {
    std::vector<Parameter*> out{&coord_map, &coord_bias, &pe_map, &pe_bias};
    for (LayerParams& lp : layers) {
        for (std::size_t k = 0; k < lp.query.size(); ++k) {
            out.push_back(&lp.query[k]);
            out.push_back(&lp.key[k]);
            out.push_back(&lp.value[k]);
        }
        for (Parameter* p : {&lp.output, &lp.ffn_in_w, &lp.ffn_in_b, &lp.ffn_out_w, &lp.ffn_out_b,
                             &lp.norm1_gain, &lp.norm1_bias, &lp.norm2_gain, &lp.norm2_bias})
            out.push_back(p);
    }
    return out;
}

std::vector<const Parameter*> EncoderParams::all() const {
    auto mut = const_cast<EncoderParams*>(this)->all();
    return {mut.begin(), mut.end()};
}

Var embed_nodes(Tape& tape, const Matrix& frame, const Matrix& pe, const EncoderParams& params) {
    if (frame.cols() != 3 || frame.rows() != pe.rows())
        throw ValidationError("embed_nodes: frame " + frame.shape_str() + " and PE " + pe.shape_str() +
                              " disagree");
    if (pe.cols() != params.pe_map.value.cols())
        throw ValidationError("embed_nodes: PE width " + std::to_string(pe.cols()) + " but pe_map is " +
                              params.pe_map.value.shape_str());
    const Var coords = ad::affine(tape.constant(frame), params.coord_map, params.coord_bias);
    const Var position = ad::affine(tape.constant(pe), params.pe_map, params.pe_bias);
    return ad::add(coords, position);
}

Var relation_head(Tape& tape, Var nodes, const MotifMatrix& mask, const Parameter& query, const Parameter& key,
                  MaskMode mode) {
    const double d_head = static_cast<double>(query.value.rows());
    const Var q = ad::matmul(nodes, tape.parameter_transposed(query));
    const Var k = ad::matmul(nodes, tape.parameter_transposed(key));
    const Var logits = ad::scale(ad::matmul(q, ad::transpose(k)), 1.0 / std::sqrt(d_head));
    if (mode == MaskMode::Additive) return ad::masked_row_softmax(logits, mask.values);
    return ad::row_softmax(ad::mul(logits, tape.constant(mask.values)));
}

Var mgt_layer(Tape& tape, Var nodes, const HeadMaskTable& heads, const LayerParams& params,
              const EncoderConfig& config, std::vector<Matrix>* relations) {
    if (heads.heads() != params.query.size())
        throw ValidationError("mgt_layer: head table has " + std::to_string(heads.heads()) +
                              " masks but layer has " + std::to_string(params.query.size()) + " heads");
    std::vector<Var> head_out;
    head_out.reserve(heads.heads());
    for (std::size_t k = 0; k < heads.heads(); ++k) {
        const Var rel = relation_head(tape, nodes, heads.masks[k], params.query[k], params.key[k], config.mask_mode);
        if (relations) relations->push_back(rel.value());
        const Var values = ad::matmul(nodes, tape.parameter_transposed(params.value[k]));
        head_out.push_back(ad::matmul(rel, values));
    }
    const Var attended = ad::matmul(ad::concat(head_out, 1), tape.parameter_transposed(params.output));
    if (config.block == BlockStyle::AttentionOnly) return attended;

    auto norm = [&](Var x, const Parameter& gain, const Parameter& bias) {
        return ad::add(ad::mul(ad::layer_normalize(x, config.ln_eps), tape.parameter(gain)), tape.parameter(bias));
    };
    const Var mid = norm(ad::add(nodes, attended), params.norm1_gain, params.norm1_bias);
    const Var hidden = ad::relu(ad::affine(mid, params.ffn_in_w, params.ffn_in_b));
    const Var ffn = ad::affine(hidden, params.ffn_out_w, params.ffn_out_b);
    return norm(ad::add(mid, ffn), params.norm2_gain, params.norm2_bias);
}

Encoder::Encoder(EncoderConfig config, SkeletonGraphContext ctx, HeadMaskTable heads, EncoderParams params)
    : config_(config), ctx_(std::move(ctx)), heads_(std::move(heads)), params_(std::move(params)) {
    config_.validate();
    if (heads_.heads() != static_cast<std::size_t>(config_.heads))
        throw ValidationError("encoder: head table size differs from H");
    if (ctx_.pe.cols() != static_cast<std::size_t>(config_.pe_width))
        throw ValidationError("encoder: positional encoding width differs from K");
    if (params_.layers.size() != static_cast<std::size_t>(config_.layers))
        throw ValidationError("encoder: parameter layer count differs from L");
}

void Encoder::set_positional_encoding(Matrix pe) {
    if (pe.rows() != ctx_.pe.rows() || pe.cols() != ctx_.pe.cols())
        throw ValidationError("encoder: replacement PE has shape " + pe.shape_str());
    ctx_.pe = std::move(pe);
}

Var Encoder::forward_frame(Tape& tape, const Matrix& frame, RelationStack* relations) const {
    Var h = embed_nodes(tape, frame, ctx_.pe, params_);
    for (const LayerParams& lp : params_.layers) {
        std::vector<Matrix>* sink = nullptr;
        if (relations) sink = &relations->emplace_back();
        h = mgt_layer(tape, h, heads_, lp, config_, sink);
    }
    return h;
}

FrameEncoding Encoder::encode_frame(const Matrix& frame, bool keep_relations) const {
    Tape tape(false);
    FrameEncoding out;
    RelationStack relations;
    out.nodes = forward_frame(tape, frame, keep_relations ? &relations : nullptr).value();
    if (keep_relations) out.relations = std::move(relations);
    return out;
}

Matrix sequence_mean(const std::vector<Matrix>& frame_nodes) {
    if (frame_nodes.empty()) throw ValidationError("sequence_mean: no frames");
    Tape tape;
    std::vector<Var> per_frame;
    for (const Matrix& nodes : frame_nodes) per_frame.push_back(ad::mean(tape.constant(nodes), 0));
    return ad::mean(ad::concat(per_frame, 0), 0).value();
}

Encoder::SequenceEncoding Encoder::encode_sequence(const SkeletonSequence& seq) const {
    if (seq.frame_count() == 0) throw ValidationError("encode_sequence: sequence '" + seq.seq_id + "' is empty");
    SequenceEncoding out;
    for (std::size_t t = 0; t < seq.frame_count(); ++t) out.frames.push_back(encode_frame(seq.frame(t)).nodes);
    out.sequence = sequence_mean(out.frames);
    return out;
}

RelationStack Encoder::mean_relations(const std::vector<SkeletonSequence>& dataset) const {
    RelationStack total;
    std::size_t count = 0;
    for (const SkeletonSequence& seq : dataset) {
        for (std::size_t t = 0; t < seq.frame_count(); ++t) {
            FrameEncoding enc = encode_frame(seq.frame(t), true);
            RelationStack& rel = *enc.relations;
            if (total.empty()) {
                total = std::move(rel);
            } else {
                for (std::size_t l = 0; l < total.size(); ++l)
                    for (std::size_t k = 0; k < total[l].size(); ++k)
                        for (std::size_t i = 0; i < total[l][k].size(); ++i) total[l][k][i] += rel[l][k][i];
            }
            ++count;
        }
    }
    if (count == 0) throw ValidationError("mean_relations: dataset has no frames");
    for (auto& layer : total)
        for (Matrix& m : layer)
            for (double& v : m.data()) v /= static_cast<double>(count);
    return total;
}

} // namespace mocos
