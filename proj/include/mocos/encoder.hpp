#pragma once

#include "mocos/autodiff.hpp"
#include "mocos/motifs.hpp"
#include "mocos/skeleton.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace mocos {

/// How a head's motif mask enters the relation softmax.
enum class MaskMode {
    Literal,    // logits multiplied by the mask; masked logits become 0
    Additive,   // masked entries removed from the softmax support
};

/// Layer body around the motif-masked attention.
enum class BlockStyle {
    Full,            // attention, residual, norm, FFN(2D, relu), residual, norm
    AttentionOnly,   // concatenated heads through the output map only
};

struct EncoderConfig {
    int d_model = 128;
    int layers = 2;
    int heads = 8;
    int d_head = 16;
    int pe_width = 8;
    MaskMode mask_mode = MaskMode::Literal;
    BlockStyle block = BlockStyle::Full;
    double ln_eps = 1e-5;

    void validate() const;
};

struct LayerParams {
    std::vector<ad::Parameter> query;   // per head, d_head x d_model
    std::vector<ad::Parameter> key;
    std::vector<ad::Parameter> value;
    ad::Parameter output;               // d_model x d_model
    ad::Parameter ffn_in_w, ffn_in_b;   // 2D x D, 1 x 2D
    ad::Parameter ffn_out_w, ffn_out_b; // D x 2D, 1 x D
    ad::Parameter norm1_gain, norm1_bias;
    ad::Parameter norm2_gain, norm2_bias;
};

struct EncoderParams {
    ad::Parameter coord_map;   // D x 3
    ad::Parameter coord_bias;  // 1 x D
    ad::Parameter pe_map;      // D x K
    ad::Parameter pe_bias;     // 1 x D
    std::vector<LayerParams> layers;

    /// Glorot-uniform maps, zero biases, unit norm gains.
    static EncoderParams initialize(const EncoderConfig& config, std::uint64_t seed);

    /// Every parameter in declaration order.
    std::vector<ad::Parameter*> all();
    std::vector<const ad::Parameter*> all() const;
};

/// Per-frame relation matrices, indexed [layer][head].
using RelationStack = std::vector<std::vector<Matrix>>;

struct FrameEncoding {
    Matrix nodes;                         // J x D
    std::optional<RelationStack> relations;
};

/// h_i = (W1 v_i + b1) + (W2 lambda_i + b2) for each joint row.
ad::Var embed_nodes(ad::Tape& tape, const Matrix& frame, const Matrix& pe, const EncoderParams& params);

/// Softmax-normalized motif-guided relations for one head (J x J).
ad::Var relation_head(ad::Tape& tape, ad::Var nodes, const MotifMatrix& mask, const ad::Parameter& query,
                      const ad::Parameter& key, MaskMode mode);

/// One MGT layer. When `relations` is given, each head's relation matrix is
/// appended to it.
ad::Var mgt_layer(ad::Tape& tape, ad::Var nodes, const HeadMaskTable& heads, const LayerParams& params,
                  const EncoderConfig& config, std::vector<Matrix>* relations = nullptr);

/// Bundles the fixed graph context, head routing and parameters of a model.
class Encoder {
public:
    Encoder(EncoderConfig config, SkeletonGraphContext ctx, HeadMaskTable heads, EncoderParams params);

    const EncoderConfig& config() const { return config_; }
    const SkeletonGraphContext& context() const { return ctx_; }
    const HeadMaskTable& heads() const { return heads_; }
    EncoderParams& params() { return params_; }
    const EncoderParams& params() const { return params_; }

    /// Replaces the positional encoding used by subsequent forwards.
    void set_positional_encoding(Matrix pe);

    /// Embedding followed by the layer stack; J x D on the tape.
    ad::Var forward_frame(ad::Tape& tape, const Matrix& frame, RelationStack* relations = nullptr) const;

    FrameEncoding encode_frame(const Matrix& frame, bool keep_relations = false) const;

    struct SequenceEncoding {
        std::vector<Matrix> frames;   // f entries of J x D
        Matrix sequence;              // 1 x D spatio-temporal mean
    };
    SequenceEncoding encode_sequence(const SkeletonSequence& seq) const;

    /// Per-layer, per-head mean relation matrices over every frame of every
    /// sequence.
    RelationStack mean_relations(const std::vector<SkeletonSequence>& dataset) const;

private:
    EncoderConfig config_;
    SkeletonGraphContext ctx_;
    HeadMaskTable heads_;
    EncoderParams params_;
};

/// 1 x D mean over frames and joints of per-frame node matrices.
Matrix sequence_mean(const std::vector<Matrix>& frame_nodes);

} // namespace mocos
