#pragma once

#include "mocos/config.hpp"
#include "mocos/csp.hpp"
#include "mocos/encoder.hpp"
#include "mocos/reid_eval.hpp"
#include "mocos/synth.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace mocos {

/// A trained or freshly initialized model with everything needed to rebuild
/// it: the resolved config, the layout and the limb sets.
struct Model {
    RunConfig config;
    JointLayout layout;
    LimbSets limbs;
    Encoder encoder;
    ProjectionHead head;
};

/// Keeps the first `frames` frames of longer sequences; shorter ones are
/// returned whole.
std::vector<SkeletonSequence> clip_frames(const std::vector<SkeletonSequence>& seqs, int frames);

/// Fills dataset-dependent config values: the layout name, K and the limb
/// sets (config, then dataset file, then layout default).
RunConfig resolve_config(const RunConfig& config, const Dataset& data);

/// Builds the graph context, head table and Glorot-initialized parameters.
/// `config` must already be resolved.
Model build_model(const RunConfig& config, const JointLayout& layout);

struct TrainResult {
    Model model;
    std::vector<EpochStats> epochs;
};

using EpochCallback = std::function<void(const EpochStats&)>;

TrainResult train_model(const RunConfig& config, const Dataset& data, const EpochCallback& on_epoch = {});

/// Encodes probe and gallery unmasked and scores them with the config metric.
EvalReport evaluate_model(const Model& model, const Dataset& data);

/// Binary layout: magic "MOCOSCKPT1", u64 length + config echo, u64 tensor
/// count, then per tensor u64 name length + name, u64 rank, u64 dims and
/// the values as little-endian doubles. Tensors follow declaration order:
/// encoder parameters, projection head, then the layout adjacency.
void write_checkpoint(const Model& model, std::ostream& out);
void write_checkpoint(const Model& model, const std::string& path);
Model read_checkpoint(std::istream& in);
Model read_checkpoint(const std::string& path);

/// Prints the five motif matrices as rows of 0/1, then the head table.
void inspect_motifs(const RunConfig& config, const JointLayout& layout, const LimbSets& limbs, std::ostream& out);

/// Per-layer, per-head mean relation matrices as CSV: a "head,layer" row
/// (1-based) followed by J rows of J values, for every head of every layer.
void write_relations_csv(const RelationStack& relations, std::ostream& out);

/// Per-probe average precision as CSV ("probe,label,ap").
void write_ap_csv(const EvalReport& report, const Dataset& data, std::ostream& out);

} // namespace mocos
