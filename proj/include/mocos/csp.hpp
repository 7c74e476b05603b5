#pragma once

#include "mocos/autodiff.hpp"
#include "mocos/encoder.hpp"
#include "mocos/optim.hpp"
#include "mocos/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mocos {

/// Bernoulli node mask over the J joints of one frame (1 = kept).
struct SpatialMask {
    std::vector<std::uint8_t> bits;
    double p = 0.0;   // probability of a 0

    std::size_t kept() const;
};

/// Bernoulli frame mask over the f frames of one sequence (1 = kept).
struct TemporalMask {
    std::vector<std::uint8_t> bits;
    double p = 0.0;

    std::size_t kept() const;
};

/// Bits are i.i.d. with P(0) = p. An all-zero draw is repaired by setting one
/// uniformly chosen position to 1.
SpatialMask sample_spatial_mask(std::size_t joints, double p_s, Rng& rng);
TemporalMask sample_temporal_mask(std::size_t frames, double p_t, Rng& rng);

/// Mean of the kept rows of a J x D node matrix (1 x D).
ad::Var sub_skeleton(ad::Var nodes, const SpatialMask& mask);
/// Mean of the kept rows of an f x D stack of sub-skeleton vectors (1 x D).
ad::Var sub_tracklet(ad::Var sub_skeletons, const TemporalMask& mask);

struct PrototypeTable {
    Matrix centroids;            // C x D, row k-1 is class k
    std::vector<std::size_t> counts;

    std::size_t classes() const { return centroids.rows(); }
};

/// Per-class mean of sequence representations; labels are 1-based classes in
/// [1, C] and every class must occur.
PrototypeTable compute_prototypes(const Matrix& reps, std::span<const int> labels, std::size_t classes);

/// Learnable D -> D projections for sub-skeleton features and prototypes.
struct ProjectionHead {
    ad::Parameter f1_w, f1_b;
    ad::Parameter f2_w, f2_b;

    static ProjectionHead initialize(int d_model, std::uint64_t seed);
    static ProjectionHead identity(int d_model);

    std::vector<ad::Parameter*> all();
    std::vector<const ad::Parameter*> all() const;
};

struct CspConfig {
    double lambda = 0.5;
    double tau1 = 0.07;
    double tau2 = 0.07;
    double p_s = 0.25;
    double p_t = 0.25;
    bool normalize = true;
    double l2_eps = 1e-12;
    /// Off: unmasked sequence-level prototype loss only.
    bool use_csp = true;

    void validate() const;
};

/// Sub-tracklet prototype contrast: mean over rows of the cross-entropy of
/// (V_i . c_k / tau) against the row's class. Prototypes are constants.
ad::Var csp_str_loss(ad::Var tracklets, std::span<const int> labels, const PrototypeTable& prototypes,
                     double tau, bool normalize, double l2_eps = 1e-12);

/// Sub-skeleton prototype contrast through the projections F1 (features) and
/// F2 (prototypes), averaged over all sub-skeleton rows.
ad::Var csp_ssk_loss(ad::Var sub_skeletons, std::span<const int> labels, const PrototypeTable& prototypes,
                     const ProjectionHead& head, double tau, bool normalize, double l2_eps = 1e-12);

/// lambda * str + (1 - lambda) * ssk.
ad::Var csp_loss(ad::Var str, ad::Var ssk, double lambda);

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double str = 0.0;
    double ssk = 0.0;
    double secs = 0.0;
};

struct TrainOptions {
    CspConfig csp;
    ad::AdamConfig adam;
    std::size_t batch = 32;
};

/// Sequence representations (n x D) of an unmasked forward pass.
Matrix encode_all(const Encoder& encoder, const std::vector<SkeletonSequence>& data);

/// Frozen masks for one sequence: a spatial mask per frame, then the
/// temporal mask, drawn in that order.
struct SequenceMasks {
    std::vector<SpatialMask> spatial;
    TemporalMask temporal;
};

SequenceMasks sample_sequence_masks(const SkeletonSequence& seq, double p_s, double p_t, Rng& rng);

struct BatchLoss {
    ad::Var loss;
    ad::Var str;
    ad::Var ssk;   // invalid when use_csp is off
};

/// The training objective for one batch: masked forward, sub-skeletons,
/// sub-tracklets and the combined contrast against frozen prototypes.
BatchLoss csp_batch_loss(ad::Tape& tape, const Encoder& encoder, const ProjectionHead& head,
                         std::span<const SkeletonSequence* const> batch, std::span<const SequenceMasks> masks,
                         const PrototypeTable& prototypes, const CspConfig& csp);

/// One epoch: refresh prototypes from unmasked representations, then shuffle
/// into batches and take one Adam step per batch on the CSP loss. Masks for
/// sequence i come from a substream keyed by (epoch_seed, i).
EpochStats train_epoch(Encoder& encoder, ProjectionHead& head, const std::vector<SkeletonSequence>& train,
                       const TrainOptions& options, ad::AdamState& state, std::uint64_t epoch_seed);

} // namespace mocos
