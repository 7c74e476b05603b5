#include "mocos/csp.hpp"

#include "mocos/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace mocos {

using ad::Parameter;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

std::vector<std::uint8_t> sample_bits(std::size_t n, double p_zero, Rng& rng) {
    if (n == 0) throw ValidationError("mask length must be >= 1");
    if (!(p_zero >= 0.0 && p_zero < 1.0))
        throw ValidationError("masking probability must be in [0, 1), got " + std::to_string(p_zero));
    std::vector<std::uint8_t> bits(n);
    bool any = false;
    for (auto& b : bits) {
        b = rng.bernoulli(1.0 - p_zero) ? 1 : 0;
        any = any || b;
    }
    if (!any) bits[rng.index(n)] = 1;
    return bits;
}

std::vector<std::size_t> kept_rows(const std::vector<std::uint8_t>& bits, const char* what) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) rows.push_back(i);
    if (rows.empty()) throw ValidationError(std::string(what) + ": mask keeps no rows");
    return rows;
}

std::size_t count_kept(const std::vector<std::uint8_t>& bits) {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

Tensor one_hot(std::span<const int> labels, std::size_t classes) {
    Tensor t = Tensor::matrix(labels.size(), classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 1 || static_cast<std::size_t>(labels[i]) > classes)
            throw ValidationError("label " + std::to_string(labels[i]) + " outside [1, " +
                                  std::to_string(classes) + "]");
        t(i, static_cast<std::size_t>(labels[i] - 1)) = 1.0;
    }
    return t;
}

// Mean negative log-likelihood of the labeled column of row-wise log-softmax.
Var cross_entropy(Var logits, std::span<const int> labels) {
    Tape& tape = logits.tape();
    const std::size_t n = logits.value().rows();
    const Var log_probs = ad::row_log_softmax(logits);
    const Var picked = ad::sum_all(ad::mul(log_probs, tape.constant(one_hot(labels, logits.value().cols()))));
    return ad::scale(picked, -1.0 / static_cast<double>(n));
}

void check_tau(double tau, const char* which) {
    if (!(tau > 0.0)) throw ValidationError(std::string(which) + " must be > 0");
}

} // namespace

std::size_t SpatialMask::kept() const { return count_kept(bits); }
std::size_t TemporalMask::kept() const { return count_kept(bits); }

SpatialMask sample_spatial_mask(std::size_t joints, double p_s, Rng& rng) {
    return {sample_bits(joints, p_s, rng), p_s};
}

TemporalMask sample_temporal_mask(std::size_t frames, double p_t, Rng& rng) {
    return {sample_bits(frames, p_t, rng), p_t};
}

Var sub_skeleton(Var nodes, const SpatialMask& mask) {
    if (mask.bits.size() != nodes.value().rows())
        throw ValidationError("sub_skeleton: mask has " + std::to_string(mask.bits.size()) + " bits for " +
                              std::to_string(nodes.value().rows()) + " joints");
    const auto rows = kept_rows(mask.bits, "sub_skeleton");
    return ad::mean(ad::gather_rows(nodes, rows), 0);
}

Var sub_tracklet(Var sub_skeletons, const TemporalMask& mask) {
    if (mask.bits.size() != sub_skeletons.value().rows())
        throw ValidationError("sub_tracklet: mask has " + std::to_string(mask.bits.size()) + " bits for " +
                              std::to_string(sub_skeletons.value().rows()) + " frames");
    const auto rows = kept_rows(mask.bits, "sub_tracklet");
    return ad::mean(ad::gather_rows(sub_skeletons, rows), 0);
}

PrototypeTable compute_prototypes(const Matrix& reps, std::span<const int> labels, std::size_t classes) {
    if (reps.rows() != labels.size())
        throw ValidationError("compute_prototypes: " + std::to_string(reps.rows()) + " representations but " +
                              std::to_string(labels.size()) + " labels");
    PrototypeTable table;
    table.centroids = Matrix::matrix(classes, reps.cols());
    table.counts.assign(classes, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 1 || static_cast<std::size_t>(y) > classes)
            throw ValidationError("compute_prototypes: label " + std::to_string(y) + " outside [1, " +
                                  std::to_string(classes) + "]");
        ++table.counts[y - 1];
        for (std::size_t c = 0; c < reps.cols(); ++c) table.centroids(y - 1, c) += reps(i, c);
    }
    for (std::size_t k = 0; k < classes; ++k) {
        if (table.counts[k] == 0)
            throw ValidationError("compute_prototypes: class " + std::to_string(k + 1) + " has no sequences");
        for (std::size_t c = 0; c < reps.cols(); ++c)
            table.centroids(k, c) /= static_cast<double>(table.counts[k]);
    }
    return table;
}

ProjectionHead ProjectionHead::initialize(int d_model, std::uint64_t seed) {
    Rng rng(seed);
    const auto d = static_cast<std::size_t>(d_model);
    const double bound = std::sqrt(6.0 / static_cast<double>(2 * d));
    auto map = [&](const char* name) {
        Tensor w = Tensor::matrix(d, d);
        for (double& v : w.data()) v = rng.uniform(-bound, bound);
        return Parameter(name, std::move(w));
    };
    ProjectionHead h;
    h.f1_w = map("csp.f1_w");
    h.f1_b = Parameter("csp.f1_b", Tensor::matrix(1, d));
    h.f2_w = map("csp.f2_w");
    h.f2_b = Parameter("csp.f2_b", Tensor::matrix(1, d));
    return h;
}

ProjectionHead ProjectionHead::identity(int d_model) {
    const auto d = static_cast<std::size_t>(d_model);
    Tensor eye = Tensor::matrix(d, d);
    for (std::size_t i = 0; i < d; ++i) eye(i, i) = 1.0;
    return {Parameter("csp.f1_w", eye), Parameter("csp.f1_b", Tensor::matrix(1, d)), Parameter("csp.f2_w", eye),
            Parameter("csp.f2_b", Tensor::matrix(1, d))};
}

std::vector<Parameter*> ProjectionHead::all() { return {&f1_w, &f1_b, &f2_w, &f2_b}; }
std::vector<const Parameter*> ProjectionHead::all() const { return {&f1_w, &f1_b, &f2_w, &f2_b}; }

void CspConfig::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lambda must be in [0, 1]");
    check_tau(tau1, "tau1");
    check_tau(tau2, "tau2");
    if (!(p_s >= 0.0 && p_s < 1.0)) throw ValidationError("p_s must be in [0, 1)");
    if (!(p_t >= 0.0 && p_t < 1.0)) throw ValidationError("p_t must be in [0, 1)");
    if (!(l2_eps > 0.0)) throw ValidationError("l2_eps must be > 0");
}

Var csp_str_loss(Var tracklets, std::span<const int> labels, const PrototypeTable& prototypes, double tau,
                 bool normalize, double l2_eps) {
    check_tau(tau, "tau1");
    Tape& tape = tracklets.tape();
    Var features = normalize ? ad::l2_normalize_rows(tracklets, l2_eps) : tracklets;
    Var centers = tape.constant(prototypes.centroids);
    if (normalize) centers = ad::l2_normalize_rows(centers, l2_eps);
    const Var logits = ad::scale(ad::matmul(features, ad::transpose(centers)), 1.0 / tau);
    return cross_entropy(logits, labels);
}

Var csp_ssk_loss(Var sub_skeletons, std::span<const int> labels, const PrototypeTable& prototypes,
                 const ProjectionHead& head, double tau, bool normalize, double l2_eps) {
    check_tau(tau, "tau2");
    Tape& tape = sub_skeletons.tape();
    Var features = ad::affine(sub_skeletons, head.f1_w, head.f1_b);
    Var centers = ad::affine(tape.constant(prototypes.centroids), head.f2_w, head.f2_b);
    if (normalize) {
        features = ad::l2_normalize_rows(features, l2_eps);
        centers = ad::l2_normalize_rows(centers, l2_eps);
    }
    const Var logits = ad::scale(ad::matmul(features, ad::transpose(centers)), 1.0 / tau);
    return cross_entropy(logits, labels);
}

Var csp_loss(Var str, Var ssk, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lambda must be in [0, 1]");
    return ad::add(ad::scale(str, lambda), ad::scale(ssk, 1.0 - lambda));
}

Matrix encode_all(const Encoder& encoder, const std::vector<SkeletonSequence>& data) {
    Matrix reps = Matrix::matrix(data.size(), static_cast<std::size_t>(encoder.config().d_model));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Matrix v = encoder.encode_sequence(data[i]).sequence;
        std::copy(v.data().begin(), v.data().end(), reps.row_span(i).begin());
    }
    return reps;
}

SequenceMasks sample_sequence_masks(const SkeletonSequence& seq, double p_s, double p_t, Rng& rng) {
    SequenceMasks m;
    for (std::size_t t = 0; t < seq.frame_count(); ++t)
        m.spatial.push_back(sample_spatial_mask(seq.joint_count(), p_s, rng));
    m.temporal = sample_temporal_mask(seq.frame_count(), p_t, rng);
    return m;
}

BatchLoss csp_batch_loss(Tape& tape, const Encoder& encoder, const ProjectionHead& head,
                         std::span<const SkeletonSequence* const> batch, std::span<const SequenceMasks> masks,
                         const PrototypeTable& prototypes, const CspConfig& csp) {
    if (batch.empty() || batch.size() != masks.size())
        throw ValidationError("csp_batch_loss: need one mask set per sequence in a non-empty batch");
    std::vector<Var> tracklets;
    std::vector<Var> skeletons;
    std::vector<int> batch_labels;
    std::vector<int> skeleton_labels;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const SkeletonSequence& seq = *batch[b];
        if (masks[b].spatial.size() != seq.frame_count())
            throw ValidationError("csp_batch_loss: sequence '" + seq.seq_id + "' needs one spatial mask per frame");
        std::vector<Var> subs;
        for (std::size_t t = 0; t < seq.frame_count(); ++t) {
            const Var nodes = encoder.forward_frame(tape, seq.frame(t));
            subs.push_back(sub_skeleton(nodes, masks[b].spatial[t]));
            skeleton_labels.push_back(seq.label);
        }
        const Var stack = ad::concat(subs, 0);
        tracklets.push_back(sub_tracklet(stack, masks[b].temporal));
        skeletons.push_back(stack);
        batch_labels.push_back(seq.label);
    }

    BatchLoss out;
    out.str = csp_str_loss(ad::concat(tracklets, 0), batch_labels, prototypes, csp.tau1, csp.normalize, csp.l2_eps);
    if (csp.use_csp) {
        out.ssk = csp_ssk_loss(ad::concat(skeletons, 0), skeleton_labels, prototypes, head, csp.tau2, csp.normalize,
                               csp.l2_eps);
        out.loss = csp_loss(out.str, out.ssk, csp.lambda);
    } else {
        out.loss = out.str;
    }
    return out;
}

EpochStats train_epoch(Encoder& encoder, ProjectionHead& head, const std::vector<SkeletonSequence>& train,
                       const TrainOptions& options, ad::AdamState& state, std::uint64_t epoch_seed) {
    options.csp.validate();
    if (train.empty()) throw ValidationError("train_epoch: empty training set");
    if (options.batch == 0) throw ValidationError("train_epoch: batch must be >= 1");
    const auto start = std::chrono::steady_clock::now();

    std::vector<int> labels;
    for (const auto& s : train) labels.push_back(s.label);
    const auto classes = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()));
    const PrototypeTable prototypes = compute_prototypes(encode_all(encoder, train), labels, classes);

    Rng shuffle_rng(Rng::mix(epoch_seed, 0x5eedULL));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.index(i)]);

    std::vector<Parameter*> params = encoder.params().all();
    for (Parameter* p : head.all()) params.push_back(p);

    const CspConfig& csp = options.csp;
    const double p_s = csp.use_csp ? csp.p_s : 0.0;
    const double p_t = csp.use_csp ? csp.p_t : 0.0;

    EpochStats stats;
    for (std::size_t begin = 0; begin < order.size(); begin += options.batch) {
        const std::size_t end = std::min(order.size(), begin + options.batch);
        std::vector<const SkeletonSequence*> batch;
        std::vector<SequenceMasks> masks;
        for (std::size_t b = begin; b < end; ++b) {
            const SkeletonSequence& seq = train[order[b]];
            Rng rng(Rng::mix(epoch_seed, order[b] + 1));
            batch.push_back(&seq);
            masks.push_back(sample_sequence_masks(seq, p_s, p_t, rng));
        }

        Tape tape;
        BatchLoss losses;
        try {
            losses = csp_batch_loss(tape, encoder, head, batch, masks, prototypes, csp);
        } catch (const NumericError& e) {
            throw NumericError("training diverged in batch starting at " + std::to_string(begin) + ": " + e.what());
        }
        const Var loss = losses.loss, str = losses.str, ssk = losses.ssk;
        const ad::GradTable grads = tape.backward(loss);
        ad::adam_step(params, grads, state, options.adam);

        const double w = static_cast<double>(end - begin) / static_cast<double>(order.size());
        stats.loss += w * loss.value()[0];
        stats.str += w * str.value()[0];
        stats.ssk += w * (ssk.valid() ? ssk.value()[0] : 0.0);
    }
    stats.secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return stats;
}

} // namespace mocos
