#include "mocos/pipeline.hpp"

#include "mocos/errors.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cstring>
#include <fstream>
#include <ostream>

namespace mocos {

namespace {

constexpr char kMagic[] = "MOCOSCKPT1";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;
constexpr std::uint64_t kMaxField = std::uint64_t{1} << 32;

void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in, const char* what) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw ValidationError(std::string("checkpoint truncated in ") + what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const char* what) {
    const std::uint64_t n = get_u64(in, what);
    if (n > kMaxField) throw ValidationError(std::string("checkpoint ") + what + " length is implausible");
    std::string s(n, '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(n)))
        throw ValidationError(std::string("checkpoint truncated in ") + what);
    return s;
}

void put_tensor(std::ostream& out, const std::string& name, const Matrix& t) {
    put_string(out, name);
    put_u64(out, t.shape().size());
    for (std::size_t d : t.shape()) put_u64(out, d);
    for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

struct NamedTensor {
    std::string name;
    Matrix value;
};

NamedTensor get_tensor(std::istream& in) {
    NamedTensor t;
    t.name = get_string(in, "tensor name");
    const std::uint64_t rank = get_u64(in, "tensor rank");
    if (rank > 8) throw ValidationError("checkpoint tensor '" + t.name + "' has implausible rank");
    std::vector<std::size_t> shape(rank);
    std::uint64_t count = 1;
    for (auto& d : shape) {
        d = get_u64(in, "tensor shape");
        count *= d;
        if (count > kMaxField) throw ValidationError("checkpoint tensor '" + t.name + "' is implausibly large");
    }
    std::vector<double> values(count);
    for (double& v : values) v = std::bit_cast<double>(get_u64(in, "tensor values"));
    t.value = Matrix(std::move(shape), std::move(values));
    return t;
}

std::vector<std::pair<std::string, const Matrix*>> model_tensors(const Model& model) {
    std::vector<std::pair<std::string, const Matrix*>> out;
    for (const ad::Parameter* p : model.encoder.params().all()) out.emplace_back(p->name, &p->value);
    for (const ad::Parameter* p : model.head.all()) out.emplace_back(p->name, &p->value);
    return out;
}

JointLayout layout_from_adjacency(const std::string& name, const Matrix& adj) {
    if (adj.shape().size() != 2 || adj.rows() != adj.cols() || adj.rows() < 2)
        throw ValidationError("checkpoint adjacency has shape " + adj.shape_str());
    JointLayout layout;
    layout.name = name;
    layout.joints = static_cast<int>(adj.rows());
    for (std::size_t i = 0; i < adj.rows(); ++i)
        for (std::size_t j = i + 1; j < adj.cols(); ++j)
            if (adj(i, j) != 0.0) layout.edges.emplace_back(static_cast<int>(i + 1), static_cast<int>(j + 1));
    layout.validate();
    return layout;
}

bool same_graph(const JointLayout& a, const JointLayout& b) {
    return a.joints == b.joints && build_adjacency(a) == build_adjacency(b);
}

std::vector<int> labels_of(const std::vector<SkeletonSequence>& seqs) {
    std::vector<int> out;
    out.reserve(seqs.size());
    for (const auto& s : seqs) out.push_back(s.label);
    return out;
}

} // namespace

std::vector<SkeletonSequence> clip_frames(const std::vector<SkeletonSequence>& seqs, int frames) {
    if (frames < 1) throw ValidationError("config key 'f' out of range: must be >= 1");
    const auto f = static_cast<std::size_t>(frames);
    std::vector<SkeletonSequence> out;
    out.reserve(seqs.size());
    for (const SkeletonSequence& s : seqs) {
        if (s.frame_count() <= f) {
            out.push_back(s);
            continue;
        }
        SkeletonSequence c{s.seq_id, s.label, Matrix::matrix(f, s.frames.cols())};
        std::copy_n(s.frames.data().begin(), f * s.frames.cols(), c.frames.data().begin());
        out.push_back(std::move(c));
    }
    return out;
}

RunConfig resolve_config(const RunConfig& config, const Dataset& data) {
    RunConfig out = config;
    data.layout.validate();
    out.layout = builtin_layout(data.layout.name) ? data.layout.name : std::string("custom");
    out.K = out.encoder_config(data.layout.joints).pe_width;
    if (out.limbs_upper.empty()) {
        const LimbSets limbs = data.limbs ? *data.limbs : default_limb_sets(data.layout.name);
        out.limbs_upper = limbs.upper;
        out.limbs_lower = limbs.lower;
    }
    try {
        LimbSets{out.limbs_upper, out.limbs_lower}.validate(data.layout.joints);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("config keys 'limbs_upper'/'limbs_lower': ") + e.what());
    }
    out.validate();
    return out;
}

Model build_model(const RunConfig& config, const JointLayout& layout) {
    config.validate();
    if (config.limbs_upper.empty() || !config.K)
        throw ValidationError("build_model: config must be resolved against a dataset first");
    const EncoderConfig ec = config.encoder_config(layout.joints);
    const LimbSets limbs{config.limbs_upper, config.limbs_lower};
    limbs.validate(layout.joints);
    SkeletonGraphContext ctx = make_graph_context(layout, ec.pe_width);
    const MotifSet motifs = build_motif_set(ctx.adjacency, limbs, config.hsm_self);
    HeadMaskTable heads = build_head_table(motifs, config.H, config.use_hsm, config.use_gcm);
    EncoderParams params = EncoderParams::initialize(ec, Rng::mix(config.seed, 1));
    return Model{config, layout, limbs, Encoder(ec, std::move(ctx), std::move(heads), std::move(params)),
                 ProjectionHead::initialize(config.D, Rng::mix(config.seed, 2))};
}

TrainResult train_model(const RunConfig& config, const Dataset& data, const EpochCallback& on_epoch) {
    const RunConfig resolved = resolve_config(config, data);
    TrainResult result{build_model(resolved, data.layout), {}};
    Model& model = result.model;

    TrainOptions options;
    options.csp = resolved.csp_config();
    options.adam.lr = resolved.lr;
    options.batch = static_cast<std::size_t>(resolved.batch);
    ad::AdamState state;

    const std::vector<SkeletonSequence> train = clip_frames(data.split.train, resolved.f);
    const Matrix base_pe = model.encoder.context().pe;
    for (int epoch = 1; epoch <= resolved.epochs; ++epoch) {
        const std::uint64_t epoch_seed = Rng::mix(resolved.seed, 0x100 + static_cast<std::uint64_t>(epoch));
        if (resolved.pe_sign == PeSign::Random) {
            Rng sign_rng(Rng::mix(epoch_seed, 0x519));
            model.encoder.set_positional_encoding(randomize_pe_signs(base_pe, sign_rng));
        }
        EpochStats stats = train_epoch(model.encoder, model.head, train, options, state, epoch_seed);
        stats.epoch = epoch;
        result.epochs.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }
    model.encoder.set_positional_encoding(base_pe);
    return result;
}

EvalReport evaluate_model(const Model& model, const Dataset& data) {
    if (!same_graph(model.layout, data.layout))
        throw ValidationError("dataset layout '" + data.layout.name + "' (J=" + std::to_string(data.layout.joints) +
                              ") does not match the checkpoint layout '" + model.layout.name + "' (J=" +
                              std::to_string(model.layout.joints) + ")");
    if (data.split.probe.empty() || data.split.gallery.empty())
        throw ValidationError("dataset needs non-empty probe and gallery splits");
    const Matrix probe = encode_all(model.encoder, clip_frames(data.split.probe, model.config.f));
    const Matrix gallery = encode_all(model.encoder, clip_frames(data.split.gallery, model.config.f));
    return evaluate(probe, labels_of(data.split.probe), gallery, labels_of(data.split.gallery), model.config.metric);
}

void write_checkpoint(const Model& model, std::ostream& out) {
    out.write(kMagic, kMagicLen);
    put_string(out, model.config.echo());
    const auto tensors = model_tensors(model);
    put_u64(out, tensors.size() + 1);
    for (const auto& [name, value] : tensors) put_tensor(out, name, *value);
    put_tensor(out, "graph.adjacency", build_adjacency(model.layout));
}

void write_checkpoint(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    write_checkpoint(model, out);
    if (!out) throw ValidationError("failed writing checkpoint '" + path + "'");
}

Model read_checkpoint(std::istream& in) {
    char magic[kMagicLen];
    if (!in.read(magic, kMagicLen) || std::memcmp(magic, kMagic, kMagicLen) != 0)
        throw ValidationError("not a checkpoint: missing MOCOSCKPT1 magic");
    const RunConfig config = parse_config_text(get_string(in, "config echo"));
    const std::uint64_t count = get_u64(in, "tensor count");
    if (count > kMaxField) throw ValidationError("checkpoint tensor count is implausible");
    std::vector<NamedTensor> tensors;
    for (std::uint64_t i = 0; i < count; ++i) {
        tensors.push_back(get_tensor(in));
        if (!tensors.back().value.all_finite())
            throw NumericError("checkpoint tensor '" + tensors.back().name + "' has non-finite values");
    }
    if (tensors.empty() || tensors.back().name != "graph.adjacency")
        throw ValidationError("checkpoint lacks the graph.adjacency tensor");

    const JointLayout layout = layout_from_adjacency(config.layout, tensors.back().value);
    if (const auto builtin = builtin_layout(config.layout); builtin && !same_graph(*builtin, layout))
        throw ValidationError("checkpoint adjacency disagrees with layout '" + config.layout + "'");
    Model model = build_model(config, builtin_layout(config.layout).value_or(layout));

    std::vector<ad::Parameter*> params = model.encoder.params().all();
    for (ad::Parameter* p : model.head.all()) params.push_back(p);
    if (params.size() + 1 != tensors.size())
        throw ValidationError("checkpoint has " + std::to_string(tensors.size() - 1) + " parameter tensors, config needs " +
                              std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const NamedTensor& t = tensors[i];
        if (t.name != params[i]->name || t.value.shape() != params[i]->value.shape())
            throw ValidationError("checkpoint tensor " + std::to_string(i + 1) + " is '" + t.name + "' " +
                                  t.value.shape_str() + ", expected '" + params[i]->name + "' " +
                                  params[i]->value.shape_str());
        std::copy(t.value.data().begin(), t.value.data().end(), params[i]->value.data().begin());
    }
    return model;
}

Model read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint '" + path + "'");
    return read_checkpoint(in);
}

void inspect_motifs(const RunConfig& config, const JointLayout& layout, const LimbSets& limbs, std::ostream& out) {
    layout.validate();
    limbs.validate(layout.joints);
    const MotifSet motifs = build_motif_set(build_adjacency(layout), limbs, config.hsm_self);
    std::vector<const MotifMatrix*> all;
    for (const auto& m : motifs.hsm) all.push_back(&m);
    all.push_back(&motifs.gcm_upper);
    all.push_back(&motifs.gcm_lower);
    for (const MotifMatrix* m : all) {
        out << m->label() << " (" << role_count(m->kind, m->order) << " roles)\n";
        for (std::size_t i = 0; i < m->values.rows(); ++i) {
            for (std::size_t j = 0; j < m->values.cols(); ++j) out << (j ? " " : "") << m->values(i, j);
            out << '\n';
        }
        out << '\n';
    }
    const HeadMaskTable heads = build_head_table(motifs, config.H, config.use_hsm, config.use_gcm);
    out << "heads:";
    for (const auto& label : heads.labels()) out << ' ' << label;
    out << '\n';
}

void write_relations_csv(const RelationStack& relations, std::ostream& out) {
    char buf[64];
    for (std::size_t l = 0; l < relations.size(); ++l)
        for (std::size_t h = 0; h < relations[l].size(); ++h) {
            out << h + 1 << ',' << l + 1 << '\n';
            const Matrix& m = relations[l][h];
            for (std::size_t i = 0; i < m.rows(); ++i) {
                for (std::size_t j = 0; j < m.cols(); ++j) {
                    const auto res = std::to_chars(buf, buf + sizeof(buf), m(i, j));
                    if (j) out << ',';
                    out.write(buf, res.ptr - buf);
                }
                out << '\n';
            }
        }
}

void write_ap_csv(const EvalReport& report, const Dataset& data, std::ostream& out) {
    out << "probe,label,ap\n";
    char buf[64];
    for (std::size_t i = 0; i < report.per_probe_ap.size() && i < data.split.probe.size(); ++i) {
        const auto res = std::to_chars(buf, buf + sizeof(buf), report.per_probe_ap[i]);
        out << data.split.probe[i].seq_id << ',' << data.split.probe[i].label << ',';
        out.write(buf, res.ptr - buf);
        out << '\n';
    }
}

} // namespace mocos
