#include "mocos/synth.hpp"

#include "mocos/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mocos {

namespace {

constexpr double kPi = std::numbers::pi;

struct BoneSpec {
    int parent;   // 1-based, 0 for the root
    double dx, dy, dz;
    double length;
    int limb;     // LimbIndex or -1
};

// x points to the body's left, y up, z forward.
std::vector<BoneSpec> kinect20_bones() {
    return {
        {0, 0, 0, 0, 0, -1},                                  // 1 hip center
        {1, 0, 1, 0, 0.25, -1},   {2, 0, 1, 0, 0.25, -1},     // 2 spine, 3 shoulder center
        {3, 0, 1, 0, 0.20, -1},                               // 4 head
        {3, 1, 0, 0, 0.18, -1},   {5, 0, -1, 0, 0.28, kLeftArm},
        {6, 0, -1, 0, 0.25, kLeftArm}, {7, 0, -1, 0, 0.08, kLeftArm},      // 5-8 left arm
        {3, -1, 0, 0, 0.18, -1},  {9, 0, -1, 0, 0.28, kRightArm},
        {10, 0, -1, 0, 0.25, kRightArm}, {11, 0, -1, 0, 0.08, kRightArm},  // 9-12 right arm
        {1, 1, 0, 0, 0.10, -1},   {13, 0, -1, 0, 0.42, kLeftLeg},
        {14, 0, -1, 0, 0.40, kLeftLeg}, {15, 0, 0, 1, 0.12, kLeftLeg},     // 13-16 left leg
        {1, -1, 0, 0, 0.10, -1},  {17, 0, -1, 0, 0.42, kRightLeg},
        {18, 0, -1, 0, 0.40, kRightLeg}, {19, 0, 0, 1, 0.12, kRightLeg},   // 17-20 right leg
    };
}

std::vector<BoneSpec> kinect25_bones() {
    std::vector<BoneSpec> b(25);
    b[0] = {0, 0, 0, 0, 0, -1};                 // 1 spine base
    b[1] = {1, 0, 1, 0, 0.25, -1};              // 2 spine mid
    b[20] = {2, 0, 1, 0, 0.22, -1};             // 21 spine shoulder
    b[2] = {21, 0, 1, 0, 0.08, -1};             // 3 neck
    b[3] = {3, 0, 1, 0, 0.15, -1};              // 4 head
    b[4] = {21, 1, 0, 0, 0.18, -1};             // 5 shoulder left
    b[5] = {5, 0, -1, 0, 0.28, kLeftArm};
    b[6] = {6, 0, -1, 0, 0.25, kLeftArm};
    b[7] = {7, 0, -1, 0, 0.08, kLeftArm};
    b[21] = {8, 0, -1, 0, 0.06, kLeftArm};      // 22 hand tip left
    b[22] = {7, 0, -0.5, 0.8660254037844386, 0.05, kLeftArm};   // 23 thumb left
    b[8] = {21, -1, 0, 0, 0.18, -1};            // 9 shoulder right
    b[9] = {9, 0, -1, 0, 0.28, kRightArm};
    b[10] = {10, 0, -1, 0, 0.25, kRightArm};
    b[11] = {11, 0, -1, 0, 0.08, kRightArm};
    b[23] = {12, 0, -1, 0, 0.06, kRightArm};    // 24 hand tip right
    b[24] = {11, 0, -0.5, 0.8660254037844386, 0.05, kRightArm}; // 25 thumb right
    b[12] = {1, 1, 0, 0, 0.10, -1};
    b[13] = {13, 0, -1, 0, 0.42, kLeftLeg};
    b[14] = {14, 0, -1, 0, 0.40, kLeftLeg};
    b[15] = {15, 0, 0, 1, 0.12, kLeftLeg};
    b[16] = {1, -1, 0, 0, 0.10, -1};
    b[17] = {17, 0, -1, 0, 0.42, kRightLeg};
    b[18] = {18, 0, -1, 0, 0.40, kRightLeg};
    b[19] = {19, 0, 0, 1, 0.12, kRightLeg};
    return b;
}

std::vector<BoneSpec> synthetic10_bones() {
    return {
        {0, 0, 0, 0, 0, -1},                           // 1 pelvis
        {1, 0, 1, 0, 0.50, -1},                        // 2 chest
        {2, 0.3, -1, 0, 0.30, kLeftArm},  {3, 0, -1, 0, 0.28, kLeftArm},
        {2, -0.3, -1, 0, 0.30, kRightArm}, {5, 0, -1, 0, 0.28, kRightArm},
        {1, 0.2, -1, 0, 0.45, kLeftLeg},  {7, 0, -1, 0, 0.42, kLeftLeg},
        {1, -0.2, -1, 0, 0.45, kRightLeg}, {9, 0, -1, 0, 0.42, kRightLeg},
    };
}

double range_width(double lo, double hi) { return hi - lo; }

} // namespace

Difficulty parse_difficulty(const std::string& s) {
    if (s == "easy") return Difficulty::Easy;
    if (s == "hard") return Difficulty::Hard;
    throw ValidationError("difficulty must be easy or hard, got '" + s + "'");
}

std::string to_string(Difficulty d) { return d == Difficulty::Easy ? "easy" : "hard"; }

void IdentityProfile::validate() const {
    for (double b : bone_lengths)
        if (!(b > 0.0)) throw ValidationError("identity profile: bone lengths must be > 0");
    if (!(frequency > 0.0 && frequency < 0.5)) throw ValidationError("identity profile: frequency must be in (0, 0.5)");
    for (double a : amplitude)
        if (!(a >= 0.0 && a <= kPi / 2)) throw ValidationError("identity profile: amplitudes must be in [0, pi/2]");
    if (!(height_scale > 0.0)) throw ValidationError("identity profile: height scale must be > 0");
}

std::vector<double> IdentityProfile::as_vector() const {
    std::vector<double> v = bone_lengths;
    v.push_back(frequency);
    v.insert(v.end(), phase.begin(), phase.end());
    v.insert(v.end(), amplitude.begin(), amplitude.end());
    v.push_back(height_scale);
    return v;
}

ProfileRanges ProfileRanges::for_difficulty(Difficulty d) {
    if (d == Difficulty::Easy) return {0.7, 1.3, 0.12, 0.24, 0.1, 0.5, kPi, 0.8, 1.2, 0.005};
    return {0.95, 1.05, 0.08, 0.11, 0.3, 0.45, 0.3, 0.97, 1.03, 0.02};
}

RestPose rest_pose(const JointLayout& layout) {
    layout.validate();
    std::vector<BoneSpec> bones;
    if (layout.name == "kinect20") bones = kinect20_bones();
    else if (layout.name == "kinect25") bones = kinect25_bones();
    else if (layout.name == "synthetic10") bones = synthetic10_bones();
    else throw ValidationError("no rest pose for layout '" + layout.name + "'; synthesis needs a built-in layout");
    if (bones.size() != static_cast<std::size_t>(layout.joints))
        throw ValidationError("rest pose for '" + layout.name + "' does not match its joint count");

    RestPose pose;
    const std::size_t n = bones.size();
    pose.parent.resize(n);
    pose.direction.resize(n);
    pose.base_length.resize(n);
    pose.limb.resize(n);
    pose.edge_of_joint.assign(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
        const BoneSpec& b = bones[j];
        pose.parent[j] = b.parent - 1;
        const double norm = std::sqrt(b.dx * b.dx + b.dy * b.dy + b.dz * b.dz);
        pose.direction[j] = norm > 0 ? std::array<double, 3>{b.dx / norm, b.dy / norm, b.dz / norm}
                                     : std::array<double, 3>{0, 0, 0};
        pose.base_length[j] = b.length;
        pose.limb[j] = b.limb;
        if (b.parent == 0) continue;
        auto it = std::find_if(layout.edges.begin(), layout.edges.end(), [&](const Edge& e) {
            return (e.first == b.parent && e.second == static_cast<int>(j + 1)) ||
                   (e.second == b.parent && e.first == static_cast<int>(j + 1));
        });
        if (it == layout.edges.end())
            throw ValidationError("rest pose bone " + std::to_string(b.parent) + "-" + std::to_string(j + 1) +
                                  " is not a layout edge");
        pose.edge_of_joint[j] = static_cast<std::size_t>(it - layout.edges.begin());
    }
    // breadth-first order from the root
    pose.order.push_back(0);
    for (std::size_t i = 0; i < pose.order.size(); ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (pose.parent[j] == pose.order[i]) pose.order.push_back(static_cast<int>(j));
    if (pose.order.size() != n) throw ValidationError("rest pose for '" + layout.name + "' is not a tree");
    return pose;
}

IdentityProfile generate_identity(std::uint64_t seed, Difficulty difficulty, const JointLayout& layout) {
    const RestPose pose = rest_pose(layout);
    const ProfileRanges r = ProfileRanges::for_difficulty(difficulty);
    Rng rng(seed);
    IdentityProfile p;
    p.bone_lengths.assign(layout.edges.size(), 0.0);
    for (std::size_t j = 0; j < pose.parent.size(); ++j)
        if (pose.parent[j] >= 0)
            p.bone_lengths[pose.edge_of_joint[j]] = pose.base_length[j] * rng.uniform(r.bone_scale_lo, r.bone_scale_hi);
    p.frequency = rng.uniform(r.frequency_lo, r.frequency_hi);
    const std::array<double, kLimbCount> canonical{0.0, kPi, kPi, 0.0};
    for (int l = 0; l < kLimbCount; ++l) {
        p.phase[l] = canonical[l] + rng.uniform(-r.phase_spread, r.phase_spread);
        p.amplitude[l] = rng.uniform(r.amplitude_lo, r.amplitude_hi);
    }
    p.height_scale = rng.uniform(r.height_lo, r.height_hi);
    p.validate();
    return p;
}

bool profiles_separated(const IdentityProfile& a, const IdentityProfile& b, Difficulty difficulty) {
    const ProfileRanges r = ProfileRanges::for_difficulty(difficulty);
    const std::vector<double> va = a.as_vector();
    const std::vector<double> vb = b.as_vector();
    const std::size_t bones = a.bone_lengths.size();
    for (std::size_t i = 0; i < va.size(); ++i) {
        double width;
        if (i < bones) {
            // relative to the bone's own base length
            const double base = 0.5 * (va[i] + vb[i]) / (0.5 * (r.bone_scale_lo + r.bone_scale_hi));
            width = base * range_width(r.bone_scale_lo, r.bone_scale_hi);
        } else if (i == bones) {
            width = range_width(r.frequency_lo, r.frequency_hi);
        } else if (i <= bones + kLimbCount) {
            width = 2.0 * r.phase_spread;
        } else if (i <= bones + 2 * kLimbCount) {
            width = range_width(r.amplitude_lo, r.amplitude_hi);
        } else {
            width = range_width(r.height_lo, r.height_hi);
        }
        if (std::abs(va[i] - vb[i]) >= 0.1 * width) return true;
    }
    return false;
}

std::vector<IdentityProfile> generate_identities(std::size_t count, std::uint64_t seed, Difficulty difficulty,
                                                 const JointLayout& layout) {
    const ProfileRanges r = ProfileRanges::for_difficulty(difficulty);
    Rng master(seed);
    // Latin-hypercube strata for height, shuffled across identities.
    std::vector<std::size_t> strata(count);
    for (std::size_t i = 0; i < count; ++i) strata[i] = i;
    for (std::size_t i = count; i > 1; --i) std::swap(strata[i - 1], strata[master.index(i)]);

    std::vector<IdentityProfile> out;
    for (std::size_t i = 0; i < count; ++i) {
        for (std::uint64_t attempt = 0;; ++attempt) {
            IdentityProfile p = generate_identity(Rng::mix(Rng::mix(seed, i), attempt), difficulty, layout);
            const double cell = (r.height_hi - r.height_lo) / static_cast<double>(count);
            Rng hrng(Rng::mix(seed ^ 0x4e1647ULL, i * 131 + attempt));
            p.height_scale = r.height_lo + cell * (static_cast<double>(strata[i]) + hrng.uniform());
            bool ok = true;
            if (difficulty == Difficulty::Easy)
                for (const auto& q : out) ok = ok && profiles_separated(p, q, difficulty);
            if (ok || attempt > 1000) {
                out.push_back(std::move(p));
                break;
            }
        }
    }
    return out;
}

SkeletonSequence generate_sequence(const IdentityProfile& profile, const JointLayout& layout, std::size_t frames,
                                   double noise_sigma, Rng& rng) {
    if (frames < 1) throw ValidationError("generate_sequence: frames must be >= 1");
    if (!(noise_sigma >= 0.0)) throw ValidationError("generate_sequence: noise sigma must be >= 0");
    profile.validate();
    if (profile.bone_lengths.size() != layout.edges.size())
        throw ValidationError("generate_sequence: profile has " + std::to_string(profile.bone_lengths.size()) +
                              " bones for a layout with " + std::to_string(layout.edges.size()) + " edges");
    const RestPose pose = rest_pose(layout);
    const std::size_t n = pose.parent.size();
    const double start = rng.uniform(0.0, 1.0 / profile.frequency);

    SkeletonSequence seq;
    seq.frames = Matrix::matrix(frames, 3 * n);
    std::vector<std::array<double, 3>> pos(n);
    for (std::size_t t = 0; t < frames; ++t) {
        std::array<double, kLimbCount> angle{};
        for (int l = 0; l < kLimbCount; ++l)
            angle[l] = profile.amplitude[l] *
                       std::sin(2.0 * kPi * profile.frequency * (static_cast<double>(t) + start) + profile.phase[l]);
        pos[0] = {0.0, 0.0, 0.0};
        for (std::size_t k = 1; k < pose.order.size(); ++k) {
            const auto j = static_cast<std::size_t>(pose.order[k]);
            const auto& d = pose.direction[j];
            const double len = profile.height_scale * profile.bone_lengths[pose.edge_of_joint[j]];
            double dy = d[1], dz = d[2];
            if (pose.limb[j] >= 0) {
                // swing in the sagittal plane about the lateral axis
                const double c = std::cos(angle[pose.limb[j]]);
                const double s = std::sin(angle[pose.limb[j]]);
                dy = d[1] * c - d[2] * s;
                dz = d[1] * s + d[2] * c;
            }
            const auto& p = pos[static_cast<std::size_t>(pose.parent[j])];
            pos[j] = {p[0] + len * d[0], p[1] + len * dy, p[2] + len * dz};
        }
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t c = 0; c < 3; ++c) seq.frames(t, 3 * j + c) = pos[j][c];
    }
    if (noise_sigma > 0.0)
        for (double& v : seq.frames.data()) v += noise_sigma * rng.normal();
    return seq;
}

void DatasetSplit::validate() const {
    std::vector<std::string> ids;
    for (const auto* part : {&train, &probe, &gallery})
        for (const auto& s : *part) ids.push_back(s.seq_id);
    std::sort(ids.begin(), ids.end());
    if (auto it = std::adjacent_find(ids.begin(), ids.end()); it != ids.end())
        throw ValidationError("duplicate sequence id '" + *it + "'");
    for (const auto& p : probe) {
        const bool found = std::any_of(gallery.begin(), gallery.end(), [&](const auto& g) { return g.label == p.label; });
        if (!found)
            throw ValidationError("probe sequence '" + p.seq_id + "' has label " + std::to_string(p.label) +
                                  " absent from the gallery");
    }
}

DatasetSplit make_splits(const GenOptions& options) {
    if (options.seqs_per_id < 3) throw ValidationError("make_splits: need at least 3 sequences per identity");
    if (options.identities < 1) throw ValidationError("make_splits: need at least 1 identity");
    const auto layout = builtin_layout(options.layout);
    if (!layout) throw ValidationError("unknown layout '" + options.layout + "'");
    const double sigma = options.noise_sigma.value_or(ProfileRanges::for_difficulty(options.difficulty).noise_sigma);

    const auto profiles = generate_identities(options.identities, options.seed, options.difficulty, *layout);
    const std::size_t m = options.seqs_per_id;
    const std::size_t probe_n = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(m))));
    const std::size_t gallery_n = probe_n;
    const std::size_t train_n = m - probe_n - gallery_n;

    DatasetSplit split;
    split.classes = options.identities;
    for (std::size_t id = 0; id < options.identities; ++id) {
        for (std::size_t s = 0; s < m; ++s) {
            Rng rng(Rng::mix(Rng::mix(options.seed, 0x5e9ULL + id), s));
            SkeletonSequence seq = generate_sequence(profiles[id], *layout, options.frames, sigma, rng);
            seq.label = static_cast<int>(id + 1);
            seq.seq_id = "id" + std::to_string(id + 1) + "_s" + std::to_string(s + 1);
            if (s < train_n) split.train.push_back(std::move(seq));
            else if (s < train_n + probe_n) split.probe.push_back(std::move(seq));
            else split.gallery.push_back(std::move(seq));
        }
    }
    split.validate();
    return split;
}

Dataset generate_dataset(const GenOptions& options) {
    Dataset d;
    const auto layout = builtin_layout(options.layout);
    if (!layout) throw ValidationError("unknown layout '" + options.layout + "'");
    d.layout = *layout;
    d.limbs = default_limb_sets(options.layout);
    d.split = make_splits(options);
    return d;
}

bool operator==(const Dataset& a, const Dataset& b) {
    auto limbs_eq = [](const std::optional<LimbSets>& x, const std::optional<LimbSets>& y) {
        if (x.has_value() != y.has_value()) return false;
        return !x || (x->upper == y->upper && x->lower == y->lower);
    };
    return a.layout.name == b.layout.name && a.layout.joints == b.layout.joints && a.layout.edges == b.layout.edges &&
           limbs_eq(a.limbs, b.limbs) && a.split == b.split;
}

} // namespace mocos
