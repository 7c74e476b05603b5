#pragma once

#include "mocos/motifs.hpp"
#include "mocos/rng.hpp"
#include "mocos/skeleton.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mocos {

enum class Difficulty { Easy, Hard };

Difficulty parse_difficulty(const std::string& s);
std::string to_string(Difficulty d);

/// Limbs driven by the gait oscillator.
enum LimbIndex { kLeftArm = 0, kRightArm = 1, kLeftLeg = 2, kRightLeg = 3, kLimbCount = 4 };

/// Per-identity gait and body parameters.
struct IdentityProfile {
    std::vector<double> bone_lengths;          // one per layout edge, in edge order
    double frequency = 0.1;                    // cycles per frame, in (0, 0.5)
    std::array<double, kLimbCount> phase{};    // radians
    std::array<double, kLimbCount> amplitude{};// radians, in [0, pi/2]
    double height_scale = 1.0;

    void validate() const;
    std::vector<double> as_vector() const;
};

/// Sampling box for one difficulty; profile fields are drawn uniformly from
/// these ranges.
struct ProfileRanges {
    double bone_scale_lo, bone_scale_hi;
    double frequency_lo, frequency_hi;
    double amplitude_lo, amplitude_hi;
    double phase_spread;   // +- around the canonical alternating gait
    double height_lo, height_hi;
    double noise_sigma;

    static ProfileRanges for_difficulty(Difficulty d);
};

/// Rest-pose skeleton for a built-in layout: the layout's tree rooted at
/// joint 1 with a rest direction and base length per bone.
struct RestPose {
    std::vector<int> parent;                   // 0-based parent per joint, -1 for root
    std::vector<std::array<double, 3>> direction;
    std::vector<double> base_length;           // per joint (bone to its parent)
    std::vector<int> limb;                     // LimbIndex or -1
    std::vector<std::size_t> edge_of_joint;    // layout edge index of the bone to the parent
    std::vector<int> order;                    // joints, parents before children
};

RestPose rest_pose(const JointLayout& layout);

IdentityProfile generate_identity(std::uint64_t seed, Difficulty difficulty, const JointLayout& layout);

/// `count` profiles where, in easy mode, every pair differs in at least one
/// field by >= 10% of that field's range. Height is stratified across the
/// identities; near-duplicates are redrawn.
std::vector<IdentityProfile> generate_identities(std::size_t count, std::uint64_t seed, Difficulty difficulty,
                                                 const JointLayout& layout);

/// Pairwise check used by generate_identities.
bool profiles_separated(const IdentityProfile& a, const IdentityProfile& b, Difficulty difficulty);

/// Forward kinematics with sinusoidal limb swing about the lateral axis.
/// The gait start phase is drawn from `rng`; noise is i.i.d. N(0, sigma^2)
/// per coordinate.
SkeletonSequence generate_sequence(const IdentityProfile& profile, const JointLayout& layout, std::size_t frames,
                                   double noise_sigma, Rng& rng);

struct DatasetSplit {
    std::vector<SkeletonSequence> train;
    std::vector<SkeletonSequence> probe;
    std::vector<SkeletonSequence> gallery;
    std::size_t classes = 0;

    void validate() const;
    friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

struct GenOptions {
    std::size_t identities = 20;
    std::size_t seqs_per_id = 10;
    std::size_t frames = 6;
    Difficulty difficulty = Difficulty::Easy;
    std::uint64_t seed = 1;
    std::string layout = "kinect20";
    std::optional<double> noise_sigma;   // default per difficulty
};

/// Per identity: 20% probe, 20% gallery (each at least 1), rest train.
DatasetSplit make_splits(const GenOptions& options);

/// A dataset on disk: layout, limb sets and the split.
struct Dataset {
    JointLayout layout;
    std::optional<LimbSets> limbs;
    DatasetSplit split;

    friend bool operator==(const Dataset& a, const Dataset& b);
};

Dataset generate_dataset(const GenOptions& options);

/// SKL1 text format. Values use shortest round-trip formatting so
/// read(write(x)) == x exactly.
void write_dataset(const Dataset& data, std::ostream& out);
void write_dataset(const Dataset& data, const std::string& path);
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::string& path);

} // namespace mocos
