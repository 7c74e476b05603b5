#pragma once

#include "mocos/skeleton.hpp"

#include <set>
#include <string>
#include <vector>

namespace mocos {

enum class MotifKind { Hsm, GcmUpper, GcmLower, Full };

/// A binary J x J pattern used as an attention mask.
struct MotifMatrix {
    MotifKind kind = MotifKind::Full;
    int order = 0;   // HSM order m; 0 otherwise
    Matrix values;

    std::string label() const;   // "HSM1", "GCM-upper", "FULL", ...
};

/// Joint index sets (1-based) for the upper and lower limbs.
struct LimbSets {
    std::vector<int> upper;
    std::vector<int> lower;

    /// Non-empty, disjoint, indices in [1, joints].
    void validate(int joints) const;
};

/// Anatomical arm/leg grouping for the built-in layouts.
LimbSets default_limb_sets(const std::string& layout_name);

enum class HsmSelf { Include, Exclude };

/// Joints at shortest-path distance exactly k from joint i (both 1-based).
std::set<int> k_hop_neighbors(const Matrix& adjacency, int i, int k);

/// All-pairs hop distances by breadth-first search; -1 when unreachable.
std::vector<std::vector<int>> hop_distances(const Matrix& adjacency);

/// m-order structural motif: 1 where the hop distance is in [1, m], plus the
/// diagonal unless `self` is Exclude.
MotifMatrix build_hsm(const Matrix& adjacency, int m, HsmSelf self = HsmSelf::Include);

enum class Limb { Upper, Lower };

/// Collaborative motif for one limb set: row i (i in the chosen set) marks
/// every limb joint of either set other than i.
MotifMatrix build_gcm(const LimbSets& limbs, int joints, Limb which);

MotifMatrix full_motif(int joints);

/// The five motif matrices A1, A2, A3 (structural) and B1, B2 (collaborative).
struct MotifSet {
    std::vector<MotifMatrix> hsm;   // orders 1..3
    MotifMatrix gcm_upper;
    MotifMatrix gcm_lower;
    MotifMatrix full;
};

MotifSet build_motif_set(const Matrix& adjacency, const LimbSets& limbs, HsmSelf self);

/// Mask per attention head.
struct HeadMaskTable {
    std::vector<MotifMatrix> masks;

    std::size_t heads() const { return masks.size(); }
    std::vector<std::string> labels() const;
};

/// Heads take HSM1, HSM2, HSM3, GCM-upper, GCM-lower, then FULL for the
/// rest, truncated at `heads`. Disabled motif families are replaced by FULL
/// in their slots.
HeadMaskTable build_head_table(const MotifSet& motifs, int heads, bool use_hsm, bool use_gcm);

/// Number of relational roles a motif defines: 2m+1 for HSM order m, 3 for
/// GCM, 1 for FULL.
int role_count(MotifKind kind, int order = 0);

} // namespace mocos
