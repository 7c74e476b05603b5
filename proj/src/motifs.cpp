#include "mocos/motifs.hpp"

#include "mocos/errors.hpp"

#include <algorithm>
#include <queue>

namespace mocos {

std::string MotifMatrix::label() const {
    switch (kind) {
    case MotifKind::Hsm: return "HSM" + std::to_string(order);
    case MotifKind::GcmUpper: return "GCM-upper";
    case MotifKind::GcmLower: return "GCM-lower";
    case MotifKind::Full: return "FULL";
    }
    return "?";
}

void LimbSets::validate(int joints) const {
    if (upper.empty() || lower.empty()) throw ValidationError("limb sets must both be non-empty");
    auto check = [joints](const std::vector<int>& set, const char* which) {
        for (int j : set)
            if (j < 1 || j > joints)
                throw ValidationError(std::string("limb set ") + which + ": joint " + std::to_string(j) +
                                      " outside [1, " + std::to_string(joints) + "]");
    };
    check(upper, "upper");
    check(lower, "lower");
    for (int j : upper)
        if (std::find(lower.begin(), lower.end(), j) != lower.end())
            throw ValidationError("limb sets overlap at joint " + std::to_string(j));
}

LimbSets default_limb_sets(const std::string& layout_name) {
    if (layout_name == "kinect20") return {{5, 6, 7, 8, 9, 10, 11, 12}, {13, 14, 15, 16, 17, 18, 19, 20}};
    if (layout_name == "kinect25")
        return {{5, 6, 7, 8, 9, 10, 11, 12, 22, 23, 24, 25}, {13, 14, 15, 16, 17, 18, 19, 20}};
    if (layout_name == "synthetic10") return {{3, 4, 5, 6}, {7, 8, 9, 10}};
    throw ValidationError("no default limb sets for layout '" + layout_name + "'; give them explicitly");
}

std::vector<std::vector<int>> hop_distances(const Matrix& adjacency) {
    const std::size_t n = adjacency.rows();
    std::vector<std::vector<int>> dist(n, std::vector<int>(n, -1));
    for (std::size_t s = 0; s < n; ++s) {
        std::queue<std::size_t> frontier;
        dist[s][s] = 0;
        frontier.push(s);
        while (!frontier.empty()) {
            const std::size_t u = frontier.front();
            frontier.pop();
            for (std::size_t v = 0; v < n; ++v) {
                if (adjacency(u, v) != 0.0 && dist[s][v] < 0) {
                    dist[s][v] = dist[s][u] + 1;
                    frontier.push(v);
                }
            }
        }
    }
    return dist;
}

std::set<int> k_hop_neighbors(const Matrix& adjacency, int i, int k) {
    const auto n = static_cast<int>(adjacency.rows());
    if (i < 1 || i > n) throw ValidationError("k_hop_neighbors: joint " + std::to_string(i) + " out of range");
    if (k < 1) throw ValidationError("k_hop_neighbors: k must be >= 1");

    std::vector<int> dist(static_cast<std::size_t>(n), -1);
    std::queue<int> frontier;
    dist[i - 1] = 0;
    frontier.push(i - 1);
    std::set<int> out;
    while (!frontier.empty()) {
        const int u = frontier.front();
        frontier.pop();
        if (dist[u] == k) {
            out.insert(u + 1);
            continue;
        }
        for (int v = 0; v < n; ++v) {
            if (adjacency(u, v) != 0.0 && dist[v] < 0) {
                dist[v] = dist[u] + 1;
                frontier.push(v);
            }
        }
    }
    return out;
}

MotifMatrix build_hsm(const Matrix& adjacency, int m, HsmSelf self) {
    if (m < 1 || m > 3) throw ValidationError("build_hsm: order must be in {1, 2, 3}, got " + std::to_string(m));
    const auto n = static_cast<int>(adjacency.rows());
    MotifMatrix out{MotifKind::Hsm, m, Matrix::matrix(n, n)};
    for (int i = 1; i <= n; ++i) {
        if (self == HsmSelf::Include) out.values(i - 1, i - 1) = 1.0;
        for (int k = 1; k <= m; ++k)
            for (int j : k_hop_neighbors(adjacency, i, k)) out.values(i - 1, j - 1) = 1.0;
    }
    return out;
}

MotifMatrix build_gcm(const LimbSets& limbs, int joints, Limb which) {
    limbs.validate(joints);
    const auto& owner = which == Limb::Upper ? limbs.upper : limbs.lower;
    MotifMatrix out{which == Limb::Upper ? MotifKind::GcmUpper : MotifKind::GcmLower, 0,
                    Matrix::matrix(joints, joints)};
    for (int i : owner) {
        for (int j : limbs.upper)
            if (j != i) out.values(i - 1, j - 1) = 1.0;
        for (int j : limbs.lower)
            if (j != i) out.values(i - 1, j - 1) = 1.0;
    }
    return out;
}

MotifMatrix full_motif(int joints) {
    return {MotifKind::Full, 0, Matrix::matrix(joints, joints, 1.0)};
}

MotifSet build_motif_set(const Matrix& adjacency, const LimbSets& limbs, HsmSelf self) {
    const auto j = static_cast<int>(adjacency.rows());
    MotifSet set;
    for (int m = 1; m <= 3; ++m) set.hsm.push_back(build_hsm(adjacency, m, self));
    set.gcm_upper = build_gcm(limbs, j, Limb::Upper);
    set.gcm_lower = build_gcm(limbs, j, Limb::Lower);
    set.full = full_motif(j);
    return set;
}

std::vector<std::string> HeadMaskTable::labels() const {
    std::vector<std::string> out;
    for (const auto& m : masks) out.push_back(m.label());
    return out;
}

HeadMaskTable build_head_table(const MotifSet& motifs, int heads, bool use_hsm, bool use_gcm) {
    if (heads < 1) throw ValidationError("build_head_table: H must be >= 1");
    HeadMaskTable table;
    for (int k = 0; k < heads; ++k) {
        if (k < 3) table.masks.push_back(use_hsm ? motifs.hsm[k] : motifs.full);
        else if (k == 3) table.masks.push_back(use_gcm ? motifs.gcm_upper : motifs.full);
        else if (k == 4) table.masks.push_back(use_gcm ? motifs.gcm_lower : motifs.full);
        else table.masks.push_back(motifs.full);
    }
    return table;
}

int role_count(MotifKind kind, int order) {
    switch (kind) {
    case MotifKind::Hsm: return 2 * order + 1;
    case MotifKind::GcmUpper:
    case MotifKind::GcmLower: return 3;
    case MotifKind::Full: return 1;
    }
    return 0;
}

} // namespace mocos
