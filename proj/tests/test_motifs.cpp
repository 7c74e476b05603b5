#include "oracles.hpp"

#include "mocos/errors.hpp"
#include "mocos/motifs.hpp"

#include <doctest.h>

#include <random>

using namespace mocos;

namespace {

Matrix path_adj(int n) {
    JointLayout l{"custom", n, {}};
    for (int i = 1; i < n; ++i) l.edges.emplace_back(i, i + 1);
    return build_adjacency(l);
}

std::vector<double> row(const Matrix& m, std::size_t i) {
    auto r = m.row_span(i);
    return {r.begin(), r.end()};
}

} // namespace

TEST_CASE("k-hop neighbours on a path") {
    const Matrix a = path_adj(5);
    CHECK(k_hop_neighbors(a, 3, 1) == std::set<int>{2, 4});
    CHECK(k_hop_neighbors(a, 1, 3) == std::set<int>{4});
    CHECK(k_hop_neighbors(a, 1, 5).empty());
}

TEST_CASE("k-hop neighbours match Floyd-Warshall on random trees") {
    std::mt19937_64 gen(21);
    for (int t = 0; t < 100; ++t) {
        const JointLayout l = oracle::random_tree(4 + static_cast<int>(gen() % 22), gen);
        const auto dist = oracle::floyd_warshall(l);
        const Matrix a = build_adjacency(l);
        for (int i = 1; i <= l.joints; ++i)
            for (int k = 1; k <= 3; ++k) {
                std::set<int> expect;
                for (int j = 1; j <= l.joints; ++j)
                    if (dist[i - 1][j - 1] == k) expect.insert(j);
                REQUIRE(k_hop_neighbors(a, i, k) == expect);
            }
    }
}

TEST_CASE("HSM examples") {
    CHECK(row(build_hsm(path_adj(4), 1).values, 1) == std::vector<double>{1, 1, 1, 0});
    CHECK(row(build_hsm(path_adj(4), 2).values, 0) == std::vector<double>{1, 1, 1, 0});
    CHECK(row(build_hsm(path_adj(4), 1, HsmSelf::Exclude).values, 1) == std::vector<double>{1, 0, 1, 0});
    CHECK_THROWS_AS(build_hsm(path_adj(4), 0), ValidationError);
    CHECK_THROWS_AS(build_hsm(path_adj(4), 4), ValidationError);

    // Star with centre 1 and leaves 2..5.
    const Matrix star = build_adjacency(JointLayout{"custom", 5, {{1, 2}, {1, 3}, {1, 4}, {1, 5}}});
    const Matrix a1 = build_hsm(star, 1).values, a2 = build_hsm(star, 2).values;
    CHECK(row(a1, 0) == std::vector<double>{1, 1, 1, 1, 1});
    CHECK(row(a2, 0) == row(a1, 0));
    CHECK(row(a1, 1) == std::vector<double>{1, 1, 0, 0, 0});
    CHECK(row(a2, 1) == std::vector<double>{1, 1, 1, 1, 1});
}

TEST_CASE("HSM equals the distance indicator and nests by order") {
    std::mt19937_64 gen(22);
    for (int t = 0; t < 100; ++t) {
        const JointLayout l = oracle::random_tree(4 + static_cast<int>(gen() % 22), gen);
        const auto dist = oracle::floyd_warshall(l);
        const Matrix a = build_adjacency(l);
        for (HsmSelf self : {HsmSelf::Include, HsmSelf::Exclude}) {
            Matrix prev;
            for (int m = 1; m <= 3; ++m) {
                const MotifMatrix h = build_hsm(a, m, self);
                REQUIRE(oracle::to_grid(h.values) == oracle::hsm(dist, m, self == HsmSelf::Include));
                CHECK(h.values == transposed(h.values));
                if (m > 1)
                    for (std::size_t i = 0; i < prev.size(); ++i)
                        if (prev[i] == 1.0) CHECK(h.values[i] == 1.0);
                prev = h.values;
            }
        }
    }
}

TEST_CASE("GCM examples") {
    const LimbSets limbs{{1, 2}, {4, 5}};
    const Matrix up = build_gcm(limbs, 6, Limb::Upper).values;
    CHECK(row(up, 0) == std::vector<double>{0, 1, 0, 1, 1, 0});
    CHECK(row(up, 2) == std::vector<double>(6, 0.0));
    CHECK(row(up, 5) == std::vector<double>(6, 0.0));
    const Matrix low = build_gcm(limbs, 6, Limb::Lower).values;
    CHECK(row(low, 3) == std::vector<double>{1, 1, 0, 0, 1, 0});
    CHECK_THROWS_AS(build_gcm(LimbSets{{1, 2}, {2, 3}}, 6, Limb::Upper), ValidationError);
    CHECK_THROWS_AS(build_gcm(LimbSets{{}, {2, 3}}, 6, Limb::Upper), ValidationError);
    CHECK_THROWS_AS(build_gcm(LimbSets{{1, 7}, {2, 3}}, 6, Limb::Upper), ValidationError);
}

TEST_CASE("GCM equals direct evaluation and satisfies its invariants") {
    std::mt19937_64 gen(23);
    for (int t = 0; t < 100; ++t) {
        const int n = 4 + static_cast<int>(gen() % 22);
        std::vector<int> ids(n);
        std::iota(ids.begin(), ids.end(), 1);
        std::shuffle(ids.begin(), ids.end(), gen);
        const int nu = 1 + static_cast<int>(gen() % (n / 2)), nl = 1 + static_cast<int>(gen() % (n - nu));
        const LimbSets limbs{{ids.begin(), ids.begin() + nu}, {ids.begin() + nu, ids.begin() + nu + nl}};
        const Matrix b1 = build_gcm(limbs, n, Limb::Upper).values;
        const Matrix b2 = build_gcm(limbs, n, Limb::Lower).values;
        REQUIRE(oracle::to_grid(b1) == oracle::gcm(n, limbs.upper, limbs.lower, true));
        REQUIRE(oracle::to_grid(b2) == oracle::gcm(n, limbs.upper, limbs.lower, false));
        for (int i = 0; i < n; ++i) {
            CHECK(b1(i, i) == 0.0);
            double s1 = 0.0, s2 = 0.0;
            for (int j = 0; j < n; ++j) {
                s1 += b1(i, j);
                s2 += b2(i, j);
            }
            const bool in_limb = std::count(ids.begin(), ids.begin() + nu + nl, i + 1) > 0;
            CHECK((s1 + s2 == 0.0) == !in_limb);
            if (s1 > 0) CHECK(s1 == nu + nl - 1);
            if (s2 > 0) CHECK(s2 == nu + nl - 1);
        }
        for (int i : limbs.upper)
            for (int j : limbs.lower)
                if (b1(i - 1, j - 1) == 1.0) CHECK(b2(j - 1, i - 1) == 1.0);
    }
}

TEST_CASE("head table routing") {
    const Matrix adj = build_adjacency(kinect20_layout());
    const MotifSet ms = build_motif_set(adj, default_limb_sets("kinect20"), HsmSelf::Include);
    using V = std::vector<std::string>;
    CHECK(build_head_table(ms, 8, true, true).labels() ==
          V{"HSM1", "HSM2", "HSM3", "GCM-upper", "GCM-lower", "FULL", "FULL", "FULL"});
    CHECK(build_head_table(ms, 8, false, true).labels() ==
          V{"FULL", "FULL", "FULL", "GCM-upper", "GCM-lower", "FULL", "FULL", "FULL"});
    CHECK(build_head_table(ms, 8, true, false).labels() ==
          V{"HSM1", "HSM2", "HSM3", "FULL", "FULL", "FULL", "FULL", "FULL"});
    CHECK(build_head_table(ms, 2, true, true).labels() == V{"HSM1", "HSM2"});
    const auto t = build_head_table(ms, 8, true, true);
    CHECK(t.masks[0].values == ms.hsm[0].values);
    CHECK(t.masks[3].values == ms.gcm_upper.values);
    CHECK(t.masks[7].values == full_motif(20).values);
    CHECK(build_head_table(ms, 8, true, true).labels() == t.labels());
    CHECK_THROWS_AS(build_head_table(ms, 0, true, true), ValidationError);
}

TEST_CASE("role counts") {
    CHECK(role_count(MotifKind::Hsm, 1) == 3);
    CHECK(role_count(MotifKind::Hsm, 2) == 5);
    CHECK(role_count(MotifKind::Hsm, 3) == 7);
    CHECK(role_count(MotifKind::GcmUpper) == 3);
    CHECK(role_count(MotifKind::GcmLower) == 3);
    CHECK(role_count(MotifKind::Full) == 1);
}

TEST_CASE("default limb sets") {
    for (const auto& name : builtin_layout_names())
        CHECK_NOTHROW(default_limb_sets(name).validate(builtin_layout(name)->joints));
    CHECK_THROWS_AS(default_limb_sets("custom"), ValidationError);
}
