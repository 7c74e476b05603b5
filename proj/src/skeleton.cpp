#include "mocos/skeleton.hpp"

#include "mocos/errors.hpp"
#include "mocos/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace mocos {

namespace {

constexpr int kMaxSweeps = 100;
constexpr std::size_t kMaxEigenOrder = 64;
constexpr double kSignThreshold = 1e-9;
constexpr double kZeroEigenvalue = 1e-9;

} // namespace

void JointLayout::validate() const {
    if (joints < 2) throw ValidationError("layout '" + name + "': joint count must be >= 2");
    std::set<std::pair<int, int>> seen;
    std::vector<int> parent(static_cast<std::size_t>(joints));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& [a, b] : edges) {
        const std::string e = std::to_string(a) + "-" + std::to_string(b);
        if (a < 1 || a > joints || b < 1 || b > joints)
            throw ValidationError("layout '" + name + "': edge " + e + " outside [1, " +
                                  std::to_string(joints) + "]");
        if (a == b) throw ValidationError("layout '" + name + "': self-edge " + e);
        if (!seen.emplace(std::min(a, b), std::max(a, b)).second)
            throw ValidationError("layout '" + name + "': duplicate edge " + e);
        parent[find(a - 1)] = find(b - 1);
    }
    for (int j = 1; j < joints; ++j)
        if (find(j) != find(0))
            throw ValidationError("layout '" + name + "': joint " + std::to_string(j + 1) +
                                  " is not connected to joint 1");
}

JointLayout kinect20_layout() {
    return {"kinect20",
            20,
            {{1, 2}, {2, 3}, {3, 4}, {3, 5}, {5, 6}, {6, 7}, {7, 8}, {3, 9}, {9, 10}, {10, 11},
             {11, 12}, {1, 13}, {13, 14}, {14, 15}, {15, 16}, {1, 17}, {17, 18}, {18, 19}, {19, 20}}};
}

JointLayout kinect25_layout() {
    return {"kinect25",
            25,
            {{1, 2},   {2, 21},  {21, 3},  {3, 4},   {21, 5},  {5, 6},   {6, 7},   {7, 8},
             {8, 22},  {7, 23},  {21, 9},  {9, 10},  {10, 11}, {11, 12}, {12, 24}, {11, 25},
             {1, 13},  {13, 14}, {14, 15}, {15, 16}, {1, 17},  {17, 18}, {18, 19}, {19, 20}}};
}

JointLayout synthetic10_layout() {
    // pelvis, chest, l-elbow, l-hand, r-elbow, r-hand, l-knee, l-foot, r-knee, r-foot
    return {"synthetic10",
            10,
            {{1, 2}, {2, 3}, {3, 4}, {2, 5}, {5, 6}, {1, 7}, {7, 8}, {1, 9}, {9, 10}}};
}

std::optional<JointLayout> builtin_layout(const std::string& name) {
    if (name == "kinect20") return kinect20_layout();
    if (name == "kinect25") return kinect25_layout();
    if (name == "synthetic10") return synthetic10_layout();
    return std::nullopt;
}

std::vector<std::string> builtin_layout_names() { return {"kinect20", "kinect25", "synthetic10"}; }

Matrix SkeletonSequence::frame(std::size_t t) const {
    const std::size_t j = joint_count();
    Matrix out = Matrix::matrix(j, 3);
    std::copy(frames.row_span(t).begin(), frames.row_span(t).end(), out.data().begin());
    return out;
}

Matrix build_adjacency(const JointLayout& layout) {
    layout.validate();
    const auto n = static_cast<std::size_t>(layout.joints);
    Matrix a = Matrix::matrix(n, n);
    for (const auto& [i, j] : layout.edges) {
        a(i - 1, j - 1) = 1.0;
        a(j - 1, i - 1) = 1.0;
    }
    return a;
}

Matrix normalized_laplacian(const Matrix& adjacency) {
    const std::size_t n = adjacency.rows();
    if (adjacency.cols() != n) throw ValidationError("normalized_laplacian: adjacency must be square");
    std::vector<double> inv_sqrt_deg(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < n; ++j) d += adjacency(i, j);
        if (d <= 0.0)
            throw ValidationError("normalized_laplacian: joint " + std::to_string(i + 1) +
                                  " is isolated");
        inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
    }
    Matrix l = Matrix::matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            l(i, j) = (i == j ? 1.0 : 0.0) - inv_sqrt_deg[i] * adjacency(i, j) * inv_sqrt_deg[j];
    return l;
}

EigenDecomposition symmetric_eigen(const Matrix& m, double tol) {
    const std::size_t n = m.rows();
    if (m.cols() != n) throw ValidationError("symmetric_eigen: matrix must be square, got " + m.shape_str());
    if (n == 0 || n > kMaxEigenOrder)
        throw ValidationError("symmetric_eigen: order must be in [1, 64], got " + std::to_string(n));

    double norm = 0.0;
    for (double v : m.data()) norm += v * v;
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(m(i, j) - m(j, i)) > 1e-12 * std::max(1.0, norm))
                throw ValidationError("symmetric_eigen: matrix is not symmetric at (" +
                                      std::to_string(i + 1) + ", " + std::to_string(j + 1) + ")");

    Matrix a = m;
    Matrix v = Matrix::matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) s += a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    const double threshold = tol * norm;
    int sweep = 0;
    for (; off_norm() > threshold; ++sweep) {
        if (sweep == kMaxSweeps)
            throw NumericError("symmetric_eigen: no convergence after 100 sweeps");
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t;
                if (std::abs(theta) > 1e150) {
                    t = 0.5 / theta;
                } else {
                    t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    if (theta < 0.0) t = -t;
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = a(p, k) = c * akp - s * akq;
                    a(k, q) = a(q, k) = s * akp + c * akq;
                }
                a(p, p) -= t * apq;
                a(q, q) += t * apq;
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

    EigenDecomposition out;
    out.sweeps = sweep;
    out.vectors = Matrix::matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.values.push_back(a(order[k], order[k]));
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

int default_pe_width(int joints) { return std::min(8, joints - 1); }

Matrix positional_encoding(const Matrix& adjacency, int k) {
    const auto j = static_cast<int>(adjacency.rows());
    if (k < 1 || k >= j)
        throw ValidationError("positional_encoding: K must be in [1, " + std::to_string(j - 1) +
                              "], got " + std::to_string(k));
    const EigenDecomposition eig = symmetric_eigen(normalized_laplacian(adjacency));

    Matrix pe = Matrix::matrix(static_cast<std::size_t>(j), static_cast<std::size_t>(k));
    std::size_t col = 0;
    for (std::size_t e = 0; e < eig.values.size() && col < static_cast<std::size_t>(k); ++e) {
        if (eig.values[e] <= kZeroEigenvalue) continue;
        double sign = 1.0;
        for (std::size_t i = 0; i < static_cast<std::size_t>(j); ++i) {
            if (std::abs(eig.vectors(i, e)) > kSignThreshold) {
                sign = eig.vectors(i, e) > 0.0 ? 1.0 : -1.0;
                break;
            }
        }
        for (std::size_t i = 0; i < static_cast<std::size_t>(j); ++i) pe(i, col) = sign * eig.vectors(i, e);
        ++col;
    }
    if (col < static_cast<std::size_t>(k))
        throw ValidationError("positional_encoding: graph has only " + std::to_string(col) +
                              " non-trivial eigenvectors");
    return pe;
}

Matrix randomize_pe_signs(const Matrix& pe, Rng& rng) {
    Matrix out = pe;
    for (std::size_t c = 0; c < pe.cols(); ++c)
        if (rng.bernoulli(0.5))
            for (std::size_t r = 0; r < pe.rows(); ++r) out(r, c) = -out(r, c);
    return out;
}

SkeletonGraphContext make_graph_context(const JointLayout& layout, int k) {
    SkeletonGraphContext ctx;
    ctx.adjacency = build_adjacency(layout);
    ctx.laplacian = normalized_laplacian(ctx.adjacency);
    ctx.pe = positional_encoding(ctx.adjacency, k);
    ctx.k = k;
    return ctx;
}

} // namespace mocos
