#pragma once

#include "mocos/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mocos {

class Rng;

using Matrix = ad::Tensor;

/// Undirected edge between two 1-based joint indices.
using Edge = std::pair<int, int>;

struct JointLayout {
    std::string name;
    int joints = 0;
    std::vector<Edge> edges;

    /// Throws ValidationError on out-of-range endpoints, self-edges,
    /// duplicates, or a disconnected edge set.
    void validate() const;
};

/// 20 joints, Kinect v1 ordering (hip center = 1).
JointLayout kinect20_layout();
/// 25 joints, Kinect v2 ordering (spine base = 1).
JointLayout kinect25_layout();
/// 10-joint reduced body used by small synthetic runs.
JointLayout synthetic10_layout();

/// Looks up a built-in layout by name: "kinect20", "kinect25", "synthetic10".
std::optional<JointLayout> builtin_layout(const std::string& name);
std::vector<std::string> builtin_layout_names();

struct SkeletonSequence {
    std::string seq_id;
    int label = 0;
    /// frames x (joints*3), row-major: frame t, joint j, coordinate c at
    /// (t, 3*j + c).
    Matrix frames;

    std::size_t frame_count() const { return frames.rows(); }
    std::size_t joint_count() const { return frames.cols() / 3; }
    /// J x 3 coordinates of one frame.
    Matrix frame(std::size_t t) const;

    friend bool operator==(const SkeletonSequence&, const SkeletonSequence&) = default;
};

/// Symmetric 0/1 adjacency with zero diagonal.
Matrix build_adjacency(const JointLayout& layout);

/// I - D^{-1/2} A D^{-1/2}. Throws on an isolated node.
Matrix normalized_laplacian(const Matrix& adjacency);

struct EigenDecomposition {
    std::vector<double> values;   // ascending
    Matrix vectors;               // column k pairs with values[k]
    int sweeps = 0;
};

/// Cyclic Jacobi eigensolver for symmetric matrices up to 64x64.
///
/// Rotations continue until the off-diagonal Frobenius norm falls below
/// tol * ||M||_F. Raises ValidationError for non-symmetric input and
/// NumericError after 100 sweeps without convergence.
EigenDecomposition symmetric_eigen(const Matrix& m, double tol = 1e-13);

enum class PeSign { Deterministic, Random };

/// Eigenvectors of the normalized Laplacian for the K smallest strictly
/// positive eigenvalues, one per column, each with its first component of
/// magnitude > 1e-9 made positive.
Matrix positional_encoding(const Matrix& adjacency, int k);

/// Flips each PE column's sign with probability 1/2.
Matrix randomize_pe_signs(const Matrix& pe, Rng& rng);

/// Default encoding width: min(8, J - 1).
int default_pe_width(int joints);

struct SkeletonGraphContext {
    Matrix adjacency;
    Matrix laplacian;
    Matrix pe;
    int k = 0;

    int joints() const { return static_cast<int>(adjacency.rows()); }
};

SkeletonGraphContext make_graph_context(const JointLayout& layout, int k);

} // namespace mocos
