#pragma once

#include "mocos/skeleton.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace mocos {

enum class Metric { Cosine, Euclidean };

Metric parse_metric(const std::string& s);
std::string to_string(Metric m);

/// p x g distances between probe and gallery rows.
Matrix match_distances(const Matrix& probe, const Matrix& gallery, Metric metric);

/// Gallery indices ordered by ascending distance; ties keep gallery order.
std::vector<std::size_t> ranked_gallery(std::span<const double> distances);

/// Rank-r accuracy for r = 1..max_rank (entry r-1).
std::vector<double> cmc(const Matrix& distances, std::span<const int> probe_labels,
                        std::span<const int> gallery_labels, std::size_t max_rank);

struct ApResult {
    double map = 0.0;
    std::vector<double> per_probe;
};

ApResult mean_average_precision(const Matrix& distances, std::span<const int> probe_labels,
                                std::span<const int> gallery_labels);

struct EvalReport {
    std::vector<double> rank_accuracy;   // ranks 1..R_max
    double map = 0.0;
    std::vector<double> per_probe_ap;
    Metric metric = Metric::Cosine;

    double rank(std::size_t r) const;
    /// "R1=<x> R5=<x> R10=<x> mAP=<x>"
    std::string summary() const;
};

EvalReport evaluate(const Matrix& probe, std::span<const int> probe_labels, const Matrix& gallery,
                    std::span<const int> gallery_labels, Metric metric);

} // namespace mocos
