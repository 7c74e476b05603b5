#include "mocos/reid_eval.hpp"

#include "mocos/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace mocos {

namespace {

void check_labels(std::span<const int> probe_labels, std::span<const int> gallery_labels, const Matrix& d) {
    if (d.rows() != probe_labels.size() || d.cols() != gallery_labels.size())
        throw ValidationError("distance matrix " + d.shape_str() + " does not match " +
                              std::to_string(probe_labels.size()) + " probes and " +
                              std::to_string(gallery_labels.size()) + " gallery items");
    if (gallery_labels.empty()) throw ValidationError("gallery is empty");
    for (std::size_t i = 0; i < probe_labels.size(); ++i)
        if (std::find(gallery_labels.begin(), gallery_labels.end(), probe_labels[i]) == gallery_labels.end())
            throw ValidationError("probe " + std::to_string(i + 1) + " has label " + std::to_string(probe_labels[i]) +
                                  " absent from the gallery");
}

} // namespace

Metric parse_metric(const std::string& s) {
    if (s == "cosine") return Metric::Cosine;
    if (s == "euclidean") return Metric::Euclidean;
    throw ValidationError("metric must be cosine or euclidean, got '" + s + "'");
}

std::string to_string(Metric m) { return m == Metric::Cosine ? "cosine" : "euclidean"; }

Matrix match_distances(const Matrix& probe, const Matrix& gallery, Metric metric) {
    if (probe.cols() != gallery.cols())
        throw ValidationError("match_distances: probe " + probe.shape_str() + " and gallery " + gallery.shape_str() +
                              " differ in width");
    if (gallery.rows() == 0 || gallery.empty()) throw ValidationError("match_distances: empty gallery");
    const std::size_t p = probe.rows(), g = gallery.rows(), d = probe.cols();
    Matrix out = Matrix::matrix(p, g);
    std::vector<double> gnorm(g);
    for (std::size_t j = 0; j < g; ++j) {
        double s = 0.0;
        for (double v : gallery.row_span(j)) s += v * v;
        gnorm[j] = std::sqrt(s);
        if (metric == Metric::Cosine && gnorm[j] == 0.0)
            throw ValidationError("match_distances: gallery row " + std::to_string(j + 1) + " has zero norm");
    }
    for (std::size_t i = 0; i < p; ++i) {
        double pn = 0.0;
        for (double v : probe.row_span(i)) pn += v * v;
        pn = std::sqrt(pn);
        if (metric == Metric::Cosine && pn == 0.0)
            throw ValidationError("match_distances: probe row " + std::to_string(i + 1) + " has zero norm");
        for (std::size_t j = 0; j < g; ++j) {
            if (metric == Metric::Cosine) {
                double dot = 0.0;
                for (std::size_t c = 0; c < d; ++c) dot += probe(i, c) * gallery(j, c);
                out(i, j) = 1.0 - dot / (pn * gnorm[j]);
            } else {
                double s = 0.0;
                for (std::size_t c = 0; c < d; ++c) s += (probe(i, c) - gallery(j, c)) * (probe(i, c) - gallery(j, c));
                out(i, j) = std::sqrt(s);
            }
        }
    }
    return out;
}

std::vector<std::size_t> ranked_gallery(std::span<const double> distances) {
    std::vector<std::size_t> order(distances.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return distances[a] < distances[b]; });
    return order;
}

std::vector<double> cmc(const Matrix& distances, std::span<const int> probe_labels,
                        std::span<const int> gallery_labels, std::size_t max_rank) {
    check_labels(probe_labels, gallery_labels, distances);
    if (max_rank < 1) throw ValidationError("cmc: max rank must be >= 1");
    std::vector<double> hits(max_rank, 0.0);
    for (std::size_t i = 0; i < probe_labels.size(); ++i) {
        const auto order = ranked_gallery(distances.row_span(i));
        std::size_t first = 0;
        while (gallery_labels[order[first]] != probe_labels[i]) ++first;
        for (std::size_t r = first; r < max_rank; ++r) hits[r] += 1.0;
    }
    if (!probe_labels.empty())
        for (double& h : hits) h /= static_cast<double>(probe_labels.size());
    return hits;
}

ApResult mean_average_precision(const Matrix& distances, std::span<const int> probe_labels,
                                std::span<const int> gallery_labels) {
    check_labels(probe_labels, gallery_labels, distances);
    ApResult out;
    for (std::size_t i = 0; i < probe_labels.size(); ++i) {
        const auto order = ranked_gallery(distances.row_span(i));
        double found = 0.0, total = 0.0;
        for (std::size_t r = 0; r < order.size(); ++r) {
            if (gallery_labels[order[r]] != probe_labels[i]) continue;
            found += 1.0;
            total += found / static_cast<double>(r + 1);
        }
        out.per_probe.push_back(total / found);
    }
    if (!out.per_probe.empty())
        out.map = std::accumulate(out.per_probe.begin(), out.per_probe.end(), 0.0) /
                  static_cast<double>(out.per_probe.size());
    return out;
}

double EvalReport::rank(std::size_t r) const {
    if (rank_accuracy.empty()) return 0.0;
    return rank_accuracy[std::min(r, rank_accuracy.size()) - 1];
}

std::string EvalReport::summary() const {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "R1=%.6f R5=%.6f R10=%.6f mAP=%.6f", rank(1), rank(5), rank(10), map);
    return buf;
}

EvalReport evaluate(const Matrix& probe, std::span<const int> probe_labels, const Matrix& gallery,
                    std::span<const int> gallery_labels, Metric metric) {
    const Matrix d = match_distances(probe, gallery, metric);
    EvalReport report;
    report.metric = metric;
    report.rank_accuracy = cmc(d, probe_labels, gallery_labels, gallery_labels.size());
    ApResult ap = mean_average_precision(d, probe_labels, gallery_labels);
    report.map = ap.map;
    report.per_probe_ap = std::move(ap.per_probe);
    return report;
}

} // namespace mocos
