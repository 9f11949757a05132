#pragma once

// Lloyd's k-means with k-means++ seeding. Shared by the clustering score and
// the twin's EM initialization.

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <span>
#include <vector>

#include "ppcoad/core.hpp"
#include "ppcoad/random.hpp"

namespace ppcoad {

using Point = std::vector<double>;

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

struct KMeansOptions {
    std::size_t k = 5;
    double tol = 1e-6;            // max centroid shift for convergence
    std::size_t max_iter = 300;
};

struct KMeansResult {
    std::vector<Point> centroids;
    std::vector<double> objective;  // within-cluster sum of squares after each assignment
    std::size_t iterations = 0;
    bool converged = false;
};

inline std::size_t count_distinct(std::span<const Point> pts) {
    std::set<Point> seen(pts.begin(), pts.end());
    return seen.size();
}

/// k-means++ seeding: first centroid uniform, the rest D^2-weighted.
inline std::vector<Point> kmeanspp_seed(std::span<const Point> pts, std::size_t k, Rng& rng) {
    std::vector<Point> centroids;
    centroids.reserve(k);
    centroids.push_back(pts[rng.index(pts.size())]);
    std::vector<double> d2(pts.size(), std::numeric_limits<double>::infinity());
    while (centroids.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            d2[i] = std::min(d2[i], squared_distance(pts[i], centroids.back()));
            total += d2[i];
        }
        // Only reachable when every point coincides with a centroid, which the
        // distinct-point check rules out.
        if (total <= 0.0) throw Error("k-means++ seeding ran out of distinct points");
        double r = rng.uniform() * total;
        std::size_t pick = pts.size() - 1;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            r -= d2[i];
            if (r < 0.0 && d2[i] > 0.0) {
                pick = i;
                break;
            }
        }
        while (d2[pick] <= 0.0) --pick;  // never reseed on an existing centroid
        centroids.push_back(pts[pick]);
    }
    return centroids;
}

inline std::size_t nearest_centroid(std::span<const Point> centroids, std::span<const double> x, double* dist2 = nullptr) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centroids.size(); ++j) {
        const double d = squared_distance(centroids[j], x);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    if (dist2) *dist2 = best_d;
    return best;
}

inline KMeansResult lloyd_kmeans(std::span<const Point> pts, const KMeansOptions& opt, Rng& rng) {
    if (opt.k == 0) throw Error("k-means needs k >= 1");
    if (pts.size() < opt.k) throw Error("k-means needs at least k points");
    const std::size_t distinct = count_distinct(pts);
    if (opt.k > distinct)
        throw Error("k-means: k = " + std::to_string(opt.k) + " exceeds the " + std::to_string(distinct) +
                    " distinct points, centroids would duplicate");

    const std::size_t d = pts.front().size();
    KMeansResult res;
    res.centroids = kmeanspp_seed(pts, opt.k, rng);
    std::vector<std::size_t> assign(pts.size(), 0);

    for (res.iterations = 0; res.iterations < opt.max_iter; ++res.iterations) {
        double obj = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double d2 = 0.0;
            assign[i] = nearest_centroid(res.centroids, pts[i], &d2);
            obj += d2;
        }
        res.objective.push_back(obj);

        std::vector<Point> sums(opt.k, Point(d, 0.0));
        std::vector<std::size_t> counts(opt.k, 0);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            for (std::size_t j = 0; j < d; ++j) sums[assign[i]][j] += pts[i][j];
            ++counts[assign[i]];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < opt.k; ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its centroid
            for (std::size_t j = 0; j < d; ++j) sums[c][j] /= static_cast<double>(counts[c]);
            shift = std::max(shift, std::sqrt(squared_distance(sums[c], res.centroids[c])));
            res.centroids[c] = std::move(sums[c]);
        }
        if (shift <= opt.tol) {
            res.converged = true;
            ++res.iterations;
            break;
        }
    }
    return res;
}

}  // namespace ppcoad
