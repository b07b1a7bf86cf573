#include "hvq/kmeans.hpp"

#include <limits>
#include <random>

#include "hvq/error.hpp"

namespace hvq {

namespace {

double sq_dist(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

int nearest(const SeqTensor& centroids, const double* p) {
    int best = 0;
    double best_d = std::numeric_limits<double>::max();
    for (int c = 0; c < centroids.rows; ++c) {
        const double d = sq_dist(centroids.row(c), p, centroids.cols);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

}  // namespace

SeqTensor kmeans(const SeqTensor& points, int k, uint64_t seed, int max_iters) {
    if (k < 1) throw ConfigError("kmeans: k must be >= 1");
    if (points.rows < k) throw ConfigError("kmeans: fewer points than centroids");
    const int n = points.rows, dim = points.cols;
    std::mt19937_64 rng(seed);

    // k-means++ seeding
    SeqTensor centroids(k, dim);
    std::vector<double> d2(n, std::numeric_limits<double>::max());
    {
        std::uniform_int_distribution<int> pick(0, n - 1);
        int first = pick(rng);
        for (int c = 0; c < dim; ++c) centroids.at(0, c) = points.at(first, c);
    }
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_dist(points.row(i), centroids.row(c - 1), dim));
            total += d2[i];
        }
        int chosen = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> unit(0.0, total);
            double r = unit(rng);
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= r) {
                    chosen = i;
                    break;
                }
            }
        } else {
            std::uniform_int_distribution<int> pick(0, n - 1);
            chosen = pick(rng);
        }
        for (int j = 0; j < dim; ++j) centroids.at(c, j) = points.at(chosen, j);
    }

    std::vector<int> label(n, -1);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            const int a = nearest(centroids, points.row(i));
            if (a != label[i]) {
                label[i] = a;
                changed = true;
            }
        }
        if (!changed && iter > 0) break;

        SeqTensor sums(k, dim);
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) {
            double* s = sums.row(label[i]);
            const double* p = points.row(i);
            for (int j = 0; j < dim; ++j) s[j] += p[j];
            ++counts[label[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // take over the point farthest from its centroid
                int far = 0;
                double far_d = -1.0;
                for (int i = 0; i < n; ++i) {
                    const double d = sq_dist(points.row(i), centroids.row(label[i]), dim);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                for (int j = 0; j < dim; ++j) centroids.at(c, j) = points.at(far, j);
                label[far] = c;
                continue;
            }
            const double inv = 1.0 / counts[c];
            for (int j = 0; j < dim; ++j) centroids.at(c, j) = sums.at(c, j) * inv;
        }
    }
    return centroids;
}

SeqTensor kmeans_best(const SeqTensor& points, int k, uint64_t seed, int restarts,
                      int max_iters) {
    SeqTensor best;
    double best_wcss = std::numeric_limits<double>::max();
    for (int r = 0; r < restarts; ++r) {
        SeqTensor c = kmeans(points, k, seed + 0x51ed2701ULL * static_cast<uint64_t>(r), max_iters);
        const double wcss = kmeans_wcss(points, c);
        if (wcss < best_wcss) {
            best_wcss = wcss;
            best = std::move(c);
        }
    }
    return best;
}

double kmeans_wcss(const SeqTensor& points, const SeqTensor& centroids) {
    double total = 0.0;
    for (int i = 0; i < points.rows; ++i)
        total += sq_dist(points.row(i), centroids.row(nearest(centroids, points.row(i))),
                         points.cols);
    return total;
}

}  // namespace hvq
