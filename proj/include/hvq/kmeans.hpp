#pragma once

#include <cstdint>

#include "hvq/tensor.hpp"

namespace hvq {

// Lloyd's algorithm with k-means++ seeding, at most `max_iters` iterations.
// Empty clusters grab the point farthest from its centroid. Deterministic
// for a fixed seed. Requires points.rows >= k.
SeqTensor kmeans(const SeqTensor& points, int k, uint64_t seed, int max_iters = 100);

// Several independently seeded runs, keeping the lowest within-cluster sum
// of squares. Small point sets (clustering prototypes into prototypes) are
// sensitive to the seeding, so single-run k-means is not enough there.
SeqTensor kmeans_best(const SeqTensor& points, int k, uint64_t seed, int restarts = 10,
                      int max_iters = 100);

double kmeans_wcss(const SeqTensor& points, const SeqTensor& centroids);

}  // namespace hvq
