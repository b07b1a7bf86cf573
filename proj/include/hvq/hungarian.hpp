#pragma once

#include <vector>

namespace hvq {

// Maximum-weight perfect matching on a square matrix: returns col[row].
// O(n^3) augmenting-path algorithm with potentials.
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight);

}  // namespace hvq
