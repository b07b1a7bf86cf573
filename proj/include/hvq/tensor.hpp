#pragma once

#include <cstddef>
#include <vector>

namespace hvq {

// Row-major [rows x cols] matrix of doubles. Rows are frames, columns are
// channels, for every sequence-shaped buffer in this project.
struct SeqTensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    SeqTensor() = default;
    SeqTensor(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return data.size(); }
    bool same_shape(const SeqTensor& o) const { return rows == o.rows && cols == o.cols; }
    void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

bool all_finite(const SeqTensor& x);

double dot(const double* a, const double* b, int n);
double l2_norm(const double* v, int n);

// Cosine similarity; 0 when either vector has (near) zero norm.
double cosine(const double* a, const double* b, int n);

// Scales each row to unit l2 norm in place. Rows with norm below `eps` are
// left untouched. Returns the pre-normalization norms (needed for backward).
std::vector<double> l2_normalize_rows(SeqTensor& x, double eps = 1e-12);

// Backward of row normalization. `unit` is the normalized output, `norms`
// the values returned by l2_normalize_rows. Rows that were skipped at
// forward time (norm < eps) pass the gradient through unchanged.
SeqTensor l2_normalize_rows_backward(const SeqTensor& grad_unit, const SeqTensor& unit,
                                     const std::vector<double>& norms, double eps = 1e-12);

}  // namespace hvq
