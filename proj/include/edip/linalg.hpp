#pragma once

#include <cstdint>
#include <vector>

#include "edip/error.hpp"

namespace edip {

// Minimal dense row-major matrix for the small factorizations used here.
struct Matrix {
    int64_t rows = 0;
    int64_t cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int64_t r, int64_t c) : rows(r), cols(c), a(static_cast<size_t>(r * c), 0.0) {}
    double& at(int64_t i, int64_t j) { return a[i * cols + j]; }
    double at(int64_t i, int64_t j) const { return a[i * cols + j]; }
};

Matrix matmul(const Matrix& x, const Matrix& y);
Matrix transpose(const Matrix& x);

// Thin Q (rows x cols) of a tall matrix via Householder reflections.
// Throws when a diagonal of R is (numerically) zero, i.e. rank deficiency.
Matrix householder_q(const Matrix& m, double rank_tol = 1e-12);

// Cyclic Jacobi for a symmetric matrix; eigenvalues descending,
// eigenvectors as columns of the returned matrix.
void jacobi_eigh(Matrix s, std::vector<double>& eigenvalues, Matrix& eigenvectors);

// Dense SVD through the Gram matrix of the smaller side. Returns singular
// values descending; when right_vectors is non-null it receives the right
// singular vectors as rows (k x cols).
std::vector<double> dense_svd(const Matrix& m, Matrix* right_vectors = nullptr);

}  // namespace edip
