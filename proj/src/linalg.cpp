#include "edip/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace edip {

Matrix matmul(const Matrix& x, const Matrix& y) {
    if (x.cols != y.rows) throw ShapeError("matmul: incompatible matrix sizes");
    Matrix r(x.rows, y.cols);
    for (int64_t i = 0; i < x.rows; ++i)
        for (int64_t k = 0; k < x.cols; ++k) {
            const double v = x.at(i, k);
            if (v == 0.0) continue;
            for (int64_t j = 0; j < y.cols; ++j) r.at(i, j) += v * y.at(k, j);
        }
    return r;
}

Matrix transpose(const Matrix& x) {
    Matrix r(x.cols, x.rows);
    for (int64_t i = 0; i < x.rows; ++i)
        for (int64_t j = 0; j < x.cols; ++j) r.at(j, i) = x.at(i, j);
    return r;
}

Matrix householder_q(const Matrix& m, double rank_tol) {
    const int64_t rows = m.rows, cols = m.cols;
    if (rows < cols) throw ShapeError("householder_q: matrix must be tall");
    Matrix r = m;  // becomes R with reflectors stored below the diagonal
    std::vector<double> betas(static_cast<size_t>(cols));
    double max_diag = 0.0;
    for (int64_t k = 0; k < cols; ++k) {
        double norm = 0.0;
        for (int64_t i = k; i < rows; ++i) norm += r.at(i, k) * r.at(i, k);
        norm = std::sqrt(norm);
        const double alpha = r.at(k, k) >= 0 ? -norm : norm;
        const double v0 = r.at(k, k) - alpha;
        double vnorm_sq = v0 * v0;
        for (int64_t i = k + 1; i < rows; ++i) vnorm_sq += r.at(i, k) * r.at(i, k);
        if (vnorm_sq == 0.0) {
            betas[k] = 0.0;
            r.at(k, k) = alpha;
            max_diag = std::max(max_diag, std::abs(alpha));
            continue;
        }
        betas[k] = 2.0 / vnorm_sq;
        r.at(k, k) = v0;  // store v in-place; diagonal of R is alpha
        for (int64_t j = k + 1; j < cols; ++j) {
            double dot = 0.0;
            for (int64_t i = k; i < rows; ++i) dot += r.at(i, k) * r.at(i, j);
            dot *= betas[k];
            for (int64_t i = k; i < rows; ++i) r.at(i, j) -= dot * r.at(i, k);
        }
        max_diag = std::max(max_diag, std::abs(alpha));
        if (std::abs(alpha) <= rank_tol * std::max(1.0, max_diag))
            throw Error("householder_q: rank-deficient input (zero R diagonal at column " +
                        std::to_string(k) + ")");
    }
    // form thin Q by applying reflectors to the first `cols` identity columns
    Matrix q(rows, cols);
    for (int64_t j = 0; j < cols; ++j) q.at(j, j) = 1.0;
    for (int64_t k = cols - 1; k >= 0; --k) {
        if (betas[k] == 0.0) continue;
        for (int64_t j = 0; j < cols; ++j) {
            double dot = 0.0;
            for (int64_t i = k; i < rows; ++i) dot += r.at(i, k) * q.at(i, j);
            dot *= betas[k];
            for (int64_t i = k; i < rows; ++i) q.at(i, j) -= dot * r.at(i, k);
        }
    }
    return q;
}

void jacobi_eigh(Matrix s, std::vector<double>& eigenvalues, Matrix& eigenvectors) {
    if (s.rows != s.cols) throw ShapeError("jacobi_eigh: matrix must be square");
    const int64_t n = s.rows;
    Matrix v(n, n);
    for (int64_t i = 0; i < n; ++i) v.at(i, i) = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = i + 1; j < n; ++j) off += s.at(i, j) * s.at(i, j);
        if (off < 1e-28 * static_cast<double>(n * n)) break;
        for (int64_t p = 0; p < n; ++p)
            for (int64_t q = p + 1; q < n; ++q) {
                const double apq = s.at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double app = s.at(p, p), aqq = s.at(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t), sn = t * c;
                for (int64_t k = 0; k < n; ++k) {
                    const double skp = s.at(k, p), skq = s.at(k, q);
                    s.at(k, p) = c * skp - sn * skq;
                    s.at(k, q) = sn * skp + c * skq;
                }
                for (int64_t k = 0; k < n; ++k) {
                    const double spk = s.at(p, k), sqk = s.at(q, k);
                    s.at(p, k) = c * spk - sn * sqk;
                    s.at(q, k) = sn * spk + c * sqk;
                }
                for (int64_t k = 0; k < n; ++k) {
                    const double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - sn * vkq;
                    v.at(k, q) = sn * vkp + c * vkq;
                }
            }
    }
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int64_t a, int64_t b) { return s.at(a, a) > s.at(b, b); });
    eigenvalues.resize(static_cast<size_t>(n));
    eigenvectors = Matrix(n, n);
    for (int64_t j = 0; j < n; ++j) {
        eigenvalues[j] = s.at(order[j], order[j]);
        for (int64_t i = 0; i < n; ++i) eigenvectors.at(i, j) = v.at(i, order[j]);
    }
}

std::vector<double> dense_svd(const Matrix& m, Matrix* right_vectors) {
    const bool wide = m.cols > m.rows;
    // Gram matrix of the smaller side
    const Matrix mt = transpose(m);
    const Matrix& small = wide ? m : mt;   // k x big
    const Matrix& smallt = wide ? mt : m;  // big x k
    Matrix g = matmul(small, smallt);      // k x k
    std::vector<double> lambda;
    Matrix w;
    jacobi_eigh(std::move(g), lambda, w);
    const int64_t k = small.rows;
    std::vector<double> sigma(static_cast<size_t>(k));
    for (int64_t i = 0; i < k; ++i) sigma[i] = std::sqrt(std::max(0.0, lambda[i]));
    if (right_vectors) {
        Matrix vt(k, m.cols);
        if (wide) {
            // rows of M: G = M M^T, eigenvectors w are left vectors; v = M^T w / sigma
            for (int64_t j = 0; j < k; ++j) {
                for (int64_t c = 0; c < m.cols; ++c) {
                    double acc = 0.0;
                    for (int64_t i = 0; i < m.rows; ++i) acc += m.at(i, c) * w.at(i, j);
                    vt.at(j, c) = sigma[j] > 0 ? acc / sigma[j] : 0.0;
                }
            }
        } else {
            // G = M^T M; eigenvectors are right singular vectors directly
            for (int64_t j = 0; j < k; ++j)
                for (int64_t c = 0; c < k; ++c) vt.at(j, c) = w.at(c, j);
        }
        *right_vectors = std::move(vt);
    }
    return sigma;
}

}  // namespace edip
