#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "zsl/matrix.hpp"

namespace zsl {

inline Matrix pairwise_distance_matrix(const Matrix& centers) {
    if (!centers.all_finite())
        throw std::invalid_argument("pairwise_distance_matrix: non-finite input");
    std::size_t m = centers.rows;
    Matrix D(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            double d = euclidean_distance(centers.row(i), centers.row(j), centers.cols);
            D(i, j) = d;
            D(j, i) = d;
        }
    return D;
}

// b_ij = -1/2 (d2_ij - d2_i. - d2_.j + d2_..)
inline Matrix double_center(const Matrix& D) {
    std::size_t m = D.rows;
    if (D.cols != m) throw std::invalid_argument("double_center: matrix must be square");
    Matrix D2(m, m);
    for (std::size_t i = 0; i < m * m; ++i) D2.a[i] = D.a[i] * D.a[i];

    std::vector<double> row_mean(m, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += D2(i, j);
        row_mean[i] = s / static_cast<double>(m);
        grand += s;
    }
    grand /= static_cast<double>(m * m);

    Matrix B(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            B(i, j) = -0.5 * (D2(i, j) - row_mean[i] - row_mean[j] + grand);
    return B;
}

// Cyclic Jacobi eigendecomposition for symmetric matrices. Eigenvalues come
// out sorted descending; eigenvectors are the columns of V, each with its
// first largest-magnitude entry made nonnegative so results are reproducible.
inline void symmetric_evd(const Matrix& A, std::vector<double>& eigenvalues, Matrix& eigenvectors) {
    std::size_t m = A.rows;
    if (A.cols != m) throw std::invalid_argument("symmetric_evd: matrix must be square");
    double scale = frobenius_norm(A);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            if (std::fabs(A(i, j) - A(j, i)) > 1e-9 * std::max(1.0, scale))
                throw std::invalid_argument("symmetric_evd: input not symmetric");

    Matrix W = A;
    Matrix V(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i) V(i, i) = 1.0;

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j) s += 2.0 * W(i, j) * W(i, j);
        return std::sqrt(s);
    };

    const double threshold = 1e-12 * std::max(1.0, scale);
    const int max_sweeps = 100;
    int sweep = 0;
    while (off_norm() > threshold) {
        if (++sweep > max_sweeps)
            throw std::runtime_error("symmetric_evd: no convergence after " +
                                     std::to_string(max_sweeps) +
                                     " sweeps, off-diagonal norm " + std::to_string(off_norm()));
        for (std::size_t p = 0; p + 1 < m; ++p) {
            for (std::size_t q = p + 1; q < m; ++q) {
                double apq = W(p, q);
                if (apq == 0.0) continue;
                double tau = (W(q, q) - W(p, p)) / (2.0 * apq);
                double t = (tau >= 0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = t * c;
                double app = W(p, p), aqq = W(q, q);
                W(p, p) = app - t * apq;
                W(q, q) = aqq + t * apq;
                W(p, q) = 0.0;
                W(q, p) = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    if (i != p && i != q) {
                        double wip = W(i, p), wiq = W(i, q);
                        W(i, p) = c * wip - s * wiq;
                        W(p, i) = W(i, p);
                        W(i, q) = s * wip + c * wiq;
                        W(q, i) = W(i, q);
                    }
                    double vip = V(i, p), viq = V(i, q);
                    V(i, p) = c * vip - s * viq;
                    V(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return W(x, x) > W(y, y); });

    eigenvalues.resize(m);
    eigenvectors = Matrix(m, m);
    for (std::size_t c = 0; c < m; ++c) {
        std::size_t src = order[c];
        eigenvalues[c] = W(src, src);
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < m; ++i) {
            double mag = std::fabs(V(i, src));
            if (mag > best) {
                best = mag;
                arg = i;
            }
        }
        double sign = V(arg, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < m; ++i) eigenvectors(i, c) = sign * V(i, src);
    }
}

struct EmbeddedManifold {
    Matrix coords;                   // target_dim x m; row i = sqrt(lambda_i) * v_i^T
    std::vector<double> eigenvalues; // descending, negatives clamped to zero
    std::size_t effective_rank = 0;
    std::size_t clamped = 0;         // eigenvalues below -1e-9 * max |lambda| (worth a warning)
};

// Assemble the manifold from an existing eigendecomposition; lets sweeps
// reuse one EVD across several target dims.
inline EmbeddedManifold embedding_from_evd(const std::vector<double>& evals, const Matrix& evecs,
                                           std::size_t target_dim) {
    std::size_t m = evecs.rows;

    double max_abs = 0.0;
    for (double l : evals) max_abs = std::max(max_abs, std::fabs(l));

    EmbeddedManifold out;
    out.eigenvalues = evals;
    for (double& l : out.eigenvalues) {
        if (l < 0.0) {
            if (l < -1e-9 * max_abs) ++out.clamped;
            l = 0.0;
        }
    }
    double max_eval = out.eigenvalues.empty() ? 0.0 : out.eigenvalues[0];
    double tol = 1e-10 * max_eval;
    for (double l : out.eigenvalues)
        if (l > tol) ++out.effective_rank;

    std::size_t keep = std::min(target_dim, out.effective_rank);
    out.coords = Matrix(target_dim, m, 0.0);
    for (std::size_t r = 0; r < keep; ++r) {
        double s = std::sqrt(out.eigenvalues[r]);
        for (std::size_t j = 0; j < m; ++j) out.coords(r, j) = s * evecs(j, r);
    }
    return out;
}

inline EmbeddedManifold extract_embedding(const Matrix& B, std::size_t target_dim) {
    std::vector<double> evals;
    Matrix evecs;
    symmetric_evd(B, evals, evecs);
    return embedding_from_evd(evals, evecs, target_dim);
}

}  // namespace zsl
