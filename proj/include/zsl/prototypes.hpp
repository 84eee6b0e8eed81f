#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "zsl/dataset.hpp"
#include "zsl/expansion.hpp"
#include "zsl/matrix.hpp"

namespace zsl {

// Per-seen-class mean of the latent vectors, rows in seen class-list order.
inline Matrix expand_seen_prototypes(const ExpansionModel& model, const Matrix& train_x,
                                     const std::vector<int>& train_y,
                                     const ClassList& classes) {
    Matrix latents = encode_examples(model, train_x);
    auto seen = classes.seen_indices();
    std::vector<int> pos(classes.ids.size(), -1);
    for (std::size_t i = 0; i < seen.size(); ++i) pos[seen[i]] = static_cast<int>(i);

    Matrix means(seen.size(), latents.cols, 0.0);
    std::vector<long long> counts(seen.size(), 0);
    for (std::size_t i = 0; i < latents.rows; ++i) {
        int p = pos[train_y[i]];
        if (p < 0) throw std::runtime_error("expand_seen_prototypes: unseen label in training set");
        double* row = means.row(p);
        const double* z = latents.row(i);
        for (std::size_t j = 0; j < latents.cols; ++j) row[j] += z[j];
        ++counts[p];
    }
    for (std::size_t r = 0; r < means.rows; ++r) {
        if (counts[r] == 0)
            throw std::runtime_error("expand_seen_prototypes: class '" +
                                     classes.ids[seen[r]] + "' has no examples");
        double inv = 1.0 / static_cast<double>(counts[r]);
        double* row = means.row(r);
        for (std::size_t j = 0; j < means.cols; ++j) row[j] *= inv;
    }
    return means;
}

inline std::vector<double> concat_prototype(const std::vector<double>& predefined,
                                            const std::vector<double>& expanded) {
    std::vector<double> out;
    out.reserve(predefined.size() + expanded.size());
    out.insert(out.end(), predefined.begin(), predefined.end());
    out.insert(out.end(), expanded.begin(), expanded.end());
    return out;
}

// Indices (into seen rows) of the g nearest seen prototypes by Euclidean
// distance; ties broken by ascending index.
inline std::vector<int> nearest_seen_neighbors(const double* unseen_proto, const Matrix& seen,
                                               std::size_t g) {
    if (g < 1 || g > seen.rows)
        throw std::invalid_argument("nearest_seen_neighbors: g must be in [1, m]");
    std::vector<std::pair<double, int>> by_dist(seen.rows);
    for (std::size_t i = 0; i < seen.rows; ++i)
        by_dist[i] = {euclidean_distance(unseen_proto, seen.row(i), seen.cols),
                      static_cast<int>(i)};
    std::sort(by_dist.begin(), by_dist.end());
    std::vector<int> out(g);
    for (std::size_t i = 0; i < g; ++i) out[i] = by_dist[i].second;
    return out;
}

struct NeighborSolution {
    std::vector<int> ids;       // seen-row indices
    std::vector<double> theta;  // length g
    double residual = 0.0;
};

namespace detail {

// Cholesky solve of G theta = rhs; returns false when a pivot collapses.
inline bool cholesky_solve(Matrix G, std::vector<double> rhs, std::vector<double>& out) {
    std::size_t g = G.rows;
    double max_diag = 0.0;
    for (std::size_t i = 0; i < g; ++i) max_diag = std::max(max_diag, std::fabs(G(i, i)));
    for (std::size_t j = 0; j < g; ++j) {
        double d = G(j, j);
        for (std::size_t p = 0; p < j; ++p) d -= G(j, p) * G(j, p);
        if (d <= 1e-12 * std::max(1.0, max_diag)) return false;
        d = std::sqrt(d);
        G(j, j) = d;
        for (std::size_t i = j + 1; i < g; ++i) {
            double s = G(i, j);
            for (std::size_t p = 0; p < j; ++p) s -= G(i, p) * G(j, p);
            G(i, j) = s / d;
        }
    }
    for (std::size_t i = 0; i < g; ++i) {
        double s = rhs[i];
        for (std::size_t p = 0; p < i; ++p) s -= G(i, p) * rhs[p];
        rhs[i] = s / G(i, i);
    }
    out.assign(g, 0.0);
    for (std::size_t i = g; i-- > 0;) {
        double s = rhs[i];
        for (std::size_t p = i + 1; p < g; ++p) s -= G(p, i) * out[p];
        out[i] = s / G(i, i);
    }
    return true;
}

}  // namespace detail

// Least squares min_theta ||u - theta^T N|| by normal equations. Plain
// Cholesky first; a trace-scaled ridge only when the Gram matrix is
// degenerate, so exact combinations are recovered exactly.
inline NeighborSolution solve_theta(const double* unseen_proto, const Matrix& neighbors) {
    std::size_t g = neighbors.rows;
    std::size_t n = neighbors.cols;
    Matrix G = matmul_nt(neighbors, neighbors);
    std::vector<double> rhs(g);
    for (std::size_t i = 0; i < g; ++i) rhs[i] = dot(neighbors.row(i), unseen_proto, n);

    NeighborSolution sol;
    if (!detail::cholesky_solve(G, rhs, sol.theta)) {
        double trace = 0.0;
        for (std::size_t i = 0; i < g; ++i) trace += G(i, i);
        double ridge = 1e-8 * (trace > 0.0 ? trace / static_cast<double>(g) : 1.0);
        for (std::size_t i = 0; i < g; ++i) G(i, i) += ridge;
        if (!detail::cholesky_solve(G, rhs, sol.theta))
            throw std::runtime_error("solve_theta: normal equations unsolvable");
    }

    std::vector<double> recon(n, 0.0);
    for (std::size_t i = 0; i < g; ++i) {
        const double* ni = neighbors.row(i);
        for (std::size_t j = 0; j < n; ++j) recon[j] += sol.theta[i] * ni[j];
    }
    sol.residual = euclidean_distance(unseen_proto, recon.data(), n);
    return sol;
}

inline std::vector<double> expand_unseen_prototype(const NeighborSolution& sol,
                                                   const Matrix& seen_expanded) {
    std::vector<double> out(seen_expanded.cols, 0.0);
    for (std::size_t i = 0; i < sol.ids.size(); ++i) {
        int id = sol.ids[i];
        if (id < 0 || id >= static_cast<int>(seen_expanded.rows))
            throw std::invalid_argument("expand_unseen_prototype: neighbor id out of range");
        const double* row = seen_expanded.row(id);
        for (std::size_t j = 0; j < seen_expanded.cols; ++j) out[j] += sol.theta[i] * row[j];
    }
    return out;
}

// Seen rows get latent means, unseen rows get the g-nearest-neighbor
// least-squares combination of those means. k=0 leaves the table predefined
// only (expansion disabled).
inline PrototypeTable build_full_prototype_table(const PrototypeTable& base,
                                                 const ExpansionModel& model,
                                                 const Matrix& train_x,
                                                 const std::vector<int>& train_y, std::size_t g) {
    PrototypeTable table = base;
    if (model.k == 0) {
        table.expanded = Matrix(table.classes.ids.size(), 0);
        return table;
    }
    Matrix seen_exp = expand_seen_prototypes(model, train_x, train_y, table.classes);
    auto seen = table.classes.seen_indices();
    Matrix seen_pre(seen.size(), table.predefined.cols);
    for (std::size_t i = 0; i < seen.size(); ++i) {
        const double* src = table.predefined.row(seen[i]);
        std::copy(src, src + table.predefined.cols, seen_pre.row(i));
    }

    table.expanded = Matrix(table.classes.ids.size(), model.k, 0.0);
    for (std::size_t i = 0; i < seen.size(); ++i) {
        const double* src = seen_exp.row(i);
        std::copy(src, src + model.k, table.expanded.row(seen[i]));
    }
    for (int u : table.classes.unseen_indices()) {
        const double* up = table.predefined.row(u);
        NeighborSolution sol;
        sol.ids = nearest_seen_neighbors(up, seen_pre, g);
        Matrix nb(sol.ids.size(), seen_pre.cols);
        for (std::size_t i = 0; i < sol.ids.size(); ++i) {
            const double* src = seen_pre.row(sol.ids[i]);
            std::copy(src, src + seen_pre.cols, nb.row(i));
        }
        NeighborSolution solved = solve_theta(up, nb);
        solved.ids = sol.ids;
        std::vector<double> exp = expand_unseen_prototype(solved, seen_exp);
        std::copy(exp.begin(), exp.end(), table.expanded.row(u));
    }
    return table;
}

}  // namespace zsl
