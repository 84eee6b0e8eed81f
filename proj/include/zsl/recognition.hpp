#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "zsl/config.hpp"
#include "zsl/dataset.hpp"
#include "zsl/matrix.hpp"
#include "zsl/network.hpp"
#include "zsl/optimizer.hpp"
#include "zsl/rng.hpp"

namespace zsl {

// One-hidden-layer linear autoencoder d -> t -> d whose latent is pulled
// toward the class prototype.
struct ProjectionModel {
    Net enc;
    Net dec;
    double lambda = 1.0;
};

struct ProjectionConfig {
    std::size_t epochs = 200;
    std::size_t batch = 64;
    double lr = 1e-3;
    double lambda = 1.0;
    bool tied = false;
    std::uint64_t seed = 7;
};

// Mean squared reconstruction plus lambda-weighted pull of the latent code
// toward the labeled class row of `targets`. Fills per-net gradients when
// requested.
inline double projection_loss(const ProjectionModel& model, const Matrix& x,
                              const std::vector<int>& y, const Matrix& targets,
                              Grads* enc_grads = nullptr, Grads* dec_grads = nullptr) {
    std::size_t bs = x.rows;
    std::size_t t = targets.cols;
    if (y.size() != bs) throw std::invalid_argument("projection_loss: label count mismatch");
    for (int yi : y)
        if (yi < 0 || static_cast<std::size_t>(yi) >= targets.rows)
            throw std::invalid_argument("projection_loss: label outside target table");

    ForwardPass enc_fp = forward(model.enc, x);
    const Matrix& z = enc_fp.output();
    ForwardPass dec_fp = forward(model.dec, z);
    const Matrix& xhat = dec_fp.output();

    double inv_b = 1.0 / static_cast<double>(bs);
    double recon = 0.0;
    for (std::size_t i = 0; i < x.a.size(); ++i) {
        double dd = xhat.a[i] - x.a[i];
        recon += dd * dd;
    }
    double pull = 0.0;
    for (std::size_t i = 0; i < bs; ++i) {
        const double* p = targets.row(y[i]);
        const double* zi = z.row(i);
        for (std::size_t j = 0; j < t; ++j) {
            double dd = zi[j] - p[j];
            pull += dd * dd;
        }
    }
    double loss = (recon + model.lambda * pull) * inv_b;
    if (!enc_grads && !dec_grads) return loss;

    Matrix d_xhat(bs, x.cols);
    for (std::size_t i = 0; i < d_xhat.a.size(); ++i)
        d_xhat.a[i] = 2.0 * inv_b * (xhat.a[i] - x.a[i]);
    Grads gd;
    Matrix dz = backward(model.dec, dec_fp, d_xhat, gd);
    for (std::size_t i = 0; i < bs; ++i) {
        const double* p = targets.row(y[i]);
        double* dzi = dz.row(i);
        const double* zi = z.row(i);
        for (std::size_t j = 0; j < t; ++j)
            dzi[j] += 2.0 * model.lambda * inv_b * (zi[j] - p[j]);
    }
    if (enc_grads) {
        Grads ge;
        backward(model.enc, enc_fp, dz, ge);
        *enc_grads = std::move(ge);
    }
    if (dec_grads) *dec_grads = std::move(gd);
    return loss;
}

// targets: per-class semantic vectors, row-indexed by global class index.
inline ProjectionModel train_projection(const Matrix& train_x, const std::vector<int>& train_y,
                                        const Matrix& targets, const ProjectionConfig& cfg) {
    std::size_t d = train_x.cols;
    std::size_t t = targets.cols;
    if (t < 1) throw std::invalid_argument("train_projection: empty prototype targets");

    ProjectionModel model;
    model.lambda = cfg.lambda;
    Rng enc_rng = Rng::stream(cfg.seed, "proj-enc-init");
    Rng dec_rng = Rng::stream(cfg.seed, "proj-dec-init");
    model.enc = Net::glorot({{d, t, Act::linear}}, enc_rng);
    if (cfg.tied) {
        model.dec = Net::glorot({{t, d, Act::linear}}, dec_rng);
        model.dec.W[0] = transpose(model.enc.W[0]);
    } else {
        model.dec = Net::glorot({{t, d, Act::linear}}, dec_rng);
    }

    if (cfg.epochs == 0) return model;

    Adam opt_enc(model.enc, cfg.lr);
    Adam opt_dec(model.dec, cfg.lr);
    Rng shuffle_rng = Rng::stream(cfg.seed, "proj-shuffle");

    std::size_t l = train_x.rows;
    std::vector<std::size_t> order(l);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < l; start += cfg.batch) {
            std::size_t bs = std::min(cfg.batch, l - start);
            Matrix xb(bs, d);
            std::vector<int> yb(bs);
            for (std::size_t i = 0; i < bs; ++i) {
                const double* src = train_x.row(order[start + i]);
                std::copy(src, src + d, xb.row(i));
                yb[i] = train_y[order[start + i]];
            }

            Grads ge, gd;
            double loss = projection_loss(model, xb, yb, targets, &ge, &gd);
            if (!std::isfinite(loss))
                throw std::runtime_error("train_projection: non-finite loss at epoch " +
                                         std::to_string(epoch + 1));

            if (cfg.tied) {
                // Shared weight: fold both contributions into the encoder
                // parameter and mirror it after the step.
                Matrix dec_contrib = transpose(gd.dW[0]);
                for (std::size_t i = 0; i < ge.dW[0].a.size(); ++i)
                    ge.dW[0].a[i] += dec_contrib.a[i];
                opt_enc.update(model.enc, ge);
                Grads bias_only = gd;
                bias_only.dW[0].fill(0.0);
                opt_dec.update(model.dec, bias_only);
                model.dec.W[0] = transpose(model.enc.W[0]);
            } else {
                opt_enc.update(model.enc, ge);
                opt_dec.update(model.dec, gd);
            }
        }
    }
    return model;
}

inline Matrix project(const ProjectionModel& model, const Matrix& x) {
    return forward(model.enc, x).output();
}

inline double prototype_distance(const double* e, const double* p, std::size_t t, Metric metric) {
    if (metric == Metric::euclidean) return euclidean_distance(e, p, t);
    double ne = norm2(e, t);
    double np = norm2(p, t);
    if (ne == 0.0)
        throw std::runtime_error("cosine distance undefined for zero-norm embedding");
    if (np == 0.0)
        throw std::runtime_error("cosine distance undefined for zero-norm prototype");
    return 1.0 - dot(e, p, t) / (ne * np);
}

// Index (into `protos` rows) of the nearest prototype; ties go to the lower
// index.
inline std::size_t nearest_prototype(const double* embedding, const Matrix& protos,
                                     Metric metric) {
    if (protos.rows == 0) throw std::invalid_argument("nearest_prototype: empty prototype set");
    std::size_t best = 0;
    double best_d = prototype_distance(embedding, protos.row(0), protos.cols, metric);
    for (std::size_t j = 1; j < protos.rows; ++j) {
        double d = prototype_distance(embedding, protos.row(j), protos.cols, metric);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

// Nearest-prototype label for one example; `protos_unseen` rows follow the
// unseen class ordering and the returned value is a position in it.
inline std::size_t classify(const ProjectionModel& model, const double* x, std::size_t d,
                            const Matrix& protos_unseen, Metric metric) {
    Matrix one(1, d);
    std::copy(x, x + d, one.row(0));
    Matrix e = project(model, one);
    return nearest_prototype(e.row(0), protos_unseen, metric);
}

struct EvaluationReport {
    std::vector<double> hit_at_k;     // index 0 = Hit@1
    Matrix confusion;                 // v x v, rows = truth, cols = prediction
    std::vector<double> per_class;    // per-class accuracy, unseen order
    std::vector<long long> per_class_total;
};

// Rank-based evaluation over the unseen prototype rows. `test_y_local` holds
// positions into the unseen ordering.
inline EvaluationReport evaluate_unseen(const Matrix& embeddings,
                                        const std::vector<int>& test_y_local,
                                        const Matrix& protos_unseen, Metric metric,
                                        std::size_t hit_max) {
    std::size_t v = protos_unseen.rows;
    if (embeddings.rows == 0) throw std::invalid_argument("evaluate_unseen: empty test set");
    if (hit_max < 1 || hit_max > v)
        throw std::invalid_argument("evaluate_unseen: hit_max must be in [1, v]");

    EvaluationReport rep;
    rep.hit_at_k.assign(hit_max, 0.0);
    rep.confusion = Matrix(v, v, 0.0);
    rep.per_class.assign(v, 0.0);
    rep.per_class_total.assign(v, 0);

    std::vector<double> dist(v);
    for (std::size_t i = 0; i < embeddings.rows; ++i) {
        const double* e = embeddings.row(i);
        for (std::size_t j = 0; j < v; ++j)
            dist[j] = prototype_distance(e, protos_unseen.row(j), protos_unseen.cols, metric);
        int truth = test_y_local[i];

        std::size_t pred = 0;
        double best = dist[0];
        for (std::size_t j = 1; j < v; ++j)
            if (dist[j] < best) {
                best = dist[j];
                pred = j;
            }
        rep.confusion(truth, pred) += 1.0;
        ++rep.per_class_total[truth];

        // rank of the true class under the tie rule (lower index wins)
        std::size_t rank = 1;
        for (std::size_t j = 0; j < v; ++j) {
            if (static_cast<int>(j) == truth) continue;
            if (dist[j] < dist[truth] ||
                (dist[j] == dist[truth] && j < static_cast<std::size_t>(truth)))
                ++rank;
        }
        for (std::size_t k = rank; k <= hit_max; ++k) rep.hit_at_k[k - 1] += 1.0;
    }

    // Divide rather than multiply by a reciprocal: Hit@1 must equal
    // trace(confusion)/total bit for bit.
    double total = static_cast<double>(embeddings.rows);
    for (double& h : rep.hit_at_k) h /= total;
    for (std::size_t c = 0; c < v; ++c)
        if (rep.per_class_total[c] > 0)
            rep.per_class[c] = rep.confusion(c, c) / static_cast<double>(rep.per_class_total[c]);
    return rep;
}

}  // namespace zsl
