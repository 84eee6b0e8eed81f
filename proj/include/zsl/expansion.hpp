#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "zsl/config.hpp"
#include "zsl/dataset.hpp"
#include "zsl/matrix.hpp"
#include "zsl/mds.hpp"
#include "zsl/network.hpp"
#include "zsl/optimizer.hpp"
#include "zsl/rng.hpp"

namespace zsl {

struct ExpansionModel {
    Variant variant = Variant::ae;
    std::size_t k = 0;
    Net enc;  // d -> hidden -> k (AE) or 2k (VAE: mu then log-variance)
    Net dec;  // k -> hidden -> d
};

struct AlignmentContext {
    Matrix protos_seen;         // m x n, seen classes in class-list order
    Matrix O;                   // (n+k) x m manifold coordinates
    std::vector<int> seen_pos;  // global class index -> column of O, -1 for unseen
};

inline AlignmentContext build_alignment_context(const PrototypeTable& table,
                                                const EmbeddedManifold& manifold) {
    AlignmentContext ctx;
    auto seen = table.classes.seen_indices();
    ctx.protos_seen = Matrix(seen.size(), table.predefined.cols);
    ctx.seen_pos.assign(table.classes.ids.size(), -1);
    for (std::size_t i = 0; i < seen.size(); ++i) {
        const double* src = table.predefined.row(seen[i]);
        std::copy(src, src + table.predefined.cols, ctx.protos_seen.row(i));
        ctx.seen_pos[seen[i]] = static_cast<int>(i);
    }
    ctx.O = manifold.coords;
    if (ctx.O.cols != seen.size())
        throw std::invalid_argument("alignment context: manifold column count != seen classes");
    return ctx;
}

struct LossWeights {
    double alpha = 9.0;
    double beta = 77.0;
};

struct LossParts {
    double recon = 0.0;
    double kl = 0.0;
    double align = 0.0;
    double total = 0.0;
};

inline double reconstruction_loss(const Matrix& x, const Matrix& xhat) {
    if (x.rows != xhat.rows || x.cols != xhat.cols)
        throw std::invalid_argument("reconstruction_loss: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.a.size(); ++i) {
        double d = x.a[i] - xhat.a[i];
        s += d * d;
    }
    return s / static_cast<double>(x.rows);
}

// KL(N(mu, diag exp(logvar)) || N(0, I)), mean over the batch.
inline double kl_to_standard_normal(const Matrix& mu, const Matrix& logvar) {
    if (mu.rows != logvar.rows || mu.cols != logvar.cols)
        throw std::invalid_argument("kl_to_standard_normal: shape mismatch");
    if (!mu.all_finite() || !logvar.all_finite())
        throw std::invalid_argument("kl_to_standard_normal: non-finite input");
    double s = 0.0;
    for (std::size_t i = 0; i < mu.a.size(); ++i) {
        double m = mu.a[i], lv = logvar.a[i];
        s += m * m + std::exp(lv) - 1.0 - lv;
    }
    return 0.5 * s / static_cast<double>(mu.rows);
}

inline Matrix reparameterize(const Matrix& mu, const Matrix& logvar, const Matrix& eps) {
    if (mu.rows != logvar.rows || mu.cols != logvar.cols || mu.rows != eps.rows ||
        mu.cols != eps.cols)
        throw std::invalid_argument("reparameterize: shape mismatch");
    Matrix z = mu;
    for (std::size_t i = 0; i < z.a.size(); ++i)
        z.a[i] += std::exp(0.5 * logvar.a[i]) * eps.a[i];
    return z;
}

// Mean over the batch of 1 - cos(concat(prototype of y_i, z_i), o_{y_i}).
// When d_s is non-null, also writes beta/B-scaled gradients w.r.t. the
// expanded segment z into it (batch x k).
inline double alignment_loss(const Matrix& z, const std::vector<int>& labels,
                             const AlignmentContext& ctx, double beta = 1.0,
                             Matrix* d_z = nullptr) {
    std::size_t batch = z.rows;
    if (labels.size() != batch) throw std::invalid_argument("alignment_loss: label count");
    std::size_t n = ctx.protos_seen.cols;
    std::size_t k = z.cols;
    if (ctx.O.rows != n + k)
        throw std::invalid_argument("alignment_loss: manifold dim != n + k");
    if (d_z) *d_z = Matrix(batch, k, 0.0);

    std::vector<double> S(n + k), o(n + k);
    double sum = 0.0;
    double inv_b = 1.0 / static_cast<double>(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        int y = labels[i];
        int col = (y >= 0 && y < static_cast<int>(ctx.seen_pos.size())) ? ctx.seen_pos[y] : -1;
        if (col < 0)
            throw std::invalid_argument("alignment_loss: label " + std::to_string(y) +
                                        " is not a seen class");
        const double* p = ctx.protos_seen.row(col);
        for (std::size_t j = 0; j < n; ++j) S[j] = p[j];
        const double* zi = z.row(i);
        for (std::size_t j = 0; j < k; ++j) S[n + j] = zi[j];
        for (std::size_t j = 0; j < n + k; ++j) o[j] = ctx.O(j, col);

        double ns = norm2(S.data(), n + k);
        double no = norm2(o.data(), n + k);
        if (ns == 0.0 || no == 0.0)
            throw std::runtime_error("alignment_loss: zero-norm vector, cosine undefined");
        double dp = dot(S.data(), o.data(), n + k);
        double cosv = dp / (ns * no);
        sum += 1.0 - cosv;

        if (d_z) {
            // d(1 - cos)/dS = -(o / (|S||o|) - dp S / (|S|^3 |o|))
            double c1 = 1.0 / (ns * no);
            double c2 = dp / (ns * ns * ns * no);
            double* g = d_z->row(i);
            for (std::size_t j = 0; j < k; ++j)
                g[j] = beta * inv_b * (-(o[n + j] * c1 - S[n + j] * c2));
        }
    }
    return sum * inv_b;
}

// Joint objective: alpha * (reconstruction [+ KL for the VAE]) + beta *
// alignment. Gradients flow through the decoder, the reparameterization, and
// the encoder when grad outputs are supplied.
inline LossParts unified_loss(const Matrix& x, const std::vector<int>& labels,
                              const ExpansionModel& model, const AlignmentContext& ctx,
                              const LossWeights& w, const Matrix* eps, Grads* enc_grads,
                              Grads* dec_grads) {
    std::size_t batch = x.rows;
    std::size_t k = model.k;
    ForwardPass enc_fp = forward(model.enc, x);
    const Matrix& enc_out = enc_fp.output();

    Matrix mu, logvar, z;
    if (model.variant == Variant::vae) {
        if (!eps) throw std::invalid_argument("unified_loss: VAE variant requires eps");
        mu = Matrix(batch, k);
        logvar = Matrix(batch, k);
        for (std::size_t i = 0; i < batch; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                mu(i, j) = enc_out(i, j);
                logvar(i, j) = enc_out(i, j + k);
            }
        z = reparameterize(mu, logvar, *eps);
    } else {
        z = enc_out;
    }

    ForwardPass dec_fp = forward(model.dec, z);
    const Matrix& xhat = dec_fp.output();

    LossParts parts;
    parts.recon = reconstruction_loss(x, xhat);
    if (model.variant == Variant::vae) parts.kl = kl_to_standard_normal(mu, logvar);

    bool want_grads = enc_grads || dec_grads;
    Matrix dz_align;
    parts.align = alignment_loss(z, labels, ctx, w.beta, want_grads ? &dz_align : nullptr);
    parts.total = w.alpha * (parts.recon + parts.kl) + w.beta * parts.align;

    if (!want_grads) return parts;

    double scale = 2.0 * w.alpha / static_cast<double>(batch);
    Matrix d_xhat(batch, x.cols);
    for (std::size_t i = 0; i < d_xhat.a.size(); ++i)
        d_xhat.a[i] = scale * (xhat.a[i] - x.a[i]);

    Grads dec_local;
    Matrix dz = backward(model.dec, dec_fp, d_xhat, dec_local);
    if (dec_grads) *dec_grads = std::move(dec_local);

    for (std::size_t i = 0; i < dz.a.size(); ++i) dz.a[i] += dz_align.a[i];

    if (enc_grads) {
        Grads enc_local;
        if (model.variant == Variant::vae) {
            double inv_b = 1.0 / static_cast<double>(batch);
            Matrix d_enc_out(batch, 2 * k);
            for (std::size_t i = 0; i < batch; ++i)
                for (std::size_t j = 0; j < k; ++j) {
                    double sigma = std::exp(0.5 * logvar(i, j));
                    double dzij = dz(i, j);
                    // d total / d mu: reparameterization pass-through + KL
                    d_enc_out(i, j) = dzij + w.alpha * inv_b * mu(i, j);
                    // d total / d logvar: z = mu + exp(lv/2) eps; KL term
                    d_enc_out(i, j + k) = dzij * (*eps)(i, j) * sigma * 0.5 +
                                          w.alpha * inv_b * 0.5 * (std::exp(logvar(i, j)) - 1.0);
                }
            backward(model.enc, enc_fp, d_enc_out, enc_local);
        } else {
            backward(model.enc, enc_fp, dz, enc_local);
        }
        *enc_grads = std::move(enc_local);
    }
    return parts;
}

struct ExpansionConfig {
    Variant variant = Variant::ae;
    std::size_t k = 4;
    std::size_t hidden = 256;
    std::size_t epochs = 200;
    std::size_t batch = 64;
    double lr = 1e-3;
    double alpha = 9.0;
    double beta = 77.0;
    std::uint64_t seed = 7;
};

struct TraceRow {
    long long epoch = 0;
    double recon = 0.0;
    double kl = 0.0;
    double align = 0.0;
    double total = 0.0;
};

inline ExpansionModel init_expansion_model(std::size_t d, const ExpansionConfig& cfg) {
    ExpansionModel model;
    model.variant = cfg.variant;
    model.k = cfg.k;
    std::size_t enc_out = cfg.variant == Variant::vae ? 2 * cfg.k : cfg.k;
    Rng enc_rng = Rng::stream(cfg.seed, "enc-init");
    Rng dec_rng = Rng::stream(cfg.seed, "dec-init");
    if (cfg.hidden > 0) {
        model.enc = Net::glorot({{d, cfg.hidden, Act::relu}, {cfg.hidden, enc_out, Act::linear}},
                                enc_rng);
        model.dec = Net::glorot({{cfg.k, cfg.hidden, Act::relu}, {cfg.hidden, d, Act::linear}},
                                dec_rng);
    } else {
        model.enc = Net::glorot({{d, enc_out, Act::linear}}, enc_rng);
        model.dec = Net::glorot({{cfg.k, d, Act::linear}}, dec_rng);
    }
    return model;
}

inline std::pair<ExpansionModel, std::vector<TraceRow>> train_expansion(
    const Matrix& train_x, const std::vector<int>& train_y, const AlignmentContext& ctx,
    const ExpansionConfig& cfg) {
    ExpansionModel model = init_expansion_model(train_x.cols, cfg);
    std::vector<TraceRow> trace;
    if (cfg.epochs == 0) return {std::move(model), std::move(trace)};

    Adam opt_enc(model.enc, cfg.lr);
    Adam opt_dec(model.dec, cfg.lr);
    Rng shuffle_rng = Rng::stream(cfg.seed, "shuffle");
    Rng eps_rng = Rng::stream(cfg.seed, "vae-eps");
    LossWeights w{cfg.alpha, cfg.beta};

    std::size_t l = train_x.rows;
    std::vector<std::size_t> order(l);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        LossParts epoch_sum;
        for (std::size_t start = 0; start < l; start += cfg.batch) {
            std::size_t bs = std::min(cfg.batch, l - start);
            Matrix xb(bs, train_x.cols);
            std::vector<int> yb(bs);
            for (std::size_t i = 0; i < bs; ++i) {
                const double* src = train_x.row(order[start + i]);
                std::copy(src, src + train_x.cols, xb.row(i));
                yb[i] = train_y[order[start + i]];
            }
            Matrix eps;
            if (cfg.variant == Variant::vae) {
                eps = Matrix(bs, cfg.k);
                eps_rng.fill_gaussian(eps);
            }
            Grads ge, gd;
            LossParts parts = unified_loss(xb, yb, model, ctx, w,
                                           cfg.variant == Variant::vae ? &eps : nullptr, &ge, &gd);
            if (!std::isfinite(parts.total))
                throw std::runtime_error("train_expansion: non-finite loss at epoch " +
                                         std::to_string(epoch + 1));
            opt_enc.update(model.enc, ge);
            opt_dec.update(model.dec, gd);
            double bw = static_cast<double>(bs);
            epoch_sum.recon += parts.recon * bw;
            epoch_sum.kl += parts.kl * bw;
            epoch_sum.align += parts.align * bw;
            epoch_sum.total += parts.total * bw;
        }
        double inv_l = 1.0 / static_cast<double>(l);
        trace.push_back({static_cast<long long>(epoch + 1), epoch_sum.recon * inv_l,
                         epoch_sum.kl * inv_l, epoch_sum.align * inv_l, epoch_sum.total * inv_l});
    }
    return {std::move(model), std::move(trace)};
}

// Deterministic inference: latent vector for the AE, mu for the VAE.
inline Matrix encode_examples(const ExpansionModel& model, const Matrix& x) {
    ForwardPass fp = forward(model.enc, x);
    const Matrix& out = fp.output();
    if (model.variant == Variant::ae) return out;
    Matrix mu(out.rows, model.k);
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < model.k; ++j) mu(i, j) = out(i, j);
    return mu;
}

inline void save_expansion_model(const ExpansionModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "variant," << to_string(model.variant) << '\n';
    out << "latent," << model.k << '\n';
    save_net(model.enc, out);
    save_net(model.dec, out);
    out.close();
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline ExpansionModel load_expansion_model(const std::string& path) {
    auto lines = read_lines(path);
    std::size_t pos = 0;
    auto head = split_csv_line(lines.at(pos++));
    if (head.size() != 2 || head[0] != "variant")
        throw std::runtime_error(path + ": expected variant header");
    ExpansionModel model;
    model.variant = head[1] == "vae" ? Variant::vae : Variant::ae;
    auto lat = split_csv_line(lines.at(pos++));
    if (lat.size() != 2 || lat[0] != "latent")
        throw std::runtime_error(path + ": expected latent header");
    model.k = std::stoul(lat[1]);
    model.enc = load_net(lines, pos);
    model.dec = load_net(lines, pos);
    return model;
}

inline void save_trace(const std::vector<TraceRow>& trace, const std::string& path) {
    CsvWriter w(path);
    w.raw_row("epoch,reconstruction,kl,alignment,total");
    for (const auto& r : trace)
        w.raw_row(std::to_string(r.epoch) + "," + format_double(r.recon) + "," +
                  format_double(r.kl) + "," + format_double(r.align) + "," +
                  format_double(r.total));
    w.close();
}

}  // namespace zsl
