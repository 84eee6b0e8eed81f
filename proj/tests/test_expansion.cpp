#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "test_util.hpp"
#include "zsl/expansion.hpp"
#include "zsl/gradcheck.hpp"

namespace {

using zsl::Matrix;

// Small hand-built context: 4 seen classes with 2 predefined dims, latent
// size k, manifold coordinates drawn once.
zsl::AlignmentContext make_ctx(std::size_t k, std::uint64_t seed = 400) {
    zsl::PrototypeTable table;
    for (int c = 0; c < 4; ++c) table.classes.add(std::to_string(c), true);
    table.predefined = Matrix(4, 2);
    zsl::Rng rng(seed);
    rng.fill_gaussian(table.predefined);
    zsl::EmbeddedManifold man;
    man.coords = Matrix(2 + k, 4);
    rng.fill_gaussian(man.coords);
    return zsl::build_alignment_context(table, man);
}

TEST(Losses, ReconstructionIsBatchMeanOfSquaredError) {
    Matrix x(2, 2, 0.0);
    Matrix xhat(2, 2, 0.0);
    xhat(0, 0) = 1.0;
    xhat(1, 1) = 2.0;
    EXPECT_DOUBLE_EQ(zsl::reconstruction_loss(x, xhat), (1.0 + 4.0) / 2.0);
    EXPECT_THROW(zsl::reconstruction_loss(x, Matrix(2, 3)), std::invalid_argument);
}

TEST(Losses, KlOracles) {
    Matrix mu(1, 3, 0.0), logvar(1, 3, 0.0);
    EXPECT_EQ(zsl::kl_to_standard_normal(mu, logvar), 0.0);

    Matrix mu1(1, 1, 1.0), lv0(1, 1, 0.0);
    EXPECT_NEAR(zsl::kl_to_standard_normal(mu1, lv0), 0.5, 1e-12);

    // mean over the batch, sum over dimensions
    Matrix mu2(2, 2, 1.0), lv2(2, 2, 0.0);
    EXPECT_NEAR(zsl::kl_to_standard_normal(mu2, lv2), 1.0, 1e-12);

    EXPECT_THROW(zsl::kl_to_standard_normal(mu, Matrix(2, 2)), std::invalid_argument);
    Matrix bad(1, 1, std::numeric_limits<double>::quiet_NaN());
    EXPECT_THROW(zsl::kl_to_standard_normal(bad, Matrix(1, 1)), std::invalid_argument);
}

// KL(N(mu, s^2) || N(0,1)) by Simpson quadrature of the defining integral.
double kl_quadrature(double mu, double logvar) {
    double s = std::exp(0.5 * logvar);
    auto log_q = [&](double x) {
        double z = (x - mu) / s;
        return -0.5 * z * z - std::log(s) - 0.5 * std::log(2.0 * M_PI);
    };
    auto log_p = [](double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * M_PI); };
    auto f = [&](double x) { return std::exp(log_q(x)) * (log_q(x) - log_p(x)); };
    double lo = mu - 14.0 * s - 14.0, hi = mu + 14.0 * s + 14.0;
    int steps = 40000;
    double h = (hi - lo) / steps;
    double sum = f(lo) + f(hi);
    for (int i = 1; i < steps; ++i) sum += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

TEST(Losses, KlMatchesQuadrature) {
    zsl::Rng rng(808);
    for (int trial = 0; trial < 6; ++trial) {
        double mu = rng.uniform(-2.0, 2.0);
        double logvar = rng.uniform(-1.5, 1.5);
        Matrix m(1, 1, mu), lv(1, 1, logvar);
        EXPECT_NEAR(zsl::kl_to_standard_normal(m, lv), kl_quadrature(mu, logvar), 1e-6);
    }
}

TEST(Losses, ReparameterizeExactAndUnbiased) {
    Matrix mu(1, 2), logvar(1, 2), eps(1, 2);
    mu(0, 0) = 1.0;
    mu(0, 1) = -2.0;
    logvar(0, 0) = 0.0;
    logvar(0, 1) = std::log(4.0);
    eps(0, 0) = 0.5;
    eps(0, 1) = -1.0;
    Matrix z = zsl::reparameterize(mu, logvar, eps);
    EXPECT_DOUBLE_EQ(z(0, 0), 1.5);
    EXPECT_DOUBLE_EQ(z(0, 1), -4.0);

    // Monte Carlo moments: z ~ N(mu, sigma^2)
    zsl::Rng rng(909);
    const int n = 100000;
    Matrix mu_b(n, 1, 0.7), lv_b(n, 1, std::log(2.25)), eps_b(n, 1);
    rng.fill_gaussian(eps_b);
    Matrix zs = zsl::reparameterize(mu_b, lv_b, eps_b);
    double mean = std::accumulate(zs.a.begin(), zs.a.end(), 0.0) / n;
    double var = 0.0;
    for (double v : zs.a) var += (v - mean) * (v - mean);
    var /= n;
    EXPECT_NEAR(mean, 0.7, 0.02);
    EXPECT_NEAR(var, 2.25, 0.05);
}

TEST(Alignment, PerfectAndOppositeAlignment) {
    // One seen class; manifold coordinate equals concat(prototype, z).
    zsl::PrototypeTable table;
    table.classes.add("only", true);
    table.predefined = Matrix(1, 2);
    table.predefined(0, 0) = 1.0;
    table.predefined(0, 1) = 2.0;
    zsl::EmbeddedManifold man;
    man.coords = Matrix(4, 1);
    man.coords(0, 0) = 1.0;
    man.coords(1, 0) = 2.0;
    man.coords(2, 0) = 3.0;
    man.coords(3, 0) = 4.0;
    zsl::AlignmentContext ctx = zsl::build_alignment_context(table, man);

    Matrix z(1, 2);
    z(0, 0) = 3.0;
    z(0, 1) = 4.0;
    EXPECT_NEAR(zsl::alignment_loss(z, {0}, ctx), 0.0, 1e-12);

    // Scaling the concatenated vector leaves the cosine unchanged.
    zsl::EmbeddedManifold man2 = man;
    for (double& v : man2.coords.a) v *= 7.5;
    zsl::AlignmentContext ctx2 = zsl::build_alignment_context(table, man2);
    EXPECT_NEAR(zsl::alignment_loss(z, {0}, ctx2), 0.0, 1e-12);

    zsl::EmbeddedManifold man3 = man;
    for (double& v : man3.coords.a) v = -v;
    zsl::AlignmentContext ctx3 = zsl::build_alignment_context(table, man3);
    EXPECT_NEAR(zsl::alignment_loss(z, {0}, ctx3), 2.0, 1e-12);
}

TEST(Alignment, StaysInRangeAndRejectsBadInput) {
    zsl::AlignmentContext ctx = make_ctx(3);
    zsl::Rng rng(71);
    Matrix z(8, 3);
    rng.fill_gaussian(z);
    std::vector<int> y = {0, 1, 2, 3, 0, 1, 2, 3};
    double loss = zsl::alignment_loss(z, y, ctx);
    EXPECT_GE(loss, 0.0);
    EXPECT_LE(loss, 2.0);

    EXPECT_THROW(zsl::alignment_loss(z, {0}, ctx), std::invalid_argument);
    EXPECT_THROW(zsl::alignment_loss(z, {0, 1, 2, 3, 0, 1, 2, 9}, ctx), std::invalid_argument);

    Matrix zero(1, 3, 0.0);
    zsl::PrototypeTable table;
    table.classes.add("c", true);
    table.predefined = Matrix(1, 0);
    zsl::EmbeddedManifold man;
    man.coords = Matrix(3, 1);
    man.coords(0, 0) = 1.0;
    zsl::AlignmentContext zero_ctx = zsl::build_alignment_context(table, man);
    EXPECT_THROW(zsl::alignment_loss(zero, {0}, zero_ctx), std::runtime_error);
}

TEST(Alignment, GradientMatchesFiniteDifferences) {
    zsl::AlignmentContext ctx = make_ctx(3);
    zsl::Rng rng(72);
    Matrix z(6, 3);
    rng.fill_gaussian(z);
    std::vector<int> y = {0, 1, 2, 3, 1, 2};
    double beta = 2.7;

    Matrix dz;
    zsl::alignment_loss(z, y, ctx, beta, &dz);

    // d_z already carries d(beta * mean)/dz.
    auto loss = [&] { return beta * zsl::alignment_loss(z, y, ctx); };
    std::vector<double*> params;
    std::vector<double> analytic;
    for (std::size_t i = 0; i < z.a.size(); ++i) {
        params.push_back(&z.a[i]);
        analytic.push_back(dz.a[i]);
    }
    zsl::GradCheckReport rep = zsl::gradient_check(loss, params, analytic);
    EXPECT_LE(rep.max_rel_err, 1e-4);
}

TEST(Unified, BetaZeroReducesToWeightedReconstruction) {
    zsl::AlignmentContext ctx = make_ctx(2);
    zsl::Rng rng(73);
    Matrix x(5, 6);
    rng.fill_gaussian(x);
    std::vector<int> y = {0, 1, 2, 3, 0};

    zsl::ExpansionConfig cfg;
    cfg.k = 2;
    cfg.hidden = 4;
    cfg.seed = 21;
    zsl::ExpansionModel model = zsl::init_expansion_model(6, cfg);

    zsl::LossWeights w{3.0, 0.0};
    zsl::LossParts parts = zsl::unified_loss(x, y, model, ctx, w, nullptr, nullptr, nullptr);
    EXPECT_DOUBLE_EQ(parts.total, 3.0 * parts.recon);
    EXPECT_EQ(parts.kl, 0.0);
}

TEST(Unified, VaeIncludesKlInTotal) {
    zsl::AlignmentContext ctx = make_ctx(2);
    zsl::Rng rng(74);
    Matrix x(4, 6);
    rng.fill_gaussian(x);
    std::vector<int> y = {0, 1, 2, 3};
    zsl::ExpansionConfig cfg;
    cfg.variant = zsl::Variant::vae;
    cfg.k = 2;
    cfg.hidden = 4;
    cfg.seed = 22;
    zsl::ExpansionModel model = zsl::init_expansion_model(6, cfg);
    Matrix eps(4, 2);
    rng.fill_gaussian(eps);

    zsl::LossWeights w{2.0, 5.0};
    zsl::LossParts parts = zsl::unified_loss(x, y, model, ctx, w, &eps, nullptr, nullptr);
    EXPECT_GT(parts.kl, 0.0);
    EXPECT_NEAR(parts.total, 2.0 * (parts.recon + parts.kl) + 5.0 * parts.align, 1e-12);

    EXPECT_THROW(zsl::unified_loss(x, y, model, ctx, w, nullptr, nullptr, nullptr),
                 std::invalid_argument);
}

TEST(Unified, GradientsMatchFiniteDifferencesBothVariants) {
    zsl::AlignmentContext ctx = make_ctx(3);
    zsl::Rng rng(75);
    Matrix x(6, 5);
    rng.fill_gaussian(x);
    std::vector<int> y = {0, 1, 2, 3, 1, 0};
    zsl::LossWeights w{1.7, 3.1};

    for (zsl::Variant variant : {zsl::Variant::ae, zsl::Variant::vae}) {
        zsl::ExpansionConfig cfg;
        cfg.variant = variant;
        cfg.k = 3;
        cfg.hidden = 4;
        cfg.seed = 23;
        zsl::ExpansionModel model = zsl::init_expansion_model(5, cfg);
        // Freshly initialized nets have all-zero biases, which can park every
        // relu of a layer exactly on its kink (an all-dead hidden row makes
        // the next pre-activation exactly zero). Central differences straddle
        // the kink and disagree with the subgradient, so move to a generic
        // point before checking.
        for (zsl::Net* net : {&model.enc, &model.dec})
            for (std::vector<double>& b : net->b)
                for (double& v : b) v = 0.2 * rng.gaussian();
        Matrix eps(6, 3);
        rng.fill_gaussian(eps);
        const Matrix* ep = variant == zsl::Variant::vae ? &eps : nullptr;

        zsl::Grads ge, gd;
        zsl::unified_loss(x, y, model, ctx, w, ep, &ge, &gd);
        auto loss = [&] {
            return zsl::unified_loss(x, y, model, ctx, w, ep, nullptr, nullptr).total;
        };
        std::vector<double*> params;
        std::vector<double> analytic;
        zsl::collect_params(model.enc, ge, params, analytic);
        zsl::collect_params(model.dec, gd, params, analytic);
        zsl::GradCheckReport rep = zsl::gradient_check(loss, params, analytic);
        EXPECT_LE(rep.max_rel_err, 1e-4) << zsl::to_string(variant);
    }
}

TEST(Training, TraceShapeAndZeroEpochs) {
    zsl::AlignmentContext ctx = make_ctx(2);
    zsl::Rng rng(76);
    Matrix x(10, 6);
    rng.fill_gaussian(x);
    std::vector<int> y(10);
    for (int i = 0; i < 10; ++i) y[i] = i % 4;

    zsl::ExpansionConfig cfg;
    cfg.k = 2;
    cfg.hidden = 4;
    cfg.epochs = 7;
    cfg.batch = 4;
    auto [model, trace] = zsl::train_expansion(x, y, ctx, cfg);
    ASSERT_EQ(trace.size(), 7u);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        EXPECT_EQ(trace[i].epoch, static_cast<long long>(i + 1));
        EXPECT_NEAR(trace[i].total,
                    cfg.alpha * (trace[i].recon + trace[i].kl) + cfg.beta * trace[i].align, 1e-9);
    }

    cfg.epochs = 0;
    auto [model0, trace0] = zsl::train_expansion(x, y, ctx, cfg);
    EXPECT_TRUE(trace0.empty());
    zsl::ExpansionModel fresh = zsl::init_expansion_model(6, cfg);
    EXPECT_EQ(model0.enc.W[0].a, fresh.enc.W[0].a);
    EXPECT_EQ(model0.dec.W[0].a, fresh.dec.W[0].a);
}

TEST(Training, AlignmentLossDecreases) {
    zsl::AlignmentContext ctx = make_ctx(2, 500);
    zsl::Rng rng(77);
    Matrix x(24, 6);
    rng.fill_gaussian(x);
    std::vector<int> y(24);
    for (int i = 0; i < 24; ++i) y[i] = i % 4;

    zsl::ExpansionConfig cfg;
    cfg.k = 2;
    cfg.hidden = 8;
    cfg.epochs = 60;
    cfg.batch = 8;
    cfg.alpha = 0.0;
    cfg.beta = 1.0;
    auto [model, trace] = zsl::train_expansion(x, y, ctx, cfg);
    (void)model;
    ASSERT_FALSE(trace.empty());
    EXPECT_LT(trace.back().align, trace.front().align);
}

TEST(Training, BetaZeroMatchesPlainAutoencoderBitwise) {
    // With beta = 0 the unified trainer must walk exactly the same parameter
    // trajectory as a plain reconstruction-only loop over the same batches.
    zsl::AlignmentContext ctx = make_ctx(3);
    zsl::Rng rng(78);
    Matrix x(20, 5);
    rng.fill_gaussian(x);
    std::vector<int> y(20);
    for (int i = 0; i < 20; ++i) y[i] = i % 4;

    zsl::ExpansionConfig cfg;
    cfg.k = 3;
    cfg.hidden = 4;
    cfg.epochs = 5;
    cfg.batch = 6;
    cfg.alpha = 2.0;
    cfg.beta = 0.0;
    cfg.seed = 99;
    auto [model, trace] = zsl::train_expansion(x, y, ctx, cfg);
    (void)trace;

    zsl::ExpansionModel ref = zsl::init_expansion_model(5, cfg);
    zsl::Adam opt_enc(ref.enc, cfg.lr);
    zsl::Adam opt_dec(ref.dec, cfg.lr);
    zsl::Rng shuffle_rng = zsl::Rng::stream(cfg.seed, "shuffle");
    std::vector<std::size_t> order(x.rows);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < x.rows; start += cfg.batch) {
            std::size_t bs = std::min(cfg.batch, x.rows - start);
            Matrix xb(bs, 5);
            for (std::size_t i = 0; i < bs; ++i)
                std::copy(x.row(order[start + i]), x.row(order[start + i]) + 5, xb.row(i));
            zsl::ForwardPass efp = zsl::forward(ref.enc, xb);
            zsl::ForwardPass dfp = zsl::forward(ref.dec, efp.output());
            Matrix d_xhat(bs, 5);
            for (std::size_t i = 0; i < d_xhat.a.size(); ++i)
                d_xhat.a[i] = 2.0 * cfg.alpha / bs * (dfp.output().a[i] - xb.a[i]);
            zsl::Grads gd, ge;
            Matrix dz = zsl::backward(ref.dec, dfp, d_xhat, gd);
            zsl::backward(ref.enc, efp, dz, ge);
            opt_enc.update(ref.enc, ge);
            opt_dec.update(ref.dec, gd);
        }
    }
    for (std::size_t l = 0; l < 2; ++l) {
        EXPECT_EQ(model.enc.W[l].a, ref.enc.W[l].a);
        EXPECT_EQ(model.dec.W[l].a, ref.dec.W[l].a);
        EXPECT_EQ(model.enc.b[l], ref.enc.b[l]);
        EXPECT_EQ(model.dec.b[l], ref.dec.b[l]);
    }
}

TEST(Inference, VaeEncodesToMean) {
    zsl::ExpansionConfig cfg;
    cfg.variant = zsl::Variant::vae;
    cfg.k = 3;
    cfg.hidden = 5;
    cfg.seed = 31;
    zsl::ExpansionModel model = zsl::init_expansion_model(4, cfg);
    zsl::Rng rng(81);
    Matrix x(6, 4);
    rng.fill_gaussian(x);
    Matrix z = zsl::encode_examples(model, x);
    ASSERT_EQ(z.cols, 3u);
    Matrix full = zsl::forward(model.enc, x).output();
    ASSERT_EQ(full.cols, 6u);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(z(i, j), full(i, j));
}

TEST(Checkpoint, ExpansionModelRoundTrip) {
    zsltest::TempDir tmp;
    for (zsl::Variant variant : {zsl::Variant::ae, zsl::Variant::vae}) {
        zsl::ExpansionConfig cfg;
        cfg.variant = variant;
        cfg.k = 3;
        cfg.hidden = 5;
        cfg.seed = 41;
        zsl::ExpansionModel model = zsl::init_expansion_model(4, cfg);
        auto p = tmp.file(std::string("m-") + zsl::to_string(variant) + ".csv");
        zsl::save_expansion_model(model, p.string());
        zsl::ExpansionModel loaded = zsl::load_expansion_model(p.string());
        EXPECT_EQ(loaded.variant, model.variant);
        EXPECT_EQ(loaded.k, model.k);

        zsl::Rng rng(82);
        Matrix x(5, 4);
        rng.fill_gaussian(x);
        Matrix za = zsl::encode_examples(model, x);
        Matrix zb = zsl::encode_examples(loaded, x);
        EXPECT_EQ(za.a, zb.a);

        auto p2 = tmp.file(std::string("m2-") + zsl::to_string(variant) + ".csv");
        zsl::save_expansion_model(loaded, p2.string());
        EXPECT_EQ(zsltest::read_file(p), zsltest::read_file(p2));
    }
}

TEST(Checkpoint, TraceRoundTripKeepsFullPrecision) {
    zsltest::TempDir tmp;
    std::vector<zsl::TraceRow> trace = {{1, 1.0 / 3.0, 0.0, 1.23456789012345678e-7, 9.9},
                                        {2, 2.5e-300, 0.5, 1.0, 4.0 / 7.0}};
    auto p = tmp.file("trace.csv");
    zsl::save_trace(trace, p.string());
    auto lines = zsl::read_lines(p.string());
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0], "epoch,reconstruction,kl,alignment,total");
    auto cells = zsl::split_csv_line(lines[1]);
    EXPECT_EQ(std::strtod(cells[1].c_str(), nullptr), 1.0 / 3.0);
    EXPECT_EQ(std::strtod(cells[3].c_str(), nullptr), 1.23456789012345678e-7);
    auto cells2 = zsl::split_csv_line(lines[2]);
    EXPECT_EQ(std::strtod(cells2[1].c_str(), nullptr), 2.5e-300);
    EXPECT_EQ(std::strtod(cells2[4].c_str(), nullptr), 4.0 / 7.0);
}

}  // namespace
