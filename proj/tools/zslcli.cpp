#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "zsl/gradcheck.hpp"
#include "zsl/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config;
    std::string out = "out";
    std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config, "experiment config file (key = value lines)");
    cmd->add_option("--out", args.out, "output directory")->capture_default_str();
    cmd->add_option("--seed", args.seed, "override the config seed (single-seed run)");
}

zsl::Experiment load_experiment(const CommonArgs& args) {
    zsl::RawConfig raw;
    if (!args.config.empty()) raw = zsl::parse_config(args.config);
    zsl::Experiment e = zsl::resolve_experiment(raw);
    if (args.seed >= 0) {
        e.seed = static_cast<std::uint64_t>(args.seed);
        e.seeds = {e.seed};
    }
    zsl::finalize_and_validate(e);
    return e;
}

int run_grad_check() {
    zsl::Rng rng = zsl::Rng::stream(7, "grad-check");
    bool ok = true;
    auto report = [&](const std::string& name, const zsl::GradCheckReport& r) {
        bool pass = r.max_rel_err <= 1e-4;
        ok = ok && pass;
        std::cout << name << ": " << r.checked << " parameters, max relative error "
                  << r.max_rel_err << (pass ? " (ok)" : " (FAIL)") << '\n';
    };

    std::size_t d = 7, k = 3, m = 5;
    zsl::Matrix x(8, d);
    rng.fill_gaussian(x);
    std::vector<int> y = {0, 1, 2, 3, 4, 0, 1, 2};

    zsl::PrototypeTable table;
    for (std::size_t c = 0; c < m; ++c) table.classes.add(std::to_string(c), true);
    table.predefined = zsl::Matrix(m, 2);
    rng.fill_gaussian(table.predefined);
    zsl::EmbeddedManifold man;
    man.coords = zsl::Matrix(2 + k, m);
    rng.fill_gaussian(man.coords);
    zsl::AlignmentContext ctx = zsl::build_alignment_context(table, man);

    for (zsl::Variant variant : {zsl::Variant::ae, zsl::Variant::vae}) {
        zsl::ExpansionConfig cfg;
        cfg.variant = variant;
        cfg.k = k;
        cfg.hidden = 6;
        cfg.seed = 11;
        zsl::ExpansionModel model = zsl::init_expansion_model(d, cfg);
        zsl::Matrix eps(x.rows, k);
        rng.fill_gaussian(eps);
        zsl::LossWeights w{1.3, 2.1};

        auto loss = [&] {
            return zsl::unified_loss(x, y, model, ctx, w,
                                     variant == zsl::Variant::vae ? &eps : nullptr, nullptr,
                                     nullptr)
                .total;
        };
        zsl::Grads ge, gd;
        zsl::unified_loss(x, y, model, ctx, w, variant == zsl::Variant::vae ? &eps : nullptr,
                          &ge, &gd);
        std::vector<double*> params;
        std::vector<double> analytic;
        zsl::collect_params(model.enc, ge, params, analytic);
        zsl::collect_params(model.dec, gd, params, analytic);
        report(std::string("expansion-") + zsl::to_string(variant),
               zsl::gradient_check(loss, params, analytic));
    }

    {
        zsl::Matrix targets(m, 4);
        rng.fill_gaussian(targets);
        zsl::ProjectionModel model = zsl::train_projection(x, y, targets, {0, 64, 1e-3, 0.7,
                                                                           false, 13});
        auto loss = [&] { return zsl::projection_loss(model, x, y, targets); };
        zsl::Grads ge, gd;
        zsl::projection_loss(model, x, y, targets, &ge, &gd);
        std::vector<double*> params;
        std::vector<double> analytic;
        zsl::collect_params(model.enc, ge, params, analytic);
        zsl::collect_params(model.dec, gd, params, analytic);
        report("projection", zsl::gradient_check(loss, params, analytic));
    }

    std::cout << (ok ? "gradient check passed" : "gradient check FAILED") << '\n';
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zero-shot recognition experiments with expanded semantic prototypes"};
    app.require_subcommand(1);

    CommonArgs gen_args, run_args, ablate_args, sweep_args;
    CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic features/prototypes pair");
    add_common(gen, gen_args);
    CLI::App* run = app.add_subcommand("run", "full pipeline: expand, re-embed, evaluate");
    add_common(run, run_args);
    CLI::App* ablate = app.add_subcommand("ablate", "compare P, E and P+E prototype sets");
    add_common(ablate, ablate_args);
    CLI::App* sweep = app.add_subcommand("sweep", "repeat the pipeline over expansion sizes");
    add_common(sweep, sweep_args);
    CLI::App* grad = app.add_subcommand("grad-check", "finite-difference gradient audit");
    CommonArgs grad_args;
    add_common(grad, grad_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (grad->parsed()) return run_grad_check();
        if (gen->parsed()) {
            zsl::Experiment e = load_experiment(gen_args);
            zsl::run_gen_data(e, gen_args.out);
        } else if (run->parsed()) {
            zsl::Experiment e = load_experiment(run_args);
            zsl::run_pipeline(e, run_args.out);
        } else if (ablate->parsed()) {
            zsl::Experiment e = load_experiment(ablate_args);
            zsl::run_ablation(e, ablate_args.out);
        } else if (sweep->parsed()) {
            zsl::Experiment e = load_experiment(sweep_args);
            zsl::run_sweep(e, sweep_args.out);
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}
