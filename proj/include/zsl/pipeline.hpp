#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "zsl/config.hpp"
#include "zsl/csv.hpp"
#include "zsl/dataset.hpp"
#include "zsl/expansion.hpp"
#include "zsl/matrix.hpp"
#include "zsl/mds.hpp"
#include "zsl/prototypes.hpp"
#include "zsl/recognition.hpp"
#include "zsl/version.hpp"

namespace zsl {

namespace fs = std::filesystem;

template <typename F>
auto run_stage(const std::string& name, std::vector<std::string>& done, F&& f) {
    try {
        auto r = f();
        done.push_back(name);
        return r;
    } catch (const std::exception& e) {
        throw std::runtime_error("stage " + name + ": " + e.what());
    }
}

struct PipelineData {
    LabeledDataset ds;
    PrototypeTable table;
    Partition part;
    Matrix centers;
};

inline PipelineData prepare_data(const Experiment& e, std::uint64_t seed) {
    PipelineData pd;
    if (e.data == DataSource::synthetic) {
        SyntheticSpec spec;
        spec.seed = seed;
        spec.m_seen = e.classes_seen;
        spec.v_unseen = e.classes_unseen;
        spec.d = e.feature_dim;
        spec.n = e.semantic_dim;
        spec.cluster_spread = e.cluster_spread;
        spec.examples_per_class = e.examples_per_class;
        auto [ds, table] = generate_synthetic(spec);
        pd.ds = std::move(ds);
        pd.table = std::move(table);
    } else {
        pd.table = load_prototypes(e.prototypes_path);
        pd.ds = load_features(e.features_path, pd.table);
    }
    if (e.normalize) pd.ds.features = l2_normalize_rows(pd.ds.features);
    pd.part = partition_by_split(pd.ds);
    pd.centers = class_centers(pd.ds);
    return pd;
}

// Column-sliced view of the prototype table used by the recognition stage:
// predefined segment, expanded segment, or their concatenation.
inline Matrix prototype_targets(const PrototypeTable& t, bool use_pre, bool use_exp) {
    std::size_t n = use_pre ? t.predefined.cols : 0;
    std::size_t k = use_exp ? t.expanded.cols : 0;
    if (n + k == 0) throw std::invalid_argument("prototype_targets: empty selection");
    Matrix out(t.classes.ids.size(), n + k);
    for (std::size_t c = 0; c < out.rows; ++c) {
        double* row = out.row(c);
        if (use_pre)
            for (std::size_t j = 0; j < n; ++j) row[j] = t.predefined(c, j);
        if (use_exp)
            for (std::size_t j = 0; j < k; ++j) row[n + j] = t.expanded(c, j);
    }
    return out;
}

inline Matrix unseen_rows(const Matrix& targets, const ClassList& classes) {
    auto unseen = classes.unseen_indices();
    Matrix out(unseen.size(), targets.cols);
    for (std::size_t i = 0; i < unseen.size(); ++i) {
        const double* src = targets.row(unseen[i]);
        std::copy(src, src + targets.cols, out.row(i));
    }
    return out;
}

inline std::vector<int> unseen_local_labels(const std::vector<int>& test_y,
                                            const ClassList& classes) {
    std::vector<int> pos(classes.ids.size(), -1);
    auto unseen = classes.unseen_indices();
    for (std::size_t i = 0; i < unseen.size(); ++i) pos[unseen[i]] = static_cast<int>(i);
    std::vector<int> out(test_y.size());
    for (std::size_t i = 0; i < test_y.size(); ++i) {
        out[i] = pos[test_y[i]];
        if (out[i] < 0) throw std::runtime_error("test example labeled with a seen class");
    }
    return out;
}

inline EvaluationReport project_and_evaluate(const Experiment& e, std::uint64_t seed,
                                             const Partition& part, const Matrix& targets,
                                             const ClassList& classes,
                                             ProjectionModel* model_out = nullptr) {
    ProjectionConfig pc;
    pc.epochs = e.projection_epochs;
    pc.batch = e.batch_size;
    pc.lr = e.learning_rate;
    pc.lambda = e.latent_weight;
    pc.tied = e.tied_projection;
    pc.seed = seed;
    ProjectionModel model = train_projection(part.train_x, part.train_y, targets, pc);
    Matrix emb = project(model, part.test_x);
    EvaluationReport rep = evaluate_unseen(emb, unseen_local_labels(part.test_y, classes),
                                           unseen_rows(targets, classes), e.metric,
                                           static_cast<std::size_t>(e.hit_max));
    if (model_out) *model_out = std::move(model);
    return rep;
}

inline ExpansionConfig expansion_config(const Experiment& e, std::uint64_t seed, long long k) {
    ExpansionConfig xc;
    xc.variant = e.variant;
    xc.k = static_cast<std::size_t>(k);
    xc.hidden = static_cast<std::size_t>(e.expansion_hidden);
    xc.epochs = static_cast<std::size_t>(e.expansion_epochs);
    xc.batch = static_cast<std::size_t>(e.batch_size);
    xc.lr = e.learning_rate;
    xc.alpha = e.alpha;
    xc.beta = e.beta;
    xc.seed = seed;
    return xc;
}

inline std::vector<TraceRow> load_trace(const std::string& path) {
    auto lines = read_lines(path);
    std::vector<TraceRow> trace;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        auto cells = split_csv_line(lines[i]);
        if (cells.size() != 5) throw std::runtime_error(path + ": bad trace row");
        TraceRow r;
        r.epoch = detail::to_int("epoch", cells[0]);
        r.recon = parse_double(cells[1], path, i + 1);
        r.kl = parse_double(cells[2], path, i + 1);
        r.align = parse_double(cells[3], path, i + 1);
        r.total = parse_double(cells[4], path, i + 1);
        trace.push_back(r);
    }
    return trace;
}

// Trains the expansion model, or loads an identical earlier run from the
// on-disk cache (keyed by every setting the result depends on).
inline std::pair<ExpansionModel, std::vector<TraceRow>> expansion_stage(
    const Experiment& e, std::uint64_t seed, long long k, const PipelineData& pd,
    const AlignmentContext& ctx, const fs::path& cache_dir) {
    Experiment keyed = e;
    keyed.expansion_dim = k;
    std::string key = cache_key(keyed, seed, "expansion");
    fs::path entry = cache_dir / ("expansion-" + key);
    fs::path model_path = entry / "model.csv";
    fs::path trace_path = entry / "trace.csv";
    if (e.cache && fs::exists(model_path) && fs::exists(trace_path)) {
        return {load_expansion_model(model_path.string()), load_trace(trace_path.string())};
    }
    auto [model, trace] = train_expansion(pd.part.train_x, pd.part.train_y, ctx,
                                          expansion_config(e, seed, k));
    if (e.cache) {
        fs::create_directories(entry);
        save_expansion_model(model, model_path.string());
        save_trace(trace, trace_path.string());
    }
    return {std::move(model), std::move(trace)};
}

inline void save_report(const EvaluationReport& rep, const ClassList& classes,
                        const fs::path& dir, const std::string& suffix = "") {
    {
        CsvWriter w((dir / ("report" + suffix + ".csv")).string());
        w.raw_row("k,hit_at_k");
        for (std::size_t k = 0; k < rep.hit_at_k.size(); ++k)
            w.raw_row(std::to_string(k + 1) + "," + format_double(rep.hit_at_k[k]));
        w.close();
    }
    auto unseen = classes.unseen_indices();
    {
        CsvWriter w((dir / ("confusion" + suffix + ".csv")).string());
        std::string header = "class_id";
        for (int u : unseen) header += "," + classes.ids[u];
        w.raw_row(header);
        for (std::size_t i = 0; i < rep.confusion.rows; ++i) {
            std::string row = classes.ids[unseen[i]];
            for (std::size_t j = 0; j < rep.confusion.cols; ++j)
                row += "," + std::to_string(static_cast<long long>(rep.confusion(i, j)));
            w.raw_row(row);
        }
        w.close();
    }
    {
        CsvWriter w((dir / ("per_class" + suffix + ".csv")).string());
        w.raw_row("class_id,examples,correct,accuracy");
        for (std::size_t i = 0; i < rep.per_class.size(); ++i) {
            long long correct = static_cast<long long>(rep.confusion(i, i));
            w.raw_row(classes.ids[unseen[i]] + "," + std::to_string(rep.per_class_total[i]) +
                      "," + std::to_string(correct) + "," + format_double(rep.per_class[i]));
        }
        w.close();
    }
}

inline void dump_mds_artifacts(const Matrix& D, const Matrix& B, const EmbeddedManifold& man,
                               const fs::path& dir) {
    auto write_matrix = [](const Matrix& m, const fs::path& p) {
        CsvWriter w(p.string());
        for (std::size_t i = 0; i < m.rows; ++i) {
            std::string row;
            for (std::size_t j = 0; j < m.cols; ++j) {
                if (j) row += ',';
                row += format_double(m(i, j));
            }
            w.raw_row(row);
        }
        w.close();
    };
    write_matrix(D, dir / "distances.csv");
    write_matrix(B, dir / "gram.csv");
    write_matrix(man.coords, dir / "embedding.csv");
    CsvWriter w((dir / "eigenvalues.csv").string());
    w.raw_row("eigenvalue");
    for (double l : man.eigenvalues) w.raw_row(format_double(l));
    w.close();
}

struct SeedRunResult {
    std::vector<TraceRow> trace;
    EvaluationReport report;
    PrototypeTable table;
};

// One full pass: data -> centers -> manifold -> expansion -> prototypes ->
// projection -> evaluation, with artifacts under `dir`.
inline SeedRunResult run_single(const Experiment& e, std::uint64_t seed, const fs::path& dir,
                                const fs::path& cache_dir, std::vector<std::string>& stages) {
    fs::create_directories(dir);
    SeedRunResult out;
    PipelineData pd = run_stage("data", stages, [&] { return prepare_data(e, seed); });
    long long k = e.expansion_dim;

    if (k == 0) {
        out.table = pd.table;
        out.table.expanded = Matrix(out.table.classes.ids.size(), 0);
        run_stage("prototypes", stages, [&] {
            save_expanded_prototypes(out.table, (dir / "prototypes_expanded.csv").string());
            return 0;
        });
    } else {
        EmbeddedManifold man = run_stage("mds", stages, [&] {
            Matrix D = pairwise_distance_matrix(pd.centers);
            Matrix B = double_center(D);
            EmbeddedManifold m = extract_embedding(B, pd.table.predefined.cols + k);
            if (m.clamped > 0)
                std::cerr << "warning: clamped " << m.clamped
                          << " negative eigenvalues in MDS embedding\n";
            if (e.dump_mds) dump_mds_artifacts(D, B, m, dir);
            return m;
        });
        AlignmentContext ctx = build_alignment_context(pd.table, man);
        ExpansionModel model;
        run_stage("expansion", stages, [&] {
            auto [mdl, trace] = expansion_stage(e, seed, k, pd, ctx, cache_dir);
            model = std::move(mdl);
            out.trace = std::move(trace);
            save_trace(out.trace, (dir / "trace.csv").string());
            save_expansion_model(model, (dir / "expansion_model.csv").string());
            return 0;
        });
        run_stage("prototypes", stages, [&] {
            out.table = build_full_prototype_table(pd.table, model, pd.part.train_x,
                                                   pd.part.train_y,
                                                   static_cast<std::size_t>(e.neighbors));
            save_expanded_prototypes(out.table, (dir / "prototypes_expanded.csv").string());
            return 0;
        });
    }

    run_stage("recognition", stages, [&] {
        Matrix targets = prototype_targets(out.table, true, out.table.expanded.cols > 0);
        ProjectionModel proj;
        out.report = project_and_evaluate(e, seed, pd.part, targets, out.table.classes, &proj);
        std::ofstream pm((dir / "projection_model.csv").string(), std::ios::binary);
        if (!pm) throw std::runtime_error("cannot write projection_model.csv");
        save_net(proj.enc, pm);
        save_net(proj.dec, pm);
        pm.close();
        if (!pm) throw std::runtime_error("write failed: projection_model.csv");
        save_report(out.report, out.table.classes, dir);
        return 0;
    });
    return out;
}

inline nlohmann::json experiment_json(const Experiment& e) {
    nlohmann::json j;
    j["data"] = e.data == DataSource::synthetic ? "synthetic" : "csv";
    if (e.data == DataSource::csv) {
        j["features"] = e.features_path;
        j["prototypes"] = e.prototypes_path;
    } else {
        j["classes_seen"] = e.classes_seen;
        j["classes_unseen"] = e.classes_unseen;
        j["feature_dim"] = e.feature_dim;
        j["semantic_dim"] = e.semantic_dim;
        j["examples_per_class"] = e.examples_per_class;
        j["cluster_spread"] = e.cluster_spread;
    }
    j["normalize"] = e.normalize;
    j["variant"] = to_string(e.variant);
    j["expansion_dim"] = e.expansion_dim;
    j["expansion_hidden"] = e.expansion_hidden;
    j["expansion_epochs"] = e.expansion_epochs;
    j["batch_size"] = e.batch_size;
    j["learning_rate"] = e.learning_rate;
    j["alpha"] = e.alpha;
    j["beta"] = e.beta;
    j["neighbors"] = e.neighbors;
    j["projection_epochs"] = e.projection_epochs;
    j["latent_weight"] = e.latent_weight;
    j["tied_projection"] = e.tied_projection;
    j["metric"] = to_string(e.metric);
    j["hit_max"] = e.hit_max;
    j["dump_mds"] = e.dump_mds;
    j["cache"] = e.cache;
    return j;
}

inline void write_manifest(const fs::path& out_dir, const std::string& command,
                           const Experiment& e, const std::vector<std::uint64_t>& seeds,
                           const std::vector<std::string>& stages,
                           const std::vector<std::string>& artifacts,
                           const std::string& status) {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = experiment_json(e);
    j["seeds"] = seeds;
    std::vector<std::string> dedup;
    for (const auto& s : stages)
        if (std::find(dedup.begin(), dedup.end(), s) == dedup.end()) dedup.push_back(s);
    j["stages"] = dedup;
    j["artifacts"] = artifacts;
    j["status"] = status;
    j["version"] = {{"library", kVersion}, {"manifest", 1}};
    std::ofstream out((out_dir / "manifest.json").string(), std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest.json");
    out << j.dump(2) << '\n';
}

inline std::vector<std::string> list_artifacts(const fs::path& out_dir) {
    std::vector<std::string> files;
    for (auto& p : fs::recursive_directory_iterator(out_dir)) {
        if (!p.is_regular_file()) continue;
        fs::path rel = fs::relative(p.path(), out_dir);
        if (rel.begin()->string() == "_cache" || rel.filename() == "manifest.json") continue;
        files.push_back(rel.generic_string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

inline double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double sample_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

// `run` entry point: single seed writes into out_dir directly, several seeds
// write per-seed subdirectories plus an aggregate summary.
inline void run_pipeline(const Experiment& e, const fs::path& out_dir) {
    std::vector<std::string> stages;
    fs::create_directories(out_dir);
    fs::path cache_dir = out_dir / "_cache";
    try {
        if (e.seeds.size() == 1) {
            run_single(e, e.seeds[0], out_dir, cache_dir, stages);
        } else {
            std::vector<std::vector<double>> hits;
            std::vector<double> finals;
            for (std::uint64_t s : e.seeds) {
                SeedRunResult r = run_single(e, s, out_dir / ("seed_" + std::to_string(s)),
                                             cache_dir, stages);
                hits.push_back(r.report.hit_at_k);
                if (!r.trace.empty()) finals.push_back(r.trace.back().align);
            }
            CsvWriter w((out_dir / "summary.csv").string());
            w.raw_row("metric,mean,std");
            for (std::size_t k = 0; k < hits[0].size(); ++k) {
                std::vector<double> col;
                for (auto& h : hits) col.push_back(h[k]);
                w.raw_row("hit_at_" + std::to_string(k + 1) + "," + format_double(mean_of(col)) +
                          "," + format_double(sample_std(col)));
            }
            if (!finals.empty())
                w.raw_row("final_alignment_loss," + format_double(mean_of(finals)) + "," +
                          format_double(sample_std(finals)));
            w.close();
            stages.push_back("aggregate");
        }
        write_manifest(out_dir, "run", e, e.seeds, stages, list_artifacts(out_dir), "complete");
    } catch (const std::exception& ex) {
        write_manifest(out_dir, "run", e, e.seeds, stages, list_artifacts(out_dir),
                       std::string("failed: ") + ex.what());
        throw;
    }
}

struct AblationArm {
    std::string name;
    bool use_pre = false;
    bool use_exp = false;
};

// Shared expansion model per seed; the three arms differ only in which
// prototype segments feed projection training and recognition.
inline void run_ablation(const Experiment& e, const fs::path& out_dir) {
    std::vector<std::string> stages;
    fs::create_directories(out_dir);
    fs::path cache_dir = out_dir / "_cache";
    try {
        std::vector<AblationArm> arms;
        if (e.expansion_dim == 0) {
            arms = {{"P", true, false}};
        } else {
            arms = {{"P", true, false}, {"E", false, true}, {"P+E", true, true}};
        }
        std::map<std::string, std::vector<double>> hit1;

        CsvWriter per_seed((out_dir / "ablation_seeds.csv").string());
        per_seed.raw_row("seed,arm,hit_at_1");
        for (std::uint64_t s : e.seeds) {
            fs::path dir = e.seeds.size() == 1 ? out_dir : out_dir / ("seed_" + std::to_string(s));
            fs::create_directories(dir);
            PipelineData pd = run_stage("data", stages, [&] { return prepare_data(e, s); });
            PrototypeTable table = pd.table;
            if (e.expansion_dim == 0) {
                table.expanded = Matrix(table.classes.ids.size(), 0);
            } else {
                EmbeddedManifold man = run_stage("mds", stages, [&] {
                    Matrix D = pairwise_distance_matrix(pd.centers);
                    return extract_embedding(double_center(D),
                                             pd.table.predefined.cols + e.expansion_dim);
                });
                AlignmentContext ctx = build_alignment_context(pd.table, man);
                ExpansionModel model;
                run_stage("expansion", stages, [&] {
                    auto [mdl, trace] = expansion_stage(e, s, e.expansion_dim, pd, ctx, cache_dir);
                    model = std::move(mdl);
                    save_trace(trace, (dir / "trace.csv").string());
                    return 0;
                });
                run_stage("prototypes", stages, [&] {
                    table = build_full_prototype_table(pd.table, model, pd.part.train_x,
                                                       pd.part.train_y,
                                                       static_cast<std::size_t>(e.neighbors));
                    save_expanded_prototypes(table,
                                             (dir / "prototypes_expanded.csv").string());
                    return 0;
                });
            }
            run_stage("recognition", stages, [&] {
                for (const auto& arm : arms) {
                    Matrix targets = prototype_targets(table, arm.use_pre, arm.use_exp);
                    EvaluationReport rep =
                        project_and_evaluate(e, s, pd.part, targets, table.classes);
                    std::string suffix = "_" + arm.name;
                    if (suffix == "_P+E") suffix = "_PE";
                    save_report(rep, table.classes, dir, suffix);
                    hit1[arm.name].push_back(rep.hit_at_k[0]);
                    per_seed.raw_row(std::to_string(s) + "," + arm.name + "," +
                                     format_double(rep.hit_at_k[0]));
                }
                return 0;
            });
        }
        per_seed.close();

        CsvWriter w((out_dir / "ablation.csv").string());
        w.raw_row("arm,mean_hit_at_1,std_hit_at_1");
        for (const auto& arm : arms)
            w.raw_row(arm.name + "," + format_double(mean_of(hit1[arm.name])) + "," +
                      format_double(sample_std(hit1[arm.name])));
        w.close();
        write_manifest(out_dir, "ablate", e, e.seeds, stages, list_artifacts(out_dir),
                       "complete");
    } catch (const std::exception& ex) {
        write_manifest(out_dir, "ablate", e, e.seeds, stages, list_artifacts(out_dir),
                       std::string("failed: ") + ex.what());
        throw;
    }
}

// Per-k alignment error and Hit@1. The dataset and the center EVD are
// computed once per seed and shared across k.
inline void run_sweep(const Experiment& e, const fs::path& out_dir) {
    std::vector<std::string> stages;
    fs::create_directories(out_dir);
    fs::path cache_dir = out_dir / "_cache";
    try {
        std::map<long long, std::vector<double>> finals, hit1;
        CsvWriter per_seed((out_dir / "sweep_seeds.csv").string());
        per_seed.raw_row("seed,k,final_alignment_loss,hit_at_1");
        for (std::uint64_t s : e.seeds) {
            PipelineData pd = run_stage("data", stages, [&] { return prepare_data(e, s); });
            std::vector<double> evals;
            Matrix evecs;
            run_stage("mds", stages, [&] {
                Matrix D = pairwise_distance_matrix(pd.centers);
                Matrix B = double_center(D);
                symmetric_evd(B, evals, evecs);
                return 0;
            });
            for (long long k : e.sweep_ks) {
                EmbeddedManifold man =
                    embedding_from_evd(evals, evecs, pd.table.predefined.cols + k);
                AlignmentContext ctx = build_alignment_context(pd.table, man);
                ExpansionModel model;
                std::vector<TraceRow> trace;
                run_stage("expansion", stages, [&] {
                    std::tie(model, trace) = expansion_stage(e, s, k, pd, ctx, cache_dir);
                    return 0;
                });
                if (trace.empty())
                    throw std::runtime_error("sweep requires expansion_epochs >= 1");
                PrototypeTable table;
                run_stage("prototypes", stages, [&] {
                    table = build_full_prototype_table(pd.table, model, pd.part.train_x,
                                                       pd.part.train_y,
                                                       static_cast<std::size_t>(e.neighbors));
                    return 0;
                });
                run_stage("recognition", stages, [&] {
                    Matrix targets = prototype_targets(table, true, true);
                    EvaluationReport rep =
                        project_and_evaluate(e, s, pd.part, targets, table.classes);
                    finals[k].push_back(trace.back().align);
                    hit1[k].push_back(rep.hit_at_k[0]);
                    per_seed.raw_row(std::to_string(s) + "," + std::to_string(k) + "," +
                                     format_double(trace.back().align) + "," +
                                     format_double(rep.hit_at_k[0]));
                    return 0;
                });
            }
        }
        per_seed.close();

        CsvWriter w((out_dir / "sweep.csv").string());
        w.raw_row("k,final_alignment_loss,hit_at_1");
        for (long long k : e.sweep_ks)
            w.raw_row(std::to_string(k) + "," + format_double(mean_of(finals[k])) + "," +
                      format_double(mean_of(hit1[k])));
        w.close();
        write_manifest(out_dir, "sweep", e, e.seeds, stages, list_artifacts(out_dir), "complete");
    } catch (const std::exception& ex) {
        write_manifest(out_dir, "sweep", e, e.seeds, stages, list_artifacts(out_dir),
                       std::string("failed: ") + ex.what());
        throw;
    }
}

inline void run_gen_data(const Experiment& e, const fs::path& out_dir) {
    std::vector<std::string> stages;
    fs::create_directories(out_dir);
    try {
        if (e.data != DataSource::synthetic)
            throw std::runtime_error("gen-data requires data = synthetic");
        run_stage("data", stages, [&] {
            SyntheticSpec spec;
            spec.seed = e.seeds[0];
            spec.m_seen = e.classes_seen;
            spec.v_unseen = e.classes_unseen;
            spec.d = e.feature_dim;
            spec.n = e.semantic_dim;
            spec.cluster_spread = e.cluster_spread;
            spec.examples_per_class = e.examples_per_class;
            auto [ds, table] = generate_synthetic(spec);
            save_features(ds, (out_dir / "features.csv").string());
            save_prototypes(table, (out_dir / "prototypes.csv").string());
            return 0;
        });
        write_manifest(out_dir, "gen-data", e, e.seeds, stages, list_artifacts(out_dir),
                       "complete");
    } catch (const std::exception& ex) {
        write_manifest(out_dir, "gen-data", e, e.seeds, stages, list_artifacts(out_dir),
                       std::string("failed: ") + ex.what());
        throw;
    }
}

// Shape-dependent defaults plus full validation; CSV data sources pull the
// real shape from the prototypes file header.
inline void finalize_and_validate(Experiment& e) {
    if (e.seeds.empty()) e.seeds = {e.seed};
    long long n, d, m, v;
    if (e.data == DataSource::synthetic) {
        n = e.semantic_dim;
        d = e.feature_dim;
        m = e.classes_seen;
        v = e.classes_unseen;
    } else {
        if (e.features_path.empty() || e.prototypes_path.empty())
            throw std::runtime_error("csv data requires 'features' and 'prototypes' paths");
        PrototypeTable t = load_prototypes(e.prototypes_path);
        n = t.n();
        m = t.classes.seen_count();
        v = t.classes.unseen_count();
        auto lines = read_lines(e.features_path);
        if (lines.empty()) throw std::runtime_error(e.features_path + ": empty file");
        d = static_cast<long long>(split_csv_line(lines[0]).size()) - 2;
        e.classes_seen = m;
        e.classes_unseen = v;
        e.feature_dim = d;
        e.semantic_dim = n;
    }
    finalize_shape_defaults(e, n, d, m, v);
    validate_experiment(e, n, d, m, v);
}

}  // namespace zsl
