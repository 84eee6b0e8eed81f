#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "zsl/csv.hpp"
#include "zsl/rng.hpp"

namespace zsl {

inline const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = {
        "data",           "features",          "prototypes",       "normalize",
        "classes_seen",   "classes_unseen",    "feature_dim",      "semantic_dim",
        "examples_per_class", "cluster_spread", "seed",            "seeds",
        "variant",        "expansion_dim",     "expansion_hidden", "expansion_epochs",
        "batch_size",     "learning_rate",     "alpha",            "beta",
        "neighbors",      "projection_epochs", "latent_weight",    "tied_projection",
        "metric",         "hit_max",           "sweep_ks",         "dump_mds",
        "cache",
    };
    return keys;
}

struct RawConfig {
    std::map<std::string, std::string> kv;

    bool has(const std::string& k) const { return kv.count(k) != 0; }
    void set(const std::string& k, const std::string& v) { kv[k] = v; }
};

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Flat key=value format; '#' starts a comment; unknown keys are errors.
inline RawConfig parse_config(const std::string& path) {
    RawConfig cfg;
    auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string line = lines[i];
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + " line " + std::to_string(i + 1) +
                                     ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (!known_config_keys().count(key))
            throw std::runtime_error(path + " line " + std::to_string(i + 1) +
                                     ": unknown key '" + key + "'");
        if (cfg.has(key))
            throw std::runtime_error(path + " line " + std::to_string(i + 1) +
                                     ": duplicate key '" + key + "'");
        cfg.set(key, val);
    }
    return cfg;
}

namespace detail {

inline long long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        long long r = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "': not an integer: '" + v + "'");
    }
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(r)) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "': not a number: '" + v + "'");
    }
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw std::runtime_error("config key '" + key + "': not a boolean: '" + v + "'");
}

inline std::vector<long long> to_int_list(const std::string& key, const std::string& v) {
    std::vector<long long> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        out.push_back(to_int(key, tok));
    }
    if (out.empty()) throw std::runtime_error("config key '" + key + "': empty list");
    return out;
}

}  // namespace detail

enum class DataSource { synthetic, csv };
enum class Variant { ae, vae };
enum class Metric { cosine, euclidean };

inline const char* to_string(Variant v) { return v == Variant::ae ? "ae" : "vae"; }
inline const char* to_string(Metric m) { return m == Metric::cosine ? "cosine" : "euclidean"; }

// Fully resolved experiment settings with defaults applied.
struct Experiment {
    DataSource data = DataSource::synthetic;
    std::string features_path;
    std::string prototypes_path;
    bool normalize = true;

    long long classes_seen = 10;
    long long classes_unseen = 5;
    long long feature_dim = 32;
    long long semantic_dim = 8;
    long long examples_per_class = 16;
    double cluster_spread = 1.0;

    std::uint64_t seed = 7;
    std::vector<std::uint64_t> seeds;  // non-empty; single entry unless 'seeds' given

    Variant variant = Variant::ae;
    long long expansion_dim = -1;  // -1: resolve from expansion rate 0.6*n
    long long expansion_hidden = 256;
    long long expansion_epochs = 200;
    long long batch_size = 64;
    double learning_rate = 1e-3;
    double alpha = 9.0;
    double beta = 77.0;

    long long neighbors = -1;  // -1: default 8 clamped to classes_seen
    long long projection_epochs = 200;
    double latent_weight = 1.0;
    bool tied_projection = false;

    Metric metric = Metric::cosine;
    long long hit_max = 0;  // 0: all unseen classes
    std::vector<long long> sweep_ks = {4, 8, 16};  // every k must fit n + k <= d - 1
    bool dump_mds = false;
    bool cache = true;
};

inline Experiment resolve_experiment(const RawConfig& cfg) {
    Experiment e;
    auto geti = [&](const char* k, long long def) {
        return cfg.has(k) ? detail::to_int(k, cfg.kv.at(k)) : def;
    };
    auto getd = [&](const char* k, double def) {
        return cfg.has(k) ? detail::to_double(k, cfg.kv.at(k)) : def;
    };
    auto getb = [&](const char* k, bool def) {
        return cfg.has(k) ? detail::to_bool(k, cfg.kv.at(k)) : def;
    };

    if (cfg.has("data")) {
        const std::string& v = cfg.kv.at("data");
        if (v == "synthetic")
            e.data = DataSource::synthetic;
        else if (v == "csv")
            e.data = DataSource::csv;
        else
            throw std::runtime_error("config key 'data': expected synthetic or csv, got '" + v + "'");
    }
    if (cfg.has("features")) e.features_path = cfg.kv.at("features");
    if (cfg.has("prototypes")) e.prototypes_path = cfg.kv.at("prototypes");
    e.normalize = getb("normalize", true);

    e.classes_seen = geti("classes_seen", e.classes_seen);
    e.classes_unseen = geti("classes_unseen", e.classes_unseen);
    e.feature_dim = geti("feature_dim", e.feature_dim);
    e.semantic_dim = geti("semantic_dim", e.semantic_dim);
    e.examples_per_class = geti("examples_per_class", e.examples_per_class);
    e.cluster_spread = getd("cluster_spread", e.cluster_spread);

    e.seed = static_cast<std::uint64_t>(geti("seed", 7));
    if (cfg.has("seeds")) {
        for (long long s : detail::to_int_list("seeds", cfg.kv.at("seeds")))
            e.seeds.push_back(static_cast<std::uint64_t>(s));
    } else {
        e.seeds = {e.seed};
    }

    if (cfg.has("variant")) {
        const std::string& v = cfg.kv.at("variant");
        if (v == "ae")
            e.variant = Variant::ae;
        else if (v == "vae")
            e.variant = Variant::vae;
        else
            throw std::runtime_error("config key 'variant': expected ae or vae, got '" + v + "'");
    }
    e.expansion_dim = geti("expansion_dim", -1);
    e.expansion_hidden = geti("expansion_hidden", e.expansion_hidden);
    e.expansion_epochs = geti("expansion_epochs", e.expansion_epochs);
    e.batch_size = geti("batch_size", e.batch_size);
    e.learning_rate = getd("learning_rate", e.learning_rate);
    e.alpha = getd("alpha", e.alpha);
    e.beta = getd("beta", e.beta);

    e.neighbors = geti("neighbors", -1);
    e.projection_epochs = geti("projection_epochs", e.projection_epochs);
    e.latent_weight = getd("latent_weight", e.latent_weight);
    e.tied_projection = getb("tied_projection", false);

    if (cfg.has("metric")) {
        const std::string& v = cfg.kv.at("metric");
        if (v == "cosine")
            e.metric = Metric::cosine;
        else if (v == "euclidean")
            e.metric = Metric::euclidean;
        else
            throw std::runtime_error("config key 'metric': expected cosine or euclidean, got '" +
                                     v + "'");
    }
    e.hit_max = geti("hit_max", 0);
    if (cfg.has("sweep_ks")) e.sweep_ks = detail::to_int_list("sweep_ks", cfg.kv.at("sweep_ks"));
    e.dump_mds = getb("dump_mds", false);
    e.cache = getb("cache", true);
    return e;
}

// Applies the defaults that depend on dataset shape (n, d, m) and checks every
// downstream precondition. For CSV data call this again after the prototype
// table is loaded, with the real n/m/v.
inline void finalize_shape_defaults(Experiment& e, long long n, long long d, long long m,
                                    long long v) {
    if (e.expansion_dim < 0) {
        long long k = std::llround(0.6 * static_cast<double>(n));
        k = std::max(1LL, std::min(k, d - 1 - n));
        e.expansion_dim = k;
    }
    if (e.neighbors < 0) e.neighbors = std::min(8LL, m);
    if (e.hit_max == 0) e.hit_max = v;
    (void)v;
}

inline void validate_experiment(const Experiment& e, long long n, long long d, long long m,
                                long long v) {
    std::vector<std::string> problems;
    auto bad = [&](const std::string& msg) { problems.push_back(msg); };

    if (n < 1) bad("semantic_dim must be >= 1");
    if (d < 1) bad("feature_dim must be >= 1");
    if (m < 1) bad("classes_seen must be >= 1");
    if (v < 1) bad("classes_unseen must be >= 1");
    if (e.data == DataSource::synthetic) {
        if (e.examples_per_class < 1) bad("examples_per_class must be >= 1");
        if (e.cluster_spread < 0) bad("cluster_spread must be >= 0");
    } else {
        if (e.features_path.empty()) bad("csv data requires 'features'");
        if (e.prototypes_path.empty()) bad("csv data requires 'prototypes'");
    }
    if (e.expansion_dim < 0) bad("expansion_dim unresolved");
    if (e.expansion_dim > 0 && n + e.expansion_dim > d - 1)
        bad("expansion_dim too large: semantic_dim + expansion_dim must be <= feature_dim - 1");
    if (e.expansion_hidden < 0) bad("expansion_hidden must be >= 0");
    if (e.expansion_epochs < 0) bad("expansion_epochs must be >= 0");
    if (e.batch_size < 1) bad("batch_size must be >= 1");
    if (!(e.learning_rate > 0)) bad("learning_rate must be > 0");
    if (e.alpha < 0 || e.beta < 0) bad("alpha and beta must be >= 0");
    if (e.alpha == 0 && e.beta == 0) bad("alpha and beta must not both be zero");
    if (e.neighbors < 1) bad("neighbors must be >= 1");
    if (e.neighbors > m) bad("neighbors exceeds seen class count");
    if (e.projection_epochs < 0) bad("projection_epochs must be >= 0");
    if (e.latent_weight < 0) bad("latent_weight must be >= 0");
    if (e.hit_max < 1 || e.hit_max > v) bad("hit_max must be in [1, classes_unseen]");
    if (e.seeds.empty()) bad("seeds must be non-empty");
    for (long long k : e.sweep_ks) {
        if (k < 1) bad("sweep_ks entries must be >= 1");
        if (n + k > d - 1) bad("sweep k=" + std::to_string(k) + " violates n + k <= d - 1");
    }

    if (!problems.empty()) {
        std::string msg = "invalid config:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw std::runtime_error(msg);
    }
}

// Canonical serialization of the fields a pipeline stage depends on; feeds
// the cache key hash.
inline std::string canonical_string(const Experiment& e, std::uint64_t seed,
                                    const std::string& scope) {
    std::ostringstream os;
    os << "scope=" << scope << ";seed=" << seed;
    os << ";data=" << (e.data == DataSource::synthetic ? "synthetic" : "csv");
    os << ";normalize=" << e.normalize;
    if (e.data == DataSource::synthetic) {
        os << ";m=" << e.classes_seen << ";v=" << e.classes_unseen << ";d=" << e.feature_dim
           << ";n=" << e.semantic_dim << ";h=" << e.examples_per_class
           << ";spread=" << format_double(e.cluster_spread);
    } else {
        os << ";features=" << e.features_path << ";prototypes=" << e.prototypes_path;
    }
    if (scope == "expansion") {
        os << ";variant=" << to_string(e.variant) << ";k=" << e.expansion_dim
           << ";hidden=" << e.expansion_hidden << ";epochs=" << e.expansion_epochs
           << ";batch=" << e.batch_size << ";lr=" << format_double(e.learning_rate)
           << ";alpha=" << format_double(e.alpha) << ";beta=" << format_double(e.beta);
    }
    return os.str();
}

inline std::string cache_key(const Experiment& e, std::uint64_t seed, const std::string& scope) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_string(e, seed, scope))));
    return buf;
}

}  // namespace zsl
