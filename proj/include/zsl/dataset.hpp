#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "zsl/config.hpp"
#include "zsl/csv.hpp"
#include "zsl/matrix.hpp"
#include "zsl/rng.hpp"

namespace zsl {

// Ordered class registry. The order is the prototypes-file row order and every
// matrix in the pipeline (centers, D, B, O, prototype tables) indexes classes
// by position in this list.
struct ClassList {
    std::vector<std::string> ids;
    std::vector<bool> seen;
    std::unordered_map<std::string, int> index;

    int add(const std::string& id, bool is_seen) {
        if (index.count(id)) throw std::runtime_error("duplicate class id '" + id + "'");
        int idx = static_cast<int>(ids.size());
        ids.push_back(id);
        seen.push_back(is_seen);
        index[id] = idx;
        return idx;
    }

    int require(const std::string& id) const {
        auto it = index.find(id);
        if (it == index.end()) throw std::runtime_error("unknown class id '" + id + "'");
        return it->second;
    }

    long long seen_count() const {
        long long m = 0;
        for (bool s : seen) m += s;
        return m;
    }
    long long unseen_count() const { return static_cast<long long>(ids.size()) - seen_count(); }

    // Position of class `cls` among seen (or unseen) classes, in list order.
    std::vector<int> seen_indices() const {
        std::vector<int> out;
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (seen[i]) out.push_back(static_cast<int>(i));
        return out;
    }
    std::vector<int> unseen_indices() const {
        std::vector<int> out;
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (!seen[i]) out.push_back(static_cast<int>(i));
        return out;
    }
};

struct LabeledDataset {
    Matrix features;          // l x d
    std::vector<int> labels;  // class index per row
    ClassList classes;

    void check() const {
        if (features.rows == 0 || features.cols == 0)
            throw std::runtime_error("dataset must have l >= 1 and d >= 1");
        if (labels.size() != features.rows) throw std::runtime_error("label count mismatch");
        if (!features.all_finite()) throw std::runtime_error("dataset contains non-finite values");
        for (int y : labels)
            if (y < 0 || y >= static_cast<int>(classes.ids.size()))
                throw std::runtime_error("label outside class list");
    }
};

struct PrototypeTable {
    ClassList classes;
    Matrix predefined;  // (m+v) x n
    Matrix expanded;    // (m+v) x k, empty until the expansion stage ran

    long long n() const { return static_cast<long long>(predefined.cols); }
    long long k() const { return static_cast<long long>(expanded.cols); }
};

struct SyntheticSpec {
    std::uint64_t seed = 7;
    long long m_seen = 10;
    long long v_unseen = 5;
    long long d = 32;
    long long n = 8;
    double cluster_spread = 1.0;
    long long examples_per_class = 16;
};

inline Matrix l2_normalize_rows(const Matrix& m) {
    Matrix out = m;
    for (std::size_t i = 0; i < out.rows; ++i) {
        double* r = out.row(i);
        double nrm = norm2(r, out.cols);
        if (nrm == 0.0) continue;
        for (std::size_t j = 0; j < out.cols; ++j) r[j] /= nrm;
    }
    return out;
}

// Mean feature vector per seen class, ordered by class-list position.
inline Matrix class_centers(const LabeledDataset& ds) {
    auto seen = ds.classes.seen_indices();
    std::unordered_map<int, std::size_t> row_of;
    for (std::size_t i = 0; i < seen.size(); ++i) row_of[seen[i]] = i;

    Matrix centers(seen.size(), ds.features.cols, 0.0);
    std::vector<long long> counts(seen.size(), 0);
    for (std::size_t i = 0; i < ds.features.rows; ++i) {
        auto it = row_of.find(ds.labels[i]);
        if (it == row_of.end()) continue;  // unseen-class example
        double* c = centers.row(it->second);
        const double* x = ds.features.row(i);
        for (std::size_t j = 0; j < ds.features.cols; ++j) c[j] += x[j];
        ++counts[it->second];
    }
    for (std::size_t r = 0; r < centers.rows; ++r) {
        if (counts[r] == 0)
            throw std::runtime_error("seen class '" + ds.classes.ids[seen[r]] +
                                     "' has no examples");
        double inv = 1.0 / static_cast<double>(counts[r]);
        double* c = centers.row(r);
        for (std::size_t j = 0; j < centers.cols; ++j) c[j] *= inv;
    }
    return centers;
}

// Seeded benchmark generator: class prototypes are isotropic Gaussians in
// semantic space, visual features are a fixed random linear image of the
// prototype plus isotropic noise. Seen-class examples form the training
// partition, unseen-class examples the test partition.
inline std::pair<LabeledDataset, PrototypeTable> generate_synthetic(const SyntheticSpec& spec) {
    long long total = spec.m_seen + spec.v_unseen;
    PrototypeTable table;
    for (long long c = 0; c < total; ++c)
        table.classes.add(std::to_string(c), c < spec.m_seen);

    Rng proto_rng = Rng::stream(spec.seed, "protos");
    table.predefined = Matrix(total, spec.n);
    proto_rng.fill_gaussian(table.predefined);

    Rng map_rng = Rng::stream(spec.seed, "linmap");
    Matrix W(spec.n, spec.d);
    map_rng.fill_gaussian(W);

    LabeledDataset ds;
    ds.classes = table.classes;
    long long l = total * spec.examples_per_class;
    ds.features = Matrix(l, spec.d);
    ds.labels.resize(l);

    Rng train_noise = Rng::stream(spec.seed, "train-noise");
    Rng test_noise = Rng::stream(spec.seed, "test-noise");
    std::size_t row = 0;
    for (long long c = 0; c < total; ++c) {
        bool is_seen = c < spec.m_seen;
        Rng& noise = is_seen ? train_noise : test_noise;
        const double* p = table.predefined.row(c);
        for (long long e = 0; e < spec.examples_per_class; ++e, ++row) {
            double* x = ds.features.row(row);
            for (long long j = 0; j < spec.d; ++j) {
                double s = 0.0;
                for (long long i = 0; i < spec.n; ++i) s += p[i] * W(i, j);
                x[j] = s;
            }
            if (spec.cluster_spread != 0.0)
                for (long long j = 0; j < spec.d; ++j)
                    x[j] += spec.cluster_spread * noise.gaussian();
            ds.labels[row] = static_cast<int>(c);
        }
    }
    ds.check();
    return {ds, table};
}

inline void save_prototypes(const PrototypeTable& t, const std::string& path) {
    CsvWriter w(path);
    std::string header = "class_id,split";
    for (long long j = 0; j < t.n(); ++j) header += ",a" + std::to_string(j);
    w.raw_row(header);
    for (std::size_t c = 0; c < t.classes.ids.size(); ++c) {
        std::string row = t.classes.ids[c];
        row += t.classes.seen[c] ? ",seen" : ",unseen";
        for (std::size_t j = 0; j < t.predefined.cols; ++j)
            row += "," + format_double(t.predefined(c, j));
        w.raw_row(row);
    }
    w.close();
}

inline void save_expanded_prototypes(const PrototypeTable& t, const std::string& path) {
    CsvWriter w(path);
    std::string header = "class_id,split";
    for (long long j = 0; j < t.n(); ++j) header += ",a" + std::to_string(j);
    for (long long j = 0; j < t.k(); ++j) header += ",e" + std::to_string(j);
    w.raw_row(header);
    for (std::size_t c = 0; c < t.classes.ids.size(); ++c) {
        std::string row = t.classes.ids[c];
        row += t.classes.seen[c] ? ",seen" : ",unseen";
        for (std::size_t j = 0; j < t.predefined.cols; ++j)
            row += "," + format_double(t.predefined(c, j));
        for (std::size_t j = 0; j < t.expanded.cols; ++j)
            row += "," + format_double(t.expanded(c, j));
        w.raw_row(row);
    }
    w.close();
}

inline void save_features(const LabeledDataset& ds, const std::string& path) {
    CsvWriter w(path);
    std::string header = "example_id,class_id";
    for (std::size_t j = 0; j < ds.features.cols; ++j) header += ",f" + std::to_string(j);
    w.raw_row(header);
    for (std::size_t i = 0; i < ds.features.rows; ++i) {
        std::string row = "e" + std::to_string(i) + "," + ds.classes.ids[ds.labels[i]];
        for (std::size_t j = 0; j < ds.features.cols; ++j)
            row += "," + format_double(ds.features(i, j));
        w.raw_row(row);
    }
    w.close();
}

inline PrototypeTable load_prototypes(const std::string& path) {
    auto lines = read_lines(path);
    if (lines.empty()) throw std::runtime_error(path + ": empty file");
    auto header = split_csv_line(lines[0]);
    if (header.size() < 3 || header[0] != "class_id" || header[1] != "split")
        throw std::runtime_error(path + " line 1: expected header class_id,split,a0,...");
    std::size_t n = header.size() - 2;

    PrototypeTable t;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        auto cells = split_csv_line(lines[i]);
        if (cells.size() != header.size())
            throw std::runtime_error(path + " line " + std::to_string(i + 1) +
                                     ": expected " + std::to_string(header.size()) +
                                     " columns, got " + std::to_string(cells.size()));
        bool is_seen;
        if (cells[1] == "seen")
            is_seen = true;
        else if (cells[1] == "unseen")
            is_seen = false;
        else
            throw std::runtime_error(path + " line " + std::to_string(i + 1) +
                                     ": split must be seen or unseen, got '" + cells[1] + "'");
        t.classes.add(cells[0], is_seen);
        std::vector<double> vals(n);
        for (std::size_t j = 0; j < n; ++j) vals[j] = parse_double(cells[2 + j], path, i + 1);
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw std::runtime_error(path + ": no prototype rows");
    t.predefined = Matrix(rows.size(), n);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < n; ++j) t.predefined(i, j) = rows[i][j];
    return t;
}

// Features CSV against an already-loaded prototype table (the table supplies
// the class list and seen/unseen flags).
inline LabeledDataset load_features(const std::string& path, const PrototypeTable& table) {
    auto lines = read_lines(path);
    if (lines.empty()) throw std::runtime_error(path + ": empty file");
    auto header = split_csv_line(lines[0]);
    if (header.size() < 3 || header[0] != "example_id" || header[1] != "class_id")
        throw std::runtime_error(path + " line 1: expected header example_id,class_id,f0,...");
    std::size_t d = header.size() - 2;

    LabeledDataset ds;
    ds.classes = table.classes;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        auto cells = split_csv_line(lines[i]);
        if (cells.size() != header.size())
            throw std::runtime_error(path + " line " + std::to_string(i + 1) +
                                     ": expected " + std::to_string(header.size()) +
                                     " columns, got " + std::to_string(cells.size()));
        auto it = ds.classes.index.find(cells[1]);
        if (it == ds.classes.index.end())
            throw std::runtime_error(path + " line " + std::to_string(i + 1) +
                                     ": unknown class id '" + cells[1] + "'");
        ds.labels.push_back(it->second);
        std::vector<double> vals(d);
        for (std::size_t j = 0; j < d; ++j) vals[j] = parse_double(cells[2 + j], path, i + 1);
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw std::runtime_error(path + ": no example rows");
    ds.features = Matrix(rows.size(), d);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) ds.features(i, j) = rows[i][j];
    ds.check();
    return ds;
}

// Seen examples form the training partition, unseen the test partition.
struct Partition {
    Matrix train_x;
    std::vector<int> train_y;
    Matrix test_x;
    std::vector<int> test_y;
};

inline Partition partition_by_split(const LabeledDataset& ds) {
    Partition p;
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < ds.features.rows; ++i)
        (ds.classes.seen[ds.labels[i]] ? tr : te).push_back(i);
    p.train_x = Matrix(tr.size(), ds.features.cols);
    p.test_x = Matrix(te.size(), ds.features.cols);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double* src = ds.features.row(tr[i]);
        std::copy(src, src + ds.features.cols, p.train_x.row(i));
        p.train_y.push_back(ds.labels[tr[i]]);
    }
    for (std::size_t i = 0; i < te.size(); ++i) {
        const double* src = ds.features.row(te[i]);
        std::copy(src, src + ds.features.cols, p.test_x.row(i));
        p.test_y.push_back(ds.labels[te[i]]);
    }
    return p;
}

}  // namespace zsl
