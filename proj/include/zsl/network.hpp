#pragma once

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "zsl/csv.hpp"
#include "zsl/matrix.hpp"
#include "zsl/rng.hpp"

namespace zsl {

enum class Act { linear, relu, tanh };

inline const char* to_string(Act a) {
    switch (a) {
        case Act::linear: return "linear";
        case Act::relu: return "relu";
        case Act::tanh: return "tanh";
    }
    return "linear";
}

inline Act act_from_string(const std::string& s) {
    if (s == "linear") return Act::linear;
    if (s == "relu") return Act::relu;
    if (s == "tanh") return Act::tanh;
    throw std::runtime_error("unknown activation '" + s + "'");
}

struct LayerSpec {
    std::size_t in = 0;
    std::size_t out = 0;
    Act act = Act::linear;
};

// Plain feedforward stack: Z = X W + b per layer, activation applied
// elementwise. Weights are in x out so batches stay row-major throughout.
struct Net {
    std::vector<LayerSpec> spec;
    std::vector<Matrix> W;
    std::vector<std::vector<double>> b;

    std::size_t layers() const { return spec.size(); }
    std::size_t in_dim() const { return spec.front().in; }
    std::size_t out_dim() const { return spec.back().out; }

    static Net glorot(const std::vector<LayerSpec>& spec, Rng& rng) {
        Net net;
        net.spec = spec;
        for (std::size_t l = 0; l < spec.size(); ++l) {
            if (spec[l].in < 1 || spec[l].out < 1)
                throw std::invalid_argument("layer dims must be >= 1");
            if (l > 0 && spec[l].in != spec[l - 1].out)
                throw std::invalid_argument("layer shape chain broken at layer " +
                                            std::to_string(l));
            Matrix w(spec[l].in, spec[l].out);
            double limit = std::sqrt(6.0 / static_cast<double>(spec[l].in + spec[l].out));
            for (double& x : w.a) x = rng.uniform(-limit, limit);
            net.W.push_back(std::move(w));
            net.b.emplace_back(spec[l].out, 0.0);
        }
        return net;
    }
};

struct ForwardPass {
    // post[0] is the input batch, post[l+1] the post-activation output of
    // layer l. Post-activations are all backward needs: relu' is (post > 0)
    // and tanh' is 1 - post^2.
    std::vector<Matrix> post;
    const Matrix& output() const& { return post.back(); }
    // On a temporary pass, hand the caller the matrix itself; a reference
    // into the pass would dangle as soon as the statement ends.
    Matrix output() && { return std::move(post.back()); }
};

inline ForwardPass forward(const Net& net, const Matrix& x) {
    if (x.cols != net.in_dim())
        throw std::invalid_argument("forward: input dim " + std::to_string(x.cols) +
                                    " does not match net input " + std::to_string(net.in_dim()));
    ForwardPass fp;
    fp.post.reserve(net.layers() + 1);
    fp.post.push_back(x);
    for (std::size_t l = 0; l < net.layers(); ++l) {
        Matrix z = matmul(fp.post.back(), net.W[l]);
        const std::vector<double>& bias = net.b[l];
        for (std::size_t i = 0; i < z.rows; ++i) {
            double* zi = z.row(i);
            for (std::size_t j = 0; j < z.cols; ++j) zi[j] += bias[j];
        }
        switch (net.spec[l].act) {
            case Act::linear: break;
            case Act::relu:
                for (double& v : z.a) v = v > 0.0 ? v : 0.0;
                break;
            case Act::tanh:
                for (double& v : z.a) v = std::tanh(v);
                break;
        }
        fp.post.push_back(std::move(z));
    }
    return fp;
}

struct Grads {
    std::vector<Matrix> dW;
    std::vector<std::vector<double>> db;

    static Grads zeros_like(const Net& net) {
        Grads g;
        for (std::size_t l = 0; l < net.layers(); ++l) {
            g.dW.emplace_back(net.W[l].rows, net.W[l].cols, 0.0);
            g.db.emplace_back(net.b[l].size(), 0.0);
        }
        return g;
    }
};

// Reverse pass from d(loss)/d(output); returns d(loss)/d(input) so callers
// can chain decoder gradients into the encoder.
inline Matrix backward(const Net& net, const ForwardPass& fp, const Matrix& d_out, Grads& grads) {
    if (fp.post.size() != net.layers() + 1)
        throw std::invalid_argument("backward: activations do not match net");
    if (d_out.rows != fp.post.back().rows || d_out.cols != fp.post.back().cols)
        throw std::invalid_argument("backward: output gradient shape mismatch");
    if (grads.dW.size() != net.layers()) grads = Grads::zeros_like(net);

    Matrix da = d_out;
    for (std::size_t li = net.layers(); li-- > 0;) {
        const Matrix& post = fp.post[li + 1];
        Matrix dz = std::move(da);
        switch (net.spec[li].act) {
            case Act::linear: break;
            case Act::relu:
                for (std::size_t i = 0; i < dz.a.size(); ++i)
                    if (post.a[i] <= 0.0) dz.a[i] = 0.0;
                break;
            case Act::tanh:
                for (std::size_t i = 0; i < dz.a.size(); ++i)
                    dz.a[i] *= 1.0 - post.a[i] * post.a[i];
                break;
        }
        grads.dW[li] = matmul_tn(fp.post[li], dz);
        grads.db[li] = col_sums(dz);
        da = matmul_nt(dz, net.W[li]);
    }
    return da;
}

inline void accumulate(Grads& into, const Grads& from) {
    for (std::size_t l = 0; l < into.dW.size(); ++l) {
        for (std::size_t i = 0; i < into.dW[l].a.size(); ++i) into.dW[l].a[i] += from.dW[l].a[i];
        for (std::size_t i = 0; i < into.db[l].size(); ++i) into.db[l][i] += from.db[l][i];
    }
}

inline void save_net(const Net& net, std::ostream& out) {
    out << "layers," << net.layers() << '\n';
    for (std::size_t l = 0; l < net.layers(); ++l) {
        out << "layer," << net.spec[l].in << ',' << net.spec[l].out << ','
            << to_string(net.spec[l].act) << '\n';
        for (std::size_t i = 0; i < net.W[l].rows; ++i) {
            const double* r = net.W[l].row(i);
            for (std::size_t j = 0; j < net.W[l].cols; ++j) {
                if (j) out << ',';
                out << format_double(r[j]);
            }
            out << '\n';
        }
        for (std::size_t j = 0; j < net.b[l].size(); ++j) {
            if (j) out << ',';
            out << format_double(net.b[l][j]);
        }
        out << '\n';
    }
}

inline Net load_net(const std::vector<std::string>& lines, std::size_t& pos) {
    auto next = [&]() -> std::vector<std::string> {
        if (pos >= lines.size()) throw std::runtime_error("checkpoint truncated");
        return split_csv_line(lines[pos++]);
    };
    auto head = next();
    if (head.size() != 2 || head[0] != "layers")
        throw std::runtime_error("checkpoint: expected layers,<count>");
    std::size_t count = std::stoul(head[1]);
    Net net;
    for (std::size_t l = 0; l < count; ++l) {
        auto spec_row = next();
        if (spec_row.size() != 4 || spec_row[0] != "layer")
            throw std::runtime_error("checkpoint: expected layer,in,out,activation");
        LayerSpec ls;
        ls.in = std::stoul(spec_row[1]);
        ls.out = std::stoul(spec_row[2]);
        ls.act = act_from_string(spec_row[3]);
        net.spec.push_back(ls);
        Matrix w(ls.in, ls.out);
        for (std::size_t i = 0; i < ls.in; ++i) {
            auto cells = next();
            if (cells.size() != ls.out) throw std::runtime_error("checkpoint: weight row width");
            for (std::size_t j = 0; j < ls.out; ++j)
                w(i, j) = parse_double(cells[j], "checkpoint", pos);
        }
        net.W.push_back(std::move(w));
        auto bias_row = next();
        if (bias_row.size() != ls.out) throw std::runtime_error("checkpoint: bias row width");
        std::vector<double> bias(ls.out);
        for (std::size_t j = 0; j < ls.out; ++j)
            bias[j] = parse_double(bias_row[j], "checkpoint", pos);
        net.b.push_back(std::move(bias));
    }
    return net;
}

}  // namespace zsl
