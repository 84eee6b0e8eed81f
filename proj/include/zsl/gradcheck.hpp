#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "zsl/network.hpp"

namespace zsl {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Central finite differences against analytic gradients. `params` points at
// the live parameter storage the loss closure reads. The absolute floor in
// the denominator keeps structurally zero gradients (dead relu units) from
// registering as spurious relative error.
inline GradCheckReport gradient_check(const std::function<double()>& loss,
                                      const std::vector<double*>& params,
                                      const std::vector<double>& analytic, double h = 1e-5) {
    GradCheckReport rep;
    rep.checked = params.size();
    for (std::size_t i = 0; i < params.size(); ++i) {
        double saved = *params[i];
        *params[i] = saved + h;
        double lp = loss();
        *params[i] = saved - h;
        double lm = loss();
        *params[i] = saved;
        double fd = (lp - lm) / (2.0 * h);
        double denom = std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-4});
        double rel = std::fabs(fd - analytic[i]) / denom;
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.worst_index = i;
            rep.worst_analytic = analytic[i];
            rep.worst_numeric = fd;
        }
    }
    return rep;
}

// Flattens every weight and bias of `net` (with its analytic gradient from
// `g`) onto the pointer/value lists gradient_check consumes.
inline void collect_params(Net& net, const Grads& g, std::vector<double*>& params,
                           std::vector<double>& analytic) {
    for (std::size_t l = 0; l < net.layers(); ++l) {
        for (std::size_t i = 0; i < net.W[l].a.size(); ++i) {
            params.push_back(&net.W[l].a[i]);
            analytic.push_back(g.dW[l].a[i]);
        }
        for (std::size_t i = 0; i < net.b[l].size(); ++i) {
            params.push_back(&net.b[l][i]);
            analytic.push_back(g.db[l][i]);
        }
    }
}

}  // namespace zsl
