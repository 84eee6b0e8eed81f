#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "zsl/network.hpp"

namespace zsl {

// Adam with bias correction; one instance per net.
class Adam {
  public:
    explicit Adam(const Net& net, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (std::size_t l = 0; l < net.layers(); ++l) {
            mW_.emplace_back(net.W[l].rows, net.W[l].cols, 0.0);
            vW_.emplace_back(net.W[l].rows, net.W[l].cols, 0.0);
            mb_.emplace_back(net.b[l].size(), 0.0);
            vb_.emplace_back(net.b[l].size(), 0.0);
        }
    }

    void update(Net& net, const Grads& grads) {
        ++step_;
        double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
        double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
        for (std::size_t l = 0; l < net.layers(); ++l) {
            check_finite(grads.dW[l].a.data(), grads.dW[l].a.size(), l, "weights");
            check_finite(grads.db[l].data(), grads.db[l].size(), l, "bias");
            apply(net.W[l].a.data(), grads.dW[l].a.data(), mW_[l].a.data(), vW_[l].a.data(),
                  net.W[l].a.size(), c1, c2);
            apply(net.b[l].data(), grads.db[l].data(), mb_[l].data(), vb_[l].data(),
                  net.b[l].size(), c1, c2);
        }
    }

    long long step() const { return step_; }

  private:
    static void check_finite(const double* g, std::size_t count, std::size_t layer,
                             const char* kind) {
        for (std::size_t i = 0; i < count; ++i)
            if (!std::isfinite(g[i]))
                throw std::runtime_error("non-finite gradient in layer " + std::to_string(layer) +
                                         " " + kind);
    }

    void apply(double* p, const double* g, double* m, double* v, std::size_t count, double c1,
               double c2) {
        for (std::size_t i = 0; i < count; ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            double mhat = m[i] / c1;
            double vhat = v[i] / c2;
            p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }

    double lr_, beta1_, beta2_, eps_;
    long long step_ = 0;
    std::vector<Matrix> mW_, vW_;
    std::vector<std::vector<double>> mb_, vb_;
};

}  // namespace zsl
