#include "xmalkit/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xmalkit::nn {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("learning_rate must be positive");
    }
    if (epochs == 0) {
        throw std::invalid_argument("epochs must be at least 1");
    }
    if (batch_size == 0) {
        throw std::invalid_argument("batch_size must be at least 1");
    }
}

Optimizer parse_optimizer(const std::string& name) {
    if (name == "adam") return Optimizer::adam;
    if (name == "sgd") return Optimizer::sgd;
    throw std::invalid_argument("unknown optimizer: " + name);
}

std::string optimizer_name(Optimizer opt) {
    return opt == Optimizer::adam ? "adam" : "sgd";
}

std::vector<double> dense_forward(const DenseLayer& layer, const std::vector<double>& x) {
    if (x.size() != layer.in_dim()) {
        throw std::invalid_argument("dense_forward: input has " + std::to_string(x.size()) +
                                    " entries, layer expects " + std::to_string(layer.in_dim()));
    }
    std::vector<double> y(layer.out_dim(), 0.0);
    for (std::size_t i = 0; i < layer.out_dim(); ++i) {
        double acc = layer.use_bias ? layer.bias[i] : 0.0;
        const double* row = &layer.weights.data[i * layer.in_dim()];
        for (std::size_t j = 0; j < layer.in_dim(); ++j) {
            acc += row[j] * x[j];
        }
        y[i] = acc;
    }
    return y;
}

std::vector<double> softmax(const std::vector<double>& scores) {
    if (scores.empty()) {
        throw std::invalid_argument("softmax: empty input");
    }
    double peak = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - peak);
        total += out[i];
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

double relu(double z) { return z > 0.0 ? z : 0.0; }

BceResult sigmoid_bce_loss(double logit, double label) {
    if (label != 0.0 && label != 1.0) {
        throw std::invalid_argument("sigmoid_bce_loss: label must be 0 or 1");
    }
    // max(z,0) - z*y + log(1 + exp(-|z|)) == -y*log(s) - (1-y)*log(1-s),
    // but never exponentiates a positive argument.
    double z = logit;
    double loss = std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
    return {loss, sigmoid(z) - label};
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, const TrainConfig& cfg) {
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != state.v.size()) {
        throw std::invalid_argument("adam_step: parameter/gradient/state sizes disagree");
    }
    cfg.validate();
    state.step_count += 1;
    double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        double mhat = state.m[i] / b1t;
        double vhat = state.v[i] / b2t;
        params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
}

void sgd_step(std::vector<double>& params, const std::vector<double>& grads,
              const TrainConfig& cfg) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument("sgd_step: parameter/gradient sizes disagree");
    }
    cfg.validate();
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] -= cfg.learning_rate * grads[i];
    }
}

double grad_check(const std::function<double(const std::vector<double>&)>& loss_fn,
                  const std::vector<double>& params,
                  const std::vector<double>& analytic_grad) {
    if (params.size() != analytic_grad.size()) {
        throw std::invalid_argument("grad_check: parameter/gradient sizes disagree");
    }
    std::vector<double> p = params;
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double h = 1e-5 * std::max(1.0, std::abs(p[i]));
        double saved = p[i];
        p[i] = saved + h;
        double up = loss_fn(p);
        p[i] = saved - h;
        double down = loss_fn(p);
        p[i] = saved;
        double numeric = (up - down) / (2.0 * h);
        double denom = std::max(std::abs(numeric), std::abs(analytic_grad[i]));
        if (denom < 1e-8) {
            continue;  // both gradients are zero to working precision
        }
        worst = std::max(worst, std::abs(numeric - analytic_grad[i]) / denom);
    }
    return worst;
}

void init_layer(DenseLayer& layer, Rng& rng) {
    double a = std::sqrt(6.0 / static_cast<double>(layer.in_dim() + layer.out_dim()));
    for (double& w : layer.weights.data) {
        w = rng.uniform(-a, a);
    }
    for (double& b : layer.bias) {
        b = 0.0;
    }
}

}  // namespace xmalkit::nn
