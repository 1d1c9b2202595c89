#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xmalkit/rng.hpp"

namespace xmalkit::nn {

// Dense row-major matrix of doubles. Deliberately minimal: the models in
// this library are small enough that hand-rolled loops are both fast enough
// and easy to audit.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// Fully connected layer computing y = W x (+ b when use_bias).
// weights is out_dim x in_dim.
struct DenseLayer {
    Matrix weights;
    std::vector<double> bias;
    bool use_bias = true;

    DenseLayer() = default;
    DenseLayer(std::size_t out_dim, std::size_t in_dim, bool with_bias = true)
        : weights(out_dim, in_dim), bias(with_bias ? out_dim : 0, 0.0), use_bias(with_bias) {}

    std::size_t in_dim() const { return weights.cols; }
    std::size_t out_dim() const { return weights.rows; }
};

enum class Optimizer { adam, sgd };

struct TrainConfig {
    double learning_rate = 0.001;
    std::size_t epochs = 10;
    std::size_t batch_size = 20;
    Optimizer optimizer = Optimizer::adam;
    std::uint64_t seed = 0;

    // Throws std::invalid_argument if any field is out of range.
    void validate() const;
};

Optimizer parse_optimizer(const std::string& name);
std::string optimizer_name(Optimizer opt);

// First and second moment accumulators for Adam, over a flat parameter
// vector. step_count is the number of updates already applied.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    explicit AdamState(std::size_t n_params = 0) : m(n_params, 0.0), v(n_params, 0.0) {}
};

// y = W x (+ b). Throws std::invalid_argument on dimension mismatch.
std::vector<double> dense_forward(const DenseLayer& layer, const std::vector<double>& x);

// Numerically stable softmax: the max entry is subtracted before
// exponentiation, so arbitrarily large (or small) scores are safe.
std::vector<double> softmax(const std::vector<double>& scores);

double sigmoid(double z);
double relu(double z);

// Binary cross-entropy on a raw logit. Returns {loss, dloss/dlogit}.
// Evaluated in the log-sum-exp form so it stays finite for |logit| up to
// (and well past) 50. dlogit is exactly sigmoid(logit) - label.
struct BceResult {
    double loss;
    double dlogit;
};
BceResult sigmoid_bce_loss(double logit, double label);

// One Adam update over flat parameter/gradient vectors, with bias-corrected
// moments. Sizes must agree with the state; throws std::invalid_argument
// otherwise.
void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, const TrainConfig& cfg);

// Plain gradient descent update.
void sgd_step(std::vector<double>& params, const std::vector<double>& grads,
              const TrainConfig& cfg);

// Compares an analytic gradient against central finite differences of
// loss_fn and returns the worst relative error. The step for parameter i is
// scaled relative to its magnitude: h_i = 1e-5 * max(1, |p_i|).
double grad_check(const std::function<double(const std::vector<double>&)>& loss_fn,
                  const std::vector<double>& params,
                  const std::vector<double>& analytic_grad);

// Fills a layer with draws from U(-a, a), a = sqrt(6 / (in + out)).
void init_layer(DenseLayer& layer, Rng& rng);

}  // namespace xmalkit::nn
