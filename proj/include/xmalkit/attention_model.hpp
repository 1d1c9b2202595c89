#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "xmalkit/dataset.hpp"
#include "xmalkit/nn.hpp"

namespace xmalkit {

// Attention-over-features malware classifier.
//
// For a binary feature vector x (one bit per dictionary entry):
//   scores  e = A x          (square layer, no bias)
//   weights a = softmax(e)
//   context c = a (*) x      (elementwise; absent features stay exactly 0)
//   logit   z = mlp(c)       (ReLU hidden layers, 1-unit linear head)
//   p(malicious) = sigmoid(z)
//
// The attention weights double as the per-sample feature ranking that the
// interpreter consumes.
struct AttentionModel {
    nn::DenseLayer attention;         // n_features x n_features, no bias
    std::vector<nn::DenseLayer> mlp;  // hidden layers + head, all with bias
    FeatureDictionary dict;
    nn::TrainConfig config;

    std::size_t n_features() const { return attention.in_dim(); }
};

struct AttentionOutput {
    std::vector<double> scores;             // e, pre-softmax
    std::vector<double> weights;            // a, sums to 1
    std::vector<double> weighted_features;  // c = a (*) x
    double probability = 0.0;
    int label = 0;  // 1 iff probability > 0.5
};

struct KeyFeature {
    std::size_t index = 0;
    std::string name;
    double weight = 0.0;  // attention weight a[index]
};
using KeyFeatureList = std::vector<KeyFeature>;

// Freshly initialized (untrained) model: weights ~ U(-a, a) with
// a = sqrt(6/(fan_in+fan_out)), biases zero, drawn from `seed`.
AttentionModel make_attention_model(const FeatureDictionary& dict,
                                    const std::vector<std::size_t>& hidden_sizes,
                                    std::uint64_t seed);

// Pure function of (model, features); throws std::invalid_argument when the
// feature vector length disagrees with the model.
AttentionOutput forward(const AttentionModel& model, const std::vector<std::uint8_t>& features);
AttentionOutput forward(const AttentionModel& model, const Sample& sample);

int predict(const AttentionModel& model, const Sample& sample);

struct TrainResult {
    AttentionModel model;
    std::vector<double> epoch_loss;  // mean per-sample loss, one entry per epoch
};

// Mini-batch training with per-epoch reshuffling; the final short batch is
// trained, not dropped. Bit-reproducible for a fixed (config, sample order).
// Refuses unlabeled or single-class training sets.
TrainResult train_attention(const std::vector<Sample>& train_set, const FeatureDictionary& dict,
                            const nn::TrainConfig& config,
                            const std::vector<std::size_t>& hidden_sizes = {64, 16});

// Features present in the sample, ordered by descending attention weight
// (ties broken by dictionary order), truncated to the top n. A sample with
// no active features yields an empty list.
KeyFeatureList key_features(const AttentionModel& model, const Sample& sample, std::size_t n);

// Flat parameter access in a fixed canonical order (attention weights, then
// each mlp layer's weights and bias). Used by the optimizer and by gradient
// checking.
std::vector<double> collect_params(const AttentionModel& model);
void assign_params(AttentionModel& model, const std::vector<double>& flat);

// Mean BCE loss over a batch; if grad is non-null it receives the mean
// gradient in collect_params order (resized and overwritten).
double batch_loss_and_grad(const AttentionModel& model, const std::vector<const Sample*>& batch,
                           std::vector<double>* grad);

// Versioned plain-text persistence. The dictionary fingerprint is embedded
// on save and checked on load; a mismatch raises DictMismatchError. Values
// round-trip exactly (printed with 17 significant digits).
void save_model(std::ostream& out, const AttentionModel& model);
void save_model_file(const std::string& path, const AttentionModel& model);
AttentionModel load_model(std::istream& in, const FeatureDictionary& dict,
                          const std::string& filename = "model");
AttentionModel load_model_file(const std::string& path, const FeatureDictionary& dict);

}  // namespace xmalkit
