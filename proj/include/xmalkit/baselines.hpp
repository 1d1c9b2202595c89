#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "xmalkit/attention_model.hpp"
#include "xmalkit/dataset.hpp"
#include "xmalkit/evaluation.hpp"
#include "xmalkit/interpreter.hpp"

namespace xmalkit {

// Linear hinge-loss classifier; the single global weight vector is also its
// explanation device, which is exactly the contrast the comparison report
// is after.
struct LinearSvmModel {
    std::vector<double> weights;  // one per dictionary feature
    double bias = 0.0;
};

struct SvmConfig {
    double lambda = 1e-4;  // L2 regularization strength
    std::size_t epochs = 20;
    std::uint64_t seed = 0;
};

// Deterministic subgradient descent on the regularized hinge loss with
// step size 1/(lambda * t). Labels are mapped to -1/+1 (malicious = +1).
LinearSvmModel train_svm(const std::vector<Sample>& train_set, const FeatureDictionary& dict,
                         const SvmConfig& cfg);

double svm_margin(const LinearSvmModel& model, const Sample& sample);
int svm_predict(const LinearSvmModel& model, const Sample& sample);

// Features present in the sample ranked by signed global weight (most
// malicious-leaning first; ties broken by dictionary order), truncated to
// n. Absent features never appear, however large their weight.
KeyFeatureList svm_key_features(const LinearSvmModel& model, const FeatureDictionary& dict,
                                const Sample& sample, std::size_t n);

struct SurrogateConfig {
    std::size_t num_perturbations = 1000;
    double kernel_width = 0.0;  // <= 0 selects the default 0.75 * sqrt(n_features)
    double ridge_lambda = 1e-3;
    std::uint64_t seed = 0;
};

struct SurrogateResult {
    std::vector<double> coefficients;  // one per dictionary feature
    double intercept = 0.0;
    KeyFeatureList keys;  // active features by descending coefficient
    bool exhaustive = false;
    std::vector<std::string> warnings;
};

using PredictFn = std::function<double(const std::vector<std::uint8_t>&)>;

// Local linear surrogate of predict_fn around the sample: bit-flip
// neighbors, proximity-weighted with exp(-hamming^2 / kernel_width^2), fit
// by weighted ridge regression. When the dictionary has at most 16 features
// and the perturbation budget covers the whole hypercube, every vertex is
// enumerated exactly once instead of sampling. Zero perturbations is a
// configuration error.
SurrogateResult surrogate_explain(const PredictFn& predict_fn, const Sample& sample,
                                  const FeatureDictionary& dict, const SurrogateConfig& cfg,
                                  std::size_t n);

// Solves min_b sum_r w_r (y_r - x_r . b)^2 + lambda |b_penalized|^2 where
// the last column of X is expected to be the (unpenalized) intercept.
// Returns the coefficient vector. A singular system escalates lambda
// (floored at 1e-6) with a warning before giving up.
std::vector<double> weighted_ridge(const std::vector<std::vector<double>>& X,
                                   const std::vector<double>& y, const std::vector<double>& w,
                                   double lambda, std::vector<std::string>* warnings);

struct MethodReport {
    std::string method;  // "attention", "svm-global" or "surrogate"
    double mean_ir = 0.0;
    std::size_t samples_scored = 0;
    // Mean pairwise Jaccard similarity between the key-feature sets of
    // different samples: 1.0 means every sample gets the same explanation.
    double key_set_overlap = 0.0;
    // Appearance count per dictionary feature across all key lists. The
    // row total equals sum over samples of min(n, active features).
    std::vector<std::size_t> feature_frequency;
};

struct ComparisonReport {
    std::vector<MethodReport> methods;
    std::size_t top_n = 0;
    std::vector<std::string> warnings;
};

// Runs each explainer over every eval sample that has a truth entry, pushes
// the key lists through the shared interpreter, and scores the resulting
// concept lists. Methods: attention, svm-global, and (when with_surrogate)
// a surrogate fit around each sample using the attention model as the
// black box.
ComparisonReport compare_explainers(const AttentionModel& attention, const LinearSvmModel& svm,
                                    const std::vector<Sample>& eval_set,
                                    const std::map<std::string, ConceptSet>& truth,
                                    const SemanticDatabase& db, const SynonymMap& syn,
                                    std::size_t top_n, const SurrogateConfig& surrogate_cfg,
                                    bool with_surrogate);

}  // namespace xmalkit
