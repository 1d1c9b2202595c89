#include "xmalkit/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "xmalkit/errors.hpp"
#include "xmalkit/rng.hpp"

namespace xmalkit {

LinearSvmModel train_svm(const std::vector<Sample>& train_set, const FeatureDictionary& dict,
                         const SvmConfig& cfg) {
    if (train_set.empty()) {
        throw std::invalid_argument("svm training set is empty");
    }
    if (!(cfg.lambda > 0.0)) {
        throw std::invalid_argument("svm lambda must be positive");
    }
    if (cfg.epochs == 0) {
        throw std::invalid_argument("svm epochs must be at least 1");
    }
    for (const auto& s : train_set) {
        if (!s.label) {
            throw std::invalid_argument("svm training requires labels; sample " + s.id +
                                        " has none");
        }
        if (s.features.size() != dict.size()) {
            throw std::invalid_argument("sample " + s.id + " does not match dictionary size");
        }
    }

    LinearSvmModel model;
    model.weights.assign(dict.size(), 0.0);
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    std::uint64_t t = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t idx : order) {
            const Sample& s = train_set[idx];
            double y = *s.label == 1 ? 1.0 : -1.0;
            ++t;
            double eta = 1.0 / (cfg.lambda * static_cast<double>(t));
            double margin = y * svm_margin(model, s);
            double shrink = 1.0 - eta * cfg.lambda;
            for (double& w : model.weights) w *= shrink;
            if (margin < 1.0) {
                for (std::size_t j = 0; j < s.features.size(); ++j) {
                    if (s.features[j]) model.weights[j] += eta * y;
                }
                model.bias += eta * y;
            }
        }
    }
    return model;
}

double svm_margin(const LinearSvmModel& model, const Sample& sample) {
    if (sample.features.size() != model.weights.size()) {
        throw std::invalid_argument("svm_margin: sample does not match model size");
    }
    double acc = model.bias;
    for (std::size_t j = 0; j < sample.features.size(); ++j) {
        if (sample.features[j]) acc += model.weights[j];
    }
    return acc;
}

int svm_predict(const LinearSvmModel& model, const Sample& sample) {
    return svm_margin(model, sample) > 0.0 ? 1 : 0;
}

KeyFeatureList svm_key_features(const LinearSvmModel& model, const FeatureDictionary& dict,
                                const Sample& sample, std::size_t n) {
    if (sample.features.size() != model.weights.size() || dict.size() != model.weights.size()) {
        throw std::invalid_argument("svm_key_features: model/dictionary/sample sizes disagree");
    }
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < sample.features.size(); ++i) {
        if (sample.features[i]) active.push_back(i);
    }
    std::sort(active.begin(), active.end(), [&](std::size_t a, std::size_t b) {
        if (model.weights[a] != model.weights[b]) return model.weights[a] > model.weights[b];
        return a < b;
    });
    if (active.size() > n) active.resize(n);
    KeyFeatureList keys;
    keys.reserve(active.size());
    for (std::size_t idx : active) {
        keys.push_back({idx, dict.entry(idx).name, model.weights[idx]});
    }
    return keys;
}

std::vector<double> weighted_ridge(const std::vector<std::vector<double>>& X,
                                   const std::vector<double>& y, const std::vector<double>& w,
                                   double lambda, std::vector<std::string>* warnings) {
    if (X.empty() || X.size() != y.size() || X.size() != w.size()) {
        throw std::invalid_argument("weighted_ridge: row counts disagree");
    }
    std::size_t d = X[0].size();
    if (d == 0) {
        throw std::invalid_argument("weighted_ridge: empty design row");
    }
    for (const auto& row : X) {
        if (row.size() != d) {
            throw std::invalid_argument("weighted_ridge: ragged design matrix");
        }
    }
    if (lambda < 0.0) {
        throw std::invalid_argument("weighted_ridge: lambda must be non-negative");
    }

    // Normal equations: (X^T W X + lambda * D) b = X^T W y, where D is the
    // identity with a zero in the intercept (last) slot.
    std::vector<std::vector<double>> base(d, std::vector<double>(d, 0.0));
    std::vector<double> rhs(d, 0.0);
    for (std::size_t r = 0; r < X.size(); ++r) {
        double wr = w[r];
        if (wr == 0.0) continue;
        const auto& row = X[r];
        for (std::size_t i = 0; i < d; ++i) {
            double wi = wr * row[i];
            rhs[i] += wi * y[r];
            for (std::size_t j = i; j < d; ++j) {
                base[i][j] += wi * row[j];
            }
        }
    }
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            base[i][j] = base[j][i];
        }
    }

    double lam = lambda;
    for (int attempt = 0; attempt < 9; ++attempt) {
        std::vector<std::vector<double>> a = base;
        for (std::size_t i = 0; i + 1 < d; ++i) {
            a[i][i] += lam;
        }
        std::vector<double> b = rhs;

        // Gaussian elimination with partial pivoting.
        bool singular = false;
        std::vector<std::size_t> perm(d);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t col = 0; col < d && !singular; ++col) {
            std::size_t pivot = col;
            for (std::size_t r2 = col + 1; r2 < d; ++r2) {
                if (std::abs(a[r2][col]) > std::abs(a[pivot][col])) pivot = r2;
            }
            if (std::abs(a[pivot][col]) < 1e-12) {
                singular = true;
                break;
            }
            std::swap(a[col], a[pivot]);
            std::swap(b[col], b[pivot]);
            for (std::size_t r2 = col + 1; r2 < d; ++r2) {
                double f = a[r2][col] / a[col][col];
                if (f == 0.0) continue;
                for (std::size_t c2 = col; c2 < d; ++c2) {
                    a[r2][c2] -= f * a[col][c2];
                }
                b[r2] -= f * b[col];
            }
        }
        if (!singular) {
            std::vector<double> sol(d, 0.0);
            for (std::size_t i = d; i-- > 0;) {
                double acc = b[i];
                for (std::size_t j = i + 1; j < d; ++j) {
                    acc -= a[i][j] * sol[j];
                }
                sol[i] = acc / a[i][i];
            }
            return sol;
        }
        double next = std::max(lam * 10.0, 1e-6);
        if (warnings) {
            warnings->push_back("degenerate surrogate design; raising ridge lambda to " +
                                std::to_string(next));
        }
        lam = next;
    }
    throw std::runtime_error("weighted_ridge: system stayed singular after lambda escalation");
}

SurrogateResult surrogate_explain(const PredictFn& predict_fn, const Sample& sample,
                                  const FeatureDictionary& dict, const SurrogateConfig& cfg,
                                  std::size_t n) {
    std::size_t d = dict.size();
    if (sample.features.size() != d) {
        throw std::invalid_argument("surrogate_explain: sample does not match dictionary");
    }
    if (cfg.num_perturbations == 0) {
        throw ConfigError("surrogate requires at least one perturbation");
    }
    double kw = cfg.kernel_width > 0.0 ? cfg.kernel_width
                                       : 0.75 * std::sqrt(static_cast<double>(d));

    SurrogateResult result;
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    std::vector<double> w;

    auto push_row = [&](const std::vector<std::uint8_t>& bits) {
        std::size_t hamming = 0;
        std::vector<double> row(d + 1, 0.0);
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = bits[j] ? 1.0 : 0.0;
            if (bits[j] != sample.features[j]) ++hamming;
        }
        row[d] = 1.0;  // intercept
        double dist = static_cast<double>(hamming);
        double weight = std::isinf(kw) ? 1.0 : std::exp(-(dist * dist) / (kw * kw));
        X.push_back(std::move(row));
        y.push_back(predict_fn(bits));
        w.push_back(weight);
    };

    bool exhaustive = d <= 16 && cfg.num_perturbations >= (std::size_t{1} << d);
    if (exhaustive) {
        result.exhaustive = true;
        std::vector<std::uint8_t> bits(d, 0);
        for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
            for (std::size_t j = 0; j < d; ++j) {
                bits[j] = (mask >> j) & 1u ? 1 : 0;
            }
            push_row(bits);
        }
    } else {
        push_row(sample.features);  // the instance itself anchors the fit
        Rng rng(cfg.seed);
        std::vector<std::size_t> positions(d);
        std::iota(positions.begin(), positions.end(), 0);
        for (std::size_t t = 0; t < cfg.num_perturbations; ++t) {
            std::size_t flips = 1 + static_cast<std::size_t>(rng.uniform_int(d));
            // Partial Fisher-Yates: the first `flips` entries become a
            // uniform random subset.
            for (std::size_t i = 0; i < flips; ++i) {
                std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(d - i));
                std::swap(positions[i], positions[j]);
            }
            std::vector<std::uint8_t> bits = sample.features;
            for (std::size_t i = 0; i < flips; ++i) {
                bits[positions[i]] ^= 1u;
            }
            push_row(bits);
        }
    }

    std::vector<double> sol = weighted_ridge(X, y, w, cfg.ridge_lambda, &result.warnings);
    result.intercept = sol[d];
    sol.resize(d);
    result.coefficients = std::move(sol);

    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < d; ++i) {
        if (sample.features[i]) active.push_back(i);
    }
    std::sort(active.begin(), active.end(), [&](std::size_t a, std::size_t b) {
        if (result.coefficients[a] != result.coefficients[b]) {
            return result.coefficients[a] > result.coefficients[b];
        }
        return a < b;
    });
    if (active.size() > n) active.resize(n);
    for (std::size_t idx : active) {
        result.keys.push_back({idx, dict.entry(idx).name, result.coefficients[idx]});
    }
    return result;
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

double mean_pairwise_jaccard(const std::vector<std::set<std::size_t>>& sets) {
    if (sets.size() < 2) return sets.empty() ? 0.0 : 1.0;
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t j = i + 1; j < sets.size(); ++j) {
            std::size_t inter = 0;
            for (std::size_t v : sets[i]) inter += sets[j].count(v);
            std::size_t uni = sets[i].size() + sets[j].size() - inter;
            total += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

}  // namespace

ComparisonReport compare_explainers(const AttentionModel& attention, const LinearSvmModel& svm,
                                    const std::vector<Sample>& eval_set,
                                    const std::map<std::string, ConceptSet>& truth,
                                    const SemanticDatabase& db, const SynonymMap& syn,
                                    std::size_t top_n, const SurrogateConfig& surrogate_cfg,
                                    bool with_surrogate) {
    std::vector<const Sample*> scorable;
    for (const auto& s : eval_set) {
        if (truth.count(s.id)) scorable.push_back(&s);
    }
    if (scorable.empty()) {
        throw std::invalid_argument("compare_explainers: no evaluation sample has truth");
    }

    ComparisonReport report;
    report.top_n = top_n;

    std::vector<std::string> methods = {"attention", "svm-global"};
    if (with_surrogate) methods.push_back("surrogate");

    PredictFn black_box = [&attention](const std::vector<std::uint8_t>& bits) {
        return forward(attention, bits).probability;
    };

    for (const auto& method : methods) {
        MethodReport mr;
        mr.method = method;
        mr.feature_frequency.assign(attention.n_features(), 0);
        std::vector<std::set<std::size_t>> key_sets;
        double ir_sum = 0.0;

        for (const Sample* s : scorable) {
            KeyFeatureList keys;
            if (method == "attention") {
                keys = key_features(attention, *s, top_n);
            } else if (method == "svm-global") {
                keys = svm_key_features(svm, attention.dict, *s, top_n);
            } else {
                SurrogateConfig cfg = surrogate_cfg;
                // Different samples must not share a perturbation stream.
                cfg.seed = surrogate_cfg.seed ^ fnv1a(s->id);
                SurrogateResult sr = surrogate_explain(black_box, *s, attention.dict, cfg, top_n);
                keys = std::move(sr.keys);
                for (auto& warning : sr.warnings) {
                    report.warnings.push_back(s->id + ": " + warning);
                }
            }
            std::set<std::size_t> key_set;
            for (const auto& k : keys) {
                mr.feature_frequency[k.index] += 1;
                key_set.insert(k.index);
            }
            key_sets.push_back(std::move(key_set));

            MatchResult matched = match_semantics(keys, db);
            auto ordered = order_semantics(std::move(matched.items), db.ordering());
            Description desc = render_description(ordered);
            auto concepts = concept_extract(desc.text, syn);
            ir_sum += ir_score(concepts, truth.at(s->id)).ir;
        }

        mr.samples_scored = scorable.size();
        mr.mean_ir = ir_sum / static_cast<double>(scorable.size());
        mr.key_set_overlap = mean_pairwise_jaccard(key_sets);
        report.methods.push_back(std::move(mr));
    }
    return report;
}

}  // namespace xmalkit
