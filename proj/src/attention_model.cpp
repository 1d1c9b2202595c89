#include "xmalkit/attention_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "xmalkit/errors.hpp"
#include "xmalkit/rng.hpp"

namespace xmalkit {

namespace {

constexpr const char* kModelMagic = "xmalkit-model v1";

std::vector<double> to_doubles(const std::vector<std::uint8_t>& bits) {
    std::vector<double> x(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        x[i] = bits[i] ? 1.0 : 0.0;
    }
    return x;
}

// Everything the backward pass needs to replay one forward evaluation.
struct ForwardTrace {
    std::vector<double> x;
    std::vector<double> scores;
    std::vector<double> alpha;
    std::vector<double> context;
    std::vector<std::vector<double>> pre;   // pre-activation per mlp layer
    std::vector<std::vector<double>> post;  // post-activation per mlp layer
    double logit = 0.0;
    double probability = 0.0;
};

ForwardTrace run_forward(const AttentionModel& model, const std::vector<std::uint8_t>& features) {
    if (features.size() != model.n_features()) {
        throw std::invalid_argument("forward: sample has " + std::to_string(features.size()) +
                                    " features, model expects " +
                                    std::to_string(model.n_features()));
    }
    ForwardTrace t;
    t.x = to_doubles(features);
    t.scores = nn::dense_forward(model.attention, t.x);
    t.alpha = nn::softmax(t.scores);
    t.context.resize(t.x.size());
    for (std::size_t i = 0; i < t.x.size(); ++i) {
        t.context[i] = t.alpha[i] * t.x[i];
    }
    const std::vector<double>* cur = &t.context;
    for (std::size_t l = 0; l < model.mlp.size(); ++l) {
        t.pre.push_back(nn::dense_forward(model.mlp[l], *cur));
        if (l + 1 < model.mlp.size()) {
            std::vector<double> act(t.pre.back().size());
            for (std::size_t i = 0; i < act.size(); ++i) {
                act[i] = nn::relu(t.pre.back()[i]);
            }
            t.post.push_back(std::move(act));
            cur = &t.post.back();
        }
    }
    t.logit = t.pre.back().at(0);
    t.probability = nn::sigmoid(t.logit);
    return t;
}

struct ParamLayout {
    std::vector<std::size_t> offsets;  // one per tensor, collect_params order
    std::size_t total = 0;
};

ParamLayout layout_of(const AttentionModel& model) {
    ParamLayout lay;
    std::size_t off = 0;
    lay.offsets.push_back(off);
    off += model.attention.weights.data.size();
    for (const auto& layer : model.mlp) {
        lay.offsets.push_back(off);
        off += layer.weights.data.size();
        lay.offsets.push_back(off);
        off += layer.bias.size();
    }
    lay.total = off;
    return lay;
}

}  // namespace

AttentionModel make_attention_model(const FeatureDictionary& dict,
                                    const std::vector<std::size_t>& hidden_sizes,
                                    std::uint64_t seed) {
    for (std::size_t h : hidden_sizes) {
        if (h == 0) throw std::invalid_argument("hidden layer sizes must be positive");
    }
    AttentionModel model;
    model.dict = dict;
    std::size_t n = dict.size();
    model.attention = nn::DenseLayer(n, n, /*with_bias=*/false);
    std::size_t in_dim = n;
    for (std::size_t h : hidden_sizes) {
        model.mlp.emplace_back(h, in_dim);
        in_dim = h;
    }
    model.mlp.emplace_back(1, in_dim);
    Rng rng(seed);
    nn::init_layer(model.attention, rng);
    for (auto& layer : model.mlp) {
        nn::init_layer(layer, rng);
    }
    return model;
}

AttentionOutput forward(const AttentionModel& model, const std::vector<std::uint8_t>& features) {
    ForwardTrace t = run_forward(model, features);
    AttentionOutput out;
    out.scores = std::move(t.scores);
    out.weights = std::move(t.alpha);
    out.weighted_features = std::move(t.context);
    out.probability = t.probability;
    out.label = t.probability > 0.5 ? 1 : 0;
    return out;
}

AttentionOutput forward(const AttentionModel& model, const Sample& sample) {
    return forward(model, sample.features);
}

int predict(const AttentionModel& model, const Sample& sample) {
    return forward(model, sample).label;
}

std::vector<double> collect_params(const AttentionModel& model) {
    std::vector<double> flat;
    flat.reserve(layout_of(model).total);
    flat.insert(flat.end(), model.attention.weights.data.begin(),
                model.attention.weights.data.end());
    for (const auto& layer : model.mlp) {
        flat.insert(flat.end(), layer.weights.data.begin(), layer.weights.data.end());
        flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
    }
    return flat;
}

void assign_params(AttentionModel& model, const std::vector<double>& flat) {
    if (flat.size() != layout_of(model).total) {
        throw std::invalid_argument("assign_params: flat vector size disagrees with model");
    }
    std::size_t off = 0;
    std::copy_n(flat.begin() + off, model.attention.weights.data.size(),
                model.attention.weights.data.begin());
    off += model.attention.weights.data.size();
    for (auto& layer : model.mlp) {
        std::copy_n(flat.begin() + off, layer.weights.data.size(), layer.weights.data.begin());
        off += layer.weights.data.size();
        std::copy_n(flat.begin() + off, layer.bias.size(), layer.bias.begin());
        off += layer.bias.size();
    }
}

double batch_loss_and_grad(const AttentionModel& model, const std::vector<const Sample*>& batch,
                           std::vector<double>* grad) {
    if (batch.empty()) {
        throw std::invalid_argument("batch_loss_and_grad: empty batch");
    }
    const ParamLayout lay = layout_of(model);
    if (grad) {
        grad->assign(lay.total, 0.0);
    }
    std::size_t n = model.n_features();
    double total_loss = 0.0;

    for (const Sample* sp : batch) {
        if (!sp->label) {
            throw std::invalid_argument("cannot compute loss for unlabeled sample " + sp->id);
        }
        double label = static_cast<double>(*sp->label);
        ForwardTrace t = run_forward(model, sp->features);
        auto bce = nn::sigmoid_bce_loss(t.logit, label);
        total_loss += bce.loss;
        if (!grad) continue;

        // Backward through the mlp. delta = d(loss)/d(pre-activation).
        std::vector<double> delta(1, bce.dlogit);
        for (std::size_t li = model.mlp.size(); li-- > 0;) {
            const nn::DenseLayer& layer = model.mlp[li];
            const std::vector<double>& input = li == 0 ? t.context : t.post[li - 1];
            std::size_t w_off = lay.offsets[1 + 2 * li];
            std::size_t b_off = lay.offsets[1 + 2 * li + 1];
            std::vector<double> prev(layer.in_dim(), 0.0);
            for (std::size_t i = 0; i < layer.out_dim(); ++i) {
                double d = delta[i];
                (*grad)[b_off + i] += d;
                double* grow = &(*grad)[w_off + i * layer.in_dim()];
                const double* wrow = &layer.weights.data[i * layer.in_dim()];
                for (std::size_t j = 0; j < layer.in_dim(); ++j) {
                    grow[j] += d * input[j];
                    prev[j] += wrow[j] * d;
                }
            }
            if (li > 0) {
                for (std::size_t j = 0; j < prev.size(); ++j) {
                    if (t.pre[li - 1][j] <= 0.0) prev[j] = 0.0;
                }
            }
            delta = std::move(prev);
        }

        // delta now holds d(loss)/d(context).
        // context = alpha (*) x, so d/d(alpha) = delta (*) x, and the softmax
        // jacobian gives d/d(scores) = alpha (*) (dalpha - <alpha, dalpha>).
        std::vector<double> dalpha(n);
        for (std::size_t j = 0; j < n; ++j) {
            dalpha[j] = delta[j] * t.x[j];
        }
        double inner = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            inner += t.alpha[j] * dalpha[j];
        }
        // scores = A x: d/dA[j][k] = dscores[j] * x[k]. Only active features
        // contribute columns.
        for (std::size_t j = 0; j < n; ++j) {
            double ds = t.alpha[j] * (dalpha[j] - inner);
            if (ds == 0.0) continue;
            double* arow = &(*grad)[lay.offsets[0] + j * n];
            for (std::size_t k = 0; k < n; ++k) {
                if (t.x[k] != 0.0) arow[k] += ds;
            }
        }
    }

    double inv = 1.0 / static_cast<double>(batch.size());
    if (grad) {
        for (double& g : *grad) g *= inv;
    }
    return total_loss * inv;
}

TrainResult train_attention(const std::vector<Sample>& train_set, const FeatureDictionary& dict,
                            const nn::TrainConfig& config,
                            const std::vector<std::size_t>& hidden_sizes) {
    config.validate();
    if (train_set.empty()) {
        throw std::invalid_argument("training set is empty");
    }
    bool saw[2] = {false, false};
    for (const auto& s : train_set) {
        if (!s.label) {
            throw std::invalid_argument("training requires labels; sample " + s.id +
                                        " has none");
        }
        if (s.features.size() != dict.size()) {
            throw std::invalid_argument("sample " + s.id + " does not match dictionary size");
        }
        saw[static_cast<std::size_t>(*s.label)] = true;
    }
    if (!saw[0] || !saw[1]) {
        throw std::invalid_argument(
            "training set contains a single class; need both malicious and benign samples");
    }

    TrainResult result;
    result.model = make_attention_model(dict, hidden_sizes, config.seed);
    result.model.config = config;

    std::vector<double> params = collect_params(result.model);
    nn::AdamState adam(params.size());
    Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ull);

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> grad;
    std::vector<const Sample*> batch;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            std::size_t stop = std::min(order.size(), start + config.batch_size);
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) {
                batch.push_back(&train_set[order[i]]);
            }
            double loss = batch_loss_and_grad(result.model, batch, &grad);
            epoch_sum += loss * static_cast<double>(batch.size());
            if (config.optimizer == nn::Optimizer::adam) {
                nn::adam_step(params, grad, adam, config);
            } else {
                nn::sgd_step(params, grad, config);
            }
            assign_params(result.model, params);
        }
        result.epoch_loss.push_back(epoch_sum / static_cast<double>(order.size()));
    }
    return result;
}

KeyFeatureList key_features(const AttentionModel& model, const Sample& sample, std::size_t n) {
    AttentionOutput out = forward(model, sample);
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < sample.features.size(); ++i) {
        if (sample.features[i]) active.push_back(i);
    }
    std::sort(active.begin(), active.end(), [&](std::size_t a, std::size_t b) {
        if (out.weights[a] != out.weights[b]) return out.weights[a] > out.weights[b];
        return a < b;
    });
    if (active.size() > n) active.resize(n);
    KeyFeatureList keys;
    keys.reserve(active.size());
    for (std::size_t idx : active) {
        keys.push_back({idx, model.dict.entry(idx).name, out.weights[idx]});
    }
    return keys;
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void save_model(std::ostream& out, const AttentionModel& model) {
    out << kModelMagic << '\n';
    out << "dict_fingerprint " << model.dict.fingerprint() << '\n';
    out << "n_features " << model.n_features() << '\n';
    out << "hidden " << (model.mlp.size() - 1);
    for (std::size_t i = 0; i + 1 < model.mlp.size(); ++i) {
        out << ' ' << model.mlp[i].out_dim();
    }
    out << '\n';
    out << "optimizer " << nn::optimizer_name(model.config.optimizer) << '\n';
    out << "learning_rate " << fmt_double(model.config.learning_rate) << '\n';
    out << "epochs " << model.config.epochs << '\n';
    out << "batch_size " << model.config.batch_size << '\n';
    out << "seed " << model.config.seed << '\n';
    out << "attention " << model.attention.out_dim() << ' ' << model.attention.in_dim() << '\n';
    for (std::size_t i = 0; i < model.attention.out_dim(); ++i) {
        for (std::size_t j = 0; j < model.attention.in_dim(); ++j) {
            if (j) out << ' ';
            out << fmt_double(model.attention.weights(i, j));
        }
        out << '\n';
    }
    for (const auto& layer : model.mlp) {
        out << "layer " << layer.out_dim() << ' ' << layer.in_dim() << '\n';
        for (std::size_t i = 0; i < layer.out_dim(); ++i) {
            for (std::size_t j = 0; j < layer.in_dim(); ++j) {
                if (j) out << ' ';
                out << fmt_double(layer.weights(i, j));
            }
            out << '\n';
        }
        for (std::size_t i = 0; i < layer.out_dim(); ++i) {
            if (i) out << ' ';
            out << fmt_double(layer.bias[i]);
        }
        out << '\n';
    }
    out << "end\n";
}

void save_model_file(const std::string& path, const AttentionModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    save_model(out, model);
    if (!out) {
        throw std::runtime_error("failed writing model to " + path);
    }
}

namespace {

// The operator() overload on Matrix is non-const on purpose here; parsing
// fills a default-constructed model in place.
void expect_word(std::istream& in, const std::string& want, const std::string& filename) {
    std::string got;
    if (!(in >> got) || got != want) {
        throw ParseError(filename, 0, "malformed model file: expected '" + want + "', got '" +
                                          got + "'");
    }
}

}  // namespace

AttentionModel load_model(std::istream& in, const FeatureDictionary& dict,
                          const std::string& filename) {
    std::string line;
    if (!std::getline(in, line) || line != kModelMagic) {
        throw ParseError(filename, 1, "not a model file (bad magic line)");
    }

    AttentionModel model;
    model.dict = dict;

    expect_word(in, "dict_fingerprint", filename);
    std::string fp;
    in >> fp;
    if (fp != dict.fingerprint()) {
        throw DictMismatchError("model was trained against a different feature dictionary "
                                "(fingerprint " + fp + ", dictionary has " + dict.fingerprint() +
                                ")");
    }

    expect_word(in, "n_features", filename);
    std::size_t n = 0;
    in >> n;
    if (n != dict.size()) {
        throw DictMismatchError("model expects " + std::to_string(n) +
                                " features, dictionary has " + std::to_string(dict.size()));
    }

    expect_word(in, "hidden", filename);
    std::size_t n_hidden = 0;
    in >> n_hidden;
    std::vector<std::size_t> hidden(n_hidden);
    for (auto& h : hidden) in >> h;

    expect_word(in, "optimizer", filename);
    std::string opt;
    in >> opt;
    model.config.optimizer = nn::parse_optimizer(opt);
    expect_word(in, "learning_rate", filename);
    in >> model.config.learning_rate;
    expect_word(in, "epochs", filename);
    in >> model.config.epochs;
    expect_word(in, "batch_size", filename);
    in >> model.config.batch_size;
    expect_word(in, "seed", filename);
    in >> model.config.seed;

    expect_word(in, "attention", filename);
    std::size_t rows = 0, cols = 0;
    in >> rows >> cols;
    if (rows != n || cols != n) {
        throw ParseError(filename, 0, "attention matrix must be square over the dictionary");
    }
    model.attention = nn::DenseLayer(n, n, /*with_bias=*/false);
    for (double& w : model.attention.weights.data) in >> w;

    std::size_t expect_in = n;
    for (std::size_t li = 0; li <= n_hidden; ++li) {
        expect_word(in, "layer", filename);
        std::size_t out_dim = 0, in_dim = 0;
        in >> out_dim >> in_dim;
        if (in_dim != expect_in) {
            throw ParseError(filename, 0, "mlp layer dimensions do not chain");
        }
        std::size_t want_out = li < n_hidden ? hidden[li] : 1;
        if (out_dim != want_out) {
            throw ParseError(filename, 0, "mlp layer size disagrees with hidden declaration");
        }
        nn::DenseLayer layer(out_dim, in_dim);
        for (double& w : layer.weights.data) in >> w;
        for (double& b : layer.bias) in >> b;
        model.mlp.push_back(std::move(layer));
        expect_in = out_dim;
    }
    expect_word(in, "end", filename);
    if (!in) {
        throw ParseError(filename, 0, "truncated model file");
    }
    return model;
}

AttentionModel load_model_file(const std::string& path, const FeatureDictionary& dict) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    return load_model(in, dict, path);
}

}  // namespace xmalkit
