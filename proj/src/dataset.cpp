#include "xmalkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "xmalkit/errors.hpp"
#include "xmalkit/rng.hpp"

namespace xmalkit {

namespace {

// Trims ASCII whitespace (and a stray CR from CRLF input) from both ends.
std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

FeatureKind parse_feature_kind(const std::string& name) {
    if (name == "api_call") return FeatureKind::api_call;
    if (name == "permission") return FeatureKind::permission;
    throw std::invalid_argument("unknown feature kind: " + name);
}

std::string feature_kind_name(FeatureKind kind) {
    return kind == FeatureKind::api_call ? "api_call" : "permission";
}

FeatureDictionary::FeatureDictionary(std::vector<FeatureEntry> entries)
    : entries_(std::move(entries)) {
    if (entries_.empty()) {
        throw std::invalid_argument("feature dictionary must not be empty");
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        auto [it, inserted] = index_.emplace(entries_[i].name, i);
        if (!inserted) {
            throw std::invalid_argument("duplicate feature name: " + entries_[i].name);
        }
    }
}

std::optional<std::size_t> FeatureDictionary::find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t FeatureDictionary::count_kind(FeatureKind kind) const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
        if (e.kind == kind) ++n;
    }
    return n;
}

std::string FeatureDictionary::fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64-bit offset basis
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        h ^= 0x1f;
        h *= 1099511628211ull;
    };
    for (const auto& e : entries_) {
        mix(e.name);
        mix(feature_kind_name(e.kind));
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

FeatureDictionary load_dictionary(std::istream& in, const std::string& filename) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) {
        throw ParseError(filename, 1, "empty dictionary file");
    }
    ++lineno;
    if (trim(line) != "name,kind") {
        throw ParseError(filename, lineno, "expected header 'name,kind'");
    }
    std::vector<FeatureEntry> entries;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) continue;
        auto fields = split_on(t, ',');
        if (fields.size() != 2) {
            throw ParseError(filename, lineno, "expected 2 fields, got " +
                                                   std::to_string(fields.size()));
        }
        std::string name = trim(fields[0]);
        std::string kind = trim(fields[1]);
        if (name.empty()) {
            throw ParseError(filename, lineno, "empty feature name");
        }
        FeatureKind k;
        try {
            k = parse_feature_kind(kind);
        } catch (const std::invalid_argument& e) {
            throw ParseError(filename, lineno, e.what());
        }
        for (const auto& existing : entries) {
            if (existing.name == name) {
                throw ParseError(filename, lineno, "duplicate feature name: " + name);
            }
        }
        entries.push_back({name, k});
    }
    if (entries.empty()) {
        throw ParseError(filename, lineno, "dictionary has no feature rows");
    }
    return FeatureDictionary(std::move(entries));
}

FeatureDictionary load_dictionary_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    return load_dictionary(in, path);
}

std::size_t Sample::active_count() const {
    std::size_t n = 0;
    for (auto b : features) n += b;
    return n;
}

std::vector<Sample> load_samples(std::istream& in, const FeatureDictionary& dict,
                                 bool allow_unlabeled, const std::string& filename) {
    std::vector<Sample> samples;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) continue;
        auto fields = split_on(t, ',');
        if (fields.size() != 3) {
            throw ParseError(filename, lineno,
                             "expected 'id,label,feature;feature;...' (3 fields), got " +
                                 std::to_string(fields.size()));
        }
        Sample s;
        s.id = trim(fields[0]);
        if (s.id.empty()) {
            throw ParseError(filename, lineno, "empty sample id");
        }
        if (!seen_ids.insert(s.id).second) {
            throw ParseError(filename, lineno, "duplicate sample id: " + s.id);
        }
        std::string label = trim(fields[1]);
        if (label.empty()) {
            if (!allow_unlabeled) {
                throw ParseError(filename, lineno, "missing label for sample " + s.id);
            }
        } else if (label == "0" || label == "1") {
            s.label = label == "1" ? 1 : 0;
        } else {
            throw ParseError(filename, lineno, "label must be 0 or 1, got '" + label + "'");
        }
        s.features.assign(dict.size(), 0);
        std::string feats = trim(fields[2]);
        if (!feats.empty()) {
            for (const auto& raw : split_on(feats, ';')) {
                std::string name = trim(raw);
                if (name.empty()) continue;
                auto idx = dict.find(name);
                if (!idx) {
                    throw ParseError(filename, lineno, "unknown feature: " + name);
                }
                s.features[*idx] = 1;
            }
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<Sample> load_samples_file(const std::string& path, const FeatureDictionary& dict,
                                      bool allow_unlabeled) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    return load_samples(in, dict, allow_unlabeled, path);
}

void save_samples(std::ostream& out, const std::vector<Sample>& samples,
                  const FeatureDictionary& dict) {
    for (const auto& s : samples) {
        if (s.features.size() != dict.size()) {
            throw std::invalid_argument("sample " + s.id + " does not match dictionary size");
        }
        out << s.id << ',';
        if (s.label) out << *s.label;
        out << ',';
        bool first = true;
        for (std::size_t i = 0; i < s.features.size(); ++i) {
            if (!s.features[i]) continue;
            if (!first) out << ';';
            out << dict.entry(i).name;
            first = false;
        }
        out << '\n';
    }
}

SplitResult split(const std::vector<Sample>& samples, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw std::invalid_argument("train_fraction must lie strictly between 0 and 1");
    }
    if (samples.empty()) {
        throw std::invalid_argument("cannot split an empty sample set");
    }
    std::size_t total_train =
        static_cast<std::size_t>(std::llround(spec.train_fraction * samples.size()));

    Rng rng(spec.seed);
    SplitResult result;

    if (!spec.stratified) {
        std::vector<std::size_t> order(samples.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        for (std::size_t i = 0; i < order.size(); ++i) {
            (i < total_train ? result.train : result.test).push_back(samples[order[i]]);
        }
        return result;
    }

    for (const auto& s : samples) {
        if (!s.label) {
            throw std::invalid_argument("stratified split requires labeled samples (sample " +
                                        s.id + " has no label)");
        }
    }

    // Group indices by label, then apportion total_train across groups by
    // largest remainder so the overall train count is exact and each class
    // ratio is off by at most one sample.
    std::vector<std::vector<std::size_t>> groups(2);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        groups[static_cast<std::size_t>(*samples[i].label)].push_back(i);
    }
    std::vector<std::size_t> take(2, 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        double exact = spec.train_fraction * static_cast<double>(groups[g].size());
        take[g] = static_cast<std::size_t>(std::floor(exact));
        assigned += take[g];
        remainders.push_back({exact - std::floor(exact), g});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t k = 0; assigned < total_train && k < remainders.size(); ++k) {
        std::size_t g = remainders[k].second;
        if (take[g] < groups[g].size()) {
            ++take[g];
            ++assigned;
        }
    }

    for (std::size_t g = 0; g < groups.size(); ++g) {
        rng.shuffle(groups[g]);
        for (std::size_t i = 0; i < groups[g].size(); ++i) {
            (i < take[g] ? result.train : result.test).push_back(samples[groups[g][i]]);
        }
    }
    return result;
}

std::vector<Sample> generate_synthetic(const FeatureDictionary& dict, const SyntheticSpec& spec) {
    if (spec.rules.empty()) {
        throw std::invalid_argument("synthetic generation requires at least one planted rule");
    }
    if (spec.n_samples == 0) {
        throw std::invalid_argument("n_samples must be at least 1");
    }
    if (!(spec.malicious_fraction > 0.0 && spec.malicious_fraction < 1.0)) {
        throw std::invalid_argument("malicious_fraction must lie strictly between 0 and 1");
    }
    if (spec.noise_rate < 0.0 || spec.noise_rate >= 1.0) {
        throw std::invalid_argument("noise_rate must lie in [0, 1)");
    }

    // Per-class probability override table; later rules win on overlap.
    std::vector<std::vector<double>> override_prob(
        2, std::vector<double>(dict.size(), -1.0));
    for (const auto& rule : spec.rules) {
        if (rule.label != 0 && rule.label != 1) {
            throw std::invalid_argument("planted rule label must be 0 or 1");
        }
        if (rule.probability < 0.0 || rule.probability > 1.0) {
            throw std::invalid_argument("planted rule probability must lie in [0, 1]");
        }
        if (rule.features.empty()) {
            throw std::invalid_argument("planted rule has no features");
        }
        for (const auto& name : rule.features) {
            auto idx = dict.find(name);
            if (!idx) {
                throw std::invalid_argument("planted rule names unknown feature: " + name);
            }
            override_prob[static_cast<std::size_t>(rule.label)][*idx] = rule.probability;
        }
    }

    std::size_t n_malicious =
        static_cast<std::size_t>(std::llround(spec.malicious_fraction * spec.n_samples));
    Rng rng(spec.seed);
    std::vector<Sample> samples;
    samples.reserve(spec.n_samples);

    int width = 1;
    for (std::size_t v = spec.n_samples; v >= 10; v /= 10) ++width;

    for (std::size_t i = 0; i < spec.n_samples; ++i) {
        Sample s;
        int label = i < n_malicious ? 1 : 0;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "syn%0*zu", width, i + 1);
        s.id = buf;
        s.label = label;
        s.features.assign(dict.size(), 0);
        const auto& probs = override_prob[static_cast<std::size_t>(label)];
        for (std::size_t j = 0; j < dict.size(); ++j) {
            double p = probs[j] >= 0.0 ? probs[j] : spec.noise_rate;
            if (p > 0.0 && rng.bernoulli(p)) {
                s.features[j] = 1;
            }
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace xmalkit
