#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace xmalkit {

enum class FeatureKind { api_call, permission };

FeatureKind parse_feature_kind(const std::string& name);
std::string feature_kind_name(FeatureKind kind);

struct FeatureEntry {
    std::string name;
    FeatureKind kind;
};

// Immutable, ordered list of feature names. Feature positions in every
// sample bit-vector are defined by this order, so a trained model is only
// meaningful against the exact dictionary it was trained with; fingerprint()
// is embedded in persisted models to enforce that.
class FeatureDictionary {
public:
    FeatureDictionary() = default;
    explicit FeatureDictionary(std::vector<FeatureEntry> entries);

    std::size_t size() const { return entries_.size(); }
    const FeatureEntry& entry(std::size_t i) const { return entries_.at(i); }
    const std::vector<FeatureEntry>& entries() const { return entries_; }

    // Index of a feature name, or nullopt if absent.
    std::optional<std::size_t> find(const std::string& name) const;

    std::size_t count_kind(FeatureKind kind) const;

    // FNV-1a over the ordered (name, kind) sequence, as a hex string.
    std::string fingerprint() const;

private:
    std::vector<FeatureEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Header `name,kind` followed by one feature per row. Duplicate names and
// unknown kinds raise ParseError with the offending line number.
FeatureDictionary load_dictionary(std::istream& in, const std::string& filename = "dictionary");
FeatureDictionary load_dictionary_file(const std::string& path);

struct Sample {
    std::string id;
    std::vector<std::uint8_t> features;  // one bit per dictionary entry
    std::optional<int> label;            // 1 = malicious, 0 = benign

    std::size_t active_count() const;
};

// Rows of `id,label,feature1;feature2;...`. The label field may be empty
// only when allow_unlabeled is set (prediction inputs). Unknown feature
// names, malformed labels and repeated sample ids raise ParseError with the
// line number.
std::vector<Sample> load_samples(std::istream& in, const FeatureDictionary& dict,
                                 bool allow_unlabeled = false,
                                 const std::string& filename = "samples");
std::vector<Sample> load_samples_file(const std::string& path, const FeatureDictionary& dict,
                                      bool allow_unlabeled = false);

// Canonical writer: features are listed in dictionary order, so
// load -> save -> load is the identity on the parsed representation.
void save_samples(std::ostream& out, const std::vector<Sample>& samples,
                  const FeatureDictionary& dict);

struct SplitSpec {
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
    bool stratified = true;
};

struct SplitResult {
    std::vector<Sample> train;
    std::vector<Sample> test;
};

// Seed-deterministic shuffled split. The train set always gets
// round(train_fraction * n) samples; when stratified, that total is
// apportioned across labels by largest remainder, which keeps each split's
// class ratio within one sample of the input ratio. Stratified splitting
// requires every sample to carry a label.
SplitResult split(const std::vector<Sample>& samples, const SplitSpec& spec);

// One planted generation rule: features that switch on with `probability`
// for samples of class `label`. Features of a sample not covered by any rule
// for its class flip on with the corpus noise rate instead.
struct PlantedRule {
    int label = 1;
    std::vector<std::string> features;
    double probability = 1.0;
};

struct SyntheticSpec {
    std::size_t n_samples = 0;
    double malicious_fraction = 0.5;
    double noise_rate = 0.0;
    std::uint64_t seed = 0;
    std::vector<PlantedRule> rules;
};

// Deterministic labeled corpus with planted signal. The rule list must be
// non-empty; rule features must exist in the dictionary. When several rules
// of the same class cover one feature, the last rule wins.
std::vector<Sample> generate_synthetic(const FeatureDictionary& dict, const SyntheticSpec& spec);

}  // namespace xmalkit
