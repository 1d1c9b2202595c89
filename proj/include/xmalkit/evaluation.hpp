#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "xmalkit/attention_model.hpp"
#include "xmalkit/dataset.hpp"
#include "xmalkit/interpreter.hpp"

namespace xmalkit {

// Confusion counts and the derived rates for a labeled evaluation set.
// Malicious (label 1) is the positive class.
struct DetectionReport {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double accuracy = 0.0;
    double f_measure = 0.0;
    std::vector<std::string> warnings;
};

// Throws std::invalid_argument on empty or mismatched inputs or labels
// outside {0,1}. Degenerate denominators resolve to 0 with a warning rather
// than NaN.
DetectionReport detection_metrics(const std::vector<int>& predicted,
                                  const std::vector<int>& actual);

// Maps description clauses (surfaces) to concept ids. A surface may map to
// several concepts, which is how compound clauses ("launch with system
// startup" covering both a launch concept and a startup-trigger concept)
// are represented: the file simply repeats the surface with each concept.
class SynonymMap {
public:
    SynonymMap() = default;

    // Lowercased, whitespace-collapsed, trailing-period-stripped form used
    // as the lookup key for both surfaces and clause text.
    static std::string canonicalize(const std::string& surface);

    void add(const std::string& surface, const std::string& concept_id);

    // Concepts for a surface; empty when unknown.
    const std::vector<std::string>* find(const std::string& surface) const;

    std::size_t size() const { return table_.size(); }

private:
    std::unordered_map<std::string, std::vector<std::string>> table_;
};

// Rows of `surface,concept_id` (no header).
SynonymMap load_synonyms(std::istream& in, const std::string& filename = "synonyms");
SynonymMap load_synonyms_file(const std::string& path);

struct ConceptSet {
    std::set<std::string> concepts;
};

// Rows of `sample_id: concept;concept;...`.
std::map<std::string, ConceptSet> load_truth(std::istream& in,
                                             const std::string& filename = "truth");
std::map<std::string, ConceptSet> load_truth_file(const std::string& path);

// Splits a rendered description into clauses and maps each through the
// synonym table. Clauses without a mapping are kept verbatim (canonical
// form) so they still count against precision downstream.
std::vector<std::string> concept_extract(const std::string& description, const SynonymMap& syn);

// Interpretability rate: harmonic mean of concept precision and recall.
// detect = |generated-set ∩ truth|, surplus = |generated-set \ truth|,
// total = |truth|. Values are kept at full precision; round_to(ir, 2) is
// what reports display.
struct IrScore {
    std::size_t detect = 0;
    std::size_t surplus = 0;
    std::size_t total = 0;
    double precision = 0.0;
    double recall = 0.0;
    double ir = 0.0;
};

// Throws std::invalid_argument when the truth set is empty.
IrScore ir_score(const std::vector<std::string>& generated_concepts, const ConceptSet& truth);

double round_to(double value, int digits);

// Ground-truth helper for planted corpora: the concepts a feature set
// implies, obtained by pushing each feature's rendered clause (behavior
// phrase, or raw phrase when absent) through the synonym table.
ConceptSet concepts_for_features(const std::vector<std::string>& feature_names,
                                 const SemanticDatabase& db, const SynonymMap& syn);

struct SweepPoint {
    std::size_t n = 0;
    double mean_ir = 0.0;
    std::size_t samples_scored = 0;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    std::size_t best_n = 0;  // argmax of mean_ir; ties resolve to smaller n
};

// Mean ir over every eval sample with a truth entry, for each key-feature
// budget n in [n_min, n_max]. Samples without truth are skipped; having no
// scorable sample at all is an error.
SweepResult sweep_n(const AttentionModel& model, const std::vector<Sample>& eval_set,
                    const std::map<std::string, ConceptSet>& truth, const SemanticDatabase& db,
                    const SynonymMap& syn, std::size_t n_min, std::size_t n_max);

// Spearman rank correlation with average ranks on ties. Inputs must be the
// same nonzero length.
double spearman_rank_correlation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace xmalkit
