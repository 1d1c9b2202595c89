#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "xmalkit/attention_model.hpp"
#include "xmalkit/dataset.hpp"

namespace xmalkit {

// One row of the semantic database. An empty semantic_id means the feature
// is declared to carry no semantic (it is skipped silently, unlike a feature
// that is missing from the database entirely, which is skipped with a
// warning). An empty behavior_phrase makes rendering fall back to the raw
// semantic phrase.
struct SemanticEntry {
    std::string feature;
    std::string semantic_id;
    std::string phrase;
    std::string merge_group;  // entries sharing a group merge into one item
    std::string behavior_phrase;
};

struct OrderingRule {
    enum class Kind { rank_first, before };
    Kind kind = Kind::rank_first;
    std::string a;  // rank_first target, or the id that must precede
    std::string b;  // for before rules: the id that must follow
};

class SemanticDatabase {
public:
    SemanticDatabase() = default;

    // Validates global consistency: rows sharing a semantic_id must agree on
    // phrase, merge group and behavior phrase; rows sharing a merge group
    // must share a behavior phrase and a common leading word in their
    // phrases (the merged phrase is synthesized from them). Violations
    // raise ConfigError.
    explicit SemanticDatabase(std::vector<SemanticEntry> entries);

    const SemanticEntry* lookup(const std::string& feature) const;
    std::size_t size() const { return entries_.size(); }
    const std::vector<SemanticEntry>& entries() const { return entries_; }

    void set_ordering(std::vector<OrderingRule> rules);
    const std::vector<OrderingRule>& ordering() const { return ordering_; }

private:
    std::vector<SemanticEntry> entries_;
    std::unordered_map<std::string, std::size_t> by_feature_;
    std::vector<OrderingRule> ordering_;
};

// CSV with header `feature,semantic_id,semantic_phrase,merge_group,behavior_phrase`.
SemanticDatabase load_semantics(std::istream& in, const std::string& filename = "semantics");
SemanticDatabase load_semantics_file(const std::string& path);

// Line format: `first:<semantic_id>` or `before:<id_a>,<id_b>`; blank lines
// and `#` comments are ignored. The rule set is validated to be acyclic
// (ConfigError otherwise).
std::vector<OrderingRule> load_ordering_rules(std::istream& in,
                                              const std::string& filename = "ordering");
std::vector<OrderingRule> load_ordering_rules_file(const std::string& path);

// One deduplicated semantic produced from a key-feature list. member_ids
// records every semantic id folded into the item (always contains
// semantic_id); for merged items the phrase is synthesized from the member
// phrases ("Collect IMEI" + "Collect SMS" -> "Collect IMEI/SMS").
struct SemanticItem {
    std::string semantic_id;  // id of the first feature that produced the item
    std::string phrase;
    std::string merge_group;
    std::string behavior_phrase;
    std::vector<std::string> member_ids;
    std::vector<std::string> member_phrases;
    bool merged = false;

    bool matches(const std::string& id) const;
};

struct MatchResult {
    std::vector<SemanticItem> items;  // in key-feature (weight) order
    std::vector<std::string> warnings;
};

// Applies the two reduction rules over the key features, in ranking order:
// features with an already-seen semantic id are absorbed, and features whose
// merge group matches an existing item fold into that item with a combined
// phrase. Features without a database row yield a warning and are skipped.
MatchResult match_semantics(const KeyFeatureList& keys, const SemanticDatabase& db);

// Stable topological reorder: items matching a rank_first id lead, before
// pairs are respected, everything else keeps its incoming order. An item
// matches a rule id through its own id, any merged member id, or its merge
// group.
std::vector<SemanticItem> order_semantics(std::vector<SemanticItem> items,
                                          const std::vector<OrderingRule>& rules);

struct Description {
    std::string text;
    std::vector<std::string> clauses;
    std::vector<std::string> warnings;
};

// Joins the items' behavior phrases into one sentence: clauses separated by
// ", ", with "and " before the final clause, first letter capitalized.
// Items without a behavior phrase fall back to their raw semantic phrase
// (with a warning); no items at all yields an empty description and a
// warning.
Description render_description(const std::vector<SemanticItem>& items);

struct Explanation {
    int label = 0;
    double probability = 0.0;
    KeyFeatureList keys;
    std::vector<SemanticItem> semantics;  // ordered
    Description description;
    std::vector<std::string> warnings;  // match + render warnings combined
};

// Full pipeline: forward pass, top-n key features, semantic matching,
// ordering, rendering.
Explanation explain(const AttentionModel& model, const Sample& sample, std::size_t top_n,
                    const SemanticDatabase& db);

}  // namespace xmalkit
