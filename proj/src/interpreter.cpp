#include "xmalkit/interpreter.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

#include "xmalkit/errors.hpp"

namespace xmalkit {

namespace {

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

std::vector<std::string> words_of(const std::string& phrase) {
    std::vector<std::string> words;
    std::istringstream in(phrase);
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

// Longest run of leading words shared by every phrase.
std::size_t common_word_prefix(const std::vector<std::vector<std::string>>& tokenized) {
    if (tokenized.empty()) return 0;
    std::size_t limit = tokenized[0].size();
    for (const auto& t : tokenized) limit = std::min(limit, t.size());
    std::size_t k = 0;
    while (k < limit) {
        for (std::size_t i = 1; i < tokenized.size(); ++i) {
            if (tokenized[i][k] != tokenized[0][k]) return k;
        }
        ++k;
    }
    return k;
}

std::string join_words(const std::vector<std::string>& words, std::size_t from, std::size_t to,
                       const char* sep = " ") {
    std::string out;
    for (std::size_t i = from; i < to; ++i) {
        if (i > from) out += sep;
        out += words[i];
    }
    return out;
}

// "Collect IMEI" + "Collect SMS" -> "Collect IMEI/SMS": shared leading
// words, then the distinct remainders joined with '/'.
std::string merge_phrases(const std::vector<std::string>& phrases) {
    std::vector<std::vector<std::string>> tokenized;
    tokenized.reserve(phrases.size());
    for (const auto& p : phrases) tokenized.push_back(words_of(p));
    std::size_t k = common_word_prefix(tokenized);
    std::string out = join_words(tokenized[0], 0, k);
    std::string tail;
    for (const auto& t : tokenized) {
        if (!tail.empty()) tail += "/";
        tail += join_words(t, k, t.size());
    }
    if (!tail.empty()) {
        if (!out.empty()) out += " ";
        out += tail;
    }
    return out;
}

}  // namespace

SemanticDatabase::SemanticDatabase(std::vector<SemanticEntry> entries)
    : entries_(std::move(entries)) {
    std::map<std::string, const SemanticEntry*> by_id;
    std::map<std::string, std::vector<const SemanticEntry*>> by_group;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const SemanticEntry& e = entries_[i];
        if (e.feature.empty()) {
            throw ConfigError("semantic database row with empty feature name");
        }
        auto [it, inserted] = by_feature_.emplace(e.feature, i);
        if (!inserted) {
            throw ConfigError("duplicate semantic database row for feature " + e.feature);
        }
        if (e.semantic_id.empty()) {
            if (!e.merge_group.empty()) {
                throw ConfigError("feature " + e.feature +
                                  " has a merge group but no semantic id");
            }
            continue;
        }
        auto [idit, fresh] = by_id.emplace(e.semantic_id, &e);
        if (!fresh) {
            const SemanticEntry& prev = *idit->second;
            if (prev.phrase != e.phrase || prev.merge_group != e.merge_group ||
                prev.behavior_phrase != e.behavior_phrase) {
                throw ConfigError("semantic id " + e.semantic_id +
                                  " is declared with conflicting phrase/group/behavior");
            }
        }
        if (!e.merge_group.empty() && fresh) {
            by_group[e.merge_group].push_back(&e);
        }
    }
    // Merged phrases are synthesized from the member phrases, so members of
    // a group must share a leading word and must stay distinguishable after
    // it; they must also agree on the behavior phrase, because the merged
    // item renders as a single clause.
    for (const auto& [group, members] : by_group) {
        if (members.size() < 2) continue;
        std::vector<std::vector<std::string>> tokenized;
        for (const auto* m : members) {
            if (m->behavior_phrase != members[0]->behavior_phrase) {
                throw ConfigError("merge group " + group +
                                  " mixes different behavior phrases");
            }
            tokenized.push_back(words_of(m->phrase));
        }
        std::size_t k = common_word_prefix(tokenized);
        if (k == 0) {
            throw ConfigError("merge group " + group +
                              " phrases share no leading word; cannot synthesize merges");
        }
        for (const auto& t : tokenized) {
            if (t.size() <= k) {
                throw ConfigError("merge group " + group +
                                  " has a phrase with no distinguishing suffix");
            }
        }
    }
}

const SemanticEntry* SemanticDatabase::lookup(const std::string& feature) const {
    auto it = by_feature_.find(feature);
    if (it == by_feature_.end()) return nullptr;
    return &entries_[it->second];
}

void SemanticDatabase::set_ordering(std::vector<OrderingRule> rules) {
    ordering_ = std::move(rules);
}

SemanticDatabase load_semantics(std::istream& in, const std::string& filename) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) {
        throw ParseError(filename, 1, "empty semantic database file");
    }
    ++lineno;
    if (trim(line) != "feature,semantic_id,semantic_phrase,merge_group,behavior_phrase") {
        throw ParseError(filename, lineno,
                         "expected header "
                         "'feature,semantic_id,semantic_phrase,merge_group,behavior_phrase'");
    }
    std::vector<SemanticEntry> entries;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) continue;
        auto fields = split_on(t, ',');
        if (fields.size() != 5) {
            throw ParseError(filename, lineno, "expected 5 fields, got " +
                                                   std::to_string(fields.size()));
        }
        SemanticEntry e;
        e.feature = trim(fields[0]);
        e.semantic_id = trim(fields[1]);
        e.phrase = trim(fields[2]);
        e.merge_group = trim(fields[3]);
        e.behavior_phrase = trim(fields[4]);
        if (e.feature.empty()) {
            throw ParseError(filename, lineno, "empty feature name");
        }
        if (!e.semantic_id.empty() && e.phrase.empty()) {
            throw ParseError(filename, lineno,
                             "semantic id without a phrase for feature " + e.feature);
        }
        entries.push_back(std::move(e));
    }
    try {
        return SemanticDatabase(std::move(entries));
    } catch (const ConfigError& err) {
        throw ConfigError(filename + ": " + err.what());
    }
}

SemanticDatabase load_semantics_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    return load_semantics(in, path);
}

namespace {

// Rejects rule sets that can never be satisfied: cycles among before pairs,
// and before rules that try to push something ahead of a rank_first id.
void validate_rules(const std::vector<OrderingRule>& rules, const std::string& filename) {
    std::vector<std::string> first_ids;
    std::map<std::string, std::vector<std::string>> succ;
    for (const auto& r : rules) {
        if (r.kind == OrderingRule::Kind::rank_first) {
            first_ids.push_back(r.a);
        } else {
            succ[r.a].push_back(r.b);
        }
    }
    for (const auto& r : rules) {
        if (r.kind != OrderingRule::Kind::before) continue;
        bool b_first = std::find(first_ids.begin(), first_ids.end(), r.b) != first_ids.end();
        bool a_first = std::find(first_ids.begin(), first_ids.end(), r.a) != first_ids.end();
        if (b_first && !a_first) {
            throw ConfigError(filename + ": rule 'before:" + r.a + "," + r.b +
                              "' contradicts 'first:" + r.b + "'");
        }
    }
    // Depth-first cycle detection over the before graph.
    std::map<std::string, int> state;  // 0 unseen, 1 on stack, 2 done
    std::function<void(const std::string&)> visit = [&](const std::string& node) {
        state[node] = 1;
        auto it = succ.find(node);
        if (it != succ.end()) {
            for (const auto& next : it->second) {
                int s = state.count(next) ? state[next] : 0;
                if (s == 1) {
                    throw ConfigError(filename + ": ordering rules form a cycle through '" +
                                      next + "'");
                }
                if (s == 0) visit(next);
            }
        }
        state[node] = 2;
    };
    for (const auto& [node, _] : succ) {
        if (!state.count(node)) visit(node);
    }
}

}  // namespace

std::vector<OrderingRule> load_ordering_rules(std::istream& in, const std::string& filename) {
    std::vector<OrderingRule> rules;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto colon = t.find(':');
        if (colon == std::string::npos) {
            throw ParseError(filename, lineno, "expected 'first:<id>' or 'before:<a>,<b>'");
        }
        std::string directive = trim(t.substr(0, colon));
        std::string rest = trim(t.substr(colon + 1));
        OrderingRule rule;
        if (directive == "first") {
            if (rest.empty()) {
                throw ParseError(filename, lineno, "first: requires a semantic id");
            }
            rule.kind = OrderingRule::Kind::rank_first;
            rule.a = rest;
        } else if (directive == "before") {
            auto parts = split_on(rest, ',');
            if (parts.size() != 2 || trim(parts[0]).empty() || trim(parts[1]).empty()) {
                throw ParseError(filename, lineno, "before: requires two semantic ids");
            }
            rule.kind = OrderingRule::Kind::before;
            rule.a = trim(parts[0]);
            rule.b = trim(parts[1]);
            if (rule.a == rule.b) {
                throw ParseError(filename, lineno, "before: ids must differ");
            }
        } else {
            throw ParseError(filename, lineno, "unknown directive '" + directive + "'");
        }
        rules.push_back(std::move(rule));
    }
    validate_rules(rules, filename);
    return rules;
}

std::vector<OrderingRule> load_ordering_rules_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    return load_ordering_rules(in, path);
}

bool SemanticItem::matches(const std::string& id) const {
    if (semantic_id == id) return true;
    if (!merge_group.empty() && merge_group == id) return true;
    return std::find(member_ids.begin(), member_ids.end(), id) != member_ids.end();
}

MatchResult match_semantics(const KeyFeatureList& keys, const SemanticDatabase& db) {
    MatchResult result;
    for (const auto& key : keys) {
        const SemanticEntry* entry = db.lookup(key.name);
        if (!entry) {
            result.warnings.push_back("no semantic entry for feature '" + key.name +
                                      "'; skipped");
            continue;
        }
        if (entry->semantic_id.empty()) {
            continue;  // declared semantic-free
        }
        // Absorb exact repeats of an already-collected semantic id.
        bool absorbed = false;
        for (auto& item : result.items) {
            if (std::find(item.member_ids.begin(), item.member_ids.end(), entry->semantic_id) !=
                item.member_ids.end()) {
                absorbed = true;
                break;
            }
        }
        if (absorbed) continue;
        // Fold into an existing item of the same merge group.
        if (!entry->merge_group.empty()) {
            bool folded = false;
            for (auto& item : result.items) {
                if (item.merge_group == entry->merge_group) {
                    item.member_ids.push_back(entry->semantic_id);
                    item.member_phrases.push_back(entry->phrase);
                    item.phrase = merge_phrases(item.member_phrases);
                    item.merged = true;
                    folded = true;
                    break;
                }
            }
            if (folded) continue;
        }
        SemanticItem item;
        item.semantic_id = entry->semantic_id;
        item.phrase = entry->phrase;
        item.merge_group = entry->merge_group;
        item.behavior_phrase = entry->behavior_phrase;
        item.member_ids.push_back(entry->semantic_id);
        item.member_phrases.push_back(entry->phrase);
        result.items.push_back(std::move(item));
    }
    return result;
}

std::vector<SemanticItem> order_semantics(std::vector<SemanticItem> items,
                                          const std::vector<OrderingRule>& rules) {
    std::size_t n = items.size();
    if (n < 2 || rules.empty()) return items;

    auto leads = [&](const SemanticItem& item) {
        for (const auto& r : rules) {
            if (r.kind == OrderingRule::Kind::rank_first && item.matches(r.a)) return true;
        }
        return false;
    };

    // precede[i][j]: item i must come before item j.
    std::vector<std::vector<bool>> precede(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) {
        bool i_leads = leads(items[i]);
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (i_leads && !leads(items[j])) {
                precede[i][j] = true;
                continue;
            }
            for (const auto& r : rules) {
                if (r.kind != OrderingRule::Kind::before) continue;
                // An item that matches both sides of a pair constrains
                // nothing (merged items can span a rule).
                if (items[i].matches(r.a) && items[j].matches(r.b) &&
                    !(items[i].matches(r.b) && items[j].matches(r.a))) {
                    precede[i][j] = true;
                    break;
                }
            }
        }
    }

    // Stable Kahn: always emit the lowest-index ready item.
    std::vector<bool> emitted(n, false);
    std::vector<SemanticItem> out;
    out.reserve(n);
    for (std::size_t step = 0; step < n; ++step) {
        std::size_t pick = n;
        for (std::size_t j = 0; j < n && pick == n; ++j) {
            if (emitted[j]) continue;
            bool ready = true;
            for (std::size_t i = 0; i < n; ++i) {
                if (!emitted[i] && precede[i][j]) {
                    ready = false;
                    break;
                }
            }
            if (ready) pick = j;
        }
        if (pick == n) {
            throw ConfigError("ordering rules are unsatisfiable for this semantic set");
        }
        emitted[pick] = true;
        out.push_back(std::move(items[pick]));
    }
    return out;
}

Description render_description(const std::vector<SemanticItem>& items) {
    Description d;
    for (const auto& item : items) {
        if (!item.behavior_phrase.empty()) {
            d.clauses.push_back(item.behavior_phrase);
        } else {
            d.clauses.push_back(item.phrase);
            d.warnings.push_back("no behavior phrase for semantic '" + item.semantic_id +
                                 "'; using its raw phrase");
        }
    }
    if (d.clauses.empty()) {
        d.warnings.push_back("no renderable semantics; description is empty");
        return d;
    }
    std::string text;
    for (std::size_t i = 0; i < d.clauses.size(); ++i) {
        if (i > 0) {
            text += ", ";
            if (i + 1 == d.clauses.size()) text += "and ";
        }
        text += d.clauses[i];
    }
    if (!text.empty() && text[0] >= 'a' && text[0] <= 'z') {
        text[0] = static_cast<char>(text[0] - 'a' + 'A');
    }
    d.text = std::move(text);
    return d;
}

Explanation explain(const AttentionModel& model, const Sample& sample, std::size_t top_n,
                    const SemanticDatabase& db) {
    Explanation ex;
    AttentionOutput out = forward(model, sample);
    ex.label = out.label;
    ex.probability = out.probability;
    ex.keys = key_features(model, sample, top_n);
    MatchResult matched = match_semantics(ex.keys, db);
    ex.semantics = order_semantics(std::move(matched.items), db.ordering());
    ex.description = render_description(ex.semantics);
    ex.warnings = std::move(matched.warnings);
    ex.warnings.insert(ex.warnings.end(), ex.description.warnings.begin(),
                       ex.description.warnings.end());
    return ex;
}

}  // namespace xmalkit
