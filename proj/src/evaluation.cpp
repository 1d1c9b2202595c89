#include "xmalkit/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <stdexcept>

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

}  // namespace

DetectionReport detection_metrics(const std::vector<int>& predicted,
                                  const std::vector<int>& actual) {
    if (predicted.empty() || predicted.size() != actual.size()) {
        throw std::invalid_argument("detection_metrics: prediction/label lists must be "
                                    "non-empty and the same length");
    }
    DetectionReport r;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        int p = predicted[i];
        int a = actual[i];
        if ((p != 0 && p != 1) || (a != 0 && a != 1)) {
            throw std::invalid_argument("detection_metrics: labels must be 0 or 1");
        }
        if (p == 1 && a == 1) ++r.tp;
        else if (p == 1 && a == 0) ++r.fp;
        else if (p == 0 && a == 0) ++r.tn;
        else ++r.fn;
    }
    if (r.tp + r.fp == 0) {
        r.precision = 0.0;
        r.warnings.push_back("no positive predictions; precision reported as 0");
    } else {
        r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
    }
    if (r.tp + r.fn == 0) {
        r.recall = 0.0;
        r.warnings.push_back("no positive labels; recall reported as 0");
    } else {
        r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
    }
    r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(predicted.size());
    if (r.precision + r.recall > 0.0) {
        r.f_measure = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    }
    return r;
}

std::string SynonymMap::canonicalize(const std::string& surface) {
    std::string out;
    out.reserve(surface.size());
    bool pending_space = false;
    for (char c : surface) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::isspace(u)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += static_cast<char>(std::tolower(u));
    }
    while (!out.empty() && (out.back() == '.' || out.back() == '!')) {
        out.pop_back();
    }
    return out;
}

void SynonymMap::add(const std::string& surface, const std::string& concept_id) {
    std::string key = canonicalize(surface);
    if (key.empty() || concept_id.empty()) {
        throw std::invalid_argument("synonym rows need both a surface and a concept id");
    }
    auto& ids = table_[key];
    if (std::find(ids.begin(), ids.end(), concept_id) == ids.end()) {
        ids.push_back(concept_id);
    }
}

const std::vector<std::string>* SynonymMap::find(const std::string& surface) const {
    auto it = table_.find(canonicalize(surface));
    if (it == table_.end()) return nullptr;
    return &it->second;
}

SynonymMap load_synonyms(std::istream& in, const std::string& filename) {
    SynonymMap map;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto comma = t.rfind(',');
        if (comma == std::string::npos) {
            throw ParseError(filename, lineno, "expected 'surface,concept_id'");
        }
        std::string surface = trim(t.substr(0, comma));
        std::string concept_id = trim(t.substr(comma + 1));
        if (surface.empty() || concept_id.empty()) {
            throw ParseError(filename, lineno, "empty surface or concept id");
        }
        map.add(surface, concept_id);
    }
    return map;
}

SynonymMap load_synonyms_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    return load_synonyms(in, path);
}

std::map<std::string, ConceptSet> load_truth(std::istream& in, const std::string& filename) {
    std::map<std::string, ConceptSet> truth;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto colon = t.find(':');
        if (colon == std::string::npos) {
            throw ParseError(filename, lineno, "expected 'sample_id: concept;concept;...'");
        }
        std::string id = trim(t.substr(0, colon));
        if (id.empty()) {
            throw ParseError(filename, lineno, "empty sample id");
        }
        if (truth.count(id)) {
            throw ParseError(filename, lineno, "duplicate truth row for sample " + id);
        }
        ConceptSet set;
        for (const auto& raw : split_on(trim(t.substr(colon + 1)), ';')) {
            std::string c = trim(raw);
            if (!c.empty()) set.concepts.insert(c);
        }
        if (set.concepts.empty()) {
            throw ParseError(filename, lineno, "sample " + id + " lists no concepts");
        }
        truth.emplace(std::move(id), std::move(set));
    }
    return truth;
}

std::map<std::string, ConceptSet> load_truth_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    return load_truth(in, path);
}

std::vector<std::string> concept_extract(const std::string& description, const SynonymMap& syn) {
    std::vector<std::string> concepts;
    std::string canon = SynonymMap::canonicalize(description);
    if (canon.empty()) return concepts;
    for (std::string clause : split_on(canon, ',')) {
        clause = trim(clause);
        if (clause.rfind("and ", 0) == 0) {
            clause = clause.substr(4);
        }
        if (clause.empty()) continue;
        if (const auto* ids = syn.find(clause)) {
            concepts.insert(concepts.end(), ids->begin(), ids->end());
        } else {
            concepts.push_back(clause);  // unknown surface, counts as surplus
        }
    }
    return concepts;
}

IrScore ir_score(const std::vector<std::string>& generated_concepts, const ConceptSet& truth) {
    if (truth.concepts.empty()) {
        throw std::invalid_argument("ir_score: truth concept set must not be empty");
    }
    std::set<std::string> generated(generated_concepts.begin(), generated_concepts.end());
    IrScore s;
    s.total = truth.concepts.size();
    for (const auto& c : generated) {
        if (truth.concepts.count(c)) ++s.detect;
        else ++s.surplus;
    }
    if (s.detect + s.surplus > 0) {
        s.precision = static_cast<double>(s.detect) / static_cast<double>(s.detect + s.surplus);
    }
    s.recall = static_cast<double>(s.detect) / static_cast<double>(s.total);
    if (s.precision + s.recall > 0.0) {
        s.ir = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    }
    return s;
}

double round_to(double value, int digits) {
    double scale = std::pow(10.0, digits);
    return std::round(value * scale) / scale;
}

ConceptSet concepts_for_features(const std::vector<std::string>& feature_names,
                                 const SemanticDatabase& db, const SynonymMap& syn) {
    ConceptSet out;
    for (const auto& name : feature_names) {
        const SemanticEntry* entry = db.lookup(name);
        if (!entry || entry->semantic_id.empty()) continue;
        const std::string& clause =
            entry->behavior_phrase.empty() ? entry->phrase : entry->behavior_phrase;
        if (const auto* ids = syn.find(clause)) {
            out.concepts.insert(ids->begin(), ids->end());
        } else {
            out.concepts.insert(SynonymMap::canonicalize(clause));
        }
    }
    return out;
}

SweepResult sweep_n(const AttentionModel& model, const std::vector<Sample>& eval_set,
                    const std::map<std::string, ConceptSet>& truth, const SemanticDatabase& db,
                    const SynonymMap& syn, std::size_t n_min, std::size_t n_max) {
    if (n_min == 0 || n_min > n_max) {
        throw std::invalid_argument("sweep_n: need 1 <= n_min <= n_max");
    }
    std::vector<const Sample*> scorable;
    for (const auto& s : eval_set) {
        if (truth.count(s.id)) scorable.push_back(&s);
    }
    if (scorable.empty()) {
        throw std::invalid_argument("sweep_n: no evaluation sample has a truth entry");
    }
    SweepResult result;
    double best = -1.0;
    for (std::size_t n = n_min; n <= n_max; ++n) {
        double sum = 0.0;
        for (const Sample* s : scorable) {
            Explanation ex = explain(model, *s, n, db);
            auto concepts = concept_extract(ex.description.text, syn);
            sum += ir_score(concepts, truth.at(s->id)).ir;
        }
        SweepPoint point;
        point.n = n;
        point.samples_scored = scorable.size();
        point.mean_ir = sum / static_cast<double>(scorable.size());
        if (point.mean_ir > best) {
            best = point.mean_ir;
            result.best_n = n;
        }
        result.points.push_back(point);
    }
    return result;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman_rank_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || a.size() != b.size()) {
        throw std::invalid_argument("spearman: inputs must be non-empty and the same length");
    }
    std::vector<double> ra = average_ranks(a);
    std::vector<double> rb = average_ranks(b);
    double n = static_cast<double>(a.size());
    double mean = (n + 1.0) / 2.0;
    double num = 0.0, da = 0.0, db_ = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double xa = ra[i] - mean;
        double xb = rb[i] - mean;
        num += xa * xb;
        da += xa * xa;
        db_ += xb * xb;
    }
    if (da == 0.0 || db_ == 0.0) {
        return 0.0;  // a constant input carries no ordering information
    }
    return num / std::sqrt(da * db_);
}

}  // namespace xmalkit
