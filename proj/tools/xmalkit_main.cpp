// Command-line front end: corpus generation, training, prediction,
// explanation, evaluation, the key-feature-budget sweep, and the explainer
// comparison. Every artifact-writing command drops a manifest.json holding
// the resolved arguments and input hashes; `rerun` replays a manifest into
// a fresh output directory.
//
// Exit codes: 0 success, 2 input/config error, 3 model/dictionary
// fingerprint mismatch, 4 internal failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xmalkit/attention_model.hpp"
#include "xmalkit/baselines.hpp"
#include "xmalkit/dataset.hpp"
#include "xmalkit/errors.hpp"
#include "xmalkit/evaluation.hpp"
#include "xmalkit/interpreter.hpp"
#include "xmalkit/manifest.hpp"
#include "xmalkit/nn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string abs_path(const std::string& p) {
    return fs::absolute(fs::path(p)).lexically_normal().string();
}

// --seed wins; otherwise XMALKIT_SEED from the environment; otherwise 0.
std::uint64_t effective_seed(const std::optional<std::uint64_t>& cli_seed) {
    if (cli_seed) return *cli_seed;
    const char* env = std::getenv("XMALKIT_SEED");
    if (!env || !*env) return 0;
    std::string s(env);
    for (char c : s) {
        if (c < '0' || c > '9') {
            throw xmalkit::ConfigError("XMALKIT_SEED must be a non-negative integer, got '" +
                                       s + "'");
        }
    }
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw xmalkit::ConfigError("XMALKIT_SEED is out of range: '" + s + "'");
    }
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
    }
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    out << content;
    if (!out) {
        throw std::runtime_error("failed writing " + path);
    }
}

json explanation_record(const std::string& id, const xmalkit::Explanation& ex) {
    json rec;
    rec["id"] = id;
    rec["label"] = ex.label;
    rec["probability"] = ex.probability;
    json keys = json::array();
    for (const auto& k : ex.keys) {
        keys.push_back({{"name", k.name}, {"weight", k.weight}});
    }
    rec["key_features"] = std::move(keys);
    json sems = json::array();
    for (const auto& item : ex.semantics) {
        sems.push_back(item.phrase);
    }
    rec["semantics"] = std::move(sems);
    rec["description"] = ex.description.text;
    rec["warnings"] = ex.warnings;
    return rec;
}

std::string explanation_human(const std::string& id, const xmalkit::Explanation& ex) {
    std::string out;
    out += "sample " + id + "\n";
    out += "  prediction: " + std::string(ex.label ? "malicious" : "benign") +
           " (probability " + fmt_fixed(ex.probability, 6) + ")\n";
    out += "  key features:\n";
    for (const auto& k : ex.keys) {
        out += "    " + k.name + "  " + fmt_fixed(k.weight, 6) + "\n";
    }
    out += "  semantics:\n";
    for (const auto& item : ex.semantics) {
        out += "    " + item.phrase + "\n";
    }
    out += "  description: " + ex.description.text + "\n";
    for (const auto& w : ex.warnings) {
        out += "  warning: " + w + "\n";
    }
    return out;
}

struct CommonArgs {
    std::string dict_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string format = "human";
};

int dispatch(const std::vector<std::string>& args);

// ---------------------------------------------------------------- gen ----

int run_gen(const std::string& dict_path, const std::string& rules_path,
            const std::string& out_dir, std::optional<std::size_t> n_override,
            std::optional<double> noise_override, std::optional<double> fraction_override,
            std::optional<std::uint64_t> seed_opt, const std::string& semantics_path,
            const std::string& synonyms_path) {
    auto started = xmalkit::iso8601_utc_now();
    auto dict = xmalkit::load_dictionary_file(dict_path);

    std::ifstream rules_in(rules_path);
    if (!rules_in) {
        throw xmalkit::ParseError(rules_path, 0, "cannot open file");
    }
    json spec_json;
    try {
        rules_in >> spec_json;
    } catch (const json::exception& e) {
        throw xmalkit::ParseError(rules_path, 0, std::string("invalid JSON: ") + e.what());
    }

    xmalkit::SyntheticSpec spec;
    try {
        spec.n_samples = spec_json.value("n_samples", std::size_t{1000});
        spec.noise_rate = spec_json.value("noise_rate", 0.0);
        spec.malicious_fraction = spec_json.value("malicious_fraction", 0.5);
        for (const auto& r : spec_json.at("rules")) {
            xmalkit::PlantedRule rule;
            rule.label = r.at("label").get<int>();
            rule.probability = r.at("probability").get<double>();
            rule.features = r.at("features").get<std::vector<std::string>>();
            spec.rules.push_back(std::move(rule));
        }
    } catch (const json::exception& e) {
        throw xmalkit::ParseError(rules_path, 0,
                                  std::string("bad rules config: ") + e.what());
    }
    if (n_override) spec.n_samples = *n_override;
    if (noise_override) spec.noise_rate = *noise_override;
    if (fraction_override) spec.malicious_fraction = *fraction_override;
    spec.seed = effective_seed(seed_opt);

    std::vector<std::string> truth_features;
    if (spec_json.contains("truth_features")) {
        truth_features = spec_json.at("truth_features").get<std::vector<std::string>>();
        if (semantics_path.empty() || synonyms_path.empty()) {
            throw xmalkit::ConfigError(
                "rules config lists truth_features; --semantics and --synonyms are required "
                "to derive concept ground truth");
        }
    }

    auto samples = xmalkit::generate_synthetic(dict, spec);
    ensure_out_dir(out_dir);

    std::string samples_path = (fs::path(out_dir) / "samples.csv").string();
    {
        std::ofstream out(samples_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + samples_path + " for writing");
        xmalkit::save_samples(out, samples, dict);
    }

    xmalkit::RunManifest manifest;
    manifest.command = "gen";
    manifest.arguments = {"gen", "--dict", abs_path(dict_path), "--rules", abs_path(rules_path),
                          "--out-dir", abs_path(out_dir), "--seed", std::to_string(spec.seed)};
    manifest.inputs[abs_path(dict_path)] = xmalkit::file_content_hash(dict_path);
    manifest.inputs[abs_path(rules_path)] = xmalkit::file_content_hash(rules_path);
    manifest.dict_fingerprint = dict.fingerprint();
    manifest.seed = spec.seed;
    manifest.started_at = started;
    manifest.outputs.push_back(samples_path);

    if (!truth_features.empty()) {
        auto db = xmalkit::load_semantics_file(semantics_path);
        auto syn = xmalkit::load_synonyms_file(synonyms_path);
        manifest.arguments.insert(manifest.arguments.end(),
                                  {"--semantics", abs_path(semantics_path), "--synonyms",
                                   abs_path(synonyms_path)});
        manifest.inputs[abs_path(semantics_path)] = xmalkit::file_content_hash(semantics_path);
        manifest.inputs[abs_path(synonyms_path)] = xmalkit::file_content_hash(synonyms_path);

        std::string truth_path = (fs::path(out_dir) / "truth.csv").string();
        std::string content;
        for (const auto& s : samples) {
            if (!s.label || *s.label != 1) continue;
            std::vector<std::string> present;
            for (const auto& name : truth_features) {
                auto idx = dict.find(name);
                if (!idx) {
                    throw xmalkit::ConfigError("truth feature not in dictionary: " + name);
                }
                if (s.features[*idx]) present.push_back(name);
            }
            auto concepts = xmalkit::concepts_for_features(present, db, syn);
            if (concepts.concepts.empty()) continue;
            content += s.id + ": ";
            bool first = true;
            for (const auto& c : concepts.concepts) {
                if (!first) content += ";";
                content += c;
                first = false;
            }
            content += "\n";
        }
        write_text_file(truth_path, content);
        manifest.outputs.push_back(truth_path);
    }

    manifest.finished_at = xmalkit::iso8601_utc_now();
    std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
    xmalkit::save_manifest(manifest_path, manifest);

    std::cout << "generated " << samples.size() << " samples into " << out_dir << "\n";
    return 0;
}

// -------------------------------------------------------------- train ----

int run_train(const std::string& dict_path, const std::string& data_path,
              const std::string& out_dir, std::optional<std::uint64_t> seed_opt,
              std::size_t epochs, std::size_t batch_size, double lr,
              const std::string& optimizer, std::vector<std::size_t> hidden,
              double train_fraction) {
    auto started = xmalkit::iso8601_utc_now();
    auto dict = xmalkit::load_dictionary_file(dict_path);
    auto samples = xmalkit::load_samples_file(data_path, dict, /*allow_unlabeled=*/false);

    xmalkit::nn::TrainConfig cfg;
    cfg.learning_rate = lr;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.optimizer = xmalkit::nn::parse_optimizer(optimizer);
    cfg.seed = effective_seed(seed_opt);
    cfg.validate();
    if (hidden.empty()) hidden = {64, 16};

    ensure_out_dir(out_dir);
    std::string test_path;

    const std::vector<xmalkit::Sample>* train_set = &samples;
    xmalkit::SplitResult split_result;
    if (train_fraction < 1.0) {
        xmalkit::SplitSpec split_spec;
        split_spec.train_fraction = train_fraction;
        split_spec.seed = cfg.seed;
        split_result = xmalkit::split(samples, split_spec);
        train_set = &split_result.train;
        test_path = (fs::path(out_dir) / "test_split.csv").string();
        std::ofstream out(test_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + test_path + " for writing");
        xmalkit::save_samples(out, split_result.test, dict);
    }

    auto result = xmalkit::train_attention(*train_set, dict, cfg, hidden);

    std::string model_path = (fs::path(out_dir) / "model.txt").string();
    xmalkit::save_model_file(model_path, result.model);

    std::string trace_path = (fs::path(out_dir) / "loss_trace.csv").string();
    std::string trace = "epoch,loss\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
        trace += std::to_string(e + 1) + "," + fmt_g(result.epoch_loss[e]) + "\n";
    }
    write_text_file(trace_path, trace);

    xmalkit::RunManifest manifest;
    manifest.command = "train";
    manifest.arguments = {"train", "--dict", abs_path(dict_path), "--data", abs_path(data_path),
                          "--out-dir", abs_path(out_dir),
                          "--seed", std::to_string(cfg.seed),
                          "--epochs", std::to_string(cfg.epochs),
                          "--batch-size", std::to_string(cfg.batch_size),
                          "--lr", fmt_g(cfg.learning_rate),
                          "--optimizer", xmalkit::nn::optimizer_name(cfg.optimizer),
                          "--train-fraction", fmt_g(train_fraction)};
    for (std::size_t h : hidden) {
        manifest.arguments.push_back("--hidden");
        manifest.arguments.push_back(std::to_string(h));
    }
    manifest.inputs[abs_path(dict_path)] = xmalkit::file_content_hash(dict_path);
    manifest.inputs[abs_path(data_path)] = xmalkit::file_content_hash(data_path);
    manifest.dict_fingerprint = dict.fingerprint();
    manifest.seed = cfg.seed;
    manifest.started_at = started;
    manifest.finished_at = xmalkit::iso8601_utc_now();
    manifest.outputs = {model_path, trace_path};
    if (!test_path.empty()) manifest.outputs.push_back(test_path);
    xmalkit::save_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);

    std::cout << "trained on " << train_set->size() << " samples; final epoch loss "
              << fmt_fixed(result.epoch_loss.back(), 6) << "\n";
    std::cout << "model written to " << model_path << "\n";
    return 0;
}

// ------------------------------------------------------------ predict ----

int run_predict(const std::string& dict_path, const std::string& model_path,
                const std::string& data_path, const std::string& format,
                const std::string& out_dir) {
    auto started = xmalkit::iso8601_utc_now();
    auto dict = xmalkit::load_dictionary_file(dict_path);
    auto model = xmalkit::load_model_file(model_path, dict);
    auto samples = xmalkit::load_samples_file(data_path, dict, /*allow_unlabeled=*/true);

    std::string report;
    for (const auto& s : samples) {
        auto out = xmalkit::forward(model, s);
        if (format == "records") {
            json rec;
            rec["id"] = s.id;
            rec["label"] = out.label;
            rec["probability"] = out.probability;
            report += rec.dump() + "\n";
        } else {
            report += s.id + ": " + (out.label ? "malicious" : "benign") + " (probability " +
                      fmt_fixed(out.probability, 6) + ")\n";
        }
    }
    std::cout << report;

    if (!out_dir.empty()) {
        ensure_out_dir(out_dir);
        std::string ext = format == "records" ? "jsonl" : "txt";
        std::string pred_path = (fs::path(out_dir) / ("predictions." + ext)).string();
        write_text_file(pred_path, report);

        xmalkit::RunManifest manifest;
        manifest.command = "predict";
        manifest.arguments = {"predict", "--dict", abs_path(dict_path), "--model",
                              abs_path(model_path), "--data", abs_path(data_path),
                              "--format", format, "--out-dir", abs_path(out_dir)};
        manifest.inputs[abs_path(dict_path)] = xmalkit::file_content_hash(dict_path);
        manifest.inputs[abs_path(model_path)] = xmalkit::file_content_hash(model_path);
        manifest.inputs[abs_path(data_path)] = xmalkit::file_content_hash(data_path);
        manifest.dict_fingerprint = dict.fingerprint();
        manifest.started_at = started;
        manifest.finished_at = xmalkit::iso8601_utc_now();
        manifest.outputs = {pred_path};
        xmalkit::save_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
    }
    return 0;
}

// ------------------------------------------------------------ explain ----

int run_explain(const std::string& dict_path, const std::string& model_path,
                const std::string& data_path, const std::string& semantics_path,
                const std::string& ordering_path, std::size_t top_n, const std::string& format,
                const std::string& out_dir) {
    auto started = xmalkit::iso8601_utc_now();
    auto dict = xmalkit::load_dictionary_file(dict_path);
    auto model = xmalkit::load_model_file(model_path, dict);
    auto samples = xmalkit::load_samples_file(data_path, dict, /*allow_unlabeled=*/true);
    auto db = xmalkit::load_semantics_file(semantics_path);
    if (!ordering_path.empty()) {
        db.set_ordering(xmalkit::load_ordering_rules_file(ordering_path));
    }

    std::string report;
    for (const auto& s : samples) {
        auto ex = xmalkit::explain(model, s, top_n, db);
        if (format == "records") {
            report += explanation_record(s.id, ex).dump() + "\n";
        } else {
            report += explanation_human(s.id, ex) + "\n";
        }
    }
    std::cout << report;

    if (!out_dir.empty()) {
        ensure_out_dir(out_dir);
        std::string ext = format == "records" ? "jsonl" : "txt";
        std::string report_path = (fs::path(out_dir) / ("explanations." + ext)).string();
        write_text_file(report_path, report);

        xmalkit::RunManifest manifest;
        manifest.command = "explain";
        manifest.arguments = {"explain", "--dict", abs_path(dict_path), "--model",
                              abs_path(model_path), "--data", abs_path(data_path),
                              "--semantics", abs_path(semantics_path)};
        if (!ordering_path.empty()) {
            manifest.arguments.insert(manifest.arguments.end(),
                                      {"--ordering", abs_path(ordering_path)});
            manifest.inputs[abs_path(ordering_path)] =
                xmalkit::file_content_hash(ordering_path);
        }
        manifest.arguments.insert(manifest.arguments.end(),
                                  {"--top-n", std::to_string(top_n), "--format", format,
                                   "--out-dir", abs_path(out_dir)});
        manifest.inputs[abs_path(dict_path)] = xmalkit::file_content_hash(dict_path);
        manifest.inputs[abs_path(model_path)] = xmalkit::file_content_hash(model_path);
        manifest.inputs[abs_path(data_path)] = xmalkit::file_content_hash(data_path);
        manifest.inputs[abs_path(semantics_path)] = xmalkit::file_content_hash(semantics_path);
        manifest.dict_fingerprint = dict.fingerprint();
        manifest.started_at = started;
        manifest.finished_at = xmalkit::iso8601_utc_now();
        manifest.outputs = {report_path};
        xmalkit::save_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
    }
    return 0;
}

// ----------------------------------------------------------- evaluate ----

int run_evaluate(const std::string& dict_path, const std::string& model_path,
                 const std::string& data_path, const std::string& truth_path,
                 const std::string& semantics_path, const std::string& ordering_path,
                 const std::string& synonyms_path, std::size_t top_n,
                 const std::string& format, const std::string& out_dir) {
    auto started = xmalkit::iso8601_utc_now();
    auto dict = xmalkit::load_dictionary_file(dict_path);
    auto model = xmalkit::load_model_file(model_path, dict);
    auto samples = xmalkit::load_samples_file(data_path, dict, /*allow_unlabeled=*/false);
    if (samples.empty()) {
        throw xmalkit::ParseError(data_path, 0, "evaluation set is empty");
    }

    std::vector<int> predicted, actual;
    for (const auto& s : samples) {
        predicted.push_back(xmalkit::predict(model, s));
        actual.push_back(*s.label);
    }
    auto report = xmalkit::detection_metrics(predicted, actual);

    bool with_ir = !truth_path.empty();
    double mean_ir = 0.0;
    std::size_t scored = 0;
    if (with_ir) {
        if (semantics_path.empty() || synonyms_path.empty()) {
            throw xmalkit::ConfigError(
                "--truth requires --semantics and --synonyms for concept scoring");
        }
        auto db = xmalkit::load_semantics_file(semantics_path);
        if (!ordering_path.empty()) {
            db.set_ordering(xmalkit::load_ordering_rules_file(ordering_path));
        }
        auto syn = xmalkit::load_synonyms_file(synonyms_path);
        auto truth = xmalkit::load_truth_file(truth_path);
        double sum = 0.0;
        for (const auto& s : samples) {
            auto it = truth.find(s.id);
            if (it == truth.end()) continue;
            auto ex = xmalkit::explain(model, s, top_n, db);
            auto concepts = xmalkit::concept_extract(ex.description.text, syn);
            sum += xmalkit::ir_score(concepts, it->second).ir;
            ++scored;
        }
        if (scored == 0) {
            throw xmalkit::ConfigError("no evaluation sample matches a truth entry");
        }
        mean_ir = sum / static_cast<double>(scored);
    }

    std::string text;
    if (format == "records") {
        json rec;
        rec["samples"] = samples.size();
        rec["tp"] = report.tp;
        rec["fp"] = report.fp;
        rec["tn"] = report.tn;
        rec["fn"] = report.fn;
        rec["accuracy"] = report.accuracy;
        rec["precision"] = report.precision;
        rec["recall"] = report.recall;
        rec["f_measure"] = report.f_measure;
        if (with_ir) {
            rec["mean_ir"] = mean_ir;
            rec["mean_ir_2dp"] = xmalkit::round_to(mean_ir, 2);
            rec["ir_samples"] = scored;
        }
        rec["warnings"] = report.warnings;
        text = rec.dump() + "\n";
    } else {
        text += "samples:   " + std::to_string(samples.size()) + "\n";
        text += "confusion: tp=" + std::to_string(report.tp) + " fp=" + std::to_string(report.fp) +
                " tn=" + std::to_string(report.tn) + " fn=" + std::to_string(report.fn) + "\n";
        text += "accuracy:  " + fmt_fixed(report.accuracy, 4) + "\n";
        text += "precision: " + fmt_fixed(report.precision, 4) + "\n";
        text += "recall:    " + fmt_fixed(report.recall, 4) + "\n";
        text += "f-measure: " + fmt_fixed(report.f_measure, 4) + "\n";
        if (with_ir) {
            text += "mean ir:   " + fmt_fixed(xmalkit::round_to(mean_ir, 2), 2) + " (over " +
                    std::to_string(scored) + " samples)\n";
        }
        for (const auto& w : report.warnings) {
            text += "warning: " + w + "\n";
        }
    }
    std::cout << text;

    if (!out_dir.empty()) {
        ensure_out_dir(out_dir);
        std::string ext = format == "records" ? "jsonl" : "txt";
        std::string report_path = (fs::path(out_dir) / ("evaluation." + ext)).string();
        write_text_file(report_path, text);

        xmalkit::RunManifest manifest;
        manifest.command = "evaluate";
        manifest.arguments = {"evaluate", "--dict", abs_path(dict_path), "--model",
                              abs_path(model_path), "--data", abs_path(data_path)};
        auto add_input = [&](const char* flag, const std::string& p) {
            if (p.empty()) return;
            manifest.arguments.insert(manifest.arguments.end(), {flag, abs_path(p)});
            manifest.inputs[abs_path(p)] = xmalkit::file_content_hash(p);
        };
        add_input("--truth", truth_path);
        add_input("--semantics", semantics_path);
        add_input("--ordering", ordering_path);
        add_input("--synonyms", synonyms_path);
        manifest.arguments.insert(manifest.arguments.end(),
                                  {"--top-n", std::to_string(top_n), "--format", format,
                                   "--out-dir", abs_path(out_dir)});
        manifest.inputs[abs_path(dict_path)] = xmalkit::file_content_hash(dict_path);
        manifest.inputs[abs_path(model_path)] = xmalkit::file_content_hash(model_path);
        manifest.inputs[abs_path(data_path)] = xmalkit::file_content_hash(data_path);
        manifest.dict_fingerprint = dict.fingerprint();
        manifest.started_at = started;
        manifest.finished_at = xmalkit::iso8601_utc_now();
        manifest.outputs = {report_path};
        xmalkit::save_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
    }
    return 0;
}

// -------------------------------------------------------------- sweep ----

int run_sweep(const std::string& dict_path, const std::string& model_path,
              const std::string& data_path, const std::string& truth_path,
              const std::string& semantics_path, const std::string& ordering_path,
              const std::string& synonyms_path, std::size_t n_min, std::size_t n_max,
              const std::string& format, const std::string& out_dir) {
    auto started = xmalkit::iso8601_utc_now();
    auto dict = xmalkit::load_dictionary_file(dict_path);
    auto model = xmalkit::load_model_file(model_path, dict);
    auto samples = xmalkit::load_samples_file(data_path, dict, /*allow_unlabeled=*/true);
    auto db = xmalkit::load_semantics_file(semantics_path);
    if (!ordering_path.empty()) {
        db.set_ordering(xmalkit::load_ordering_rules_file(ordering_path));
    }
    auto syn = xmalkit::load_synonyms_file(synonyms_path);
    auto truth = xmalkit::load_truth_file(truth_path);

    auto result = xmalkit::sweep_n(model, samples, truth, db, syn, n_min, n_max);

    std::string text;
    if (format == "records") {
        for (const auto& p : result.points) {
            json rec;
            rec["n"] = p.n;
            rec["mean_ir"] = p.mean_ir;
            rec["mean_ir_2dp"] = xmalkit::round_to(p.mean_ir, 2);
            rec["samples"] = p.samples_scored;
            rec["best"] = p.n == result.best_n;
            text += rec.dump() + "\n";
        }
    } else {
        text += "n   mean_ir  samples\n";
        for (const auto& p : result.points) {
            char line[64];
            std::snprintf(line, sizeof(line), "%-3zu %.2f     %zu%s\n", p.n,
                          xmalkit::round_to(p.mean_ir, 2), p.samples_scored,
                          p.n == result.best_n ? "  <- best" : "");
            text += line;
        }
    }
    std::cout << text;

    if (!out_dir.empty()) {
        ensure_out_dir(out_dir);
        std::string csv = "n,mean_ir,samples\n";
        for (const auto& p : result.points) {
            csv += std::to_string(p.n) + "," + fmt_g(p.mean_ir) + "," +
                   std::to_string(p.samples_scored) + "\n";
        }
        std::string csv_path = (fs::path(out_dir) / "sweep.csv").string();
        write_text_file(csv_path, csv);

        xmalkit::RunManifest manifest;
        manifest.command = "sweep";
        manifest.arguments = {"sweep", "--dict", abs_path(dict_path), "--model",
                              abs_path(model_path), "--data", abs_path(data_path),
                              "--truth", abs_path(truth_path),
                              "--semantics", abs_path(semantics_path)};
        if (!ordering_path.empty()) {
            manifest.arguments.insert(manifest.arguments.end(),
                                      {"--ordering", abs_path(ordering_path)});
            manifest.inputs[abs_path(ordering_path)] =
                xmalkit::file_content_hash(ordering_path);
        }
        manifest.arguments.insert(manifest.arguments.end(),
                                  {"--synonyms", abs_path(synonyms_path),
                                   "--n-min", std::to_string(n_min),
                                   "--n-max", std::to_string(n_max),
                                   "--format", format, "--out-dir", abs_path(out_dir)});
        for (const auto& p : {dict_path, model_path, data_path, truth_path, semantics_path,
                              synonyms_path}) {
            manifest.inputs[abs_path(p)] = xmalkit::file_content_hash(p);
        }
        manifest.dict_fingerprint = dict.fingerprint();
        manifest.started_at = started;
        manifest.finished_at = xmalkit::iso8601_utc_now();
        manifest.outputs = {csv_path};
        manifest.notes.push_back("best n = " + std::to_string(result.best_n));
        xmalkit::save_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
    }
    return 0;
}

// ------------------------------------------------------------ compare ----

int run_compare(const std::string& dict_path, const std::string& model_path,
                const std::string& train_data_path, const std::string& data_path,
                const std::string& truth_path, const std::string& semantics_path,
                const std::string& ordering_path, const std::string& synonyms_path,
                std::size_t top_n, bool no_surrogate, double svm_lambda,
                std::size_t svm_epochs, std::optional<std::size_t> perturbations,
                std::optional<double> kernel_width, std::optional<double> ridge_lambda,
                std::optional<std::uint64_t> seed_opt, const std::string& format,
                const std::string& out_dir) {
    auto started = xmalkit::iso8601_utc_now();
    auto dict = xmalkit::load_dictionary_file(dict_path);
    auto model = xmalkit::load_model_file(model_path, dict);
    auto train_set = xmalkit::load_samples_file(train_data_path, dict, /*allow_unlabeled=*/false);
    auto eval_set = xmalkit::load_samples_file(data_path, dict, /*allow_unlabeled=*/true);
    auto db = xmalkit::load_semantics_file(semantics_path);
    if (!ordering_path.empty()) {
        db.set_ordering(xmalkit::load_ordering_rules_file(ordering_path));
    }
    auto syn = xmalkit::load_synonyms_file(synonyms_path);
    auto truth = xmalkit::load_truth_file(truth_path);

    std::uint64_t seed = effective_seed(seed_opt);
    std::vector<std::string> default_notes;

    xmalkit::SvmConfig svm_cfg;
    svm_cfg.lambda = svm_lambda;
    svm_cfg.seed = seed;
    svm_cfg.epochs = svm_epochs;
    auto svm = xmalkit::train_svm(train_set, dict, svm_cfg);

    xmalkit::SurrogateConfig sur_cfg;
    sur_cfg.seed = seed;
    if (perturbations) {
        sur_cfg.num_perturbations = *perturbations;
    } else {
        default_notes.push_back("surrogate perturbations defaulted to " +
                                std::to_string(sur_cfg.num_perturbations));
    }
    if (kernel_width) {
        sur_cfg.kernel_width = *kernel_width;
    } else {
        default_notes.push_back("surrogate kernel width defaulted to 0.75*sqrt(n_features)");
    }
    if (ridge_lambda) {
        sur_cfg.ridge_lambda = *ridge_lambda;
    } else {
        default_notes.push_back("surrogate ridge lambda defaulted to " +
                                fmt_g(sur_cfg.ridge_lambda));
    }

    auto report = xmalkit::compare_explainers(model, svm, eval_set, truth, db, syn, top_n,
                                              sur_cfg, !no_surrogate);

    std::string text;
    if (format == "records") {
        for (const auto& m : report.methods) {
            json rec;
            rec["method"] = m.method;
            rec["mean_ir"] = m.mean_ir;
            rec["mean_ir_2dp"] = xmalkit::round_to(m.mean_ir, 2);
            rec["key_set_overlap"] = m.key_set_overlap;
            rec["samples"] = m.samples_scored;
            text += rec.dump() + "\n";
        }
    } else {
        text += "method      mean_ir  overlap  samples\n";
        for (const auto& m : report.methods) {
            char line[96];
            std::snprintf(line, sizeof(line), "%-11s %.2f     %.3f    %zu\n", m.method.c_str(),
                          xmalkit::round_to(m.mean_ir, 2), m.key_set_overlap, m.samples_scored);
            text += line;
        }
        for (const auto& w : report.warnings) {
            text += "warning: " + w + "\n";
        }
    }
    std::cout << text;

    if (!out_dir.empty()) {
        ensure_out_dir(out_dir);
        std::string csv = "method,mean_ir,key_set_overlap,samples\n";
        for (const auto& m : report.methods) {
            csv += m.method + "," + fmt_g(m.mean_ir) + "," + fmt_g(m.key_set_overlap) + "," +
                   std::to_string(m.samples_scored) + "\n";
        }
        std::string csv_path = (fs::path(out_dir) / "comparison.csv").string();
        write_text_file(csv_path, csv);

        std::string freq = "feature";
        for (const auto& m : report.methods) freq += "," + m.method;
        freq += "\n";
        for (std::size_t i = 0; i < dict.size(); ++i) {
            bool any = false;
            for (const auto& m : report.methods) any = any || m.feature_frequency[i] > 0;
            if (!any) continue;
            freq += dict.entry(i).name;
            for (const auto& m : report.methods) {
                freq += "," + std::to_string(m.feature_frequency[i]);
            }
            freq += "\n";
        }
        std::string freq_path = (fs::path(out_dir) / "frequencies.csv").string();
        write_text_file(freq_path, freq);

        xmalkit::RunManifest manifest;
        manifest.command = "compare";
        manifest.arguments = {"compare", "--dict", abs_path(dict_path),
                              "--model", abs_path(model_path),
                              "--train-data", abs_path(train_data_path),
                              "--data", abs_path(data_path),
                              "--truth", abs_path(truth_path),
                              "--semantics", abs_path(semantics_path)};
        if (!ordering_path.empty()) {
            manifest.arguments.insert(manifest.arguments.end(),
                                      {"--ordering", abs_path(ordering_path)});
            manifest.inputs[abs_path(ordering_path)] =
                xmalkit::file_content_hash(ordering_path);
        }
        manifest.arguments.insert(
            manifest.arguments.end(),
            {"--synonyms", abs_path(synonyms_path), "--top-n", std::to_string(top_n),
             "--svm-lambda", fmt_g(svm_cfg.lambda), "--svm-epochs",
             std::to_string(svm_cfg.epochs), "--perturbations",
             std::to_string(sur_cfg.num_perturbations), "--kernel-width",
             fmt_g(sur_cfg.kernel_width), "--ridge-lambda", fmt_g(sur_cfg.ridge_lambda),
             "--seed", std::to_string(seed), "--format", format, "--out-dir",
             abs_path(out_dir)});
        if (no_surrogate) manifest.arguments.push_back("--no-surrogate");
        for (const auto& p : {dict_path, model_path, train_data_path, data_path, truth_path,
                              semantics_path, synonyms_path}) {
            manifest.inputs[abs_path(p)] = xmalkit::file_content_hash(p);
        }
        manifest.dict_fingerprint = dict.fingerprint();
        manifest.seed = seed;
        manifest.started_at = started;
        manifest.finished_at = xmalkit::iso8601_utc_now();
        manifest.outputs = {csv_path, freq_path};
        manifest.notes = default_notes;
        xmalkit::save_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
    }
    return 0;
}

// -------------------------------------------------------------- rerun ----

int run_rerun(const std::string& manifest_path, const std::string& out_dir) {
    auto manifest = xmalkit::load_manifest(manifest_path);
    if (manifest.arguments.empty()) {
        throw xmalkit::ConfigError("manifest records no arguments to replay");
    }
    std::vector<std::string> args = manifest.arguments;
    bool replaced = false;
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
        if (args[i] == "--out-dir") {
            args[i + 1] = out_dir;
            replaced = true;
        }
    }
    if (!replaced) {
        args.push_back("--out-dir");
        args.push_back(out_dir);
    }
    return dispatch(args);
}

// ----------------------------------------------------------- dispatch ----

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"attention-based malware classification with behavior-level explanations"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic labeled corpus");
    std::string g_dict, g_rules, g_out, g_semantics, g_synonyms;
    std::optional<std::size_t> g_n;
    std::optional<double> g_noise, g_fraction;
    std::optional<std::uint64_t> g_seed;
    gen->add_option("--dict", g_dict, "feature dictionary csv")->required();
    gen->add_option("--rules", g_rules, "planted-rule config json")->required();
    gen->add_option("--out-dir", g_out, "output directory")->required();
    gen->add_option("--n", g_n, "sample count (overrides config)");
    gen->add_option("--noise", g_noise, "noise rate (overrides config)");
    gen->add_option("--malicious-fraction", g_fraction, "malicious share (overrides config)");
    gen->add_option("--seed", g_seed, "rng seed (fallback: XMALKIT_SEED)");
    gen->add_option("--semantics", g_semantics, "semantic database csv (for truth derivation)");
    gen->add_option("--synonyms", g_synonyms, "synonym csv (for truth derivation)");

    // train
    auto* train = app.add_subcommand("train", "train the attention classifier");
    std::string t_dict, t_data, t_out, t_optimizer = "adam";
    std::optional<std::uint64_t> t_seed;
    std::size_t t_epochs = 10, t_batch = 20;
    double t_lr = 0.001, t_fraction = 1.0;
    std::vector<std::size_t> t_hidden;
    train->add_option("--dict", t_dict, "feature dictionary csv")->required();
    train->add_option("--data", t_data, "labeled samples csv")->required();
    train->add_option("--out-dir", t_out, "output directory")->required();
    train->add_option("--seed", t_seed, "rng seed (fallback: XMALKIT_SEED)");
    train->add_option("--epochs", t_epochs, "training epochs");
    train->add_option("--batch-size", t_batch, "mini-batch size");
    train->add_option("--lr", t_lr, "learning rate");
    train->add_option("--optimizer", t_optimizer, "adam or sgd");
    train->add_option("--hidden", t_hidden, "hidden layer sizes (repeatable; default 64 16)");
    train->add_option("--train-fraction", t_fraction,
                      "train on this fraction, write the rest to test_split.csv");

    // predict
    auto* predict = app.add_subcommand("predict", "classify samples");
    std::string p_dict, p_model, p_data, p_format = "human", p_out;
    predict->add_option("--dict", p_dict, "feature dictionary csv")->required();
    predict->add_option("--model", p_model, "trained model file")->required();
    predict->add_option("--data", p_data, "samples csv (labels optional)")->required();
    predict->add_option("--format", p_format, "human or records")
        ->check(CLI::IsMember({"human", "records"}));
    predict->add_option("--out-dir", p_out, "output directory (optional)");

    // explain
    auto* explain = app.add_subcommand("explain", "explain predictions");
    std::string e_dict, e_model, e_data, e_semantics, e_ordering, e_format = "human", e_out;
    std::size_t e_topn = 6;
    explain->add_option("--dict", e_dict, "feature dictionary csv")->required();
    explain->add_option("--model", e_model, "trained model file")->required();
    explain->add_option("--data", e_data, "samples csv (labels optional)")->required();
    explain->add_option("--semantics", e_semantics, "semantic database csv")->required();
    explain->add_option("--ordering", e_ordering, "ordering rules file (optional)");
    explain->add_option("--top-n", e_topn, "key features per sample");
    explain->add_option("--format", e_format, "human or records")
        ->check(CLI::IsMember({"human", "records"}));
    explain->add_option("--out-dir", e_out, "output directory (optional)");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "detection metrics (and ir with truth)");
    std::string v_dict, v_model, v_data, v_truth, v_semantics, v_ordering, v_synonyms;
    std::string v_format = "human", v_out;
    std::size_t v_topn = 6;
    evaluate->add_option("--dict", v_dict, "feature dictionary csv")->required();
    evaluate->add_option("--model", v_model, "trained model file")->required();
    evaluate->add_option("--data", v_data, "labeled samples csv")->required();
    evaluate->add_option("--truth", v_truth, "concept ground truth (optional)");
    evaluate->add_option("--semantics", v_semantics, "semantic database csv");
    evaluate->add_option("--ordering", v_ordering, "ordering rules file");
    evaluate->add_option("--synonyms", v_synonyms, "synonym csv");
    evaluate->add_option("--top-n", v_topn, "key features per sample");
    evaluate->add_option("--format", v_format, "human or records")
        ->check(CLI::IsMember({"human", "records"}));
    evaluate->add_option("--out-dir", v_out, "output directory (optional)");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "mean ir across key-feature budgets");
    std::string s_dict, s_model, s_data, s_truth, s_semantics, s_ordering, s_synonyms;
    std::string s_format = "human", s_out;
    std::size_t s_nmin = 1, s_nmax = 10;
    sweep->add_option("--dict", s_dict, "feature dictionary csv")->required();
    sweep->add_option("--model", s_model, "trained model file")->required();
    sweep->add_option("--data", s_data, "samples csv")->required();
    sweep->add_option("--truth", s_truth, "concept ground truth")->required();
    sweep->add_option("--semantics", s_semantics, "semantic database csv")->required();
    sweep->add_option("--ordering", s_ordering, "ordering rules file (optional)");
    sweep->add_option("--synonyms", s_synonyms, "synonym csv")->required();
    sweep->add_option("--n-min", s_nmin, "smallest n");
    sweep->add_option("--n-max", s_nmax, "largest n");
    sweep->add_option("--format", s_format, "human or records")
        ->check(CLI::IsMember({"human", "records"}));
    sweep->add_option("--out-dir", s_out, "output directory (optional)");

    // compare
    auto* compare = app.add_subcommand("compare", "attention vs svm-global vs surrogate");
    std::string c_dict, c_model, c_train, c_data, c_truth, c_semantics, c_ordering, c_synonyms;
    std::string c_format = "human", c_out;
    std::size_t c_topn = 6, c_svm_epochs = 20;
    bool c_no_surrogate = false;
    double c_svm_lambda = 1e-4;
    std::optional<std::size_t> c_perturbations;
    std::optional<double> c_kernel_width, c_ridge_lambda;
    std::optional<std::uint64_t> c_seed;
    compare->add_option("--dict", c_dict, "feature dictionary csv")->required();
    compare->add_option("--model", c_model, "trained attention model")->required();
    compare->add_option("--train-data", c_train, "labeled samples for the svm")->required();
    compare->add_option("--data", c_data, "evaluation samples csv")->required();
    compare->add_option("--truth", c_truth, "concept ground truth")->required();
    compare->add_option("--semantics", c_semantics, "semantic database csv")->required();
    compare->add_option("--ordering", c_ordering, "ordering rules file (optional)");
    compare->add_option("--synonyms", c_synonyms, "synonym csv")->required();
    compare->add_option("--top-n", c_topn, "key features per sample");
    compare->add_flag("--no-surrogate", c_no_surrogate, "skip the surrogate explainer");
    compare->add_option("--svm-lambda", c_svm_lambda, "svm regularization");
    compare->add_option("--svm-epochs", c_svm_epochs, "svm training epochs");
    compare->add_option("--perturbations", c_perturbations, "surrogate perturbation count");
    compare->add_option("--kernel-width", c_kernel_width, "surrogate proximity kernel width");
    compare->add_option("--ridge-lambda", c_ridge_lambda, "surrogate ridge strength");
    compare->add_option("--seed", c_seed, "rng seed (fallback: XMALKIT_SEED)");
    compare->add_option("--format", c_format, "human or records")
        ->check(CLI::IsMember({"human", "records"}));
    compare->add_option("--out-dir", c_out, "output directory (optional)");

    // rerun
    auto* rerun = app.add_subcommand("rerun", "replay a recorded manifest");
    std::string r_manifest, r_out;
    rerun->add_option("--manifest", r_manifest, "manifest.json from an earlier run")->required();
    rerun->add_option("--out-dir", r_out, "fresh output directory")->required();

    std::vector<const char*> argv;
    argv.push_back("xmalkit");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (gen->parsed()) {
        return run_gen(g_dict, g_rules, g_out, g_n, g_noise, g_fraction, g_seed, g_semantics,
                       g_synonyms);
    }
    if (train->parsed()) {
        return run_train(t_dict, t_data, t_out, t_seed, t_epochs, t_batch, t_lr, t_optimizer,
                         t_hidden, t_fraction);
    }
    if (predict->parsed()) {
        return run_predict(p_dict, p_model, p_data, p_format, p_out);
    }
    if (explain->parsed()) {
        return run_explain(e_dict, e_model, e_data, e_semantics, e_ordering, e_topn, e_format,
                           e_out);
    }
    if (evaluate->parsed()) {
        return run_evaluate(v_dict, v_model, v_data, v_truth, v_semantics, v_ordering,
                            v_synonyms, v_topn, v_format, v_out);
    }
    if (sweep->parsed()) {
        return run_sweep(s_dict, s_model, s_data, s_truth, s_semantics, s_ordering, s_synonyms,
                         s_nmin, s_nmax, s_format, s_out);
    }
    if (compare->parsed()) {
        return run_compare(c_dict, c_model, c_train, c_data, c_truth, c_semantics, c_ordering,
                           c_synonyms, c_topn, c_no_surrogate, c_svm_lambda, c_svm_epochs,
                           c_perturbations, c_kernel_width, c_ridge_lambda, c_seed, c_format,
                           c_out);
    }
    if (rerun->parsed()) {
        return run_rerun(r_manifest, r_out);
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return dispatch(args);
    } catch (const xmalkit::DictMismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const xmalkit::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const xmalkit::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
}
