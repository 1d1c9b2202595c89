#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "test_support.hpp"
#include "xmalkit/errors.hpp"
#include "xmalkit/evaluation.hpp"
#include "xmalkit/rng.hpp"

using namespace xmalkit;

TEST_CASE("detection metrics match a hand-counted confusion table") {
    // predicted vs actual: tp=3 fp=1 tn=4 fn=2
    std::vector<int> predicted = {1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
    std::vector<int> actual = {1, 1, 1, 0, 1, 1, 0, 0, 0, 0};
    auto r = detection_metrics(predicted, actual);
    CHECK(r.tp == 3);
    CHECK(r.fp == 1);
    CHECK(r.tn == 4);
    CHECK(r.fn == 2);
    CHECK(r.precision == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(r.recall == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(r.accuracy == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(r.f_measure == doctest::Approx(2 * 0.75 * 0.6 / 1.35).epsilon(1e-12));
    CHECK(r.warnings.empty());
}

TEST_CASE("degenerate confusion tables warn instead of dividing by zero") {
    auto r = detection_metrics({0, 0}, {0, 0});
    CHECK(r.precision == 0.0);
    CHECK(r.recall == 0.0);
    CHECK(r.f_measure == 0.0);
    CHECK(r.accuracy == 1.0);
    CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("detection metrics validate their inputs") {
    CHECK_THROWS_AS(detection_metrics({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(detection_metrics({1}, {1, 0}), std::invalid_argument);
    CHECK_THROWS_AS(detection_metrics({2}, {1}), std::invalid_argument);
    CHECK_THROWS_AS(detection_metrics({1}, {-1}), std::invalid_argument);
}

TEST_CASE("canonicalization lowercases, collapses spaces and strips enders") {
    CHECK(SynonymMap::canonicalize("Launch With  System   Startup.") ==
          "launch with system startup");
    CHECK(SynonymMap::canonicalize("  send SMS!  ") == "send sms");
    CHECK(SynonymMap::canonicalize("plain") == "plain");
    CHECK(SynonymMap::canonicalize("") == "");
}

TEST_CASE("synonym map resolves surfaces to concept lists") {
    SynonymMap m;
    m.add("Send it to remote server over the Internet", "send-remote");
    m.add("send it to remote server over the internet", "internet");
    m.add("send it to remote server over the internet", "internet");  // dup ignored

    auto* c = m.find("SEND it to remote server over the internet.");
    REQUIRE(c != nullptr);
    REQUIRE(c->size() == 2);
    CHECK((*c)[0] == "send-remote");
    CHECK((*c)[1] == "internet");
    CHECK(m.find("unknown phrase") == nullptr);
}

TEST_CASE("concept extraction maps clauses and keeps unknown ones verbatim") {
    auto syn = load_synonyms_file(testsup::data_path("synonyms.csv"));

    SUBCASE("three-clause description expands to five concepts") {
        auto concepts = concept_extract(
            "Launch with system startup, collect info on the device, and send it to remote "
            "server over the internet",
            syn);
        std::set<std::string> got(concepts.begin(), concepts.end());
        std::set<std::string> want = {"launch", "system-startup", "collect-info", "send-remote",
                                      "internet"};
        CHECK(got == want);
    }

    SUBCASE("unknown clauses surface as themselves") {
        auto concepts = concept_extract("Collect info on the device, and phone home twice", syn);
        std::set<std::string> got(concepts.begin(), concepts.end());
        CHECK(got.count("collect-info") == 1);
        CHECK(got.count("phone home twice") == 1);
    }

    SUBCASE("the and prefix of the final clause is stripped before lookup") {
        auto a = concept_extract("Boot the system, and access the internet", syn);
        std::set<std::string> got(a.begin(), a.end());
        CHECK(got == std::set<std::string>{"system-startup", "internet"});
    }

    SUBCASE("empty description extracts nothing") {
        CHECK(concept_extract("", syn).empty());
    }
}

TEST_CASE("ir on the six-concept fixture reproduces the worked numbers") {
    ConceptSet truth;
    truth.concepts = {"launch",   "system-startup", "internet",
                      "download-components", "collect-info", "send-remote"};
    std::vector<std::string> generated = {"launch", "system-startup", "collect-info",
                                          "send-remote", "internet"};
    auto s = ir_score(generated, truth);
    CHECK(s.detect == 5);
    CHECK(s.surplus == 0);
    CHECK(s.total == 6);
    CHECK(s.precision == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.recall == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK(s.ir == doctest::Approx(10.0 / 11.0).epsilon(1e-15));
    CHECK(round_to(s.ir, 2) == doctest::Approx(0.91).epsilon(1e-15));
}

TEST_CASE("ir handles surplus and duplicates set-wise") {
    ConceptSet truth;
    truth.concepts = {"a", "b"};

    SUBCASE("surplus counts against precision only") {
        auto s = ir_score({"a", "b", "c"}, truth);
        CHECK(s.detect == 2);
        CHECK(s.surplus == 1);
        CHECK(s.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
        CHECK(s.recall == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("repeats collapse") {
        auto s = ir_score({"a", "a", "a"}, truth);
        CHECK(s.detect == 1);
        CHECK(s.surplus == 0);
        CHECK(s.precision == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("nothing generated scores zero") {
        auto s = ir_score({}, truth);
        CHECK(s.ir == 0.0);
        CHECK(s.precision == 0.0);
        CHECK(s.recall == 0.0);
    }
    SUBCASE("empty truth is an error") {
        CHECK_THROWS_AS(ir_score({"a"}, ConceptSet{}), std::invalid_argument);
    }
}

TEST_CASE("ir is one exactly when the concept sets coincide") {
    Rng rng(555);
    for (int trial = 0; trial < 300; ++trial) {
        ConceptSet truth;
        std::size_t n = 1 + rng.uniform_int(6);
        for (std::size_t i = 0; i < n; ++i) {
            truth.concepts.insert("c" + std::to_string(rng.uniform_int(10)));
        }
        std::vector<std::string> generated(truth.concepts.begin(), truth.concepts.end());
        rng.shuffle(generated);
        CHECK(ir_score(generated, truth).ir == doctest::Approx(1.0).epsilon(1e-15));

        // one extra concept strictly lowers ir below 1
        auto extra = generated;
        extra.push_back("definitely-surplus");
        CHECK(ir_score(extra, truth).ir < 1.0);

        // dropping one concept (when more than one) also lowers it
        if (generated.size() > 1) {
            auto fewer = generated;
            fewer.pop_back();
            CHECK(ir_score(fewer, truth).ir < 1.0);
        }
    }
}

TEST_CASE("adding surplus concepts never raises ir") {
    Rng rng(99);
    ConceptSet truth;
    truth.concepts = {"a", "b", "c", "d"};
    std::vector<std::string> generated = {"a", "b"};
    double prev = ir_score(generated, truth).ir;
    for (int i = 0; i < 10; ++i) {
        generated.push_back("junk" + std::to_string(i));
        double cur = ir_score(generated, truth).ir;
        CHECK(cur <= prev + 1e-15);
        prev = cur;
    }
}

TEST_CASE("round_to behaves as fixed-point display rounding") {
    CHECK(round_to(0.90909090909, 2) == doctest::Approx(0.91).epsilon(1e-15));
    CHECK(round_to(0.833333, 2) == doctest::Approx(0.83).epsilon(1e-15));
    CHECK(round_to(0.005, 2) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(round_to(1.0, 2) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(round_to(-0.125, 2) == doctest::Approx(-0.13).epsilon(1e-12));
}

TEST_CASE("truth files parse and validate") {
    SUBCASE("well formed") {
        std::istringstream in("s1: a;b;c\ns2: d\n\n# comment\n");
        auto t = load_truth(in);
        REQUIRE(t.size() == 2);
        CHECK(t.at("s1").concepts == std::set<std::string>{"a", "b", "c"});
        CHECK(t.at("s2").concepts == std::set<std::string>{"d"});
    }
    SUBCASE("duplicate ids rejected") {
        std::istringstream in("s1: a\ns1: b\n");
        CHECK_THROWS_AS(load_truth(in), ParseError);
    }
    SUBCASE("empty concept lists rejected") {
        std::istringstream in("s1: \n");
        CHECK_THROWS_AS(load_truth(in), ParseError);
    }
    SUBCASE("missing colon rejected") {
        std::istringstream in("s1 a;b\n");
        CHECK_THROWS_AS(load_truth(in), ParseError);
    }
    SUBCASE("fixture file loads") {
        auto t = load_truth_file(testsup::fixture_path("adrd_truth.txt"));
        REQUIRE(t.count("adrd0") == 1);
        CHECK(t.at("adrd0").concepts.size() == 6);
    }
}

TEST_CASE("feature sets imply their concept ground truth") {
    auto db = load_semantics_file(testsup::data_path("semantics.csv"));
    auto syn = load_synonyms_file(testsup::data_path("synonyms.csv"));

    auto c = concepts_for_features(
        {"SEND_SMS", "READ_PHONE_STATE", "RECEIVE_BOOT_COMPLETED"}, db, syn);
    CHECK(c.concepts == std::set<std::string>{"send-sms-premium", "collect-info", "launch",
                                              "system-startup"});

    // a declared semantic-free feature contributes nothing
    auto none = concepts_for_features({"Intent.action.MAIN"}, db, syn);
    CHECK(none.concepts.empty());
}

TEST_CASE("spearman rank correlation") {
    CHECK(spearman_rank_correlation({1, 2, 3, 4}, {10, 20, 30, 40}) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(spearman_rank_correlation({1, 2, 3, 4}, {4, 3, 2, 1}) ==
          doctest::Approx(-1.0).epsilon(1e-12));
    // monotone but nonlinear is still a perfect rank match
    CHECK(spearman_rank_correlation({1, 2, 3, 4}, {1, 10, 100, 1000}) ==
          doctest::Approx(1.0).epsilon(1e-12));
    // constant input has no ranking signal
    CHECK(spearman_rank_correlation({1, 1, 1}, {1, 2, 3}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(spearman_rank_correlation({1, 2}, {1}), std::invalid_argument);
    CHECK_THROWS_AS(spearman_rank_correlation({}, {}), std::invalid_argument);

    // ties get average ranks: [1, 1, 2] vs [1, 2, 3] correlates positively
    // but below 1
    double r = spearman_rank_correlation({1, 1, 2}, {1, 2, 3});
    CHECK(r > 0.5);
    CHECK(r < 1.0);
}

TEST_CASE("sweep over the key budget finds the planted concept count") {
    // 6 features; the first 4 active in every sample. Semantics: one concept
    // per feature, so truth with 4 concepts is matched exactly at n=4;
    // n below misses concepts, n above changes nothing (only 4 active).
    std::vector<SemanticEntry> entries;
    std::vector<FeatureEntry> fentries;
    SynonymMap syn;
    for (int i = 0; i < 6; ++i) {
        std::string f = "f" + std::to_string(i);
        std::string id = "concept-" + std::to_string(i);
        fentries.push_back({f, FeatureKind::api_call});
        entries.push_back({f, id, "Phrase " + std::to_string(i), "", "do thing " +
                           std::to_string(i)});
        syn.add("do thing " + std::to_string(i), id);
    }
    FeatureDictionary dict(fentries);
    SemanticDatabase db(entries);

    auto model = make_attention_model(dict, {3}, 1);
    for (auto& w : model.attention.weights.data) w = 0.0;
    for (int i = 0; i < 6; ++i) {
        model.attention.weights(i, i) = 6.0 - i;  // rank f0 > f1 > ... > f5
    }

    std::vector<Sample> eval_set = {
        testsup::make_sample("e1", 6, {0, 1, 2, 3}),
        testsup::make_sample("e2", 6, {0, 1, 2, 3}),
    };
    std::map<std::string, ConceptSet> truth;
    truth["e1"].concepts = {"concept-0", "concept-1", "concept-2", "concept-3"};
    truth["e2"].concepts = {"concept-0", "concept-1", "concept-2", "concept-3"};

    auto result = sweep_n(model, eval_set, truth, db, syn, 1, 6);
    REQUIRE(result.points.size() == 6);
    CHECK(result.best_n == 4);
    CHECK(result.points[3].mean_ir == doctest::Approx(1.0).epsilon(1e-12));
    // strictly increasing up to the plateau
    CHECK(result.points[0].mean_ir < result.points[1].mean_ir);
    CHECK(result.points[1].mean_ir < result.points[2].mean_ir);
    CHECK(result.points[2].mean_ir < result.points[3].mean_ir);
    // ties above the active count resolve to the smaller n
    CHECK(result.points[4].mean_ir == doctest::Approx(1.0).epsilon(1e-12));

    // samples without truth are skipped; none scorable at all is an error
    std::map<std::string, ConceptSet> no_truth;
    no_truth["zz"].concepts = {"concept-0"};
    CHECK_THROWS_AS(sweep_n(model, eval_set, no_truth, db, syn, 1, 3), std::invalid_argument);
    CHECK_THROWS_AS(sweep_n(model, eval_set, truth, db, syn, 3, 2), std::invalid_argument);
    CHECK_THROWS_AS(sweep_n(model, eval_set, truth, db, syn, 0, 2), std::invalid_argument);
}
