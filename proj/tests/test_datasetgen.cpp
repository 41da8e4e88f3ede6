#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <set>

#include "vdlab/datasetgen.hpp"

using namespace vdlab;

namespace {

CommitRecord commit_with(const std::string& id,
                         std::vector<FunctionVersion> functions) {
    CommitRecord c;
    c.commit = id;
    c.project = "proj-" + id;
    c.files.push_back({"src/" + id + ".c", std::move(functions)});
    return c;
}

// 10 commits, 4 of them changing exactly one function. Hand-enumerated:
//   c0..c3: one changed function + one unchanged  -> X1 keeps them
//   c4, c5: two changed functions                 -> filtered out
//   c6: zero changed, two unchanged               -> filtered out (count != 1)
//   c7: added-only function                       -> filtered out
//   c8: deleted-only function                     -> filtered out
//   c9: one changed + one added                   -> X1 keeps it (1 change)
// X1 totals: P1 = 5, P2 = 5, P3 = 4 (one unchanged in each of c0..c3).
std::vector<CommitRecord> fixture() {
    std::vector<CommitRecord> cs;
    for (int i = 0; i < 4; ++i) {
        const std::string n = std::to_string(i);
        cs.push_back(commit_with("c" + n, {{"f" + n, "old" + n, "new" + n},
                                           {"u" + n, "same" + n, "same" + n}}));
    }
    cs.push_back(commit_with("c4", {{"a", "x", "y"}, {"b", "p", "q"}}));
    cs.push_back(commit_with("c5", {{"a", "x", "y"}, {"b", "p", "q"}}));
    cs.push_back(commit_with("c6", {{"u1", "s", "s"}, {"u2", "t", "t"}}));
    cs.push_back(commit_with("c7", {{"added", std::nullopt, "body"}}));
    cs.push_back(commit_with("c8", {{"deleted", "body", std::nullopt}}));
    cs.push_back(commit_with("c9", {{"f9", "old9", "new9"}, {"plus", std::nullopt, "body"}}));
    return cs;
}

}  // namespace

TEST_CASE("extract_pairs splits changed/unchanged/one-sided functions") {
    const auto c = commit_with("c", {{"f", "before", "after"}, {"g", "same", "same"}});
    const auto ex = extract_pairs(c);
    REQUIRE(ex.p1.size() == 1);
    REQUIRE(ex.p2.size() == 1);
    REQUIRE(ex.p3.size() == 1);
    CHECK(ex.p1[0].code == "before");
    CHECK(ex.p1[0].label == 1);
    CHECK(ex.p1[0].partition == Partition::P1);
    CHECK(ex.p2[0].code == "after");
    CHECK(ex.p2[0].label == 0);
    CHECK(ex.p3[0].code == "same");
    CHECK(ex.p3[0].partition == Partition::P3);
}

TEST_CASE("commit with no changes yields only P3 candidates") {
    const auto c = commit_with("c", {{"g", "same", "same"}, {"h", "also", "also"}});
    const auto ex = extract_pairs(c);
    CHECK(ex.p1.empty());
    CHECK(ex.p2.empty());
    CHECK(ex.p3.size() == 2);
}

TEST_CASE("malformed commit names the commit id") {
    auto c = commit_with("dup", {{"f", "a", "b"}, {"f", "c", "d"}});
    CHECK_THROWS_WITH_AS(extract_pairs(c), doctest::Contains("dup"), std::invalid_argument);
}

TEST_CASE("P1 and P2 are equinumerous over any corpus") {
    std::size_t p1 = 0, p2 = 0;
    for (const auto& c : fixture()) {
        const auto ex = extract_pairs(c);
        p1 += ex.p1.size();
        p2 += ex.p2.size();
    }
    CHECK(p1 == p2);
}

TEST_CASE("build_x1 keeps only single-change commits") {
    const auto bundle = build_x1(fixture(), /*include_p3=*/false, {}, 3);
    CHECK(bundle.meta.n_p1 == 5);
    CHECK(bundle.meta.n_p2 == 5);
    CHECK(bundle.meta.n_p3 == 0);
    CHECK(bundle.meta.n_positive == 5);
    CHECK(bundle.meta.n_negative == 5);
    CHECK(bundle.meta.neg_per_pos == 1.0);

    const auto with_p3 = build_x1(fixture(), /*include_p3=*/true, {}, 3);
    CHECK(with_p3.meta.n_p3 == 4);
    CHECK(with_p3.meta.n_negative == 9);
}

TEST_CASE("splits are id-disjoint and partition the set") {
    const auto bundle = build_x1(fixture(), true, {}, 11);
    std::set<std::string> ids;
    std::size_t total = 0;
    for (const auto* split : {&bundle.train, &bundle.validation, &bundle.test}) {
        total += split->size();
        for (const auto& s : *split) CHECK(ids.insert(s.id).second);
    }
    CHECK(total == 14);
    CHECK(ids.size() == 14);
}

TEST_CASE("pairs stay in one split by default") {
    const auto bundle = build_x1(fixture(), true, {}, 13);
    auto split_of = [&](const std::string& suffix) {
        for (const auto& s : bundle.train)
            if (s.id.ends_with(suffix)) return 0;
        for (const auto& s : bundle.validation)
            if (s.id.ends_with(suffix)) return 1;
        return 2;
    };
    for (int i = 0; i < 4; ++i) {
        const std::string f = "f" + std::to_string(i);
        CHECK(split_of(":" + f + ":pre") == split_of(":" + f + ":post"));
    }
}

TEST_CASE("100 singles split exactly 60/20/20") {
    std::vector<CommitRecord> cs;
    for (int i = 0; i < 50; ++i)
        cs.push_back(commit_with("c" + std::to_string(i),
                                 {{"f", "old" + std::to_string(i), "new" + std::to_string(i)}}));
    const auto bundle = build_x1(cs, false, {0.6, 0.2, 0.2}, 17);
    CHECK(bundle.train.size() == 60);
    CHECK(bundle.validation.size() == 20);
    CHECK(bundle.test.size() == 20);
}

TEST_CASE("bad split ratios and empty corpora are rejected") {
    CHECK_THROWS_AS(build_x1(fixture(), false, {0.5, 0.2, 0.2}, 1), std::invalid_argument);
    std::vector<CommitRecord> none{commit_with("c", {{"a", "x", "y"}, {"b", "p", "q"}})};
    CHECK_THROWS_AS(build_x1(none, false, {}, 1), std::invalid_argument);
}

TEST_CASE("synth corpus produces the requested P1 count") {
    SynthSpec spec;
    spec.seed = 1;
    spec.n_pos = 50;
    spec.n_neg_easy = 70;
    const auto commits = synth_corpus(spec);
    std::size_t p1 = 0, p3 = 0;
    for (const auto& c : commits) {
        const auto ex = extract_pairs(c);
        p1 += ex.p1.size();
        p3 += ex.p3.size();
    }
    CHECK(p1 == 50);
    CHECK(p3 == 70);
}

TEST_CASE("synth corpus is byte-identical for the same seed") {
    SynthSpec spec;
    spec.seed = 9;
    spec.n_pos = 10;
    spec.n_neg_easy = 20;
    const auto a = synth_corpus(spec);
    const auto b = synth_corpus(spec);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].files[0].functions.size() == b[i].files[0].functions.size());
        for (std::size_t f = 0; f < a[i].files[0].functions.size(); ++f) {
            CHECK(a[i].files[0].functions[f].before == b[i].files[0].functions[f].before);
            CHECK(a[i].files[0].functions[f].after == b[i].files[0].functions[f].after);
        }
    }
}

TEST_CASE("default length profile is reproduced within 5% per bin") {
    SynthSpec spec;
    spec.seed = 31;
    spec.n_pos = 0;
    spec.n_neg_hard = 10000;
    const auto commits = synth_corpus(spec);
    std::vector<FunctionSample> samples;
    for (const auto& c : commits) {
        auto ex = extract_pairs(c);
        for (auto& s : ex.p3) samples.push_back(std::move(s));
    }
    REQUIRE(samples.size() == 10000);
    const auto st = corpus_stats(samples);
    const auto profile = default_length_profile();
    double total = 0;
    for (double f : profile) total += f;
    for (std::size_t b = 0; b < profile.size(); ++b) {
        const double expected = profile[b] / total;
        const double actual = static_cast<double>(st.length_bins[b]) / 10000.0;
        CHECK(std::fabs(expected - actual) < 0.05);
    }
}

TEST_CASE("length histogram bins single values correctly") {
    FunctionSample s;
    s.id = "one";
    s.code = std::string(15, 'x');
    s.label = 0;
    s.partition = Partition::P3;
    const auto st = corpus_stats(std::vector<FunctionSample>{s});
    for (std::size_t b = 0; b < st.length_bins.size(); ++b)
        CHECK(st.length_bins[b] == (b == 1 ? 1u : 0u));
    const auto empty = corpus_stats(std::vector<FunctionSample>{});
    for (auto c : empty.length_bins) CHECK(c == 0u);
    CHECK(empty.cwe_counts.empty());
}

TEST_CASE("cwe table reproduces the appendix test-set shape") {
    // top 19 tags with their reference counts, plus 71 spread over rare tags
    const std::vector<std::pair<std::string, std::size_t>> top{
        {"CWE-79", 36}, {"CWE-611", 23}, {"CWE-20", 22}, {"CWE-22", 13}, {"CWE-264", 10},
        {"CWE-502", 9}, {"CWE-200", 8},  {"CWE-94", 8},  {"CWE-863", 8}, {"CWE-287", 6},
        {"CWE-74", 6},  {"CWE-78", 6},   {"CWE-284", 6}, {"CWE-276", 4}, {"CWE-755", 4},
        {"CWE-89", 4},  {"CWE-269", 4},  {"CWE-352", 4}, {"CWE-119", 3}};
    std::vector<FunctionSample> samples;
    auto push = [&](const std::string& cwe, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            FunctionSample s;
            s.id = cwe + "-" + std::to_string(samples.size());
            s.code = "x";
            s.partition = Partition::P3;
            s.cwe = cwe;
            samples.push_back(std::move(s));
        }
    };
    for (const auto& [tag, count] : top) push(tag, count);
    // 71 "Other": rare categories below the top 19
    for (int i = 0; i < 35; ++i) push("CWE-" + std::to_string(900 + i), 2);
    push("CWE-999", 1);

    const auto st = corpus_stats(samples);
    REQUIRE(st.cwe_counts.size() == 20);
    CHECK(st.cwe_counts[0].first == "Other");
    CHECK(st.cwe_counts[0].second == 71);
    CHECK(st.cwe_counts[1] == std::pair<std::string, std::size_t>{"CWE-79", 36});
    CHECK(st.cwe_counts[2] == std::pair<std::string, std::size_t>{"CWE-611", 23});
}

TEST_CASE("commits and samples survive a JSONL round trip") {
    const auto commits = fixture();
    const std::string cpath = "test_dg_commits.jsonl";
    write_commits_jsonl(commits, cpath);
    const auto back = read_commits_jsonl(cpath);
    REQUIRE(back.size() == commits.size());
    for (std::size_t i = 0; i < commits.size(); ++i) {
        CHECK(back[i].commit == commits[i].commit);
        REQUIRE(back[i].files.size() == commits[i].files.size());
        for (std::size_t f = 0; f < commits[i].files.size(); ++f) {
            REQUIRE(back[i].files[f].functions.size() == commits[i].files[f].functions.size());
            for (std::size_t k = 0; k < commits[i].files[f].functions.size(); ++k) {
                CHECK(back[i].files[f].functions[k].before ==
                      commits[i].files[f].functions[k].before);
                CHECK(back[i].files[f].functions[k].after ==
                      commits[i].files[f].functions[k].after);
            }
        }
    }
    std::remove(cpath.c_str());

    const auto bundle = build_x1(commits, true, {}, 7);
    const std::string spath = "test_dg_samples.jsonl";
    write_samples_jsonl(bundle.train, spath);
    const auto samples = read_samples_jsonl(spath);
    REQUIRE(samples.size() == bundle.train.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(samples[i].id == bundle.train[i].id);
        CHECK(samples[i].code == bundle.train[i].code);
        CHECK(samples[i].label == bundle.train[i].label);
        CHECK(samples[i].partition == bundle.train[i].partition);
    }
    std::remove(spath.c_str());
}
