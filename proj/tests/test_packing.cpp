#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <random>

#include "vdlab/packing.hpp"
#include "vdlab/tokenizer.hpp"

using namespace vdlab;

namespace {

FunctionSample make_sample(const std::string& id, std::size_t code_len, int label) {
    FunctionSample s;
    s.id = id;
    s.code = std::string(code_len, 'x');
    s.label = label;
    s.partition = label == 1 ? Partition::P1 : Partition::P2;
    return s;
}

std::vector<FunctionSample> samples_of_lengths(std::vector<std::size_t> lens) {
    std::vector<FunctionSample> out;
    for (std::size_t i = 0; i < lens.size(); ++i)
        out.push_back(make_sample("s" + std::to_string(i), lens[i], static_cast<int>(i % 2)));
    return out;
}

// Realistic length histogram used by the multiplier check.
std::vector<std::size_t> histogram_lengths(std::size_t n, std::mt19937_64& rng) {
    const std::vector<double> freq{1976, 31627, 51972, 32194, 35769, 8756, 5515, 2236, 767};
    const std::vector<std::pair<std::size_t, std::size_t>> bins{
        {1, 10}, {10, 20}, {20, 50}, {50, 100}, {100, 300},
        {300, 500}, {500, 1000}, {1000, 2000}, {2000, 4000}};
    std::discrete_distribution<std::size_t> bin(freq.begin(), freq.end());
    std::vector<std::size_t> lens;
    for (std::size_t i = 0; i < n; ++i) {
        const auto [lo, hi] = bins[bin(rng)];
        lens.push_back(std::uniform_int_distribution<std::size_t>(lo, hi - 1)(rng));
    }
    return lens;
}

}  // namespace

TEST_CASE("three functions fit one classification sequence with 17 pads") {
    const auto samples = samples_of_lengths({10, 20, 50});
    const auto seqs = pack(samples, Regime::Classification, 100, std::nullopt, 0);
    REQUIRE(seqs.size() == 1);
    CHECK(seqs[0].entries.size() == 3);
    const auto pads = std::count(seqs[0].tokens.begin(), seqs[0].tokens.end(), vocab::kPad);
    CHECK(pads == 17);  // 100 - (11 + 21 + 51)
}

TEST_CASE("max_funcs_per_batch caps sequence membership") {
    const auto samples = samples_of_lengths({10, 20, 50});
    const auto seqs = pack(samples, Regime::Classification, 100, 2, 0);
    REQUIRE(seqs.size() == 2);
    CHECK(seqs[0].entries.size() == 2);
    CHECK(seqs[1].entries.size() == 1);
}

TEST_CASE("an over-long function is truncated and sits alone") {
    const auto samples = samples_of_lengths({5000});
    const auto seqs = pack(samples, Regime::Classification, 2048, std::nullopt, 0);
    REQUIRE(seqs.size() == 1);
    REQUIRE(seqs[0].entries.size() == 1);
    CHECK(seqs[0].entries[0].readout_pos == 2046);
    CHECK(seqs[0].tokens[2046] == vocab::kEos);
    CHECK(seqs[0].tokens[2047] == vocab::kPad);
}

TEST_CASE("ntp layout places the label token then EOS") {
    const auto samples = samples_of_lengths({10});
    const auto seqs = pack(samples, Regime::Ntp, 64, std::nullopt, 0);
    REQUIRE(seqs.size() == 1);
    const auto& e = seqs[0].entries[0];
    CHECK(e.readout_pos == 10);
    CHECK(seqs[0].tokens[10] == (e.label == 1 ? vocab::kYes : vocab::kNo));
    CHECK(seqs[0].tokens[11] == vocab::kEos);
}

TEST_CASE("tiny context is rejected") {
    const auto samples = samples_of_lengths({10});
    CHECK_THROWS_AS(pack(samples, Regime::Classification, 4, std::nullopt, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(eval_layout(samples[0], 4), std::invalid_argument);
}

TEST_CASE("eval layout has one entry with EOS at the readout") {
    FunctionSample s = make_sample("e", 30, 0);
    const auto seq = eval_layout(s, 128);
    REQUIRE(seq.entries.size() == 1);
    CHECK(seq.entries[0].readout_pos == 30);
    CHECK(seq.tokens[30] == vocab::kEos);
    CHECK(seq.tokens.size() == 128);
    // determinism
    const auto seq2 = eval_layout(s, 128);
    CHECK(seq.tokens == seq2.tokens);
}

TEST_CASE("packing conserves the sample multiset and respects caps") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<std::size_t> n_dist(1, 60);
    std::uniform_int_distribution<std::size_t> len_dist(1, 400);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::size_t> lens(n_dist(rng));
        for (auto& l : lens) l = len_dist(rng);
        const auto samples = samples_of_lengths(lens);
        const Regime regime = trial % 2 ? Regime::Ntp : Regime::Classification;
        const std::optional<std::size_t> cap =
            trial % 3 == 0 ? std::optional<std::size_t>(1 + trial % 5) : std::nullopt;
        const auto seqs = pack(samples, regime, 256, cap, trial);

        std::map<std::string, int> seen;
        for (const auto& q : seqs) {
            CHECK(q.tokens.size() == 256);
            if (cap) CHECK(q.entries.size() <= *cap);
            std::size_t prev = 0;
            for (std::size_t i = 0; i < q.entries.size(); ++i) {
                const auto& e = q.entries[i];
                seen[e.sample_id]++;
                CHECK(e.readout_pos < 256);
                if (i > 0) CHECK(e.readout_pos > prev);
                prev = e.readout_pos;
                if (regime == Regime::Classification)
                    CHECK(q.tokens[e.readout_pos] == vocab::kEos);
                else
                    CHECK(q.tokens[e.readout_pos] == (e.label == 1 ? vocab::kYes : vocab::kNo));
            }
        }
        CHECK(seen.size() == samples.size());
        for (auto& [id, count] : seen) CHECK(count == 1);
    }
}

TEST_CASE("cap of one degenerates to the eval layout") {
    const auto samples = samples_of_lengths({12, 99, 3});
    const auto seqs = pack(samples, Regime::Classification, 128, 1, 77);
    REQUIRE(seqs.size() == samples.size());
    for (const auto& q : seqs) {
        REQUIRE(q.entries.size() == 1);
        const auto* src = &samples[0];
        for (const auto& s : samples)
            if (s.id == q.entries[0].sample_id) src = &s;
        const auto ref = eval_layout(*src, 128);
        CHECK(q.tokens == ref.tokens);
        CHECK(q.entries[0].readout_pos == ref.entries[0].readout_pos);
    }
}

TEST_CASE("utilization of a nearly full single sequence") {
    const auto samples = samples_of_lengths({2046});
    const auto seqs = pack(samples, Regime::Classification, 2048, std::nullopt, 0);
    const auto st = utilization(seqs);
    CHECK(st.utilization == doctest::Approx(2047.0 / 2048.0));
    CHECK(st.mean_funcs_per_seq == 1.0);
}

TEST_CASE("histogram-shaped corpus packs more than 10 functions per sequence") {
    std::mt19937_64 rng(22);
    const auto lens = histogram_lengths(10000, rng);
    const auto samples = samples_of_lengths(lens);
    const auto seqs = pack(samples, Regime::Classification, 2048, std::nullopt, 1);
    const auto st = utilization(seqs);
    CHECK(st.mean_funcs_per_seq > 10.0);
}

TEST_CASE("packed layout beats one-function-per-sequence utilization") {
    std::mt19937_64 rng(23);
    const auto lens = histogram_lengths(500, rng);
    const auto samples = samples_of_lengths(lens);
    const auto packed = pack(samples, Regime::Classification, 2048, std::nullopt, 5);
    const auto unpacked = pack(samples, Regime::Classification, 2048, 1, 5);
    CHECK(utilization(packed).utilization > utilization(unpacked).utilization);
}
