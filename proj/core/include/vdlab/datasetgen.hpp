#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vdlab/sample.hpp"

namespace vdlab {

// One function's presence on the two sides of a commit. A missing side means
// the function was added or deleted by the commit.
struct FunctionVersion {
    std::string name;
    std::optional<std::string> before;
    std::optional<std::string> after;
};

struct FileChange {
    std::string path;
    std::vector<FunctionVersion> functions;
};

struct CommitRecord {
    std::string commit;
    std::string project;
    std::string cwe;  // optional
    std::vector<FileChange> files;

    std::size_t changed_function_count() const;
};

struct ExtractResult {
    std::vector<FunctionSample> p1;  // pre-change versions of changed functions
    std::vector<FunctionSample> p2;  // post-change versions
    std::vector<FunctionSample> p3;  // candidates: unchanged on both sides
};

// Changed function -> before into P1 (label 1), after into P2 (label 0);
// identical on both sides -> P3 candidate; added/deleted-only excluded.
ExtractResult extract_pairs(const CommitRecord& commit);

struct SplitRatios {
    double train = 0.6;
    double validation = 0.2;
    double test = 0.2;

    void validate() const;
};

struct BundleMetadata {
    bool include_p3 = false;
    bool split_by_project = false;
    bool keep_pairs_together = true;
    std::uint64_t seed = 0;
    SplitRatios ratios;
    std::size_t n_p1 = 0, n_p2 = 0, n_p3 = 0;
    std::size_t n_positive = 0, n_negative = 0;
    double neg_per_pos = 0.0;  // the class ratio 1:x
};

struct DatasetBundle {
    std::vector<FunctionSample> train;
    std::vector<FunctionSample> validation;
    std::vector<FunctionSample> test;
    BundleMetadata meta;
};

// Keeps only commits with exactly one changed function, aggregates the
// partitions and splits by sample at the given ratios. By default a P1/P2
// pair always lands in the same split.
DatasetBundle build_x1(std::span<const CommitRecord> commits, bool include_p3, SplitRatios ratios,
                       std::uint64_t seed, bool split_by_project = false,
                       bool keep_pairs_together = true);

// Realistic function-length histogram bin frequencies, used as the default profile.
std::vector<double> default_length_profile();

struct SynthSpec {
    std::uint64_t seed = 0;
    std::size_t n_pos = 0;       // vulnerable/fixed pairs, one changed function per commit
    std::size_t n_neg_hard = 0;  // unchanged hard-looking functions (P3 candidates)
    std::size_t n_neg_easy = 0;  // unchanged easy functions with a distinct pattern
    std::vector<double> length_profile = default_length_profile();
    // probability that a vulnerable function actually carries the sentinel;
    // below 1.0 the positive class becomes noisy and hard to separate
    double sentinel_strength = 1.0;
};

// Deterministic pseudo-code corpus whose vulnerable versions embed a sentinel
// pattern; the full commit pipeline can then be exercised end to end.
std::vector<CommitRecord> synth_corpus(const SynthSpec& spec);

inline constexpr std::array<std::pair<std::size_t, std::size_t>, 9> kLengthBins{{
    {0, 10}, {10, 20}, {20, 50}, {50, 100}, {100, 300},
    {300, 500}, {500, 1000}, {1000, 2000}, {2000, SIZE_MAX},
}};

struct CorpusStats {
    std::array<std::size_t, 9> length_bins{};
    // descending by count, top 19 kept, remainder aggregated as "Other"
    std::vector<std::pair<std::string, std::size_t>> cwe_counts;
};

CorpusStats corpus_stats(std::span<const FunctionSample> samples);

std::string stats_to_text(const CorpusStats& st);
std::string stats_to_csv(const CorpusStats& st);

// --- JSONL formats (versioned header line on commit files) ---
void write_commits_jsonl(std::span<const CommitRecord> commits, const std::string& path);
std::vector<CommitRecord> read_commits_jsonl(const std::string& path);
void write_samples_jsonl(std::span<const FunctionSample> samples, const std::string& path);
std::vector<FunctionSample> read_samples_jsonl(const std::string& path);
void write_bundle(const DatasetBundle& bundle, const std::string& dir);

}  // namespace vdlab
