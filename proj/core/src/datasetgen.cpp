#include "vdlab/datasetgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace vdlab {

namespace {

bool is_changed(const FunctionVersion& f) {
    return f.before.has_value() && f.after.has_value() && *f.before != *f.after;
}

bool is_unchanged(const FunctionVersion& f) {
    return f.before.has_value() && f.after.has_value() && *f.before == *f.after;
}

}  // namespace

std::size_t CommitRecord::changed_function_count() const {
    std::size_t n = 0;
    for (const auto& file : files)
        for (const auto& f : file.functions)
            if (is_changed(f)) ++n;
    return n;
}

ExtractResult extract_pairs(const CommitRecord& commit) {
    ExtractResult out;
    for (const auto& file : commit.files) {
        std::set<std::string> seen;
        for (const auto& f : file.functions) {
            if (f.name.empty())
                throw std::invalid_argument("commit " + commit.commit + ": unnamed function in " +
                                            file.path);
            if (!seen.insert(f.name).second)
                throw std::invalid_argument("commit " + commit.commit + ": function '" + f.name +
                                            "' appears twice in " + file.path);
            const std::string key = commit.commit + ":" + file.path + ":" + f.name;
            auto make = [&](const std::string& suffix, const std::string& code, int label,
                            Partition part) {
                FunctionSample s;
                s.id = key + suffix;
                s.code = code;
                s.label = label;
                s.partition = part;
                s.cwe = commit.cwe;
                s.project = commit.project;
                s.commit = commit.commit;
                return s;
            };
            if (is_changed(f)) {
                out.p1.push_back(make(":pre", *f.before, 1, Partition::P1));
                out.p2.push_back(make(":post", *f.after, 0, Partition::P2));
            } else if (is_unchanged(f)) {
                out.p3.push_back(make(":ctx", *f.before, 0, Partition::P3));
            }
            // added- or deleted-only functions contribute nothing
        }
    }
    return out;
}

void SplitRatios::validate() const {
    if (train < 0 || validation < 0 || test < 0)
        throw std::invalid_argument("split ratios must be nonnegative");
    if (std::abs(train + validation + test - 1.0) > 1e-9)
        throw std::invalid_argument("split ratios must sum to 1");
}

DatasetBundle build_x1(std::span<const CommitRecord> commits, bool include_p3, SplitRatios ratios,
                       std::uint64_t seed, bool split_by_project, bool keep_pairs_together) {
    ratios.validate();
    std::vector<FunctionSample> all;
    std::size_t n_p1 = 0, n_p2 = 0, n_p3 = 0;
    for (const auto& c : commits) {
        if (c.changed_function_count() != 1) continue;
        auto ex = extract_pairs(c);
        n_p1 += ex.p1.size();
        n_p2 += ex.p2.size();
        for (auto& s : ex.p1) all.push_back(std::move(s));
        for (auto& s : ex.p2) all.push_back(std::move(s));
        if (include_p3) {
            n_p3 += ex.p3.size();
            for (auto& s : ex.p3) all.push_back(std::move(s));
        }
    }
    if (all.empty())
        throw std::invalid_argument("build_x1: no samples survive the single-function filter");

    // Group samples that must share a split: a P1/P2 pair by default, or a
    // whole project when split_by_project is set.
    std::unordered_map<std::string, std::vector<std::size_t>> groups;
    std::vector<std::string> group_order;
    for (std::size_t i = 0; i < all.size(); ++i) {
        std::string key;
        if (split_by_project) {
            key = "proj:" + all[i].project;
        } else if (keep_pairs_together && all[i].partition != Partition::P3) {
            key = all[i].id.substr(0, all[i].id.rfind(':'));  // strip :pre/:post
        } else {
            key = all[i].id;
        }
        auto [it, fresh] = groups.try_emplace(key);
        if (fresh) group_order.push_back(key);
        it->second.push_back(i);
    }

    std::mt19937_64 rng(seed);
    std::shuffle(group_order.begin(), group_order.end(), rng);

    const auto n = static_cast<double>(all.size());
    const auto target_train = static_cast<std::size_t>(std::llround(ratios.train * n));
    const auto target_val = static_cast<std::size_t>(std::llround(ratios.validation * n));

    DatasetBundle bundle;
    for (const auto& key : group_order) {
        const auto& idxs = groups.at(key);
        auto* dst = &bundle.test;
        if (bundle.train.size() + idxs.size() <= target_train)
            dst = &bundle.train;
        else if (bundle.validation.size() + idxs.size() <= target_val)
            dst = &bundle.validation;
        for (std::size_t i : idxs) dst->push_back(all[i]);
    }

    auto& meta = bundle.meta;
    meta.include_p3 = include_p3;
    meta.split_by_project = split_by_project;
    meta.keep_pairs_together = keep_pairs_together;
    meta.seed = seed;
    meta.ratios = ratios;
    meta.n_p1 = n_p1;
    meta.n_p2 = n_p2;
    meta.n_p3 = n_p3;
    for (const auto& s : all) (s.label == 1 ? meta.n_positive : meta.n_negative)++;
    meta.neg_per_pos =
        meta.n_positive ? static_cast<double>(meta.n_negative) / static_cast<double>(meta.n_positive)
                        : 0.0;
    return bundle;
}

std::vector<double> default_length_profile() {
    // bin frequencies observed when parsing real projects
    return {1976, 31627, 51972, 32194, 35769, 8756, 5515, 2236, 767};
}

namespace {

constexpr const char* kSentinel = "#pragma taint\n";
constexpr const char* kEasyMarker = "s = sanitize(s);\n";

const std::vector<std::pair<std::string, double>>& cwe_pool() {
    static const std::vector<std::pair<std::string, double>> pool{
        {"CWE-79", 36}, {"CWE-611", 23}, {"CWE-20", 22}, {"CWE-22", 13}, {"CWE-264", 10},
        {"CWE-502", 9}, {"CWE-200", 8},  {"CWE-94", 8},  {"CWE-863", 8}, {"CWE-287", 6},
        {"CWE-74", 6},  {"CWE-78", 6},   {"CWE-284", 6}, {"CWE-276", 4}, {"CWE-755", 4},
        {"CWE-89", 4},  {"CWE-269", 4},  {"CWE-352", 4}, {"CWE-119", 3}, {"CWE-416", 2},
        {"CWE-476", 2}, {"CWE-190", 1},
    };
    return pool;
}

std::size_t sample_length(std::mt19937_64& rng, const std::vector<double>& profile) {
    std::discrete_distribution<std::size_t> bin_dist(profile.begin(), profile.end());
    const std::size_t bin = bin_dist(rng);
    const auto [lo, hi_raw] = kLengthBins[bin];
    const std::size_t hi = hi_raw == SIZE_MAX ? 4000 : hi_raw;
    std::uniform_int_distribution<std::size_t> len_dist(std::max<std::size_t>(lo, 8), hi - 1);
    return len_dist(rng);
}

// Pseudo-code body of roughly `len` bytes, avoiding '#' so the sentinel stays
// a unique signal.
std::string make_body(std::mt19937_64& rng, std::size_t idx, std::size_t len) {
    static const char* kIdents[] = {"buf", "len", "src", "dst", "tmp", "idx", "val", "ptr", "out"};
    static const char* kOps[] = {" + ", " - ", " * ", " & ", " | "};
    std::uniform_int_distribution<std::size_t> id(0, std::size(kIdents) - 1);
    std::uniform_int_distribution<std::size_t> op(0, std::size(kOps) - 1);
    std::uniform_int_distribution<int> num(0, 255);
    std::string s = "int fn_" + std::to_string(idx) + "(int a) {\n";
    while (s.size() + 2 < len) {
        s += "  ";
        s += kIdents[id(rng)];
        s += " = ";
        s += kIdents[id(rng)];
        s += kOps[op(rng)];
        s += std::to_string(num(rng));
        s += ";\n";
    }
    s += "}\n";
    s.resize(len, ' ');  // histogram tests rely on exact lengths
    return s;
}

// Sentinel occurrences scale with length so the signal density stays roughly
// constant across the histogram bins.
std::string insert_sentinels(const std::string& body, std::mt19937_64& rng) {
    const std::size_t count = body.size() / 80 + 1;
    std::vector<std::size_t> cuts;
    std::uniform_int_distribution<std::size_t> where(0, body.size());
    for (std::size_t i = 0; i < count; ++i) cuts.push_back(where(rng));
    std::sort(cuts.begin(), cuts.end());
    std::string out;
    std::size_t prev = 0;
    for (std::size_t c : cuts) {
        out += body.substr(prev, c - prev);
        out += kSentinel;
        prev = c;
    }
    out += body.substr(prev);
    return out;
}

}  // namespace

std::vector<CommitRecord> synth_corpus(const SynthSpec& spec) {
    if (spec.length_profile.size() != kLengthBins.size())
        throw std::invalid_argument("length_profile must have " + std::to_string(kLengthBins.size()) +
                                    " bins");
    if (spec.sentinel_strength < 0.0 || spec.sentinel_strength > 1.0)
        throw std::invalid_argument("sentinel_strength must be in [0,1]");
    std::mt19937_64 rng(spec.seed);
    std::bernoulli_distribution carries_sentinel(spec.sentinel_strength);
    std::discrete_distribution<std::size_t> cwe_dist = [] {
        std::vector<double> w;
        for (auto& [tag, weight] : cwe_pool()) w.push_back(weight);
        return std::discrete_distribution<std::size_t>(w.begin(), w.end());
    }();

    std::vector<CommitRecord> commits;
    const std::size_t n_commits = std::max<std::size_t>(spec.n_pos, 1);
    std::size_t fn_idx = 0;
    for (std::size_t c = 0; c < n_commits; ++c) {
        CommitRecord rec;
        rec.commit = "synth-c" + std::to_string(c);
        rec.project = "synthetic";
        rec.cwe = cwe_pool()[cwe_dist(rng)].first;
        rec.files.push_back({"src/file_" + std::to_string(c) + ".c", {}});
        if (c < spec.n_pos) {
            const std::string fixed = make_body(rng, fn_idx, sample_length(rng, spec.length_profile));
            const std::string vulnerable =
                carries_sentinel(rng) ? insert_sentinels(fixed, rng) : fixed + "  a = a | 1;\n";
            rec.files[0].functions.push_back(
                {"fn_" + std::to_string(fn_idx), vulnerable, fixed});
            ++fn_idx;
        }
        commits.push_back(std::move(rec));
    }
    // Unchanged functions ride along the generated commits round-robin so the
    // single-function-commit filter keeps them.
    for (std::size_t i = 0; i < spec.n_neg_hard + spec.n_neg_easy; ++i) {
        std::string body = make_body(rng, fn_idx, sample_length(rng, spec.length_profile));
        if (i >= spec.n_neg_hard) body = "int fn_" + std::to_string(fn_idx) + "(int a) {\n  " +
                                         kEasyMarker + body.substr(body.find('\n') + 1);
        auto& rec = commits[i % commits.size()];
        rec.files[0].functions.push_back({"fn_" + std::to_string(fn_idx), body, body});
        ++fn_idx;
    }
    return commits;
}

CorpusStats corpus_stats(std::span<const FunctionSample> samples) {
    CorpusStats st;
    std::map<std::string, std::size_t> cwe;
    for (const auto& s : samples) {
        const std::size_t len = s.code.size();  // byte-level: one token per byte
        for (std::size_t b = 0; b < kLengthBins.size(); ++b)
            if (len >= kLengthBins[b].first && len < kLengthBins[b].second) {
                st.length_bins[b]++;
                break;
            }
        if (!s.cwe.empty()) cwe[s.cwe]++;
    }
    std::vector<std::pair<std::string, std::size_t>> sorted(cwe.begin(), cwe.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    constexpr std::size_t kTop = 19;
    std::size_t other = 0;
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i].first == "Other") {
            other += sorted[i].second;
        } else if (kept.size() < kTop) {
            kept.push_back(sorted[i]);
        } else {
            other += sorted[i].second;
        }
    }
    if (other > 0) kept.emplace_back("Other", other);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    st.cwe_counts = std::move(kept);
    return st;
}

std::string stats_to_text(const CorpusStats& st) {
    std::ostringstream out;
    out << "Function length histogram (tokens)\n";
    for (std::size_t b = 0; b < kLengthBins.size(); ++b) {
        const auto [lo, hi] = kLengthBins[b];
        if (hi == SIZE_MAX)
            out << "  >" << lo;
        else
            out << "  " << lo << "-" << hi;
        out << ": " << st.length_bins[b] << "\n";
    }
    out << "CWE distribution (top 19 + Other)\n";
    for (const auto& [tag, count] : st.cwe_counts) out << "  " << tag << ": " << count << "\n";
    return out.str();
}

std::string stats_to_csv(const CorpusStats& st) {
    std::ostringstream out;
    out << "kind,key,count\n";
    for (std::size_t b = 0; b < kLengthBins.size(); ++b) {
        const auto [lo, hi] = kLengthBins[b];
        out << "length,";
        if (hi == SIZE_MAX)
            out << ">" << lo;
        else
            out << lo << "-" << hi;
        out << "," << st.length_bins[b] << "\n";
    }
    for (const auto& [tag, count] : st.cwe_counts) out << "cwe," << tag << "," << count << "\n";
    return out.str();
}

// ---- JSONL ----

namespace {

constexpr const char* kCommitsFormat = "vdlab-commits";
constexpr const char* kSamplesFormat = "vdlab-samples";

void write_header(std::ofstream& out, const char* format) {
    out << nlohmann::json{{"format", format}, {"version", 1}}.dump() << "\n";
}

void check_header(const std::string& line, const char* format, const std::string& path) {
    const auto j = nlohmann::json::parse(line);
    if (j.value("format", "") != format || j.value("version", 0) != 1)
        throw std::runtime_error(path + ": expected a " + format + " v1 header line");
}

}  // namespace

void write_commits_jsonl(std::span<const CommitRecord> commits, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_header(out, kCommitsFormat);
    for (const auto& c : commits) {
        nlohmann::json files = nlohmann::json::array();
        for (const auto& f : c.files) {
            nlohmann::json fns = nlohmann::json::array();
            for (const auto& fn : f.functions) {
                nlohmann::json j{{"name", fn.name}};
                j["before"] = fn.before ? nlohmann::json(*fn.before) : nlohmann::json(nullptr);
                j["after"] = fn.after ? nlohmann::json(*fn.after) : nlohmann::json(nullptr);
                fns.push_back(std::move(j));
            }
            files.push_back({{"path", f.path}, {"functions", std::move(fns)}});
        }
        out << nlohmann::json{{"commit", c.commit},
                              {"project", c.project},
                              {"cwe", c.cwe},
                              {"files", std::move(files)}}
                   .dump()
            << "\n";
    }
}

std::vector<CommitRecord> read_commits_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    check_header(line, kCommitsFormat, path);
    std::vector<CommitRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        CommitRecord c;
        c.commit = j.at("commit").get<std::string>();
        c.project = j.value("project", "");
        c.cwe = j.value("cwe", "");
        for (const auto& fj : j.at("files")) {
            FileChange file;
            file.path = fj.at("path").get<std::string>();
            for (const auto& fnj : fj.at("functions")) {
                FunctionVersion fn;
                fn.name = fnj.at("name").get<std::string>();
                if (!fnj.at("before").is_null()) fn.before = fnj.at("before").get<std::string>();
                if (!fnj.at("after").is_null()) fn.after = fnj.at("after").get<std::string>();
                file.functions.push_back(std::move(fn));
            }
            c.files.push_back(std::move(file));
        }
        out.push_back(std::move(c));
    }
    return out;
}

void write_samples_jsonl(std::span<const FunctionSample> samples, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_header(out, kSamplesFormat);
    for (const auto& s : samples)
        out << nlohmann::json{{"id", s.id},           {"code", s.code},
                              {"label", s.label},     {"partition", to_string(s.partition)},
                              {"cwe", s.cwe},         {"project", s.project},
                              {"commit", s.commit}}
                   .dump()
            << "\n";
}

std::vector<FunctionSample> read_samples_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    check_header(line, kSamplesFormat, path);
    std::vector<FunctionSample> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        FunctionSample s;
        s.id = j.at("id").get<std::string>();
        s.code = j.at("code").get<std::string>();
        s.label = j.at("label").get<int>();
        s.partition = partition_from_string(j.at("partition").get<std::string>());
        s.cwe = j.value("cwe", "");
        s.project = j.value("project", "");
        s.commit = j.value("commit", "");
        s.validate();
        out.push_back(std::move(s));
    }
    return out;
}

void write_bundle(const DatasetBundle& bundle, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_samples_jsonl(bundle.train, dir + "/train.jsonl");
    write_samples_jsonl(bundle.validation, dir + "/validation.jsonl");
    write_samples_jsonl(bundle.test, dir + "/test.jsonl");
    const auto& m = bundle.meta;
    nlohmann::json j{{"include_p3", m.include_p3},
                     {"split_by_project", m.split_by_project},
                     {"keep_pairs_together", m.keep_pairs_together},
                     {"seed", m.seed},
                     {"ratios", {m.ratios.train, m.ratios.validation, m.ratios.test}},
                     {"n_p1", m.n_p1},
                     {"n_p2", m.n_p2},
                     {"n_p3", m.n_p3},
                     {"n_positive", m.n_positive},
                     {"n_negative", m.n_negative},
                     {"neg_per_pos", m.neg_per_pos},
                     {"split_sizes",
                      {bundle.train.size(), bundle.validation.size(), bundle.test.size()}}};
    std::ofstream out(dir + "/metadata.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + dir + "/metadata.json for writing");
    out << j.dump(2) << "\n";
}

}  // namespace vdlab
