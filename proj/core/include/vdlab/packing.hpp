#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vdlab/sample.hpp"

namespace vdlab {

enum class Regime { Ntp, Classification };

inline const char* to_string(Regime r) { return r == Regime::Ntp ? "ntp" : "classification"; }

Regime regime_from_string(const std::string& s);

// One function's slot inside a packed sequence.
struct PackedEntry {
    std::string sample_id;
    int label = 0;
    Partition partition = Partition::P3;
    std::size_t readout_pos = 0;  // EOS position (classification) or label-token position (ntp)
    double weight = 1.0;
};

// A context window's worth of concatenated functions, PAD-filled at the tail.
struct PackedSequence {
    std::vector<int> tokens;  // exactly context_size ids
    std::vector<PackedEntry> entries;
};

struct PackingStats {
    double utilization = 0.0;       // fraction of non-PAD positions
    double mean_funcs_per_seq = 0.0;  // the packing multiplier
    std::size_t max_funcs_per_seq = 0;
    std::size_t sequences = 0;
};

// Greedy first-fit packing in shuffled order. Footprint of a function is its
// truncated code tokens plus the label token and EOS (ntp) or EOS alone
// (classification). A function never spans two sequences.
std::vector<PackedSequence> pack(std::span<const FunctionSample> samples, Regime regime,
                                 std::size_t context_size,
                                 std::optional<std::size_t> max_funcs_per_batch,
                                 std::uint64_t shuffle_seed);

// Evaluation layout: one function, EOS, PAD fill. Always classification shape.
PackedSequence eval_layout(const FunctionSample& sample, std::size_t context_size);

PackingStats utilization(std::span<const PackedSequence> sequences);

// Tokens a function occupies after truncation, excluding layout extras.
std::size_t truncated_code_len(const FunctionSample& sample, std::size_t context_size,
                               Regime regime);

}  // namespace vdlab
