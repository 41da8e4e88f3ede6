#include "vdlab/packing.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

#include "vdlab/tokenizer.hpp"

namespace vdlab {

Regime regime_from_string(const std::string& s) {
    if (s == "ntp") return Regime::Ntp;
    if (s == "classification") return Regime::Classification;
    throw std::invalid_argument("unknown regime '" + s + "' (expected ntp|classification)");
}

namespace {

constexpr std::size_t kMinContext = 8;

void check_context(std::size_t context_size) {
    if (context_size < kMinContext)
        throw std::invalid_argument("context_size " + std::to_string(context_size) +
                                    " is too small to hold even one truncated function (minimum " +
                                    std::to_string(kMinContext) + ")");
}

// Appends one function to the token stream and records its entry.
void emit(PackedSequence& seq, const FunctionSample& s, std::size_t code_len, Regime regime) {
    PackedEntry e;
    e.sample_id = s.id;
    e.label = s.label;
    e.partition = s.partition;
    const auto code = encode(s.code);
    seq.tokens.insert(seq.tokens.end(), code.begin(), code.begin() + static_cast<long>(code_len));
    if (regime == Regime::Ntp) {
        e.readout_pos = seq.tokens.size();
        seq.tokens.push_back(s.label == 1 ? vocab::kYes : vocab::kNo);
        seq.tokens.push_back(vocab::kEos);
    } else {
        e.readout_pos = seq.tokens.size();
        seq.tokens.push_back(vocab::kEos);
    }
    seq.entries.push_back(std::move(e));
}

void pad_to(PackedSequence& seq, std::size_t context_size) {
    seq.tokens.resize(context_size, vocab::kPad);
}

}  // namespace

std::size_t truncated_code_len(const FunctionSample& sample, std::size_t context_size,
                               Regime /*regime*/) {
    // Keep the first context_size-2 tokens of an over-long function.
    return std::min(sample.code.size(), context_size - 2);
}

std::vector<PackedSequence> pack(std::span<const FunctionSample> samples, Regime regime,
                                 std::size_t context_size,
                                 std::optional<std::size_t> max_funcs_per_batch,
                                 std::uint64_t shuffle_seed) {
    check_context(context_size);
    if (samples.empty()) throw std::invalid_argument("pack: no samples");
    if (max_funcs_per_batch && *max_funcs_per_batch == 0)
        throw std::invalid_argument("pack: max_funcs_per_batch must be positive");

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);

    const std::size_t extras = regime == Regime::Ntp ? 2 : 1;
    std::vector<PackedSequence> out;
    PackedSequence cur;
    for (std::size_t idx : order) {
        const FunctionSample& s = samples[idx];
        const std::size_t code_len = truncated_code_len(s, context_size, regime);
        const std::size_t footprint = code_len + extras;
        const bool cap_hit = max_funcs_per_batch && cur.entries.size() >= *max_funcs_per_batch;
        if (!cur.entries.empty() && (cap_hit || cur.tokens.size() + footprint > context_size)) {
            pad_to(cur, context_size);
            out.push_back(std::move(cur));
            cur = PackedSequence{};
        }
        emit(cur, s, code_len, regime);
    }
    if (!cur.entries.empty()) {
        pad_to(cur, context_size);
        out.push_back(std::move(cur));
    }
    return out;
}

PackedSequence eval_layout(const FunctionSample& sample, std::size_t context_size) {
    check_context(context_size);
    PackedSequence seq;
    emit(seq, sample, truncated_code_len(sample, context_size, Regime::Classification),
         Regime::Classification);
    pad_to(seq, context_size);
    return seq;
}

PackingStats utilization(std::span<const PackedSequence> sequences) {
    if (sequences.empty()) throw std::invalid_argument("utilization: no sequences");
    PackingStats st;
    st.sequences = sequences.size();
    std::size_t non_pad = 0, total = 0, funcs = 0;
    for (const auto& s : sequences) {
        total += s.tokens.size();
        non_pad += static_cast<std::size_t>(
            std::count_if(s.tokens.begin(), s.tokens.end(), [](int t) { return t != vocab::kPad; }));
        funcs += s.entries.size();
        st.max_funcs_per_seq = std::max(st.max_funcs_per_seq, s.entries.size());
    }
    st.utilization = static_cast<double>(non_pad) / static_cast<double>(total);
    st.mean_funcs_per_seq = static_cast<double>(funcs) / static_cast<double>(sequences.size());
    return st;
}

}  // namespace vdlab
