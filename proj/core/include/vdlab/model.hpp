#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vdlab/graph.hpp"
#include "vdlab/packing.hpp"
#include "vdlab/tensor.hpp"

namespace vdlab {

struct ModelConfig {
    int n_layers = 2;
    int n_heads = 4;
    int d_model = 64;
    int context_size = 256;
    int vocab = 260;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct LoraConfig {
    int rank = 8;
    double alpha = 32.0;
    double dropout = 0.05;
    // attention projections to adapt; the base choice is query and value
    std::vector<std::string> targets = {"wq", "wv"};

    void validate() const;
    bool operator==(const LoraConfig&) const = default;
};

// Miniature causal decoder-only transformer with an LM head over the
// byte-level vocabulary. Parameters are named fp64 tensors; attaching LoRA
// freezes the base weights and adds zero-initialized adapter pairs.
class LanguageModel {
public:
    static LanguageModel init(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    const std::optional<LoraConfig>& lora() const { return lora_; }

    void apply_lora(const LoraConfig& cfg);

    // Builds the forward pass into g and returns the [N, vocab] logits node.
    // Dropout on adapter inputs is active only when training and a LoRA
    // config with nonzero dropout is attached.
    Graph::NodeId build_logits(Graph& g, std::span<const int> tokens, bool training = false,
                               std::mt19937_64* dropout_rng = nullptr);

    // Full-softmax next-token distributions, [N, vocab].
    Tensor forward_probs(std::span<const int> tokens);

    // sigma(z_yes - z_no) read at the function's EOS position in the
    // single-function evaluation layout.
    double predict_vuln_prob(const FunctionSample& sample);

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    std::vector<Parameter*> trainable_parameters();
    std::size_t trainable_param_count() const;
    Parameter& param(const std::string& name);

    void zero_grads();

    void save(const std::string& path) const;
    static LanguageModel load(const std::string& path);

    LanguageModel clone() const;

private:
    LanguageModel() = default;
    Parameter& add_param(const std::string& name, Tensor init, bool trainable = true);

    ModelConfig cfg_;
    std::optional<LoraConfig> lora_;
    std::vector<std::unique_ptr<Parameter>> params_;
};

}  // namespace vdlab
