#pragma once

#include <map>
#include <span>
#include <vector>

#include "vdlab/graph.hpp"
#include "vdlab/packing.hpp"
#include "vdlab/sample.hpp"

namespace vdlab {

enum class Reduction { Sum, Mean };

inline const char* to_string(Reduction r) { return r == Reduction::Sum ? "sum" : "mean"; }
Reduction reduction_from_string(const std::string& s);

struct LossConfig {
    Regime objective = Regime::Classification;
    Reduction reduction = Reduction::Sum;
    double focal_gamma = 0.0;  // 0 reproduces plain cross-entropy
    std::map<Partition, double> partition_weights = {
        {Partition::P1, 1.0}, {Partition::P2, 1.0}, {Partition::P3, 1.0}};

    void validate() const;
};

// Probabilities are clamped to [kProbEps, 1-kProbEps] before any log.
inline constexpr double kProbEps = 1e-12;

// --- plain-value forms (used for oracles, reporting, and tests) ---

// -sum over masked positions of log p(target). probs: [N,v] rows of
// next-token distributions, targets[t] = id expected at position t.
double ntp_loss(const Tensor& probs, std::span<const int> targets, std::span<const char> mask);

// Per-entry focal/weighted binary cross-entropy, reduced over the batch.
double classification_batch_loss(std::span<const double> probs, std::span<const int> labels,
                                 std::span<const double> weights, double gamma,
                                 Reduction reduction);

// Per-entry loss terms before reduction (exposed for the imbalance analyses).
std::vector<double> classification_loss_terms(std::span<const double> probs,
                                              std::span<const int> labels,
                                              std::span<const double> weights, double gamma);

std::vector<double> assign_weights(std::span<const FunctionSample> samples,
                                   const std::map<Partition, double>& partition_weights);
double weight_for(Partition p, const std::map<Partition, double>& partition_weights);

// --- graph forms (used by the trainer; differentiable) ---

// Next-token objective over a packed sequence: logits [N,v]; targets are the
// shifted token ids with PAD targets masked out.
Graph::NodeId ntp_loss_node(Graph& g, Graph::NodeId logits, std::span<const int> tokens);

// Classification objective: sigmoid(z_yes - z_no) at each entry's readout
// position, focal-modulated and weighted, then sum or mean over entries.
Graph::NodeId classification_loss_node(Graph& g, Graph::NodeId logits, const PackedSequence& seq,
                                       const LossConfig& cfg);

}  // namespace vdlab
