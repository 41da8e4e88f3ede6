#include "vdlab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vdlab/tokenizer.hpp"

namespace vdlab {

Reduction reduction_from_string(const std::string& s) {
    if (s == "sum") return Reduction::Sum;
    if (s == "mean") return Reduction::Mean;
    throw std::invalid_argument("unknown reduction '" + s + "' (expected sum|mean)");
}

void LossConfig::validate() const {
    if (focal_gamma < 0.0) throw std::invalid_argument("focal_gamma must be >= 0");
    for (auto& [p, w] : partition_weights)
        if (w <= 0.0)
            throw std::invalid_argument(std::string("partition weight for ") + to_string(p) +
                                        " must be positive");
}

double weight_for(Partition p, const std::map<Partition, double>& partition_weights) {
    auto it = partition_weights.find(p);
    if (it == partition_weights.end())
        throw std::invalid_argument(std::string("no weight configured for partition ") + to_string(p));
    return it->second;
}

std::vector<double> assign_weights(std::span<const FunctionSample> samples,
                                   const std::map<Partition, double>& partition_weights) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(weight_for(s.partition, partition_weights));
    return out;
}

double ntp_loss(const Tensor& probs, std::span<const int> targets, std::span<const char> mask) {
    if (probs.ndim() != 2) throw std::invalid_argument("ntp_loss: probs must be [N,v]");
    const std::size_t n = probs.shape()[0], v = probs.shape()[1];
    if (targets.size() != n || mask.size() != n)
        throw std::invalid_argument("ntp_loss: targets/mask length mismatch");
    double loss = 0.0;
    std::size_t used = 0;
    for (std::size_t t = 0; t < n; ++t) {
        if (!mask[t]) continue;
        const int tgt = targets[t];
        if (tgt < 0 || static_cast<std::size_t>(tgt) >= v)
            throw std::invalid_argument("ntp_loss: target id out of range at position " +
                                        std::to_string(t));
        const double p = std::clamp(probs.at(t, static_cast<std::size_t>(tgt)), kProbEps, 1.0);
        loss -= std::log(p);
        ++used;
    }
    if (used == 0) throw std::invalid_argument("ntp_loss: mask selects zero positions");
    return loss;
}

std::vector<double> classification_loss_terms(std::span<const double> probs,
                                              std::span<const int> labels,
                                              std::span<const double> weights, double gamma) {
    if (probs.size() != labels.size() || probs.size() != weights.size())
        throw std::invalid_argument("classification loss: probs/labels/weights length mismatch");
    std::vector<double> terms(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw std::invalid_argument("classification loss: label " + std::to_string(labels[i]) +
                                        " outside {0,1} at index " + std::to_string(i));
        const double p = std::clamp(probs[i], kProbEps, 1.0 - kProbEps);
        const double pt = labels[i] == 1 ? p : 1.0 - p;
        const double ce = -std::log(pt);
        terms[i] = weights[i] * std::pow(1.0 - pt, gamma) * ce;
    }
    return terms;
}

double classification_batch_loss(std::span<const double> probs, std::span<const int> labels,
                                 std::span<const double> weights, double gamma,
                                 Reduction reduction) {
    if (probs.empty()) throw std::invalid_argument("classification loss: empty batch");
    const auto terms = classification_loss_terms(probs, labels, weights, gamma);
    double s = 0.0;
    for (double t : terms) s += t;
    return reduction == Reduction::Sum ? s : s / static_cast<double>(terms.size());
}

Graph::NodeId ntp_loss_node(Graph& g, Graph::NodeId logits, std::span<const int> tokens) {
    const Tensor& L = g.value(logits);
    if (L.ndim() != 2 || L.shape()[0] != tokens.size())
        throw std::invalid_argument("ntp_loss_node: logits " + L.shape_str() + " vs " +
                                    std::to_string(tokens.size()) + " tokens");
    std::vector<std::pair<std::size_t, std::size_t>> picks;
    for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
        const int tgt = tokens[t + 1];
        if (tgt == vocab::kPad) continue;  // PAD targets carry no loss
        picks.emplace_back(t, static_cast<std::size_t>(tgt));
    }
    if (picks.empty()) throw std::invalid_argument("ntp_loss_node: sequence has no valid targets");
    auto logp = g.row_log_softmax(logits);
    auto picked = g.gather_elems(logp, picks);
    return g.scale(g.sum(picked), -1.0);
}

Graph::NodeId classification_loss_node(Graph& g, Graph::NodeId logits, const PackedSequence& seq,
                                       const LossConfig& cfg) {
    cfg.validate();
    if (seq.entries.empty()) throw std::invalid_argument("classification_loss_node: empty sequence");
    const std::size_t b = seq.entries.size();
    std::vector<std::pair<std::size_t, std::size_t>> yes_idx, no_idx;
    Tensor sign({b}), offset({b}), w({b});
    for (std::size_t i = 0; i < b; ++i) {
        const auto& e = seq.entries[i];
        if (e.label != 0 && e.label != 1)
            throw std::invalid_argument("classification_loss_node: label outside {0,1} for sample " +
                                        e.sample_id);
        yes_idx.emplace_back(e.readout_pos, static_cast<std::size_t>(vocab::kYes));
        no_idx.emplace_back(e.readout_pos, static_cast<std::size_t>(vocab::kNo));
        sign[i] = e.label == 1 ? 1.0 : -1.0;
        offset[i] = e.label == 1 ? 0.0 : 1.0;
        w[i] = e.weight * weight_for(e.partition, cfg.partition_weights);
    }
    auto z_yes = g.gather_elems(logits, yes_idx);
    auto z_no = g.gather_elems(logits, no_idx);
    auto p = g.clamp(g.sigmoid(g.sub(z_yes, z_no)), kProbEps, 1.0 - kProbEps);
    // p_t = p for positives, 1-p for negatives
    auto pt = g.add(g.mul(p, g.constant(sign)), g.constant(offset));
    auto ce = g.scale(g.log(pt), -1.0);
    auto focal = g.pow_const(g.add_const(g.scale(pt, -1.0), 1.0), cfg.focal_gamma);
    auto terms = g.mul(g.mul(focal, ce), g.constant(w));
    auto total = g.sum(terms);
    if (cfg.reduction == Reduction::Mean) total = g.scale(total, 1.0 / static_cast<double>(b));
    return total;
}

}  // namespace vdlab
