#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vdlab/tensor.hpp"

namespace vdlab {

// Define-by-run compute graph for reverse-mode differentiation.
//
// Every builder method evaluates its forward result immediately and records
// the node; backward() walks the recorded nodes in reverse and accumulates
// gradients into the bound Parameter leaves. A graph is built, differentiated
// once, and discarded; parameters persist outside it.
class Graph {
public:
    using NodeId = std::size_t;

    // --- leaves ---
    NodeId input(Tensor value, std::string name = "input");
    NodeId constant(Tensor value);
    NodeId param(Parameter& p);

    // --- binary ops ---
    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);       // same-shape elementwise
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);       // elementwise
    NodeId add_bias(NodeId a, NodeId b);  // a: [n,d], b: [d]; broadcast over rows
    NodeId mul_rows(NodeId a, NodeId b);  // a: [n,d], b: [d]; per-column scale

    // --- unary ops ---
    NodeId scale(NodeId a, double c);
    NodeId add_const(NodeId a, double c);
    NodeId pow_const(NodeId a, double p);  // requires positive base values
    NodeId log(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId gelu(NodeId a);
    NodeId clamp(NodeId a, double lo, double hi);
    NodeId transpose(NodeId a);
    NodeId row_softmax(NodeId a);
    NodeId row_log_softmax(NodeId a);
    NodeId layer_norm(NodeId a);  // per-row, no affine terms
    NodeId sum(NodeId a);         // -> [1]
    NodeId dropout(NodeId a, double p, std::mt19937_64& rng);  // inverted dropout

    // --- indexing ---
    NodeId embedding(NodeId table, std::span<const int> ids);
    NodeId gather_rows(NodeId a, std::span<const std::size_t> rows);
    // picks a[r_k, c_k] into a vector [k]
    NodeId gather_elems(NodeId a, std::span<const std::pair<std::size_t, std::size_t>> idx);
    NodeId slice_cols(NodeId a, std::size_t c0, std::size_t c1);
    NodeId concat_cols(std::span<const NodeId> parts);

    const Tensor& value(NodeId id) const;
    const Tensor& grad(NodeId id) const;
    std::size_t node_count() const { return nodes_.size(); }

    // Seeds d(out)/d(out)=1 at a scalar node, runs the recorded closures in
    // reverse order, then adds each trainable leaf's gradient to its Parameter.
    void backward(NodeId scalar_output);

private:
    struct Node {
        std::string op;
        Tensor value;
        Tensor grad;
        std::vector<NodeId> inputs;
        std::function<void(Graph&, Node&)> backprop;  // null for leaves
        Parameter* bound = nullptr;
    };

    NodeId push(std::string op, Tensor value, std::vector<NodeId> inputs,
                std::function<void(Graph&, Node&)> backprop);
    Node& node(NodeId id) { return *nodes_[id]; }
    [[noreturn]] void shape_error(const std::string& op, NodeId id, const std::string& detail) const;

    std::vector<std::unique_ptr<Node>> nodes_;
    bool ran_backward_ = false;
};

// Central finite differences d f / d θ, the gradient oracle used to check
// every backward rule. f must be a pure function of the parameter value.
Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& theta,
                              double eps = 1e-5);

}  // namespace vdlab
