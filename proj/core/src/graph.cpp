#include "vdlab/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vdlab {

namespace {
constexpr double kLayerNormVarFloor = 1e-5;
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Graph::NodeId Graph::push(std::string op, Tensor value, std::vector<NodeId> inputs,
                          std::function<void(Graph&, Node&)> backprop) {
    auto n = std::make_unique<Node>();
    n->op = std::move(op);
    n->value = std::move(value);
    n->inputs = std::move(inputs);
    n->backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

void Graph::shape_error(const std::string& op, NodeId id, const std::string& detail) const {
    throw std::invalid_argument("graph op '" + op + "' (node " + std::to_string(id) + "): " + detail);
}

Graph::NodeId Graph::input(Tensor value, std::string name) {
    return push(std::move(name), std::move(value), {}, nullptr);
}

Graph::NodeId Graph::constant(Tensor value) { return push("const", std::move(value), {}, nullptr); }

Graph::NodeId Graph::param(Parameter& p) {
    NodeId id = push("param:" + p.name, p.value, {}, nullptr);
    node(id).bound = &p;
    return id;
}

const Tensor& Graph::value(NodeId id) const { return nodes_.at(id)->value; }
const Tensor& Graph::grad(NodeId id) const { return nodes_.at(id)->grad; }

Graph::NodeId Graph::matmul(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.ndim() != 2 || B.ndim() != 2 || A.shape()[1] != B.shape()[0])
        shape_error("matmul", nodes_.size(),
                    "incompatible shapes " + A.shape_str() + " x " + B.shape_str());
    const std::size_t n = A.shape()[0], k = A.shape()[1], m = B.shape()[1];
    Tensor C({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = A.data() + i * k;
        double* ci = C.data() + i * m;
        for (std::size_t t = 0; t < k; ++t) {
            const double av = ai[t];
            if (av == 0.0) continue;
            const double* bt = B.data() + t * m;
            for (std::size_t j = 0; j < m; ++j) ci[j] += av * bt[j];
        }
    }
    return push("matmul", std::move(C), {a, b}, [n, k, m](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        Node& nb = g.node(self.inputs[1]);
        const double* dC = self.grad.data();
        // dA += dC * B^T
        for (std::size_t i = 0; i < n; ++i) {
            double* dai = na.grad.data() + i * k;
            const double* dci = dC + i * m;
            for (std::size_t t = 0; t < k; ++t) {
                const double* bt = nb.value.data() + t * m;
                double acc = 0.0;
                for (std::size_t j = 0; j < m; ++j) acc += dci[j] * bt[j];
                dai[t] += acc;
            }
        }
        // dB += A^T * dC
        for (std::size_t i = 0; i < n; ++i) {
            const double* ai = na.value.data() + i * k;
            const double* dci = dC + i * m;
            for (std::size_t t = 0; t < k; ++t) {
                const double av = ai[t];
                if (av == 0.0) continue;
                double* dbt = nb.grad.data() + t * m;
                for (std::size_t j = 0; j < m; ++j) dbt[j] += av * dci[j];
            }
        }
    });
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B))
        shape_error("add", nodes_.size(), "shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C[i] += B[i];
    return push("add", std::move(C), {a, b}, [](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        Node& nb = g.node(self.inputs[1]);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            na.grad[i] += self.grad[i];
            nb.grad[i] += self.grad[i];
        }
    });
}

Graph::NodeId Graph::sub(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B))
        shape_error("sub", nodes_.size(), "shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C[i] -= B[i];
    return push("sub", std::move(C), {a, b}, [](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        Node& nb = g.node(self.inputs[1]);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            na.grad[i] += self.grad[i];
            nb.grad[i] -= self.grad[i];
        }
    });
}

Graph::NodeId Graph::mul(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B))
        shape_error("mul", nodes_.size(), "shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
    return push("mul", std::move(C), {a, b}, [](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        Node& nb = g.node(self.inputs[1]);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            na.grad[i] += self.grad[i] * nb.value[i];
            nb.grad[i] += self.grad[i] * na.value[i];
        }
    });
}

Graph::NodeId Graph::add_bias(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.ndim() != 2 || B.ndim() != 1 || A.shape()[1] != B.shape()[0])
        shape_error("add_bias", nodes_.size(), A.shape_str() + " + bias " + B.shape_str());
    const std::size_t n = A.shape()[0], d = A.shape()[1];
    Tensor C = A;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) C[i * d + j] += B[j];
    return push("add_bias", std::move(C), {a, b}, [n, d](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        Node& nb = g.node(self.inputs[1]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                na.grad[i * d + j] += self.grad[i * d + j];
                nb.grad[j] += self.grad[i * d + j];
            }
    });
}

Graph::NodeId Graph::mul_rows(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.ndim() != 2 || B.ndim() != 1 || A.shape()[1] != B.shape()[0])
        shape_error("mul_rows", nodes_.size(), A.shape_str() + " * gain " + B.shape_str());
    const std::size_t n = A.shape()[0], d = A.shape()[1];
    Tensor C = A;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) C[i * d + j] *= B[j];
    return push("mul_rows", std::move(C), {a, b}, [n, d](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        Node& nb = g.node(self.inputs[1]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                na.grad[i * d + j] += self.grad[i * d + j] * nb.value[j];
                nb.grad[j] += self.grad[i * d + j] * na.value[i * d + j];
            }
    });
}

Graph::NodeId Graph::scale(NodeId a, double c) {
    Tensor C = value(a);
    for (auto& v : C.values()) v *= c;
    return push("scale", std::move(C), {a}, [c](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad[i] += c * self.grad[i];
    });
}

Graph::NodeId Graph::add_const(NodeId a, double c) {
    Tensor C = value(a);
    for (auto& v : C.values()) v += c;
    return push("add_const", std::move(C), {a}, [](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad[i] += self.grad[i];
    });
}

Graph::NodeId Graph::pow_const(NodeId a, double p) {
    const Tensor& A = value(a);
    Tensor C = A;
    for (auto& v : C.values()) v = std::pow(v, p);
    return push("pow_const", std::move(C), {a}, [p](Graph& g, Node& self) {
        if (p == 0.0) return;
        Node& na = g.node(self.inputs[0]);
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            na.grad[i] += self.grad[i] * p * std::pow(na.value[i], p - 1.0);
    });
}

Graph::NodeId Graph::log(NodeId a) {
    Tensor C = value(a);
    for (auto& v : C.values()) v = std::log(v);
    return push("log", std::move(C), {a}, [](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad[i] += self.grad[i] / na.value[i];
    });
}

Graph::NodeId Graph::sigmoid(NodeId a) {
    Tensor C = value(a);
    for (auto& v : C.values()) v = 1.0 / (1.0 + std::exp(-v));
    return push("sigmoid", std::move(C), {a}, [](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double s = self.value[i];
            na.grad[i] += self.grad[i] * s * (1.0 - s);
        }
    });
}

Graph::NodeId Graph::gelu(NodeId a) {
    Tensor C = value(a);
    for (auto& v : C.values()) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    return push("gelu", std::move(C), {a}, [](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double x = na.value[i];
            const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
            na.grad[i] += self.grad[i] * (cdf + x * pdf);
        }
    });
}

Graph::NodeId Graph::clamp(NodeId a, double lo, double hi) {
    Tensor C = value(a);
    for (auto& v : C.values()) v = std::clamp(v, lo, hi);
    return push("clamp", std::move(C), {a}, [lo, hi](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (na.value[i] > lo && na.value[i] < hi) na.grad[i] += self.grad[i];
    });
}

Graph::NodeId Graph::transpose(NodeId a) {
    const Tensor& A = value(a);
    if (A.ndim() != 2) shape_error("transpose", nodes_.size(), "needs rank 2, got " + A.shape_str());
    const std::size_t n = A.shape()[0], m = A.shape()[1];
    Tensor C({m, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) C[j * n + i] = A[i * m + j];
    return push("transpose", std::move(C), {a}, [n, m](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) na.grad[i * m + j] += self.grad[j * n + i];
    });
}

Graph::NodeId Graph::row_softmax(NodeId a) {
    const Tensor& A = value(a);
    if (A.ndim() != 2) shape_error("row_softmax", nodes_.size(), "needs rank 2, got " + A.shape_str());
    const std::size_t n = A.shape()[0], m = A.shape()[1];
    Tensor C = A;
    for (std::size_t i = 0; i < n; ++i) {
        double* row = C.data() + i * m;
        double mx = row[0];
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            row[j] = std::exp(row[j] - mx);
            s += row[j];
        }
        for (std::size_t j = 0; j < m; ++j) row[j] /= s;
    }
    return push("row_softmax", std::move(C), {a}, [n, m](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        for (std::size_t i = 0; i < n; ++i) {
            const double* y = self.value.data() + i * m;
            const double* dy = self.grad.data() + i * m;
            double dot = 0.0;
            for (std::size_t j = 0; j < m; ++j) dot += y[j] * dy[j];
            double* dx = na.grad.data() + i * m;
            for (std::size_t j = 0; j < m; ++j) dx[j] += y[j] * (dy[j] - dot);
        }
    });
}

Graph::NodeId Graph::row_log_softmax(NodeId a) {
    const Tensor& A = value(a);
    if (A.ndim() != 2)
        shape_error("row_log_softmax", nodes_.size(), "needs rank 2, got " + A.shape_str());
    const std::size_t n = A.shape()[0], m = A.shape()[1];
    Tensor C = A;
    for (std::size_t i = 0; i < n; ++i) {
        double* row = C.data() + i * m;
        double mx = row[0];
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += std::exp(row[j] - mx);
        const double lse = mx + std::log(s);
        for (std::size_t j = 0; j < m; ++j) row[j] -= lse;
    }
    return push("row_log_softmax", std::move(C), {a}, [n, m](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        for (std::size_t i = 0; i < n; ++i) {
            const double* y = self.value.data() + i * m;
            const double* dy = self.grad.data() + i * m;
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += dy[j];
            double* dx = na.grad.data() + i * m;
            for (std::size_t j = 0; j < m; ++j) dx[j] += dy[j] - std::exp(y[j]) * s;
        }
    });
}

Graph::NodeId Graph::layer_norm(NodeId a) {
    const Tensor& A = value(a);
    if (A.ndim() != 2) shape_error("layer_norm", nodes_.size(), "needs rank 2, got " + A.shape_str());
    const std::size_t n = A.shape()[0], m = A.shape()[1];
    Tensor C({n, m});
    std::vector<double> inv_std(n);
    std::vector<char> active(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = A.data() + i * m;
        double mean = 0.0;
        for (std::size_t j = 0; j < m; ++j) mean += x[j];
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (std::size_t j = 0; j < m; ++j) var += (x[j] - mean) * (x[j] - mean);
        var /= static_cast<double>(m);
        active[i] = var > kLayerNormVarFloor;
        const double denom = std::sqrt(std::max(var, kLayerNormVarFloor));
        inv_std[i] = 1.0 / denom;
        // a bitwise-constant row maps to exact zeros; without this the inexact
        // mean subtraction leaves ~1e-13 residue
        const bool constant_row =
            std::all_of(x, x + m, [&](double v) { return v == x[0]; });
        for (std::size_t j = 0; j < m; ++j)
            C[i * m + j] = constant_row ? 0.0 : (x[j] - mean) * inv_std[i];
    }
    return push("layer_norm", std::move(C), {a},
                [n, m, inv_std = std::move(inv_std), active = std::move(active)](Graph& g, Node& self) {
                    Node& na = g.node(self.inputs[0]);
                    const double dm = static_cast<double>(m);
                    for (std::size_t i = 0; i < n; ++i) {
                        const double* y = self.value.data() + i * m;
                        const double* dy = self.grad.data() + i * m;
                        double mean_dy = 0.0, mean_dy_y = 0.0;
                        for (std::size_t j = 0; j < m; ++j) {
                            mean_dy += dy[j];
                            mean_dy_y += dy[j] * y[j];
                        }
                        mean_dy /= dm;
                        mean_dy_y /= dm;
                        double* dx = na.grad.data() + i * m;
                        // at the variance floor the denominator is a constant
                        for (std::size_t j = 0; j < m; ++j) {
                            double t = dy[j] - mean_dy;
                            if (active[i]) t -= y[j] * mean_dy_y;
                            dx[j] += inv_std[i] * t;
                        }
                    }
                });
}

Graph::NodeId Graph::sum(NodeId a) {
    const Tensor& A = value(a);
    double s = 0.0;
    for (double v : A.values()) s += v;
    return push("sum", Tensor::scalar(s), {a}, [](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        const double dy = self.grad[0];
        for (auto& v : na.grad.values()) v += dy;
    });
}

Graph::NodeId Graph::dropout(NodeId a, double p, std::mt19937_64& rng) {
    if (p < 0.0 || p >= 1.0)
        throw std::invalid_argument("dropout probability must be in [0,1), got " + std::to_string(p));
    const Tensor& A = value(a);
    std::bernoulli_distribution keep(1.0 - p);
    std::vector<char> mask(A.size());
    const double inv_keep = 1.0 / (1.0 - p);
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) {
        mask[i] = keep(rng);
        C[i] = mask[i] ? C[i] * inv_keep : 0.0;
    }
    return push("dropout", std::move(C), {a},
                [mask = std::move(mask), inv_keep](Graph& g, Node& self) {
                    Node& na = g.node(self.inputs[0]);
                    for (std::size_t i = 0; i < self.grad.size(); ++i)
                        if (mask[i]) na.grad[i] += self.grad[i] * inv_keep;
                });
}

Graph::NodeId Graph::embedding(NodeId table, std::span<const int> ids) {
    const Tensor& T = value(table);
    if (T.ndim() != 2) shape_error("embedding", nodes_.size(), "table must be rank 2");
    const std::size_t v = T.shape()[0], d = T.shape()[1];
    Tensor C({ids.size(), d});
    std::vector<std::size_t> rows(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v)
            shape_error("embedding", nodes_.size(),
                        "id " + std::to_string(ids[i]) + " out of range [0," + std::to_string(v) + ")");
        rows[i] = static_cast<std::size_t>(ids[i]);
        std::copy_n(T.data() + rows[i] * d, d, C.data() + i * d);
    }
    return push("embedding", std::move(C), {table},
                [rows = std::move(rows), d](Graph& g, Node& self) {
                    Node& nt = g.node(self.inputs[0]);
                    for (std::size_t i = 0; i < rows.size(); ++i)
                        for (std::size_t j = 0; j < d; ++j)
                            nt.grad[rows[i] * d + j] += self.grad[i * d + j];
                });
}

Graph::NodeId Graph::gather_rows(NodeId a, std::span<const std::size_t> rows) {
    const Tensor& A = value(a);
    if (A.ndim() != 2) shape_error("gather_rows", nodes_.size(), "needs rank 2");
    const std::size_t d = A.shape()[1];
    Tensor C({rows.size(), d});
    std::vector<std::size_t> rv(rows.begin(), rows.end());
    for (std::size_t i = 0; i < rv.size(); ++i) {
        if (rv[i] >= A.shape()[0])
            shape_error("gather_rows", nodes_.size(), "row " + std::to_string(rv[i]) + " out of range");
        std::copy_n(A.data() + rv[i] * d, d, C.data() + i * d);
    }
    return push("gather_rows", std::move(C), {a}, [rv = std::move(rv), d](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        for (std::size_t i = 0; i < rv.size(); ++i)
            for (std::size_t j = 0; j < d; ++j) na.grad[rv[i] * d + j] += self.grad[i * d + j];
    });
}

Graph::NodeId Graph::gather_elems(NodeId a,
                                  std::span<const std::pair<std::size_t, std::size_t>> idx) {
    const Tensor& A = value(a);
    if (A.ndim() != 2) shape_error("gather_elems", nodes_.size(), "needs rank 2");
    const std::size_t n = A.shape()[0], m = A.shape()[1];
    Tensor C({idx.size()});
    std::vector<std::size_t> flat(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i].first >= n || idx[i].second >= m)
            shape_error("gather_elems", nodes_.size(), "index out of range");
        flat[i] = idx[i].first * m + idx[i].second;
        C[i] = A[flat[i]];
    }
    return push("gather_elems", std::move(C), {a}, [flat = std::move(flat)](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        for (std::size_t i = 0; i < flat.size(); ++i) na.grad[flat[i]] += self.grad[i];
    });
}

Graph::NodeId Graph::slice_cols(NodeId a, std::size_t c0, std::size_t c1) {
    const Tensor& A = value(a);
    if (A.ndim() != 2 || c0 >= c1 || c1 > A.shape()[1])
        shape_error("slice_cols", nodes_.size(),
                    "bad column range [" + std::to_string(c0) + "," + std::to_string(c1) + ") of " +
                        A.shape_str());
    const std::size_t n = A.shape()[0], m = A.shape()[1], w = c1 - c0;
    Tensor C({n, w});
    for (std::size_t i = 0; i < n; ++i)
        std::copy_n(A.data() + i * m + c0, w, C.data() + i * w);
    return push("slice_cols", std::move(C), {a}, [n, m, c0, w](Graph& g, Node& self) {
        Node& na = g.node(self.inputs[0]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < w; ++j) na.grad[i * m + c0 + j] += self.grad[i * w + j];
    });
}

Graph::NodeId Graph::concat_cols(std::span<const NodeId> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const std::size_t n = value(parts[0]).shape()[0];
    std::size_t total = 0;
    std::vector<std::size_t> widths;
    for (NodeId p : parts) {
        const Tensor& t = value(p);
        if (t.ndim() != 2 || t.shape()[0] != n)
            shape_error("concat_cols", nodes_.size(), "row count mismatch at " + t.shape_str());
        widths.push_back(t.shape()[1]);
        total += t.shape()[1];
    }
    Tensor C({n, total});
    std::size_t off = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const Tensor& t = value(parts[p]);
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(t.data() + i * widths[p], widths[p], C.data() + i * total + off);
        off += widths[p];
    }
    return push("concat_cols", std::move(C), std::vector<NodeId>(parts.begin(), parts.end()),
                [n, total, widths = std::move(widths)](Graph& g, Node& self) {
                    std::size_t off = 0;
                    for (std::size_t p = 0; p < self.inputs.size(); ++p) {
                        Node& np = g.node(self.inputs[p]);
                        for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < widths[p]; ++j)
                                np.grad[i * widths[p] + j] += self.grad[i * total + off + j];
                        off += widths[p];
                    }
                });
}

void Graph::backward(NodeId scalar_output) {
    if (scalar_output >= nodes_.size())
        throw std::invalid_argument("backward: unknown node " + std::to_string(scalar_output));
    Node& out = node(scalar_output);
    if (out.value.size() != 1)
        throw std::invalid_argument("backward: output node " + std::to_string(scalar_output) +
                                    " has shape " + out.value.shape_str() + ", expected a scalar");
    if (ran_backward_) throw std::logic_error("backward: graph already differentiated");
    ran_backward_ = true;

    for (auto& n : nodes_) n->grad = Tensor(n->value.shape());
    out.grad[0] = 1.0;
    for (std::size_t i = scalar_output + 1; i-- > 0;) {
        Node& n = *nodes_[i];
        if (n.backprop) n.backprop(*this, n);
    }
    for (auto& n : nodes_)
        if (n->bound && n->bound->trainable)
            for (std::size_t i = 0; i < n->grad.size(); ++i) n->bound->grad[i] += n->grad[i];
}

Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& theta,
                              double eps) {
    if (eps <= 0.0) throw std::invalid_argument("finite_difference_grad: eps must be positive");
    Tensor g(theta.shape());
    Tensor probe = theta;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + eps;
        const double fp = f(probe);
        probe[i] = orig - eps;
        const double fm = f(probe);
        probe[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("finite_difference_grad: non-finite function value at coordinate " +
                                     std::to_string(i));
        g[i] = (fp - fm) / (2.0 * eps);
    }
    return g;
}

}  // namespace vdlab
