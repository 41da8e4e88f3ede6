#include "vdlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "vdlab/tokenizer.hpp"

namespace vdlab {

namespace {
constexpr double kInitStd = 0.02;
constexpr double kMaskNegInf = -1e30;
constexpr char kCheckpointMagic[9] = "VDLABCK1";
}  // namespace

void ModelConfig::validate() const {
    if (d_model <= 0 || n_heads <= 0 || n_layers <= 0)
        throw std::invalid_argument("model dimensions must be positive");
    if (d_model % n_heads != 0)
        throw std::invalid_argument("d_model " + std::to_string(d_model) +
                                    " not divisible by n_heads " + std::to_string(n_heads));
    if (context_size < 8) throw std::invalid_argument("context_size must be >= 8");
    if (vocab != vocab::kSize)
        throw std::invalid_argument("vocab must be " + std::to_string(vocab::kSize));
}

void LoraConfig::validate() const {
    if (rank < 1) throw std::invalid_argument("LoRA rank must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("LoRA dropout must be in [0,1)");
    if (targets.empty()) throw std::invalid_argument("LoRA needs at least one target projection");
    for (const auto& t : targets)
        if (t != "wq" && t != "wk" && t != "wv" && t != "wo")
            throw std::invalid_argument("unknown LoRA target '" + t + "'");
}

Parameter& LanguageModel::add_param(const std::string& name, Tensor init, bool trainable) {
    params_.push_back(std::make_unique<Parameter>(name, std::move(init), trainable));
    return *params_.back();
}

LanguageModel LanguageModel::init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    LanguageModel m;
    m.cfg_ = cfg;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, kInitStd);
    auto randn = [&](std::vector<std::size_t> shape) {
        Tensor t(std::move(shape));
        for (auto& v : t.values()) v = dist(rng);
        return t;
    };
    const auto d = static_cast<std::size_t>(cfg.d_model);
    const auto v = static_cast<std::size_t>(cfg.vocab);
    const auto n = static_cast<std::size_t>(cfg.context_size);
    m.add_param("tok_emb", randn({v, d}));
    m.add_param("pos_emb", randn({n, d}));
    for (int l = 0; l < cfg.n_layers; ++l) {
        const std::string p = "L" + std::to_string(l) + ".";
        m.add_param(p + "ln1.g", Tensor({d}, 1.0));
        m.add_param(p + "ln1.b", Tensor({d}, 0.0));
        m.add_param(p + "wq", randn({d, d}));
        m.add_param(p + "wk", randn({d, d}));
        m.add_param(p + "wv", randn({d, d}));
        m.add_param(p + "wo", randn({d, d}));
        m.add_param(p + "ln2.g", Tensor({d}, 1.0));
        m.add_param(p + "ln2.b", Tensor({d}, 0.0));
        m.add_param(p + "mlp.w1", randn({d, 4 * d}));
        m.add_param(p + "mlp.b1", Tensor({4 * d}, 0.0));
        m.add_param(p + "mlp.w2", randn({4 * d, d}));
        m.add_param(p + "mlp.b2", Tensor({d}, 0.0));
    }
    m.add_param("lnf.g", Tensor({d}, 1.0));
    m.add_param("lnf.b", Tensor({d}, 0.0));
    m.add_param("head", randn({d, v}));
    return m;
}

void LanguageModel::apply_lora(const LoraConfig& cfg) {
    cfg.validate();
    if (lora_) throw std::logic_error("LoRA already attached");
    if (cfg.rank > cfg_.d_model)
        throw std::invalid_argument("LoRA rank " + std::to_string(cfg.rank) + " exceeds d_model " +
                                    std::to_string(cfg_.d_model));
    for (auto& p : params_) p->trainable = false;
    // Adapter A gets the usual random init; B starts at zero so the adapted
    // model is exactly the base model until training moves B.
    std::mt19937_64 rng(0x4c6f5241);  // adapter init stream, fixed
    std::normal_distribution<double> dist(0.0, kInitStd);
    const auto d = static_cast<std::size_t>(cfg_.d_model);
    const auto r = static_cast<std::size_t>(cfg.rank);
    for (int l = 0; l < cfg_.n_layers; ++l) {
        const std::string p = "L" + std::to_string(l) + ".";
        for (const auto& t : cfg.targets) {
            Tensor a({d, r});
            for (auto& x : a.values()) x = dist(rng);
            add_param(p + t + ".lora_a", std::move(a), true);
            add_param(p + t + ".lora_b", Tensor({r, d}, 0.0), true);
        }
    }
    lora_ = cfg;
}

Parameter& LanguageModel::param(const std::string& name) {
    for (auto& p : params_)
        if (p->name == name) return *p;
    throw std::out_of_range("no parameter named '" + name + "'");
}

std::vector<Parameter*> LanguageModel::parameters() {
    std::vector<Parameter*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::vector<const Parameter*> LanguageModel::parameters() const {
    std::vector<const Parameter*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::vector<Parameter*> LanguageModel::trainable_parameters() {
    std::vector<Parameter*> out;
    for (auto& p : params_)
        if (p->trainable) out.push_back(p.get());
    return out;
}

std::size_t LanguageModel::trainable_param_count() const {
    std::size_t n = 0;
    for (auto& p : params_)
        if (p->trainable) n += p->value.size();
    return n;
}

void LanguageModel::zero_grads() {
    for (auto& p : params_) p->zero_grad();
}

Graph::NodeId LanguageModel::build_logits(Graph& g, std::span<const int> tokens, bool training,
                                          std::mt19937_64* dropout_rng) {
    const auto n = static_cast<std::size_t>(cfg_.context_size);
    if (tokens.size() != n)
        throw std::invalid_argument("forward: expected " + std::to_string(n) + " tokens, got " +
                                    std::to_string(tokens.size()));
    for (int t : tokens)
        if (t < 0 || t >= cfg_.vocab)
            throw std::invalid_argument("forward: token id " + std::to_string(t) +
                                        " outside vocab of " + std::to_string(cfg_.vocab));
    const auto d = static_cast<std::size_t>(cfg_.d_model);
    const auto heads = static_cast<std::size_t>(cfg_.n_heads);
    const std::size_t dh = d / heads;
    const double lora_scale = lora_ ? lora_->alpha / lora_->rank : 0.0;
    const bool use_dropout = training && lora_ && lora_->dropout > 0.0;
    if (use_dropout && !dropout_rng)
        throw std::invalid_argument("forward: training with LoRA dropout needs an RNG");

    std::vector<int> pos_ids(n);
    for (std::size_t i = 0; i < n; ++i) pos_ids[i] = static_cast<int>(i);
    auto x = g.add(g.embedding(g.param(param("tok_emb")), tokens),
                   g.embedding(g.param(param("pos_emb")), pos_ids));

    Tensor mask({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) mask.at(i, j) = kMaskNegInf;
    auto mask_node = g.constant(std::move(mask));

    auto ln_affine = [&](Graph::NodeId in, const std::string& gname, const std::string& bname) {
        return g.add_bias(g.mul_rows(g.layer_norm(in), g.param(param(gname))),
                          g.param(param(bname)));
    };
    auto project = [&](Graph::NodeId h, const std::string& prefix, const std::string& which) {
        auto out = g.matmul(h, g.param(param(prefix + which)));
        if (lora_ && std::find(lora_->targets.begin(), lora_->targets.end(), which) !=
                         lora_->targets.end()) {
            auto in = use_dropout ? g.dropout(h, lora_->dropout, *dropout_rng) : h;
            auto delta = g.matmul(g.matmul(in, g.param(param(prefix + which + ".lora_a"))),
                                  g.param(param(prefix + which + ".lora_b")));
            out = g.add(out, g.scale(delta, lora_scale));
        }
        return out;
    };

    for (int l = 0; l < cfg_.n_layers; ++l) {
        const std::string p = "L" + std::to_string(l) + ".";
        auto h = ln_affine(x, p + "ln1.g", p + "ln1.b");
        auto q = project(h, p, "wq");
        auto k = project(h, p, "wk");
        auto v = project(h, p, "wv");
        std::vector<Graph::NodeId> head_outs;
        for (std::size_t hd = 0; hd < heads; ++hd) {
            auto qh = g.slice_cols(q, hd * dh, (hd + 1) * dh);
            auto kh = g.slice_cols(k, hd * dh, (hd + 1) * dh);
            auto vh = g.slice_cols(v, hd * dh, (hd + 1) * dh);
            auto scores = g.scale(g.matmul(qh, g.transpose(kh)), 1.0 / std::sqrt(double(dh)));
            auto att = g.row_softmax(g.add(scores, mask_node));
            head_outs.push_back(g.matmul(att, vh));
        }
        auto attn = g.matmul(g.concat_cols(head_outs), g.param(param(p + "wo")));
        x = g.add(x, attn);
        auto h2 = ln_affine(x, p + "ln2.g", p + "ln2.b");
        auto mid = g.gelu(g.add_bias(g.matmul(h2, g.param(param(p + "mlp.w1"))),
                                     g.param(param(p + "mlp.b1"))));
        auto mlp_out = g.add_bias(g.matmul(mid, g.param(param(p + "mlp.w2"))),
                                  g.param(param(p + "mlp.b2")));
        x = g.add(x, mlp_out);
    }
    auto f = ln_affine(x, "lnf.g", "lnf.b");
    return g.matmul(f, g.param(param("head")));
}

Tensor LanguageModel::forward_probs(std::span<const int> tokens) {
    Graph g;
    auto probs = g.row_softmax(build_logits(g, tokens));
    return g.value(probs);
}

double LanguageModel::predict_vuln_prob(const FunctionSample& sample) {
    if (sample.code.empty())
        throw std::invalid_argument("predict_vuln_prob: empty function (sample " + sample.id + ")");
    const PackedSequence seq = eval_layout(sample, static_cast<std::size_t>(cfg_.context_size));
    Graph g;
    auto logits = build_logits(g, seq.tokens);
    const Tensor& L = g.value(logits);
    const std::size_t pos = seq.entries.front().readout_pos;
    const double z_yes = L.at(pos, vocab::kYes);
    const double z_no = L.at(pos, vocab::kNo);
    return 1.0 / (1.0 + std::exp(-(z_yes - z_no)));
}

LanguageModel LanguageModel::clone() const {
    LanguageModel m;
    m.cfg_ = cfg_;
    m.lora_ = lora_;
    for (const auto& p : params_)
        m.params_.push_back(std::make_unique<Parameter>(p->name, p->value, p->trainable));
    return m;
}

// ---- checkpoint container: magic, u64 JSON header length, header, raw fp64 LE ----

void LanguageModel::save(const std::string& path) const {
    nlohmann::json header;
    header["version"] = 1;
    header["model"] = {{"n_layers", cfg_.n_layers},
                       {"n_heads", cfg_.n_heads},
                       {"d_model", cfg_.d_model},
                       {"context_size", cfg_.context_size},
                       {"vocab", cfg_.vocab}};
    if (lora_)
        header["lora"] = {{"rank", lora_->rank},
                          {"alpha", lora_->alpha},
                          {"dropout", lora_->dropout},
                          {"targets", lora_->targets}};
    else
        header["lora"] = nullptr;
    auto& tensors = header["tensors"] = nlohmann::json::array();
    for (const auto& p : params_)
        tensors.push_back(
            {{"name", p->name}, {"shape", p->value.shape()}, {"trainable", p->trainable}});

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
        out.write(kCheckpointMagic, 8);
        const std::string hs = header.dump();
        const std::uint64_t hlen = hs.size();
        out.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
        out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
        for (const auto& p : params_)
            out.write(reinterpret_cast<const char*>(p->value.data()),
                      static_cast<std::streamsize>(p->value.size() * sizeof(double)));
        if (!out) throw std::runtime_error("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

LanguageModel LanguageModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != std::string(kCheckpointMagic, 8))
        throw std::runtime_error(path + " is not a checkpoint file");
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error("truncated checkpoint header in " + path);
    const auto header = nlohmann::json::parse(hs);
    if (header.at("version").get<int>() != 1)
        throw std::runtime_error("unsupported checkpoint version in " + path);

    LanguageModel m;
    const auto& mc = header.at("model");
    m.cfg_ = ModelConfig{mc.at("n_layers").get<int>(), mc.at("n_heads").get<int>(),
                         mc.at("d_model").get<int>(), mc.at("context_size").get<int>(),
                         mc.at("vocab").get<int>()};
    m.cfg_.validate();
    if (!header.at("lora").is_null()) {
        const auto& lc = header.at("lora");
        LoraConfig l;
        l.rank = lc.at("rank").get<int>();
        l.alpha = lc.at("alpha").get<double>();
        l.dropout = lc.at("dropout").get<double>();
        l.targets = lc.at("targets").get<std::vector<std::string>>();
        m.lora_ = l;
    }
    for (const auto& t : header.at("tensors")) {
        Tensor v(t.at("shape").get<std::vector<std::size_t>>());
        in.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(double)));
        if (!in) throw std::runtime_error("truncated tensor data in " + path);
        m.add_param(t.at("name").get<std::string>(), std::move(v), t.at("trainable").get<bool>());
    }
    return m;
}

}  // namespace vdlab
