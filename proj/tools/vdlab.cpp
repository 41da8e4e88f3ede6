// Experiment runner: dataset construction, finetuning runs for each research
// question at toy scale, and metric reports.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vdlab/datasetgen.hpp"
#include "vdlab/losses.hpp"
#include "vdlab/metrics.hpp"
#include "vdlab/model.hpp"
#include "vdlab/packing.hpp"
#include "vdlab/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Full experiment description: training config + dataset location + outputs.
struct ExperimentSpec {
    std::string name = "run";
    vdlab::ModelConfig model;
    vdlab::TrainConfig train;
    bool use_lora = true;
    std::string data_dir;
    std::string out_dir = "out";
};

void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw std::runtime_error("unknown key '" + it.key() + "' in " + where);
}

ExperimentSpec spec_from_json(const json& j) {
    reject_unknown_keys(j, {"name", "model", "regime", "reduction", "gamma", "weights", "lora",
                            "lr_max", "epochs", "context_size", "max_funcs_per_batch", "seed",
                            "data_dir", "out_dir"},
                        "experiment config");
    ExperimentSpec s;
    s.name = j.value("name", "run");
    if (j.contains("model")) {
        const auto& m = j.at("model");
        reject_unknown_keys(m, {"n_layers", "n_heads", "d_model"}, "model config");
        s.model.n_layers = m.value("n_layers", s.model.n_layers);
        s.model.n_heads = m.value("n_heads", s.model.n_heads);
        s.model.d_model = m.value("d_model", s.model.d_model);
    }
    if (j.contains("regime")) s.train.regime = vdlab::regime_from_string(j.at("regime"));
    if (j.contains("reduction"))
        s.train.loss.reduction = vdlab::reduction_from_string(j.at("reduction"));
    s.train.loss.objective = s.train.regime;
    s.train.loss.focal_gamma = j.value("gamma", 0.0);
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        reject_unknown_keys(w, {"P1", "P2", "P3"}, "weights");
        auto& pw = s.train.loss.partition_weights;
        pw[vdlab::Partition::P1] = w.value("P1", 1.0);
        pw[vdlab::Partition::P2] = w.value("P2", 1.0);
        pw[vdlab::Partition::P3] = w.value("P3", 1.0);
    }
    if (j.contains("lora") && j.at("lora").is_null()) {
        s.use_lora = false;
    } else if (j.contains("lora")) {
        const auto& l = j.at("lora");
        reject_unknown_keys(l, {"rank", "alpha", "dropout", "targets"}, "lora config");
        vdlab::LoraConfig lc;
        lc.rank = l.value("rank", lc.rank);
        lc.alpha = l.value("alpha", lc.alpha);
        lc.dropout = l.value("dropout", lc.dropout);
        if (l.contains("targets")) lc.targets = l.at("targets").get<std::vector<std::string>>();
        s.train.lora = lc;
    }
    s.train.lr_max = j.value("lr_max", s.train.lr_max);
    s.train.epochs = j.value("epochs", s.train.epochs);
    s.train.context_size = j.value("context_size", s.train.context_size);
    if (j.contains("max_funcs_per_batch") && !j.at("max_funcs_per_batch").is_null())
        s.train.max_funcs_per_batch = j.at("max_funcs_per_batch").get<std::size_t>();
    s.train.seed = j.value("seed", std::uint64_t{0});
    s.data_dir = j.value("data_dir", "");
    s.out_dir = j.value("out_dir", "out");
    s.model.context_size = s.train.context_size;
    if (s.use_lora && !s.train.lora) s.train.lora = vdlab::LoraConfig{};
    if (!s.use_lora) s.train.lora.reset();
    return s;
}

// Toy-scale defaults shared by the presets: small model, short schedule, a
// learning rate high enough for a from-scratch toy transformer.
json preset_base() {
    return json{{"model", {{"n_layers", 2}, {"n_heads", 4}, {"d_model", 64}}},
                {"regime", "classification"},
                {"reduction", "sum"},
                {"context_size", 256},
                {"epochs", 12},
                {"lr_max", 1e-3},
                {"seed", 7}};
}

// Each preset expands to one or more named runs whose results land in a
// side-by-side comparison table.
std::vector<std::pair<std::string, json>> preset_runs(const std::string& preset) {
    json base = preset_base();
    auto with = [&](std::initializer_list<std::pair<std::string, json>> kv) {
        json j = base;
        for (auto& [k, v] : kv) j[k] = v;
        return j;
    };
    if (preset == "rq1") return {{"default", base}};
    if (preset == "rq3")
        return {{"ntp", with({{"regime", "ntp"}})},
                {"classification", with({{"regime", "classification"}})}};
    if (preset == "rq4")
        return {{"cap-none", base},
                {"cap-50", with({{"max_funcs_per_batch", 50}})},
                {"cap-100", with({{"max_funcs_per_batch", 100}})}};
    if (preset == "rq5")
        return {{"sum", with({{"reduction", "sum"}})}, {"mean", with({{"reduction", "mean"}})}};
    if (preset == "rq6")
        return {{"ctx-256", with({{"context_size", 256}})},
                {"ctx-512", with({{"context_size", 512}})}};
    if (preset == "rq7-focal")
        return {{"gamma-0", with({{"gamma", 0.0}})},
                {"gamma-1", with({{"gamma", 1.0}})},
                {"gamma-3", with({{"gamma", 3.0}})},
                {"gamma-5", with({{"gamma", 5.0}})}};
    if (preset == "rq7-weights")
        return {{"w-1", base},
                {"w-3", with({{"weights", {{"P1", 3.0}, {"P2", 3.0}}}})},
                {"w-10", with({{"weights", {{"P1", 10.0}, {"P2", 10.0}}}})},
                {"w-30", with({{"weights", {{"P1", 30.0}, {"P2", 30.0}}}})}};
    if (preset == "rq7-combo")
        return {{"base", base},
                {"focal1-w3", with({{"gamma", 1.0}, {"weights", {{"P1", 3.0}, {"P2", 3.0}}}})}};
    throw std::runtime_error("unknown preset '" + preset +
                             "' (rq1, rq3, rq4, rq5, rq6, rq7-focal, rq7-weights, rq7-combo)");
}

struct RunReport {
    std::string name;
    double val_roc_auc = 0.0;
    double val_f1 = 0.0;
    double threshold = 0.5;
    int best_epoch = 0;
    std::optional<double> test_roc_auc;
    std::optional<double> test_f1;
};

void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
        out << content;
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

RunReport run_experiment(const ExperimentSpec& spec) {
    if (spec.data_dir.empty()) throw std::runtime_error("no data_dir configured");
    const auto train_set = vdlab::read_samples_jsonl(spec.data_dir + "/train.jsonl");
    const auto val_set = vdlab::read_samples_jsonl(spec.data_dir + "/validation.jsonl");
    fs::create_directories(spec.out_dir);

    auto model = vdlab::LanguageModel::init(spec.model, spec.train.seed);
    auto result = vdlab::train(std::move(model), train_set, val_set, spec.train);
    vdlab::write_history_jsonl(result.history, spec.out_dir + "/" + spec.name + ".history.jsonl");
    result.best_model.save(spec.out_dir + "/" + spec.name + ".ckpt");

    RunReport rep;
    rep.name = spec.name;
    const auto& best = result.history.epochs[static_cast<std::size_t>(result.history.best_epoch)];
    rep.val_roc_auc = best.val_roc_auc;
    rep.val_f1 = best.val_f1;
    rep.threshold = best.threshold;
    rep.best_epoch = result.history.best_epoch;

    const std::string test_path = spec.data_dir + "/test.jsonl";
    if (fs::exists(test_path)) {
        const auto test_set = vdlab::read_samples_jsonl(test_path);
        if (!test_set.empty()) {
            vdlab::ScoredSet scores;
            for (const auto& s : test_set)
                scores.add(result.best_model.predict_vuln_prob(s), s.label);
            rep.test_roc_auc = vdlab::roc_auc(scores);
            rep.test_f1 = vdlab::f1_at(scores, rep.threshold);
        }
    }

    json jr{{"name", rep.name},
            {"val_roc_auc", rep.val_roc_auc},
            {"val_f1", rep.val_f1},
            {"threshold", rep.threshold},
            {"best_epoch", rep.best_epoch}};
    if (rep.test_roc_auc) {
        jr["test_roc_auc"] = *rep.test_roc_auc;
        jr["test_f1"] = *rep.test_f1;
    }
    atomic_write(spec.out_dir + "/" + spec.name + ".report.json", jr.dump(2) + "\n");
    return rep;
}

void write_comparison(const std::vector<RunReport>& reports, const std::string& out_dir,
                      const std::string& preset) {
    std::ostringstream table;
    table << "run\tval_roc_auc\tval_f1\tthreshold\tbest_epoch";
    const bool has_test = !reports.empty() && reports.front().test_roc_auc.has_value();
    if (has_test) table << "\ttest_roc_auc\ttest_f1";
    table << "\n";
    json jruns = json::array();
    for (const auto& r : reports) {
        table << r.name << "\t" << r.val_roc_auc << "\t" << r.val_f1 << "\t" << r.threshold << "\t"
              << r.best_epoch;
        json jr{{"name", r.name},
                {"val_roc_auc", r.val_roc_auc},
                {"val_f1", r.val_f1},
                {"threshold", r.threshold},
                {"best_epoch", r.best_epoch}};
        if (r.test_roc_auc) {
            table << "\t" << *r.test_roc_auc << "\t" << *r.test_f1;
            jr["test_roc_auc"] = *r.test_roc_auc;
            jr["test_f1"] = *r.test_f1;
        }
        table << "\n";
        jruns.push_back(std::move(jr));
    }
    atomic_write(out_dir + "/" + preset + ".table.txt", table.str());
    atomic_write(out_dir + "/" + preset + ".table.json",
                 json{{"preset", preset}, {"runs", jruns}}.dump(2) + "\n");
    std::cout << table.str();
}

// Applies command-line overrides on top of a config/preset JSON.
struct TrainCliFlags {
    std::string config_path, preset, data_dir, out_dir, weights_arg, reduction, regime;
    std::optional<std::uint64_t> seed;
    std::optional<int> context_size, epochs;
    std::optional<std::size_t> max_funcs;
    std::optional<double> gamma, lr;
    bool no_lora = false;

    void apply(json& j) const {
        if (!data_dir.empty()) j["data_dir"] = data_dir;
        if (!out_dir.empty()) j["out_dir"] = out_dir;
        if (seed) j["seed"] = *seed;
        if (context_size) j["context_size"] = *context_size;
        if (epochs) j["epochs"] = *epochs;
        if (max_funcs) j["max_funcs_per_batch"] = *max_funcs;
        if (gamma) j["gamma"] = *gamma;
        if (lr) j["lr_max"] = *lr;
        if (!reduction.empty()) j["reduction"] = reduction;
        if (!regime.empty()) j["regime"] = regime;
        if (no_lora) j["lora"] = nullptr;
        if (!weights_arg.empty()) {
            json w = j.value("weights", json::object());
            std::stringstream ss(weights_arg);
            std::string part;
            while (std::getline(ss, part, ',')) {
                const auto eq = part.find('=');
                if (eq == std::string::npos)
                    throw std::runtime_error("bad --weights entry '" + part + "' (want P1=3,P2=3)");
                w[part.substr(0, eq)] = std::stod(part.substr(eq + 1));
            }
            j["weights"] = w;
        }
    }
};

int cmd_train(const TrainCliFlags& flags) {
    std::vector<std::pair<std::string, json>> runs;
    std::string table_name = "train";
    if (!flags.config_path.empty()) {
        std::ifstream in(flags.config_path);
        if (!in) throw std::runtime_error("missing config file " + flags.config_path);
        json j = json::parse(in);
        runs.emplace_back(j.value("name", "run"), std::move(j));
    } else if (!flags.preset.empty()) {
        runs = preset_runs(flags.preset);
        table_name = flags.preset;
    } else {
        throw std::runtime_error("train needs --config or --preset");
    }

    std::vector<RunReport> reports;
    std::string out_dir;
    for (auto& [name, j] : runs) {
        flags.apply(j);
        j["name"] = name;
        ExperimentSpec spec = spec_from_json(j);
        out_dir = spec.out_dir;
        std::cout << "[" << table_name << "] running " << name << " ..." << std::endl;
        reports.push_back(run_experiment(spec));
    }
    write_comparison(reports, out_dir, table_name);
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& out_path) {
    auto model = vdlab::LanguageModel::load(ckpt_path);
    const auto samples = vdlab::read_samples_jsonl(data_path);
    if (samples.empty()) throw std::runtime_error(data_path + " holds no samples");
    vdlab::ScoredSet scores;
    for (const auto& s : samples) scores.add(model.predict_vuln_prob(s), s.label);
    const double auc = vdlab::roc_auc(scores);
    const auto thr = vdlab::optimal_threshold(scores);
    json j{{"checkpoint", ckpt_path},
           {"data", data_path},
           {"samples", samples.size()},
           {"roc_auc", auc},
           {"f1", thr.f1},
           {"threshold", thr.threshold}};
    const std::string text = j.dump(2) + "\n";
    std::cout << text;
    if (!out_path.empty()) atomic_write(out_path, text);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale vulnerability-detection training laboratory"};
    app.require_subcommand(1);

    // --- data ---
    auto* data = app.add_subcommand("data", "dataset construction and statistics");
    data->require_subcommand(1);

    auto* synth = data->add_subcommand("synth", "generate a synthetic commit corpus");
    std::string synth_out = "corpus.jsonl";
    vdlab::SynthSpec synth_spec;
    synth_spec.n_pos = 100;
    synth_spec.n_neg_hard = 0;
    synth_spec.n_neg_easy = 200;
    synth->add_option("--out", synth_out, "output commits JSONL");
    synth->add_option("--seed", synth_spec.seed, "corpus seed");
    synth->add_option("--n-pos", synth_spec.n_pos, "vulnerable/fixed pairs");
    synth->add_option("--n-neg-hard", synth_spec.n_neg_hard, "hard unchanged negatives");
    synth->add_option("--n-neg-easy", synth_spec.n_neg_easy, "easy unchanged negatives");
    synth->add_option("--sentinel-strength", synth_spec.sentinel_strength,
                      "probability a vulnerable function carries the sentinel");

    auto* build = data->add_subcommand("build", "build train/validation/test splits");
    std::string build_in = "corpus.jsonl", build_out = "dataset";
    bool include_p3 = false, split_by_project = false;
    std::uint64_t build_seed = 0;
    build->add_option("--in", build_in, "commits JSONL")->required();
    build->add_option("--out", build_out, "output dataset directory");
    build->add_option("--include-p3", include_p3, "include unchanged easy negatives");
    build->add_flag("--split-by-project", split_by_project, "split by project instead of by sample");
    build->add_option("--seed", build_seed, "split seed");

    auto* stats = data->add_subcommand("stats", "length histogram and CWE table");
    std::string stats_in, stats_csv;
    stats->add_option("--in", stats_in, "samples JSONL")->required();
    stats->add_option("--csv", stats_csv, "also write CSV here");

    // --- train ---
    auto* train_cmd = app.add_subcommand("train", "run a finetuning experiment");
    TrainCliFlags tf;
    train_cmd->add_option("--config", tf.config_path, "experiment config JSON");
    train_cmd->add_option("--preset", tf.preset,
                          "rq1|rq3|rq4|rq5|rq6|rq7-focal|rq7-weights|rq7-combo");
    train_cmd->add_option("--data", tf.data_dir, "dataset directory");
    train_cmd->add_option("--out", tf.out_dir, "output directory");
    train_cmd->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t v) { tf.seed = v; });
    train_cmd->add_option_function<int>("--context-size", [&](int v) { tf.context_size = v; });
    train_cmd->add_option_function<int>("--epochs", [&](int v) { tf.epochs = v; });
    train_cmd->add_option_function<std::size_t>(
        "--max-funcs-per-batch", [&](std::size_t v) { tf.max_funcs = v; });
    train_cmd->add_option_function<double>("--gamma", [&](double v) { tf.gamma = v; });
    train_cmd->add_option_function<double>("--lr", [&](double v) { tf.lr = v; });
    train_cmd->add_option("--weights", tf.weights_arg, "e.g. P1=3,P2=3");
    train_cmd->add_option("--reduction", tf.reduction, "sum|mean");
    train_cmd->add_option("--regime", tf.regime, "ntp|classification");
    train_cmd->add_flag("--no-lora", tf.no_lora, "full finetune instead of LoRA");

    // --- eval ---
    auto* eval_cmd = app.add_subcommand("eval", "score a dataset split with a checkpoint");
    std::string eval_ckpt, eval_data, eval_out;
    eval_cmd->add_option("--checkpoint", eval_ckpt)->required();
    eval_cmd->add_option("--data", eval_data)->required();
    eval_cmd->add_option("--out", eval_out, "report JSON path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            const auto commits = vdlab::synth_corpus(synth_spec);
            vdlab::write_commits_jsonl(commits, synth_out);
            std::cout << "wrote " << commits.size() << " commits to " << synth_out << "\n";
            return 0;
        }
        if (build->parsed()) {
            const auto commits = vdlab::read_commits_jsonl(build_in);
            const auto bundle =
                vdlab::build_x1(commits, include_p3, {}, build_seed, split_by_project);
            vdlab::write_bundle(bundle, build_out);
            std::cout << "splits " << bundle.train.size() << "/" << bundle.validation.size() << "/"
                      << bundle.test.size() << ", class ratio 1:" << bundle.meta.neg_per_pos
                      << ", written to " << build_out << "\n";
            return 0;
        }
        if (stats->parsed()) {
            const auto samples = vdlab::read_samples_jsonl(stats_in);
            const auto st = vdlab::corpus_stats(samples);
            std::cout << vdlab::stats_to_text(st);
            if (!stats_csv.empty()) atomic_write(stats_csv, vdlab::stats_to_csv(st));
            return 0;
        }
        if (train_cmd->parsed()) return cmd_train(tf);
        if (eval_cmd->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
