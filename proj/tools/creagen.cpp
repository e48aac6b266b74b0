// Command-line driver for the creagen pipeline stages.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "creagen/pipeline.hpp"

namespace fs = std::filesystem;
using creagen::ConfigError;
using nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::vector<std::string> sets;
    std::string out;
};

// Flag values collected per subcommand as (section.key, value).
struct Overrides {
    std::vector<std::pair<std::string, json>> items;

    template <class T>
    void add(const std::string& key, const std::optional<T>& v) {
        if (v) items.emplace_back(key, json(*v));
    }
};

json nested(const std::string& dotted, const json& value) {
    json out = value;
    std::string rest = dotted;
    std::vector<std::string> parts;
    for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1))
        parts.push_back(rest.substr(0, pos));
    parts.push_back(rest);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) out = json{{*it, out}};
    return out;
}

nlohmann::ordered_json build_config(const Common& c, const Overrides& flags) {
    auto master = creagen::default_master_config();
    if (!c.config.empty()) {
        std::ifstream f(c.config);
        if (!f) throw creagen::InputError(c.config + ": cannot open config file");
        json file = json::parse(f, nullptr, false);
        if (file.is_discarded()) throw creagen::InputError(c.config + ": not valid JSON");
        master = creagen::merge_config(master, file);
    }
    for (const auto& s : c.sets) master = creagen::merge_config(master, creagen::parse_override(s));
    for (const auto& [k, v] : flags.items) master = creagen::merge_config(master, nested(k, v));
    if (c.seed) master["seed"] = *c.seed;
    if (c.threads) master["threads"] = *c.threads;
    return master;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "Master JSON config");
    sub->add_option("--seed", c.seed, "Root seed (falls back to CREAGEN_SEED, then 0)");
    sub->add_option("--threads", c.threads, "Worker thread cap");
    sub->add_option("--set", c.sets, "Override as section.key=value (repeatable)");
    sub->add_option("-o,--out", c.out, "Output directory")->required();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"creagen: creativity-loss GAN lab"};
    app.require_subcommand(1);
    app.set_version_flag("--version", creagen::kToolVersion);

    Common c;
    Overrides ov;
    std::vector<fs::path> inputs;

    // synth
    std::optional<std::size_t> n_items, size, augment;
    auto* synth = app.add_subcommand("synth", "Generate the labeled synthetic dataset");
    add_common(synth, c);
    synth->add_option("--n", n_items, "Number of original items");
    synth->add_option("--size", size, "Canvas side (32 or 64)");
    synth->add_option("--augment", augment, "Copies per original, the original included");

    // train
    std::string data_dir, run_dir, samples_dir, metrics_dir, classifier;
    std::optional<std::size_t> iterations, batch, canvas, interval;
    std::optional<std::string> arch, creativity, branch, gen_loss;
    std::optional<double> lambda_ge, lambda_rec;
    auto* train = app.add_subcommand("train", "Train a GAN on a dataset");
    add_common(train, c);
    train->add_option("--data", data_dir, "Dataset directory")->required();
    train->add_option("--iterations", iterations);
    train->add_option("--batch-size", batch);
    train->add_option("--checkpoint-interval", interval);
    train->add_option("--arch", arch, "dcgan | stackgan2 | stylegan");
    train->add_option("--canvas", canvas);
    train->add_option("--creativity", creativity, "none | can | mce | sm | bhattacharyya");
    train->add_option("--branch", branch, "shape | texture | shape_texture");
    train->add_option("--generator-loss", gen_loss, "saturating | non_saturating");
    train->add_option("--lambda-ge", lambda_ge);
    train->add_option("--lambda-rec", lambda_rec);

    // sample
    std::optional<std::size_t> n_samples;
    bool zero_latent = false;
    bool batch_stats = false;
    auto* samp = app.add_subcommand("sample", "Generate images from a checkpoint");
    add_common(samp, c);
    samp->add_option("--run", run_dir, "Training run directory or checkpoint file")->required();
    samp->add_option("--data", data_dir, "Dataset directory (mask source for mask-conditioned generators)");
    samp->add_option("--n", n_samples);
    samp->add_flag("--zero-latent", zero_latent);
    samp->add_flag("--batch-stats", batch_stats, "Normalize with per-chunk batch statistics");

    // metrics
    std::optional<std::size_t> k;
    auto* met = app.add_subcommand("metrics", "Score a directory of samples");
    add_common(met, c);
    met->add_option("--samples", samples_dir)->required();
    met->add_option("--data", data_dir, "Dataset the classifier and NN features come from")->required();
    met->add_option("--classifier", classifier, "Reuse a saved classifier bundle");
    met->add_option("--k", k, "Neighbours for the NN distance");

    // select-sets
    std::optional<std::size_t> set_size;
    auto* sel = app.add_subcommand("select-sets", "Build the evaluation sets");
    add_common(sel, c);
    sel->add_option("--metrics", metrics_dir)->required();
    sel->add_option("--samples", samples_dir, "Samples directory for galleries");
    sel->add_option("--size", set_size);

    // analyze
    std::vector<std::string> a_metrics, a_sets, a_names, a_ratings;
    auto* ana = app.add_subcommand("analyze", "Correlations, PCA, Wundt data and t-tests");
    add_common(ana, c);
    ana->add_option("--metrics", a_metrics, "Metrics directory per model")->required();
    ana->add_option("--sets", a_sets, "Sets directory per model")->required();
    ana->add_option("--name", a_names, "Model name per model");
    ana->add_option("--ratings", a_ratings, "Ratings CSV per model (synthetic ratings when absent)");

    // gradcheck
    std::optional<std::size_t> gc_seeds;
    std::optional<std::string> gc_filter;
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference checks of every op, loss and layer");
    add_common(gc, c);
    gc->add_option("--seeds", gc_seeds);
    gc->add_option("--filter", gc_filter, "Substring of check names");

    // report
    std::vector<std::string> r_inputs;
    auto* rep = app.add_subcommand("report", "Markdown summary of stage outputs");
    add_common(rep, c);
    rep->add_option("--input", r_inputs, "Stage output directories")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string cmd = sub->get_name();
    try {
        if (cmd == "synth") {
            ov.add("synth.n_items", n_items);
            ov.add("synth.size", size);
            ov.add("synth.augment_factor", augment);
        } else if (cmd == "train") {
            ov.add("train.iterations", iterations);
            ov.add("train.batch_size", batch);
            ov.add("train.checkpoint_interval", interval);
            ov.add("train.network.architecture", arch);
            ov.add("train.network.canvas", canvas);
            ov.add("train.creativity", creativity);
            ov.add("train.creativity_branch", branch);
            ov.add("train.generator_loss", gen_loss);
            ov.add("train.lambda_Ge", lambda_ge);
            ov.add("train.lambda_rec", lambda_rec);
            inputs = {data_dir};
        } else if (cmd == "sample") {
            ov.add("sample.n", n_samples);
            if (zero_latent) ov.items.emplace_back("sample.zero_latent", true);
            if (batch_stats) ov.items.emplace_back("sample.batch_stats", true);
            inputs = {run_dir, data_dir};
        } else if (cmd == "metrics") {
            ov.add("metrics.k", k);
            if (!classifier.empty()) ov.items.emplace_back("metrics.classifier", classifier);
            inputs = {samples_dir, data_dir};
        } else if (cmd == "select-sets") {
            ov.add("select_sets.size", set_size);
            inputs = {metrics_dir, samples_dir};
        } else if (cmd == "analyze") {
            if (a_metrics.size() != a_sets.size()) {
                throw ConfigError("--sets", "give one --sets per --metrics");
            }
            for (std::size_t i = 0; i < a_metrics.size(); ++i) {
                inputs.emplace_back(a_metrics[i]);
                inputs.emplace_back(a_sets[i]);
            }
            if (!a_names.empty()) ov.items.emplace_back("analyze.models", json(a_names));
            if (!a_ratings.empty()) ov.items.emplace_back("analyze.ratings", json(a_ratings));
        } else if (cmd == "gradcheck") {
            ov.add("gradcheck.seeds", gc_seeds);
            ov.add("gradcheck.filter", gc_filter);
        } else if (cmd == "report") {
            for (const auto& r : r_inputs) inputs.emplace_back(r);
        }
        auto master = build_config(c, ov);
        auto summary = creagen::run_stage(cmd, master, {inputs, c.out});
        std::cout << summary.dump(2) << "\n";
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "creagen " << cmd << ": invalid configuration: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "creagen " << cmd << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "creagen " << cmd << ": failed: " << e.what() << "\n";
        return 2;
    }
}
