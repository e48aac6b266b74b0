#include "creagen/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "creagen/analysis.hpp"
#include "creagen/evalsets.hpp"
#include "creagen/gradcheck_suite.hpp"
#include "creagen/metrics.hpp"
#include "creagen/seed.hpp"
#include "creagen/synth.hpp"

namespace creagen {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

const std::map<std::string, std::uint64_t> kStageIndex = {
    {"synth", 1}, {"train", 2}, {"classifier", 3}, {"sample", 4}, {"select_sets", 5}, {"analyze", 6}, {"gradcheck", 7}};

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + path.string());
        f << text;
        if (!f) throw std::runtime_error("write failed: " + path.string());
    }
    fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError(path.string() + ": cannot open");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void require_file(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw InputError(path.string() + ": missing");
}

void require_dir(const fs::path& path, const std::string& what) {
    if (path.empty()) throw InputError(what + ": no directory given");
    if (!fs::is_directory(path)) throw InputError(path.string() + ": " + what + " directory does not exist");
}

const ojson& section(const ojson& master, const std::string& name) {
    if (!master.contains(name) || !master[name].is_object()) throw ConfigError(name, "missing configuration section");
    return master[name];
}

std::size_t get_count(const ojson& sec, const std::string& sname, const std::string& key) {
    const auto& v = sec.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        throw ConfigError(sname + "." + key, "expected a non-negative integer");
    }
    return v.get<std::size_t>();
}

bool get_bool(const ojson& sec, const std::string& sname, const std::string& key) {
    const auto& v = sec.at(key);
    if (!v.is_boolean()) throw ConfigError(sname + "." + key, "expected true or false");
    return v.get<bool>();
}

std::string get_string(const ojson& sec, const std::string& sname, const std::string& key) {
    const auto& v = sec.at(key);
    if (!v.is_string()) throw ConfigError(sname + "." + key, "expected a string");
    return v.get<std::string>();
}

nlohmann::json strip_nulls(const nlohmann::json& j) {
    if (!j.is_object()) return j;
    nlohmann::json out = nlohmann::json::object();
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!it.value().is_null()) out[it.key()] = strip_nulls(it.value());
    return out;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

LabeledDataset open_dataset(const fs::path& dir) {
    require_dir(dir, "dataset");
    require_file(dir / "index.csv");
    return load_dataset(dir);
}

// Checkpoint file of a run directory, or the path itself when it is a file.
fs::path pick_checkpoint(const fs::path& run, const std::string& which) {
    if (fs::is_regular_file(run)) return run;
    require_dir(run, "training run");
    const fs::path dir = run / "checkpoints";
    if (which != "latest") {
        const fs::path p = dir / which;
        require_file(p);
        return p;
    }
    std::vector<fs::path> found;
    if (fs::is_directory(dir))
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".bin") found.push_back(e.path());
    if (found.empty()) throw InputError(dir.string() + ": no checkpoints found");
    std::sort(found.begin(), found.end());
    return found.back();
}

std::vector<std::vector<std::uint8_t>> pool_masks(const LabeledDataset& data, std::vector<std::size_t>& ids) {
    std::vector<std::vector<std::uint8_t>> masks;
    for (int pass = 0; pass < 2 && masks.empty(); ++pass) {
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& e = data.entries[i];
            // Held-out masks first; fall back to the whole set when there is no val split.
            if ((pass == 1 || e.split == Split::val) && e.item.has_mask()) {
                masks.push_back(e.item.mask);
                ids.push_back(i);
            }
        }
    }
    return masks;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

ojson default_master_config() {
    TrainConfig tc;
    ojson train = tc.to_json();
    train["network"]["init_seed"] = nullptr;
    train["seed"] = nullptr;
    ClassifierSpec cs;
    ojson classifier = cs.to_json();
    classifier.erase("canvas");
    classifier["seed"] = nullptr;
    SynthOptions so;
    return {{"seed", nullptr},
            {"threads", 1},
            {"synth", {{"n_items", so.n_items}, {"size", so.size}, {"augment_factor", so.augment_factor}, {"seed", nullptr}}},
            {"train", train},
            {"classifier", classifier},
            {"sample", {{"n", 10000}, {"checkpoint", "latest"}, {"zero_latent", false}, {"batch_stats", false}, {"seed", nullptr}}},
            {"metrics", {{"k", 10}, {"classifier", ""}}},
            {"select_sets", {{"size", 100}, {"gallery_columns", 10}, {"seed", nullptr}}},
            {"analyze",
             {{"raters", kExpectedRaters},
              {"ratings", nlohmann::json::array()},
              {"models", nlohmann::json::array()},
              {"pca_components", 2},
              {"seed", nullptr}}},
            {"gradcheck", {{"seeds", 20}, {"network_seeds", 3}, {"filter", ""}, {"seed", nullptr}}},
            {"report", {{"title", "creagen run report"}}}};
}

ojson merge_config(const ojson& base, const nlohmann::json& overrides, const std::string& where) {
    if (!overrides.is_object()) throw ConfigError(where.empty() ? "config" : where, "expected a JSON object");
    ojson out = base;
    for (auto it = overrides.begin(); it != overrides.end(); ++it) {
        const std::string key = where.empty() ? it.key() : where + "." + it.key();
        if (!out.contains(it.key())) throw ConfigError(key, "unknown configuration key");
        auto& slot = out[it.key()];
        if (slot.is_object() && it.value().is_object()) {
            slot = merge_config(slot, it.value(), key);
        } else if (slot.is_object()) {
            throw ConfigError(key, "expected a JSON object");
        } else {
            slot = it.value();
        }
    }
    return out;
}

nlohmann::json parse_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "expected key=value");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    nlohmann::json out = value;
    std::string rest = key;
    std::vector<std::string> parts;
    std::size_t pos;
    while ((pos = rest.find('.')) != std::string::npos) {
        parts.push_back(rest.substr(0, pos));
        rest = rest.substr(pos + 1);
    }
    parts.push_back(rest);
    for (auto p = parts.rbegin(); p != parts.rend(); ++p) {
        if (p->empty()) throw ConfigError(key, "empty path component");
        out = nlohmann::json{{*p, out}};
    }
    return out;
}

static bool is_seed_value(const nlohmann::json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

std::uint64_t resolve_seed(const nlohmann::json& master) {
    if (master.contains("seed") && !master["seed"].is_null()) {
        if (!is_seed_value(master["seed"])) throw ConfigError("seed", "expected a non-negative integer");
        return master["seed"].get<std::uint64_t>();
    }
    if (const char* env = std::getenv("CREAGEN_SEED"); env && *env) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (*end != '\0' || env[0] == '-') throw ConfigError("CREAGEN_SEED", "expected a non-negative integer");
        return v;
    }
    return 0;
}

std::uint64_t stage_seed(const nlohmann::json& master, const std::string& stage) {
    if (master.contains(stage) && master[stage].contains("seed") && !master[stage]["seed"].is_null()) {
        const auto& v = master[stage]["seed"];
        if (!is_seed_value(v)) throw ConfigError(stage + ".seed", "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }
    return derive_seed(resolve_seed(master), {kStageIndex.at(stage)});
}

ojson stage_synth(const ojson& master, const fs::path& out) {
    const auto& s = section(master, "synth");
    SynthOptions o;
    o.n_items = get_count(s, "synth", "n_items");
    o.size = get_count(s, "synth", "size");
    o.augment_factor = get_count(s, "synth", "augment_factor");
    o.threads = std::max<std::size_t>(1, get_count(master, "", "threads"));
    o.seed = stage_seed(master, "synth");
    if (o.n_items == 0) throw ConfigError("synth.n_items", "must be positive");
    if (o.size != 32 && o.size != 64) throw ConfigError("synth.size", "must be 32 or 64");
    if (o.augment_factor == 0) throw ConfigError("synth.augment_factor", "must be at least 1");
    auto data = generate_dataset(o);
    save_dataset(data, out);
    std::size_t val = 0;
    for (const auto& e : data.entries) val += e.split == Split::val;
    return {{"items", data.size()}, {"train", data.size() - val}, {"val", val}, {"canvas", data.canvas}};
}

ojson stage_train(const ojson& master, const fs::path& data_dir, const fs::path& out) {
    nlohmann::json sec = strip_nulls(section(master, "train"));
    sec["seed"] = stage_seed(master, "train");
    TrainConfig config = TrainConfig::from_json(sec);
    config.validate();
    auto data = open_dataset(data_dir);
    auto result = train(config, data, out);
    ojson j;
    j["iterations"] = config.iterations;
    j["checkpoints"] = nlohmann::json::array();
    for (const auto& c : result.checkpoints) j["checkpoints"].push_back(c.filename().string());
    if (!result.log.empty()) {
        j["final_loss_D"] = result.log.back().d.total;
        j["final_loss_G"] = result.log.back().g.total;
    }
    j["warnings"] = result.warnings;
    return j;
}

ojson stage_sample(const ojson& master, const fs::path& run, const fs::path& data_dir, const fs::path& out) {
    const auto& s = section(master, "sample");
    SampleOptions o;
    o.n = get_count(s, "sample", "n");
    o.zero_latent = get_bool(s, "sample", "zero_latent");
    o.batch_stats = get_bool(s, "sample", "batch_stats");
    o.seed = stage_seed(master, "sample");
    const std::string which = get_string(s, "sample", "checkpoint");
    if (o.n == 0) throw ConfigError("sample.n", "must be positive");
    const fs::path ckpt = pick_checkpoint(run, which);
    auto model = load_model(ckpt);

    std::vector<std::vector<std::uint8_t>> masks;
    std::vector<std::size_t> mask_ids;
    if (model->generator->needs_mask()) {
        auto data = open_dataset(data_dir);
        masks = pool_masks(data, mask_ids);
        if (masks.empty()) throw InputError((data_dir / "index.csv").string() + ": dataset has no masks");
        o.masks = &masks;
    }
    auto res = sample(*model, o);

    fs::create_directories(out / "images");
    std::string index = "id,mask_index\n";
    for (std::size_t i = 0; i < res.images.size(); ++i) {
        write_png(out / "images" / item_file_name(i), res.images[i]);
        index += std::to_string(i) + ',';
        if (!res.mask_index.empty()) index += std::to_string(mask_ids[res.mask_index[i]]);
        index += '\n';
    }
    write_text(out / "index.csv", index);
    std::vector<Image8> head(res.images.begin(), res.images.begin() + std::min<std::size_t>(res.images.size(), 100));
    write_png(out / "preview.png", tile_images(head, 10));
    return {{"images", res.images.size()}, {"checkpoint", ckpt.filename().string()}};
}

std::vector<Image8> load_samples(const fs::path& dir) {
    require_dir(dir, "samples");
    const fs::path index_path = dir / "index.csv";
    require_file(index_path);
    std::ifstream f(index_path);
    std::string line;
    if (!std::getline(f, line) || line != "id,mask_index") {
        throw InputError(index_path.string() + ": row 1: expected header 'id,mask_index'");
    }
    std::vector<Image8> images;
    std::size_t row = 1;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty()) continue;
        std::size_t id = 0;
        try {
            id = std::stoull(line.substr(0, line.find(',')));
        } catch (const std::logic_error&) {
            throw InputError(index_path.string() + ": row " + std::to_string(row) + ": malformed id");
        }
        if (id != images.size()) {
            throw InputError(index_path.string() + ": row " + std::to_string(row) + ": ids must be 0..N-1 in order");
        }
        const fs::path p = dir / "images" / item_file_name(id);
        require_file(p);
        images.push_back(read_png(p, 3));
    }
    if (images.empty()) throw InputError(index_path.string() + ": no images listed");
    return images;
}

ojson stage_metrics(const ojson& master, const fs::path& samples, const fs::path& data_dir, const fs::path& out) {
    const auto& s = section(master, "metrics");
    const std::size_t k = get_count(s, "metrics", "k");
    const std::string clf_path = get_string(s, "metrics", "classifier");
    if (k == 0) throw ConfigError("metrics.k", "must be positive");
    auto images = load_samples(samples);
    auto data = open_dataset(data_dir);

    ClassifierBundle bundle;
    if (!clf_path.empty()) {
        require_file(clf_path);
        bundle = ClassifierBundle::load(clf_path);
    } else {
        nlohmann::json cj = strip_nulls(section(master, "classifier"));
        cj["seed"] = stage_seed(master, "classifier");
        cj["canvas"] = data.canvas;
        bundle = train_classifier(data, ClassifierSpec::from_json(cj));
        bundle.save(out / "classifier.bin");
    }
    std::vector<const LabeledItem*> train_items;
    for (const auto& e : data.entries)
        if (e.split == Split::train) train_items.push_back(&e.item);
    auto train_out = classify_items(bundle, train_items);
    auto report = compute_report(bundle, images, train_out.features, k);

    ojson summary = report_json(report);
    summary["val_accuracy_shape"] = bundle.val_accuracy_shape;
    summary["val_accuracy_texture"] = bundle.val_accuracy_texture;
    write_text(out / "metrics.csv", report_csv(report));
    write_text(out / "metrics.json", summary.dump(2) + "\n");
    return summary;
}

ojson stage_select_sets(const ojson& master, const fs::path& metrics, const fs::path& samples, const fs::path& out) {
    const auto& s = section(master, "select_sets");
    const std::size_t size = get_count(s, "select_sets", "size");
    const std::size_t columns = get_count(s, "select_sets", "gallery_columns");
    if (size == 0) throw ConfigError("select_sets.size", "must be positive");
    if (columns == 0) throw ConfigError("select_sets.gallery_columns", "must be positive");
    require_dir(metrics, "metrics");
    require_file(metrics / "metrics.csv");
    auto rows = read_report_csv(metrics / "metrics.csv");
    auto sets = select_sets(rows, size, stage_seed(master, "select_sets"));
    write_text(out / "sets.json", sets.to_json().dump(2) + "\n");
    if (!samples.empty()) write_galleries(sets, load_samples(samples), out / "galleries", columns);
    return {{"population", rows.size()}, {"size", size}, {"sets", sets.sets.size()}};
}

namespace {

struct ModelInputs {
    std::string name;
    std::vector<ImageMetrics> metrics;
    SetAssignment sets;
    double mean_nn = 0.0;
};

SetAssignment read_sets(const fs::path& path) {
    require_file(path);
    auto j = nlohmann::json::parse(read_text(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw InputError(path.string() + ": not a JSON object");
    SetAssignment a;
    for (auto name : kSetNames) {
        const std::string n(name);
        if (!j.contains(n) || !j[n].is_array()) throw InputError(path.string() + ": missing set '" + n + "'");
        a.sets.emplace_back(n, j[n].get<std::vector<std::size_t>>());
    }
    return a;
}

std::string ttest_row(const std::string& a, const std::string& b, const std::vector<double>& x,
                      const std::vector<double>& y) {
    std::string row = a + ',' + b + ',' + std::to_string(x.size()) + ',';
    try {
        auto t = paired_ttest(x, y);
        row += fmt(t.t) + ',' + std::to_string(t.df) + ',' + fmt(t.p) + ",\n";
    } catch (const std::invalid_argument& e) {
        row += "nan,,nan," + std::string(e.what()) + "\n";
    }
    return row;
}

}  // namespace

ojson stage_analyze(const ojson& master, const std::vector<fs::path>& inputs, const fs::path& out) {
    const auto& s = section(master, "analyze");
    const std::size_t raters = get_count(s, "analyze", "raters");
    const std::size_t components = get_count(s, "analyze", "pca_components");
    const auto& names = s.at("models");
    const auto& ratings = s.at("ratings");
    if (!names.is_array()) throw ConfigError("analyze.models", "expected a list of model names");
    if (!ratings.is_array()) throw ConfigError("analyze.ratings", "expected a list of ratings CSV paths");
    if (inputs.empty() || inputs.size() % 2 != 0) {
        throw InputError("analyze: expects pairs of (metrics dir, sets dir), got " + std::to_string(inputs.size()) +
                         " paths");
    }
    const std::size_t n_models = inputs.size() / 2;
    if (!names.empty() && names.size() != n_models) {
        throw ConfigError("analyze.models", "lists " + std::to_string(names.size()) + " names for " +
                                                std::to_string(n_models) + " models");
    }
    if (!ratings.empty() && ratings.size() != n_models) {
        throw ConfigError("analyze.ratings", "lists " + std::to_string(ratings.size()) + " files for " +
                                                 std::to_string(n_models) + " models");
    }
    if (ratings.empty() && raters == 0) throw ConfigError("analyze.raters", "must be positive");
    const std::uint64_t seed = stage_seed(master, "analyze");

    std::vector<ModelInputs> models;
    for (std::size_t m = 0; m < n_models; ++m) {
        ModelInputs mi;
        mi.name = names.empty() ? "model_" + std::to_string(m) : names[m].get<std::string>();
        const fs::path mdir = inputs[2 * m], sdir = inputs[2 * m + 1];
        require_dir(mdir, "metrics");
        require_dir(sdir, "sets");
        require_file(mdir / "metrics.csv");
        require_file(mdir / "metrics.json");
        mi.metrics = read_report_csv(mdir / "metrics.csv");
        auto mj = nlohmann::json::parse(read_text(mdir / "metrics.json"), nullptr, false);
        if (mj.is_discarded() || !mj.contains("mean_nn_distance")) {
            throw InputError((mdir / "metrics.json").string() + ": missing mean_nn_distance");
        }
        mi.mean_nn = mj["mean_nn_distance"].get<double>();
        mi.sets = read_sets(sdir / "sets.json");
        models.push_back(std::move(mi));
    }

    ojson summary;
    summary["models"] = nlohmann::json::array();
    std::vector<WundtPoint> wundt;
    // Mean overall rating per evaluation set, per model, for the paired tests.
    std::vector<std::vector<double>> set_means(n_models);
    std::vector<std::map<std::size_t, double>> q1_of(n_models);
    for (std::size_t m = 0; m < n_models; ++m) {
        auto& mi = models[m];
        std::set<std::size_t> rated_ids;
        for (const auto& [name, ids] : mi.sets.sets) rated_ids.insert(ids.begin(), ids.end());
        std::map<std::size_t, const ImageMetrics*> by_id;
        for (const auto& r : mi.metrics) by_id[r.id] = &r;

        std::vector<AggregatedRating> agg;
        if (!ratings.empty()) {
            agg = ingest_ratings(ratings[m].get<std::string>());
        } else {
            std::vector<ImageMetrics> rated;
            for (auto id : rated_ids) {
                auto it = by_id.find(id);
                if (it == by_id.end()) throw InputError(mi.name + ": set id " + std::to_string(id) + " has no metrics");
                rated.push_back(*it->second);
            }
            auto records = synthesize_ratings(rated, raters, derive_seed(seed, {m}));
            write_text(out / ("ratings_" + mi.name + ".csv"), ratings_csv(records));
            agg = aggregate_ratings(records);
        }
        std::map<std::size_t, const AggregatedRating*> rating_of;
        for (const auto& a : agg) {
            rating_of[a.image_id] = &a;
            q1_of[m][a.image_id] = a.mean[0];
        }

        // Metric/rating correlation over the random set, per image.
        std::vector<ImageMetrics> random_rows;
        for (auto id : mi.sets.at("random"))
            if (by_id.count(id)) random_rows.push_back(*by_id[id]);
        auto corr = correlation_matrix(metric_table(random_rows), rating_table(agg));
        write_text(out / ("correlation_" + mi.name + ".csv"), correlation_csv(corr));
        auto rt = rating_table(agg);
        write_text(out / ("autocorrelation_" + mi.name + ".csv"), correlation_csv(correlation_matrix(rt, rt)));

        auto mt = metric_table(mi.metrics);
        const std::size_t nc = std::min(components, mt.columns.size());
        auto pr = pca(mt.rows, nc);
        write_text(out / ("pca_" + mi.name + ".csv"), pca_csv(pr, mt.columns, mt.ids));

        double q1 = 0.0, designer = 0.0;
        for (const auto& a : agg) {
            q1 += a.mean[0];
            designer += a.mean[5];
        }
        q1 /= static_cast<double>(agg.size());
        designer /= static_cast<double>(agg.size());
        wundt.push_back({mi.name, mi.mean_nn, q1});
        for (const auto& [name, ids] : mi.sets.sets) {
            double s_q1 = 0.0;
            std::size_t n = 0;
            for (auto id : ids) {
                auto it = rating_of.find(id);
                if (it != rating_of.end()) {
                    s_q1 += it->second->mean[0];
                    ++n;
                }
            }
            set_means[m].push_back(n ? s_q1 / static_cast<double>(n) : 0.0);
        }
        ojson ms;
        ms["name"] = mi.name;
        ms["rated_images"] = agg.size();
        ms["mean_overall"] = q1;
        ms["designer_fraction"] = designer;
        ms["correlation_aligned"] = corr.aligned;
        ms["pca_explained_ratio"] = pr.explained_ratio;
        summary["models"].push_back(ms);
    }
    write_text(out / "wundt.csv", wundt_csv(wundt_data(wundt)));

    // Paired over the evaluation sets, by set name.
    std::string tt = "model_a,model_b,pairs,t,df,p,note\n";
    for (std::size_t a = 0; a < n_models; ++a)
        for (std::size_t b = a + 1; b < n_models; ++b) tt += ttest_row(models[a].name, models[b].name, set_means[a], set_means[b]);
    // Within each model: high vs low NN-distance sets, paired by rank position.
    for (std::size_t m = 0; m < n_models; ++m) {
        const auto& H = models[m].sets.at("high_nn_distance");
        const auto& L = models[m].sets.at("low_nn_distance");
        std::vector<double> hi, lo;
        for (std::size_t i = 0; i < std::min(H.size(), L.size()); ++i) {
            auto h = q1_of[m].find(H[i]), l = q1_of[m].find(L[i]);
            if (h == q1_of[m].end() || l == q1_of[m].end()) continue;
            hi.push_back(h->second);
            lo.push_back(l->second);
        }
        tt += ttest_row(models[m].name + ":high_nn_distance", models[m].name + ":low_nn_distance", hi, lo);
    }
    write_text(out / "ttest.csv", tt);
    return summary;
}

ojson stage_gradcheck(const ojson& master, const fs::path& out) {
    const auto& s = section(master, "gradcheck");
    const std::size_t seeds = get_count(s, "gradcheck", "seeds");
    const std::size_t net_seeds = get_count(s, "gradcheck", "network_seeds");
    const std::string filter = get_string(s, "gradcheck", "filter");
    if (seeds == 0) throw ConfigError("gradcheck.seeds", "must be positive");
    auto outcomes = run_grad_check_suite(seeds, stage_seed(master, "gradcheck"), filter, net_seeds);
    if (outcomes.empty()) throw ConfigError("gradcheck.filter", "matches no registered check");
    write_text(out / "gradcheck.csv", grad_check_csv(outcomes));
    std::size_t failed = 0;
    double worst = 0.0;
    std::set<std::string> names, failing;
    for (const auto& o : outcomes) {
        names.insert(o.name);
        worst = std::max(worst, o.max_rel_error);
        if (!o.passed) {
            ++failed;
            failing.insert(o.name);
        }
    }
    ojson j = {{"checks", names.size()},
               {"runs", outcomes.size()},
               {"failed", failed},
               {"worst_rel_error", worst},
               {"failing", std::vector<std::string>(failing.begin(), failing.end())}};
    if (failed > 0) {
        throw std::runtime_error("gradcheck: " + std::to_string(failed) + " of " + std::to_string(outcomes.size()) +
                                 " runs failed; see " + (out / "gradcheck.csv").string());
    }
    return j;
}

namespace {

std::string csv_to_markdown(const std::string& csv, std::size_t max_rows = 20) {
    std::stringstream ss(csv);
    std::string line, md;
    std::size_t row = 0;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        std::string cells = "|";
        std::size_t ncols = 1;
        for (char c : line) {
            if (c == ',') {
                cells += " |";
                ++ncols;
            } else {
                cells += c;
            }
        }
        md += cells + " |\n";
        if (row == 0) {
            md += "|";
            for (std::size_t i = 0; i < ncols; ++i) md += "---|";
            md += "\n";
        }
        if (++row > max_rows) {
            md += "\n(truncated)\n";
            break;
        }
    }
    return md + "\n";
}

std::string image_link(const fs::path& img, const fs::path& out, const std::string& alt) {
    return "![" + alt + "](" + fs::relative(img, out).generic_string() + ")\n\n";
}

}  // namespace

ojson stage_report(const ojson& master, const std::vector<fs::path>& inputs, const fs::path& out) {
    const auto& s = section(master, "report");
    const std::string title = get_string(s, "report", "title");
    if (inputs.empty()) throw InputError("report: no stage directories given");
    fs::create_directories(out);
    const fs::path abs_out = fs::absolute(out);
    std::string md = "# " + title + "\n\n";
    std::size_t sections = 0;
    for (const auto& dir : inputs) {
        require_dir(dir, "stage output");
        require_file(dir / "manifest.json");
        auto man = nlohmann::json::parse(read_text(dir / "manifest.json"), nullptr, false);
        if (man.is_discarded()) throw InputError((dir / "manifest.json").string() + ": not valid JSON");
        const std::string cmd = man.value("command", "?");
        const fs::path abs = fs::absolute(dir);
        md += "## " + cmd + ": " + dir.filename().string() + "\n\n";
        md += "Status: " + man.value("status", "?") + ", config hash " + man.value("config_hash", "?") + "\n\n";
        if (man.contains("summary") && !man["summary"].is_null()) md += "```json\n" + man["summary"].dump(2) + "\n```\n\n";
        if (cmd == "train" && fs::exists(dir / "train_log.csv")) {
            std::string log = read_text(dir / "train_log.csv");
            std::stringstream ls(log);
            std::string header, line, last;
            std::getline(ls, header);
            while (std::getline(ls, line))
                if (!line.empty()) last = line;
            md += "Final training losses:\n\n" + csv_to_markdown(header + "\n" + last + "\n");
        }
        if (fs::exists(dir / "preview.png")) md += image_link(abs / "preview.png", abs_out, "samples");
        if (fs::exists(dir / "metrics.csv")) {
            md += "Per-image metrics (first rows):\n\n" + csv_to_markdown(read_text(dir / "metrics.csv"), 10);
        }
        if (fs::is_directory(dir / "galleries")) {
            for (auto name : kSetNames) {
                const fs::path g = abs / "galleries" / (std::string(name) + ".png");
                if (fs::exists(g)) md += "### " + std::string(name) + "\n\n" + image_link(g, abs_out, std::string(name));
            }
        }
        for (const char* f : {"wundt.csv", "ttest.csv", "gradcheck.csv"}) {
            if (fs::exists(dir / f)) md += "### " + std::string(f) + "\n\n" + csv_to_markdown(read_text(dir / f), 40);
        }
        std::vector<fs::path> tables;
        for (const auto& e : fs::directory_iterator(dir)) {
            const auto n = e.path().filename().string();
            if (n.rfind("correlation_", 0) == 0 || n.rfind("autocorrelation_", 0) == 0) tables.push_back(e.path());
        }
        std::sort(tables.begin(), tables.end());
        for (const auto& t : tables) md += "### " + t.filename().string() + "\n\n" + csv_to_markdown(read_text(t));
        ++sections;
    }
    write_text(out / "report.md", md);
    return {{"sections", sections}};
}

ojson run_stage(const std::string& command, const ojson& master, const StageIo& io) {
    using clock = std::chrono::steady_clock;
    if (io.out.empty()) throw InputError(command + ": no output directory given");
    fs::create_directories(io.out);
    const std::string config_text = master.dump(2) + "\n";
    ojson man;
    man["command"] = command;
    man["tool_version"] = kToolVersion;
    man["status"] = "running";
    man["config_file"] = "effective_config.json";
    man["config_hash"] = hex64(fnv1a64(config_text));
    man["config"] = master;
    ojson seeds;
    seeds["root"] = resolve_seed(master);
    const std::string stage_key = command == "select-sets" ? "select_sets" : command;
    if (kStageIndex.count(stage_key)) seeds[stage_key] = stage_seed(master, stage_key);
    if (command == "metrics") seeds["classifier"] = stage_seed(master, "classifier");
    man["seeds"] = seeds;
    man["inputs"] = nlohmann::json::array();
    for (const auto& p : io.inputs) man["inputs"].push_back(p.string());
    man["output"] = io.out.string();
    write_text(io.out / "effective_config.json", config_text);
    write_text(io.out / "manifest.json", man.dump(2) + "\n");

    const auto t0 = clock::now();
    auto finish = [&](const std::string& status) {
        man["status"] = status;
        man["wall_time_seconds"] = std::chrono::duration<double>(clock::now() - t0).count();
        write_text(io.out / "manifest.json", man.dump(2) + "\n");
    };
    auto input = [&](std::size_t i) { return i < io.inputs.size() ? io.inputs[i] : fs::path{}; };
    try {
        ojson summary;
        if (command == "synth") summary = stage_synth(master, io.out);
        else if (command == "train") summary = stage_train(master, input(0), io.out);
        else if (command == "sample") summary = stage_sample(master, input(0), input(1), io.out);
        else if (command == "metrics") summary = stage_metrics(master, input(0), input(1), io.out);
        else if (command == "select-sets") summary = stage_select_sets(master, input(0), input(1), io.out);
        else if (command == "analyze") summary = stage_analyze(master, io.inputs, io.out);
        else if (command == "gradcheck") summary = stage_gradcheck(master, io.out);
        else if (command == "report") summary = stage_report(master, io.inputs, io.out);
        else throw ConfigError("command", "unknown subcommand '" + command + "'");
        man["summary"] = summary;
        finish("complete");
        return summary;
    } catch (const std::exception& e) {
        man["error"] = e.what();
        if (auto* d = dynamic_cast<const TrainingDiverged*>(&e)) {
            man["diverged_at"] = d->iteration;
            man["last_checkpoint"] = d->last_checkpoint;
        }
        finish("invalid");
        throw;
    }
}

}  // namespace creagen
