#include "neatboost/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "neatboost/analysis.hpp"
#include "neatboost/errors.hpp"
#include "neatboost/features.hpp"
#include "neatboost/fusion.hpp"
#include "neatboost/image.hpp"
#include "neatboost/pipeline.hpp"

namespace neatboost {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kManifestSchema = 1;
constexpr std::array<LearnerKind, 2> kLearners{LearnerKind::Gbdt, LearnerKind::Mlp};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::mutex log_mutex;

void log_event(const std::string& event, const std::vector<std::pair<std::string, std::string>>& kv = {}) {
    std::ostringstream os;
    os << "neatboost event=" << event;
    for (const auto& [k, v] : kv) os << ' ' << k << '=' << v;
    std::lock_guard lock(log_mutex);
    std::cerr << os.str() << '\n';
}

std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void ensure_dir(const fs::path& dir) {
    if (dir.empty()) throw UsageError("an output directory is required (--out)");
    fs::create_directories(dir);
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("bad number in list: '" + item + "'");
        }
    }
    return out;
}

std::uint64_t resolve_seed(const RunConfig& cfg) {
    if (cfg.seed) return *cfg.seed;
    throw UsageError("a seed is required (--seed, [run] seed in the config file, or NEATBOOST_SEED)");
}

}  // namespace

std::string RunConfig::canonical() const {
    std::map<std::string, std::string> kv;
    kv["run.seed"] = seed ? std::to_string(*seed) : "";
    kv["split.train"] = format_double(split[0]);
    kv["split.val"] = format_double(split[1]);
    kv["split.test"] = format_double(split[2]);
    kv["cv.folds"] = std::to_string(folds);
    kv["cv.smote_k"] = std::to_string(smote_k);
    kv["cv.top_k"] = std::to_string(top_k);
    kv["neat.population"] = std::to_string(neat.population_size);
    kv["neat.generations"] = std::to_string(neat.generations);
    std::string inputs;
    for (double v : neat.inputs) inputs += (inputs.empty() ? "" : ";") + format_double(v);
    kv["neat.inputs"] = inputs;
    kv["neat.c1"] = format_double(neat.c1);
    kv["neat.c2"] = format_double(neat.c2);
    kv["neat.c3"] = format_double(neat.c3);
    kv["neat.threshold"] = format_double(neat.compatibility_threshold);
    kv["neat.weight_mutation_rate"] = format_double(neat.weight_mutation_rate);
    kv["neat.weight_sigma"] = format_double(neat.weight_perturb_sigma);
    kv["neat.weight_replace_rate"] = format_double(neat.weight_replace_rate);
    kv["neat.add_node_rate"] = format_double(neat.add_node_rate);
    kv["neat.add_connection_rate"] = format_double(neat.add_connection_rate);
    kv["neat.crossover_rate"] = format_double(neat.crossover_rate);
    kv["neat.survival_fraction"] = format_double(neat.survival_fraction);
    kv["neat.elitism"] = std::to_string(neat.elitism);
    kv["neat.stagnation"] = std::to_string(neat.stagnation_limit);
    kv["mlp.epochs"] = std::to_string(budget.mlp_epochs);
    kv["mlp.batch_size"] = std::to_string(budget.mlp_batch_size);
    kv["synth.n_per_class"] = std::to_string(synth_per_class);
    kv["synth.separation"] = format_double(synth_separation);
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

std::string RunConfig::hash() const { return sha256_hex(canonical()); }

void apply_ini(RunConfig& cfg, const fs::path& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw DataError(std::string("config: ") + e.what());
    }
    auto& n = cfg.neat;
    for (const auto& [section, body] : tree) {
        for (const auto& [key, node] : body) {
            const std::string name = section + "." + key;
            const std::string value = node.data();
            auto num = [&] {
                try {
                    std::size_t used = 0;
                    const double v = std::stod(value, &used);
                    if (used != value.size()) throw std::invalid_argument(value);
                    return v;
                } catch (const std::exception&) {
                    throw DataError("config: " + name + " is not a number: '" + value + "'");
                }
            };
            auto count = [&] {
                const double v = num();
                if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v)))
                    throw DataError("config: " + name + " must be a nonnegative integer");
                return static_cast<std::size_t>(v);
            };
            if (name == "run.seed") {
                try {
                    cfg.seed = std::stoull(value);
                } catch (const std::exception&) {
                    throw DataError("config: run.seed must be an unsigned integer");
                }
            } else if (name == "run.data") cfg.data = value;
            else if (name == "run.out") cfg.out = value;
            else if (name == "run.jobs") cfg.jobs = count();
            else if (name == "split.train") cfg.split[0] = num();
            else if (name == "split.val") cfg.split[1] = num();
            else if (name == "split.test") cfg.split[2] = num();
            else if (name == "cv.folds") cfg.folds = count();
            else if (name == "cv.smote_k") cfg.smote_k = count();
            else if (name == "cv.top_k") cfg.top_k = count();
            else if (name == "neat.population") n.population_size = count();
            else if (name == "neat.generations") n.generations = count();
            else if (name == "neat.c1") n.c1 = num();
            else if (name == "neat.c2") n.c2 = num();
            else if (name == "neat.c3") n.c3 = num();
            else if (name == "neat.threshold") n.compatibility_threshold = num();
            else if (name == "neat.weight_mutation_rate") n.weight_mutation_rate = num();
            else if (name == "neat.weight_sigma") n.weight_perturb_sigma = num();
            else if (name == "neat.weight_replace_rate") n.weight_replace_rate = num();
            else if (name == "neat.add_node_rate") n.add_node_rate = num();
            else if (name == "neat.add_connection_rate") n.add_connection_rate = num();
            else if (name == "neat.crossover_rate") n.crossover_rate = num();
            else if (name == "neat.survival_fraction") n.survival_fraction = num();
            else if (name == "neat.elitism") n.elitism = count();
            else if (name == "neat.stagnation") n.stagnation_limit = count();
            else if (name == "mlp.epochs") cfg.budget.mlp_epochs = static_cast<int>(count());
            else if (name == "mlp.batch_size") cfg.budget.mlp_batch_size = static_cast<int>(count());
            else if (name == "synth.n_per_class") cfg.synth_per_class = count();
            else if (name == "synth.separation") cfg.synth_separation = num();
            else throw DataError("config: unknown key " + name);
        }
    }
}

namespace {

struct Context {
    RunConfig cfg;
    // command-specific
    std::string images, labels, test, weights, gbdt_params, mlp_params, model, manifest, output = "predictions.csv";
    std::size_t max_side = 1024;
};

fs::path manifest_path(const Context& ctx) {
    return ctx.manifest.empty() ? ctx.cfg.out / "manifest.json" : fs::path(ctx.manifest);
}

// ---------------------------------------------------------------- extract

std::map<std::string, std::string> read_label_file(const fs::path& path) {
    std::map<std::string, std::string> labels;
    std::istringstream in(read_text(path));
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw DataError(path.string() + ": expected 'file,label' lines");
        std::string name = line.substr(0, comma), label = line.substr(comma + 1);
        if (first && (name == "id" || name == "path" || name == "file" || name == "filename")) {
            first = false;
            continue;
        }
        first = false;
        parse_label(label);
        labels[name] = label;
    }
    return labels;
}

int cmd_extract(const Context& ctx) {
    if (ctx.images.empty()) throw UsageError("extract needs --images");
    if (ctx.cfg.out.empty()) throw UsageError("extract needs --out (CSV path)");
    if (!fs::is_directory(ctx.images)) throw DataError("not a directory: " + ctx.images);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(ctx.images)) {
        if (!e.is_regular_file()) continue;
        std::string ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".pgm" || ext == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no PGM/PNG images in " + ctx.images);
    const auto labels = ctx.labels.empty() ? std::map<std::string, std::string>{} : read_label_file(ctx.labels);

    std::vector<std::optional<FeatureVector>> results(files.size());
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        for (std::size_t i = cursor++; i < files.size(); i = cursor++) {
            try {
                results[i] = describe_image(load_grayscale(files[i]), ctx.max_side);
            } catch (const std::exception& e) {
                log_event("extract_failed", {{"file", files[i].filename().string()}, {"error", "\"" + std::string(e.what()) + "\""}});
            }
        }
    };
    {
        const std::size_t n = std::max<std::size_t>(1, std::min(ctx.cfg.jobs, files.size()));
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
        worker();
    }

    Dataset ds;
    ds.x = Matrix(0, kNumDescriptors);
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (!results[i]) continue;
        const std::string name = files[i].filename().string();
        ds.x.append_row(results[i]->values);
        ds.ids.push_back(name);
        const auto it = labels.find(name);
        ds.y.push_back(it == labels.end() ? kUnlabeled : parse_label(it->second));
    }
    if (ds.size() == 0) throw DataError("every image failed to process");
    const fs::path out = ctx.cfg.out;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_dataset_csv(out, ds);
    log_event("extract_done", {{"rows", std::to_string(ds.size())}, {"failed", std::to_string(files.size() - ds.size())},
                               {"out", out.string()}});
    return kExitOk;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const Context& ctx) {
    const auto seed = resolve_seed(ctx.cfg);
    if (ctx.cfg.out.empty()) throw UsageError("synth needs --out (CSV path)");
    const auto ds = synthesize_dataset(ctx.cfg.synth_per_class, ctx.cfg.synth_separation, derive_seed(seed, "synth"));
    const fs::path out = ctx.cfg.out;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_dataset_csv(out, ds);
    log_event("synth_done", {{"rows", std::to_string(ds.size())}, {"separation", short_num(ctx.cfg.synth_separation)},
                             {"out", out.string()}});
    return kExitOk;
}

// ---------------------------------------------------------------- evolve

CvSettings cv_settings(const RunConfig& cfg, std::size_t jobs) {
    CvSettings cv;
    cv.k_folds = cfg.folds;
    cv.smote_k = cfg.smote_k;
    cv.budget = cfg.budget;
    cv.jobs = jobs;
    return cv;
}

NeatConfig population_config(const RunConfig& cfg, LearnerKind kind, std::uint64_t seed) {
    NeatConfig n = cfg.neat;
    n.seed = derive_seed(seed, "neat", {static_cast<std::uint64_t>(kind)});
    n.jobs = std::max<std::size_t>(1, cfg.jobs);
    n.hall_of_fame = std::max<std::size_t>(1, cfg.top_k);
    return n;
}

int cmd_evolve(const Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const auto seed = resolve_seed(cfg);
    if (cfg.data.empty()) throw UsageError("evolve needs --data");
    ensure_dir(cfg.out);
    if (cfg.top_k < 1) throw DataError("top_k must be >= 1");

    const Dataset all = read_dataset_csv(cfg.data);
    const auto split = stratified_split(all.y, cfg.split, derive_seed(seed, "split"));
    std::vector<std::size_t> dev_idx = split.train;
    dev_idx.insert(dev_idx.end(), split.val.begin(), split.val.end());
    std::sort(dev_idx.begin(), dev_idx.end());
    const Dataset dev = all.subset(dev_idx);
    const Dataset test = all.subset(split.test);
    stratified_kfold(dev.y, cfg.folds, derive_seed(seed, "cv.folds"));  // fail fast on small classes
    write_dataset_csv(cfg.out / "dev.csv", dev);
    write_dataset_csv(cfg.out / "test.csv", test);
    log_event("split", {{"dev", std::to_string(dev.size())}, {"test", std::to_string(test.size())}});

    const std::string hash = cfg.hash();
    for (LearnerKind kind : kLearners) {
        const std::string name(learner_name(kind));
        const NeatConfig ncfg = population_config(cfg, kind, seed);
        const auto objective = make_objective(dev, kind, ncfg, cv_settings(cfg, 1), derive_seed(seed, "cv"));
        const auto result = evolve(objective, search_space(kind), ncfg);
        for (const auto& g : result.report.generations)
            log_event("generation", {{"learner", name},
                                     {"generation", std::to_string(g.generation)},
                                     {"best", short_num(g.best_fitness)},
                                     {"mean", short_num(g.mean_fitness)},
                                     {"species", std::to_string(g.species_count)}});
        write_text(cfg.out / (name + "_history.csv"), result.report.to_csv());

        json selected = json::array();
        for (std::size_t i = 0; i < result.hall_of_fame.size() && i < cfg.top_k; ++i) {
            const auto& g = result.hall_of_fame[i];
            selected.push_back({{"fitness", g.fitness.value_or(0.0)},
                                {"hyperparameters", decode_genome(g, kind, ncfg).to_json()},
                                {"genome", genome_to_json(g)}});
        }
        const json best = {{"schema_version", kManifestSchema},
                           {"learner", name},
                           {"config_hash", hash},
                           {"fitness", result.best.fitness.value_or(0.0)},
                           {"hyperparameters", decode_genome(result.best, kind, ncfg).to_json()},
                           {"genome", genome_to_json(result.best)},
                           {"selected", selected}};
        write_text(cfg.out / (name + "_best.json"), best.dump(2) + "\n");
        log_event("evolve_done", {{"learner", name}, {"best_fitness", short_num(result.best.fitness.value_or(0.0))}});
    }
    return kExitOk;
}

// ---------------------------------------------------------------- train

struct Candidate {
    LearnerKind kind;
    DecodedHyperparameters h;
    std::string source;
};

std::vector<Candidate> load_candidates(const Context& ctx, const std::string& hash) {
    std::vector<Candidate> out;
    for (LearnerKind kind : kLearners) {
        const std::string name(learner_name(kind));
        const std::string& manual = kind == LearnerKind::Gbdt ? ctx.gbdt_params : ctx.mlp_params;
        if (!manual.empty()) {
            json j = read_json(manual);
            if (j.contains("hyperparameters")) j = j["hyperparameters"];
            auto h = DecodedHyperparameters::from_json(j);
            for (const auto& r : search_space(kind).entries)
                if (!h.contains(r.name)) throw DataError(manual + ": missing hyperparameter " + r.name);
            out.push_back({kind, std::move(h), "manual"});
            continue;
        }
        const fs::path best_path = ctx.cfg.out / (name + "_best.json");
        if (!fs::exists(best_path))
            throw DataError("missing " + best_path.string() + " (run evolve first or pass --" + name + "-params)");
        const json best = read_json(best_path);
        if (best.at("config_hash").get<std::string>() != hash)
            throw DataError("config drift: " + best_path.string() + " was produced with config hash " +
                            best.at("config_hash").get<std::string>() + ", current config hash is " + hash);
        const auto& selected = best.at("selected");
        for (std::size_t i = 0; i < selected.size() && i < ctx.cfg.top_k; ++i)
            out.push_back({kind, DecodedHyperparameters::from_json(selected[i].at("hyperparameters")), "evolved"});
    }
    return out;
}

int cmd_train(const Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const auto seed = resolve_seed(cfg);
    ensure_dir(cfg.out);
    const std::string hash = cfg.hash();
    const Dataset dev = read_dataset_csv(cfg.data.empty() ? cfg.out / "dev.csv" : cfg.data);
    const auto candidates = load_candidates(ctx, hash);

    std::vector<Matrix> oofs;
    json learners = json::array();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        const auto cv = cross_validate(dev, c.kind, c.h, cv_settings(cfg, cfg.jobs), derive_seed(seed, "cv"),
                                       derive_seed(seed, "train.cv", {i}));
        const auto metrics = compute_metrics(dev.y, argmax_rows(cv.oof));
        log_event("oof", {{"model", std::to_string(i)}, {"learner", std::string(learner_name(c.kind))},
                          {"weighted_f1", short_num(metrics.weighted_f1)}});
        oofs.push_back(cv.oof);
        learners.push_back({{"learner", learner_name(c.kind)},
                            {"hyperparameters", c.h.to_json()},
                            {"hyperparameter_source", c.source},
                            {"oof_metrics", metrics.to_json()}});
    }

    std::vector<double> weights;
    std::string provenance;
    if (!ctx.weights.empty()) {
        weights = parse_list(ctx.weights);
        if (weights.size() != candidates.size())
            throw UsageError("--weights needs " + std::to_string(candidates.size()) + " values");
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw UsageError("--weights must be nonnegative");
            total += w;
        }
        if (!(total > 0.0)) throw UsageError("--weights must not all be zero");
        for (double& w : weights) w /= total;
        provenance = "override";
    } else {
        weights = optimize_weights(oofs, dev.y).weights;
        provenance = "nelder_mead";
    }
    const auto ensemble_oof = compute_metrics(dev.y, fuse(oofs, weights).labels);
    log_event("weights", {{"provenance", provenance}, {"oof_weighted_f1", short_num(ensemble_oof.weighted_f1)}});

    const auto balanced = smote(dev.x, dev.y, cfg.smote_k, derive_seed(seed, "train.smote"));
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        const auto model = train_learner(c.kind, c.h, cfg.budget, balanced.x, balanced.y, derive_seed(seed, "train.model", {i}));
        const std::string file = "model_" + std::to_string(i) + "_" + std::string(learner_name(c.kind)) + ".json";
        write_text(cfg.out / file, model.to_json().dump() + "\n");
        learners[i]["file"] = file;
    }

    const json manifest = {{"schema_version", kManifestSchema},
                           {"config_hash", hash},
                           {"seed", seed},
                           {"learners", learners},
                           {"weights", weights},
                           {"weights_provenance", provenance},
                           {"oof_objective", ensemble_oof.weighted_f1},
                           {"oof_metrics", ensemble_oof.to_json()},
                           {"test_metrics", nullptr}};
    write_text(cfg.out / "manifest.json", manifest.dump(2) + "\n");
    log_event("train_done", {{"models", std::to_string(candidates.size())}, {"manifest", (cfg.out / "manifest.json").string()}});
    return kExitOk;
}

// ---------------------------------------------------------------- evaluate / predict

struct LoadedEnsemble {
    json manifest;
    std::vector<LearnerModel> models;
    std::vector<std::string> names;
    std::vector<double> weights;
};

LoadedEnsemble load_ensemble(const fs::path& path) {
    LoadedEnsemble e;
    e.manifest = read_json(path);
    if (e.manifest.value("schema_version", 0) != kManifestSchema) throw DataError(path.string() + ": unsupported schema_version");
    const fs::path dir = path.parent_path();
    for (const auto& l : e.manifest.at("learners")) {
        const fs::path file = dir / l.at("file").get<std::string>();
        if (!fs::exists(file)) throw DataError("manifest references missing model file " + file.string());
        e.models.push_back(LearnerModel::from_json(read_json(file)));
        e.names.push_back(l.at("learner").get<std::string>());
    }
    e.weights = e.manifest.at("weights").get<std::vector<double>>();
    if (e.weights.size() != e.models.size()) throw DataError(path.string() + ": weight count does not match models");
    return e;
}

std::vector<Matrix> predict_all(const LoadedEnsemble& e, const Dataset& ds) {
    std::vector<Matrix> probs;
    for (const auto& m : e.models) {
        const std::size_t expected = m.kind == LearnerKind::Gbdt ? std::get<TreeEnsembleModel>(m.model).n_features
                                                                 : std::get<MlpModel>(m.model).n_inputs;
        if (ds.x.cols() != expected)
            throw DataError("feature-count mismatch: model expects " + std::to_string(expected) + ", data has " +
                            std::to_string(ds.x.cols()));
        probs.push_back(m.predict_proba(ds.x));
    }
    return probs;
}

std::string metrics_row(const std::string& name, const MetricsReport& m) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-12s %8.4f %9.4f %8.4f %8.4f %8.4f\n", name.c_str(), m.accuracy,
                  m.weighted_precision, m.weighted_recall, m.weighted_f1, m.macro_f1);
    return buf;
}

int cmd_evaluate(const Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    resolve_seed(cfg);
    const fs::path mpath = manifest_path(ctx);
    auto e = load_ensemble(mpath);
    const std::string hash = cfg.hash();
    if (e.manifest.at("config_hash").get<std::string>() != hash)
        throw DataError("config drift: manifest config hash " + e.manifest.at("config_hash").get<std::string>() +
                        " differs from current config hash " + hash);
    const fs::path out = mpath.parent_path();
    const Dataset test = read_dataset_csv(ctx.test.empty() ? out / "test.csv" : fs::path(ctx.test));
    const auto probs = predict_all(e, test);

    json models = json::array();
    std::string table = "model        accuracy precision   recall       f1 macro_f1\n";
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const auto m = compute_metrics(test.y, argmax_rows(probs[i]));
        const std::string label = e.names[i] + (probs.size() > 2 ? "_" + std::to_string(i) : "");
        models.push_back({{"name", label}, {"metrics", m.to_json()}});
        table += metrics_row(label, m);
    }
    const auto fused = fuse(probs, e.weights);
    const auto ens = compute_metrics(test.y, fused.labels);
    table += metrics_row("ensemble", ens);
    table += "\nensemble per-class recall:";
    for (std::size_t c = 0; c < ens.per_class.size(); ++c)
        table += " " + std::string(class_name(static_cast<int>(c))) + "=" + std::to_string(ens.confusion[c][c]) + "/" +
                 std::to_string(ens.per_class[c].support);
    table += "\n\nconfusion (counts)\n" + ens.confusion_csv(false) + "\nconfusion (row-normalized)\n" + ens.confusion_csv(true);
    if (ens.zero_division) table += "\nnote: some precision/recall terms were undefined and counted as 0\n";

    const json report = {{"schema_version", kManifestSchema},
                         {"config_hash", hash},
                         {"test_rows", test.size()},
                         {"models", models},
                         {"ensemble", ens.to_json()}};
    write_text(out / "report.json", report.dump(2) + "\n");
    write_text(out / "report.txt", table);
    write_text(out / "confusion_counts.csv", ens.confusion_csv(false));
    write_text(out / "confusion_normalized.csv", ens.confusion_csv(true));
    e.manifest["test_metrics"] = ens.to_json();
    write_text(mpath, e.manifest.dump(2) + "\n");
    std::cout << table;
    log_event("evaluate_done", {{"accuracy", short_num(ens.accuracy)}, {"weighted_f1", short_num(ens.weighted_f1)}});
    return kExitOk;
}

int cmd_predict(const Context& ctx) {
    resolve_seed(ctx.cfg);
    if (ctx.cfg.data.empty()) throw UsageError("predict needs --data");
    const fs::path mpath = manifest_path(ctx);
    const auto e = load_ensemble(mpath);
    const Dataset ds = read_dataset_csv(ctx.cfg.data, false);
    const auto fused = fuse(predict_all(e, ds), e.weights);
    std::ostringstream os;
    os << "id,predicted,p_normal,p_wb,p_sm\n";
    for (std::size_t r = 0; r < ds.size(); ++r) {
        os << ds.ids[r] << ',' << class_name(fused.labels[r]);
        for (double p : fused.probs.row(r)) os << ',' << format_double(p);
        os << '\n';
    }
    const fs::path out_dir = ctx.cfg.out.empty() ? mpath.parent_path() : ctx.cfg.out;
    ensure_dir(out_dir);
    const fs::path out = out_dir / fs::path(ctx.output).filename();
    write_text(out, os.str());
    log_event("predict_done", {{"rows", std::to_string(ds.size())}, {"out", out.string()}});
    return kExitOk;
}

// ---------------------------------------------------------------- analyze

int cmd_analyze(const Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    resolve_seed(cfg);
    if (cfg.data.empty()) throw UsageError("analyze needs --data");
    ensure_dir(cfg.out);
    const Dataset ds = read_dataset_csv(cfg.data);

    std::vector<AnovaResult> anova;
    std::vector<double> column(ds.size());
    for (std::size_t f = 0; f < ds.x.cols(); ++f) {
        for (std::size_t i = 0; i < ds.size(); ++i) column[i] = ds.x(i, f);
        auto a = anova_f(column, ds.y);
        a.feature = f;
        anova.push_back(a);
    }
    write_text(cfg.out / "anova.csv", anova_csv(anova));

    const auto lda = lda_project(ds.x, ds.y, 2);
    if (lda.clamped) log_event("lda_clamped", {{"components", std::to_string(lda.components)}});
    write_text(cfg.out / "lda.csv", lda_csv(lda, ds));
    std::ostringstream axes;
    axes << "component,explained_ratio";
    for (std::size_t f = 0; f < ds.x.cols(); ++f) axes << ',' << descriptor_column(f);
    axes << '\n';
    for (std::size_t k = 0; k < lda.components; ++k) {
        axes << "LD" << k + 1 << ',' << format_double(lda.explained_ratio[k]);
        for (double v : lda.axes[k]) axes << ',' << format_double(v);
        axes << '\n';
    }
    write_text(cfg.out / "lda_axes.csv", axes.str());

    std::optional<TreeEnsembleModel> model;
    if (!ctx.model.empty()) model = TreeEnsembleModel::from_json(read_json(ctx.model));
    const auto ranking = rank_features(ds, model ? &*model : nullptr);
    write_text(cfg.out / "ranking.csv", ranking_csv(ranking));
    log_event("analyze_done", {{"top_feature", std::string(descriptor_column(ranking.front().feature))},
                               {"ld1_ratio", short_num(lda.explained_ratio.empty() ? 0.0 : lda.explained_ratio[0])}});
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"NEATBoost-Attention: descriptor extraction, neuroevolved learners, fused classification"};
    app.require_subcommand(1);
    Context ctx;

    struct Common {
        std::string config, data, out;
        std::uint64_t seed = 0;
        std::size_t jobs = 1, folds = 0, smote_k = 0, top_k = 0, population = 0, generations = 0, n_per_class = 0;
        int epochs = 0, batch_size = 0;
        double separation = 0.0;
        std::string split;
    } common;

    auto add_common = [&](CLI::App* sub, bool learning) {
        sub->add_option("--config", common.config, "INI config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", common.seed, "root seed (falls back to NEATBOOST_SEED)");
        sub->add_option("--jobs", common.jobs, "maximum concurrent evaluations")->check(CLI::PositiveNumber);
        sub->add_option("--data", common.data, "feature CSV");
        sub->add_option("--out", common.out, "output directory");
        if (learning) {
            sub->add_option("--folds", common.folds, "K for stratified cross-validation");
            sub->add_option("--smote-k", common.smote_k, "SMOTE neighbours");
            sub->add_option("--top-k", common.top_k, "models kept per population");
            sub->add_option("--population", common.population, "NEAT population size");
            sub->add_option("--generations", common.generations, "NEAT generations");
            sub->add_option("--epochs", common.epochs, "MLP epochs");
            sub->add_option("--batch-size", common.batch_size, "MLP batch size");
            sub->add_option("--split", common.split, "train,val,test fractions");
        }
    };

    auto* extract = app.add_subcommand("extract", "compute descriptors for a directory of images");
    add_common(extract, false);
    extract->add_option("--images", ctx.images, "directory of PGM/PNG images")->required();
    extract->add_option("--labels", ctx.labels, "CSV of file,label");
    extract->add_option("--max-side", ctx.max_side, "downscale so the longer side is at most this");

    auto* synth = app.add_subcommand("synth", "write a synthetic labelled feature table");
    add_common(synth, false);
    synth->add_option("--n-per-class", common.n_per_class, "samples per class");
    synth->add_option("--separation", common.separation, "cluster separation in SDs");

    auto* evolve_cmd = app.add_subcommand("evolve", "evolve hyperparameters for both learners");
    add_common(evolve_cmd, true);

    auto* train = app.add_subcommand("train", "cross-validate, fit fusion weights and train final models");
    add_common(train, true);
    train->add_option("--weights", ctx.weights, "comma-separated fusion weights (skips optimization)");
    train->add_option("--gbdt-params", ctx.gbdt_params, "JSON of GBDT hyperparameters")->check(CLI::ExistingFile);
    train->add_option("--mlp-params", ctx.mlp_params, "JSON of MLP hyperparameters")->check(CLI::ExistingFile);

    auto* evaluate = app.add_subcommand("evaluate", "score the ensemble on the held-out test set");
    add_common(evaluate, true);
    evaluate->add_option("--manifest", ctx.manifest, "manifest.json (default: <out>/manifest.json)");
    evaluate->add_option("--test", ctx.test, "test CSV (default: <out>/test.csv)");

    auto* analyze = app.add_subcommand("analyze", "ANOVA, LDA and feature ranking");
    add_common(analyze, false);
    analyze->add_option("--model", ctx.model, "GBDT model file for gain importance")->check(CLI::ExistingFile);

    auto* predict = app.add_subcommand("predict", "classify rows of a feature CSV");
    add_common(predict, false);
    predict->add_option("--manifest", ctx.manifest, "manifest.json (default: <out>/manifest.json)");
    predict->add_option("--output", ctx.output, "file name written inside the output directory");

    std::vector<std::string> argv_store{"neatboost"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        RunConfig& cfg = ctx.cfg;
        if (const char* env = std::getenv("NEATBOOST_SEED"); env && *env) {
            try {
                cfg.seed = std::stoull(env);
            } catch (const std::exception&) {
                throw UsageError("NEATBOOST_SEED must be an unsigned integer");
            }
        }
        if (!common.config.empty()) apply_ini(cfg, common.config);
        // options are registered per subcommand; only the parsed one has counts
        auto given_any = [&](const char* name) {
            for (auto* sub : app.get_subcommands()) {
                for (auto* opt : sub->get_options())
                    if (opt->get_name() == std::string("--") + name && opt->count() > 0) return true;
            }
            return false;
        };
        if (given_any("seed")) cfg.seed = common.seed;
        if (given_any("jobs")) cfg.jobs = common.jobs;
        if (given_any("data")) cfg.data = common.data;
        if (given_any("out")) cfg.out = common.out;
        if (given_any("folds")) cfg.folds = common.folds;
        if (given_any("smote-k")) cfg.smote_k = common.smote_k;
        if (given_any("top-k")) cfg.top_k = common.top_k;
        if (given_any("population")) cfg.neat.population_size = common.population;
        if (given_any("generations")) cfg.neat.generations = common.generations;
        if (given_any("epochs")) cfg.budget.mlp_epochs = common.epochs;
        if (given_any("batch-size")) cfg.budget.mlp_batch_size = common.batch_size;
        if (given_any("n-per-class")) cfg.synth_per_class = common.n_per_class;
        if (given_any("separation")) cfg.synth_separation = common.separation;
        if (given_any("split")) {
            const auto f = parse_list(common.split);
            if (f.size() != 3) throw UsageError("--split needs three fractions");
            cfg.split = {f[0], f[1], f[2]};
        }

        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "extract") return cmd_extract(ctx);
        if (cmd == "synth") return cmd_synth(ctx);
        if (cmd == "evolve") return cmd_evolve(ctx);
        if (cmd == "train") return cmd_train(ctx);
        if (cmd == "evaluate") return cmd_evaluate(ctx);
        if (cmd == "analyze") return cmd_analyze(ctx);
        if (cmd == "predict") return cmd_predict(ctx);
        throw UsageError("unknown command " + cmd);
    } catch (const UsageError& e) {
        std::cerr << "neatboost: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "neatboost: data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "neatboost: data error: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "neatboost: data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "neatboost: internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}

}  // namespace neatboost
