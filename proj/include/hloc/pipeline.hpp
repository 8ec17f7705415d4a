#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hloc/augment.hpp"
#include "hloc/classifier.hpp"
#include "hloc/dataset.hpp"
#include "hloc/descriptor.hpp"
#include "hloc/detail/binio.hpp"
#include "hloc/evaluation.hpp"
#include "hloc/localization.hpp"

namespace hloc {

inline constexpr const char* kToolVersion = "0.1.0";

// Flat key = value config driving the one-command experiment: ingest ->
// split -> augment -> describe -> train -> localize -> eval.
struct PipelineConfig {
    fs::path corpus_root;
    fs::path out_dir;
    double spacing = 0.20;
    std::optional<Condition> condition;  // fixed capture condition, else per-file
    std::string augment_effect = "none";
    std::uint64_t augment_seed = 1;
    int rotation_levels = 35;
    DescribeOptions describe;
    TrainConfig train;
    LocalizeMode mode = LocalizeMode::hierarchical;
    std::optional<fs::path> query_manifest;  // default: the validation split
    bool timing = false;  // wall-clock fields zeroed unless enabled

    static PipelineConfig parse_file(const fs::path& path);
};

namespace detail_pipeline {

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
    if (v == "off" || v == "false" || v == "0" || v == "no") return false;
    throw std::runtime_error("config key " + key + " expects on/off, got '" + v + "'");
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace detail_pipeline

inline PipelineConfig PipelineConfig::parse_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config " + path.string());

    PipelineConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string t = detail_pipeline::trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) + " is not key = value");
        std::string key = detail_pipeline::trim(t.substr(0, eq));
        std::string val = detail_pipeline::trim(t.substr(eq + 1));

        if (key == "corpus_root") cfg.corpus_root = val;
        else if (key == "out_dir") cfg.out_dir = val;
        else if (key == "spacing") cfg.spacing = detail::parse_double(val, "config");
        else if (key == "condition") cfg.condition = parse_condition(val);
        else if (key == "augment_effect") cfg.augment_effect = val;
        else if (key == "augment_seed") cfg.augment_seed = std::stoull(val);
        else if (key == "rotation_levels") cfg.rotation_levels = std::stoi(val);
        else if (key == "descriptor_method") {
            if (val == "hog") cfg.describe.method = DescriptorMethod::hog;
            else if (val == "blockmean") cfg.describe.method = DescriptorMethod::blockmean;
            else throw std::runtime_error("descriptor_method must be hog or blockmean");
        }
        else if (key == "hog_cell") cfg.describe.hog_cell = std::stoi(val);
        else if (key == "hog_bins") cfg.describe.hog_bins = std::stoi(val);
        else if (key == "block_gw") cfg.describe.block_gw = std::stoi(val);
        else if (key == "block_gh") cfg.describe.block_gh = std::stoi(val);
        else if (key == "resize_width") cfg.describe.resize_width = std::stoi(val);
        else if (key == "resize_height") cfg.describe.resize_height = std::stoi(val);
        else if (key == "l2norm") cfg.describe.l2norm = detail_pipeline::parse_bool(val, key);
        else if (key == "epochs") cfg.train.epochs = std::stoi(val);
        else if (key == "batch") cfg.train.batch_size = std::stoi(val);
        else if (key == "lr") cfg.train.learning_rate = detail::parse_double(val, "config");
        else if (key == "momentum") cfg.train.momentum = detail::parse_double(val, "config");
        else if (key == "train_seed") cfg.train.seed = std::stoull(val);
        else if (key == "mode") cfg.mode = parse_mode(val);
        else if (key == "query_manifest") cfg.query_manifest = fs::path(val);
        else if (key == "timing") cfg.timing = detail_pipeline::parse_bool(val, key);
        else throw std::runtime_error("unknown config key: " + key);
    }
    if (cfg.corpus_root.empty()) throw std::runtime_error("config missing corpus_root");
    if (cfg.out_dir.empty()) throw std::runtime_error("config missing out_dir");
    return cfg;
}

namespace detail_pipeline {

inline fs::file_time_type newest_mtime(const fs::path& p) {
    if (fs::is_directory(p)) {
        fs::file_time_type newest = fs::file_time_type::min();
        for (const auto& entry : fs::recursive_directory_iterator(p))
            if (entry.is_regular_file()) newest = std::max(newest, entry.last_write_time());
        return newest;
    }
    return fs::last_write_time(p);
}

inline bool outputs_fresh(const std::vector<fs::path>& outputs, const std::vector<fs::path>& inputs) {
    fs::file_time_type newest_in = fs::file_time_type::min();
    for (const auto& in : inputs) {
        if (!fs::exists(in)) return false;
        newest_in = std::max(newest_in, newest_mtime(in));
    }
    for (const auto& out : outputs) {
        if (!fs::exists(out)) return false;
        if (fs::last_write_time(out) < newest_in) return false;
    }
    return true;
}

// Provenance sidecar next to each artifact: tool version, seeds, and
// content digests of the direct inputs.
inline void write_provenance(const fs::path& artifact, const std::vector<fs::path>& inputs,
                             const nlohmann::json& seeds) {
    nlohmann::json j;
    j["tool"] = "hloc";
    j["version"] = kToolVersion;
    j["seeds"] = seeds;
    nlohmann::json in = nlohmann::json::object();
    for (const auto& p : inputs)
        if (fs::is_regular_file(p)) {
            char hex[24];
            std::snprintf(hex, sizeof(hex), "%016llx",
                          static_cast<unsigned long long>(detail::file_digest(p.string())));
            in[p.filename().string()] = hex;
        }
    j["inputs"] = in;
    std::ofstream out(artifact.string() + ".prov.json", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write provenance for " + artifact.string());
    out << j.dump(2) << '\n';
}

struct Stage {
    int index;
    const char* name;
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
    std::function<void()> run;
    bool enabled = true;
};

}  // namespace detail_pipeline

// Executes the staged experiment. Returns 0 on success or 10+stage_index on
// the first failing stage. Stages whose outputs are newer than their inputs
// are skipped unless force is set.
inline int run_pipeline(const PipelineConfig& cfg, bool force = false,
                        std::ostream& log = std::cerr) {
    const fs::path out = cfg.out_dir;
    const fs::path manifest_csv = out / "manifest.csv";
    const fs::path train_csv = out / "train.csv";
    const fs::path val_csv = out / "val.csv";
    const fs::path aug_dir = out / "aug";
    const fs::path aug_csv = out / "aug.csv";
    const bool augmented = cfg.augment_effect != "none";
    const fs::path fit_csv = augmented ? aug_csv : train_csv;
    const fs::path query_csv = cfg.query_manifest ? *cfg.query_manifest : val_csv;
    auto desc_pair = [&](const char* stem) {
        return std::pair<fs::path, fs::path>(out / (std::string(stem) + ".bin"),
                                             out / (std::string(stem) + ".json"));
    };
    const auto [fit_bin, fit_json] = desc_pair("train_desc");
    const auto [val_bin, val_json] = desc_pair("val_desc");
    const auto [map_bin, map_json] = desc_pair("map_desc");
    const auto [query_bin, query_json] = desc_pair("query_desc");
    const fs::path model_path = out / "model.hlcm";
    const fs::path results_csv = out / "results.csv";
    const fs::path report_json = out / "report.json";
    const fs::path report_txt = out / "report.txt";

    std::error_code ec;
    fs::create_directories(out, ec);

    nlohmann::json seeds = {{"augment_seed", cfg.augment_seed}, {"train_seed", cfg.train.seed}};

    auto describe_to = [&](const fs::path& src_manifest, const fs::path& bin, const fs::path& json) {
        Manifest m = load_manifest(src_manifest);
        DescriptorSet ds = describe_manifest(m, cfg.describe, src_manifest.filename().string());
        save_descriptors(ds, bin, json);
        detail_pipeline::write_provenance(bin, {src_manifest}, seeds);
    };

    std::vector<detail_pipeline::Stage> stages;

    stages.push_back({0, "ingest", {cfg.corpus_root}, {manifest_csv}, [&] {
        IngestLayout layout;
        layout.condition = cfg.condition;
        Manifest m = ingest(cfg.corpus_root, layout);
        save_manifest(m, manifest_csv);
        detail_pipeline::write_provenance(manifest_csv, {}, seeds);
    }});

    stages.push_back({1, "split", {manifest_csv}, {train_csv, val_csv}, [&] {
        Manifest m = load_manifest(manifest_csv);
        auto [train, val] = interleave_validation(m, cfg.spacing);
        save_manifest(train, train_csv);
        save_manifest(val, val_csv);
        detail_pipeline::write_provenance(train_csv, {manifest_csv}, seeds);
        detail_pipeline::write_provenance(val_csv, {manifest_csv}, seeds);
    }});

    stages.push_back({2, "augment", {train_csv}, {aug_csv}, [&] {
        Manifest train = load_manifest(train_csv);
        Manifest aug = build_augmented_dataset(train, parse_recipe(cfg.augment_effect),
                                               cfg.augment_seed, aug_dir, cfg.rotation_levels);
        save_manifest(aug, aug_csv);
        detail_pipeline::write_provenance(aug_csv, {train_csv}, seeds);
    }, augmented});

    stages.push_back({3, "describe", {fit_csv, train_csv, val_csv, query_csv},
                      {fit_bin, val_bin, map_bin, query_bin}, [&] {
        describe_to(fit_csv, fit_bin, fit_json);
        describe_to(val_csv, val_bin, val_json);
        describe_to(train_csv, map_bin, map_json);  // baseline split is the visual map
        describe_to(query_csv, query_bin, query_json);
    }});

    stages.push_back({4, "train", {fit_bin, val_bin, fit_csv, val_csv}, {model_path}, [&] {
        DescriptorSet fit_ds = load_descriptors(fit_bin, fit_json);
        DescriptorSet val_ds = load_descriptors(val_bin, val_json);
        Manifest fit_m = load_manifest(fit_csv);
        Manifest val_m = load_manifest(val_csv);
        auto fit_labels = labels_from_manifest(fit_ds, fit_m);
        auto val_labels = labels_from_manifest(val_ds, val_m, fit_m.rooms);
        SoftmaxModel model = train(fit_ds, fit_labels, val_ds, val_labels, fit_m.rooms, cfg.train);
        save_model(model, model_path);
        detail_pipeline::write_provenance(model_path, {fit_bin, val_bin}, seeds);
    }});

    stages.push_back({5, "localize", {model_path, map_bin, train_csv, query_bin, query_csv},
                      {results_csv}, [&] {
        SoftmaxModel model = load_model(model_path);
        Manifest map_m = load_manifest(train_csv);
        DescriptorSet map_ds = load_descriptors(map_bin, map_json);
        DescriptorSet queries = load_descriptors(query_bin, query_json);
        Manifest truth = load_manifest(query_csv);
        VisualMap map = VisualMap::build(map_m, map_ds);
        auto batch = batch_localize(&model, map, queries, cfg.mode);
        for (auto& entry : batch) {
            if (entry.result && !cfg.timing) entry.result->elapsed_ms = 0.0;
            if (!entry.error.empty())
                throw std::runtime_error("query " + entry.query_id + " failed: " + entry.error);
        }
        save_results_csv(results_csv, batch, cfg.mode, truth);
        detail_pipeline::write_provenance(results_csv, {model_path, map_bin, query_bin}, seeds);
    }});

    stages.push_back({6, "eval", {results_csv, query_csv}, {report_json, report_txt}, [&] {
        auto rows = load_results_csv(results_csv);
        Manifest truth = load_manifest(query_csv);
        write_report(rows, truth, report_json, report_txt);
        detail_pipeline::write_provenance(report_json, {results_csv}, seeds);
    }});

    for (auto& stage : stages) {
        if (!stage.enabled) {
            log << "[hloc] stage " << stage.name << ": skipped (not configured)\n";
            continue;
        }
        if (!force && detail_pipeline::outputs_fresh(stage.outputs, stage.inputs)) {
            log << "[hloc] stage " << stage.name << ": up to date\n";
            continue;
        }
        try {
            stage.run();
            log << "[hloc] stage " << stage.name << ": done\n";
        } catch (const std::exception& e) {
            log << "[hloc] stage " << stage.name << " failed: " << e.what() << "\n";
            return 10 + stage.index;
        }
    }
    return 0;
}

}  // namespace hloc
