// hloc: hierarchical visual localization toolkit.
//
// Pipeline: ingest -> split -> augment -> describe/import-desc -> train ->
// localize -> eval, plus a one-command `reproduce` driver.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hloc/hloc.hpp"

namespace {

using namespace hloc;

int cmd_ingest(const std::string& root, const std::string& out_path,
               const std::string& condition) {
    IngestLayout layout;
    if (!condition.empty()) layout.condition = parse_condition(condition);
    Manifest m = ingest(root, layout);
    save_manifest(m, out_path);
    std::cout << "ingested " << m.records.size() << " records, " << m.rooms.size()
              << " rooms -> " << out_path << "\n";
    return 0;
}

int cmd_split(const std::string& manifest_path, double spacing, const std::string& train_out,
              const std::string& val_out) {
    Manifest m = load_manifest(manifest_path);
    auto [train, val] = interleave_validation(m, spacing);
    save_manifest(train, train_out);
    save_manifest(val, val_out);
    std::cout << "split " << m.records.size() << " records -> train " << train.records.size()
              << ", val " << val.records.size() << "\n";
    return 0;
}

int cmd_augment(const std::string& manifest_path, const std::string& effect, std::uint64_t seed,
                const std::string& out_dir, int levels) {
    Manifest m = load_manifest(manifest_path);
    Manifest aug = build_augmented_dataset(m, parse_recipe(effect), seed, out_dir, levels);
    fs::path out_csv = fs::path(out_dir) / "manifest.csv";
    save_manifest(aug, out_csv);
    std::cout << "augmented " << m.records.size() << " -> " << aug.records.size()
              << " records (" << effect << ") -> " << out_csv.string() << "\n";
    return 0;
}

int cmd_describe(const std::string& manifest_path, const std::string& method,
                 const std::string& out_path, const DescribeOptions& base) {
    DescribeOptions opt = base;
    if (method == "hog") opt.method = DescriptorMethod::hog;
    else if (method == "blockmean") opt.method = DescriptorMethod::blockmean;
    else throw std::runtime_error("method must be hog or blockmean");

    Manifest m = load_manifest(manifest_path);
    DescriptorSet ds = describe_manifest(m, opt, fs::path(manifest_path).filename().string());
    fs::path bin = out_path;
    fs::path sidecar = fs::path(out_path).replace_extension(".json");
    save_descriptors(ds, bin, sidecar);
    std::cout << "described " << ds.rows.size() << " images, dim " << ds.dim << " -> "
              << bin.string() << " + " << sidecar.string() << "\n";
    return 0;
}

int cmd_import_desc(const std::string& values, const std::string& ids,
                    const std::string& manifest_path, const std::string& out_path) {
    DescriptorSet ds = load_descriptors(values, ids);
    if (!manifest_path.empty()) {
        Manifest m = load_manifest(manifest_path);
        align_with_manifest(ds, m);
        std::cout << "aligned against " << manifest_path << "\n";
    }
    if (!out_path.empty()) {
        save_descriptors(ds, out_path, fs::path(out_path).replace_extension(".json"));
        std::cout << "normalized copy -> " << out_path << "\n";
    }
    std::cout << "imported " << ds.rows.size() << " descriptors, dim " << ds.dim << ", method "
              << ds.method_name << "\n";
    return 0;
}

int cmd_train(const std::string& train_desc, const std::string& val_desc,
              const std::string& train_manifest, const std::string& val_manifest,
              const TrainConfig& cfg, const std::string& out_path) {
    auto sidecar_of = [](const std::string& bin) {
        return fs::path(bin).replace_extension(".json");
    };
    DescriptorSet fit_ds = load_descriptors(train_desc, sidecar_of(train_desc));
    DescriptorSet val_ds = load_descriptors(val_desc, sidecar_of(val_desc));

    // Labels come from the manifests; by default the ones the sidecars
    // reference, resolved next to the descriptor files.
    auto resolve_manifest = [&](const std::string& explicit_path, const DescriptorSet& ds,
                                const std::string& bin) {
        if (!explicit_path.empty()) return fs::path(explicit_path);
        if (ds.manifest_ref.empty())
            throw std::runtime_error("descriptor sidecar for " + bin +
                                     " names no manifest; pass --train-manifest/--val-manifest");
        fs::path ref = ds.manifest_ref;
        if (ref.is_relative()) ref = fs::path(bin).parent_path() / ref;
        return ref;
    };
    Manifest fit_m = load_manifest(resolve_manifest(train_manifest, fit_ds, train_desc));
    Manifest val_m = load_manifest(resolve_manifest(val_manifest, val_ds, val_desc));

    auto fit_labels = labels_from_manifest(fit_ds, fit_m);
    auto val_labels = labels_from_manifest(val_ds, val_m, fit_m.rooms);
    SoftmaxModel model = train(fit_ds, fit_labels, val_ds, val_labels, fit_m.rooms, cfg);
    save_model(model, out_path);

    double val_acc = accuracy(model, val_ds, val_labels);
    std::cout << "trained R=" << model.num_rooms() << " m=" << model.dim
              << ", best validation accuracy " << val_acc * 100.0 << "% -> " << out_path << "\n";
    return 0;
}

int cmd_localize(const std::string& model_path, const std::string& map_desc,
                 const std::string& map_manifest, const std::string& query_desc,
                 const std::string& query_manifest, const std::string& mode_str,
                 const std::string& out_path) {
    auto sidecar_of = [](const std::string& bin) {
        return fs::path(bin).replace_extension(".json");
    };
    LocalizeMode mode = parse_mode(mode_str);
    SoftmaxModel model;
    if (mode == LocalizeMode::hierarchical) model = load_model(model_path);

    Manifest map_m = load_manifest(map_manifest);
    DescriptorSet map_ds = load_descriptors(map_desc, sidecar_of(map_desc));
    DescriptorSet queries = load_descriptors(query_desc, sidecar_of(query_desc));

    std::string truth_path = query_manifest;
    if (truth_path.empty()) {
        if (queries.manifest_ref.empty())
            throw std::runtime_error("query sidecar names no manifest; pass --query-manifest");
        fs::path ref = queries.manifest_ref;
        if (ref.is_relative()) ref = fs::path(query_desc).parent_path() / ref;
        truth_path = ref.string();
    }
    Manifest truth = load_manifest(truth_path);

    VisualMap map = VisualMap::build(map_m, map_ds);
    auto batch = batch_localize(mode == LocalizeMode::hierarchical ? &model : nullptr, map,
                                queries, mode);
    std::size_t failed = 0;
    double mean_ms = 0.0;
    for (const auto& e : batch) {
        if (!e.result) {
            ++failed;
            std::cerr << "query " << e.query_id << " failed: " << e.error << "\n";
        } else {
            mean_ms += e.result->elapsed_ms;
        }
    }
    save_results_csv(out_path, batch, mode, truth);
    std::size_t ok = batch.size() - failed;
    if (ok) mean_ms /= static_cast<double>(ok);
    std::cout << "localized " << ok << "/" << batch.size() << " queries, mean " << mean_ms
              << " ms -> " << out_path << "\n";
    return failed == 0 ? 0 : 1;
}

int cmd_eval(const std::string& results_path, const std::string& truth_path,
             const std::string& out_json) {
    auto rows = load_results_csv(results_path);
    Manifest truth = load_manifest(truth_path);
    fs::path json_path = out_json;
    fs::path text_path = fs::path(out_json).replace_extension(".txt");
    EvalReport report = write_report(rows, truth, json_path, text_path);
    std::cout << render_report_text(report);
    std::cout << "report -> " << json_path.string() << " + " << text_path.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hloc: hierarchical visual localization from panoramic images"};
    app.require_subcommand(1);

    std::string root, manifest, out, condition, effect = "spotlight", method = "blockmean";
    std::string values, ids, train_desc, val_desc, train_manifest, val_manifest;
    std::string model_path, map_desc, map_manifest, query_desc, query_manifest;
    std::string results_path, truth_path, mode = "hierarchical", config_path;
    double spacing = 0.20;
    std::uint64_t seed = 1;
    int levels = 35;
    bool force = false;
    DescribeOptions desc_opt;
    TrainConfig train_cfg;

    auto* ingest_cmd = app.add_subcommand("ingest", "Scan a corpus directory into a manifest CSV");
    ingest_cmd->add_option("--root", root, "corpus root (one directory per room)")->required();
    ingest_cmd->add_option("--out", out, "output manifest CSV")->required();
    ingest_cmd->add_option("--condition", condition, "fixed lighting condition for every record");

    auto* split_cmd = app.add_subcommand("split", "Interleaved train/validation split at a spatial spacing");
    split_cmd->add_option("--manifest", manifest)->required();
    split_cmd->add_option("--spacing", spacing, "spacing in meters (default 0.20)");
    std::string train_out, val_out;
    split_cmd->add_option("--train", train_out, "output training manifest")->required();
    split_cmd->add_option("--val", val_out, "output validation manifest")->required();

    auto* augment_cmd = app.add_subcommand("augment", "Build an augmented training dataset");
    augment_cmd->add_option("--manifest", manifest)->required();
    augment_cmd->add_option("--effect", effect,
                            "spotlight|shadow|brightdark|contrast|saturation|rotation")->required();
    augment_cmd->add_option("--seed", seed, "RNG seed (default 1)");
    augment_cmd->add_option("--out", out, "output directory")->required();
    augment_cmd->add_option("--levels", levels, "rotation levels (default 35)");

    auto* describe_cmd = app.add_subcommand("describe", "Extract holistic descriptors for a manifest");
    describe_cmd->add_option("--manifest", manifest)->required();
    describe_cmd->add_option("--method", method, "hog|blockmean")->required();
    describe_cmd->add_option("--out", out, "output descriptor file (.bin)")->required();
    describe_cmd->add_option("--cell", desc_opt.hog_cell, "hog cell size (default 16)");
    describe_cmd->add_option("--bins", desc_opt.hog_bins, "hog orientation bins (default 8)");
    describe_cmd->add_option("--gw", desc_opt.block_gw, "blockmean grid width (default 8)");
    describe_cmd->add_option("--gh", desc_opt.block_gh, "blockmean grid height (default 4)");
    describe_cmd->add_option("--width", desc_opt.resize_width, "resize width before extraction (0 = native)");
    describe_cmd->add_option("--height", desc_opt.resize_height, "resize height before extraction");
    describe_cmd->add_flag("--l2norm", desc_opt.l2norm, "L2-normalize each descriptor");

    auto* import_cmd = app.add_subcommand("import-desc", "Validate externally computed descriptors");
    import_cmd->add_option("--values", values, "binary descriptor file")->required();
    import_cmd->add_option("--ids", ids, "JSON sidecar with row ids")->required();
    import_cmd->add_option("--manifest", manifest, "manifest to align against");
    import_cmd->add_option("--out", out, "write a normalized copy here");

    auto* train_cmd = app.add_subcommand("train", "Train the softmax room classifier");
    train_cmd->add_option("--train-desc", train_desc)->required();
    train_cmd->add_option("--val-desc", val_desc)->required();
    train_cmd->add_option("--train-manifest", train_manifest, "labels for the training set");
    train_cmd->add_option("--val-manifest", val_manifest, "labels for the validation set");
    train_cmd->add_option("--epochs", train_cfg.epochs, "default 30");
    train_cmd->add_option("--batch", train_cfg.batch_size, "default 16");
    train_cmd->add_option("--lr", train_cfg.learning_rate, "default 0.001");
    train_cmd->add_option("--momentum", train_cfg.momentum, "default 0.9");
    train_cmd->add_option("--seed", train_cfg.seed, "default 0");
    train_cmd->add_option("--out", out, "output model file")->required();

    auto* localize_cmd = app.add_subcommand("localize", "Coarse-to-fine (or flat) position retrieval");
    localize_cmd->add_option("--model", model_path, "softmax model (hierarchical mode)");
    localize_cmd->add_option("--map-desc", map_desc)->required();
    localize_cmd->add_option("--map-manifest", map_manifest)->required();
    localize_cmd->add_option("--query-desc", query_desc)->required();
    localize_cmd->add_option("--query-manifest", query_manifest, "truth manifest for the queries");
    localize_cmd->add_option("--mode", mode, "hierarchical|global (default hierarchical)");
    localize_cmd->add_option("--out", out, "output results CSV")->required();

    auto* eval_cmd = app.add_subcommand("eval", "Metrics report from a results CSV");
    eval_cmd->add_option("--results", results_path)->required();
    eval_cmd->add_option("--truth", truth_path, "query manifest with conditions and poses")->required();
    eval_cmd->add_option("--out", out, "output report JSON (text table written alongside)")->required();

    auto* repro_cmd = app.add_subcommand("reproduce", "Run the full pipeline from a config file");
    repro_cmd->add_option("--config", config_path)->required();
    repro_cmd->add_flag("--force", force, "re-run stages even when outputs are fresh");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(ingest_cmd)) return cmd_ingest(root, out, condition);
        if (app.got_subcommand(split_cmd)) return cmd_split(manifest, spacing, train_out, val_out);
        if (app.got_subcommand(augment_cmd)) return cmd_augment(manifest, effect, seed, out, levels);
        if (app.got_subcommand(describe_cmd)) return cmd_describe(manifest, method, out, desc_opt);
        if (app.got_subcommand(import_cmd)) return cmd_import_desc(values, ids, manifest, out);
        if (app.got_subcommand(train_cmd))
            return cmd_train(train_desc, val_desc, train_manifest, val_manifest, train_cfg, out);
        if (app.got_subcommand(localize_cmd))
            return cmd_localize(model_path, map_desc, map_manifest, query_desc, query_manifest,
                                mode, out);
        if (app.got_subcommand(eval_cmd)) return cmd_eval(results_path, truth_path, out);
        if (app.got_subcommand(repro_cmd)) {
            hloc::PipelineConfig cfg = hloc::PipelineConfig::parse_file(config_path);
            return hloc::run_pipeline(cfg, force);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
