#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "qck/annotations.hpp"
#include "qck/density_io.hpp"
#include "qck/parallel.hpp"
#include "qck/sampling.hpp"
#include "qck/train.hpp"

namespace qck::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) { return splitmix64(seed ^ splitmix64(index)); }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
    const fs::path probe = fs::path(dir) / ".qck_write_probe";
    {
        std::ofstream f(probe);
        if (!f) throw IoError("output directory " + dir + " is not writable");
    }
    fs::remove(probe, ec);
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p);
    if (!f) throw IoError("cannot write " + p.string());
    f << std::setprecision(10);
    return f;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw FormatError("cannot parse integer list '" + csv + "'");
        }
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw FormatError("cannot parse number list '" + csv + "'");
        }
    }
    return out;
}

std::string level_tag(const Level& l) { return "L" + l.to_string(); }

struct Dataset {
    std::vector<GrayImage> images;
    std::vector<AnnotationSet> annotations;
};

Dataset load_dataset(const std::vector<ManifestEntry>& entries, bool with_images) {
    Dataset d;
    for (const auto& e : entries) {
        d.annotations.push_back(load_annotations(e.annotation));
        if (with_images) {
            d.images.push_back(read_pgm(e.image));
            const auto& a = d.annotations.back();
            if (d.images.back().width != a.width() || d.images.back().height != a.height())
                throw ValidationError(e.image + ": image size does not match annotation " + e.annotation);
        }
    }
    return d;
}

// --- gen synth ------------------------------------------------------------

struct SynthArgs {
    std::string out;
    int n_images = 10;
    int points = 50;
    int points_jitter = 0;
    int width = 224;
    int height = 224;
    std::string layout = "uniform";
    int clusters = 4;
    double spread = 20.0;
    double blob_sigma = 2.0;
};

int cmd_gen_synth(const SynthArgs& a, std::uint64_t seed, std::ostream& out) {
    if (a.n_images < 1) throw ValidationError("--n-images must be >= 1");
    if (a.points_jitter < 0 || a.points_jitter > a.points) throw ValidationError("--points-jitter must be in [0, points]");
    if (a.layout != "uniform" && a.layout != "clustered") throw ValidationError("--layout must be uniform or clustered");
    ensure_dir(a.out);
    json manifest = json::array();
    for (int i = 0; i < a.n_images; ++i) {
        SceneSpec spec;
        spec.width = a.width;
        spec.height = a.height;
        spec.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
        spec.blob_sigma = a.blob_sigma;
        if (a.layout == "clustered") spec.layout = ClusteredLayout{a.clusters, a.spread};
        spec.n_points = a.points;
        if (a.points_jitter > 0) {
            const auto span = static_cast<std::uint64_t>(2 * a.points_jitter + 1);
            spec.n_points = a.points - a.points_jitter + static_cast<int>(splitmix64(spec.seed) % span);
        }
        std::ostringstream id;
        id << "scene_" << std::setw(4) << std::setfill('0') << i;
        spec.image_id = id.str();
        const SyntheticScene scene = gen_synthetic_scene(spec);
        write_pgm((fs::path(a.out) / (spec.image_id + ".pgm")).string(), scene.image);
        save_annotations((fs::path(a.out) / (spec.image_id + ".json")).string(), scene.annotations);
        manifest.push_back(spec.image_id + ".json");
    }
    auto mf = open_out(fs::path(a.out) / "manifest.json");
    mf << manifest.dump(2) << '\n';
    out << "wrote " << a.n_images << " scenes to " << a.out << '\n';
    return kOk;
}

// --- gen targets ----------------------------------------------------------

int cmd_gen_targets(const PipelineConfig& cfg, const std::string& dir, int downsample, std::ostream& out) {
    const auto entries = load_manifest(cfg.manifest);
    const Dataset d = load_dataset(entries, false);
    ensure_dir(dir);
    std::size_t written = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& ann = d.annotations[i];
        const DensityStack stack = build_target_stack(ann, cfg.loss.levels, cfg.kernel, downsample);
        const std::string stem = fs::path(entries[i].annotation).stem().string();
        for (const auto& m : stack.maps) {
            save_qdm((fs::path(dir) / (stem + "_" + level_tag(m.level) + ".qdm")).string(), m);
            ++written;
        }
    }
    out << "wrote " << written << " density rasters to " << dir << '\n';
    return kOk;
}

// --- stats ----------------------------------------------------------------

int cmd_stats(const std::string& manifest, const std::string& out_path, std::ostream& out) {
    const auto entries = load_manifest(manifest);
    const Dataset d = load_dataset(entries, false);
    const StatsReport r = dataset_stats(d.annotations);
    const json j = {{"n_images", r.n_images},       {"n_annotations", r.n_annotations}, {"min_count", r.min_count},
                    {"max_count", r.max_count},     {"mean_count", r.mean_count},       {"median_count", r.median_count},
                    {"mean_height", r.mean_height}, {"mean_width", r.mean_width},       {"mean_density", r.mean_density}};
    if (!out_path.empty()) {
        auto f = open_out(out_path);
        f << j.dump(2) << '\n';
    }
    out << j.dump(2) << '\n';
    return kOk;
}

// --- train ----------------------------------------------------------------

std::vector<TrainSample> make_samples(const Dataset& d, std::size_t begin, std::size_t end, const PipelineConfig& cfg) {
    std::vector<TrainSample> out;
    for (std::size_t i = begin; i < end; ++i) {
        const auto patches = sample_patches(d.images[i], d.annotations[i], cfg.sampling.patch_sizes,
                                            cfg.sampling.patches_per_image, derive_seed(cfg.seed, i));
        for (const auto& p : patches)
            out.push_back(make_training_sample(p, cfg.model.input_size, cfg.loss.levels, cfg.kernel, cfg.model.downsample));
    }
    return out;
}

int cmd_train(const PipelineConfig& cfg, std::ostream& out) {
    cfg.validate();
    const auto entries = load_manifest(cfg.manifest);
    if (entries.empty()) throw ValidationError("manifest is empty");
    const Dataset d = load_dataset(entries, true);
    const std::size_t n = entries.size();
    const auto n_val = static_cast<std::size_t>(static_cast<double>(n) * cfg.sampling.val_fraction);
    const auto train_set = make_samples(d, 0, n - n_val, cfg);
    const auto val_set = make_samples(d, n - n_val, n, cfg);

    ensure_dir(cfg.output_dir);
    const fs::path dir(cfg.output_dir);
    {
        auto f = open_out(dir / "config.json");
        f << to_json(cfg) << '\n';
    }
    auto hist = open_out(dir / "history.csv");
    hist << "# config: config.json\n";
    hist << "epoch,lr,train_loss,val_loss,val_c_mae\n";
    const TrainResult r = train(train_set, val_set, cfg.model, cfg.train, cfg.loss, [&](const EpochRecord& e) {
        hist << e.epoch << ',' << e.lr << ',' << e.train_loss << ',' << e.val_loss << ',' << e.val_c_mae << '\n';
        hist.flush();
        out << "epoch " << e.epoch << " lr " << e.lr << " train_loss " << e.train_loss << " val_loss " << e.val_loss
            << " val_c_mae " << e.val_c_mae << '\n';
    });
    save_checkpoint((dir / "checkpoint.qcp").string(), r.params);
    out << "best epoch " << r.best_epoch << "; checkpoint written to " << (dir / "checkpoint.qcp").string() << '\n';
    return kOk;
}

// --- evaluate -------------------------------------------------------------

void check_checkpoint_matches(const ModelConfig& ckpt, const ModelConfig& cfg) {
    auto mismatch = [](const std::string& field, const std::string& a, const std::string& b) {
        throw ValidationError("checkpoint/config mismatch: " + field + " is " + a + " in the checkpoint but " + b +
                              " in the config");
    };
    if (ckpt.input_size != cfg.input_size)
        mismatch("input_size", std::to_string(ckpt.input_size), std::to_string(cfg.input_size));
    if (ckpt.downsample != cfg.downsample)
        mismatch("downsample", std::to_string(ckpt.downsample), std::to_string(cfg.downsample));
    if (ckpt.channels != cfg.channels) mismatch("channels", "different", "different");
    if (ckpt.levels != cfg.levels) mismatch("levels", std::to_string(ckpt.levels.size()) + " heads",
                                            std::to_string(cfg.levels.size()) + " heads");
    if (ckpt.fusion != cfg.fusion) mismatch("fusion", to_string(ckpt.fusion), to_string(cfg.fusion));
    if (ckpt.head_width != cfg.head_width || ckpt.count_hidden != cfg.count_hidden)
        mismatch("head widths", "different", "different");
}

void write_eval_outputs(const EvaluationReport& rep, const fs::path& dir, const std::vector<int>& at_thresholds,
                        std::ostream& out) {
    {
        auto f = open_out(dir / "metrics.csv");
        f << "image_id,gt_count,pred_count,abs_err\n";
        double gt = 0, pred = 0;
        for (const auto& im : rep.images) {
            f << im.image_id << ',' << im.gt_count << ',' << im.pred_count << ',' << std::abs(im.pred_count - im.gt_count)
              << '\n';
            gt += im.gt_count;
            pred += im.pred_count;
        }
        const double n = static_cast<double>(rep.images.size());
        f << "summary," << gt / n << ',' << pred / n << ',' << rep.counts.c_mae << '\n';
    }
    json s = {{"n_images", rep.images.size()},
              {"c_mae", rep.counts.c_mae},
              {"c_mse", rep.counts.c_mse},
              {"c_nae", rep.has_nae ? json(rep.counts.c_nae) : json(nullptr)},
              {"hi_images", rep.hi_images},
              {"dm_mae", rep.density.dm_mae},
              {"dm_mse", rep.density.dm_mse},
              {"dm_hi", rep.hi_images ? json(rep.density.dm_hi) : json(nullptr)}};
    if (rep.curve) {
        auto f = open_out(dir / "pr_curve.csv");
        f << "threshold,precision,recall\n";
        for (std::size_t i = 0; i < rep.curve->thresholds.size(); ++i)
            f << rep.curve->thresholds[i] << ',' << rep.curve->precision[i] << ',' << rep.curve->recall[i] << '\n';
        s["l_auc"] = rep.curve->l_auc;
        const std::vector<int> all = rep.curve->thresholds;
        const auto avg_all = average_at_thresholds(*rep.curve, all);
        s["avg_precision"] = avg_all.precision;
        s["avg_recall"] = avg_all.recall;
        if (!at_thresholds.empty()) {
            const auto avg = average_at_thresholds(*rep.curve, at_thresholds);
            s["at_thresholds"] = {{"thresholds", at_thresholds}, {"precision", avg.precision}, {"recall", avg.recall}};
        }
    }
    auto f = open_out(dir / "summary.json");
    f << std::setprecision(17) << s.dump(2) << '\n';
    out << s.dump(2) << '\n';
}

}  // namespace

EvaluationReport evaluate_dataset(const std::vector<ManifestEntry>& entries, const ModelParams* params,
                                  const PipelineConfig& cfg, const EvaluationOptions& opts) {
    if (!opts.oracle_gt && params == nullptr) throw ValidationError("evaluate: a checkpoint is required");
    const ModelConfig& mc = params ? params->config : cfg.model;
    const std::vector<Level>& levels = mc.levels;
    const int cell = cfg.eval.cell_size;
    const int ms = mc.map_size();
    if (cell % ms) throw ValidationError("evaluate: cell size is not a multiple of the head-map size");
    const int factor = cell / ms;

    EvaluationReport rep;
    std::vector<double> pred_counts, gt_counts;
    std::vector<PRCurve> curves;
    std::vector<std::size_t> n_preds, n_gts;
    for (const auto& e : entries) {
        const AnnotationSet ann = load_annotations(e.annotation);
        const GrayImage img = read_pgm(e.image);
        if (img.width != ann.width() || img.height != ann.height())
            throw ValidationError(e.image + ": image size does not match annotation");
        const TileGrid grid = tile_image(img, cell);

        std::vector<DensityMap> pred_maps, gt_maps;
        for (const Level& l : levels) {
            pred_maps.push_back({l, Raster<double>(grid.cols * ms, grid.rows * ms, 0.0)});
            gt_maps.push_back({l, Raster<double>(grid.cols * ms, grid.rows * ms, 0.0)});
        }
        std::vector<double> cell_counts;
        std::vector<Point> oracle_points;
        for (std::size_t c = 0; c < grid.cells.size(); ++c) {
            const Patch patch = extract_cell(img, ann, grid, c);
            const TrainSample s = make_training_sample(patch, mc.input_size, levels, cfg.kernel, mc.downsample);
            DensityStack pred;
            if (opts.oracle_gt) {
                pred = s.target;
                cell_counts.push_back(s.target.count);
                if (opts.localize) {
                    const DensityMap full = render_localization(patch.ann_subset, cell, cell);
                    for (Point p : decode_impulses(full)) oracle_points.push_back({p.x + patch.x, p.y + patch.y});
                }
            } else {
                const Prediction pr = forward(*params, s.patch);
                cell_counts.push_back(predicted_count(pr, mc.fusion));
                pred = pr.stack;
            }
            const int ox = (grid.cells[c].x / cell) * ms;
            const int oy = (grid.cells[c].y / cell) * ms;
            for (std::size_t l = 0; l < levels.size(); ++l)
                for (int y = 0; y < ms; ++y)
                    for (int x = 0; x < ms; ++x) {
                        pred_maps[l].grid.at(ox + x, oy + y) = pred.maps[l].grid.at(x, y);
                        gt_maps[l].grid.at(ox + x, oy + y) = s.target.maps[l].grid.at(x, y);
                    }
        }

        ImageResult r;
        r.image_id = ann.image_id();
        r.gt_count = static_cast<double>(ann.count());
        r.pred_count = aggregate_counts(cell_counts);
        r.density = density_metrics(pred_maps.front(), gt_maps.front(), false);
        try {
            r.density.dm_hi = histogram_intersection(pred_maps.front().grid, gt_maps.front().grid);
            r.hi_defined = true;
        } catch (const DomainError&) {
            r.hi_defined = false;
        }
        if (opts.localize) {
            std::vector<Point> pts;
            if (opts.oracle_gt) {
                pts = std::move(oracle_points);
            } else {
                const DensityMap& loc = pred_maps.back();
                const double peak = loc.max();
                if (peak > 0.0) {
                    const auto peaks = find_peaks(loc, cfg.eval.peak_threshold_fraction * peak, cfg.eval.peak_radius);
                    pts = peaks_to_image(peaks, factor);
                }
            }
            r.n_pred_points = pts.size();
            r.n_gt_points = ann.count();
            if (ann.count() > 0) {
                r.curve = pr_curve(pts, ann.points());
            } else {
                for (int t = 1; t <= 100; ++t) r.curve.thresholds.push_back(t);
                r.curve.tp.assign(100, 0);
            }
            curves.push_back(r.curve);
            n_preds.push_back(r.n_pred_points);
            n_gts.push_back(r.n_gt_points);
        }
        pred_counts.push_back(r.pred_count);
        gt_counts.push_back(r.gt_count);
        rep.images.push_back(std::move(r));
    }
    if (rep.images.empty()) throw ValidationError("evaluate: manifest is empty");

    rep.has_nae = std::all_of(gt_counts.begin(), gt_counts.end(), [](double g) { return g > 0.0; });
    rep.counts = counting_metrics(pred_counts, gt_counts, rep.has_nae);
    for (const auto& im : rep.images) {
        rep.density.dm_mae += im.density.dm_mae;
        rep.density.dm_mse += im.density.dm_mse;
        if (im.hi_defined) {
            rep.density.dm_hi += im.density.dm_hi;
            ++rep.hi_images;
        }
    }
    const double n_img = static_cast<double>(rep.images.size());
    rep.density.dm_mae /= n_img;
    rep.density.dm_mse /= n_img;
    if (rep.hi_images) rep.density.dm_hi /= static_cast<double>(rep.hi_images);
    if (opts.localize) rep.curve = merge_pr_curves(curves, n_preds, n_gts);
    return rep;
}

namespace {

struct EvalArgs {
    std::string checkpoint;
    std::string out;
    bool localize = false;
    bool oracle = false;
    std::string at_thresholds;
};

int cmd_evaluate(PipelineConfig cfg, bool config_given, const EvalArgs& a, std::ostream& out) {
    const auto entries = load_manifest(cfg.manifest);
    std::optional<ModelParams> params;
    if (!a.oracle) {
        if (a.checkpoint.empty()) throw ValidationError("evaluate: --checkpoint is required without --oracle-gt");
        params = load_checkpoint(a.checkpoint);
        if (config_given) check_checkpoint_matches(params->config, cfg.model);
    }
    const std::vector<int> at = a.at_thresholds.empty() ? std::vector<int>{} : parse_int_list(a.at_thresholds);
    for (int t : at)
        if (t < 1 || t > 100) throw ValidationError("--at-thresholds values must lie in 1..100");
    ensure_dir(a.out);
    const EvaluationReport rep = evaluate_dataset(entries, params ? &*params : nullptr, cfg, {a.localize, a.oracle});
    write_eval_outputs(rep, a.out, at, out);
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"qck: crowd counting, density maps and localization"};
    app.require_subcommand(1);
    std::string config_path;
    int n_threads = 0;
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "Pipeline config JSON")->check(CLI::ExistingFile);
    app.add_option("--threads", n_threads, "Worker threads (default: QCK_THREADS or all cores)");
    auto* seed_opt = app.add_option("--seed", seed, "Master seed");

    // Shared overrides.
    std::string levels_csv, weights_csv, fusion;
    double tau = 0.0;
    auto add_kernel_flags = [&](CLI::App* sc) {
        sc->add_option("--levels", levels_csv, "Density levels, e.g. 1,2,inf");
        sc->add_option("--tau", tau, "Bandwidth cap in pixels");
    };

    auto* gen = app.add_subcommand("gen", "Generate synthetic scenes or target rasters");
    gen->require_subcommand(1);
    SynthArgs synth;
    auto* gsynth = gen->add_subcommand("synth", "Write synthetic scenes (PGM + annotation JSON + manifest)");
    gsynth->add_option("--out", synth.out, "Output directory")->required();
    gsynth->add_option("--n-images", synth.n_images, "Number of scenes");
    gsynth->add_option("--points", synth.points, "Heads per scene");
    gsynth->add_option("--points-jitter", synth.points_jitter, "Per-scene head count varies uniformly by +/- this");
    gsynth->add_option("--width", synth.width, "Scene width");
    gsynth->add_option("--height", synth.height, "Scene height");
    gsynth->add_option("--layout", synth.layout, "uniform or clustered");
    gsynth->add_option("--clusters", synth.clusters, "Cluster count for the clustered layout");
    gsynth->add_option("--spread", synth.spread, "Cluster standard deviation in pixels");
    gsynth->add_option("--blob-sigma", synth.blob_sigma, "Head blob scale in pixels");

    std::string targets_out, manifest;
    int downsample = 1;
    bool no_normalize = false;
    auto* gtargets = gen->add_subcommand("targets", "Render QDM1 density rasters for every annotation file");
    gtargets->add_option("--manifest", manifest, "Dataset manifest")->required();
    gtargets->add_option("--out", targets_out, "Output directory")->required();
    gtargets->add_option("--downsample", downsample, "Block-sum factor");
    gtargets->add_flag("--literal-kernel", no_normalize, "Use the unnormalised kernel prefactor");
    add_kernel_flags(gtargets);

    std::string stats_out;
    auto* stats = app.add_subcommand("stats", "Dataset statistics");
    stats->add_option("--manifest", manifest, "Dataset manifest")->required();
    stats->add_option("--out", stats_out, "Also write the report to this JSON file");

    std::string train_out;
    int epochs = 0, batch = 0, patches_per_image = 0;
    double lr = 0.0, val_fraction = -1.0;
    std::string patch_sizes;
    auto* trn = app.add_subcommand("train", "Train the reference model");
    trn->add_option("--manifest", manifest, "Dataset manifest of (image, annotation) pairs");
    trn->add_option("--out", train_out, "Output directory");
    trn->add_option("--epochs", epochs, "Epochs");
    trn->add_option("--batch-size", batch, "Mini-batch size");
    trn->add_option("--lr", lr, "Initial learning rate");
    trn->add_option("--patch-sizes", patch_sizes, "Comma-separated training patch sizes");
    trn->add_option("--patches-per-image", patches_per_image, "Patches drawn per image");
    trn->add_option("--val-fraction", val_fraction, "Fraction of images held out for validation");
    trn->add_option("--weights", weights_csv, "Loss weights, one per level then count");
    trn->add_option("--fusion", fusion, "regression_only | mean_of_counts | concat_feature");
    add_kernel_flags(trn);

    EvalArgs ev;
    double peak_threshold = -1.0;
    int peak_radius = 0;
    auto* evl = app.add_subcommand("evaluate", "Tile, predict and score a dataset");
    evl->add_option("--manifest", manifest, "Dataset manifest");
    evl->add_option("--checkpoint", ev.checkpoint, "QCP1 checkpoint");
    evl->add_option("--out", ev.out, "Output directory");
    evl->add_flag("--localize", ev.localize, "Also run peak extraction and the PR curve");
    evl->add_flag("--oracle-gt", ev.oracle, "Replay ground-truth targets as predictions");
    evl->add_option("--at-thresholds", ev.at_thresholds, "Average precision/recall at these thresholds");
    evl->add_option("--peak-threshold", peak_threshold, "Peak threshold as a fraction of the map maximum");
    evl->add_option("--peak-radius", peak_radius, "Non-maximum suppression radius at map resolution");
    add_kernel_flags(evl);

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (n_threads > 0) set_threads(n_threads);
        PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : load_pipeline_config(config_path);
        if (seed_opt->count()) {
            cfg.seed = seed;
            cfg.train.seed = seed;
            cfg.model.seed = seed;
        }
        if (!levels_csv.empty()) cfg.loss.levels = parse_levels(levels_csv);
        if (!weights_csv.empty()) cfg.loss.weights = parse_double_list(weights_csv);
        else if (!levels_csv.empty()) cfg.loss.weights.assign(cfg.loss.levels.size() + 1, 1.0);
        if (!fusion.empty()) cfg.loss.fusion_mode = parse_fusion_mode(fusion);
        if (tau > 0.0) cfg.kernel.tau = tau;
        if (!manifest.empty()) cfg.manifest = manifest;
        cfg.sync();

        if (gsynth->parsed()) return cmd_gen_synth(synth, cfg.seed, out);
        if (gtargets->parsed()) {
            if (no_normalize) cfg.kernel.normalize_per_kernel = false;
            return cmd_gen_targets(cfg, targets_out, downsample, out);
        }
        if (stats->parsed()) return cmd_stats(cfg.manifest, stats_out, out);
        if (trn->parsed()) {
            if (!train_out.empty()) cfg.output_dir = train_out;
            if (epochs > 0) cfg.train.epochs = epochs;
            if (trn->count("--epochs") && epochs < 1) throw ValidationError("--epochs must be >= 1");
            if (batch > 0) cfg.train.batch_size = batch;
            if (lr > 0.0) cfg.train.initial_lr = lr;
            if (!patch_sizes.empty()) cfg.sampling.patch_sizes = parse_int_list(patch_sizes);
            if (patches_per_image > 0) cfg.sampling.patches_per_image = patches_per_image;
            if (val_fraction >= 0.0) cfg.sampling.val_fraction = val_fraction;
            if (cfg.manifest.empty()) throw ValidationError("train: --manifest is required");
            if (cfg.output_dir.empty()) throw ValidationError("train: --out is required");
            return cmd_train(cfg, out);
        }
        if (evl->parsed()) {
            if (peak_threshold >= 0.0) cfg.eval.peak_threshold_fraction = peak_threshold;
            if (peak_radius > 0) cfg.eval.peak_radius = peak_radius;
            if (ev.out.empty()) ev.out = cfg.output_dir;
            if (cfg.manifest.empty()) throw ValidationError("evaluate: --manifest is required");
            if (ev.out.empty()) throw ValidationError("evaluate: --out is required");
            return cmd_evaluate(cfg, !config_path.empty(), ev, out);
        }
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kUsage;
}

}  // namespace qck::cli
