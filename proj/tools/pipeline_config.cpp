#include "pipeline_config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace qck::cli {

using nlohmann::json;
namespace fs = std::filesystem;

void PipelineConfig::sync() {
    model.levels = loss.levels;
    model.fusion = loss.fusion_mode;
}

void PipelineConfig::validate() const {
    kernel.validate();
    loss.validate();
    model.validate();
    train.validate();
    if (sampling.patch_sizes.empty()) throw ValidationError("config: sampling.patch_sizes is empty");
    if (sampling.patches_per_image < 1) throw ValidationError("config: patches_per_image must be >= 1");
    if (!(sampling.val_fraction >= 0.0 && sampling.val_fraction < 1.0))
        throw ValidationError("config: val_fraction must be in [0, 1)");
    if (eval.peak_radius < 1) throw ValidationError("config: peak_radius must be >= 1");
    if (eval.cell_size % model.map_size() && eval.cell_size != model.input_size)
        throw ValidationError("config: cell size must be a multiple of the head-map size");
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

// Either an array of levels or a comma-separated string such as "1,2,inf".
std::vector<Level> read_levels(const json& j) {
    if (j.is_string()) return parse_levels(j.get<std::string>());
    std::vector<Level> out;
    for (const auto& v : j) out.push_back(v.is_string() ? Level::parse(v.get<std::string>()) : Level::finite(v.get<double>()));
    return out;
}

json levels_json(const std::vector<Level>& levels) {
    json out = json::array();
    for (const Level& l : levels) out.push_back(l.to_string());
    return out;
}

}  // namespace

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
    PipelineConfig c;
    try {
        read(j, "seed", c.seed);
        c.model.seed = c.train.seed = c.seed;  // section-level seeds override
        if (j.contains("kernel")) {
            const auto& k = j["kernel"];
            read(k, "tau", c.kernel.tau);
            read(k, "normalize_per_kernel", c.kernel.normalize_per_kernel);
            read(k, "truncation_radius_sigmas", c.kernel.truncation_radius_sigmas);
            read(k, "min_sigma", c.kernel.min_sigma);
        }
        if (j.contains("loss")) {
            const auto& l = j["loss"];
            if (l.contains("levels")) c.loss.levels = read_levels(l["levels"]);
            read(l, "weights", c.loss.weights);
            if (l.contains("fusion_mode")) c.loss.fusion_mode = parse_fusion_mode(l["fusion_mode"].get<std::string>());
        }
        if (j.contains("model")) {
            const auto& m = j["model"];
            read(m, "input_size", c.model.input_size);
            read(m, "downsample", c.model.downsample);
            read(m, "channels", c.model.channels);
            read(m, "head_width", c.model.head_width);
            read(m, "count_hidden", c.model.count_hidden);
            read(m, "seed", c.model.seed);
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            read(t, "initial_lr", c.train.initial_lr);
            read(t, "lr_decay", c.train.lr_decay);
            read(t, "decay_every", c.train.decay_every);
            read(t, "epochs", c.train.epochs);
            read(t, "batch_size", c.train.batch_size);
            read(t, "seed", c.train.seed);
        }
        if (j.contains("sampling")) {
            const auto& s = j["sampling"];
            read(s, "patch_sizes", c.sampling.patch_sizes);
            read(s, "patches_per_image", c.sampling.patches_per_image);
            read(s, "val_fraction", c.sampling.val_fraction);
        }
        if (j.contains("eval")) {
            const auto& e = j["eval"];
            read(e, "peak_threshold_fraction", c.eval.peak_threshold_fraction);
            read(e, "peak_radius", c.eval.peak_radius);
            read(e, "cell_size", c.eval.cell_size);
        }
        if (j.contains("paths")) {
            read(j["paths"], "manifest", c.manifest);
            read(j["paths"], "output_dir", c.output_dir);
        }
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    c.sync();
    return c;
}

std::string to_json(const PipelineConfig& c) {
    json j = {
        {"seed", c.seed},
        {"kernel",
         {{"tau", c.kernel.tau},
          {"normalize_per_kernel", c.kernel.normalize_per_kernel},
          {"truncation_radius_sigmas", c.kernel.truncation_radius_sigmas},
          {"min_sigma", c.kernel.min_sigma}}},
        {"loss",
         {{"levels", levels_json(c.loss.levels)},
          {"weights", c.loss.weights},
          {"fusion_mode", to_string(c.loss.fusion_mode)}}},
        {"model",
         {{"input_size", c.model.input_size},
          {"downsample", c.model.downsample},
          {"channels", c.model.channels},
          {"head_width", c.model.head_width},
          {"count_hidden", c.model.count_hidden},
          {"seed", c.model.seed}}},
        {"train",
         {{"initial_lr", c.train.initial_lr},
          {"lr_decay", c.train.lr_decay},
          {"decay_every", c.train.decay_every},
          {"epochs", c.train.epochs},
          {"batch_size", c.train.batch_size},
          {"seed", c.train.seed}}},
        {"sampling",
         {{"patch_sizes", c.sampling.patch_sizes},
          {"patches_per_image", c.sampling.patches_per_image},
          {"val_fraction", c.sampling.val_fraction}}},
        {"eval", {{"peak_threshold_fraction", c.eval.peak_threshold_fraction}, {"peak_radius", c.eval.peak_radius}, {"cell_size", c.eval.cell_size}}},
        {"paths", {{"manifest", c.manifest}, {"output_dir", c.output_dir}}},
    };
    return j.dump(2);
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
    if (!j.is_array()) throw FormatError(path + ": manifest must be a JSON array");
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        const fs::path fp(p);
        return (fp.is_absolute() ? fp : base / fp).lexically_normal().string();
    };
    std::vector<ManifestEntry> out;
    for (const auto& item : j) {
        ManifestEntry e;
        if (item.is_string()) {
            e.annotation = resolve(item.get<std::string>());
            e.image = fs::path(e.annotation).replace_extension(".pgm").string();
        } else if (item.is_object() && item.contains("annotation")) {
            e.annotation = resolve(item["annotation"].get<std::string>());
            e.image = item.contains("image") ? resolve(item["image"].get<std::string>())
                                             : fs::path(e.annotation).replace_extension(".pgm").string();
        } else {
            throw FormatError(path + ": manifest entries must be paths or {annotation, image} objects");
        }
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace qck::cli
