#pragma once

#include <string>
#include <vector>

#include "qck/density.hpp"
#include "qck/loss.hpp"
#include "qck/model.hpp"
#include "qck/train.hpp"

namespace qck::cli {

struct SamplingConfig {
    std::vector<int> patch_sizes = {224};
    int patches_per_image = 1;
    double val_fraction = 0.2;
};

struct EvalConfig {
    double peak_threshold_fraction = 0.25;
    int peak_radius = 3;
    int cell_size = 224;
};

// Everything a pipeline run needs. Loaded from one JSON document; command
// line flags override individual fields afterwards.
struct PipelineConfig {
    KernelPolicy kernel;
    LossConfig loss;
    ModelConfig model;
    TrainConfig train;
    SamplingConfig sampling;
    EvalConfig eval;
    std::string manifest;
    std::string output_dir;
    std::uint64_t seed = 0;

    // Model heads and fusion follow the loss configuration.
    void sync();
    void validate() const;
};

PipelineConfig load_pipeline_config(const std::string& path);
std::string to_json(const PipelineConfig& cfg);

// One dataset entry: annotation JSON plus its graymap.
struct ManifestEntry {
    std::string annotation;
    std::string image;
};

// A manifest is a JSON array whose items are either annotation paths (the
// image is the same stem with .pgm) or {"annotation": ..., "image": ...}
// objects. Relative paths resolve against the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::string& path);

}  // namespace qck::cli
