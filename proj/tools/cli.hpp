#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pipeline_config.hpp"
#include "qck/evaluation.hpp"
#include "qck/model.hpp"

namespace qck::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,
    kDataError = 3,
    kNumericalError = 4,
};

// Runs the command line (args excludes the program name) and returns the
// process exit code. Never calls exit().
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct ImageResult {
    std::string image_id;
    double gt_count = 0.0;
    double pred_count = 0.0;
    DensityMetrics density;  // on the first level
    bool hi_defined = false;  // false when either map has no mass
    PRCurve curve;                          // filled when localizing
    std::size_t n_pred_points = 0;
    std::size_t n_gt_points = 0;
};

struct EvaluationOptions {
    bool localize = false;
    bool oracle_gt = false;
};

struct EvaluationReport {
    std::vector<ImageResult> images;
    CountMetrics counts;
    bool has_nae = true;
    DensityMetrics density;  // HI is averaged over images where it is defined
    std::size_t hi_images = 0;
    std::optional<PRCurve> curve;  // dataset-level
};

// Tiles every image into cells, predicts each cell (or replays its ground
// truth in oracle mode), stitches the head maps and scores everything.
EvaluationReport evaluate_dataset(const std::vector<ManifestEntry>& entries, const ModelParams* params,
                                  const PipelineConfig& cfg, const EvaluationOptions& opts);

}  // namespace qck::cli
