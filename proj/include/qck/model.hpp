#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qck/density.hpp"
#include "qck/loss.hpp"
#include "qck/raster.hpp"

namespace qck {

// Reference regressor. Softplus here is shifted, softplus(x) - log 2, so it
// is zero at zero. A trunk of conv3x3 -> softplus -> avgpool2 stages
// brings the patch to 1/downsample resolution. Density head 0 is a 1x1
// projection of the trunk; head j >= 1 sees the trunk concatenated with all
// previously predicted maps through a conv3x3 -> softplus -> 1x1 block. The
// count head is a two-layer MLP on the mean-pooled trunk, scaled by the
// head-grid area, so it predicts people per patch.
struct ModelConfig {
    int input_size = 224;
    int downsample = 8;                 // 2^channels.size()
    std::vector<int> channels = {4, 8, 16};
    int head_width = 8;
    int count_hidden = 16;
    std::vector<Level> levels = default_levels();  // one density head per level
    FusionMode fusion = FusionMode::regression_only;
    std::uint64_t seed = 0;

    [[nodiscard]] int map_size() const noexcept { return input_size / downsample; }
    [[nodiscard]] int n_levels() const noexcept { return static_cast<int>(levels.size()); }
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

// One named parameter tensor inside the flat parameter vector.
struct TensorSpec {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
    int fan_in = 0;
    bool is_bias = false;
};

std::vector<TensorSpec> parameter_layout(const ModelConfig& cfg);
std::size_t parameter_count(const ModelConfig& cfg);

struct ModelParams {
    static constexpr std::uint32_t kVersion = 1;

    ModelConfig config;
    std::vector<float> values;  // tensors in declaration order
    std::uint32_t version = kVersion;
};

// Weight init bound sqrt(12 / fan_in): U(-b, b) has variance 4 / fan_in,
// which preserves signal variance through units of slope 1/2 at zero.
double init_bound(int fan_in);

// Uniform weights U(-init_bound, init_bound), zero biases.
ModelParams init_model(const ModelConfig& cfg);

// Model input: one channel, values in [0, 1].
using PatchTensor = Raster<float>;
PatchTensor to_patch_tensor(const GrayImage& image);

struct Prediction {
    DensityStack stack;  // stack.count is the count-head output
};

// Evaluates the network for explicit 64-bit parameters. Separating the
// architecture from the parameter vector lets gradient checks perturb
// parameters without float rounding.
class Network {
public:
    explicit Network(ModelConfig cfg);

    [[nodiscard]] const ModelConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] std::size_t parameter_count() const noexcept { return n_params_; }

    [[nodiscard]] Prediction forward(std::span<const double> theta, const PatchTensor& patch) const;

    // Loss of forward(theta, patch) against target and d loss / d theta
    // written into grad (overwritten).
    LossReport loss_and_gradient(std::span<const double> theta, const PatchTensor& patch,
                                 const DensityStack& target, const LossConfig& lcfg,
                                 std::span<double> grad) const;

    [[nodiscard]] LossReport loss(std::span<const double> theta, const PatchTensor& patch,
                                  const DensityStack& target, const LossConfig& lcfg) const;

private:
    struct Activations;
    void run_forward(std::span<const double> theta, const PatchTensor& patch, Activations& act) const;

    ModelConfig cfg_;
    std::vector<TensorSpec> layout_;
    std::size_t n_params_ = 0;
};

Prediction forward(const ModelParams& params, const PatchTensor& patch);
Prediction forward(const ModelParams& params, const GrayImage& patch);

struct GradientResult {
    LossReport report;
    std::vector<double> grad;  // same layout as params.values
};
GradientResult gradients(const ModelParams& params, const PatchTensor& patch, const DensityStack& target,
                         const LossConfig& lcfg);

// The count reported for a prediction under a fusion mode.
double predicted_count(const Prediction& pred, FusionMode mode);

// QCP1 checkpoint: "QCP1", u32 length of a JSON config block, the JSON, then
// every parameter as little-endian float32 in declaration order.
void write_checkpoint(std::ostream& out, const ModelParams& params);
ModelParams read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace qck
