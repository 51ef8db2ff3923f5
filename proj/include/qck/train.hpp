#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "qck/loss.hpp"
#include "qck/model.hpp"

namespace qck {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam with bias correction. Moments are kept in 64-bit; parameters are
// 32-bit storage.
class Adam {
public:
    Adam(std::size_t n, AdamConfig cfg = {});
    void step(std::span<float> params, std::span<const double> grad, double lr);
    [[nodiscard]] long steps() const noexcept { return t_; }

private:
    AdamConfig cfg_;
    std::vector<double> m_;
    std::vector<double> v_;
    long t_ = 0;
};

struct TrainConfig {
    double initial_lr = 0.001;
    double lr_decay = 2.0;   // divide the learning rate by this ...
    int decay_every = 20;    // ... after every this many epochs
    int epochs = 70;
    int batch_size = 16;
    std::uint64_t seed = 0;
    AdamConfig adam;

    void validate() const;
};

// Learning rate for a 1-based epoch under the step schedule.
double learning_rate(const TrainConfig& cfg, int epoch);

struct TrainSample {
    PatchTensor patch;
    DensityStack target;
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_c_mae = 0.0;
};

struct TrainResult {
    ModelParams params;  // best validation C-MAE (last epoch without a val set)
    std::vector<EpochRecord> history;
    int best_epoch = 0;
};

class TrainingDiverged : public NumericalError {
public:
    TrainingDiverged(int epoch, int batch, const std::string& what);
    int epoch;
    int batch;
};

// Mean loss and count MAE of a parameter set over a sample list.
struct EvalSummary {
    double loss = 0.0;
    double c_mae = 0.0;
};
EvalSummary evaluate_samples(const ModelParams& params, std::span<const TrainSample> samples, const LossConfig& lcfg);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch Adam over the step schedule. Batch gradients are computed in
// parallel and reduced in sample order, so results do not depend on the
// thread count.
TrainResult train(std::span<const TrainSample> train_set, std::span<const TrainSample> val_set,
                  const ModelConfig& mcfg, const TrainConfig& tcfg, const LossConfig& lcfg,
                  const EpochCallback& on_epoch = {});

}  // namespace qck
