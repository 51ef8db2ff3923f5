#include "qck/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>

#include "qck/parallel.hpp"

namespace qck {

Adam::Adam(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<float> params, std::span<const double> grad, double lr) {
    if (params.size() != m_.size() || grad.size() != m_.size()) throw ValidationError("Adam: size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m_[i] / c1;
        const double vhat = v_[i] / c2;
        params[i] = static_cast<float>(params[i] - lr * mhat / (std::sqrt(vhat) + cfg_.epsilon));
    }
}

void TrainConfig::validate() const {
    if (!(initial_lr > 0.0)) throw ValidationError("train config: initial_lr must be positive");
    if (!(lr_decay > 0.0)) throw ValidationError("train config: lr_decay must be positive");
    if (decay_every < 1) throw ValidationError("train config: decay_every must be positive");
    if (epochs < 1) throw ValidationError("train config: epochs must be at least 1");
    if (batch_size < 1) throw ValidationError("train config: batch_size must be positive");
}

double learning_rate(const TrainConfig& cfg, int epoch) {
    if (epoch < 1) throw DomainError("epochs are 1-based");
    const int drops = (epoch - 1) / cfg.decay_every;
    return cfg.initial_lr / std::pow(cfg.lr_decay, drops);
}

TrainingDiverged::TrainingDiverged(int e, int b, const std::string& what)
    : NumericalError("training diverged at epoch " + std::to_string(e) + ", batch " + std::to_string(b) + ": " + what),
      epoch(e),
      batch(b) {}

namespace {

struct SampleResult {
    double loss = 0.0;
    double abs_err = 0.0;
    std::vector<double> grad;
    std::exception_ptr error;
};

// Runs fn(i, result) for every index in parallel, rethrowing the first
// failure in index order.
template <typename Fn>
std::vector<SampleResult> parallel_samples(std::size_t n, Fn&& fn) {
    std::vector<SampleResult> out(n);
    const int nt = std::max(1, std::min<int>(threads(), static_cast<int>(n)));
#pragma omp parallel for num_threads(nt) schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
            fn(static_cast<std::size_t>(i), out[static_cast<std::size_t>(i)]);
        } catch (...) {
            out[static_cast<std::size_t>(i)].error = std::current_exception();
        }
    }
    for (const auto& r : out)
        if (r.error) std::rethrow_exception(r.error);
    return out;
}

}  // namespace

EvalSummary evaluate_samples(const ModelParams& params, std::span<const TrainSample> samples, const LossConfig& lcfg) {
    EvalSummary s;
    if (samples.empty()) return s;
    const Network net(params.config);
    const std::vector<double> theta(params.values.begin(), params.values.end());
    const auto results = parallel_samples(samples.size(), [&](std::size_t i, SampleResult& r) {
        const Prediction pred = net.forward(theta, samples[i].patch);
        r.loss = composition_loss(pred.stack, samples[i].target, lcfg).total;
        r.abs_err = std::abs(predicted_count(pred, lcfg.fusion_mode) - samples[i].target.count);
    });
    for (const auto& r : results) {
        s.loss += r.loss;
        s.c_mae += r.abs_err;
    }
    s.loss /= static_cast<double>(samples.size());
    s.c_mae /= static_cast<double>(samples.size());
    return s;
}

TrainResult train(std::span<const TrainSample> train_set, std::span<const TrainSample> val_set,
                  const ModelConfig& mcfg, const TrainConfig& tcfg, const LossConfig& lcfg,
                  const EpochCallback& on_epoch) {
    tcfg.validate();
    lcfg.validate();
    mcfg.validate();
    if (train_set.empty()) throw ValidationError("train: training set is empty");
    if (lcfg.levels != mcfg.levels) throw ValidationError("train: loss levels do not match model heads");

    TrainResult result;
    ModelParams params = init_model(mcfg);
    const Network net(mcfg);
    Adam adam(params.values.size(), tcfg.adam);
    std::mt19937_64 rng(tcfg.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> theta(params.values.size());
    std::vector<double> batch_grad(params.values.size());

    for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        const double lr = learning_rate(tcfg, epoch);
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        int batch = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tcfg.batch_size), ++batch) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(tcfg.batch_size));
            std::copy(params.values.begin(), params.values.end(), theta.begin());
            std::vector<SampleResult> rs;
            try {
                rs = parallel_samples(stop - start, [&](std::size_t i, SampleResult& r) {
                    const TrainSample& s = train_set[order[start + i]];
                    r.grad.assign(theta.size(), 0.0);
                    r.loss = net.loss_and_gradient(theta, s.patch, s.target, lcfg, r.grad).total;
                });
            } catch (const NumericalError& e) {
                throw TrainingDiverged(epoch, batch + 1, e.what());
            }
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
            const double inv = 1.0 / static_cast<double>(rs.size());
            for (const auto& r : rs) {
                if (!std::isfinite(r.loss)) throw TrainingDiverged(epoch, batch + 1, "non-finite loss");
                epoch_loss += r.loss;
                for (std::size_t k = 0; k < batch_grad.size(); ++k) batch_grad[k] += r.grad[k] * inv;
            }
            adam.step(params.values, batch_grad, lr);
            for (float v : params.values)
                if (!std::isfinite(v)) throw TrainingDiverged(epoch, batch + 1, "non-finite parameter after update");
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_loss = epoch_loss / static_cast<double>(train_set.size());
        if (!val_set.empty()) {
            const EvalSummary v = evaluate_samples(params, val_set, lcfg);
            rec.val_loss = v.loss;
            rec.val_c_mae = v.c_mae;
            if (v.c_mae < best) {
                best = v.c_mae;
                result.params = params;
                result.best_epoch = epoch;
            }
        } else {
            result.params = params;
            result.best_epoch = epoch;
        }
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    return result;
}

}  // namespace qck
