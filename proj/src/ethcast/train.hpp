#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ethcast/forecaster.hpp"
#include "ethcast/ingest.hpp"

namespace ethcast {

enum class Protocol { ShortTerm, FewShot };

Protocol parse_protocol(std::string_view name);
const char* protocol_name(Protocol protocol);

struct TrainConfig {
    double base_lr = 1e-4;
    double min_lr = 1e-6;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 20;
    std::size_t patience = 5;
    std::size_t accum_steps = 1;
    double loss_scale = 1.0;
    std::uint64_t seed = 0;
    Protocol protocol = Protocol::ShortTerm;
    double few_shot_fraction = 0.1;

    void validate() const;
};

// min_lr + (base_lr - min_lr) * (1 + cos(pi * epoch / max_epochs)) / 2
double cosine_lr(std::size_t epoch, const TrainConfig& config);

enum class StopDecision { Continue, Stop };

struct EarlyStopState {
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::size_t epochs_since_improvement = 0;
    std::size_t best_epoch = 0;
    std::size_t updates = 0;
    ParamSnapshot best_checkpoint;
};

// Strict improvement resets the counter and snapshots the trainable
// parameters of `params` (when given); otherwise the counter grows and the
// decision turns to Stop once it reaches `patience`.
StopDecision early_stop_update(EarlyStopState& state, double val_loss, std::size_t patience,
                               const ParameterStore* params = nullptr);

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;  // NaN when there are no validation windows
    std::vector<double> learning_rate;
    double initial_train_loss = 0.0;
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    bool stopped_early = false;
};

// Adam with bias correction. Moment buffers exist only for parameters that
// were trainable when the optimizer was created, and step() touches only those.
class AdamOptimizer {
public:
    explicit AdamOptimizer(ParameterStore& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(double lr);
    bool has_state(std::string_view name) const;
    std::size_t state_count() const { return moments_.size(); }

private:
    struct Moments {
        Parameter* param;
        std::vector<double> m;
        std::vector<double> v;
    };
    std::map<std::string, Moments, std::less<>> moments_;
    double beta1_;
    double beta2_;
    double eps_;
    std::size_t steps_ = 0;
};

// Mean squared error over every (window, horizon) value, inference mode.
double evaluation_loss(const Forecaster& model, const WindowSet& windows, std::size_t batch_size = 256);

Matrix predict_all(const Forecaster& model, const Matrix& inputs, std::size_t batch_size = 256);

using EpochObserver = std::function<void(std::size_t epoch, double train_loss, double val_loss, double lr)>;

// Trains the trainable parameters of `model` in place and leaves it at the
// best-validation snapshot.
TrainHistory fit(Forecaster& model, const WindowSet& train, const WindowSet& val, const TrainConfig& config,
                 const EpochObserver& observer = {});

}  // namespace ethcast
