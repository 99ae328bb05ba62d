#include "ethcast/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace ethcast {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = m.row(rows[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

bool grads_finite(const ParameterStore& params) {
    for (const auto& p : params) {
        if (!p.trainable) continue;
        for (double g : p.grad) {
            if (!std::isfinite(g)) return false;
        }
    }
    return true;
}

}  // namespace

Protocol parse_protocol(std::string_view name) {
    if (name == "short_term") return Protocol::ShortTerm;
    if (name == "few_shot") return Protocol::FewShot;
    fail(ErrorKind::Config, "unknown protocol \"" + std::string(name) + "\"");
}

const char* protocol_name(Protocol protocol) { return protocol == Protocol::ShortTerm ? "short_term" : "few_shot"; }

void TrainConfig::validate() const {
    if (max_epochs < 1) fail(ErrorKind::Config, "max_epochs must be at least 1");
    if (patience < 1) fail(ErrorKind::Config, "patience must be at least 1");
    if (accum_steps < 1) fail(ErrorKind::Config, "accum_steps must be at least 1");
    if (batch_size < 1) fail(ErrorKind::Config, "batch_size must be at least 1");
    if (!(loss_scale > 0.0)) fail(ErrorKind::Config, "loss_scale must be positive");
    if (!(base_lr > 0.0) || !(min_lr >= 0.0) || min_lr > base_lr) {
        fail(ErrorKind::Config, "learning rates must satisfy 0 <= min_lr <= base_lr, base_lr > 0");
    }
    if (!(few_shot_fraction > 0.0 && few_shot_fraction <= 1.0)) {
        fail(ErrorKind::Config, "few_shot_fraction must lie in (0,1]");
    }
}

double cosine_lr(std::size_t epoch, const TrainConfig& config) {
    if (epoch > config.max_epochs) {
        fail(ErrorKind::Config, "epoch " + std::to_string(epoch) + " outside [0, " +
                                    std::to_string(config.max_epochs) + "]");
    }
    const double progress = static_cast<double>(epoch) / static_cast<double>(config.max_epochs);
    return config.min_lr + 0.5 * (config.base_lr - config.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

StopDecision early_stop_update(EarlyStopState& state, double val_loss, std::size_t patience,
                               const ParameterStore* params) {
    if (!std::isfinite(val_loss)) fail(ErrorKind::NumericFailure, "validation loss is not finite");
    if (val_loss < state.best_val_loss) {
        state.best_val_loss = val_loss;
        state.epochs_since_improvement = 0;
        state.best_epoch = state.updates;
        if (params) state.best_checkpoint = params->snapshot(true);
    } else {
        ++state.epochs_since_improvement;
    }
    ++state.updates;
    return state.epochs_since_improvement >= patience ? StopDecision::Stop : StopDecision::Continue;
}

AdamOptimizer::AdamOptimizer(ParameterStore& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto& p : params) {
        if (!p.trainable) continue;
        moments_.emplace(p.name, Moments{&p, std::vector<double>(p.size(), 0.0), std::vector<double>(p.size(), 0.0)});
    }
}

void AdamOptimizer::step(double lr) {
    ++steps_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    for (auto& [name, st] : moments_) {
        Parameter& p = *st.param;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = p.grad[i];
            st.m[i] = beta1_ * st.m[i] + (1.0 - beta1_) * g;
            st.v[i] = beta2_ * st.v[i] + (1.0 - beta2_) * g * g;
            const double m_hat = st.m[i] / c1;
            const double v_hat = st.v[i] / c2;
            p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps_);
        }
    }
}

bool AdamOptimizer::has_state(std::string_view name) const { return moments_.find(name) != moments_.end(); }

Matrix predict_all(const Forecaster& model, const Matrix& inputs, std::size_t batch_size) {
    Matrix out(inputs.rows, model.pred_len());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < inputs.rows; start += batch_size) {
        const std::size_t end = std::min(inputs.rows, start + batch_size);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const Matrix pred = model.predict(gather_rows(inputs, idx));
        std::copy(pred.data.begin(), pred.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(start * out.cols));
    }
    return out;
}

double evaluation_loss(const Forecaster& model, const WindowSet& windows, std::size_t batch_size) {
    if (windows.empty()) fail(ErrorKind::EmptyInput, "no windows to evaluate");
    const Matrix pred = predict_all(model, windows.inputs, batch_size);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double e = pred.data[i] - windows.targets.data[i];
        sum += e * e;
    }
    return sum / static_cast<double>(pred.data.size());
}

TrainHistory fit(Forecaster& model, const WindowSet& train, const WindowSet& val, const TrainConfig& config,
                 const EpochObserver& observer) {
    config.validate();
    if (train.empty()) fail(ErrorKind::EmptyInput, "no training windows");
    if (train.seq_len != model.seq_len() || train.pred_len != model.pred_len()) {
        fail(ErrorKind::Shape, "window geometry does not match the model");
    }
    ParameterStore& params = model.params();
    AdamOptimizer adam(params);
    EarlyStopState stopper;
    TrainHistory history;
    history.initial_train_loss = evaluation_loss(model, train);

    const std::size_t n = train.size();
    std::vector<std::size_t> order(n);
    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        const double lr = cosine_lr(epoch, config);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 shuffle_rng(derive_seed(config.seed, epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        params.zero_grad();
        std::size_t pending = 0;
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
            const std::size_t end = std::min(n, start + config.batch_size);
            const std::span<const std::size_t> rows(order.data() + start, end - start);
            const Matrix x = gather_rows(train.inputs, rows);
            const Matrix y = gather_rows(train.targets, rows);

            const Matrix pred = model.forward_train(x, derive_seed(config.seed, epoch, batch_index + 1));
            const double count = static_cast<double>(pred.data.size());
            double loss = 0.0;
            Matrix grad(pred.rows, pred.cols);
            for (std::size_t i = 0; i < pred.data.size(); ++i) {
                const double e = pred.data[i] - y.data[i];
                loss += e * e;
                grad.data[i] = config.loss_scale * 2.0 * e / count;
            }
            loss /= count;
            if (!std::isfinite(loss)) {
                fail(ErrorKind::NumericFailure, "training loss is not finite at epoch " + std::to_string(epoch));
            }
            loss_sum += loss * static_cast<double>(rows.size());
            model.backward(grad);
            ++pending;

            if (pending == config.accum_steps || end == n) {
                const double unscale = 1.0 / (config.loss_scale * static_cast<double>(pending));
                for (auto& p : params) {
                    if (!p.trainable) continue;
                    for (auto& g : p.grad) g *= unscale;
                }
                if (!grads_finite(params)) {
                    fail(ErrorKind::NumericFailure, "non-finite gradient at epoch " + std::to_string(epoch));
                }
                adam.step(lr);
                params.zero_grad();
                pending = 0;
            }
        }

        const double train_loss = loss_sum / static_cast<double>(n);
        const double val_loss = val.empty() ? std::numeric_limits<double>::quiet_NaN() : evaluation_loss(model, val);
        history.train_loss.push_back(train_loss);
        history.val_loss.push_back(val_loss);
        history.learning_rate.push_back(lr);
        history.epochs_run = epoch + 1;
        if (observer) observer(epoch, train_loss, val_loss, lr);

        if (!val.empty() && early_stop_update(stopper, val_loss, config.patience, &params) == StopDecision::Stop) {
            history.stopped_early = true;
            break;
        }
    }
    if (!stopper.best_checkpoint.empty()) {
        params.restore(stopper.best_checkpoint);
        history.best_epoch = stopper.best_epoch;
    } else {
        history.best_epoch = history.epochs_run - 1;
    }
    return history;
}

}  // namespace ethcast
