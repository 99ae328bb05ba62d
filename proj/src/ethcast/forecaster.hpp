#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "ethcast/common.hpp"
#include "ethcast/params.hpp"

namespace ethcast {

// Uniform model surface shared by the transformer backbones and the
// baselines, so training and evaluation never look at the concrete type.
//
// predict() is re-entrant and runs in inference mode. forward_train() caches
// activations inside the instance for the next backward() call, which makes
// a training pass single-threaded per instance.
class Forecaster {
public:
    virtual ~Forecaster() = default;

    virtual std::string kind() const = 0;
    virtual std::size_t seq_len() const = 0;
    virtual std::size_t pred_len() const = 0;

    virtual ParameterStore& params() = 0;
    virtual const ParameterStore& params() const = 0;

    // windows: B x seq_len on the standardized scale -> B x pred_len.
    virtual Matrix predict(const Matrix& windows) const = 0;
    virtual Matrix forward_train(const Matrix& windows, std::uint64_t dropout_seed) = 0;
    // Adds d(loss)/d(parameter) into Parameter::grad for trainable parameters.
    virtual void backward(const Matrix& grad_output) = 0;

protected:
    void check_windows(const Matrix& windows) const {
        if (windows.cols != seq_len()) {
            fail(ErrorKind::Shape, kind() + " expects windows of length " + std::to_string(seq_len()) + ", got " +
                                       std::to_string(windows.cols));
        }
    }
};

}  // namespace ethcast
