#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pjfnn/autograd.hpp"
#include "pjfnn/rng.hpp"
#include "pjfnn/tensor.hpp"

namespace pjfnn {

enum class Mode { train, eval };

struct Conv1dParams {
    Tensor kernels;  // [C_out x C_in x k]
    Tensor bias;     // [C_out]

    std::size_t out_channels() const { return kernels.dim(0); }
    std::size_t in_channels() const { return kernels.dim(1); }
    std::size_t width() const { return kernels.dim(2); }
};

struct BatchNormParams {
    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
    float epsilon = 1e-5f;
    // running = momentum * running + (1 - momentum) * batch
    float momentum = 0.9f;

    std::size_t channels() const { return gamma.size(); }
};

/// Per-channel statistics of one train-mode batch-norm pass.
struct BatchStats {
    Tensor mean;
    Tensor variance;  // biased (divide by count)
    std::size_t count = 0;
};

/// A batch of variable-length sequences over a shared channel axis. `data` is
/// [C x sum(lengths)]; sequence s occupies a contiguous run of columns.
struct Ragged {
    Var data;
    std::vector<std::size_t> lengths;

    std::size_t channels() const { return data.value().dim(0); }
    std::size_t count() const { return lengths.size(); }
    std::size_t total() const;
};

struct Conv1dVars {
    Var kernels;
    Var bias;
};

/// Trainable affine part of a batch norm plus the fixed statistics it reads.
struct BatchNormVars {
    Var gamma;
    Var beta;
    const BatchNormParams* params = nullptr;
};

// Tape-recorded layers over ragged batches.

/// Valid cross-correlation of every sequence; output length L - k + 1.
/// Throws SequenceTooShortError naming the first sequence with L < k.
Ragged conv1d(const Ragged& x, const Conv1dVars& p);

/// Per-channel normalization over every column of the batch. In train mode
/// the batch statistics are used and reported through `stats`; in eval mode
/// the running statistics are used.
Ragged batchnorm(const Ragged& x, const BatchNormVars& p, Mode mode, BatchStats* stats = nullptr);

Var relu(const Var& x);
Ragged relu(const Ragged& x);

/// Windowed channelwise maximum per sequence. Trailing positions that do not
/// fill a window are dropped.
Ragged maxpool1d(const Ragged& x, std::size_t size, std::size_t stride);

/// Per-sequence channelwise maximum: [C x count].
Var global_maxpool(const Ragged& x);

/// Per-sequence channelwise arithmetic mean: [C x count]. Values are summed in
/// sorted order so the result does not depend on column order within a sequence.
Var segment_mean(const Ragged& x);

/// Exponential moving average update of the running statistics. The running
/// variance uses the unbiased batch estimate.
void update_running_stats(BatchNormParams& p, const BatchStats& stats);

// Plain-tensor conveniences for single sequences of shape [C x L].

Tensor conv1d(const Tensor& x, const Conv1dParams& p);
/// Train mode updates the running statistics of `p`.
std::vector<Tensor> batchnorm(std::span<const Tensor> xs, BatchNormParams& p, Mode mode);
Tensor relu(const Tensor& x);
Tensor maxpool1d(const Tensor& x, std::size_t size, std::size_t stride);
/// [C x L] -> [C]
Tensor global_maxpool(const Tensor& x);

struct ConvSpec {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t width = 1;
};

/// Glorot-uniform kernels, zero bias.
Conv1dParams init_conv1d(const ConvSpec& spec, Rng& rng);
Conv1dParams init_conv1d(const ConvSpec& spec, std::uint64_t seed);
/// gamma = 1, beta = 0, running statistics (0, 1).
BatchNormParams init_batchnorm(std::size_t channels, float epsilon = 1e-5f, float momentum = 0.9f);

}  // namespace pjfnn
