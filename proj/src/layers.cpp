#include "pjfnn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "pjfnn/error.hpp"

namespace pjfnn {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using DynStride = Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>;
using StridedConst = Eigen::Map<const RowMatrix, Eigen::Unaligned, DynStride>;
using Strided = Eigen::Map<RowMatrix, Eigen::Unaligned, DynStride>;

using Index = Eigen::Index;

std::vector<std::size_t> offsets_of(const std::vector<std::size_t>& lengths) {
    std::vector<std::size_t> offsets(lengths.size() + 1, 0);
    std::partial_sum(lengths.begin(), lengths.end(), offsets.begin() + 1);
    return offsets;
}

Ragged single(Tape& tape, const Tensor& x) {
    if (x.rank() != 2) throw DimensionError("expected [C x L] sequence, got " + shape_string(x.shape()));
    return Ragged{tape.constant(x), {x.dim(1)}};
}

// Sum of the positions of one sequence, starting at `first`, taken from a
// row-major [C x N] buffer; used by conv bias gradients.
double row_sum(const float* row, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += row[i];
    return s;
}

}  // namespace

std::size_t Ragged::total() const { return std::accumulate(lengths.begin(), lengths.end(), std::size_t{0}); }

Ragged conv1d(const Ragged& x, const Conv1dVars& p) {
    const Tensor& input = x.data.value();
    const Tensor& kernels = p.kernels.value();
    const Tensor& bias = p.bias.value();
    if (kernels.rank() != 3 || input.rank() != 2 || kernels.dim(1) != input.dim(0) || bias.size() != kernels.dim(0)) {
        throw DimensionError("conv1d: input " + shape_string(input.shape()) + " incompatible with kernels " +
                             shape_string(kernels.shape()) + " and bias " + shape_string(bias.shape()));
    }
    const std::size_t cin = kernels.dim(1);
    const std::size_t cout = kernels.dim(0);
    const std::size_t k = kernels.dim(2);
    const std::size_t n_in = input.dim(1);

    std::vector<std::size_t> out_lengths;
    out_lengths.reserve(x.count());
    for (std::size_t s = 0; s < x.count(); ++s) {
        if (x.lengths[s] < k) throw SequenceTooShortError(s, x.lengths[s], k);
        out_lengths.push_back(x.lengths[s] - k + 1);
    }
    const auto in_off = offsets_of(x.lengths);
    const auto out_off = offsets_of(out_lengths);
    const std::size_t n_out = out_off.back();

    // Evaluate at every shifted position of the concatenated input, then keep
    // the positions whose window lies inside one sequence. Each output element
    // accumulates its terms in the same (channel, tap) order wherever it sits
    // in the batch, so results do not depend on batch composition.
    const std::size_t positions = n_in - k + 1;
    std::vector<float> full(cout * positions);
    constexpr std::size_t kBlock = 512;
    const float* xin = input.data().data();
    const float* w = kernels.data().data();
    for (std::size_t p0 = 0; p0 < positions; p0 += kBlock) {
        const std::size_t pn = std::min(kBlock, positions - p0);
        for (std::size_t o = 0; o < cout; ++o) {
            float* acc = full.data() + o * positions + p0;
            std::fill(acc, acc + pn, bias[o]);
            for (std::size_t c = 0; c < cin; ++c) {
                const float* xr = xin + c * n_in + p0;
                const float* wr = w + (o * cin + c) * k;
                for (std::size_t j = 0; j < k; ++j) {
                    const float wv = wr[j];
                    const float* xs = xr + j;
                    for (std::size_t i = 0; i < pn; ++i) acc[i] += wv * xs[i];
                }
            }
        }
    }

    Tensor out(Shape{cout, n_out});
    for (std::size_t o = 0; o < cout; ++o) {
        const float* src = full.data() + o * positions;
        float* dst = out.data().data() + o * n_out;
        for (std::size_t s = 0; s < x.count(); ++s) {
            std::copy_n(src + in_off[s], out_lengths[s], dst + out_off[s]);
        }
    }

    Var input_var = x.data;
    Var kernel_var = p.kernels;
    auto backward = [input_var, kernel_var, in_off, out_off, out_lengths, cin, cout, k, n_in, n_out,
                     positions](const Tensor& g, std::span<Tensor* const> pg) {
        // Scatter the output gradient back onto the shifted-position layout.
        RowMatrix gfull = RowMatrix::Zero(static_cast<Index>(cout), static_cast<Index>(positions));
        for (std::size_t o = 0; o < cout; ++o) {
            const float* src = g.data().data() + o * n_out;
            for (std::size_t s = 0; s < out_lengths.size(); ++s) {
                std::copy_n(src + out_off[s], out_lengths[s], gfull.data() + o * positions + in_off[s]);
            }
        }
        const float* xin = input_var.value().data().data();
        if (pg[1]) {
            float* dk = pg[1]->data().data();
            for (std::size_t j = 0; j < k; ++j) {
                StridedConst xj(xin + j, static_cast<Index>(cin), static_cast<Index>(positions),
                                DynStride(static_cast<Index>(n_in), 1));
                Strided dkj(dk + j, static_cast<Index>(cout), static_cast<Index>(cin),
                            DynStride(static_cast<Index>(cin * k), static_cast<Index>(k)));
                dkj.noalias() += gfull * xj.transpose();
            }
        }
        if (pg[2]) {
            for (std::size_t o = 0; o < cout; ++o) {
                (*pg[2])[o] += static_cast<float>(row_sum(g.data().data() + o * n_out, n_out));
            }
        }
        if (pg[0]) {
            const float* w = kernel_var.value().data().data();
            float* dx = pg[0]->data().data();
            for (std::size_t j = 0; j < k; ++j) {
                StridedConst wj(w + j, static_cast<Index>(cout), static_cast<Index>(cin),
                                DynStride(static_cast<Index>(cin * k), static_cast<Index>(k)));
                Strided dxj(dx + j, static_cast<Index>(cin), static_cast<Index>(positions),
                            DynStride(static_cast<Index>(n_in), 1));
                dxj.noalias() += wj.transpose() * gfull;
            }
        }
    };
    Var result = x.data.tape().record(std::move(out), {x.data, p.kernels, p.bias}, std::move(backward));
    return Ragged{result, std::move(out_lengths)};
}

Ragged batchnorm(const Ragged& x, const BatchNormVars& p, Mode mode, BatchStats* stats) {
    const Tensor& input = x.data.value();
    const std::size_t channels = input.dim(0);
    const std::size_t n = input.dim(1);
    if (!p.params || p.gamma.value().size() != channels || p.beta.value().size() != channels) {
        throw DimensionError("batchnorm: parameters do not match " + std::to_string(channels) + " channels");
    }
    const float eps = p.params->epsilon;
    const Tensor& gamma = p.gamma.value();
    const Tensor& beta = p.beta.value();

    Tensor xhat(input.shape());
    Tensor inv_std(Shape{channels});
    if (mode == Mode::train) {
        if (n < 2) {
            throw DegenerateBatchError("batchnorm in train mode needs at least 2 positions per channel, got " +
                                       std::to_string(n));
        }
        Tensor batch_mean(Shape{channels});
        Tensor batch_var(Shape{channels});
        for (std::size_t c = 0; c < channels; ++c) {
            const auto row = input.row(c);
            double m = 0.0;
            for (float v : row) m += v;
            m /= static_cast<double>(n);
            double var = 0.0;
            for (float v : row) var += (v - m) * (v - m);
            var /= static_cast<double>(n);
            batch_mean[c] = static_cast<float>(m);
            batch_var[c] = static_cast<float>(var);
            const double inv = 1.0 / std::sqrt(var + eps);
            inv_std[c] = static_cast<float>(inv);
            auto out_row = xhat.row(c);
            for (std::size_t i = 0; i < n; ++i) out_row[i] = static_cast<float>((row[i] - m) * inv);
        }
        if (stats) *stats = BatchStats{std::move(batch_mean), std::move(batch_var), n};
    } else {
        for (std::size_t c = 0; c < channels; ++c) {
            const float m = p.params->running_mean[c];
            const float inv = 1.0f / std::sqrt(p.params->running_var[c] + eps);
            inv_std[c] = inv;
            const auto row = input.row(c);
            auto out_row = xhat.row(c);
            for (std::size_t i = 0; i < n; ++i) out_row[i] = (row[i] - m) * inv;
        }
    }

    Tensor out(input.shape());
    for (std::size_t c = 0; c < channels; ++c) {
        const auto xr = xhat.row(c);
        auto yr = out.row(c);
        for (std::size_t i = 0; i < n; ++i) yr[i] = gamma[c] * xr[i] + beta[c];
    }

    Var gamma_var = p.gamma;
    auto backward = [xhat = std::move(xhat), inv_std, gamma_var, mode, channels, n](const Tensor& g,
                                                                                 std::span<Tensor* const> pg) {
        const Tensor& gamma = gamma_var.value();
        for (std::size_t c = 0; c < channels; ++c) {
            const auto gr = g.row(c);
            const auto xr = xhat.row(c);
            double sum_g = 0.0;
            double sum_gx = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                sum_g += gr[i];
                sum_gx += static_cast<double>(gr[i]) * xr[i];
            }
            if (pg[1]) (*pg[1])[c] += static_cast<float>(sum_gx);
            if (pg[2]) (*pg[2])[c] += static_cast<float>(sum_g);
            if (!pg[0]) continue;
            auto dx = pg[0]->row(c);
            if (mode == Mode::train) {
                const double scale = static_cast<double>(gamma[c]) * inv_std[c] / static_cast<double>(n);
                const double nn = static_cast<double>(n);
                for (std::size_t i = 0; i < n; ++i) {
                    dx[i] += static_cast<float>(scale * (nn * gr[i] - sum_g - xr[i] * sum_gx));
                }
            } else {
                const float scale = gamma[c] * inv_std[c];
                for (std::size_t i = 0; i < n; ++i) dx[i] += scale * gr[i];
            }
        }
    };
    Var result = x.data.tape().record(std::move(out), {x.data, p.gamma, p.beta}, std::move(backward));
    return Ragged{result, x.lengths};
}

Var relu(const Var& x) {
    Tensor out = x.value();
    for (float& v : out.data()) v = v > 0.0f ? v : 0.0f;
    return x.tape().record(std::move(out), {x}, [x](const Tensor& g, std::span<Tensor* const> pg) {
        const Tensor& xv = x.value();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (xv[i] > 0.0f) (*pg[0])[i] += g[i];
        }
    });
}

Ragged relu(const Ragged& x) { return Ragged{relu(x.data), x.lengths}; }

Ragged maxpool1d(const Ragged& x, std::size_t size, std::size_t stride) {
    if (size == 0 || stride == 0) throw ContractError("maxpool1d: size and stride must be positive");
    const Tensor& input = x.data.value();
    const std::size_t channels = input.dim(0);
    const std::size_t n_in = input.dim(1);

    std::vector<std::size_t> out_lengths;
    for (std::size_t s = 0; s < x.count(); ++s) {
        if (x.lengths[s] < size) throw SequenceTooShortError(s, x.lengths[s], size);
        out_lengths.push_back((x.lengths[s] - size) / stride + 1);
    }
    const auto in_off = offsets_of(x.lengths);
    const auto out_off = offsets_of(out_lengths);
    const std::size_t n_out = out_off.back();

    Tensor out(Shape{channels, n_out});
    std::vector<std::uint32_t> argmax(channels * n_out);
    for (std::size_t c = 0; c < channels; ++c) {
        const float* row = input.data().data() + c * n_in;
        for (std::size_t s = 0; s < x.count(); ++s) {
            for (std::size_t w = 0; w < out_lengths[s]; ++w) {
                std::size_t best = in_off[s] + w * stride;
                for (std::size_t i = best + 1; i < in_off[s] + w * stride + size; ++i) {
                    if (row[i] > row[best]) best = i;
                }
                out.at(c, out_off[s] + w) = row[best];
                argmax[c * n_out + out_off[s] + w] = static_cast<std::uint32_t>(best);
            }
        }
    }
    auto backward = [argmax = std::move(argmax), channels, n_in, n_out](const Tensor& g,
                                                                         std::span<Tensor* const> pg) {
        float* dx = pg[0]->data().data();
        for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t i = 0; i < n_out; ++i) dx[c * n_in + argmax[c * n_out + i]] += g.at(c, i);
        }
    };
    Var result = x.data.tape().record(std::move(out), {x.data}, std::move(backward));
    return Ragged{result, std::move(out_lengths)};
}

Var global_maxpool(const Ragged& x) {
    const Tensor& input = x.data.value();
    const std::size_t channels = input.dim(0);
    const std::size_t n_in = input.dim(1);
    const std::size_t count = x.count();
    const auto off = offsets_of(x.lengths);
    for (std::size_t s = 0; s < count; ++s) {
        if (x.lengths[s] == 0) throw SequenceTooShortError(s, 0, 1);
    }

    Tensor out(Shape{channels, count});
    std::vector<std::uint32_t> argmax(channels * count);
    for (std::size_t c = 0; c < channels; ++c) {
        const float* row = input.data().data() + c * n_in;
        for (std::size_t s = 0; s < count; ++s) {
            std::size_t best = off[s];
            for (std::size_t i = off[s] + 1; i < off[s + 1]; ++i) {
                if (row[i] > row[best]) best = i;
            }
            out.at(c, s) = row[best];
            argmax[c * count + s] = static_cast<std::uint32_t>(best);
        }
    }
    auto backward = [argmax = std::move(argmax), channels, n_in, count](const Tensor& g,
                                                                         std::span<Tensor* const> pg) {
        float* dx = pg[0]->data().data();
        for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t s = 0; s < count; ++s) dx[c * n_in + argmax[c * count + s]] += g.at(c, s);
        }
    };
    return x.data.tape().record(std::move(out), {x.data}, std::move(backward));
}

Var segment_mean(const Ragged& x) {
    const Tensor& input = x.data.value();
    const std::size_t channels = input.dim(0);
    const std::size_t count = x.count();
    const auto off = offsets_of(x.lengths);
    for (std::size_t s = 0; s < count; ++s) {
        if (x.lengths[s] == 0) throw SequenceTooShortError(s, 0, 1);
    }

    Tensor out(Shape{channels, count});
    std::vector<float> scratch;
    for (std::size_t c = 0; c < channels; ++c) {
        const auto row = input.row(c);
        for (std::size_t s = 0; s < count; ++s) {
            scratch.assign(row.begin() + static_cast<std::ptrdiff_t>(off[s]),
                           row.begin() + static_cast<std::ptrdiff_t>(off[s + 1]));
            std::sort(scratch.begin(), scratch.end());
            double total = 0.0;
            for (float v : scratch) total += v;
            out.at(c, s) = static_cast<float>(total / static_cast<double>(x.lengths[s]));
        }
    }
    auto backward = [off, lengths = x.lengths, channels, count](const Tensor& g, std::span<Tensor* const> pg) {
        for (std::size_t c = 0; c < channels; ++c) {
            auto dx = pg[0]->row(c);
            for (std::size_t s = 0; s < count; ++s) {
                const float share = g.at(c, s) / static_cast<float>(lengths[s]);
                for (std::size_t i = off[s]; i < off[s + 1]; ++i) dx[i] += share;
            }
        }
    };
    return x.data.tape().record(std::move(out), {x.data}, std::move(backward));
}

void update_running_stats(BatchNormParams& p, const BatchStats& stats) {
    const float m = p.momentum;
    const double correction =
        stats.count > 1 ? static_cast<double>(stats.count) / static_cast<double>(stats.count - 1) : 1.0;
    for (std::size_t c = 0; c < p.channels(); ++c) {
        p.running_mean[c] = m * p.running_mean[c] + (1.0f - m) * stats.mean[c];
        const auto unbiased = static_cast<float>(stats.variance[c] * correction);
        p.running_var[c] = m * p.running_var[c] + (1.0f - m) * unbiased;
    }
}

Tensor conv1d(const Tensor& x, const Conv1dParams& p) {
    Tape tape;
    Conv1dVars vars{tape.constant(p.kernels), tape.constant(p.bias)};
    return conv1d(single(tape, x), vars).data.value();
}

std::vector<Tensor> batchnorm(std::span<const Tensor> xs, BatchNormParams& p, Mode mode) {
    if (xs.empty()) throw DegenerateBatchError("batchnorm on an empty batch");
    const std::size_t channels = xs.front().dim(0);
    std::vector<std::size_t> lengths;
    std::vector<float> joined;
    std::size_t total = 0;
    for (const Tensor& t : xs) {
        if (t.rank() != 2 || t.dim(0) != channels) throw DimensionError("batchnorm: inconsistent batch shapes");
        lengths.push_back(t.dim(1));
        total += t.dim(1);
    }
    joined.resize(channels * total);
    std::size_t offset = 0;
    for (const Tensor& t : xs) {
        for (std::size_t c = 0; c < channels; ++c) {
            const auto row = t.row(c);
            std::copy(row.begin(), row.end(), joined.begin() + static_cast<std::ptrdiff_t>(c * total + offset));
        }
        offset += t.dim(1);
    }
    Tape tape;
    Ragged batch{tape.constant(Tensor(Shape{channels, total}, std::move(joined))), lengths};
    BatchNormVars vars{tape.constant(p.gamma), tape.constant(p.beta), &p};
    BatchStats stats;
    const Tensor& out = batchnorm(batch, vars, mode, &stats).data.value();
    if (mode == Mode::train) update_running_stats(p, stats);

    std::vector<Tensor> result;
    offset = 0;
    for (std::size_t len : lengths) {
        Tensor t(Shape{channels, len});
        for (std::size_t c = 0; c < channels; ++c) {
            const auto row = out.row(c);
            std::copy_n(row.begin() + static_cast<std::ptrdiff_t>(offset), len, t.row(c).begin());
        }
        result.push_back(std::move(t));
        offset += len;
    }
    return result;
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (float& v : out.data()) v = v > 0.0f ? v : 0.0f;
    return out;
}

Tensor maxpool1d(const Tensor& x, std::size_t size, std::size_t stride) {
    Tape tape;
    return maxpool1d(single(tape, x), size, stride).data.value();
}

Tensor global_maxpool(const Tensor& x) {
    Tape tape;
    const Tensor& out = global_maxpool(single(tape, x)).value();
    return out.reshaped(Shape{out.dim(0)});
}

Conv1dParams init_conv1d(const ConvSpec& spec, Rng& rng) {
    if (spec.in_channels == 0 || spec.out_channels == 0 || spec.width == 0) {
        throw ContractError("conv1d spec needs positive channels and width");
    }
    const double fan_in = static_cast<double>(spec.in_channels * spec.width);
    const double fan_out = static_cast<double>(spec.out_channels * spec.width);
    const auto limit = static_cast<float>(std::sqrt(6.0 / (fan_in + fan_out)));
    Conv1dParams p{Tensor(Shape{spec.out_channels, spec.in_channels, spec.width}), Tensor(Shape{spec.out_channels})};
    for (float& v : p.kernels.data()) v = rng.uniform(-limit, limit);
    return p;
}

Conv1dParams init_conv1d(const ConvSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    return init_conv1d(spec, rng);
}

BatchNormParams init_batchnorm(std::size_t channels, float epsilon, float momentum) {
    if (epsilon <= 0.0f) throw ContractError("batchnorm epsilon must be positive");
    if (!(momentum > 0.0f && momentum < 1.0f)) throw ContractError("batchnorm momentum must lie in (0, 1)");
    return BatchNormParams{Tensor::ones(Shape{channels}), Tensor::zeros(Shape{channels}),
                           Tensor::zeros(Shape{channels}), Tensor::ones(Shape{channels}), epsilon, momentum};
}

}  // namespace pjfnn
