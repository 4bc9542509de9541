#pragma once

// Straightforward double-precision re-implementation of the two-tower forward
// pass and training objective, used as a finite-difference oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "pjfnn/model.hpp"
#include "pjfnn/training.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;  // [channel][position]

/// Discrete choices made by a forward pass: ReLU signs and max-pool winners.
/// Two passes with equal traces lie on the same linear piece of the network.
using Trace = std::vector<std::uint32_t>;

struct Conv {
    std::vector<double> w;  // [out][in][k]
    std::vector<double> b;
    std::size_t out = 0, in = 0, k = 0;
};

struct Norm {
    std::vector<double> gamma, beta;
    double eps = 1e-5;
};

struct Tower {
    Conv c1;
    Norm n1;
    Conv c2;
    Norm n2;
    std::size_t pool = 2, stride = 2;
};

struct Model {
    Tower job, resume;
};

inline std::vector<double> widen(const pjfnn::Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline Conv conv_of(const pjfnn::Conv1dParams& p) {
    return Conv{widen(p.kernels), widen(p.bias), p.kernels.dim(0), p.kernels.dim(1), p.kernels.dim(2)};
}

inline Norm norm_of(const pjfnn::BatchNormParams& p) { return Norm{widen(p.gamma), widen(p.beta), p.epsilon}; }

inline Tower tower_of(const pjfnn::TowerParams& p, const pjfnn::TowerConfig& c) {
    return Tower{conv_of(p.conv1), norm_of(p.bn1), conv_of(p.conv2), norm_of(p.bn2), c.pool_size, c.pool_stride};
}

inline Model model_of(const pjfnn::ModelParams& p) {
    return Model{tower_of(p.job, p.config.job), tower_of(p.resume, p.config.resume)};
}

/// Every learnable scalar in the same order as pjfnn::trainable_parameters.
inline std::vector<double*> slots(Tower& t) {
    std::vector<double*> out;
    for (auto* v : {&t.c1.w, &t.c1.b, &t.n1.gamma, &t.n1.beta, &t.c2.w, &t.c2.b, &t.n2.gamma, &t.n2.beta}) {
        for (double& x : *v) out.push_back(&x);
    }
    return out;
}

inline Mat conv(const Mat& x, const Conv& c) {
    const std::size_t len = x[0].size() - c.k + 1;
    Mat y(c.out, std::vector<double>(len));
    for (std::size_t o = 0; o < c.out; ++o) {
        for (std::size_t i = 0; i < len; ++i) {
            double s = c.b[o];
            for (std::size_t ch = 0; ch < c.in; ++ch) {
                for (std::size_t j = 0; j < c.k; ++j) s += c.w[(o * c.in + ch) * c.k + j] * x[ch][i + j];
            }
            y[o][i] = s;
        }
    }
    return y;
}

// Normalizes every item of the batch with statistics pooled over all of them.
inline void batch_norm(std::vector<Mat>& xs, const Norm& n) {
    const std::size_t channels = xs[0].size();
    for (std::size_t c = 0; c < channels; ++c) {
        double sum = 0.0, count = 0.0;
        for (const auto& x : xs) {
            for (double v : x[c]) sum += v, count += 1.0;
        }
        const double mean = sum / count;
        double var = 0.0;
        for (const auto& x : xs) {
            for (double v : x[c]) var += (v - mean) * (v - mean);
        }
        var /= count;
        const double inv = 1.0 / std::sqrt(var + n.eps);
        for (auto& x : xs) {
            for (double& v : x[c]) v = n.gamma[c] * (v - mean) * inv + n.beta[c];
        }
    }
}

inline void relu(std::vector<Mat>& xs, Trace* trace) {
    for (auto& x : xs) {
        for (auto& row : x) {
            for (double& v : row) {
                if (trace) trace->push_back(v > 0.0);
                v = std::max(v, 0.0);
            }
        }
    }
}

inline double traced_max(std::vector<double>::const_iterator begin, std::vector<double>::const_iterator end,
                         Trace* trace) {
    const auto it = std::max_element(begin, end);
    if (trace) trace->push_back(static_cast<std::uint32_t>(it - begin));
    return *it;
}

inline Mat pool(const Mat& x, std::size_t size, std::size_t stride, Trace* trace) {
    const std::size_t len = (x[0].size() - size) / stride + 1;
    Mat y(x.size(), std::vector<double>(len));
    for (std::size_t c = 0; c < x.size(); ++c) {
        for (std::size_t i = 0; i < len; ++i) {
            y[c][i] = traced_max(x[c].begin() + i * stride, x[c].begin() + i * stride + size, trace);
        }
    }
    return y;
}

inline std::size_t min_length(const Tower& t) { return (t.c2.k - 1) * t.stride + t.pool + t.c1.k - 1; }

/// Item latent vectors for a train-mode batch of items.
inline std::vector<std::vector<double>> encode_items(const Tower& t, const std::vector<const pjfnn::ItemMatrix*>& items,
                                                     Trace* trace = nullptr) {
    std::vector<Mat> xs;
    for (const auto* item : items) {
        const std::size_t d = item->dim();
        const std::size_t len = std::max(item->length(), min_length(t));
        Mat x(d, std::vector<double>(len, 0.0));
        for (std::size_t r = 0; r < d; ++r) {
            for (std::size_t c = 0; c < item->length(); ++c) x[r][c] = item->matrix.at(r, c);
        }
        xs.push_back(conv(x, t.c1));
    }
    batch_norm(xs, t.n1);
    relu(xs, trace);
    for (auto& x : xs) x = conv(pool(x, t.pool, t.stride, trace), t.c2);
    batch_norm(xs, t.n2);
    relu(xs, trace);
    std::vector<std::vector<double>> out;
    for (const auto& x : xs) {
        std::vector<double> v;
        for (const auto& row : x) v.push_back(traced_max(row.begin(), row.end(), trace));
        out.push_back(std::move(v));
    }
    return out;
}

/// Document latents in first-appearance order of `docs`.
inline std::vector<std::vector<double>> encode_documents(const Tower& t, bool is_job,
                                                         const std::vector<const pjfnn::Document*>& docs,
                                                         Trace* trace = nullptr) {
    std::vector<const pjfnn::ItemMatrix*> items;
    for (const auto* d : docs) {
        for (const auto& it : d->items) items.push_back(&it);
    }
    const auto latents = encode_items(t, items, trace);
    std::vector<std::vector<double>> out;
    std::size_t at = 0;
    for (const auto* d : docs) {
        std::vector<double> v = latents[at];
        for (std::size_t n = 1; n < d->items.size(); ++n) {
            for (std::size_t k = 0; k < v.size(); ++k) {
                if (is_job) {
                    const bool later = latents[at + n][k] > v[k];
                    if (trace) trace->push_back(later);
                    if (later) v[k] = latents[at + n][k];
                } else {
                    v[k] += latents[at + n][k];
                }
            }
        }
        if (!is_job) {
            for (double& x : v) x /= static_cast<double>(d->items.size());
        }
        at += d->items.size();
        out.push_back(std::move(v));
    }
    return out;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k], na += a[k] * a[k], nb += b[k] * b[k];
    return dot / std::sqrt(na * nb);
}

inline double objective(const Model& m, std::span<const pjfnn::DocumentPair> pos,
                        std::span<const pjfnn::DocumentPair> neg, double lambda, Trace* trace = nullptr) {
    std::vector<const pjfnn::Document*> jobs, resumes;
    std::map<const pjfnn::Document*, std::size_t> ji, ri;
    auto index = [](auto& order, auto& map, const pjfnn::Document* d) {
        auto [it, fresh] = map.emplace(d, order.size());
        if (fresh) order.push_back(d);
        return it->second;
    };
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (auto list : {pos, neg}) {
        for (const auto& p : list) pairs.emplace_back(index(jobs, ji, p.job), index(resumes, ri, p.resume));
    }
    const auto jv = encode_documents(m.job, true, jobs, trace);
    const auto rv = encode_documents(m.resume, false, resumes, trace);
    double loss = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const double c = cosine(jv[pairs[p].first], rv[pairs[p].second]);
        loss += p < pos.size() ? -c : c;
    }
    for (const Tower* t : {&m.job, &m.resume}) {
        for (const auto* v : {&t->c1.w, &t->c1.b, &t->c2.w, &t->c2.b}) {
            for (double x : *v) loss += lambda * x * x;
        }
    }
    return loss;
}

}  // namespace oracle
