#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pjfnn/autograd.hpp"
#include "pjfnn/data.hpp"
#include "pjfnn/model.hpp"

namespace pjfnn {

/// Where negative pairs come from: resumes re-paired with random jobs, or
/// recorded failed applications.
enum class NegativeMode { synthetic, real };

std::string_view to_string(NegativeMode mode);
NegativeMode parse_negative_mode(std::string_view text);

struct TrainConfig {
    double lambda = 1e-4;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t epochs = 20;
    std::size_t batch_size = 64;  // positives per mini-batch
    NegativeMode negative_mode = NegativeMode::synthetic;
    double negatives_per_positive = 1.0;
    bool resample_negatives = true;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Negative cosine similarity. Throws UndefinedDistanceError for a zero vector.
double cosine_distance(const LatentVector& u, const LatentVector& v);

struct DocumentPair {
    const Document* job = nullptr;
    const Document* resume = nullptr;
};

struct Objective {
    Var loss;             // float32 scalar on the tape
    double value = 0.0;   // same objective evaluated in double from the latent vectors
    TowerStats job_stats;
    TowerStats resume_stats;
};

/// Per-pair cosine similarity between columns of J [l x n_j] and R [l x n_r].
/// A pair whose norm product underflows contributes 0 with zero gradient.
Var pair_cosine(const Var& jobs, const Var& resumes, std::span<const std::pair<std::size_t, std::size_t>> pairs);

/// sum over positives of D(j, r) - sum over negatives of D(j, r) + lambda * ||theta||^2,
/// with D the negative cosine and theta the convolution kernels and biases.
/// Both towers run in train mode over the union of the batch's documents.
Objective objective(Tape& tape, const ModelVars& vars, const ModelParams& params,
                    std::span<const DocumentPair> positives, std::span<const DocumentPair> negatives, double lambda);

using PairSet = std::set<std::pair<std::string, std::string>>;

/// Synthetic mode keeps each chosen positive's resume and substitutes a
/// uniformly drawn different job, never recreating a pair in `forbidden`
/// (defaults to the positives). Real mode draws from `failures`, without
/// replacement when the pool is large enough.
std::vector<ApplicationRecord> sample_negatives(std::span<const ApplicationRecord> positives,
                                                std::span<const std::string> jobs,
                                                std::span<const ApplicationRecord> failures, NegativeMode mode,
                                                double ratio, std::uint64_t seed, const PairSet* forbidden = nullptr);

PairSet positive_pairs(std::span<const ApplicationRecord> records);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::map<std::string, Tensor> first_moment;
    std::map<std::string, Tensor> second_moment;
    std::uint64_t step = 0;
};

using NamedParameters = std::vector<std::pair<std::string, Tensor*>>;

/// Bias-corrected Adam update. Gradients must be keyed exactly like the parameters.
void adam_step(const NamedParameters& params, const Gradients& grads, AdamState& state, const AdamConfig& config);

struct EpochLog {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    std::size_t batches = 0;
};

struct TrainResult {
    ModelParams params;
    ModelParams initial_params;
    std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains on the successful applications in `records` (the training split).
/// Real-mode negatives come from the failed applications in `records`.
TrainResult train(const Dataset& dataset, std::span<const ApplicationRecord> records, const Embeddings& embeddings,
                  const ModelConfig& model_config, const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace pjfnn
