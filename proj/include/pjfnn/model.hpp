#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pjfnn/autograd.hpp"
#include "pjfnn/data.hpp"
#include "pjfnn/embeddings.hpp"
#include "pjfnn/layers.hpp"

namespace pjfnn {

/// One encoder tower: conv -> bn -> relu -> maxpool -> conv -> bn -> relu -> global maxpool.
struct TowerConfig {
    std::size_t input_dim = 64;
    std::size_t conv1_channels = 64;
    std::size_t conv1_width = 3;
    std::size_t pool_size = 2;
    std::size_t pool_stride = 2;
    std::size_t conv2_width = 3;

    /// Shortest item the tower accepts without padding.
    std::size_t min_item_length() const;

    friend bool operator==(const TowerConfig&, const TowerConfig&) = default;
};

struct ModelConfig {
    std::size_t latent = 64;
    TowerConfig job{256, 128, 3, 2, 2, 3};
    TowerConfig resume{64, 64, 3, 2, 2, 3};
    float bn_epsilon = 1e-5f;
    float bn_momentum = 0.9f;

    const TowerConfig& tower(Side side) const { return side == Side::job ? job : resume; }
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TowerParams {
    Conv1dParams conv1;
    BatchNormParams bn1;
    Conv1dParams conv2;
    BatchNormParams bn2;
};

/// Every learnable tensor of both towers plus the batch-norm running statistics.
struct ModelParams {
    ModelConfig config;
    TowerParams job;
    TowerParams resume;

    const TowerParams& tower(Side side) const { return side == Side::job ? job : resume; }
    TowerParams& tower(Side side) { return side == Side::job ? job : resume; }
};

/// Glorot-initialized kernels, zero biases, unit gamma, zero beta, running stats (0, 1).
ModelParams init_model(const ModelConfig& config, std::uint64_t seed);

/// Learnable tensors keyed by dotted name, e.g. "job.conv1.kernels".
std::vector<std::pair<std::string, Tensor*>> trainable_parameters(ModelParams& params);
std::vector<std::pair<std::string, const Tensor*>> trainable_parameters(const ModelParams& params);
/// Names of the tensors included in the L2 penalty (convolution kernels and biases).
bool is_regularized(const std::string& name);

/// A job posting or resume with its items embedded.
struct Document {
    std::string id;
    Side side = Side::job;
    Category category = Category::O;
    int year = 0;
    std::vector<ItemMatrix> items;
};

Document embed_document(const RawDocument& raw, const SideEmbedding& embedding);

struct LatentVector {
    Tensor values;  // [l]

    std::size_t size() const { return values.size(); }
    float operator[](std::size_t i) const { return values[i]; }
    std::span<const float> data() const { return values.data(); }
    bool is_zero() const;
};

// Tape-level forward pass, shared by training and inference.

struct TowerVars {
    Conv1dVars conv1;
    BatchNormVars bn1;
    Conv1dVars conv2;
    BatchNormVars bn2;
};

struct ModelVars {
    TowerVars job;
    TowerVars resume;

    const TowerVars& tower(Side side) const { return side == Side::job ? job : resume; }
};

/// Places the model's tensors on `tape`, as named parameters when `trainable`
/// and as constants otherwise. `params` must outlive the tape.
ModelVars bind_model(Tape& tape, const ModelParams& params, bool trainable);

struct TowerStats {
    BatchStats bn1;
    BatchStats bn2;
};

/// Item latent vectors as columns of an [l x n_items] result. Items shorter
/// than the tower's minimum length are right-padded with zero embeddings.
/// In train mode batch statistics span all items; `stats` receives them.
Var encode_items(Tape& tape, const TowerVars& vars, const TowerConfig& tower, std::span<const ItemMatrix* const> items,
                 Mode mode, TowerStats* stats = nullptr);

/// Document latent vectors as columns of an [l x n_docs] result: coordinatewise
/// maximum over items for jobs, mean over items for resumes.
Var encode_documents(Tape& tape, const ModelVars& vars, const ModelConfig& config, Side side,
                     std::span<const Document* const> docs, Mode mode, TowerStats* stats = nullptr);

// Inference API. Train mode uses batch statistics but never updates the
// running statistics stored in `params`.

LatentVector encode_item(const ItemMatrix& item, const ModelParams& params, Mode mode = Mode::eval);
std::vector<LatentVector> encode_item_list(const Document& doc, const ModelParams& params);
LatentVector encode_job(const Document& job, const ModelParams& params, Mode mode = Mode::eval);
LatentVector encode_resume(const Document& resume, const ModelParams& params, Mode mode = Mode::eval);
LatentVector encode_document(const Document& doc, const ModelParams& params, Mode mode = Mode::eval);

/// Eval-mode encodings of many documents, split over up to `threads` workers.
std::vector<LatentVector> encode_many(std::span<const Document* const> docs, const ModelParams& params,
                                      std::size_t threads = 1);

/// Cosine similarity clamped to [-1, 1]; 0 when either vector has zero norm.
double cosine_similarity(const LatentVector& u, const LatentVector& v);

/// Eval-mode fit score in [-1, 1]. A zero latent vector yields 0 and a warning.
double score(const Document& job, const Document& resume, const ModelParams& params);
double score_latents(const LatentVector& job, const LatentVector& resume, std::string_view context = {});

/// Entry (a, b) compares requirement item a with experience item b.
std::vector<std::vector<double>> item_similarity_matrix(const Document& job, const Document& resume,
                                                        const ModelParams& params);

}  // namespace pjfnn
