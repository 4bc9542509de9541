#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pjfnn/data.hpp"
#include "pjfnn/model.hpp"
#include "pjfnn/training.hpp"

namespace pjfnn {

/// Mann-Whitney AUC with ties counted as one half. Labels are 0 or 1.
double auc(std::span<const double> scores, std::span<const int> labels);

enum class Grouping { overall, year, category };

std::string_view to_string(Grouping g);
Grouping parse_grouping(std::string_view text);

struct ScoredRecord {
    std::string job_id;
    std::string resume_id;
    int label = 0;
    int year = 0;
    Category category = Category::O;
    double score = 0.0;
};

struct GroupResult {
    std::string key;
    std::size_t count = 0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::optional<double> auc;  // empty when the group lacks a class
};

struct EvalReport {
    std::string model;
    Grouping grouping = Grouping::overall;
    std::vector<GroupResult> groups;
    std::vector<ScoredRecord> records;

    /// First group's AUC; throws UndefinedAucError if it was skipped.
    double overall_auc() const;

    nlohmann::json to_json() const;
    std::string to_table() const;
};

/// Groups already-scored records and computes one AUC per group.
EvalReport make_report(std::string model, std::vector<ScoredRecord> records, Grouping grouping);

/// Scores every record with the eval-mode model. The category of a record is
/// its job's category.
EvalReport evaluate(const ModelParams& params, const Embeddings& embeddings, const Dataset& dataset,
                    std::span<const ApplicationRecord> records, Grouping grouping, std::size_t threads = 1);

/// Positives of a split plus one negative per positive: re-paired resumes in
/// synthetic mode (never recreating any known success), the split's own
/// failures in real mode.
std::vector<ApplicationRecord> evaluation_records(const Dataset& dataset, std::span<const ApplicationRecord> split,
                                                  NegativeMode mode, std::uint64_t seed);

struct BaselineConfig {
    double l2 = 1e-4;
    std::size_t epochs = 50;
    double lr = 0.1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
};

/// Mean of a document's in-vocabulary word vectors (zero if none).
std::vector<double> mean_word_vector(const RawDocument& doc, const SideEmbedding& embedding);

/// Standardized logistic regression fitted by mini-batch gradient descent.
struct LogisticModel {
    std::vector<double> mean;
    std::vector<double> scale;
    std::vector<double> weights;
    double bias = 0.0;

    double logit(std::span<const double> features) const;
};

LogisticModel fit_logistic(const std::vector<std::vector<double>>& features, std::span<const int> labels,
                           const BaselineConfig& config);

/// Logistic regression over concatenated job and resume mean word vectors.
/// `train` and `test` must already contain both classes.
EvalReport baseline_meanvec(const Dataset& dataset, std::span<const ApplicationRecord> train,
                            std::span<const ApplicationRecord> test, const Embeddings& embeddings,
                            const BaselineConfig& config, Grouping grouping = Grouping::overall);

}  // namespace pjfnn
