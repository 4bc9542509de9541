#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pjfnn/data.hpp"
#include "pjfnn/model.hpp"

namespace pjfnn {

/// Writes one CSV row per document (item_index -1) followed by one per item:
/// id,side,level,item_index,v0..v{l-1}. A document that fails to encode is
/// skipped and its message appended to the returned list.
std::vector<std::string> export_representations(const ModelParams& params, std::span<const Document* const> docs,
                                                std::ostream& out, std::size_t threads = 1);

/// Function words excluded from keyword counts by default.
const std::vector<std::string>& default_stop_tokens();

struct KeywordConfig {
    std::size_t top_k = 10;
    double quantile = 0.9;
    std::vector<std::string> stop_tokens = default_stop_tokens();
};

struct DimensionKeywords {
    std::size_t dim = 0;
    Side side = Side::job;
    double threshold = 0.0;
    std::size_t documents_selected = 0;
    std::vector<std::pair<std::string, std::size_t>> keywords;  // frequency desc, then token asc
};

/// Linearly interpolated quantile of `values` (q in [0, 1]).
double quantile_of(std::vector<double> values, double q);

/// Keywords of the documents whose activation at `dim` is at or above the
/// configured quantile. `latents[i]` must be the encoding of `docs[i]`.
DimensionKeywords dimension_keywords(std::span<const RawDocument* const> docs, std::span<const LatentVector> latents,
                                     std::size_t dim, const KeywordConfig& config);

/// Convenience overload that encodes `docs` first.
DimensionKeywords dimension_keywords(const ModelParams& params, const SideEmbedding& embedding,
                                     std::span<const RawDocument* const> docs, std::size_t dim,
                                     const KeywordConfig& config, std::size_t threads = 1);

/// Dimension with the largest mean activation over the `members` subset of `latents`.
std::size_t best_aligned_dimension(std::span<const LatentVector> latents, std::span<const bool> members);

struct SimilarityReport {
    std::string job_id;
    std::string resume_id;
    double score = 0.0;
    std::vector<std::string> job_items;
    std::vector<std::string> resume_items;
    std::vector<std::vector<double>> matrix;  // [job item][resume item]

    std::string to_text() const;
};

/// Item texts are cut to `max_text` characters (with a trailing "...").
SimilarityReport similarity_report(const ModelParams& params, const Embeddings& embeddings, const RawDocument& job,
                                   const RawDocument& resume, std::size_t max_text = 40);

}  // namespace pjfnn
