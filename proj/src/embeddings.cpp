#include "pjfnn/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "pjfnn/error.hpp"
#include "pjfnn/rng.hpp"

namespace pjfnn {

std::string_view to_string(Side side) { return side == Side::job ? "job" : "resume"; }

Side parse_side(std::string_view text) {
    if (text == "job") return Side::job;
    if (text == "resume") return Side::resume;
    throw ConfigError("unknown side '" + std::string(text) + "' (expected job or resume)");
}

Vocabulary::Vocabulary() : tokens_{std::string(kOovToken)}, frequencies_{0} {}

Vocabulary Vocabulary::build(const Corpus& corpus, std::size_t min_count) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& sentence : corpus) {
        for (const auto& token : sentence) ++counts[token];
    }
    if (counts.empty()) throw EmptyCorpusError("cannot build a vocabulary from an empty corpus");

    std::vector<std::pair<std::string, std::uint64_t>> kept;
    for (auto& [token, count] : counts) {
        if (count >= min_count) kept.emplace_back(token, count);
    }
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

    std::vector<std::string> tokens;
    std::vector<std::uint64_t> freqs;
    for (auto& [token, count] : kept) {
        tokens.push_back(token);
        freqs.push_back(count);
    }
    return from_entries(std::move(tokens), std::move(freqs), min_count);
}

Vocabulary Vocabulary::from_entries(std::vector<std::string> tokens, std::vector<std::uint64_t> frequencies,
                                    std::size_t min_count) {
    if (tokens.size() != frequencies.size()) throw ContractError("vocabulary tokens and frequencies differ in length");
    Vocabulary v;
    v.min_count_ = min_count;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (frequencies[i] < min_count) throw DataError("vocabulary entry '" + tokens[i] + "' below min_count");
        if (tokens[i] == kOovToken || !v.index_.emplace(tokens[i], v.tokens_.size()).second) {
            throw DuplicateIdError("duplicate vocabulary token '" + tokens[i] + "'");
        }
        v.tokens_.push_back(std::move(tokens[i]));
        v.frequencies_.push_back(frequencies[i]);
    }
    return v;
}

std::size_t Vocabulary::id(std::string_view token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kOov : it->second;
}

namespace {

float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

}  // namespace

EmbeddingTable train_skipgram(const Corpus& corpus, const Vocabulary& vocab, const SkipGramConfig& config,
                              Side side) {
    if (config.dim == 0 || config.window == 0) throw ConfigError("skip-gram needs dim >= 1 and window >= 1");
    const std::size_t v = vocab.size();
    if (v - 1 < config.negatives + 1) {
        throw InsufficientVocabularyError("vocabulary of " + std::to_string(v - 1) + " tokens is too small for " +
                                          std::to_string(config.negatives) + " negative samples");
    }

    std::vector<std::vector<std::uint32_t>> sentences;
    std::uint64_t total_words = 0;
    for (const auto& sentence : corpus) {
        std::vector<std::uint32_t> ids;
        for (const auto& token : sentence) {
            const std::size_t id = vocab.id(token);
            if (id != Vocabulary::kOov) ids.push_back(static_cast<std::uint32_t>(id));
        }
        total_words += ids.size();
        if (ids.size() > 1) sentences.push_back(std::move(ids));
    }
    if (total_words == 0) throw EmptyCorpusError("corpus has no in-vocabulary tokens");

    // Cumulative unigram^0.75 distribution over ids 1..V-1.
    std::vector<double> cumulative(v, 0.0);
    for (std::size_t id = 1; id < v; ++id) {
        cumulative[id] = cumulative[id - 1] + std::pow(static_cast<double>(vocab.frequency(id)), 0.75);
    }
    const double noise_total = cumulative.back();

    Rng rng(config.seed);
    const std::size_t dim = config.dim;
    Tensor input(Shape{v, dim});
    std::vector<float> output(v * dim, 0.0f);
    for (float& x : input.data()) x = (rng.uniform() - 0.5f) / static_cast<float>(dim);

    std::vector<float> accum(dim);
    const double schedule_total = static_cast<double>(config.epochs) * static_cast<double>(total_words) + 1.0;
    std::uint64_t processed = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (const auto& sentence : sentences) {
            for (std::size_t pos = 0; pos < sentence.size(); ++pos, ++processed) {
                const double progress = static_cast<double>(processed) / schedule_total;
                const auto lr = static_cast<float>(config.lr * std::max(1e-4, 1.0 - progress));
                const std::size_t shrink = rng.below(config.window);
                const std::size_t reach = config.window - shrink;
                const std::size_t lo = pos >= reach ? pos - reach : 0;
                const std::size_t hi = std::min(sentence.size() - 1, pos + reach);
                const std::uint32_t center = sentence[pos];
                for (std::size_t c = lo; c <= hi; ++c) {
                    if (c == pos) continue;
                    float* in = input.data().data() + static_cast<std::size_t>(sentence[c]) * dim;
                    std::fill(accum.begin(), accum.end(), 0.0f);
                    for (std::size_t d = 0; d <= config.negatives; ++d) {
                        std::uint32_t target;
                        float label;
                        if (d == 0) {
                            target = center;
                            label = 1.0f;
                        } else {
                            const double u = rng.uniform_double() * noise_total;
                            target = static_cast<std::uint32_t>(
                                std::upper_bound(cumulative.begin() + 1, cumulative.end(), u) - cumulative.begin());
                            if (target >= v) target = static_cast<std::uint32_t>(v - 1);
                            if (target == center) continue;
                            label = 0.0f;
                        }
                        float* out = output.data() + static_cast<std::size_t>(target) * dim;
                        float dot = 0.0f;
                        for (std::size_t k = 0; k < dim; ++k) dot += in[k] * out[k];
                        float g;
                        if (dot > 6.0f) {
                            g = (label - 1.0f) * lr;
                        } else if (dot < -6.0f) {
                            g = label * lr;
                        } else {
                            g = (label - sigmoid(dot)) * lr;
                        }
                        for (std::size_t k = 0; k < dim; ++k) accum[k] += g * out[k];
                        for (std::size_t k = 0; k < dim; ++k) out[k] += g * in[k];
                    }
                    for (std::size_t k = 0; k < dim; ++k) in[k] += accum[k];
                }
            }
        }
    }

    for (float& x : input.row(Vocabulary::kOov)) x = 0.0f;
    return EmbeddingTable{side, std::move(input)};
}

ItemMatrix embed_item(std::span<const std::string> tokens, const Vocabulary& vocab, const EmbeddingTable& table) {
    if (tokens.empty()) throw ContractError("cannot embed an empty item");
    const std::size_t dim = table.dim();
    Tensor m(Shape{dim, tokens.size()});
    for (std::size_t j = 0; j < tokens.size(); ++j) {
        const auto vec = table.vector(vocab.id(tokens[j]));
        for (std::size_t d = 0; d < dim; ++d) m.at(d, j) = vec[d];
    }
    return ItemMatrix{table.side, std::move(m)};
}

float cosine(std::span<const float> a, std::span<const float> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0f;
    return static_cast<float>(dot / std::sqrt(na * nb));
}

}  // namespace pjfnn
