#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pjfnn/tensor.hpp"

namespace pjfnn {

enum class Side { job, resume };

std::string_view to_string(Side side);
Side parse_side(std::string_view text);

using Sentence = std::vector<std::string>;
using Corpus = std::vector<Sentence>;

/// Token <-> dense id map. Id 0 is reserved for out-of-vocabulary and padding.
class Vocabulary {
public:
    static constexpr std::size_t kOov = 0;
    static constexpr std::string_view kOovToken = "<unk>";

    Vocabulary();

    /// Keeps every token seen at least `min_count` times. Ids are assigned by
    /// descending frequency, ties broken lexicographically.
    static Vocabulary build(const Corpus& corpus, std::size_t min_count);
    /// Reassembles a vocabulary from its serialized entries (OOV excluded).
    static Vocabulary from_entries(std::vector<std::string> tokens, std::vector<std::uint64_t> frequencies,
                                   std::size_t min_count);

    std::size_t id(std::string_view token) const;
    const std::string& token(std::size_t id) const { return tokens_.at(id); }
    std::uint64_t frequency(std::size_t id) const { return frequencies_.at(id); }
    bool contains(std::string_view token) const { return id(token) != kOov; }

    /// Number of ids including the OOV slot.
    std::size_t size() const { return tokens_.size(); }
    std::size_t min_count() const { return min_count_; }

    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::vector<std::uint64_t>& frequencies() const { return frequencies_; }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
        return a.tokens_ == b.tokens_ && a.frequencies_ == b.frequencies_ && a.min_count_ == b.min_count_;
    }

private:
    struct Hash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
    };

    std::unordered_map<std::string, std::size_t, Hash, std::equal_to<>> index_;
    std::vector<std::string> tokens_;
    std::vector<std::uint64_t> frequencies_;
    std::size_t min_count_ = 1;
};

/// Frozen word vectors for one side; row 0 (OOV/padding) is all zero.
struct EmbeddingTable {
    Side side = Side::job;
    Tensor vectors;  // [|V| x dim]

    std::size_t dim() const { return vectors.dim(1); }
    std::size_t rows() const { return vectors.dim(0); }
    std::span<const float> vector(std::size_t id) const { return vectors.row(id); }

    friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;
};

struct SkipGramConfig {
    std::size_t dim = 64;
    std::size_t window = 5;
    std::size_t negatives = 5;
    std::size_t epochs = 5;
    float lr = 0.025f;
    std::uint64_t seed = 1;
};

/// Skip-gram with negative sampling over a unigram^0.75 noise distribution.
/// The learning rate decays linearly towards 1e-4 of its starting value.
/// Sentences are the context boundary; out-of-vocabulary tokens are skipped.
EmbeddingTable train_skipgram(const Corpus& corpus, const Vocabulary& vocab, const SkipGramConfig& config,
                              Side side);

/// One requirement or work-experience item as a [dim x |S|] matrix whose
/// column j is the vector of token j.
struct ItemMatrix {
    Side side = Side::job;
    Tensor matrix;

    std::size_t dim() const { return matrix.dim(0); }
    std::size_t length() const { return matrix.dim(1); }
};

ItemMatrix embed_item(std::span<const std::string> tokens, const Vocabulary& vocab, const EmbeddingTable& table);

/// Vocabulary and table for one tower.
struct SideEmbedding {
    Vocabulary vocab;
    EmbeddingTable table;
};

struct Embeddings {
    SideEmbedding job;
    SideEmbedding resume;

    const SideEmbedding& side(Side s) const { return s == Side::job ? job : resume; }
};

float cosine(std::span<const float> a, std::span<const float> b);

}  // namespace pjfnn
