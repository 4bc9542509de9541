#include "pjfnn/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "pjfnn/error.hpp"

namespace pjfnn {

namespace {

void append_float(std::string& out, float value) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    out.append(buf, end);
}

void append_row(std::string& out, const Document& doc, std::string_view level, long index, const LatentVector& v) {
    out += doc.id;
    out += ',';
    out += to_string(doc.side);
    out += ',';
    out += level;
    out += ',';
    out += std::to_string(index);
    for (float x : v.data()) {
        out += ',';
        append_float(out, x);
    }
    out += '\n';
}

std::string join_tokens(const Sentence& tokens, std::size_t max_text) {
    std::string text;
    for (const auto& t : tokens) {
        if (!text.empty()) text += ' ';
        text += t;
    }
    if (text.size() > max_text) {
        const std::size_t keep = max_text > 3 ? max_text - 3 : 0;
        text = text.substr(0, keep) + "...";
    }
    return text;
}

}  // namespace

std::vector<std::string> export_representations(const ModelParams& params, std::span<const Document* const> docs,
                                                std::ostream& out, std::size_t threads) {
    std::vector<std::string> rows(docs.size());
    std::vector<std::string> errors(docs.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const Document& doc = *docs[i];
            try {
                std::string text;
                append_row(text, doc, "document", -1, encode_document(doc, params));
                const std::vector<LatentVector> items = encode_item_list(doc, params);
                for (std::size_t k = 0; k < items.size(); ++k) {
                    append_row(text, doc, "item", static_cast<long>(k), items[k]);
                }
                rows[i] = std::move(text);
            } catch (const std::exception& e) {
                errors[i] = doc.id + ": " + e.what();
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, docs.size()));
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < workers; ++w) {
            pool.emplace_back(work, w * docs.size() / workers, (w + 1) * docs.size() / workers);
        }
        work(0, docs.size() / workers);
    }

    out << "id,side,level,item_index";
    for (std::size_t k = 0; k < params.config.latent; ++k) out << ",v" << k;
    out << '\n';
    std::vector<std::string> messages;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        out << rows[i];
        if (!errors[i].empty()) messages.push_back(std::move(errors[i]));
    }
    return messages;
}

const std::vector<std::string>& default_stop_tokens() {
    static const std::vector<std::string> words{"a",  "an", "and", "as",  "at",   "by",   "for",  "from", "in",
                                                "is", "of", "on",  "or",  "the",  "to",   "with", "<unk>"};
    return words;
}

double quantile_of(std::vector<double> values, double q) {
    if (values.empty()) throw ContractError("quantile of an empty list");
    if (!(q >= 0.0 && q <= 1.0)) throw ContractError("quantile must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

DimensionKeywords dimension_keywords(std::span<const RawDocument* const> docs, std::span<const LatentVector> latents,
                                     std::size_t dim, const KeywordConfig& config) {
    if (!(config.quantile > 0.0 && config.quantile < 1.0)) throw ConfigError("quantile must lie strictly between 0 and 1");
    if (docs.size() != latents.size()) throw ContractError("dimension_keywords: documents and latents differ in count");
    DimensionKeywords result;
    result.dim = dim;
    if (docs.empty()) return result;
    result.side = docs.front()->side;
    if (dim >= latents.front().size()) {
        throw ConfigError("dimension " + std::to_string(dim) + " out of range for latent size " +
                          std::to_string(latents.front().size()));
    }
    std::vector<double> activations;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (docs[i]->side != result.side) throw ContractError("dimension_keywords: documents from both sides");
        activations.push_back(latents[i][dim]);
    }
    result.threshold = quantile_of(activations, config.quantile);

    const std::set<std::string, std::less<>> stop(config.stop_tokens.begin(), config.stop_tokens.end());
    std::map<std::string, std::size_t, std::less<>> counts;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (activations[i] < result.threshold) continue;
        ++result.documents_selected;
        for (const auto& item : docs[i]->items) {
            for (const auto& token : item) {
                if (!stop.contains(token)) ++counts[token];
            }
        }
    }
    result.keywords.assign(counts.begin(), counts.end());
    std::stable_sort(result.keywords.begin(), result.keywords.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (result.keywords.size() > config.top_k) result.keywords.resize(config.top_k);
    return result;
}

DimensionKeywords dimension_keywords(const ModelParams& params, const SideEmbedding& embedding,
                                     std::span<const RawDocument* const> docs, std::size_t dim,
                                     const KeywordConfig& config, std::size_t threads) {
    std::vector<Document> embedded;
    embedded.reserve(docs.size());
    for (const RawDocument* d : docs) embedded.push_back(embed_document(*d, embedding));
    std::vector<const Document*> ptrs;
    for (const auto& d : embedded) ptrs.push_back(&d);
    const std::vector<LatentVector> latents = encode_many(ptrs, params, threads);
    return dimension_keywords(docs, latents, dim, config);
}

std::size_t best_aligned_dimension(std::span<const LatentVector> latents, std::span<const bool> members) {
    if (latents.empty() || latents.size() != members.size()) throw ContractError("best_aligned_dimension: bad input");
    const std::size_t l = latents.front().size();
    std::vector<double> sum(l, 0.0);
    std::size_t n = 0;
    for (std::size_t i = 0; i < latents.size(); ++i) {
        if (!members[i]) continue;
        ++n;
        for (std::size_t k = 0; k < l; ++k) sum[k] += latents[i][k];
    }
    if (n == 0) throw ContractError("best_aligned_dimension: empty member set");
    return static_cast<std::size_t>(std::max_element(sum.begin(), sum.end()) - sum.begin());
}

std::string SimilarityReport::to_text() const {
    std::ostringstream out;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", score);
    out << "job " << job_id << " / resume " << resume_id << "  score " << buf << '\n';
    out << "requirements:\n";
    for (std::size_t a = 0; a < job_items.size(); ++a) out << "  J" << a << "  " << job_items[a] << '\n';
    out << "experience:\n";
    for (std::size_t b = 0; b < resume_items.size(); ++b) out << "  R" << b << "  " << resume_items[b] << '\n';
    out << "      ";
    for (std::size_t b = 0; b < resume_items.size(); ++b) {
        std::snprintf(buf, sizeof buf, "%8s", ("R" + std::to_string(b)).c_str());
        out << buf;
    }
    out << '\n';
    for (std::size_t a = 0; a < matrix.size(); ++a) {
        std::snprintf(buf, sizeof buf, "%-6s", ("J" + std::to_string(a)).c_str());
        out << buf;
        for (double v : matrix[a]) {
            std::snprintf(buf, sizeof buf, "%8.3f", v);
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

SimilarityReport similarity_report(const ModelParams& params, const Embeddings& embeddings, const RawDocument& job,
                                   const RawDocument& resume, std::size_t max_text) {
    const Document j = embed_document(job, embeddings.job);
    const Document r = embed_document(resume, embeddings.resume);
    SimilarityReport report;
    report.job_id = job.id;
    report.resume_id = resume.id;
    report.score = score(j, r, params);
    report.matrix = item_similarity_matrix(j, r, params);
    for (const auto& item : job.items) report.job_items.push_back(join_tokens(item, max_text));
    for (const auto& item : resume.items) report.resume_items.push_back(join_tokens(item, max_text));
    return report;
}

}  // namespace pjfnn
