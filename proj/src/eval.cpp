#include "pjfnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "pjfnn/error.hpp"
#include "pjfnn/rng.hpp"

namespace pjfnn {

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw ContractError("auc: " + std::to_string(scores.size()) + " scores but " + std::to_string(labels.size()) +
                            " labels");
    }
    std::size_t pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw ContractError("auc: labels must be 0 or 1");
        if (std::isnan(scores[i])) throw NumericError("auc: NaN score at index " + std::to_string(i));
        pos += static_cast<std::size_t>(labels[i]);
    }
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) throw UndefinedAucError("auc needs at least one positive and one negative");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of (1-based, tie-averaged) ranks of the positives, kept doubled so it stays integral.
    std::uint64_t doubled_rank_sum = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const std::uint64_t doubled_rank = i + 1 + j;  // 2 * mean of ranks i+1 .. j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) doubled_rank_sum += doubled_rank;
        }
        i = j;
    }
    const std::uint64_t doubled_u = doubled_rank_sum - static_cast<std::uint64_t>(pos) * (pos + 1);
    return static_cast<double>(doubled_u) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

std::string_view to_string(Grouping g) {
    switch (g) {
        case Grouping::overall: return "overall";
        case Grouping::year: return "year";
        case Grouping::category: return "category";
    }
    return "overall";
}

Grouping parse_grouping(std::string_view text) {
    if (text == "overall") return Grouping::overall;
    if (text == "year") return Grouping::year;
    if (text == "category") return Grouping::category;
    throw ConfigError("unknown grouping '" + std::string(text) + "' (expected overall, year or category)");
}

double EvalReport::overall_auc() const {
    if (groups.empty() || !groups.front().auc) throw UndefinedAucError("report has no defined AUC");
    return *groups.front().auc;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json out;
    out["model"] = model;
    out["grouping"] = std::string(to_string(grouping));
    out["groups"] = nlohmann::json::array();
    for (const auto& g : groups) {
        nlohmann::json row{{"key", g.key}, {"count", g.count}, {"positives", g.positives}, {"negatives", g.negatives}};
        row["auc"] = g.auc ? nlohmann::json(*g.auc) : nlohmann::json(nullptr);
        row["skipped"] = !g.auc.has_value();
        out["groups"].push_back(std::move(row));
    }
    out["records"] = nlohmann::json::array();
    for (const auto& r : records) {
        out["records"].push_back({{"job_id", r.job_id},
                                  {"resume_id", r.resume_id},
                                  {"label", r.label},
                                  {"year", r.year},
                                  {"category", std::string(to_string(r.category))},
                                  {"score", r.score}});
    }
    return out;
}

std::string EvalReport::to_table() const {
    std::ostringstream out;
    char line[128];
    std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %9s\n", to_string(grouping).data(), "count", "pos", "neg", "auc");
    out << "model: " << model << '\n' << line;
    for (const auto& g : groups) {
        if (g.auc) {
            std::snprintf(line, sizeof line, "%-10s %8zu %8zu %8zu %9.5f\n", g.key.c_str(), g.count, g.positives,
                          g.negatives, *g.auc);
        } else {
            std::snprintf(line, sizeof line, "%-10s %8zu %8zu %8zu %9s\n", g.key.c_str(), g.count, g.positives,
                          g.negatives, "skipped");
        }
        out << line;
    }
    return out.str();
}

EvalReport make_report(std::string model, std::vector<ScoredRecord> records, Grouping grouping) {
    if (records.empty()) throw DataError("cannot evaluate an empty split");
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        std::string key = grouping == Grouping::overall ? "overall"
                          : grouping == Grouping::year  ? std::to_string(r.year)
                                                        : std::string(to_string(r.category));
        members[key].push_back(i);
    }
    EvalReport report;
    report.model = std::move(model);
    report.grouping = grouping;
    for (const auto& [key, idx] : members) {
        GroupResult g;
        g.key = key;
        g.count = idx.size();
        std::vector<double> s;
        std::vector<int> l;
        for (std::size_t i : idx) {
            s.push_back(records[i].score);
            l.push_back(records[i].label);
            (records[i].label ? g.positives : g.negatives) += 1;
        }
        if (g.positives > 0 && g.negatives > 0) g.auc = auc(s, l);
        report.groups.push_back(std::move(g));
    }
    report.records = std::move(records);
    return report;
}

EvalReport evaluate(const ModelParams& params, const Embeddings& embeddings, const Dataset& dataset,
                    std::span<const ApplicationRecord> records, Grouping grouping, std::size_t threads) {
    if (records.empty()) throw DataError("cannot evaluate an empty split");
    std::map<std::string, std::size_t> job_slot;
    std::map<std::string, std::size_t> resume_slot;
    for (const auto& r : records) {
        job_slot.emplace(r.job_id, 0);
        resume_slot.emplace(r.resume_id, 0);
    }
    auto encode_side = [&](std::map<std::string, std::size_t>& slots, Side side) {
        std::vector<Document> docs;
        docs.reserve(slots.size());
        for (auto& [id, slot] : slots) {
            slot = docs.size();
            docs.push_back(embed_document(dataset.document(side, id), embeddings.side(side)));
        }
        std::vector<const Document*> ptrs;
        for (const auto& d : docs) ptrs.push_back(&d);
        return encode_many(ptrs, params, threads);
    };
    const std::vector<LatentVector> job_latents = encode_side(job_slot, Side::job);
    const std::vector<LatentVector> resume_latents = encode_side(resume_slot, Side::resume);

    std::vector<ScoredRecord> scored;
    scored.reserve(records.size());
    for (const auto& r : records) {
        ScoredRecord s{r.job_id, r.resume_id, r.label == Label::success ? 1 : 0, r.year,
                       dataset.job(r.job_id).category, 0.0};
        s.score = score_latents(job_latents[job_slot.at(r.job_id)], resume_latents[resume_slot.at(r.resume_id)],
                                r.job_id + "/" + r.resume_id);
        scored.push_back(std::move(s));
    }
    return make_report("pjfnn", std::move(scored), grouping);
}

std::vector<ApplicationRecord> evaluation_records(const Dataset& dataset, std::span<const ApplicationRecord> split,
                                                  NegativeMode mode, std::uint64_t seed) {
    std::vector<ApplicationRecord> positives;
    std::vector<ApplicationRecord> failures;
    for (const auto& r : split) (r.label == Label::success ? positives : failures).push_back(r);
    const PairSet known = positive_pairs(dataset.applications);
    const std::vector<std::string> jobs = dataset.job_ids();
    std::vector<ApplicationRecord> negatives = sample_negatives(positives, jobs, failures, mode, 1.0, seed, &known);
    positives.insert(positives.end(), negatives.begin(), negatives.end());
    return positives;
}

std::vector<double> mean_word_vector(const RawDocument& doc, const SideEmbedding& embedding) {
    const std::size_t dim = embedding.table.dim();
    std::vector<double> sum(dim, 0.0);
    std::size_t n = 0;
    for (const auto& item : doc.items) {
        for (const auto& token : item) {
            const std::size_t id = embedding.vocab.id(token);
            if (id == Vocabulary::kOov) continue;
            const auto v = embedding.table.vector(id);
            for (std::size_t k = 0; k < dim; ++k) sum[k] += v[k];
            ++n;
        }
    }
    if (n > 0) {
        for (double& x : sum) x /= static_cast<double>(n);
    }
    return sum;
}

double LogisticModel::logit(std::span<const double> features) const {
    if (features.size() != weights.size()) throw DimensionError("logistic model: feature width mismatch");
    double z = bias;
    for (std::size_t k = 0; k < weights.size(); ++k) z += weights[k] * (features[k] - mean[k]) / scale[k];
    return z;
}

LogisticModel fit_logistic(const std::vector<std::vector<double>>& features, std::span<const int> labels,
                           const BaselineConfig& config) {
    if (features.empty() || features.size() != labels.size()) throw ContractError("fit_logistic: bad training set");
    if (config.batch_size == 0) throw ConfigError("baseline batch size must be positive");
    const std::size_t n = features.size();
    const std::size_t d = features.front().size();
    LogisticModel m;
    m.mean.assign(d, 0.0);
    m.scale.assign(d, 0.0);
    m.weights.assign(d, 0.0);
    for (const auto& f : features) {
        if (f.size() != d) throw DimensionError("fit_logistic: ragged feature rows");
        for (std::size_t k = 0; k < d; ++k) m.mean[k] += f[k];
    }
    for (double& x : m.mean) x /= static_cast<double>(n);
    for (const auto& f : features) {
        for (std::size_t k = 0; k < d; ++k) m.scale[k] += (f[k] - m.mean[k]) * (f[k] - m.mean[k]);
    }
    for (double& x : m.scale) {
        x = std::sqrt(x / static_cast<double>(n));
        if (x < 1e-12) x = 1.0;
    }
    std::vector<std::vector<double>> z(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) z[i][k] = (features[i][k] - m.mean[k]) / m.scale[k];
    }

    Rng rng(config.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> gw(d);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t stop = std::min(n, start + config.batch_size);
            std::fill(gw.begin(), gw.end(), 0.0);
            double gb = 0.0;
            for (std::size_t b = start; b < stop; ++b) {
                const auto& x = z[order[b]];
                double logit = m.bias;
                for (std::size_t k = 0; k < d; ++k) logit += m.weights[k] * x[k];
                const double p = 1.0 / (1.0 + std::exp(-logit));
                const double err = p - labels[order[b]];
                for (std::size_t k = 0; k < d; ++k) gw[k] += err * x[k];
                gb += err;
            }
            const double inv = 1.0 / static_cast<double>(stop - start);
            for (std::size_t k = 0; k < d; ++k) m.weights[k] -= config.lr * (gw[k] * inv + config.l2 * m.weights[k]);
            m.bias -= config.lr * gb * inv;
        }
    }
    return m;
}

EvalReport baseline_meanvec(const Dataset& dataset, std::span<const ApplicationRecord> train,
                            std::span<const ApplicationRecord> test, const Embeddings& embeddings,
                            const BaselineConfig& config, Grouping grouping) {
    if (train.empty() || test.empty()) throw DataError("baseline needs non-empty train and test splits");
    std::map<std::string, std::vector<double>> job_vec;
    std::map<std::string, std::vector<double>> resume_vec;
    auto features = [&](const ApplicationRecord& r) {
        auto j = job_vec.find(r.job_id);
        if (j == job_vec.end()) j = job_vec.emplace(r.job_id, mean_word_vector(dataset.job(r.job_id), embeddings.job)).first;
        auto v = resume_vec.find(r.resume_id);
        if (v == resume_vec.end()) {
            v = resume_vec.emplace(r.resume_id, mean_word_vector(dataset.resume(r.resume_id), embeddings.resume)).first;
        }
        std::vector<double> f = j->second;
        f.insert(f.end(), v->second.begin(), v->second.end());
        return f;
    };
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (const auto& r : train) {
        x.push_back(features(r));
        y.push_back(r.label == Label::success ? 1 : 0);
    }
    const LogisticModel model = fit_logistic(x, y, config);
    std::vector<ScoredRecord> scored;
    for (const auto& r : test) {
        const std::vector<double> f = features(r);
        scored.push_back(ScoredRecord{r.job_id, r.resume_id, r.label == Label::success ? 1 : 0, r.year,
                                      dataset.job(r.job_id).category, model.logit(f)});
    }
    return make_report("meanvec-logistic", std::move(scored), grouping);
}

}  // namespace pjfnn
