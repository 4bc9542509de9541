#include "pjfnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "pjfnn/error.hpp"
#include "pjfnn/rng.hpp"

namespace pjfnn {

std::string_view to_string(NegativeMode mode) { return mode == NegativeMode::synthetic ? "synthetic" : "real"; }

NegativeMode parse_negative_mode(std::string_view text) {
    if (text == "synthetic") return NegativeMode::synthetic;
    if (text == "real") return NegativeMode::real;
    throw ConfigError("unknown negative mode '" + std::string(text) + "' (expected synthetic or real)");
}

void TrainConfig::validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
    if (!(lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in (0, 1)");
    if (!(eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (!(negatives_per_positive > 0.0)) throw ConfigError("negatives_per_positive must be positive");
}

double cosine_distance(const LatentVector& u, const LatentVector& v) {
    if (u.is_zero() || v.is_zero()) throw UndefinedDistanceError("cosine distance of a zero-norm vector");
    return -cosine_similarity(u, v);
}

namespace {

constexpr double kMinNormProduct = 1e-12;

double column_cosine(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
    const std::size_t l = a.dim(0);
    const std::size_t na_cols = a.dim(1);
    const std::size_t nb_cols = b.dim(1);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < l; ++k) {
        const double x = a[k * na_cols + i];
        const double y = b[k * nb_cols + j];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    const double denom = std::sqrt(na) * std::sqrt(nb);
    return denom < kMinNormProduct ? 0.0 : dot / denom;
}

}  // namespace

Var pair_cosine(const Var& jobs, const Var& resumes, std::span<const std::pair<std::size_t, std::size_t>> pairs) {
    const Tensor& jv = jobs.value();
    const Tensor& rv = resumes.value();
    if (jv.rank() != 2 || rv.rank() != 2 || jv.dim(0) != rv.dim(0)) {
        throw DimensionError("pair_cosine: latent blocks " + shape_string(jv.shape()) + " and " + shape_string(rv.shape()));
    }
    if (pairs.empty()) throw ContractError("pair_cosine needs at least one pair");
    Tensor out(Shape{pairs.size()});
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        if (pairs[p].first >= jv.dim(1) || pairs[p].second >= rv.dim(1)) throw ContractError("pair index out of range");
        out[p] = static_cast<float>(column_cosine(jv, pairs[p].first, rv, pairs[p].second));
    }
    std::vector<std::pair<std::size_t, std::size_t>> idx(pairs.begin(), pairs.end());
    auto backward = [jobs, resumes, idx = std::move(idx)](const Tensor& g, std::span<Tensor* const> pg) {
        const Tensor& a = jobs.value();
        const Tensor& b = resumes.value();
        const std::size_t l = a.dim(0);
        const std::size_t ca = a.dim(1);
        const std::size_t cb = b.dim(1);
        for (std::size_t p = 0; p < idx.size(); ++p) {
            const auto [i, j] = idx[p];
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::size_t k = 0; k < l; ++k) {
                const double x = a[k * ca + i];
                const double y = b[k * cb + j];
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
            const double nu = std::sqrt(na);
            const double nv = std::sqrt(nb);
            if (nu * nv < kMinNormProduct) continue;
            const double c = dot / (nu * nv);
            const double gp = g[p];
            for (std::size_t k = 0; k < l; ++k) {
                const double x = a[k * ca + i];
                const double y = b[k * cb + j];
                if (pg[0]) (*pg[0])[k * ca + i] += static_cast<float>(gp * (y / (nu * nv) - c * x / na));
                if (pg[1]) (*pg[1])[k * cb + j] += static_cast<float>(gp * (x / (nu * nv) - c * y / nb));
            }
        }
    };
    return jobs.tape().record(std::move(out), {jobs, resumes}, std::move(backward));
}

Objective objective(Tape& tape, const ModelVars& vars, const ModelParams& params,
                    std::span<const DocumentPair> positives, std::span<const DocumentPair> negatives, double lambda) {
    if (positives.empty()) throw ContractError("objective needs at least one positive pair");

    std::vector<const Document*> jobs;
    std::vector<const Document*> resumes;
    std::unordered_map<const Document*, std::size_t> job_index;
    std::unordered_map<const Document*, std::size_t> resume_index;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<float> weights;
    auto add_pairs = [&](std::span<const DocumentPair> list, float weight) {
        for (const DocumentPair& pr : list) {
            auto [ji, jnew] = job_index.emplace(pr.job, jobs.size());
            if (jnew) jobs.push_back(pr.job);
            auto [ri, rnew] = resume_index.emplace(pr.resume, resumes.size());
            if (rnew) resumes.push_back(pr.resume);
            pairs.emplace_back(ji->second, ri->second);
            weights.push_back(weight);
        }
    };
    add_pairs(positives, -1.0f);
    add_pairs(negatives, 1.0f);

    Objective result;
    Var job_latent = encode_documents(tape, vars, params.config, Side::job, jobs, Mode::train, &result.job_stats);
    Var resume_latent =
        encode_documents(tape, vars, params.config, Side::resume, resumes, Mode::train, &result.resume_stats);

    Var cosines = pair_cosine(job_latent, resume_latent, pairs);
    const Tensor weight_tensor(Shape{weights.size()}, weights);
    Var loss = sum(mul(cosines, tape.constant(weight_tensor)));

    double value = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        value += weights[p] * column_cosine(job_latent.value(), pairs[p].first, resume_latent.value(), pairs[p].second);
    }

    if (lambda > 0.0) {
        double squares = 0.0;
        Var penalty;
        for (const TowerVars* t : {&vars.job, &vars.resume}) {
            for (const Var& v : {t->conv1.kernels, t->conv1.bias, t->conv2.kernels, t->conv2.bias}) {
                for (float x : v.value().data()) squares += static_cast<double>(x) * x;
                Var term = sum(square(v));
                penalty = penalty.valid() ? add(penalty, term) : term;
            }
        }
        loss = add(loss, scale(penalty, static_cast<float>(lambda)));
        value += lambda * squares;
    }
    result.loss = loss;
    result.value = value;
    return result;
}

PairSet positive_pairs(std::span<const ApplicationRecord> records) {
    PairSet out;
    for (const auto& r : records) {
        if (r.label == Label::success) out.emplace(r.job_id, r.resume_id);
    }
    return out;
}

std::vector<ApplicationRecord> sample_negatives(std::span<const ApplicationRecord> positives,
                                                std::span<const std::string> jobs,
                                                std::span<const ApplicationRecord> failures, NegativeMode mode,
                                                double ratio, std::uint64_t seed, const PairSet* forbidden) {
    if (!(ratio > 0.0)) throw SamplingError(std::string(to_string(mode)) + " sampling: ratio must be positive");
    if (positives.empty()) throw SamplingError(std::string(to_string(mode)) + " sampling: no positive records");
    const auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(positives.size())));
    Rng rng(seed);
    std::vector<ApplicationRecord> out;
    out.reserve(count);

    if (mode == NegativeMode::real) {
        if (failures.empty()) throw SamplingError("real sampling: no failed applications to draw from");
        if (count <= failures.size()) {
            std::vector<std::size_t> order(failures.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            for (std::size_t i = 0; i < count; ++i) std::swap(order[i], order[i + rng.below(order.size() - i)]);
            for (std::size_t i = 0; i < count; ++i) out.push_back(failures[order[i]]);
        } else {
            for (std::size_t i = 0; i < count; ++i) out.push_back(failures[rng.below(failures.size())]);
        }
        for (auto& r : out) r.label = Label::failure;
        return out;
    }

    std::set<std::string_view> distinct(jobs.begin(), jobs.end());
    if (distinct.size() < 2) throw SamplingError("synthetic sampling: needs at least 2 distinct jobs");
    PairSet own;
    if (!forbidden) {
        own = positive_pairs(positives);
        forbidden = &own;
    }

    std::vector<std::size_t> order(positives.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    constexpr int kMaxAttempts = 1000;
    for (std::size_t n = 0; n < count; ++n) {
        const ApplicationRecord& base = positives[order[n % order.size()]];
        bool placed = false;
        for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
            const std::string& job = jobs[rng.below(jobs.size())];
            if (job == base.job_id || forbidden->count({job, base.resume_id})) continue;
            out.push_back(ApplicationRecord{job, base.resume_id, Label::failure, base.year});
            placed = true;
        }
        if (!placed) {
            throw SamplingError("synthetic sampling: no admissible job for resume '" + base.resume_id + "'");
        }
    }
    return out;
}

void adam_step(const NamedParameters& params, const Gradients& grads, AdamState& state, const AdamConfig& config) {
    if (grads.size() != params.size()) {
        throw ContractError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                            std::to_string(params.size()) + " parameters");
    }
    for (const auto& [name, tensor] : params) {
        auto it = grads.find(name);
        if (it == grads.end()) throw ContractError("adam_step: no gradient for parameter '" + name + "'");
        if (it->second.shape() != tensor->shape()) throw ContractError("adam_step: gradient shape mismatch for '" + name + "'");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    for (const auto& [name, tensor] : params) {
        const Tensor& g = grads.at(name);
        auto [mi, m_new] = state.first_moment.try_emplace(name, Tensor(tensor->shape(), 0.0f));
        auto [vi, v_new] = state.second_moment.try_emplace(name, Tensor(tensor->shape(), 0.0f));
        Tensor& m = mi->second;
        Tensor& v = vi->second;
        for (std::size_t i = 0; i < tensor->size(); ++i) {
            const double gi = g[i];
            const double mv = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
            const double vv = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
            m[i] = static_cast<float>(mv);
            v[i] = static_cast<float>(vv);
            const double update = config.lr * (mv / c1) / (std::sqrt(vv / c2) + config.eps);
            (*tensor)[i] = static_cast<float>((*tensor)[i] - update);
        }
    }
}

TrainResult train(const Dataset& dataset, std::span<const ApplicationRecord> records, const Embeddings& embeddings,
                  const ModelConfig& model_config, const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    model_config.validate();
    if (embeddings.job.table.dim() != model_config.job.input_dim ||
        embeddings.resume.table.dim() != model_config.resume.input_dim) {
        throw ConfigError("embedding widths do not match the model's tower inputs");
    }
    std::vector<ApplicationRecord> positives;
    std::vector<ApplicationRecord> failures;
    for (const auto& r : records) (r.label == Label::success ? positives : failures).push_back(r);
    if (positives.empty()) throw DataError("training split has no successful applications");

    std::map<std::string, Document> jobs;
    std::map<std::string, Document> resumes;
    for (const auto& [id, raw] : dataset.jobs) jobs.emplace(id, embed_document(raw, embeddings.job));
    for (const auto& r : records) {
        if (!resumes.count(r.resume_id)) {
            resumes.emplace(r.resume_id, embed_document(dataset.resume(r.resume_id), embeddings.resume));
        }
        if (!jobs.count(r.job_id)) throw NotFoundError("unknown job id '" + r.job_id + "'");
    }
    const std::vector<std::string> job_ids = dataset.job_ids();
    const PairSet known_positives = positive_pairs(positives);

    TrainResult result;
    result.params = init_model(model_config, config.seed);
    result.initial_params = result.params;
    ModelParams& params = result.params;
    const NamedParameters named = trainable_parameters(params);
    AdamState adam;
    const AdamConfig adam_config{config.lr, config.beta1, config.beta2, config.eps};

    auto to_pair = [&](const ApplicationRecord& r) { return DocumentPair{&jobs.at(r.job_id), &resumes.at(r.resume_id)}; };

    std::vector<ApplicationRecord> negatives;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (epoch == 0 || config.resample_negatives) {
            negatives = sample_negatives(positives, job_ids, failures, config.negative_mode, config.negatives_per_positive,
                                         Rng::mix(config.seed, 1000 + epoch), &known_positives);
        }
        Rng rng(Rng::mix(config.seed, epoch));
        std::vector<DocumentPair> pos;
        std::vector<DocumentPair> neg;
        for (const auto& r : positives) pos.push_back(to_pair(r));
        for (const auto& r : negatives) neg.push_back(to_pair(r));
        rng.shuffle(std::span<DocumentPair>(pos));
        rng.shuffle(std::span<DocumentPair>(neg));

        const std::size_t n_batches = (pos.size() + config.batch_size - 1) / config.batch_size;
        double total = 0.0;
        for (std::size_t b = 0; b < n_batches; ++b) {
            const std::size_t p0 = b * pos.size() / n_batches;
            const std::size_t p1 = (b + 1) * pos.size() / n_batches;
            const std::size_t n0 = b * neg.size() / n_batches;
            const std::size_t n1 = (b + 1) * neg.size() / n_batches;

            Tape tape;
            const ModelVars vars = bind_model(tape, params, true);
            Objective obj = objective(tape, vars, params, std::span(pos).subspan(p0, p1 - p0),
                                      std::span(neg).subspan(n0, n1 - n0), config.lambda);
            if (!std::isfinite(obj.value) || !std::isfinite(obj.loss.value().item())) {
                std::ostringstream msg;
                msg << "non-finite loss " << obj.value << " at epoch " << epoch + 1 << ", batch " << b + 1;
                throw NumericError(msg.str());
            }
            const Gradients grads = tape.backward(obj.loss);
            adam_step(named, grads, adam, adam_config);
            update_running_stats(params.job.bn1, obj.job_stats.bn1);
            update_running_stats(params.job.bn2, obj.job_stats.bn2);
            update_running_stats(params.resume.bn1, obj.resume_stats.bn1);
            update_running_stats(params.resume.bn2, obj.resume_stats.bn2);
            total += obj.value;
        }
        EpochLog entry{epoch + 1, total / static_cast<double>(n_batches), n_batches};
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry);
    }
    return result;
}

}  // namespace pjfnn
