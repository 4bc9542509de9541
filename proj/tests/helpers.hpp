#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "pjfnn/autograd.hpp"
#include "pjfnn/model.hpp"
#include "pjfnn/rng.hpp"
#include "pjfnn/synth.hpp"
#include "pjfnn/training.hpp"

namespace testing_support {

using namespace pjfnn;

inline double normal(Rng& rng) {
    // Box-Muller; u1 in (0, 1].
    const double u1 = 1.0 - rng.uniform_double();
    const double u2 = rng.uniform_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(scale * normal(rng));
    return t;
}

/// Small towers so that every parameter can be finite-differenced.
inline ModelConfig tiny_config() {
    ModelConfig c;
    c.latent = 6;
    c.job = TowerConfig{12, 10, 3, 2, 2, 3};
    c.resume = TowerConfig{8, 7, 3, 2, 2, 3};
    return c;
}

/// Convolution kernels and biases drawn from scale * N(0, 1); batch-norm
/// parameters keep their initial gamma = 1, beta = 0.
inline ModelParams scaled_random_model(const ModelConfig& config, std::uint64_t seed, double scale = 0.1) {
    ModelParams p = init_model(config, seed);
    Rng rng(Rng::mix(seed, 77));
    for (auto& [name, t] : trainable_parameters(p)) {
        if (name.find(".conv") != std::string::npos) *t = random_tensor(t->shape(), rng, scale);
    }
    return p;
}

inline ItemMatrix random_item(Side side, std::size_t dim, std::size_t length, Rng& rng) {
    return ItemMatrix{side, random_tensor(Shape{dim, length}, rng)};
}

inline Document random_document(const std::string& id, Side side, std::size_t dim, std::size_t n_items,
                                std::size_t min_len, std::size_t max_len, Rng& rng) {
    Document d{id, side, Category::T, 2015, {}};
    for (std::size_t i = 0; i < n_items; ++i) {
        d.items.push_back(random_item(side, dim, min_len + rng.below(max_len - min_len + 1), rng));
    }
    return d;
}

inline std::vector<double>& oracle_field(oracle::Model& m, const std::string& name) {
    oracle::Tower& t = name.starts_with("job.") ? m.job : m.resume;
    const std::string rest = name.substr(name.find('.') + 1);
    if (rest == "conv1.kernels") return t.c1.w;
    if (rest == "conv1.bias") return t.c1.b;
    if (rest == "bn1.gamma") return t.n1.gamma;
    if (rest == "bn1.beta") return t.n1.beta;
    if (rest == "conv2.kernels") return t.c2.w;
    if (rest == "conv2.bias") return t.c2.b;
    if (rest == "bn2.gamma") return t.n2.gamma;
    return t.n2.beta;
}

struct GradCheckResult {
    std::size_t checked = 0;
    std::size_t failed = 0;
    std::size_t refined = 0;  // entries whose step had to shrink to avoid a kink
    double worst = 0.0;
    std::string worst_where;
    double loss_tape = 0.0;
    double loss_oracle = 0.0;
};

struct GradCheckOptions {
    double lambda = 1e-4;
    double step = 1e-3;
    double tolerance = 1e-3;
    double floor = 1e-3;         // denominator floor for near-zero gradients
    bool avoid_kinks = true;     // shrink the step until every probe shares the base trace
    bool richardson = true;      // combine steps h and h/2 to cancel the O(h^2) error term
    double min_step = 1e-9;
    std::size_t per_tensor = 0;  // 0 = every entry
    std::uint64_t seed = 1;
};

/// Compares tape gradients of the objective with central differences of the
/// double-precision oracle. Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheckResult check_gradients(const ModelParams& params, std::span<const DocumentPair> pos,
                                       std::span<const DocumentPair> neg, const GradCheckOptions& opt) {
    GradCheckResult r;
    Tape tape;
    const ModelVars vars = bind_model(tape, params, true);
    const Objective obj = objective(tape, vars, params, pos, neg, opt.lambda);
    const Gradients grads = tape.backward(obj.loss);
    r.loss_tape = obj.value;

    oracle::Model m = oracle::model_of(params);
    oracle::Trace base;
    r.loss_oracle = oracle::objective(m, pos, neg, opt.lambda, &base);
    Rng rng(opt.seed);
    for (const auto& [name, tensor] : trainable_parameters(params)) {
        std::vector<double>& field = oracle_field(m, name);
        const Tensor& g = grads.at(name);
        std::vector<std::size_t> entries;
        if (opt.per_tensor == 0 || opt.per_tensor >= field.size()) {
            for (std::size_t i = 0; i < field.size(); ++i) entries.push_back(i);
        } else {
            for (std::size_t i = 0; i < opt.per_tensor; ++i) entries.push_back(rng.below(field.size()));
        }
        for (std::size_t i : entries) {
            const double saved = field[i];
            double h = opt.step;
            double numeric = 0.0;
            auto central = [&](double step, bool& smooth) {
                oracle::Trace t_up, t_down;
                field[i] = saved + step;
                const double up = oracle::objective(m, pos, neg, opt.lambda, &t_up);
                field[i] = saved - step;
                const double down = oracle::objective(m, pos, neg, opt.lambda, &t_down);
                field[i] = saved;
                smooth = smooth && t_up == base && t_down == base;
                return (up - down) / (2.0 * step);
            };
            for (;;) {
                bool smooth = true;
                const double coarse = central(h, smooth);
                numeric = opt.richardson ? (4.0 * central(h / 2, smooth) - coarse) / 3.0 : coarse;
                if (!opt.avoid_kinks || smooth || h / 2 < opt.min_step) break;
                h /= 2;
            }
            if (h != opt.step) ++r.refined;
            const double analytic = g[i];
            const double err =
                std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), opt.floor});
            ++r.checked;
            if (err > opt.tolerance) ++r.failed;
            if (err > r.worst) {
                r.worst = err;
                r.worst_where = name + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic) +
                                " numeric " + std::to_string(numeric);
            }
        }
    }
    return r;
}

/// 4 positive and 4 negative pairs over distinct random documents.
struct PairBatch {
    std::vector<Document> jobs;
    std::vector<Document> resumes;
    std::vector<DocumentPair> pos;
    std::vector<DocumentPair> neg;
};

inline PairBatch random_pair_batch(const ModelConfig& config, std::uint64_t seed, std::size_t n_pos = 4,
                                   std::size_t n_neg = 4) {
    Rng rng(seed);
    PairBatch b;
    const std::size_t n = n_pos + n_neg;
    for (std::size_t i = 0; i < n; ++i) {
        b.jobs.push_back(random_document("j" + std::to_string(i), Side::job, config.job.input_dim, 1 + rng.below(3), 3, 12, rng));
        b.resumes.push_back(
            random_document("r" + std::to_string(i), Side::resume, config.resume.input_dim, 1 + rng.below(3), 3, 12, rng));
    }
    for (std::size_t i = 0; i < n_pos; ++i) b.pos.push_back({&b.jobs[i], &b.resumes[i]});
    for (std::size_t i = 0; i < n_neg; ++i) b.neg.push_back({&b.jobs[n_pos + i], &b.resumes[(i + 1) % n]});
    return b;
}

inline Embeddings train_embeddings(const Dataset& ds, std::size_t job_dim, std::size_t resume_dim, std::uint64_t seed,
                                   std::size_t epochs = 5) {
    Embeddings e;
    for (Side side : {Side::job, Side::resume}) {
        const Corpus corpus = ds.corpus(side);
        SideEmbedding& se = side == Side::job ? e.job : e.resume;
        se.vocab = Vocabulary::build(corpus, 1);
        SkipGramConfig cfg;
        cfg.dim = side == Side::job ? job_dim : resume_dim;
        cfg.epochs = epochs;
        cfg.seed = Rng::mix(seed, side == Side::job ? 1 : 2);
        se.table = train_skipgram(corpus, se.vocab, cfg, side);
    }
    return e;
}

/// A reduced synthetic corpus with a model trained on its training split.
struct SmallRun {
    SyntheticCorpus corpus;
    Embeddings embeddings;
    Splits splits;
    TrainResult result;
};

inline SmallRun small_run(std::size_t epochs = 6, std::uint64_t seed = 3) {
    SmallRun run;
    SynthConfig sc;
    sc.n_jobs = 120;
    sc.n_resumes = 240;
    sc.seed = seed;
    run.corpus = synth_generate(sc);
    run.embeddings = train_embeddings(run.corpus.dataset, 32, 16, seed);
    SplitConfig split_cfg;
    split_cfg.seed = seed;
    run.splits = split(run.corpus.dataset.applications, split_cfg);
    ModelConfig mc;
    mc.latent = 16;
    mc.job = TowerConfig{32, 24, 3, 2, 2, 3};
    mc.resume = TowerConfig{16, 16, 3, 2, 2, 3};
    TrainConfig tc;
    tc.epochs = epochs;
    tc.lr = 3e-3;
    tc.batch_size = 32;
    tc.seed = seed;
    run.result = train(run.corpus.dataset, run.splits.train, run.embeddings, mc, tc);
    return run;
}

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(reinterpret_cast<std::uintptr_t>(this)));
        path_ = std::filesystem::temp_directory_path() / ("pjfnn-" + tag + "-" + std::to_string(rng.next() % 1000000007));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace testing_support
