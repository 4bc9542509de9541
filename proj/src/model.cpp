#include "pjfnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "pjfnn/error.hpp"
#include "pjfnn/log.hpp"
#include "pjfnn/rng.hpp"

namespace pjfnn {

std::size_t TowerConfig::min_item_length() const {
    return (conv2_width - 1) * pool_stride + pool_size + conv1_width - 1;
}

void ModelConfig::validate() const {
    if (latent == 0) throw ConfigError("latent size must be positive");
    for (const TowerConfig* t : {&job, &resume}) {
        if (t->input_dim == 0 || t->conv1_channels == 0 || t->conv1_width == 0 || t->conv2_width == 0 ||
            t->pool_size == 0 || t->pool_stride == 0) {
            throw ConfigError("tower dimensions, widths and pooling must be positive");
        }
    }
    if (!(bn_epsilon > 0.0f)) throw ConfigError("batch-norm epsilon must be positive");
    if (!(bn_momentum > 0.0f && bn_momentum < 1.0f)) throw ConfigError("batch-norm momentum must lie in (0, 1)");
}

namespace {

TowerParams init_tower(const TowerConfig& t, std::size_t latent, float eps, float momentum, Rng& rng) {
    TowerParams p;
    p.conv1 = init_conv1d(ConvSpec{t.input_dim, t.conv1_channels, t.conv1_width}, rng);
    p.bn1 = init_batchnorm(t.conv1_channels, eps, momentum);
    p.conv2 = init_conv1d(ConvSpec{t.conv1_channels, latent, t.conv2_width}, rng);
    p.bn2 = init_batchnorm(latent, eps, momentum);
    return p;
}

template <typename Params, typename Out>
void collect(Params& params, Out& out) {
    for (Side side : {Side::job, Side::resume}) {
        auto& t = params.tower(side);
        const std::string prefix(to_string(side));
        out.emplace_back(prefix + ".conv1.kernels", &t.conv1.kernels);
        out.emplace_back(prefix + ".conv1.bias", &t.conv1.bias);
        out.emplace_back(prefix + ".bn1.gamma", &t.bn1.gamma);
        out.emplace_back(prefix + ".bn1.beta", &t.bn1.beta);
        out.emplace_back(prefix + ".conv2.kernels", &t.conv2.kernels);
        out.emplace_back(prefix + ".conv2.bias", &t.conv2.bias);
        out.emplace_back(prefix + ".bn2.gamma", &t.bn2.gamma);
        out.emplace_back(prefix + ".bn2.beta", &t.bn2.beta);
    }
}

TowerVars bind_tower(Tape& tape, const TowerParams& p, const std::string& prefix, bool trainable) {
    auto put = [&](const std::string& name, const Tensor& t) {
        return trainable ? tape.parameter(prefix + "." + name, t) : tape.constant(t);
    };
    TowerVars v;
    v.conv1 = {put("conv1.kernels", p.conv1.kernels), put("conv1.bias", p.conv1.bias)};
    v.bn1 = {put("bn1.gamma", p.bn1.gamma), put("bn1.beta", p.bn1.beta), &p.bn1};
    v.conv2 = {put("conv2.kernels", p.conv2.kernels), put("conv2.bias", p.conv2.bias)};
    v.bn2 = {put("bn2.gamma", p.bn2.gamma), put("bn2.beta", p.bn2.beta), &p.bn2};
    return v;
}

}  // namespace

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    ModelParams p;
    p.config = config;
    p.job = init_tower(config.job, config.latent, config.bn_epsilon, config.bn_momentum, rng);
    p.resume = init_tower(config.resume, config.latent, config.bn_epsilon, config.bn_momentum, rng);
    return p;
}

std::vector<std::pair<std::string, Tensor*>> trainable_parameters(ModelParams& params) {
    std::vector<std::pair<std::string, Tensor*>> out;
    collect(params, out);
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> trainable_parameters(const ModelParams& params) {
    std::vector<std::pair<std::string, const Tensor*>> out;
    collect(params, out);
    return out;
}

bool is_regularized(const std::string& name) { return name.find(".conv") != std::string::npos; }

Document embed_document(const RawDocument& raw, const SideEmbedding& embedding) {
    if (raw.items.empty()) throw EmptyDocumentError(std::string(to_string(raw.side)) + " '" + raw.id + "' has no items");
    if (embedding.table.side != raw.side) {
        throw ContractError("embedding table side does not match " + std::string(to_string(raw.side)) + " '" + raw.id + "'");
    }
    Document doc{raw.id, raw.side, raw.category, raw.year, {}};
    doc.items.reserve(raw.items.size());
    for (const auto& item : raw.items) doc.items.push_back(embed_item(item, embedding.vocab, embedding.table));
    return doc;
}

bool LatentVector::is_zero() const {
    return std::all_of(values.data().begin(), values.data().end(), [](float v) { return v == 0.0f; });
}

ModelVars bind_model(Tape& tape, const ModelParams& params, bool trainable) {
    return ModelVars{bind_tower(tape, params.job, "job", trainable), bind_tower(tape, params.resume, "resume", trainable)};
}

Var encode_items(Tape& tape, const TowerVars& vars, const TowerConfig& tower, std::span<const ItemMatrix* const> items,
                 Mode mode, TowerStats* stats) {
    if (items.empty()) throw EmptyDocumentError("no items to encode");
    const std::size_t dim = tower.input_dim;
    const std::size_t min_len = tower.min_item_length();
    std::vector<std::size_t> lengths;
    lengths.reserve(items.size());
    std::size_t total = 0;
    for (const ItemMatrix* item : items) {
        if (item->dim() != dim) {
            throw DimensionError("item embedding width " + std::to_string(item->dim()) + " does not match tower input " +
                                 std::to_string(dim));
        }
        lengths.push_back(std::max(item->length(), min_len));
        total += lengths.back();
    }

    Tensor input(Shape{dim, total});
    std::size_t offset = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const Tensor& m = items[i]->matrix;
        const std::size_t len = m.dim(1);
        for (std::size_t d = 0; d < dim; ++d) {
            std::copy_n(m.data().data() + d * len, len, input.data().data() + d * total + offset);
        }
        offset += lengths[i];
    }

    Ragged x{tape.constant(std::move(input)), std::move(lengths)};
    BatchStats* s1 = stats ? &stats->bn1 : nullptr;
    BatchStats* s2 = stats ? &stats->bn2 : nullptr;
    Ragged h = relu(batchnorm(conv1d(x, vars.conv1), vars.bn1, mode, s1));
    h = maxpool1d(h, tower.pool_size, tower.pool_stride);
    h = relu(batchnorm(conv1d(h, vars.conv2), vars.bn2, mode, s2));
    return global_maxpool(h);
}

Var encode_documents(Tape& tape, const ModelVars& vars, const ModelConfig& config, Side side,
                     std::span<const Document* const> docs, Mode mode, TowerStats* stats) {
    std::vector<const ItemMatrix*> items;
    std::vector<std::size_t> counts;
    for (const Document* doc : docs) {
        if (doc->side != side) {
            throw ContractError(std::string(to_string(doc->side)) + " '" + doc->id + "' routed to the " +
                                std::string(to_string(side)) + " tower");
        }
        if (doc->items.empty()) throw EmptyDocumentError(std::string(to_string(side)) + " '" + doc->id + "' has no items");
        for (const auto& item : doc->items) items.push_back(&item);
        counts.push_back(doc->items.size());
    }
    Var item_latents = encode_items(tape, vars.tower(side), config.tower(side), items, mode, stats);
    Ragged grouped{item_latents, std::move(counts)};
    return side == Side::job ? global_maxpool(grouped) : segment_mean(grouped);
}

namespace {

LatentVector column(const Tensor& m, std::size_t c) {
    Tensor v(Shape{m.dim(0)});
    for (std::size_t r = 0; r < m.dim(0); ++r) v[r] = m.at(r, c);
    return LatentVector{std::move(v)};
}

}  // namespace

LatentVector encode_item(const ItemMatrix& item, const ModelParams& params, Mode mode) {
    Tape tape;
    const ModelVars vars = bind_model(tape, params, false);
    const ItemMatrix* one[] = {&item};
    return column(encode_items(tape, vars.tower(item.side), params.config.tower(item.side), one, mode).value(), 0);
}

std::vector<LatentVector> encode_item_list(const Document& doc, const ModelParams& params) {
    if (doc.items.empty()) throw EmptyDocumentError(std::string(to_string(doc.side)) + " '" + doc.id + "' has no items");
    Tape tape;
    const ModelVars vars = bind_model(tape, params, false);
    std::vector<const ItemMatrix*> items;
    for (const auto& item : doc.items) items.push_back(&item);
    const Tensor& out = encode_items(tape, vars.tower(doc.side), params.config.tower(doc.side), items, Mode::eval).value();
    std::vector<LatentVector> result;
    for (std::size_t i = 0; i < items.size(); ++i) result.push_back(column(out, i));
    return result;
}

LatentVector encode_document(const Document& doc, const ModelParams& params, Mode mode) {
    Tape tape;
    const ModelVars vars = bind_model(tape, params, false);
    const Document* one[] = {&doc};
    return column(encode_documents(tape, vars, params.config, doc.side, one, mode).value(), 0);
}

LatentVector encode_job(const Document& job, const ModelParams& params, Mode mode) {
    if (job.side != Side::job) throw ContractError("encode_job given resume '" + job.id + "'");
    return encode_document(job, params, mode);
}

LatentVector encode_resume(const Document& resume, const ModelParams& params, Mode mode) {
    if (resume.side != Side::resume) throw ContractError("encode_resume given job '" + resume.id + "'");
    return encode_document(resume, params, mode);
}

std::vector<LatentVector> encode_many(std::span<const Document* const> docs, const ModelParams& params,
                                      std::size_t threads) {
    std::vector<LatentVector> out(docs.size());
    constexpr std::size_t kChunk = 128;
    const std::size_t n_chunks = (docs.size() + kChunk - 1) / kChunk;

    auto run_chunk = [&](std::size_t chunk) {
        const std::size_t lo = chunk * kChunk;
        const std::size_t hi = std::min(docs.size(), lo + kChunk);
        Tape tape;
        const ModelVars vars = bind_model(tape, params, false);
        // Documents of one chunk may mix sides; encode each side separately.
        for (Side side : {Side::job, Side::resume}) {
            std::vector<const Document*> group;
            std::vector<std::size_t> where;
            for (std::size_t i = lo; i < hi; ++i) {
                if (docs[i]->side == side) {
                    group.push_back(docs[i]);
                    where.push_back(i);
                }
            }
            if (group.empty()) continue;
            const Tensor& m = encode_documents(tape, vars, params.config, side, group, Mode::eval).value();
            for (std::size_t k = 0; k < where.size(); ++k) out[where[k]] = column(m, k);
        }
    };

    threads = std::max<std::size_t>(1, std::min(threads, n_chunks));
    if (threads == 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
        return out;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> workers;
        for (std::size_t w = 0; w < threads; ++w) {
            workers.emplace_back([&, w] {
                try {
                    for (std::size_t c = w; c < n_chunks; c += threads) run_chunk(c);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

double cosine_similarity(const LatentVector& u, const LatentVector& v) {
    if (u.size() != v.size()) {
        throw DimensionError("latent sizes differ: " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
    }
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += static_cast<double>(u[i]) * v[i];
        nu += static_cast<double>(u[i]) * u[i];
        nv += static_cast<double>(v[i]) * v[i];
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

double score_latents(const LatentVector& job, const LatentVector& resume, std::string_view context) {
    if (job.is_zero() || resume.is_zero()) {
        warn("degenerate encoding (zero latent vector)" + (context.empty() ? std::string() : " for " + std::string(context)) +
             "; score set to 0");
        return 0.0;
    }
    return cosine_similarity(job, resume);
}

double score(const Document& job, const Document& resume, const ModelParams& params) {
    return score_latents(encode_job(job, params), encode_resume(resume, params), job.id + " / " + resume.id);
}

std::vector<std::vector<double>> item_similarity_matrix(const Document& job, const Document& resume,
                                                        const ModelParams& params) {
    if (job.side != Side::job || resume.side != Side::resume) throw ContractError("item_similarity_matrix needs (job, resume)");
    const auto req = encode_item_list(job, params);
    const auto exp = encode_item_list(resume, params);
    std::vector<std::vector<double>> m(req.size(), std::vector<double>(exp.size()));
    for (std::size_t a = 0; a < req.size(); ++a) {
        for (std::size_t b = 0; b < exp.size(); ++b) {
            m[a][b] = score_latents(req[a], exp[b],
                                    job.id + " item " + std::to_string(a) + " / " + resume.id + " item " + std::to_string(b));
        }
    }
    return m;
}

}  // namespace pjfnn
