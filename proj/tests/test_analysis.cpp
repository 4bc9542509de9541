#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "pjfnn/analysis.hpp"
#include "pjfnn/error.hpp"

using namespace pjfnn;
using namespace testing_support;

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    for (std::string f; std::getline(in, f, ',');) out.push_back(f);
    return out;
}

LatentVector latent(std::vector<float> v) {
    const std::size_t n = v.size();
    return LatentVector{Tensor(Shape{n}, std::move(v))};
}

}  // namespace

TEST_CASE("export writes a document row followed by its item rows") {
    const ModelParams p = scaled_random_model(tiny_config(), 2);
    Rng rng(3);
    const Document three = random_document("j3", Side::job, 12, 3, 4, 15, rng);
    const Document one = random_document("r1", Side::resume, 8, 1, 4, 15, rng);
    const Document* docs[] = {&three, &one};
    std::ostringstream out;
    CHECK(export_representations(p, docs, out).empty());
    const auto lines = split_lines(out.str());
    REQUIRE(lines.size() == 1 + 4 + 2);
    CHECK(lines[0].starts_with("id,side,level,item_index,v0,"));
    for (const auto& line : lines) CHECK(split_fields(line).size() == 4 + 6);

    CHECK(lines[1].starts_with("j3,job,document,-1,"));
    CHECK(lines[2].starts_with("j3,job,item,0,"));
    CHECK(lines[4].starts_with("j3,job,item,2,"));
    CHECK(lines[5].starts_with("r1,resume,document,-1,"));

    // A single-item document's latent is its item's latent.
    const auto doc_fields = split_fields(lines[5]), item_fields = split_fields(lines[6]);
    CHECK(std::vector(doc_fields.begin() + 4, doc_fields.end()) == std::vector(item_fields.begin() + 4, item_fields.end()));

    // Values read back to the encoded floats.
    const LatentVector v = encode_document(three, p);
    const auto fields = split_fields(lines[1]);
    for (std::size_t k = 0; k < 6; ++k) CHECK(std::stof(fields[4 + k]) == v[k]);

    std::ostringstream again, threaded;
    export_representations(p, docs, again);
    export_representations(p, docs, threaded, 2);
    CHECK(again.str() == out.str());
    CHECK(threaded.str() == out.str());
}

TEST_CASE("export skips documents that fail to encode") {
    const ModelParams p = scaled_random_model(tiny_config(), 2);
    Rng rng(3);
    const Document good = random_document("ok", Side::job, 12, 2, 4, 15, rng);
    const Document wrong_dim = random_document("bad", Side::job, 5, 2, 4, 15, rng);
    const Document* docs[] = {&wrong_dim, &good};
    std::ostringstream out;
    const auto errors = export_representations(p, docs, out);
    REQUIRE(errors.size() == 1);
    CHECK(errors[0].starts_with("bad: "));
    CHECK(split_lines(out.str()).size() == 1 + 3);
}

TEST_CASE("quantiles interpolate linearly") {
    CHECK(quantile_of({1, 2, 3, 4, 5}, 0.5) == 3.0);
    CHECK(quantile_of({5, 1, 4, 2, 3}, 0.9) == doctest::Approx(4.6));
    CHECK(quantile_of({7}, 0.3) == 7.0);
    CHECK(quantile_of({1, 2}, 0.0) == 1.0);
    CHECK(quantile_of({1, 2}, 1.0) == 2.0);
    CHECK_THROWS_AS(quantile_of({}, 0.5), ContractError);
}

TEST_CASE("dimension keywords") {
    std::vector<RawDocument> raw;
    std::vector<LatentVector> latents;
    for (int i = 0; i < 10; ++i) {
        RawDocument d{"j" + std::to_string(i), Side::job, Category::T, 2015, {}};
        if (i >= 8) {
            d.items = {{"rust", "the", "rust", "cargo"}, {"rust", "and", "tokio"}};
        } else {
            d.items = {{"excel", "of", "word"}};
        }
        raw.push_back(d);
        latents.push_back(latent({static_cast<float>(i), 1.0f}));
    }
    std::vector<const RawDocument*> docs;
    for (const auto& d : raw) docs.push_back(&d);

    KeywordConfig cfg;
    cfg.quantile = 0.8;
    cfg.top_k = 3;
    const DimensionKeywords kw = dimension_keywords(docs, latents, 0, cfg);
    CHECK(kw.threshold == doctest::Approx(7.2));
    CHECK(kw.documents_selected == 2);
    REQUIRE(kw.keywords.size() == 3);
    CHECK(kw.keywords[0] == std::pair<std::string, std::size_t>{"rust", 6});
    CHECK(kw.keywords[1] == std::pair<std::string, std::size_t>{"cargo", 2});
    CHECK(kw.keywords[2] == std::pair<std::string, std::size_t>{"tokio", 2});
    for (const auto& [token, count] : kw.keywords) CHECK(token != "the");

    cfg.quantile = 0.999;
    CHECK(dimension_keywords(docs, latents, 0, cfg).documents_selected == 1);

    cfg.stop_tokens = {};
    cfg.quantile = 0.85;
    cfg.top_k = 10;
    const DimensionKeywords all = dimension_keywords(docs, latents, 0, cfg);
    CHECK(all.keywords.size() == 5);

    // constant dimension: every document reaches the threshold
    cfg.quantile = 0.5;
    CHECK(dimension_keywords(docs, latents, 1, cfg).documents_selected == 10);

    cfg.quantile = 1.0;
    CHECK_THROWS_AS(dimension_keywords(docs, latents, 0, cfg), ConfigError);
    cfg.quantile = 0.0;
    CHECK_THROWS_AS(dimension_keywords(docs, latents, 0, cfg), ConfigError);
    cfg.quantile = 0.9;
    CHECK_THROWS_AS(dimension_keywords(docs, latents, 2, cfg), ConfigError);
}

TEST_CASE("best aligned dimension") {
    const std::vector<LatentVector> latents{latent({1, 5, 0}), latent({2, 0, 9}), latent({3, 4, 0})};
    const bool first_last[] = {true, false, true};
    const bool middle[] = {false, true, false};
    const bool none[] = {false, false, false};
    CHECK(best_aligned_dimension(latents, first_last) == 1);
    CHECK(best_aligned_dimension(latents, middle) == 2);
    CHECK_THROWS_AS(best_aligned_dimension(latents, none), ContractError);
}

TEST_CASE("similarity report") {
    const SmallRun run = small_run(2);
    const Dataset& ds = run.corpus.dataset;
    const ApplicationRecord& app = ds.applications.front();
    const RawDocument& job = ds.job(app.job_id);
    const RawDocument& resume = ds.resume(app.resume_id);
    const SimilarityReport r = similarity_report(run.result.params, run.embeddings, job, resume, 20);
    REQUIRE(r.matrix.size() == job.items.size());
    for (const auto& row : r.matrix) {
        REQUIRE(row.size() == resume.items.size());
        for (double v : row) CHECK(std::abs(v) <= 1.0);
    }
    const Document j = embed_document(job, run.embeddings.job);
    const Document rs = embed_document(resume, run.embeddings.resume);
    CHECK(r.score == score(j, rs, run.result.params));
    CHECK(r.matrix == item_similarity_matrix(j, rs, run.result.params));
    for (const auto& text : r.job_items) CHECK(text.size() <= 20);
    const std::string text = r.to_text();
    CHECK(text.find("job " + job.id) != std::string::npos);
    CHECK(text.find("R" + std::to_string(resume.items.size() - 1)) != std::string::npos);
}
