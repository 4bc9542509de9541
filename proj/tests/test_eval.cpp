#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "pjfnn/error.hpp"
#include "pjfnn/eval.hpp"

using namespace pjfnn;
using namespace testing_support;

namespace {

// O(n^2) pair count: positive above negative scores 1, ties score 1/2.
double brute_auc(const std::vector<double>& s, const std::vector<int>& l) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (l[i] != 1) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (l[j] != 0) continue;
            pairs += 1.0;
            wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    }
    return wins / pairs;
}

std::vector<ScoredRecord> scored(const std::vector<double>& s, const std::vector<int>& l, const std::vector<int>& years,
                                 const std::vector<Category>& cats) {
    std::vector<ScoredRecord> out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        out.push_back({"j" + std::to_string(i), "r" + std::to_string(i), l[i], years[i], cats[i], s[i]});
    }
    return out;
}

}  // namespace

TEST_CASE("auc examples") {
    const std::vector<double> s{0.9, 0.8, 0.3, 0.1};
    CHECK(auc(s, std::vector<int>{1, 1, 0, 0}) == 1.0);
    CHECK(auc(s, std::vector<int>{0, 0, 1, 1}) == 0.0);
    CHECK(auc(s, std::vector<int>{1, 0, 1, 0}) == 0.75);
    CHECK(auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1, 0}) == 0.5);
    CHECK(auc(std::vector<double>{0.2, 0.2, 0.9}, std::vector<int>{1, 0, 0}) == doctest::Approx(0.25));
}

TEST_CASE("auc errors") {
    CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), UndefinedAucError);
    CHECK_THROWS_AS(auc(std::vector<double>{}, std::vector<int>{}), UndefinedAucError);
    CHECK_THROWS_AS(auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), ContractError);
    CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 2}), ContractError);
    CHECK_THROWS_AS(auc(std::vector<double>{0.1, std::nan("")}, std::vector<int>{1, 0}), NumericError);
}

TEST_CASE("auc matches the pairwise count on random inputs with ties") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(60);
        std::vector<double> s(n);
        std::vector<int> l(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.below(8)) / 4.0;  // coarse grid forces ties
            l[i] = static_cast<int>(rng.below(2));
        }
        l[0] = 1;
        l[1] = 0;
        CHECK(auc(s, l) == doctest::Approx(brute_auc(s, l)).epsilon(1e-12));
    }
}

TEST_CASE("auc is invariant under strictly increasing transforms and complements under negation") {
    Rng rng(6);
    std::vector<double> s(50), t(50), neg(50);
    std::vector<int> l(50);
    for (std::size_t i = 0; i < 50; ++i) {
        s[i] = normal(rng);
        t[i] = std::exp(3.0 * s[i]) + 7.0;
        neg[i] = -s[i];
        l[i] = static_cast<int>(i % 2);
    }
    CHECK(auc(s, l) == doctest::Approx(auc(t, l)).epsilon(1e-12));
    CHECK(auc(s, l) + auc(neg, l) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("grouped reports") {
    const std::vector<double> s{0.9, 0.1, 0.8, 0.2, 0.7, 0.6};
    const std::vector<int> l{1, 0, 0, 1, 1, 1};
    const std::vector<int> years{2014, 2014, 2015, 2015, 2016, 2016};
    const std::vector<Category> cats{Category::T, Category::T, Category::P, Category::P, Category::T, Category::P};
    const auto records = scored(s, l, years, cats);

    const EvalReport overall = make_report("m", records, Grouping::overall);
    REQUIRE(overall.groups.size() == 1);
    CHECK(overall.groups[0].key == "overall");
    CHECK(overall.overall_auc() == doctest::Approx(brute_auc(s, l)));

    const EvalReport by_year = make_report("m", records, Grouping::year);
    REQUIRE(by_year.groups.size() == 3);
    CHECK(by_year.groups[0].key == "2014");
    CHECK(*by_year.groups[0].auc == 1.0);
    CHECK(*by_year.groups[1].auc == 0.0);
    CHECK_FALSE(by_year.groups[2].auc.has_value());
    CHECK(by_year.groups[2].positives == 2);
    CHECK(by_year.to_table().find("skipped") != std::string::npos);

    const EvalReport by_cat = make_report("m", records, Grouping::category);
    REQUIRE(by_cat.groups.size() == 2);
    CHECK(by_cat.groups[0].key == "P");
    CHECK(*by_cat.groups[0].auc == 0.0);
    CHECK(by_cat.groups[1].key == "T");
    CHECK(by_cat.groups[1].count == 3);
    CHECK(*by_cat.groups[1].auc == 1.0);

    const nlohmann::json j = by_year.to_json();
    CHECK(j["model"] == "m");
    CHECK(j["grouping"] == "year");
    CHECK(j["groups"].size() == 3);
    CHECK(j["groups"][2]["skipped"] == true);
    CHECK(j["groups"][2]["auc"].is_null());
    CHECK(j["records"].size() == 6);
    CHECK(j["records"][0]["score"] == 0.9);

    CHECK_THROWS_AS(make_report("m", {}, Grouping::overall), DataError);
    CHECK_THROWS_AS(parse_grouping("month"), ConfigError);
}

TEST_CASE("logistic regression separates separable data") {
    Rng rng(3);
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int i = 0; i < 200; ++i) {
        const int label = i % 2;
        x.push_back({normal(rng) + (label ? 3.0 : -3.0), normal(rng), 5.0});
        y.push_back(label);
    }
    const LogisticModel m = fit_logistic(x, y, BaselineConfig{});
    std::vector<double> s;
    for (const auto& row : x) s.push_back(m.logit(row));
    CHECK(auc(s, y) >= 0.99);

    const LogisticModel again = fit_logistic(x, y, BaselineConfig{});
    CHECK(again.weights == m.weights);
    CHECK(again.bias == m.bias);
    CHECK_THROWS_AS(m.logit(std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("mean word vectors skip unknown tokens") {
    SideEmbedding e;
    e.vocab = Vocabulary::build(Corpus{{"a", "b"}}, 1);
    e.table = EmbeddingTable{Side::job, Tensor(Shape{2, 2}, std::vector<float>{1, 2, 3, 4})};
    RawDocument doc{"j", Side::job, Category::T, 2015, {{"a", "zzz"}, {"b", "a"}}};
    const auto v = mean_word_vector(doc, e);
    const std::size_t a = e.vocab.id("a"), b = e.vocab.id("b");
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(v[k] == doctest::Approx((2.0 * e.table.vectors.at(a, k) + e.table.vectors.at(b, k)) / 3.0));
    }
    RawDocument unknown{"k", Side::job, Category::T, 2015, {{"zzz"}}};
    CHECK(mean_word_vector(unknown, e) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("evaluation on a trained small run") {
    const SmallRun run = small_run(4);
    const Dataset& ds = run.corpus.dataset;
    const auto records = evaluation_records(ds, run.splits.test, NegativeMode::synthetic, 11);
    const std::size_t positives = with_label(run.splits.test, Label::success).size();
    CHECK(records.size() == 2 * positives);
    const PairSet known = positive_pairs(ds.applications);
    for (std::size_t i = positives; i < records.size(); ++i) {
        CHECK(records[i].label == Label::failure);
        CHECK(known.count({records[i].job_id, records[i].resume_id}) == 0);
    }
    CHECK(records == evaluation_records(ds, run.splits.test, NegativeMode::synthetic, 11));

    const EvalReport a = evaluate(run.result.params, run.embeddings, ds, records, Grouping::overall);
    const EvalReport b = evaluate(run.result.params, run.embeddings, ds, records, Grouping::overall, 4);
    CHECK(a.overall_auc() == b.overall_auc());
    CHECK(a.overall_auc() > 0.5);
    CHECK(a.records.size() == records.size());
    for (const auto& r : a.records) CHECK(std::abs(r.score) <= 1.0);

    const EvalReport years = evaluate(run.result.params, run.embeddings, ds, records, Grouping::year);
    std::size_t total = 0;
    for (const auto& g : years.groups) total += g.count;
    CHECK(total == records.size());
    CHECK_THROWS_AS(evaluate(run.result.params, run.embeddings, ds, {}, Grouping::overall), DataError);
}

TEST_CASE("the mean-vector baseline is deterministic") {
    const SmallRun run = small_run(1);
    const Dataset& ds = run.corpus.dataset;
    const auto train_records = evaluation_records(ds, run.splits.train, NegativeMode::synthetic, 1);
    const auto test_records = evaluation_records(ds, run.splits.test, NegativeMode::synthetic, 2);
    const EvalReport a = baseline_meanvec(ds, train_records, test_records, run.embeddings, BaselineConfig{});
    const EvalReport b = baseline_meanvec(ds, train_records, test_records, run.embeddings, BaselineConfig{});
    CHECK(a.overall_auc() == b.overall_auc());
    CHECK(a.model == "meanvec-logistic");
    CHECK(a.records.size() == test_records.size());
    CHECK_THROWS_AS(baseline_meanvec(ds, {}, test_records, run.embeddings, BaselineConfig{}), DataError);
}
