#include "pjfnn/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "pjfnn/error.hpp"
#include "pjfnn/rng.hpp"

namespace pjfnn {

namespace {

std::size_t draw_count(Rng& rng, CountRange r) { return r.min + rng.below(r.max - r.min + 1); }

std::vector<std::size_t> draw_topics(Rng& rng, std::size_t n_topics, CountRange r) {
    std::vector<std::size_t> all(n_topics);
    for (std::size_t t = 0; t < n_topics; ++t) all[t] = t;
    const std::size_t k = draw_count(rng, r);
    for (std::size_t i = 0; i < k; ++i) std::swap(all[i], all[i + rng.below(n_topics - i)]);
    all.resize(k);
    return all;
}

std::uint64_t mask_of(const std::vector<std::size_t>& topics) {
    std::uint64_t m = 0;
    for (auto t : topics) m |= std::uint64_t{1} << t;
    return m;
}

std::string make_id(char prefix, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%04zu", prefix, index);
    return buf;
}

class WordSampler {
public:
    WordSampler(const SynthConfig& config) : config_(config) {
        double acc = 0.0;
        for (std::size_t r = 0; r < config.vocab_per_topic; ++r) {
            acc += 1.0 / static_cast<double>(r + 1);
            zipf_.push_back(acc);
        }
    }

    std::string topic_token(Rng& rng, std::size_t topic) const {
        const double u = rng.uniform_double() * zipf_.back();
        auto rank = static_cast<std::size_t>(std::upper_bound(zipf_.begin(), zipf_.end(), u) - zipf_.begin());
        return topic_word(topic, std::min(rank, zipf_.size() - 1));
    }

    std::string filler(Rng& rng) const {
        const auto& words = synth_filler_words();
        return words[rng.below(words.size())];
    }

private:
    const SynthConfig& config_;
    std::vector<double> zipf_;
};

Category category_of(std::size_t topic) {
    constexpr Category cycle[] = {Category::T, Category::P, Category::U, Category::O};
    return cycle[topic % 4];
}

}  // namespace

void SynthConfig::validate() const {
    auto check_range = [](const CountRange& r, const char* name) {
        if (r.min < 1 || r.min > r.max) throw ConfigError(std::string(name) + " range must satisfy 1 <= min <= max");
    };
    if (n_topics < 1 || n_topics > 64) throw ConfigError("n_topics must lie in [1, 64]");
    if (vocab_per_topic < 1 || n_jobs < 1 || n_resumes < 1 || applications_per_resume < 1) {
        throw ConfigError("synthetic corpus counts must be at least 1");
    }
    check_range(items_per_doc, "items_per_doc");
    check_range(tokens_per_item, "tokens_per_item");
    check_range(topics_per_doc, "topics_per_doc");
    if (topics_per_doc.max > n_topics) {
        throw ConfigError("topics_per_doc max " + std::to_string(topics_per_doc.max) + " exceeds n_topics " +
                          std::to_string(n_topics));
    }
    for (double rate : {topic_mixture_noise, positive_rate, failure_label_noise, filler_rate}) {
        if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("synthetic corpus rates must lie in [0, 1]");
    }
    if (filler_rate >= 1.0) throw ConfigError("filler_rate must be below 1");
    if (first_year > last_year) throw ConfigError("first_year must not exceed last_year");
}

const std::vector<std::string>& synth_filler_words() {
    static const std::vector<std::string> words{"the", "and", "with", "for", "of", "to", "in", "on"};
    return words;
}

std::string topic_word(std::size_t topic, std::size_t rank) {
    return "t" + std::to_string(topic) + "w" + std::to_string(rank);
}

SyntheticCorpus synth_generate(const SynthConfig& config) {
    config.validate();
    Rng rng(config.seed);
    const WordSampler words(config);
    SyntheticCorpus out;

    out.topic_words.resize(config.n_topics);
    for (std::size_t t = 0; t < config.n_topics; ++t) {
        for (std::size_t r = 0; r < config.vocab_per_topic; ++r) out.topic_words[t].push_back(topic_word(t, r));
    }
    const auto n_years = static_cast<std::uint64_t>(config.last_year - config.first_year + 1);

    std::vector<std::string> job_ids;
    std::vector<std::uint64_t> job_masks;
    std::vector<int> job_years;
    for (std::size_t j = 0; j < config.n_jobs; ++j) {
        RawDocument doc;
        doc.id = make_id('j', j);
        doc.side = Side::job;
        const auto topics = draw_topics(rng, config.n_topics, config.topics_per_doc);
        doc.category = category_of(topics.front());
        doc.year = config.first_year + static_cast<int>(rng.below(n_years));
        const std::size_t n_items = draw_count(rng, config.items_per_doc);
        for (std::size_t i = 0; i < n_items; ++i) {
            // Cover every topic once before repeating; each item stays on one topic.
            const std::size_t topic = i < topics.size() ? topics[i] : topics[rng.below(topics.size())];
            Sentence item;
            const std::size_t len = draw_count(rng, config.tokens_per_item);
            for (std::size_t w = 0; w < len; ++w) {
                item.push_back(rng.bernoulli(config.filler_rate) ? words.filler(rng) : words.topic_token(rng, topic));
            }
            doc.items.push_back(std::move(item));
        }
        auto sorted = topics;
        std::sort(sorted.begin(), sorted.end());
        out.job_topics[doc.id] = sorted;
        job_ids.push_back(doc.id);
        job_masks.push_back(mask_of(topics));
        job_years.push_back(doc.year);
        out.dataset.jobs.emplace(doc.id, std::move(doc));
    }

    std::vector<std::string> resume_ids;
    std::vector<std::uint64_t> resume_masks;
    for (std::size_t r = 0; r < config.n_resumes; ++r) {
        RawDocument doc;
        doc.id = make_id('r', r);
        doc.side = Side::resume;
        const auto topics = draw_topics(rng, config.n_topics, config.topics_per_doc);
        doc.category = category_of(topics.front());
        doc.year = config.first_year + static_cast<int>(rng.below(n_years));
        const std::size_t n_items = draw_count(rng, config.items_per_doc);
        for (std::size_t i = 0; i < n_items; ++i) {
            Sentence item;
            const std::size_t len = draw_count(rng, config.tokens_per_item);
            for (std::size_t w = 0; w < len; ++w) {
                if (rng.bernoulli(config.filler_rate)) {
                    item.push_back(words.filler(rng));
                } else if (rng.bernoulli(config.topic_mixture_noise)) {
                    item.push_back(words.topic_token(rng, rng.below(config.n_topics)));
                } else {
                    item.push_back(words.topic_token(rng, topics[rng.below(topics.size())]));
                }
            }
            doc.items.push_back(std::move(item));
        }
        auto sorted = topics;
        std::sort(sorted.begin(), sorted.end());
        out.resume_topics[doc.id] = sorted;
        resume_ids.push_back(doc.id);
        resume_masks.push_back(mask_of(topics));
        out.dataset.resumes.emplace(doc.id, std::move(doc));
    }

    std::vector<std::size_t> covering;
    std::vector<std::size_t> disjoint;
    for (std::size_t r = 0; r < config.n_resumes; ++r) {
        covering.clear();
        disjoint.clear();
        for (std::size_t j = 0; j < config.n_jobs; ++j) {
            if ((job_masks[j] & ~resume_masks[r]) == 0) covering.push_back(j);
            if ((job_masks[j] & resume_masks[r]) == 0) disjoint.push_back(j);
        }
        std::set<std::size_t> used;
        for (std::size_t a = 0; a < config.applications_per_resume; ++a) {
            const bool success = rng.bernoulli(config.positive_rate);
            const bool noisy = !success && rng.bernoulli(config.failure_label_noise);
            const auto& pool = (success || noisy) ? covering : disjoint;
            if (pool.empty()) continue;
            for (int attempt = 0; attempt < 8; ++attempt) {
                const std::size_t j = pool[rng.below(pool.size())];
                if (!used.insert(j).second) continue;
                out.dataset.applications.push_back(ApplicationRecord{
                    job_ids[j], resume_ids[r], success ? Label::success : Label::failure, job_years[j]});
                break;
            }
        }
    }
    out.dataset.validate();
    return out;
}

}  // namespace pjfnn
