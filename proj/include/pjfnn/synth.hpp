#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pjfnn/data.hpp"

namespace pjfnn {

struct CountRange {
    std::size_t min = 1;
    std::size_t max = 1;
};

/// Topic-structured recruitment corpus. Requirement items are single-topic;
/// experience items mix the resume's topics. Successful applications pair a
/// resume with a job whose topics it covers; failures pair disjoint topic sets.
struct SynthConfig {
    std::size_t n_topics = 8;
    std::size_t vocab_per_topic = 25;
    std::size_t n_jobs = 400;
    std::size_t n_resumes = 800;
    CountRange items_per_doc{2, 6};
    CountRange tokens_per_item{5, 12};
    CountRange topics_per_doc{2, 2};
    /// Probability that an experience-item token comes from a uniformly random topic.
    double topic_mixture_noise = 0.1;
    /// Probability that a generated application is a success.
    double positive_rate = 0.5;
    /// Probability that a failure is drawn from a covering (fitting) pair instead of a disjoint one.
    double failure_label_noise = 0.0;
    /// Probability that a token is a function word rather than a topic word.
    double filler_rate = 0.15;
    std::size_t applications_per_resume = 5;
    int first_year = 2013;
    int last_year = 2016;
    std::uint64_t seed = 7;

    void validate() const;
};

struct SyntheticCorpus {
    Dataset dataset;
    std::vector<std::vector<std::string>> topic_words;
    std::map<std::string, std::vector<std::size_t>> job_topics;
    std::map<std::string, std::vector<std::size_t>> resume_topics;
};

/// Function words mixed into every generated item.
const std::vector<std::string>& synth_filler_words();

std::string topic_word(std::size_t topic, std::size_t rank);

SyntheticCorpus synth_generate(const SynthConfig& config);

}  // namespace pjfnn
