#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pjfnn/embeddings.hpp"

namespace pjfnn {

/// Technology, Product, User interface/experience, Others.
enum class Category { T, P, U, O };

std::string_view to_string(Category c);
Category parse_category(std::string_view text);

enum class Label { success, failure };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

/// A job posting (requirement items) or resume (work-experience items) as
/// pre-tokenized text.
struct RawDocument {
    std::string id;
    Side side = Side::job;
    Category category = Category::O;
    int year = 0;
    std::vector<Sentence> items;

    friend bool operator==(const RawDocument&, const RawDocument&) = default;
};

struct ApplicationRecord {
    std::string job_id;
    std::string resume_id;
    Label label = Label::success;
    int year = 0;

    friend bool operator==(const ApplicationRecord&, const ApplicationRecord&) = default;
};

struct Dataset {
    std::map<std::string, RawDocument> jobs;
    std::map<std::string, RawDocument> resumes;
    std::vector<ApplicationRecord> applications;

    const RawDocument& job(const std::string& id) const;
    const RawDocument& resume(const std::string& id) const;
    const RawDocument& document(Side side, const std::string& id) const;

    std::vector<std::string> job_ids() const;

    /// Every item's tokens for one side, one sentence per item.
    Corpus corpus(Side side) const;

    /// Throws on dangling references, duplicate (job, resume, label) triples,
    /// or empty documents.
    void validate() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

std::vector<ApplicationRecord> with_label(const std::vector<ApplicationRecord>& records, Label label);

/// Reads three line-delimited JSON streams. `names` label the streams in
/// diagnostics. Any input produces either a dataset or a DataError.
Dataset parse_corpus(std::istream& jobs, std::istream& resumes, std::istream& applications,
                     const std::array<std::string, 3>& names = {"jobs", "resumes", "applications"});

Dataset load_corpus(const std::filesystem::path& jobs_path, const std::filesystem::path& resumes_path,
                    const std::filesystem::path& applications_path);

/// Conventional layout: jobs.jsonl, resumes.jsonl, applications.jsonl in one directory.
Dataset load_corpus(const std::filesystem::path& directory);

void write_corpus(const Dataset& dataset, std::ostream& jobs, std::ostream& resumes, std::ostream& applications);
void write_corpus(const Dataset& dataset, const std::filesystem::path& directory);

enum class SplitBy { random, year };

std::string_view to_string(SplitBy by);
SplitBy parse_split_by(std::string_view text);

struct SplitConfig {
    double train_frac = 0.8;
    double valid_frac = 0.1;
    SplitBy by = SplitBy::random;
    std::uint64_t seed = 1;
};

struct Splits {
    std::vector<ApplicationRecord> train;
    std::vector<ApplicationRecord> valid;
    std::vector<ApplicationRecord> test;
};

/// Partitions application records. Each part receives round(n * frac) records
/// (the test part takes the remainder); year mode applies this within each year.
Splits split(const std::vector<ApplicationRecord>& records, const SplitConfig& config);

}  // namespace pjfnn
