#include "pjfnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include "json.hpp"
#include "pjfnn/error.hpp"
#include "pjfnn/rng.hpp"

namespace pjfnn {

using nlohmann::json;

std::string_view to_string(Category c) {
    switch (c) {
        case Category::T: return "T";
        case Category::P: return "P";
        case Category::U: return "U";
        case Category::O: return "O";
    }
    return "O";
}

Category parse_category(std::string_view text) {
    if (text == "T") return Category::T;
    if (text == "P") return Category::P;
    if (text == "U") return Category::U;
    if (text == "O") return Category::O;
    throw DataError("unknown category '" + std::string(text) + "' (expected T, P, U or O)");
}

std::string_view to_string(Label label) { return label == Label::success ? "success" : "failure"; }

Label parse_label(std::string_view text) {
    if (text == "success") return Label::success;
    if (text == "failure") return Label::failure;
    throw DataError("unknown label '" + std::string(text) + "' (expected success or failure)");
}

std::string_view to_string(SplitBy by) { return by == SplitBy::random ? "random" : "year"; }

SplitBy parse_split_by(std::string_view text) {
    if (text == "random") return SplitBy::random;
    if (text == "year") return SplitBy::year;
    throw ConfigError("unknown split mode '" + std::string(text) + "' (expected random or year)");
}

const RawDocument& Dataset::job(const std::string& id) const {
    auto it = jobs.find(id);
    if (it == jobs.end()) throw NotFoundError("unknown job id '" + id + "'");
    return it->second;
}

const RawDocument& Dataset::resume(const std::string& id) const {
    auto it = resumes.find(id);
    if (it == resumes.end()) throw NotFoundError("unknown resume id '" + id + "'");
    return it->second;
}

const RawDocument& Dataset::document(Side side, const std::string& id) const {
    return side == Side::job ? job(id) : resume(id);
}

std::vector<std::string> Dataset::job_ids() const {
    std::vector<std::string> ids;
    ids.reserve(jobs.size());
    for (const auto& [id, doc] : jobs) ids.push_back(id);
    return ids;
}

Corpus Dataset::corpus(Side side) const {
    Corpus out;
    for (const auto& [id, doc] : side == Side::job ? jobs : resumes) {
        out.insert(out.end(), doc.items.begin(), doc.items.end());
    }
    return out;
}

void Dataset::validate() const {
    for (const auto* docs : {&jobs, &resumes}) {
        for (const auto& [id, doc] : *docs) {
            if (doc.items.empty()) throw EmptyDocumentError(std::string(to_string(doc.side)) + " '" + id + "' has no items");
        }
    }
    std::set<std::tuple<std::string, std::string, Label>> seen;
    for (const auto& a : applications) {
        if (!jobs.count(a.job_id)) throw ReferentialIntegrityError("application references unknown job_id '" + a.job_id + "'");
        if (!resumes.count(a.resume_id)) {
            throw ReferentialIntegrityError("application references unknown resume_id '" + a.resume_id + "'");
        }
        if (!seen.emplace(a.job_id, a.resume_id, a.label).second) {
            throw DuplicateIdError("duplicate application (" + a.job_id + ", " + a.resume_id + ", " +
                                   std::string(to_string(a.label)) + ")");
        }
    }
}

std::vector<ApplicationRecord> with_label(const std::vector<ApplicationRecord>& records, Label label) {
    std::vector<ApplicationRecord> out;
    std::copy_if(records.begin(), records.end(), std::back_inserter(out),
                 [label](const ApplicationRecord& r) { return r.label == label; });
    return out;
}

namespace {

struct LineContext {
    const std::string& stream;
    std::size_t line;

    [[noreturn]] void fail(const std::string& what, std::size_t column = 1) const {
        throw ParseError(stream, line, column, what);
    }
};

const json& field(const json& obj, const char* name, const LineContext& ctx) {
    auto it = obj.find(name);
    if (it == obj.end()) ctx.fail(std::string("missing field '") + name + "'");
    return *it;
}

std::string string_field(const json& obj, const char* name, const LineContext& ctx) {
    const json& v = field(obj, name, ctx);
    if (!v.is_string()) ctx.fail(std::string("field '") + name + "' must be a string");
    return v.get<std::string>();
}

int int_field(const json& obj, const char* name, const LineContext& ctx) {
    const json& v = field(obj, name, ctx);
    if (!v.is_number_integer()) ctx.fail(std::string("field '") + name + "' must be an integer");
    const auto value = v.get<std::int64_t>();
    if (value < INT32_MIN || value > INT32_MAX) ctx.fail(std::string("field '") + name + "' out of range");
    return static_cast<int>(value);
}

template <typename Fn>
void for_each_record(std::istream& in, const std::string& name, Fn&& fn) {
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (std::all_of(text.begin(), text.end(), [](unsigned char ch) { return std::isspace(ch); })) continue;
        LineContext ctx{name, line};
        json record;
        try {
            record = json::parse(text);
        } catch (const json::parse_error& e) {
            ctx.fail(e.what(), e.byte == 0 ? 1 : e.byte);
        }
        if (!record.is_object()) ctx.fail("record must be a JSON object");
        try {
            fn(record, ctx);
        } catch (const json::exception& e) {
            ctx.fail(e.what());
        }
    }
    if (in.bad()) throw IoError("failed reading " + name);
}

RawDocument parse_document(const json& record, Side expected, const LineContext& ctx) {
    RawDocument doc;
    doc.id = string_field(record, "id", ctx);
    if (doc.id.empty()) ctx.fail("empty id");
    try {
        doc.side = parse_side(string_field(record, "side", ctx));
        doc.category = parse_category(string_field(record, "category", ctx));
    } catch (const std::runtime_error& e) {
        ctx.fail(e.what());
    }
    if (doc.side != expected) ctx.fail("document side '" + std::string(to_string(doc.side)) + "' in " + ctx.stream);
    doc.year = int_field(record, "year", ctx);
    const json& items = field(record, "items", ctx);
    if (!items.is_array()) ctx.fail("field 'items' must be an array of token arrays");
    for (const json& item : items) {
        if (!item.is_array() || item.empty()) ctx.fail("each item must be a nonempty array of tokens");
        Sentence tokens;
        for (const json& tok : item) {
            if (!tok.is_string() || tok.get_ref<const std::string&>().empty()) ctx.fail("tokens must be nonempty strings");
            tokens.push_back(tok.get<std::string>());
        }
        doc.items.push_back(std::move(tokens));
    }
    if (doc.items.empty()) {
        throw EmptyDocumentError(ctx.stream + ":" + std::to_string(ctx.line) + ": " +
                                 std::string(to_string(doc.side)) + " '" + doc.id + "' has no items");
    }
    return doc;
}

json document_json(const RawDocument& doc) {
    return json{{"id", doc.id},
                {"side", to_string(doc.side)},
                {"category", to_string(doc.category)},
                {"year", doc.year},
                {"items", doc.items}};
}

}  // namespace

Dataset parse_corpus(std::istream& jobs, std::istream& resumes, std::istream& applications,
                     const std::array<std::string, 3>& names) {
    Dataset ds;
    auto load_docs = [](std::istream& in, const std::string& name, Side side, std::map<std::string, RawDocument>& out) {
        for_each_record(in, name, [&](const json& record, const LineContext& ctx) {
            RawDocument doc = parse_document(record, side, ctx);
            const std::string id = doc.id;
            if (!out.emplace(id, std::move(doc)).second) {
                throw DuplicateIdError(name + ":" + std::to_string(ctx.line) + ": duplicate " +
                                       std::string(to_string(side)) + " id '" + id + "'");
            }
        });
    };
    load_docs(jobs, names[0], Side::job, ds.jobs);
    load_docs(resumes, names[1], Side::resume, ds.resumes);

    std::set<std::tuple<std::string, std::string, Label>> seen;
    for_each_record(applications, names[2], [&](const json& record, const LineContext& ctx) {
        ApplicationRecord a;
        a.job_id = string_field(record, "job_id", ctx);
        a.resume_id = string_field(record, "resume_id", ctx);
        try {
            a.label = parse_label(string_field(record, "label", ctx));
        } catch (const DataError& e) {
            ctx.fail(e.what());
        }
        a.year = int_field(record, "year", ctx);
        const std::string where = names[2] + ":" + std::to_string(ctx.line) + ": ";
        if (!ds.jobs.count(a.job_id)) throw ReferentialIntegrityError(where + "unknown job_id '" + a.job_id + "'");
        if (!ds.resumes.count(a.resume_id)) {
            throw ReferentialIntegrityError(where + "unknown resume_id '" + a.resume_id + "'");
        }
        if (!seen.emplace(a.job_id, a.resume_id, a.label).second) {
            throw DuplicateIdError(where + "duplicate application (" + a.job_id + ", " + a.resume_id + ")");
        }
        ds.applications.push_back(std::move(a));
    });
    return ds;
}

Dataset load_corpus(const std::filesystem::path& jobs_path, const std::filesystem::path& resumes_path,
                    const std::filesystem::path& applications_path) {
    auto open = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw IoError("cannot open " + p.string());
        return in;
    };
    std::ifstream jobs = open(jobs_path);
    std::ifstream resumes = open(resumes_path);
    std::ifstream apps = open(applications_path);
    return parse_corpus(jobs, resumes, apps, {jobs_path.string(), resumes_path.string(), applications_path.string()});
}

Dataset load_corpus(const std::filesystem::path& directory) {
    return load_corpus(directory / "jobs.jsonl", directory / "resumes.jsonl", directory / "applications.jsonl");
}

void write_corpus(const Dataset& dataset, std::ostream& jobs, std::ostream& resumes, std::ostream& applications) {
    for (const auto& [id, doc] : dataset.jobs) jobs << document_json(doc).dump() << '\n';
    for (const auto& [id, doc] : dataset.resumes) resumes << document_json(doc).dump() << '\n';
    for (const auto& a : dataset.applications) {
        json record{{"job_id", a.job_id}, {"resume_id", a.resume_id}, {"label", to_string(a.label)}, {"year", a.year}};
        applications << record.dump() << '\n';
    }
}

void write_corpus(const Dataset& dataset, const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    auto open = [](const std::filesystem::path& p) {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + p.string());
        return out;
    };
    std::ofstream jobs = open(directory / "jobs.jsonl");
    std::ofstream resumes = open(directory / "resumes.jsonl");
    std::ofstream apps = open(directory / "applications.jsonl");
    write_corpus(dataset, jobs, resumes, apps);
    if (!jobs || !resumes || !apps) throw IoError("failed writing corpus to " + directory.string());
}

namespace {

void split_group(std::vector<ApplicationRecord> group, const SplitConfig& config, std::uint64_t seed, Splits& out) {
    Rng rng(seed);
    rng.shuffle(std::span<ApplicationRecord>(group));
    const double n = static_cast<double>(group.size());
    auto n_train = static_cast<std::size_t>(std::llround(n * config.train_frac));
    auto n_valid = static_cast<std::size_t>(std::llround(n * config.valid_frac));
    n_train = std::min(n_train, group.size());
    n_valid = std::min(n_valid, group.size() - n_train);
    auto first = group.begin();
    out.train.insert(out.train.end(), first, first + static_cast<std::ptrdiff_t>(n_train));
    out.valid.insert(out.valid.end(), first + static_cast<std::ptrdiff_t>(n_train),
                     first + static_cast<std::ptrdiff_t>(n_train + n_valid));
    out.test.insert(out.test.end(), first + static_cast<std::ptrdiff_t>(n_train + n_valid), group.end());
}

}  // namespace

Splits split(const std::vector<ApplicationRecord>& records, const SplitConfig& config) {
    if (!(config.train_frac > 0.0) || !(config.valid_frac > 0.0) || config.train_frac + config.valid_frac > 1.0) {
        throw ConfigError("split fractions must be positive and sum to at most 1");
    }
    Splits out;
    if (config.by == SplitBy::random) {
        split_group(records, config, config.seed, out);
    } else {
        std::map<int, std::vector<ApplicationRecord>> by_year;
        for (const auto& r : records) by_year[r.year].push_back(r);
        for (auto& [year, group] : by_year) {
            split_group(std::move(group), config, Rng::mix(config.seed, static_cast<std::uint64_t>(year)), out);
        }
    }
    const std::pair<const char*, std::size_t> parts[] = {
        {"train", out.train.size()}, {"valid", out.valid.size()}, {"test", out.test.size()}};
    for (const auto& [name, count] : parts) {
        if (count == 0) {
            throw UnderfullSplitError(std::string(name) + " split received no records out of " +
                                      std::to_string(records.size()));
        }
    }
    return out;
}

}  // namespace pjfnn
