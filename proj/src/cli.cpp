#include "pjfnn/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pjfnn/analysis.hpp"
#include "pjfnn/checkpoint.hpp"
#include "pjfnn/config.hpp"
#include "pjfnn/error.hpp"
#include "pjfnn/eval.hpp"
#include "pjfnn/log.hpp"
#include "pjfnn/rng.hpp"
#include "pjfnn/synth.hpp"
#include "pjfnn/training.hpp"

namespace pjfnn {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct EmbedConfig {
    std::size_t job_dim = 256;
    std::size_t resume_dim = 64;
    std::size_t window = 5;
    std::size_t negatives = 5;
    std::size_t epochs = 5;
    float lr = 0.025f;
    std::size_t min_count = 1;
    std::uint64_t seed = 1;

    SkipGramConfig skipgram(Side side) const {
        return SkipGramConfig{side == Side::job ? job_dim : resume_dim, window, negatives, epochs, lr,
                              Rng::mix(seed, side == Side::job ? 1 : 2)};
    }
};

json to_json(const EmbedConfig& c) {
    return {{"job_dim", c.job_dim}, {"resume_dim", c.resume_dim}, {"window", c.window}, {"negatives", c.negatives},
            {"epochs", c.epochs},   {"lr", float_json(c.lr)},     {"min_count", c.min_count}, {"seed", c.seed}};
}

void from_json_overlay(const json& j, EmbedConfig& c) {
    if (!j.is_object()) throw ConfigError("embed: expected a JSON object");
    // Reuse the skip-gram reader for the shared keys.
    json shared = json::object();
    for (const auto& [key, value] : j.items()) {
        if (key == "job_dim" || key == "resume_dim" || key == "min_count") {
            if (!value.is_number_unsigned()) throw ConfigError("embed." + key + ": invalid value " + value.dump());
            (key == "job_dim" ? c.job_dim : key == "resume_dim" ? c.resume_dim : c.min_count) = value.get<std::size_t>();
        } else {
            shared[key] = value;
        }
    }
    SkipGramConfig sg{0, c.window, c.negatives, c.epochs, c.lr, c.seed};
    try {
        config_from_json(shared, sg);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("embed: ") + e.what());
    }
    if (shared.contains("dim")) throw ConfigError("embed: use job_dim and resume_dim instead of dim");
    c.window = sg.window;
    c.negatives = sg.negatives;
    c.epochs = sg.epochs;
    c.lr = sg.lr;
    c.seed = sg.seed;
}

struct EvalOptions {
    std::string split = "test";
    Grouping group = Grouping::overall;
    NegativeMode negative_mode = NegativeMode::synthetic;
    std::string baseline;
    std::uint64_t seed = 1;
};

json to_json(const EvalOptions& e) {
    return {{"split", e.split},
            {"group", std::string(to_string(e.group))},
            {"negative_mode", std::string(to_string(e.negative_mode))},
            {"baseline", e.baseline},
            {"seed", e.seed}};
}

void from_json_overlay(const json& j, EvalOptions& e) {
    if (!j.is_object()) throw ConfigError("eval: expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "seed") {
            if (!value.is_number_unsigned()) throw ConfigError("eval.seed: invalid value " + value.dump());
            e.seed = value.get<std::uint64_t>();
            continue;
        }
        if (!value.is_string()) throw ConfigError("eval." + key + ": expected a string");
        const std::string s = value.get<std::string>();
        if (key == "split") e.split = s;
        else if (key == "group") e.group = parse_grouping(s);
        else if (key == "negative_mode") e.negative_mode = parse_negative_mode(s);
        else if (key == "baseline") e.baseline = s;
        else throw ConfigError("eval: unknown key '" + key + "'");
    }
}

struct KeywordOptions {
    Side side = Side::job;
    std::size_t dim = 0;
    KeywordConfig keywords;
};

json to_json(const KeywordOptions& k) {
    return {{"side", std::string(to_string(k.side))},
            {"dim", k.dim},
            {"top_k", k.keywords.top_k},
            {"quantile", k.keywords.quantile},
            {"stop_tokens", k.keywords.stop_tokens}};
}

void from_json_overlay(const json& j, KeywordOptions& k) {
    if (!j.is_object()) throw ConfigError("keywords: expected a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "side") k.side = parse_side(value.get<std::string>());
            else if (key == "dim") k.dim = value.get<std::size_t>();
            else if (key == "top_k") k.keywords.top_k = value.get<std::size_t>();
            else if (key == "quantile") k.keywords.quantile = value.get<double>();
            else if (key == "stop_tokens") k.keywords.stop_tokens = value.get<std::vector<std::string>>();
            else throw ConfigError("keywords: unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("keywords: ") + e.what());
    }
}

// Every setting a subcommand may read. Sections of the config file map onto
// these members by name; flags are applied afterwards.
struct RunConfig {
    std::map<std::string, std::string> paths;
    SynthConfig synth;
    EmbedConfig embed;
    ModelConfig model;
    TrainConfig train;
    SplitConfig split;
    EvalOptions eval;
    BaselineConfig baseline;
    KeywordOptions keywords;
    std::size_t threads = 1;
    json file = json::object();  // raw config file contents
};

void apply_config_file(const fs::path& path, RunConfig& rc) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path.string() + "': " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config file '" + path.string() + "' must hold a JSON object");
    rc.file = j;
    for (const auto& [key, value] : j.items()) {
        if (key == "paths") {
            if (!value.is_object()) throw ConfigError("paths: expected a JSON object");
            for (const auto& [name, p] : value.items()) {
                if (!p.is_string()) throw ConfigError("paths." + name + ": expected a string");
                rc.paths[name] = p.get<std::string>();
            }
        } else if (key == "synth") config_from_json(value, rc.synth);
        else if (key == "embed") from_json_overlay(value, rc.embed);
        else if (key == "model") config_from_json(value, rc.model);
        else if (key == "train") config_from_json(value, rc.train);
        else if (key == "split") config_from_json(value, rc.split);
        else if (key == "eval") from_json_overlay(value, rc.eval);
        else if (key == "baseline") config_from_json(value, rc.baseline);
        else if (key == "keywords") from_json_overlay(value, rc.keywords);
        else if (key == "threads") {
            if (!value.is_number_unsigned()) throw ConfigError("threads: invalid value " + value.dump());
            rc.threads = value.get<std::size_t>();
        } else {
            throw ConfigError("config file: unknown section '" + key + "'");
        }
    }
}

// Flag values are captured separately and copied over the resolved config
// only when the flag was given, so flags beat the config file.
class Overrides {
public:
    template <class T>
    CLI::Option* add(CLI::App* app, const std::string& name, T& target, const std::string& help) {
        auto value = std::make_shared<T>(target);
        CLI::Option* opt = app->add_option(name, *value, help);
        apply_.push_back([opt, value, &target] {
            if (opt->count() > 0) target = *value;
        });
        return opt;
    }

    template <class T, class Parse>
    CLI::Option* add_parsed(CLI::App* app, const std::string& name, T& target, Parse parse, const std::string& help) {
        auto value = std::make_shared<std::string>();
        CLI::Option* opt = app->add_option(name, *value, help);
        apply_.push_back([opt, value, &target, parse] {
            if (opt->count() > 0) target = parse(*value);
        });
        return opt;
    }

    CLI::Option* path(CLI::App* app, const std::string& name, RunConfig& rc, const std::string& key,
                      const std::string& help) {
        auto value = std::make_shared<std::string>();
        CLI::Option* opt = app->add_option(name, *value, help);
        apply_.push_back([opt, value, &rc, key] {
            if (opt->count() > 0) rc.paths[key] = *value;
        });
        return opt;
    }

    /// `--seed` sets every seed the subcommand consumes.
    void seed(CLI::App* app, std::vector<std::uint64_t*> targets) {
        auto value = std::make_shared<std::uint64_t>();
        CLI::Option* opt = app->add_option("--seed", *value, "seed for every random choice of this command");
        apply_.push_back([opt, value, targets] {
            if (opt->count() > 0) {
                for (auto* t : targets) *t = *value;
            }
        });
    }

    void apply() const {
        for (const auto& f : apply_) f();
    }

private:
    std::vector<std::function<void()>> apply_;
};

std::string require_path(const RunConfig& rc, const std::string& key, const std::string& flag) {
    auto it = rc.paths.find(key);
    if (it == rc.paths.end() || it->second.empty()) throw UsageError("missing required path " + flag);
    return it->second;
}

void echo_config(std::ostream& err, const std::string& command, const json& resolved) {
    err << "[" << command << "] resolved config: " << resolved.dump() << '\n';
}

json paths_json(const RunConfig& rc) {
    json p = json::object();
    for (const auto& [k, v] : rc.paths) p[k] = v;
    return p;
}

Checkpoint load_trained(const std::string& path) {
    Checkpoint cp = load_checkpoint(path);
    if (!cp.model) throw UsageError("checkpoint '" + path + "' holds embeddings only; run train first");
    return cp;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<ApplicationRecord> select_split(const Dataset& ds, const SplitConfig& config, const std::string& which) {
    if (which == "all") return ds.applications;
    const Splits s = split(ds.applications, config);
    if (which == "train") return s.train;
    if (which == "valid") return s.valid;
    if (which == "test") return s.test;
    throw ConfigError("unknown split '" + which + "' (expected train, valid, test or all)");
}

// Recovers the split used at training time so that eval sees held-out data.
SplitConfig training_split(const Checkpoint& cp) {
    SplitConfig s;
    if (cp.config.contains("split")) config_from_json(cp.config.at("split"), s);
    return s;
}

int cmd_synth(RunConfig& rc, std::ostream& out, std::ostream& err) {
    rc.synth.validate();
    const fs::path dir = require_path(rc, "out", "--out");
    echo_config(err, "synth", {{"synth", config_to_json(rc.synth)}, {"paths", paths_json(rc)}});
    const SyntheticCorpus corpus = synth_generate(rc.synth);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
    write_corpus(corpus.dataset, dir);
    json topics{{"topic_words", corpus.topic_words},
                {"job_topics", corpus.job_topics},
                {"resume_topics", corpus.resume_topics}};
    write_text(dir / "topics.json", topics.dump(1) + "\n");
    out << "wrote " << corpus.dataset.jobs.size() << " jobs, " << corpus.dataset.resumes.size() << " resumes, "
        << corpus.dataset.applications.size() << " applications to " << dir.string() << '\n';
    return 0;
}

int cmd_embed(RunConfig& rc, std::ostream& out, std::ostream& err) {
    const std::string corpus_dir = require_path(rc, "corpus", "--corpus");
    const std::string out_path = require_path(rc, "out", "--out");
    json embed_json = to_json(rc.embed);
    echo_config(err, "embed", {{"embed", embed_json}, {"paths", paths_json(rc)}});
    if (!fs::exists(corpus_dir)) throw UsageError("corpus directory '" + corpus_dir + "' does not exist");
    const Dataset ds = load_corpus(corpus_dir);

    Checkpoint cp;
    cp.config = {{"embed", embed_json}};
    for (Side side : {Side::job, Side::resume}) {
        const Corpus corpus = ds.corpus(side);
        SideEmbedding se;
        se.vocab = Vocabulary::build(corpus, rc.embed.min_count);
        se.table = train_skipgram(corpus, se.vocab, rc.embed.skipgram(side), side);
        out << to_string(side) << ": " << se.vocab.size() << " ids x " << se.table.dim() << " dims\n";
        (side == Side::job ? cp.embeddings.job : cp.embeddings.resume) = std::move(se);
    }
    save_checkpoint(cp, out_path);
    out << "wrote " << out_path << '\n';
    return 0;
}

int cmd_train(RunConfig& rc, std::ostream& out, std::ostream& err) {
    const std::string corpus_dir = require_path(rc, "corpus", "--corpus");
    const std::string emb_path = require_path(rc, "embeddings", "--embeddings");
    const std::string out_path = require_path(rc, "out", "--out");
    const std::string log_path = rc.paths.count("log") ? rc.paths.at("log") : out_path + ".loss.tsv";
    rc.train.validate();
    rc.model.validate();
    if (!fs::exists(corpus_dir)) throw UsageError("corpus directory '" + corpus_dir + "' does not exist");
    const Dataset ds = load_corpus(corpus_dir);
    Checkpoint base = load_checkpoint(emb_path);
    rc.model.job.input_dim = base.embeddings.job.table.dim();
    rc.model.resume.input_dim = base.embeddings.resume.table.dim();

    json resolved{{"model", config_to_json(rc.model)},
                  {"train", config_to_json(rc.train)},
                  {"split", config_to_json(rc.split)},
                  {"paths", paths_json(rc)}};
    echo_config(err, "train", resolved);

    const Splits parts = split(ds.applications, rc.split);
    std::ostringstream log;
    log << "epoch\tmean_loss\tbatches\n";
    const TrainResult result = train(ds, parts.train, base.embeddings, rc.model, rc.train, [&](const EpochLog& e) {
        log << e.epoch << '\t' << e.mean_loss << '\t' << e.batches << '\n';
        out << "epoch " << e.epoch << "  loss " << e.mean_loss << '\n' << std::flush;
    });

    Checkpoint cp;
    cp.config = base.config;
    cp.config["model"] = resolved["model"];
    cp.config["train"] = resolved["train"];
    cp.config["split"] = resolved["split"];
    cp.embeddings = std::move(base.embeddings);
    cp.model = result.params;
    save_checkpoint(cp, out_path);
    write_text(log_path, log.str());
    out << "wrote " << out_path << " and " << log_path << '\n';
    return 0;
}

int cmd_eval(RunConfig& rc, std::ostream& out, std::ostream& err, bool split_by_flag) {
    const std::string corpus_dir = require_path(rc, "corpus", "--corpus");
    const std::string ckpt_path = require_path(rc, "checkpoint", "--checkpoint");
    const Checkpoint cp = load_trained(ckpt_path);
    // The training split is the default; the config file and --split-by may override it.
    SplitConfig s = training_split(cp);
    if (rc.file.contains("split")) config_from_json(rc.file.at("split"), s);
    if (split_by_flag) s.by = rc.split.by;
    rc.split = s;
    if (!rc.eval.baseline.empty() && rc.eval.baseline != "meanvec") {
        throw ConfigError("unknown baseline '" + rc.eval.baseline + "' (expected meanvec)");
    }
    json resolved{{"eval", to_json(rc.eval)}, {"split", config_to_json(rc.split)}, {"threads", rc.threads},
                  {"paths", paths_json(rc)}};
    if (!rc.eval.baseline.empty()) resolved["baseline"] = config_to_json(rc.baseline);
    echo_config(err, "eval", resolved);

    const Dataset ds = load_corpus(corpus_dir);
    const std::vector<ApplicationRecord> part = select_split(ds, rc.split, rc.eval.split);
    const std::vector<ApplicationRecord> records =
        evaluation_records(ds, part, rc.eval.negative_mode, Rng::mix(rc.eval.seed, 1));
    std::vector<EvalReport> reports;
    reports.push_back(evaluate(*cp.model, cp.embeddings, ds, records, rc.eval.group, rc.threads));
    if (rc.eval.baseline == "meanvec") {
        const std::vector<ApplicationRecord> train_part = select_split(ds, rc.split, "train");
        const std::vector<ApplicationRecord> train_records =
            evaluation_records(ds, train_part, rc.eval.negative_mode, Rng::mix(rc.eval.seed, 2));
        reports.push_back(baseline_meanvec(ds, train_records, records, cp.embeddings, rc.baseline, rc.eval.group));
    }
    json doc{{"config", resolved}, {"reports", json::array()}};
    for (const auto& r : reports) {
        out << r.to_table();
        doc["reports"].push_back(r.to_json());
    }
    if (rc.paths.count("out")) {
        write_text(rc.paths.at("out"), doc.dump(1) + "\n");
        out << "wrote " << rc.paths.at("out") << '\n';
    }
    return 0;
}

// A single document from a one-line JSONL file, or by id from the corpus.
RawDocument find_document(const RunConfig& rc, Side side, const std::string& id, const std::string& file_key,
                          std::unique_ptr<Dataset>& corpus) {
    auto file = rc.paths.find(file_key);
    if (file != rc.paths.end()) {
        std::ifstream in(file->second);
        if (!in) throw IoError("cannot open '" + file->second + "'");
        std::istringstream empty;
        std::istringstream empty2;
        const Dataset ds = side == Side::job ? parse_corpus(in, empty, empty2, {file->second, "", ""})
                                             : parse_corpus(empty, in, empty2, {"", file->second, ""});
        const auto& docs = side == Side::job ? ds.jobs : ds.resumes;
        if (docs.size() != 1) throw DataError(file->second + ": expected exactly one document");
        return docs.begin()->second;
    }
    if (id.empty()) throw UsageError(std::string("give --") + std::string(to_string(side)) + " or --" +
                                     std::string(to_string(side)) + "-file");
    if (!corpus) corpus = std::make_unique<Dataset>(load_corpus(require_path(rc, "corpus", "--corpus")));
    return corpus->document(side, id);
}

int cmd_score(RunConfig& rc, std::ostream& out, std::ostream& err, const std::string& job_id,
              const std::string& resume_id, bool items, std::size_t max_text) {
    const std::string ckpt_path = require_path(rc, "checkpoint", "--checkpoint");
    echo_config(err, "score", {{"job", job_id}, {"resume", resume_id}, {"items", items}, {"paths", paths_json(rc)}});
    const Checkpoint cp = load_trained(ckpt_path);
    std::unique_ptr<Dataset> corpus;
    const RawDocument job = find_document(rc, Side::job, job_id, "job_file", corpus);
    const RawDocument resume = find_document(rc, Side::resume, resume_id, "resume_file", corpus);
    const SimilarityReport report = similarity_report(*cp.model, cp.embeddings, job, resume, max_text);
    if (items) {
        out << report.to_text();
    } else {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", report.score);
        out << buf << '\n';
    }
    return 0;
}

std::vector<const RawDocument*> side_documents(const Dataset& ds, Side side) {
    std::vector<const RawDocument*> docs;
    for (const auto& [id, d] : side == Side::job ? ds.jobs : ds.resumes) docs.push_back(&d);
    return docs;
}

int cmd_keywords(RunConfig& rc, std::ostream& out, std::ostream& err) {
    const std::string corpus_dir = require_path(rc, "corpus", "--corpus");
    const std::string ckpt_path = require_path(rc, "checkpoint", "--checkpoint");
    echo_config(err, "keywords", {{"keywords", to_json(rc.keywords)}, {"threads", rc.threads}, {"paths", paths_json(rc)}});
    const Checkpoint cp = load_trained(ckpt_path);
    if (rc.keywords.dim >= cp.model->config.latent) {
        throw UsageError("--dim " + std::to_string(rc.keywords.dim) + " out of range [0, " +
                         std::to_string(cp.model->config.latent) + ")");
    }
    const Dataset ds = load_corpus(corpus_dir);
    const auto docs = side_documents(ds, rc.keywords.side);
    const DimensionKeywords kw = dimension_keywords(*cp.model, cp.embeddings.side(rc.keywords.side), docs,
                                                    rc.keywords.dim, rc.keywords.keywords, rc.threads);
    out << "dim " << kw.dim << "  side " << to_string(kw.side) << "  threshold " << kw.threshold << "  documents "
        << kw.documents_selected << '\n';
    for (const auto& [token, count] : kw.keywords) out << token << '\t' << count << '\n';
    return 0;
}

int cmd_export(RunConfig& rc, std::ostream& out, std::ostream& err, const std::string& side_text) {
    const std::string corpus_dir = require_path(rc, "corpus", "--corpus");
    const std::string ckpt_path = require_path(rc, "checkpoint", "--checkpoint");
    echo_config(err, "export", {{"side", side_text}, {"threads", rc.threads}, {"paths", paths_json(rc)}});
    std::vector<Side> sides;
    if (side_text == "both") sides = {Side::job, Side::resume};
    else sides = {parse_side(side_text)};
    const Checkpoint cp = load_trained(ckpt_path);
    const Dataset ds = load_corpus(corpus_dir);

    std::vector<Document> embedded;
    std::vector<std::string> failures;
    for (Side side : sides) {
        for (const RawDocument* raw : side_documents(ds, side)) {
            try {
                embedded.push_back(embed_document(*raw, cp.embeddings.side(side)));
            } catch (const DataError& e) {
                failures.push_back(raw->id + ": " + e.what());
            }
        }
    }
    std::vector<const Document*> ptrs;
    for (const auto& d : embedded) ptrs.push_back(&d);

    std::ostringstream csv;
    const std::vector<std::string> skipped = export_representations(*cp.model, ptrs, csv, rc.threads);
    failures.insert(failures.end(), skipped.begin(), skipped.end());
    if (rc.paths.count("out")) {
        write_text(rc.paths.at("out"), csv.str());
        out << "wrote " << ptrs.size() - skipped.size() << " documents to " << rc.paths.at("out") << '\n';
    } else {
        out << csv.str();
    }
    for (const auto& f : failures) err << "skipped " << f << '\n';
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Two-tower CNN person-job fit: synthetic data, embeddings, training, evaluation, analysis"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "show help for every subcommand");

    RunConfig rc;
    Overrides ov;
    std::string config_path;
    auto add_config = [&](CLI::App* sub) { sub->add_option("--config", config_path, "JSON config file"); };
    auto add_threads = [&](CLI::App* sub) { ov.add(sub, "--threads", rc.threads, "worker threads for scoring"); };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    add_config(synth);
    ov.path(synth, "--out", rc, "out", "output directory");
    ov.seed(synth, {&rc.synth.seed});
    ov.add(synth, "--topics", rc.synth.n_topics, "number of topics");
    ov.add(synth, "--vocab-per-topic", rc.synth.vocab_per_topic, "words per topic");
    ov.add(synth, "--jobs", rc.synth.n_jobs, "number of job postings");
    ov.add(synth, "--resumes", rc.synth.n_resumes, "number of resumes");
    ov.add(synth, "--applications-per-resume", rc.synth.applications_per_resume, "applications per resume");
    ov.add(synth, "--positive-rate", rc.synth.positive_rate, "fraction of successful applications");
    ov.add(synth, "--label-noise", rc.synth.failure_label_noise, "fraction of failures drawn from fitting pairs");
    ov.add(synth, "--mixture-noise", rc.synth.topic_mixture_noise, "off-topic token rate in experience items");
    ov.add(synth, "--filler-rate", rc.synth.filler_rate, "function-word rate");

    CLI::App* embed = app.add_subcommand("embed", "train skip-gram word vectors for both sides");
    add_config(embed);
    ov.path(embed, "--corpus", rc, "corpus", "corpus directory");
    ov.path(embed, "--out", rc, "out", "checkpoint to write");
    ov.seed(embed, {&rc.embed.seed});
    ov.add(embed, "--job-dim", rc.embed.job_dim, "job word-vector width");
    ov.add(embed, "--resume-dim", rc.embed.resume_dim, "resume word-vector width");
    ov.add(embed, "--window", rc.embed.window, "context window");
    ov.add(embed, "--negatives", rc.embed.negatives, "noise words per context pair");
    ov.add(embed, "--epochs", rc.embed.epochs, "passes over the corpus");
    ov.add(embed, "--lr", rc.embed.lr, "initial learning rate");
    ov.add(embed, "--min-count", rc.embed.min_count, "minimum token frequency");

    CLI::App* trn = app.add_subcommand("train", "train the two-tower model");
    add_config(trn);
    ov.path(trn, "--corpus", rc, "corpus", "corpus directory");
    ov.path(trn, "--embeddings", rc, "embeddings", "checkpoint written by embed");
    ov.path(trn, "--out", rc, "out", "checkpoint to write");
    ov.path(trn, "--log", rc, "log", "loss log (default: <out>.loss.tsv)");
    ov.seed(trn, {&rc.train.seed, &rc.split.seed});
    ov.add(trn, "--epochs", rc.train.epochs, "training epochs");
    ov.add(trn, "--lr", rc.train.lr, "Adam learning rate");
    ov.add(trn, "--lambda", rc.train.lambda, "L2 weight on convolution parameters");
    ov.add(trn, "--batch-size", rc.train.batch_size, "positives per mini-batch");
    ov.add_parsed(trn, "--negative-mode", rc.train.negative_mode, parse_negative_mode, "synthetic or real");
    ov.add(trn, "--ratio", rc.train.negatives_per_positive, "negatives per positive");
    ov.add(trn, "--latent", rc.model.latent, "latent size l");
    ov.add_parsed(trn, "--split-by", rc.split.by, parse_split_by, "random or year");
    ov.add(trn, "--train-frac", rc.split.train_frac, "training fraction");
    ov.add(trn, "--valid-frac", rc.split.valid_frac, "validation fraction");

    CLI::App* ev = app.add_subcommand("eval", "evaluate a trained checkpoint");
    add_config(ev);
    add_threads(ev);
    ov.path(ev, "--corpus", rc, "corpus", "corpus directory");
    ov.path(ev, "--checkpoint", rc, "checkpoint", "trained checkpoint");
    ov.path(ev, "--out", rc, "out", "JSON report to write");
    ov.seed(ev, {&rc.eval.seed, &rc.baseline.seed});
    ov.add(ev, "--split", rc.eval.split, "train, valid, test or all");
    ov.add_parsed(ev, "--group", rc.eval.group, parse_grouping, "overall, year or category");
    ov.add_parsed(ev, "--negative-mode", rc.eval.negative_mode, parse_negative_mode, "synthetic or real");
    ov.add(ev, "--baseline", rc.eval.baseline, "also run a baseline (meanvec)");
    CLI::Option* ev_split_by = ov.add_parsed(ev, "--split-by", rc.split.by, parse_split_by, "override the training split");

    CLI::App* sc = app.add_subcommand("score", "score one job against one resume");
    add_config(sc);
    std::string job_id, resume_id;
    bool items = false;
    std::size_t max_text = 40;
    ov.path(sc, "--corpus", rc, "corpus", "corpus directory");
    ov.path(sc, "--checkpoint", rc, "checkpoint", "trained checkpoint");
    ov.path(sc, "--job-file", rc, "job_file", "one-line JSONL job posting");
    ov.path(sc, "--resume-file", rc, "resume_file", "one-line JSONL resume");
    sc->add_option("--job", job_id, "job id in the corpus");
    sc->add_option("--resume", resume_id, "resume id in the corpus");
    sc->add_flag("--items", items, "print the item similarity matrix");
    sc->add_option("--max-text", max_text, "item text width in the report");

    CLI::App* kw = app.add_subcommand("keywords", "frequent words of documents that activate a latent dimension");
    add_config(kw);
    add_threads(kw);
    ov.path(kw, "--corpus", rc, "corpus", "corpus directory");
    ov.path(kw, "--checkpoint", rc, "checkpoint", "trained checkpoint");
    ov.add_parsed(kw, "--side", rc.keywords.side, parse_side, "job or resume");
    ov.add(kw, "--dim", rc.keywords.dim, "latent dimension");
    ov.add(kw, "--top-k", rc.keywords.keywords.top_k, "keywords to list");
    ov.add(kw, "--quantile", rc.keywords.keywords.quantile, "activation quantile for selection");
    ov.add(kw, "--stop-tokens", rc.keywords.keywords.stop_tokens, "tokens to ignore")->delimiter(',');

    CLI::App* ex = app.add_subcommand("export", "write document and item latent vectors as CSV");
    add_config(ex);
    add_threads(ex);
    std::string export_side = "both";
    ov.path(ex, "--corpus", rc, "corpus", "corpus directory");
    ov.path(ex, "--checkpoint", rc, "checkpoint", "trained checkpoint");
    ov.path(ex, "--out", rc, "out", "CSV file (default: standard output)");
    ex->add_option("--side", export_side, "job, resume or both");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (!config_path.empty()) apply_config_file(config_path, rc);
        ov.apply();
        if (rc.threads == 0) throw ConfigError("--threads must be at least 1");
        if (synth->parsed()) return cmd_synth(rc, out, err);
        if (embed->parsed()) return cmd_embed(rc, out, err);
        if (trn->parsed()) return cmd_train(rc, out, err);
        if (ev->parsed()) return cmd_eval(rc, out, err, ev_split_by->count() > 0);
        if (sc->parsed()) return cmd_score(rc, out, err, job_id, resume_id, items, max_text);
        if (kw->parsed()) return cmd_keywords(rc, out, err);
        if (ex->parsed()) return cmd_export(rc, out, err, export_side);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return 2;
    } catch (const RuntimeFailure& e) {
        err << "runtime error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return 3;
    }
    return 1;
}

}  // namespace pjfnn
