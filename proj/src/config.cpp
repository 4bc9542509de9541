#include "pjfnn/config.hpp"

#include <charconv>
#include <cstdlib>
#include <functional>
#include <map>

#include "pjfnn/error.hpp"

namespace pjfnn {

namespace {

using nlohmann::json;

// Dispatches each key of an object to a field setter, rejecting unknown keys.
class Overlay {
public:
    Overlay(const json& j, std::string what) : j_(j), what_(std::move(what)) {
        if (!j_.is_object()) throw ConfigError(what_ + ": expected a JSON object");
    }

    template <class T>
    Overlay& field(const std::string& key, T& target) {
        setters_[key] = [&target, this, key](const json& v) {
            try {
                if constexpr (std::is_same_v<T, bool>) {
                    if (!v.is_boolean()) throw ConfigError("");
                } else if constexpr (std::is_arithmetic_v<T>) {
                    if (!v.is_number()) throw ConfigError("");
                    if constexpr (std::is_unsigned_v<T>) {
                        if (!v.is_number_unsigned()) throw ConfigError("");
                    } else if constexpr (std::is_integral_v<T>) {
                        if (v.is_number_float()) throw ConfigError("");
                    }
                }
                target = v.get<T>();
            } catch (const std::exception&) {
                throw ConfigError(what_ + "." + key + ": invalid value " + v.dump());
            }
        };
        return *this;
    }

    Overlay& custom(const std::string& key, std::function<void(const json&)> set) {
        setters_[key] = std::move(set);
        return *this;
    }

    void apply() const {
        for (const auto& [key, value] : j_.items()) {
            auto it = setters_.find(key);
            if (it == setters_.end()) throw ConfigError(what_ + ": unknown key '" + key + "'");
            it->second(value);
        }
    }

private:
    const json& j_;
    std::string what_;
    std::map<std::string, std::function<void(const json&)>> setters_;
};

template <class Enum, class Parse>
std::function<void(const json&)> enum_setter(Enum& target, Parse parse, const std::string& key) {
    return [&target, parse, key](const json& v) {
        if (!v.is_string()) throw ConfigError(key + ": expected a string");
        target = parse(v.get<std::string>());
    };
}

std::function<void(const json&)> range_setter(CountRange& target, const std::string& key) {
    return [&target, key](const json& v) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number_unsigned() || !v[1].is_number_unsigned()) {
            throw ConfigError(key + ": expected [min, max] with non-negative integers");
        }
        target = CountRange{v[0].get<std::size_t>(), v[1].get<std::size_t>()};
    };
}

}  // namespace

json float_json(float value) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    *end = '\0';
    return std::strtod(buf, nullptr);
}

json config_to_json(const TowerConfig& c) {
    return {{"input_dim", c.input_dim},     {"conv1_channels", c.conv1_channels}, {"conv1_width", c.conv1_width},
            {"pool_size", c.pool_size},     {"pool_stride", c.pool_stride},       {"conv2_width", c.conv2_width}};
}

json config_to_json(const ModelConfig& c) {
    return {{"latent", c.latent},
            {"job", config_to_json(c.job)},
            {"resume", config_to_json(c.resume)},
            {"bn_epsilon", float_json(c.bn_epsilon)},
            {"bn_momentum", float_json(c.bn_momentum)}};
}

json config_to_json(const TrainConfig& c) {
    return {{"lambda", c.lambda},
            {"lr", c.lr},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"eps", c.eps},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"negative_mode", std::string(to_string(c.negative_mode))},
            {"negatives_per_positive", c.negatives_per_positive},
            {"resample_negatives", c.resample_negatives},
            {"seed", c.seed}};
}

json config_to_json(const SkipGramConfig& c) {
    return {{"dim", c.dim},       {"window", c.window}, {"negatives", c.negatives},
            {"epochs", c.epochs}, {"lr", float_json(c.lr)}, {"seed", c.seed}};
}

json config_to_json(const SplitConfig& c) {
    return {{"train_frac", c.train_frac},
            {"valid_frac", c.valid_frac},
            {"by", std::string(to_string(c.by))},
            {"seed", c.seed}};
}

json config_to_json(const SynthConfig& c) {
    return {{"n_topics", c.n_topics},
            {"vocab_per_topic", c.vocab_per_topic},
            {"n_jobs", c.n_jobs},
            {"n_resumes", c.n_resumes},
            {"items_per_doc", {c.items_per_doc.min, c.items_per_doc.max}},
            {"tokens_per_item", {c.tokens_per_item.min, c.tokens_per_item.max}},
            {"topics_per_doc", {c.topics_per_doc.min, c.topics_per_doc.max}},
            {"topic_mixture_noise", c.topic_mixture_noise},
            {"positive_rate", c.positive_rate},
            {"failure_label_noise", c.failure_label_noise},
            {"filler_rate", c.filler_rate},
            {"applications_per_resume", c.applications_per_resume},
            {"first_year", c.first_year},
            {"last_year", c.last_year},
            {"seed", c.seed}};
}

json config_to_json(const BaselineConfig& c) {
    return {{"l2", c.l2}, {"epochs", c.epochs}, {"lr", c.lr}, {"batch_size", c.batch_size}, {"seed", c.seed}};
}

void config_from_json(const json& j, TowerConfig& out) {
    Overlay(j, "tower")
        .field("input_dim", out.input_dim)
        .field("conv1_channels", out.conv1_channels)
        .field("conv1_width", out.conv1_width)
        .field("pool_size", out.pool_size)
        .field("pool_stride", out.pool_stride)
        .field("conv2_width", out.conv2_width)
        .apply();
}

void config_from_json(const json& j, ModelConfig& out) {
    Overlay(j, "model")
        .field("latent", out.latent)
        .custom("job", [&](const json& v) { config_from_json(v, out.job); })
        .custom("resume", [&](const json& v) { config_from_json(v, out.resume); })
        .field("bn_epsilon", out.bn_epsilon)
        .field("bn_momentum", out.bn_momentum)
        .apply();
}

void config_from_json(const json& j, TrainConfig& out) {
    Overlay(j, "train")
        .field("lambda", out.lambda)
        .field("lr", out.lr)
        .field("beta1", out.beta1)
        .field("beta2", out.beta2)
        .field("eps", out.eps)
        .field("epochs", out.epochs)
        .field("batch_size", out.batch_size)
        .custom("negative_mode", enum_setter(out.negative_mode, parse_negative_mode, "train.negative_mode"))
        .field("negatives_per_positive", out.negatives_per_positive)
        .field("resample_negatives", out.resample_negatives)
        .field("seed", out.seed)
        .apply();
}

void config_from_json(const json& j, SkipGramConfig& out) {
    Overlay(j, "skipgram")
        .field("dim", out.dim)
        .field("window", out.window)
        .field("negatives", out.negatives)
        .field("epochs", out.epochs)
        .field("lr", out.lr)
        .field("seed", out.seed)
        .apply();
}

void config_from_json(const json& j, SplitConfig& out) {
    Overlay(j, "split")
        .field("train_frac", out.train_frac)
        .field("valid_frac", out.valid_frac)
        .custom("by", enum_setter(out.by, parse_split_by, "split.by"))
        .field("seed", out.seed)
        .apply();
}

void config_from_json(const json& j, SynthConfig& out) {
    Overlay(j, "synth")
        .field("n_topics", out.n_topics)
        .field("vocab_per_topic", out.vocab_per_topic)
        .field("n_jobs", out.n_jobs)
        .field("n_resumes", out.n_resumes)
        .custom("items_per_doc", range_setter(out.items_per_doc, "synth.items_per_doc"))
        .custom("tokens_per_item", range_setter(out.tokens_per_item, "synth.tokens_per_item"))
        .custom("topics_per_doc", range_setter(out.topics_per_doc, "synth.topics_per_doc"))
        .field("topic_mixture_noise", out.topic_mixture_noise)
        .field("positive_rate", out.positive_rate)
        .field("failure_label_noise", out.failure_label_noise)
        .field("filler_rate", out.filler_rate)
        .field("applications_per_resume", out.applications_per_resume)
        .field("first_year", out.first_year)
        .field("last_year", out.last_year)
        .field("seed", out.seed)
        .apply();
}

void config_from_json(const json& j, BaselineConfig& out) {
    Overlay(j, "baseline")
        .field("l2", out.l2)
        .field("epochs", out.epochs)
        .field("lr", out.lr)
        .field("batch_size", out.batch_size)
        .field("seed", out.seed)
        .apply();
}

}  // namespace pjfnn
