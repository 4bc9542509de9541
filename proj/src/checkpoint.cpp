#include "pjfnn/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pjfnn/config.hpp"
#include "pjfnn/error.hpp"

namespace pjfnn {

namespace {

using nlohmann::json;

constexpr std::size_t kPrefixBytes = 16;  // magic + header length
constexpr std::size_t kCrcBytes = 4;

std::uint32_t crc32_of(std::string_view bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    std::size_t done = 0;
    while (done < bytes.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + done), chunk);
        done += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

void put_le(std::string& out, std::uint64_t value, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xffu));
}

std::uint64_t get_le(std::string_view in, std::size_t at, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

struct NamedTensor {
    std::string name;
    const Tensor* tensor;
};

void add_tower(std::vector<NamedTensor>& out, const std::string& side, const TowerParams& t) {
    auto conv = [&](const std::string& n, const Conv1dParams& c) {
        out.push_back({side + "." + n + ".kernels", &c.kernels});
        out.push_back({side + "." + n + ".bias", &c.bias});
    };
    auto bn = [&](const std::string& n, const BatchNormParams& b) {
        out.push_back({side + "." + n + ".gamma", &b.gamma});
        out.push_back({side + "." + n + ".beta", &b.beta});
        out.push_back({side + "." + n + ".running_mean", &b.running_mean});
        out.push_back({side + "." + n + ".running_var", &b.running_var});
    };
    conv("conv1", t.conv1);
    bn("bn1", t.bn1);
    conv("conv2", t.conv2);
    bn("bn2", t.bn2);
}

std::vector<NamedTensor> tensor_list(const Embeddings& e, const std::optional<ModelParams>& model) {
    std::vector<NamedTensor> out{{"embeddings.job", &e.job.table.vectors}, {"embeddings.resume", &e.resume.table.vectors}};
    if (model) {
        add_tower(out, "job", model->job);
        add_tower(out, "resume", model->resume);
    }
    return out;
}

json vocab_json(const Vocabulary& v) {
    std::vector<std::string> tokens(v.tokens().begin() + 1, v.tokens().end());
    std::vector<std::uint64_t> freqs(v.frequencies().begin() + 1, v.frequencies().end());
    return {{"min_count", v.min_count()}, {"tokens", tokens}, {"frequencies", freqs}};
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    const auto x = a.data();
    const auto y = b.data();
    return x.empty() || std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) == 0;
}

bool tower_equal(const TowerParams& a, const TowerParams& b) {
    std::vector<NamedTensor> x, y;
    add_tower(x, "", a);
    add_tower(y, "", b);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!bitwise_equal(*x[i].tensor, *y[i].tensor)) return false;
    }
    return a.bn1.epsilon == b.bn1.epsilon && a.bn1.momentum == b.bn1.momentum && a.bn2.epsilon == b.bn2.epsilon &&
           a.bn2.momentum == b.bn2.momentum;
}

}  // namespace

bool operator==(const Checkpoint& a, const Checkpoint& b) {
    if (a.format_version != b.format_version || a.config != b.config) return false;
    for (Side s : {Side::job, Side::resume}) {
        const auto& x = a.embeddings.side(s);
        const auto& y = b.embeddings.side(s);
        if (!(x.vocab == y.vocab) || x.table.side != y.table.side || !bitwise_equal(x.table.vectors, y.table.vectors)) {
            return false;
        }
    }
    if (a.model.has_value() != b.model.has_value()) return false;
    if (!a.model) return true;
    return a.model->config == b.model->config && tower_equal(a.model->job, b.model->job) &&
           tower_equal(a.model->resume, b.model->resume);
}

std::string serialize_checkpoint(const Checkpoint& cp) {
    const std::vector<NamedTensor> tensors = tensor_list(cp.embeddings, cp.model);
    json directory = json::array();
    std::uint64_t offset = 0;
    for (const auto& t : tensors) {
        if (t.tensor->size() == 0) throw ContractError("checkpoint tensor '" + t.name + "' is empty");
        directory.push_back({{"name", t.name}, {"shape", t.tensor->shape()}, {"offset", offset}});
        offset += t.tensor->size() * sizeof(float);
    }
    json header{{"format_version", cp.format_version},
                {"config", cp.config},
                {"vocabularies", {{"job", vocab_json(cp.embeddings.job.vocab)},
                                  {"resume", vocab_json(cp.embeddings.resume.vocab)}}},
                {"model", cp.model ? config_to_json(cp.model->config) : json(nullptr)},
                {"payload_bytes", offset},
                {"tensors", directory}};
    const std::string text = header.dump();

    std::string out;
    out.reserve(kPrefixBytes + text.size() + offset + kCrcBytes);
    out.append(kCheckpointMagic);
    put_le(out, text.size(), 8);
    out.append(text);
    for (const auto& t : tensors) {
        for (float f : t.tensor->data()) put_le(out, std::bit_cast<std::uint32_t>(f), 4);
    }
    put_le(out, crc32_of(out), 4);
    return out;
}

Checkpoint parse_checkpoint(std::string_view bytes, const std::string& name) {
    auto fail_truncated = [&](const std::string& what) {
        throw CheckpointTruncatedError(name + ": truncated checkpoint (" + what + ", file has " +
                                       std::to_string(bytes.size()) + " bytes)");
    };
    const std::size_t magic_len = kCheckpointMagic.size();
    if (bytes.substr(0, magic_len) != kCheckpointMagic.substr(0, std::min(bytes.size(), magic_len))) {
        throw CheckpointFormatError(name + ": not a checkpoint (bad magic bytes)");
    }
    if (bytes.size() < kPrefixBytes) fail_truncated("incomplete preamble");
    const std::uint64_t header_len = get_le(bytes, magic_len, 8);
    if (header_len > bytes.size() - kPrefixBytes) fail_truncated("header claims " + std::to_string(header_len) + " bytes");

    auto crc_matches = [&] {
        if (bytes.size() < kPrefixBytes + kCrcBytes) return false;
        const std::size_t body = bytes.size() - kCrcBytes;
        return crc32_of(bytes.substr(0, body)) == get_le(bytes, body, 4);
    };

    json header;
    try {
        header = json::parse(bytes.substr(kPrefixBytes, header_len));
    } catch (const json::parse_error& e) {
        if (!crc_matches()) throw CheckpointChecksumError(name + ": checksum mismatch (header unreadable)");
        throw CheckpointFormatError(name + ": malformed header: " + e.what());
    }

    std::uint64_t payload_bytes = 0;
    std::uint32_t version = 0;
    try {
        payload_bytes = header.at("payload_bytes").get<std::uint64_t>();
        version = header.at("format_version").get<std::uint32_t>();
    } catch (const json::exception& e) {
        throw CheckpointFormatError(name + ": malformed header: " + e.what());
    }
    const std::uint64_t payload_start = kPrefixBytes + header_len;
    if (payload_bytes > bytes.size() - payload_start || bytes.size() - payload_start - payload_bytes < kCrcBytes) {
        fail_truncated("expected " + std::to_string(payload_start + payload_bytes + kCrcBytes) + " bytes");
    }
    if (bytes.size() != payload_start + payload_bytes + kCrcBytes) {
        throw CheckpointFormatError(name + ": " + std::to_string(bytes.size() - payload_start - payload_bytes - kCrcBytes) +
                                    " unexpected trailing bytes");
    }
    if (!crc_matches()) throw CheckpointChecksumError(name + ": checksum mismatch");
    if (version != kCheckpointVersion) {
        throw CheckpointVersionError(name + ": format version " + std::to_string(version) + ", this build reads version " +
                                     std::to_string(kCheckpointVersion));
    }

    Checkpoint cp;
    try {
        cp.format_version = version;
        cp.config = header.at("config");
        for (Side s : {Side::job, Side::resume}) {
            const json& v = header.at("vocabularies").at(std::string(to_string(s)));
            SideEmbedding& se = s == Side::job ? cp.embeddings.job : cp.embeddings.resume;
            se.vocab = Vocabulary::from_entries(v.at("tokens").get<std::vector<std::string>>(),
                                                v.at("frequencies").get<std::vector<std::uint64_t>>(),
                                                v.at("min_count").get<std::size_t>());
            se.table.side = s;
        }
        if (!header.at("model").is_null()) {
            ModelConfig mc;
            config_from_json(header.at("model"), mc);
            mc.validate();
            cp.model = init_model(mc, 0);
        }
    } catch (const json::exception& e) {
        throw CheckpointFormatError(name + ": malformed header: " + e.what());
    } catch (const std::runtime_error& e) {
        throw CheckpointFormatError(name + ": inconsistent header: " + e.what());
    }

    // Tensors are filled in directory order; the directory must match the
    // expected layout exactly and tile the payload.
    std::vector<std::pair<std::string, Tensor*>> slots{{"embeddings.job", &cp.embeddings.job.table.vectors},
                                                       {"embeddings.resume", &cp.embeddings.resume.table.vectors}};
    if (cp.model) {
        for (const auto& t : tensor_list(Embeddings{}, cp.model)) {
            if (t.name.starts_with("embeddings.")) continue;
            slots.emplace_back(t.name, const_cast<Tensor*>(t.tensor));
        }
    }
    const json& directory = header.at("tensors");
    if (!directory.is_array() || directory.size() != slots.size()) {
        throw CheckpointFormatError(name + ": tensor directory lists " +
                                    std::to_string(directory.is_array() ? directory.size() : 0) + " tensors, expected " +
                                    std::to_string(slots.size()));
    }
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const auto& [expected_name, target] = slots[i];
        Shape shape;
        std::string entry_name;
        std::uint64_t entry_offset = 0;
        try {
            entry_name = directory[i].at("name").get<std::string>();
            shape = directory[i].at("shape").get<Shape>();
            entry_offset = directory[i].at("offset").get<std::uint64_t>();
        } catch (const json::exception& e) {
            throw CheckpointFormatError(name + ": malformed tensor entry " + std::to_string(i) + ": " + e.what());
        }
        if (entry_name != expected_name) {
            throw CheckpointFormatError(name + ": tensor " + std::to_string(i) + " is '" + entry_name + "', expected '" +
                                        expected_name + "'");
        }
        if (shape.empty() || entry_offset != offset) {
            throw CheckpointFormatError(name + ": tensor '" + entry_name + "' has a bad shape or offset");
        }
        if (target->size() != 0 && shape != target->shape()) {
            throw CheckpointFormatError(name + ": tensor '" + entry_name + "' has shape " + shape_string(shape) +
                                        ", model expects " + shape_string(target->shape()));
        }
        std::uint64_t count = 1;
        for (std::size_t d : shape) {
            if (d == 0 || count > payload_bytes / sizeof(float) / d) {
                throw CheckpointFormatError(name + ": tensor '" + entry_name + "' exceeds the payload");
            }
            count *= d;
        }
        if (offset + count * sizeof(float) > payload_bytes) {
            throw CheckpointFormatError(name + ": tensor '" + entry_name + "' exceeds the payload");
        }
        std::vector<float> values(count);
        const std::size_t base = payload_start + offset;
        for (std::size_t k = 0; k < count; ++k) {
            values[k] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, base + 4 * k, 4)));
        }
        *target = Tensor(std::move(shape), std::move(values));
        offset += count * sizeof(float);
    }
    if (offset != payload_bytes) throw CheckpointFormatError(name + ": payload has unreferenced bytes");

    for (Side s : {Side::job, Side::resume}) {
        const SideEmbedding& se = cp.embeddings.side(s);
        if (se.table.vectors.rank() != 2 || se.table.rows() != se.vocab.size()) {
            throw CheckpointFormatError(name + ": " + std::string(to_string(s)) +
                                        " embedding table does not match its vocabulary");
        }
    }
    if (cp.model && (cp.embeddings.job.table.dim() != cp.model->config.job.input_dim ||
                     cp.embeddings.resume.table.dim() != cp.model->config.resume.input_dim)) {
        throw CheckpointFormatError(name + ": embedding widths do not match the model configuration");
    }
    return cp;
}

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path) {
    const std::string bytes = serialize_checkpoint(cp);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
    return parse_checkpoint(buffer.view(), path.string());
}

}  // namespace pjfnn
