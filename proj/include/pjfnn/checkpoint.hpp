#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "pjfnn/embeddings.hpp"
#include "pjfnn/model.hpp"

namespace pjfnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::string_view kCheckpointMagic = "PJFNNCKP";

/// Embedding tables plus, once trained, the model. `config` records the run
/// that produced it and is carried through verbatim.
struct Checkpoint {
    std::uint32_t format_version = kCheckpointVersion;
    nlohmann::json config = nlohmann::json::object();
    Embeddings embeddings;
    std::optional<ModelParams> model;
};

bool operator==(const Checkpoint& a, const Checkpoint& b);

// Layout: magic, u64 header length, JSON header, float32 payloads, CRC-32 of
// everything before it. All integers and floats are little-endian.
std::string serialize_checkpoint(const Checkpoint& cp);
/// `name` labels diagnostics. Throws a CheckpointFormatError subtype on bad input.
Checkpoint parse_checkpoint(std::string_view bytes, const std::string& name = "checkpoint");

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pjfnn
