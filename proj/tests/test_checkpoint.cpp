#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "pjfnn/checkpoint.hpp"
#include "pjfnn/error.hpp"

using namespace pjfnn;
using namespace testing_support;

namespace {

// Bitwise reflected CRC-32 (polynomial 0xEDB88320).
std::uint32_t reference_crc(std::string_view bytes) {
    std::uint32_t crc = 0xFFFFFFFFu;
    for (unsigned char b : bytes) {
        crc ^= b;
        for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
    }
    return ~crc;
}

std::string reseal(std::string bytes) {
    bytes.resize(bytes.size() - 4);
    const std::uint32_t crc = reference_crc(bytes);
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((crc >> (8 * i)) & 0xFF));
    return bytes;
}

Checkpoint sample_checkpoint(bool with_model) {
    Checkpoint cp;
    Vocabulary jv = Vocabulary::build(Corpus{{"python", "sql", "python"}, {"java"}}, 1);
    Vocabulary rv = Vocabulary::build(Corpus{{"built", "services"}}, 1);
    Rng rng(4);
    cp.embeddings.job = SideEmbedding{jv, EmbeddingTable{Side::job, random_tensor(Shape{jv.size(), 12}, rng)}};
    cp.embeddings.resume = SideEmbedding{rv, EmbeddingTable{Side::resume, random_tensor(Shape{rv.size(), 8}, rng)}};
    cp.config = {{"seed", 3}, {"note", "sample"}};
    if (with_model) {
        ModelParams p = init_model(tiny_config(), 5);
        p.job.bn1.running_mean[2] = 0.75f;
        p.resume.bn2.running_var[1] = 2.5f;
        cp.model = p;
    }
    return cp;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("serialized checkpoints carry the magic and a valid trailing CRC") {
    const std::string bytes = serialize_checkpoint(sample_checkpoint(true));
    CHECK(bytes.substr(0, 8) == "PJFNNCKP");
    const std::uint32_t stored = static_cast<unsigned char>(bytes[bytes.size() - 4]) |
                                 static_cast<unsigned char>(bytes[bytes.size() - 3]) << 8 |
                                 static_cast<unsigned char>(bytes[bytes.size() - 2]) << 16 |
                                 static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[bytes.size() - 1])) << 24;
    CHECK(stored == reference_crc(std::string_view(bytes).substr(0, bytes.size() - 4)));
}

TEST_CASE("round trip restores every parameter, running statistic and vocabulary") {
    for (bool with_model : {false, true}) {
        const Checkpoint cp = sample_checkpoint(with_model);
        const Checkpoint back = parse_checkpoint(serialize_checkpoint(cp));
        CHECK(back == cp);
        CHECK(back.config == cp.config);
        CHECK(back.model.has_value() == with_model);
        CHECK(back.embeddings.job.vocab.id("sql") == cp.embeddings.job.vocab.id("sql"));
        if (with_model) {
            CHECK(back.model->job.bn1.running_mean[2] == 0.75f);
            CHECK(back.model->resume.bn2.running_var[1] == 2.5f);
            CHECK(back.model->config.latent == 6);
        }
    }
}

TEST_CASE("saving a loaded checkpoint reproduces the file byte for byte") {
    TempDir dir("ckp");
    const Checkpoint cp = sample_checkpoint(true);
    save_checkpoint(cp, dir / "a.ckpt");
    save_checkpoint(load_checkpoint(dir / "a.ckpt"), dir / "b.ckpt");
    CHECK(read_file(dir / "a.ckpt") == read_file(dir / "b.ckpt"));
    CHECK(read_file(dir / "a.ckpt") == serialize_checkpoint(cp));
}

TEST_CASE("the restored model scores exactly like the original") {
    const Checkpoint cp = sample_checkpoint(true);
    const Checkpoint back = parse_checkpoint(serialize_checkpoint(cp));
    Rng rng(8);
    const Document job = random_document("j", Side::job, 12, 3, 2, 20, rng);
    const Document resume = random_document("r", Side::resume, 8, 2, 2, 20, rng);
    CHECK(score(job, resume, *cp.model) == score(job, resume, *back.model));
}

TEST_CASE("corrupt inputs raise distinct errors") {
    const std::string good = serialize_checkpoint(sample_checkpoint(true));

    SUBCASE("bad magic") {
        std::string bad = good;
        bad[0] = 'X';
        CHECK_THROWS_AS(parse_checkpoint(bad), CheckpointFormatError);
        CHECK_THROWS_AS(parse_checkpoint("{\"a\": 1}"), CheckpointFormatError);
    }
    SUBCASE("truncation") {
        for (std::size_t keep : {std::size_t{0}, std::size_t{5}, std::size_t{8}, std::size_t{12}, good.size() / 2,
                                 good.size() - 1}) {
            INFO("keep " << keep);
            CHECK_THROWS_AS(parse_checkpoint(good.substr(0, keep)), CheckpointTruncatedError);
        }
    }
    SUBCASE("checksum") {
        std::string bad = good;
        bad[bad.size() - 10] ^= 0x01;
        CHECK_THROWS_AS(parse_checkpoint(bad), CheckpointChecksumError);
        std::string bad_crc = good;
        bad_crc.back() ^= 0x40;
        CHECK_THROWS_AS(parse_checkpoint(bad_crc), CheckpointChecksumError);
    }
    SUBCASE("version") {
        std::string bumped = good;
        const auto at = bumped.find("\"format_version\":1");
        REQUIRE(at != std::string::npos);
        bumped[at + std::string("\"format_version\":").size()] = '2';
        try {
            parse_checkpoint(reseal(bumped));
            FAIL("expected a version error");
        } catch (const CheckpointVersionError& e) {
            CHECK(std::string(e.what()).find("version 2") != std::string::npos);
        }
    }
    SUBCASE("trailing bytes") {
        CHECK_THROWS_AS(parse_checkpoint(good + "extra"), CheckpointFormatError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/model.ckpt"), IoError);
    }
}

TEST_CASE("the error kinds are distinguishable") {
    // Version, truncation and checksum errors are format errors, but not each other.
    const std::string good = serialize_checkpoint(sample_checkpoint(false));
    auto kind = [](const std::string& bytes) -> std::string {
        try {
            parse_checkpoint(bytes);
            return "ok";
        } catch (const CheckpointVersionError&) {
            return "version";
        } catch (const CheckpointTruncatedError&) {
            return "truncated";
        } catch (const CheckpointChecksumError&) {
            return "checksum";
        } catch (const CheckpointFormatError&) {
            return "format";
        }
    };
    std::string flipped = good;
    flipped[good.size() / 2] ^= 0x10;
    CHECK(kind(good) == "ok");
    CHECK(kind("NOTACKPT" + good.substr(8)) == "format");
    CHECK(kind(good.substr(0, good.size() - 3)) == "truncated");
    CHECK(kind(flipped) == "checksum");
}

TEST_CASE("random byte flips never parse silently into a different checkpoint") {
    const Checkpoint cp = sample_checkpoint(true);
    const std::string good = serialize_checkpoint(cp);
    Rng rng(21);
    for (int trial = 0; trial < 300; ++trial) {
        std::string bad = good;
        const std::size_t at = rng.below(bad.size());
        bad[at] = static_cast<char>(bad[at] ^ static_cast<char>(1 + rng.below(255)));
        CHECK_THROWS_AS(parse_checkpoint(bad), CheckpointFormatError);
    }
}
