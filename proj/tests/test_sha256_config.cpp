#include "capire/config.hpp"
#include "capire/sha256.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

using namespace capire;

TEST_CASE("sha256 FIPS vectors") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    // exercise multi-block padding
    CHECK(sha256_hex(std::string(64, 'a')) ==
          "ffe054fe7ae0cb6dc65c3af9b61d5209f439851db43d0ba5997337df154668eb");
}

TEST_CASE("config hash determinism and sensitivity") {
    const char* text = R"({
        "seed": 7,
        "vot": {"cutoff": 3, "horizon": 12, "grace": 2},
        "embedding": {"n_neighbors": 15}
    })";
    const PipelineConfig a = PipelineConfig::from_json(nlohmann::json::parse(text));
    const PipelineConfig b = PipelineConfig::from_json(nlohmann::json::parse(text));
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 64);

    PipelineConfig c = a;
    c.vot.cutoff = 4;
    CHECK(c.hash() != a.hash());
}

TEST_CASE("key-order permutation leaves the digest unchanged") {
    const auto a = PipelineConfig::from_json(nlohmann::json::parse(
        R"({"seed": 9, "out_dir": "x", "vot": {"cutoff": 3, "horizon": 10, "grace": 1}})"));
    const auto b = PipelineConfig::from_json(nlohmann::json::parse(
        R"({"vot": {"grace": 1, "horizon": 10, "cutoff": 3}, "out_dir": "x", "seed": 9})"));
    CHECK(a.hash() == b.hash());
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(PipelineConfig::from_json(nlohmann::json::parse(
                        R"({"vot": {"cutoff": 5, "horizon": 4}})")),
                    ConfigError);
    CHECK_THROWS_AS(PipelineConfig::from_json(nlohmann::json::parse(
                        R"({"vot": {"unit": "credits", "cutoff": 3, "horizon": 9}})")),
                    ConfigError);
    CHECK_THROWS_AS(PipelineConfig::from_json(nlohmann::json::parse(
                        R"({"classifier": {"split_mode": "nonsense"}})")),
                    ConfigError);
    CHECK_THROWS_AS(PipelineConfig::load("/nonexistent/config.json"), ConfigError);
}
