#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "micacl/checkpoint.hpp"
#include "micacl/config.hpp"
#include "micacl/errors.hpp"

using namespace micacl;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    REQUIRE(f);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("config parsing") {
    const RunConfig def = parse_config_text("");
    CHECK(def.model.C_in == 12);
    CHECK(def.model.K == 7);
    CHECK(def.model.effective_scales() == std::vector<int>{1, 8, 16});
    CHECK(def.optim.lr_max == doctest::Approx(4e-4));
    CHECK(def.optim.weight_decay == doctest::Approx(0.05));

    const RunConfig cfg = parse_config_text(
        "# comment\n"
        "C_in = 6\n"
        "C_h=8\n"
        "n_heads=2\n"
        "scales=1,4,8\n"
        "tau0=0.07\n"
        "log_form=true\n"
        "lr_max=1e-3\n"
        "batch_size=4\n");
    CHECK(cfg.model.C_in == 6);
    CHECK(cfg.model.C_h == 8);
    CHECK(cfg.model.scales == std::vector<int>{1, 4, 8});
    CHECK(cfg.model.log_form);
    CHECK(cfg.optim.lr_max == doctest::Approx(1e-3));

    CHECK_THROWS_WITH_AS(parse_config_text("unknown_key=3\n"), doctest::Contains("unknown key"),
                         ConfigError);
    CHECK_THROWS_AS(parse_config_text("C_in=abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("log_form=maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("C_in\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("C_h=10\nn_heads=4\n"), ConfigError);   // divisibility
    CHECK_THROWS_AS(parse_config_text("scales=1,32\n"), ConfigError);         // beyond C_h
    CHECK_THROWS_AS(parse_config_text("batch_size=1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("tau0=0\n"), ConfigError);
}

TEST_CASE("config text round trip") {
    RunConfig cfg = parse_config_text("C_h=8\nn_heads=2\nscales=1,2,8\ntau0=0.25\nepochs=3\n");
    const RunConfig back = parse_config_text(config_to_text(cfg));
    CHECK(back.model.C_h == cfg.model.C_h);
    CHECK(back.model.scales == cfg.model.effective_scales());
    CHECK(back.model.tau0 == cfg.model.tau0);
    CHECK(back.model.epochs == 3);
    CHECK(back.optim.lr_max == cfg.optim.lr_max);
}

TEST_CASE("checkpoint round trip") {
    ModelConfig cfg;
    cfg.C_in = 5;
    cfg.C = 6;
    cfg.d = 3;
    cfg.C_h = 8;
    cfg.E = 4;
    cfg.n_heads = 2;
    cfg.K = 3;
    cfg.T = 4;
    cfg.encoder_hidden = 6;
    cfg.scales = {1, 4, 8};
    Rng rng(21);
    const ModelParams params = ModelParams::init(cfg, rng);

    const std::string path = temp_path("micacl_test_ckpt.mick");
    write_checkpoint(path, cfg, params);
    const Checkpoint back = read_checkpoint(path);

    CHECK(back.config.C_in == cfg.C_in);
    CHECK(back.config.C_h == cfg.C_h);
    CHECK(back.config.K == cfg.K);
    CHECK(back.config.scales == cfg.scales);

    const auto orig = params.named_parameters();
    const auto loaded = back.params.named_parameters();
    REQUIRE(orig.size() == loaded.size());
    for (std::size_t i = 0; i < orig.size(); ++i) {
        CHECK(orig[i].first == loaded[i].first);
        const auto& ov = orig[i].second.values();
        const auto& lv = loaded[i].second.values();
        REQUIRE(ov.size() == lv.size());
        for (std::size_t j = 0; j < ov.size(); ++j)
            CHECK(lv[j] == static_cast<double>(static_cast<float>(ov[j])));
    }

    SUBCASE("a read/write cycle is the identity on bytes") {
        const std::string again = temp_path("micacl_test_ckpt2.mick");
        write_checkpoint(again, back.config, back.params);
        CHECK(slurp(path) == slurp(again));
        std::remove(again.c_str());
    }

    std::remove(path.c_str());
}

TEST_CASE("checkpoint corruption diagnostics") {
    const std::string path = temp_path("micacl_test_ckpt_bad.mick");

    SUBCASE("bad magic at offset 0") {
        spit(path, "XICK\x01\x00\x00\x00\x00\x00\x00\x00");
        try {
            read_checkpoint(path);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.offset() == 0);
        }
    }

    SUBCASE("unsupported version at offset 4") {
        std::string bytes = "MICK";
        bytes += '\x09';
        bytes += std::string(7, '\0');
        spit(path, bytes);
        try {
            read_checkpoint(path);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.offset() == 4);
        }
    }

    SUBCASE("truncation inside the body") {
        ModelConfig cfg;
        cfg.C_in = 5;
        cfg.C = 6;
        cfg.d = 3;
        cfg.C_h = 8;
        cfg.E = 4;
        cfg.n_heads = 2;
        cfg.K = 3;
        cfg.T = 4;
        cfg.encoder_hidden = 6;
        Rng rng(22);
        write_checkpoint(path, cfg, ModelParams::init(cfg, rng));
        std::string bytes = slurp(path);
        bytes.resize(bytes.size() / 2);
        spit(path, bytes);
        CHECK_THROWS_AS(read_checkpoint(path), FormatError);
    }

    std::remove(path.c_str());
}
