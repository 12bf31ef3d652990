#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "micacl/databag.hpp"
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

TEST_CASE("exponential class count profile") {
    DatasetSpec spec;
    spec.classes = 7;
    spec.head_count = 64;
    spec.imbalance_ratio = 16.0;
    CHECK(spec.class_count_profile() == std::vector<int>{64, 40, 25, 16, 10, 6, 4});

    SUBCASE("counts are non-increasing and hit the configured ratio") {
        Rng rng(1);
        for (int trial = 0; trial < 30; ++trial) {
            DatasetSpec s;
            s.classes = 2 + static_cast<int>(rng.index(8));
            s.head_count = 16 + static_cast<int>(rng.index(100));
            s.imbalance_ratio = 1.0 + rng.uniform_in(0.0, 20.0);
            const auto counts = s.class_count_profile();
            for (std::size_t i = 1; i < counts.size(); ++i) CHECK(counts[i] <= counts[i - 1]);
            CHECK(counts.front() == s.head_count);
            const double tail = s.head_count / s.imbalance_ratio;
            CHECK(std::abs(counts.back() - tail) <= 0.5 + 1e-9);
        }
    }

    SUBCASE("zero-rounding tails are rejected") {
        DatasetSpec bad;
        bad.classes = 4;
        bad.head_count = 3;
        bad.imbalance_ratio = 50.0;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }
}

TEST_CASE("generation") {
    SUBCASE("zero noise with all key slots plants pure prototypes") {
        DatasetSpec spec;
        spec.classes = 3;
        spec.instances = 4;
        spec.feat_dim = 5;
        spec.head_count = 4;
        spec.imbalance_ratio = 2.0;
        spec.key_instances = 4;
        spec.noise_sigma = 0.0;
        spec.seed = 9;
        const Dataset ds = gen_dataset(spec);
        for (const auto& bag : ds.bags) {
            for (int t = 1; t < spec.instances; ++t)
                for (int j = 0; j < spec.feat_dim; ++j)
                    CHECK(bag.instances[static_cast<std::size_t>(t * spec.feat_dim + j)] ==
                          bag.instances[static_cast<std::size_t>(j)]);
            double norm = 0.0;
            for (int j = 0; j < spec.feat_dim; ++j)
                norm += bag.instances[static_cast<std::size_t>(j)] *
                        bag.instances[static_cast<std::size_t>(j)];
            CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }

    SUBCASE("same seed reproduces the dataset bit for bit") {
        DatasetSpec spec;
        spec.seed = 1234;
        const Dataset a = gen_dataset(spec);
        const Dataset b = gen_dataset(spec);
        REQUIRE(a.size() == b.size());
        for (int i = 0; i < a.size(); ++i) {
            CHECK(a.bags[static_cast<std::size_t>(i)].label == b.bags[static_cast<std::size_t>(i)].label);
            CHECK(a.bags[static_cast<std::size_t>(i)].instances == b.bags[static_cast<std::size_t>(i)].instances);
        }
        const Dataset c = gen_dataset(DatasetSpec{.seed = 1235});
        bool any_diff = false;
        for (int i = 0; i < a.size() && !any_diff; ++i)
            any_diff = a.bags[static_cast<std::size_t>(i)].instances !=
                       c.bags[static_cast<std::size_t>(i)].instances;
        CHECK(any_diff);
    }

    SUBCASE("histogram matches the configured counts") {
        DatasetSpec spec;
        spec.seed = 77;
        const Dataset ds = gen_dataset(spec);
        CHECK(class_counts(ds) == spec.class_count_profile());
        int total = 0;
        for (int c : class_counts(ds)) total += c;
        CHECK(total == ds.size());
    }
}

TEST_CASE("class_counts basics") {
    Dataset ds;
    ds.classes = 2;
    ds.instances = 1;
    ds.feat_dim = 1;
    ds.bags = {{{0.0}, 0}, {{0.0}, 0}, {{0.0}, 1}};
    CHECK(class_counts(ds) == std::vector<int>{2, 1});
    Dataset empty;
    empty.classes = 2;
    CHECK_THROWS_AS(class_counts(empty), ConfigError);
}

TEST_CASE("mibg round trip and layout") {
    DatasetSpec spec;
    spec.classes = 2;
    spec.instances = 4;
    spec.feat_dim = 3;
    spec.head_count = 1;
    spec.imbalance_ratio = 1.0;
    spec.key_instances = 2;
    spec.noise_sigma = 0.3;
    spec.seed = 5;
    const Dataset ds = gen_dataset(spec);
    REQUIRE(ds.size() == 2);

    const std::string path = temp_path("micacl_test_roundtrip.mibg");
    write_dataset(ds, path);

    SUBCASE("total size is header plus per-bag payload") {
        CHECK(std::filesystem::file_size(path) == 24 + 2 * (4 + 4 * 3 * 4));
    }

    SUBCASE("read returns the float32-rounded values") {
        const Dataset back = read_dataset(path);
        CHECK(back.classes == ds.classes);
        CHECK(back.instances == ds.instances);
        CHECK(back.feat_dim == ds.feat_dim);
        REQUIRE(back.size() == ds.size());
        for (int i = 0; i < ds.size(); ++i) {
            CHECK(back.bags[static_cast<std::size_t>(i)].label == ds.bags[static_cast<std::size_t>(i)].label);
            for (std::size_t j = 0; j < ds.bags[static_cast<std::size_t>(i)].instances.size(); ++j)
                CHECK(back.bags[static_cast<std::size_t>(i)].instances[j] ==
                      static_cast<double>(
                          static_cast<float>(ds.bags[static_cast<std::size_t>(i)].instances[j])));
        }
    }

    SUBCASE("write is byte-stable") {
        const std::string again = temp_path("micacl_test_roundtrip2.mibg");
        write_dataset(ds, again);
        CHECK(slurp(path) == slurp(again));
        // a second read/write cycle is the identity on bytes
        const std::string cycled = temp_path("micacl_test_roundtrip3.mibg");
        write_dataset(read_dataset(path), cycled);
        CHECK(slurp(path) == slurp(cycled));
        std::remove(again.c_str());
        std::remove(cycled.c_str());
    }

    std::remove(path.c_str());
}

TEST_CASE("mibg corruption diagnostics") {
    const std::string path = temp_path("micacl_test_corrupt.mibg");

    SUBCASE("empty file fails at offset 0") {
        spit(path, "");
        try {
            read_dataset(path);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.offset() == 0);
        }
    }

    SUBCASE("bad magic fails at offset 0") {
        spit(path, std::string("XIBG") + std::string(20, '\0'));
        try {
            read_dataset(path);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.offset() == 0);
        }
    }

    SUBCASE("bad version fails at offset 4") {
        std::string bytes = "MIBG";
        bytes += '\x02';
        bytes += std::string(19, '\0');
        spit(path, bytes);
        try {
            read_dataset(path);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.offset() == 4);
        }
    }

    SUBCASE("truncated payload reports the failing offset") {
        DatasetSpec spec;
        spec.classes = 2;
        spec.instances = 2;
        spec.feat_dim = 2;
        spec.head_count = 1;
        spec.imbalance_ratio = 1.0;
        spec.key_instances = 1;
        spec.seed = 3;
        const Dataset ds = gen_dataset(spec);
        write_dataset(ds, path);
        std::string bytes = slurp(path);
        bytes.resize(30);
        spit(path, bytes);
        try {
            read_dataset(path);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.offset() == 28);  // the float straddling the cut
        }
    }

    SUBCASE("out-of-range label names its offset") {
        std::string bytes = "MIBG";
        auto u32 = [&](std::uint32_t v) {
            for (int i = 0; i < 4; ++i) bytes += static_cast<char>((v >> (8 * i)) & 0xFF);
        };
        u32(1);  // version
        u32(1);  // bags
        u32(2);  // classes
        u32(1);  // instances
        u32(1);  // feat
        u32(7);  // label out of range
        u32(0);  // feature
        spit(path, bytes);
        try {
            read_dataset(path);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.offset() == 24);
        }
    }

    std::remove(path.c_str());
}

TEST_CASE("batching") {
    const auto b1 = make_batches(10, 4, 42);
    REQUIRE(b1.size() == 3);
    CHECK(b1[0].size() == 4);
    CHECK(b1[1].size() == 4);
    CHECK(b1[2].size() == 2);

    const auto b2 = make_batches(9, 4, 42);
    REQUIRE(b2.size() == 2);  // trailing singleton dropped

    CHECK(make_batches(10, 4, 7) == make_batches(10, 4, 7));
    CHECK(make_batches(10, 4, 7) != make_batches(10, 4, 8));
    CHECK_THROWS_AS(make_batches(10, 1, 7), ConfigError);

    // every index appears at most once and all retained indices are valid
    std::vector<bool> seen(10, false);
    for (const auto& batch : b1)
        for (int idx : batch) {
            CHECK(idx >= 0);
            CHECK(idx < 10);
            CHECK_FALSE(seen[static_cast<std::size_t>(idx)]);
            seen[static_cast<std::size_t>(idx)] = true;
        }
}
