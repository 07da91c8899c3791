#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>

#include <gtest/gtest.h>

#include "saeprobe/activation_store.hpp"
#include "saeprobe/binary_io.hpp"
#include "saeprobe/error.hpp"
#include "test_support.hpp"

using namespace saeprobe;
using saeprobe::testing::TempDir;

namespace {

DatasetMeta meta(const std::string& name = "squad") { return {name, "gemma-2-9b", 20, "resid_post", "last"}; }

ActivationDataset small_dataset() {
    Matrix m(2, 3, {1.0f, -2.5f, 3.25f, 0.0f, 1e-7f, -1e30f});
    return ActivationDataset(m, {1, 0}, meta());
}

std::vector<char> bytes_of(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::filesystem::path& p, const std::vector<char>& b) {
    std::ofstream out(p, std::ios::binary);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

template <typename T>
void append_le(std::vector<char>& out, T value) {
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    for (unsigned char c : raw) out.push_back(static_cast<char>(c));  // host is little endian
}

ErrorKind kind_of_load(const std::filesystem::path& p) {
    try {
        load_dataset(p);
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "load succeeded";
    return ErrorKind::Storage;
}

}  // namespace

TEST(ActivationDataset, RejectsInvalidConstruction) {
    EXPECT_THROW(ActivationDataset(Matrix(2, 3), {0}, meta()), Error);
    EXPECT_THROW(ActivationDataset(Matrix(2, 0), {0, 1}, meta()), Error);
    EXPECT_THROW(ActivationDataset(Matrix(2, 3), {0, 2}, meta()), Error);
}

TEST(ActivationStore, FileLayoutMatchesFormat) {
    TempDir dir("store");
    const auto path = dir / "a.act";
    write_dataset(small_dataset(), path);

    std::vector<char> expected = {'S', 'A', 'P', 'R', 1};
    append_le<std::uint32_t>(expected, 2);
    append_le<std::uint32_t>(expected, 3);
    for (float v : {1.0f, -2.5f, 3.25f, 0.0f, 1e-7f, -1e30f}) append_le<float>(expected, v);
    expected.push_back(1);
    expected.push_back(0);
    EXPECT_EQ(bytes_of(path), expected);
    EXPECT_TRUE(std::filesystem::exists(dir / "a.act.meta.json"));
}

TEST(ActivationStore, RoundTripIsBitwiseIdentity) {
    TempDir dir("store");
    const auto ds = small_dataset();
    write_dataset(ds, dir / "a.act");
    const auto back = load_dataset(dir / "a.act");
    EXPECT_EQ(back, ds);
    EXPECT_EQ(std::memcmp(back.data().values().data(), ds.data().values().data(), 6 * sizeof(float)), 0);
}

TEST(ActivationStore, RandomRoundTrips) {
    TempDir dir("store");
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        const std::size_t n = rng.below(30), d = 1 + rng.below(10);
        std::vector<std::uint8_t> labels(n);
        for (auto& l : labels) l = static_cast<std::uint8_t>(rng.below(2));
        ActivationDataset ds(saeprobe::testing::random_matrix(n, d, rng, 100.0), labels, meta("r"));
        write_dataset(ds, dir / "r.act");
        EXPECT_EQ(load_dataset(dir / "r.act"), ds);
    }
}

TEST(ActivationStore, EmptyDatasetRoundTrips) {
    TempDir dir("store");
    ActivationDataset ds(Matrix(0, 4), {}, meta());
    write_dataset(ds, dir / "e.act");
    const auto back = load_dataset(dir / "e.act");
    EXPECT_EQ(back.size(), 0u);
    EXPECT_EQ(back.d_model(), 4u);
}

TEST(ActivationStore, NonFiniteValuesAreRejectedOnWrite) {
    TempDir dir("store");
    for (float bad : {std::numeric_limits<float>::quiet_NaN(), std::numeric_limits<float>::infinity()}) {
        Matrix m(1, 2, {0.0f, bad});
        ActivationDataset ds(m, {1}, meta());
        try {
            write_dataset(ds, dir / "nan.act");
            FAIL() << "write accepted a non-finite value";
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::Validation);
        }
        EXPECT_FALSE(std::filesystem::exists(dir / "nan.act"));
    }
}

TEST(ActivationStore, NonFiniteValuesAreRejectedOnLoad) {
    TempDir dir("store");
    write_dataset(small_dataset(), dir / "a.act");
    auto b = bytes_of(dir / "a.act");
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(b.data() + 13, &nan, sizeof(float));
    write_bytes(dir / "a.act", b);
    EXPECT_EQ(kind_of_load(dir / "a.act"), ErrorKind::Validation);
}

TEST(ActivationStore, MissingParentDirectoryIsStorageError) {
    TempDir dir("store");
    try {
        write_dataset(small_dataset(), dir / "missing" / "a.act");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Storage);
        EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos);
    }
}

TEST(ActivationStore, LoadErrorsAreClassified) {
    TempDir dir("store");
    write_dataset(small_dataset(), dir / "a.act");
    const auto good = bytes_of(dir / "a.act");

    auto b = good;
    b[0] = 'X';
    write_bytes(dir / "a.act", b);
    EXPECT_EQ(kind_of_load(dir / "a.act"), ErrorKind::Format);

    b = good;
    b[4] = static_cast<char>(255);
    write_bytes(dir / "a.act", b);
    EXPECT_EQ(kind_of_load(dir / "a.act"), ErrorKind::UnsupportedVersion);

    for (std::size_t cut : {std::size_t{3}, std::size_t{7}, good.size() - 1}) {
        b.assign(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut));
        write_bytes(dir / "a.act", b);
        EXPECT_EQ(kind_of_load(dir / "a.act"), cut < 5 ? ErrorKind::Format : ErrorKind::Corruption) << cut;
    }

    b = good;
    b.push_back(0);
    write_bytes(dir / "a.act", b);
    EXPECT_EQ(kind_of_load(dir / "a.act"), ErrorKind::Corruption);

    b = good;
    b.back() = 2;
    write_bytes(dir / "a.act", b);
    EXPECT_EQ(kind_of_load(dir / "a.act"), ErrorKind::Corruption);

    EXPECT_EQ(kind_of_load(dir / "none.act"), ErrorKind::Storage);
    write_bytes(dir / "a.act", good);
    std::filesystem::remove(dir / "a.act.meta.json");
    EXPECT_EQ(kind_of_load(dir / "a.act"), ErrorKind::Storage);
}

namespace {

std::vector<std::uint8_t> class_labels(std::size_t ones, std::size_t zeros, Rng& rng) {
    std::vector<std::uint8_t> y(ones, 1);
    y.insert(y.end(), zeros, 0);
    rng.shuffle(std::span<std::uint8_t>(y));
    return y;
}

}  // namespace

TEST(BalanceAndSplit, PaperSizes) {
    Rng rng(1);
    const auto y = class_labels(1900, 1900, rng);
    ActivationDataset ds(saeprobe::testing::random_matrix(3800, 2, rng), y, meta());
    const auto split = balance_and_split(ds, {2000, 42, true});
    EXPECT_EQ(split.train.size(), 2000u);
    EXPECT_EQ(split.test.size(), 1800u);
    const auto ones = std::count(split.train.labels().begin(), split.train.labels().end(), 1);
    EXPECT_EQ(ones, 1000);
    EXPECT_EQ(split.train.meta(), ds.meta());
}

TEST(BalanceAndSplit, DeterministicForFixedSeed) {
    Rng rng(2);
    const auto y = class_labels(60, 40, rng);
    const auto a = split_indices(y, {50, 9, true});
    const auto b = split_indices(y, {50, 9, true});
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    const auto c = split_indices(y, {50, 10, true});
    EXPECT_NE(a.train, c.train);
}

TEST(BalanceAndSplit, WholeSetBoundary) {
    const std::vector<std::uint8_t> y = {1, 0, 0, 1};
    const auto s = split_indices(y, {4, 0, true});
    EXPECT_EQ(s.train, (std::vector<std::size_t>{0, 1, 2, 3}));
    EXPECT_TRUE(s.test.empty());
}

TEST(BalanceAndSplit, DisjointCoverForRandomSeeds) {
    Rng rng(3);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const std::size_t ones = 5 + rng.below(30), zeros = 5 + rng.below(30);
        const auto y = class_labels(ones, zeros, rng);
        const std::size_t half = 1 + rng.below(std::min(ones, zeros));
        const bool balanced = seed % 3 != 0;
        const std::size_t count = balanced ? 2 * half : half;
        const auto s = split_indices(y, {count, seed, balanced});
        ASSERT_EQ(s.train.size(), count);
        ASSERT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
        ASSERT_TRUE(std::is_sorted(s.test.begin(), s.test.end()));
        std::set<std::size_t> all(s.train.begin(), s.train.end());
        for (auto i : s.test) ASSERT_TRUE(all.insert(i).second) << "index in both sets";
        ASSERT_EQ(all.size(), y.size());
        ASSERT_LT(*all.rbegin(), y.size());
        if (balanced) {
            std::size_t pos = 0;
            for (auto i : s.train) pos += y[i];
            ASSERT_EQ(2 * pos, count);
        }
    }
}

TEST(BalanceAndSplit, CapacityAndConfigurationErrors) {
    const std::vector<std::uint8_t> y = {1, 1, 1, 0};
    try {
        split_indices(y, {4, 0, true});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Capacity);
    }
    try {
        split_indices(y, {5, 0, false});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Capacity);
    }
    try {
        split_indices(y, {3, 0, true});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Configuration);
    }
}
