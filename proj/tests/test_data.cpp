// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "pointy/data.hpp"

using namespace pointy;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("pointy_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("synthetic sphere points are equidistant from the center") {
    const auto ds = gen_synthetic({"sphere"}, 3, 256, 0.0, 42);
    for (const auto& cloud : ds.clouds) {
        const double r0 = std::sqrt(cloud.points[0][0] * cloud.points[0][0] +
                                    cloud.points[0][1] * cloud.points[0][1] +
                                    cloud.points[0][2] * cloud.points[0][2]);
        for (const auto& p : cloud.points) {
            const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
            CHECK(std::abs(r - r0) <= 1e-6);
        }
    }
}

TEST_CASE("synthetic plane stays flat under z-rotation") {
    const auto ds = gen_synthetic({"plane"}, 3, 128, 0.0, 7);
    for (const auto& cloud : ds.clouds) {
        for (const auto& p : cloud.points) CHECK(std::abs(p[2]) <= 1e-6);
    }
}

TEST_CASE("synthetic generation is bit-identical under one seed") {
    const auto a = gen_synthetic({"cube", "torus"}, 5, 64, 0.02, 9);
    const auto b = gen_synthetic({"cube", "torus"}, 5, 64, 0.02, 9);
    REQUIRE(a.size() == b.size());
    for (std::int64_t i = 0; i < a.size(); ++i) {
        CHECK(a.clouds[static_cast<std::size_t>(i)].points == b.clouds[static_cast<std::size_t>(i)].points);
    }
    CHECK(a.labels == b.labels);
}

TEST_CASE("synthetic rejects unknown classes and lists the valid ones") {
    try {
        gen_synthetic({"pyramid"}, 1, 64, 0.0, 1);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("pyramid") != std::string::npos);
        CHECK(msg.find("sphere") != std::string::npos);
        CHECK(msg.find("helix") != std::string::npos);
    }
}

TEST_CASE("every synthetic class generates and stays finite") {
    for (const auto& name : synthetic_class_names()) {
        const auto ds = gen_synthetic({name}, 2, 64, 0.05, 3);
        for (const auto& cloud : ds.clouds) CHECK_NOTHROW(cloud.validate());
    }
}

TEST_CASE("split is stratified 85/15 exactly at 100 per class") {
    const auto ds = gen_synthetic({"sphere", "cube", "cylinder", "plane"}, 100, 32, 0.0, 5);
    const auto sp = split(ds, 0.85, 11);
    CHECK(sp.train.size() == 4 * 85);
    CHECK(sp.test.size() == 4 * 15);
    std::map<std::int64_t, std::int64_t> train_counts, test_counts;
    for (const auto l : sp.train.labels) train_counts[l]++;
    for (const auto l : sp.test.labels) test_counts[l]++;
    for (std::int64_t c = 0; c < 4; ++c) {
        CHECK(train_counts[c] == 85);
        CHECK(test_counts[c] == 15);
    }
}

TEST_CASE("split union reproduces the dataset as a multiset") {
    const auto ds = gen_synthetic({"sphere", "cone"}, 13, 16, 0.01, 21);
    const auto sp = split(ds, 0.85, 3);
    CHECK(sp.train.size() + sp.test.size() == ds.size());
    auto key = [](const PointCloud& c) { return c.points; };
    std::vector<std::vector<Vec3>> in_points, out_points;
    for (const auto& c : ds.clouds) in_points.push_back(key(c));
    for (const auto& c : sp.train.clouds) out_points.push_back(key(c));
    for (const auto& c : sp.test.clouds) out_points.push_back(key(c));
    std::sort(in_points.begin(), in_points.end());
    std::sort(out_points.begin(), out_points.end());
    CHECK(in_points == out_points);
}

TEST_CASE("split with fraction 1 leaves the test side empty") {
    const auto ds = gen_synthetic({"sphere"}, 10, 16, 0.0, 2);
    const auto sp = split(ds, 1.0, 1);
    CHECK(sp.train.size() == 10);
    CHECK(sp.test.size() == 0);
}

TEST_CASE("pcf round trip is bit-identical both ways") {
    TempDir dir;
    const auto ds = gen_synthetic({"torus"}, 1, 128, 0.02, 33);
    const auto& cloud = ds.clouds[0];
    const auto path = dir.file("cloud.pcf");
    save_pcf(cloud, path);
    const auto loaded = load_pcf(path);
    CHECK(loaded.points == cloud.points);

    // file -> cloud -> file byte identity
    const auto bytes1 = read_bytes(path);
    const auto path2 = dir.file("cloud2.pcf");
    save_pcf(loaded, path2);
    CHECK(read_bytes(path2) == bytes1);
}

TEST_CASE("pcf round trips extras and their kind") {
    TempDir dir;
    PointCloud c;
    c.points = {{0.5, -1, 2}, {1, 1, 1}};
    c.extras = {{0, 0, 1}, {0, 1, 0}};
    c.extras_kind = ExtrasKind::Colors;
    const auto path = dir.file("colors.pcf");
    save_pcf(c, path);
    const auto loaded = load_pcf(path);
    CHECK(loaded.extras_kind == ExtrasKind::Colors);
    CHECK(loaded.extras == c.extras);
}

TEST_CASE("pcf rejects corruption with diagnostics") {
    TempDir dir;
    const auto ds = gen_synthetic({"cube"}, 1, 10, 0.0, 3);
    const auto path = dir.file("cloud.pcf");
    save_pcf(ds.clouds[0], path);
    const auto good = read_bytes(path);

    // declared 10 points, payload truncated to 9
    write_bytes(dir.file("short.pcf"), good.substr(0, good.size() - 16));
    CHECK_THROWS_AS(load_pcf(dir.file("short.pcf")), FormatError);

    std::string bad_magic = good;
    bad_magic[0] = 'X';
    write_bytes(dir.file("magic.pcf"), bad_magic);
    try {
        load_pcf(dir.file("magic.pcf"));
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("magic") != std::string::npos);
    }

    std::string flipped = good;
    flipped[20] = static_cast<char>(flipped[20] ^ 0x40);
    write_bytes(dir.file("crc.pcf"), flipped);
    try {
        load_pcf(dir.file("crc.pcf"));
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("CRC") != std::string::npos);
    }
}

TEST_CASE("ascii xyz import with comments") {
    TempDir dir;
    const auto path = dir.file("two.xyz");
    std::ofstream(path) << "# header comment\n1 2 3\n4 5 6  # trailing\n\n";
    const auto cloud = load_xyz(path);
    REQUIRE(cloud.size() == 2);
    CHECK(cloud.points[0] == Vec3{1, 2, 3});
    CHECK(cloud.points[1] == Vec3{4, 5, 6});

    std::ofstream(dir.file("bad.xyz")) << "1 2\n";
    CHECK_THROWS_AS(load_xyz(dir.file("bad.xyz")), FormatError);
}

TEST_CASE("manifest loads, resamples, and maps classes by sorted name") {
    TempDir dir;
    const auto ds = gen_synthetic({"sphere", "cube"}, 1, 10000, 0.0, 17);
    save_pcf(ds.clouds[0], dir.file("a_sphere.pcf"));
    save_pcf(ds.clouds[1], dir.file("b_cube.pcf"));
    write_manifest({{"a_sphere.pcf", "sphere"}, {"b_cube.pcf", "cube"}}, dir.file("manifest.csv"));

    const auto loaded = load_manifest(dir.file("manifest.csv"), 2048, 1);
    CHECK(loaded.size() == 2);
    CHECK(loaded.class_names == std::vector<std::string>{"cube", "sphere"});
    CHECK(loaded.labels == std::vector<std::int64_t>{1, 0});
    for (const auto& c : loaded.clouds) CHECK(c.size() == 2048);

    // shuffled rows keep the same mapping
    write_manifest({{"b_cube.pcf", "cube"}, {"a_sphere.pcf", "sphere"}}, dir.file("shuffled.csv"));
    const auto reloaded = load_manifest(dir.file("shuffled.csv"), 2048, 1);
    CHECK(reloaded.class_names == loaded.class_names);
    CHECK(reloaded.labels == std::vector<std::int64_t>{0, 1});
}

TEST_CASE("manifest errors: missing file, duplicates, empty") {
    TempDir dir;
    write_manifest({{"nope.pcf", "sphere"}}, dir.file("missing.csv"));
    CHECK_THROWS_AS(load_manifest(dir.file("missing.csv"), 64, 1), FormatError);

    std::ofstream(dir.file("dup.csv")) << "path,class\na.pcf,x\na.pcf,y\n";
    CHECK_THROWS_AS(read_manifest(dir.file("dup.csv")), FormatError);

    std::ofstream(dir.file("empty.csv")) << "path,class\n";
    CHECK_THROWS_AS(read_manifest(dir.file("empty.csv")), FormatError);
}

TEST_CASE("stratified split keeps class proportions within one sample") {
    const auto ds = gen_synthetic({"sphere", "cube", "cone"}, 37, 16, 0.0, 23);
    const auto sp = split(ds, 0.85, 5);
    for (std::int64_t c = 0; c < 3; ++c) {
        std::int64_t train_n = 0;
        for (const auto l : sp.train.labels) train_n += (l == c);
        CHECK(std::abs(static_cast<double>(train_n) - 0.85 * 37.0) <= 1.0);
    }
}

TEST_CASE("a single-sample class lands in the training split") {
    auto ds = gen_synthetic({"sphere", "cube"}, 4, 16, 0.0, 13);
    // shrink cube to one sample
    Dataset pruned;
    pruned.class_names = ds.class_names;
    pruned.source = ds.source;
    bool kept_cube = false;
    for (std::int64_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[static_cast<std::size_t>(i)] == 1) {
            if (kept_cube) continue;
            kept_cube = true;
        }
        pruned.clouds.push_back(ds.clouds[static_cast<std::size_t>(i)]);
        pruned.labels.push_back(ds.labels[static_cast<std::size_t>(i)]);
    }
    const auto sp = split(pruned, 0.85, 7);
    std::int64_t cube_in_train = 0;
    for (const auto l : sp.train.labels) cube_in_train += (l == 1);
    CHECK(cube_in_train == 1);
    for (const auto l : sp.test.labels) CHECK(l != 1);
}

TEST_CASE("default benchmark is separable for the covariance oracle") {
    const auto ds = gen_synthetic({"sphere", "cube", "cylinder", "plane"}, 200, 512, 0.02, 1);
    const auto sp = split(ds, 0.85, 1);
    const double oa = nearest_centroid_baseline_oa(sp.train, sp.test);
    MESSAGE("nearest-centroid baseline OA: " << oa << "%");
    CHECK(oa >= 80.0);
}
