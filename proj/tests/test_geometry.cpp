// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "pointy/geometry.hpp"

using namespace pointy;

namespace {

PointCloud random_cloud(std::int64_t n, Rng& rng, double spread = 1.0) {
    PointCloud c;
    c.points.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        c.points.push_back({rng.normal(0.0, spread), rng.normal(0.0, spread), rng.normal(0.0, spread)});
    }
    return c;
}

// step-by-step reference: recomputes argmax min-distance from scratch
std::vector<std::int64_t> fps_reference(const std::vector<Vec3>& pts, std::int64_t p) {
    const auto n = static_cast<std::int64_t>(pts.size());
    const Vec3 c = centroid_of(pts);
    std::int64_t first = 0;
    double best = -1.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double d = dist2(pts[static_cast<std::size_t>(i)], c);
        if (d > best) {
            best = d;
            first = i;
        }
    }
    std::vector<std::int64_t> chosen = {first};
    while (static_cast<std::int64_t>(chosen.size()) < p) {
        std::int64_t arg = 0;
        double arg_d = -1.0;
        for (std::int64_t i = 0; i < n; ++i) {
            double mind = std::numeric_limits<double>::infinity();
            for (const auto s : chosen) {
                mind = std::min(mind, dist2(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(s)]));
            }
            if (mind > arg_d) {
                arg_d = mind;
                arg = i;
            }
        }
        chosen.push_back(arg);
    }
    return chosen;
}

// full-sort reference for k nearest neighbors
std::vector<std::int64_t> knn_reference(const std::vector<Vec3>& pts, std::int64_t anchor, std::int64_t k) {
    std::vector<std::pair<double, std::int64_t>> d;
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(pts.size()); ++i) {
        d.emplace_back(dist2(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(anchor)]), i);
    }
    std::sort(d.begin(), d.end());
    std::vector<std::int64_t> out;
    for (std::int64_t i = 0; i < k; ++i) out.push_back(d[static_cast<std::size_t>(i)].second);
    return out;
}

}  // namespace

TEST_CASE("normalize maps the two-point cloud to the unit segment") {
    PointCloud c;
    c.points = {{0, 0, 0}, {2, 0, 0}};
    const auto n = normalize_unit_range(c);
    CHECK(n.points[0][0] == doctest::Approx(-1.0));
    CHECK(n.points[1][0] == doctest::Approx(1.0));
    CHECK(n.points[0][1] == 0.0);
    CHECK(n.points[1][2] == 0.0);
}

TEST_CASE("normalize is a fixed point on symmetric cube corners") {
    PointCloud c;
    for (const double x : {-1.0, 1.0}) {
        for (const double y : {-1.0, 1.0}) {
            for (const double z : {-1.0, 1.0}) c.points.push_back({x, y, z});
        }
    }
    const auto n = normalize_unit_range(c);
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        for (int d = 0; d < 3; ++d) CHECK(n.points[i][static_cast<std::size_t>(d)] == doctest::Approx(c.points[i][static_cast<std::size_t>(d)]).epsilon(1e-12));
    }
}

TEST_CASE("normalize recenters and saturates one coordinate") {
    Rng rng(1);
    for (int trial = 0; trial < 5; ++trial) {
        auto c = random_cloud(100, rng, 4.0);
        for (auto& p : c.points) p[0] += 10.0;  // off-center
        const auto n = normalize_unit_range(c);
        double max_abs = 0.0;
        Vec3 mean{0, 0, 0};
        for (const auto& p : n.points) {
            for (int d = 0; d < 3; ++d) {
                max_abs = std::max(max_abs, std::abs(p[static_cast<std::size_t>(d)]));
                mean[static_cast<std::size_t>(d)] += p[static_cast<std::size_t>(d)];
            }
        }
        for (auto& v : mean) v /= static_cast<double>(n.points.size());
        CHECK(std::abs(max_abs - 1.0) <= 1e-7);
        for (const auto v : mean) CHECK(std::abs(v) <= 1e-7);
    }
}

TEST_CASE("normalize is idempotent") {
    Rng rng(2);
    auto c = random_cloud(64, rng, 3.0);
    const auto once = normalize_unit_range(c);
    const auto twice = normalize_unit_range(once);
    for (std::size_t i = 0; i < once.points.size(); ++i) {
        for (int d = 0; d < 3; ++d) {
            CHECK(std::abs(once.points[i][static_cast<std::size_t>(d)] - twice.points[i][static_cast<std::size_t>(d)]) <= 1e-6);
        }
    }
}

TEST_CASE("normalize keeps a degenerate repeated point at scale 1") {
    PointCloud c;
    c.points = {{5, 5, 5}, {5, 5, 5}};
    const auto n = normalize_unit_range(c);
    for (const auto& p : n.points) {
        for (const auto v : p) CHECK(v == 0.0);
    }
}

TEST_CASE("rotate_z identity, quarter turn, isometry, composition") {
    PointCloud c;
    c.points = {{1, 0, 0}, {0, 2, 5}, {-3, 1, -2}};
    const auto same = rotate_z(c, 0.0);
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        CHECK(same.points[i] == c.points[i]);
    }

    PointCloud unit;
    unit.points = {{1, 0, 0}};
    const auto quarter = rotate_z(unit, 3.14159265358979323846 / 2.0);
    CHECK(std::abs(quarter.points[0][0] - 0.0) <= 1e-7);
    CHECK(std::abs(quarter.points[0][1] - 1.0) <= 1e-7);
    CHECK(quarter.points[0][2] == 0.0);

    Rng rng(4);
    auto cloud = random_cloud(40, rng);
    const double angle = rng.uniform(0.0, 6.28);
    const auto rotated = rotate_z(cloud, angle);
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        for (std::size_t j = i + 1; j < cloud.points.size(); ++j) {
            const double before = std::sqrt(dist2(cloud.points[i], cloud.points[j]));
            const double after = std::sqrt(dist2(rotated.points[i], rotated.points[j]));
            CHECK(std::abs(before - after) <= 1e-6);
        }
    }

    const double a = rng.uniform(0.0, 3.0), b = rng.uniform(0.0, 3.0);
    const auto composed = rotate_z(rotate_z(cloud, a), b);
    const auto direct = rotate_z(cloud, a + b);
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        for (int d = 0; d < 3; ++d) {
            CHECK(std::abs(composed.points[i][static_cast<std::size_t>(d)] - direct.points[i][static_cast<std::size_t>(d)]) <= 1e-6);
        }
    }
}

TEST_CASE("rotate_z rotates normals and leaves colors alone") {
    PointCloud c;
    c.points = {{1, 0, 0}};
    c.extras = {{0, 1, 0}};
    c.extras_kind = ExtrasKind::Normals;
    const auto r = rotate_z(c, 3.14159265358979323846 / 2.0);
    CHECK(std::abs(r.extras[0][0] + 1.0) <= 1e-7);

    c.extras_kind = ExtrasKind::Colors;
    const auto r2 = rotate_z(c, 3.14159265358979323846 / 2.0);
    CHECK(r2.extras[0] == Vec3{0, 1, 0});
}

TEST_CASE("sample_uniform permutes when n equals N and is seed-deterministic") {
    Rng rng(7);
    auto c = random_cloud(32, rng);
    Rng s1(3);
    const auto all = sample_uniform(c, 32, s1);
    auto sorted_in = c.points;
    auto sorted_out = all.points;
    auto cmp = [](const Vec3& a, const Vec3& b) { return a < b; };
    std::sort(sorted_in.begin(), sorted_in.end(), cmp);
    std::sort(sorted_out.begin(), sorted_out.end(), cmp);
    CHECK(sorted_in == sorted_out);

    auto big = random_cloud(10000, rng);
    Rng s2(5), s3(5);
    const auto a = sample_uniform(big, 2048, s2);
    const auto b = sample_uniform(big, 2048, s3);
    CHECK(a.points == b.points);
}

TEST_CASE("sample_uniform single draws are uniform within a percent") {
    PointCloud c;
    c.points = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    Rng rng(11);
    std::array<std::int64_t, 4> counts{0, 0, 0, 0};
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        const auto s = sample_uniform(c, 1, rng);
        counts[static_cast<std::size_t>(std::lround(s.points[0][0]))]++;
    }
    for (const auto n : counts) {
        CHECK(std::abs(static_cast<double>(n) / draws - 0.25) <= 0.01);
    }
}

TEST_CASE("sample_uniform upsamples with replacement and carries extras") {
    PointCloud c;
    c.points = {{1, 2, 3}, {4, 5, 6}};
    c.extras = {{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}};
    c.extras_kind = ExtrasKind::Normals;
    c.label = 7;
    Rng rng(2);
    const auto up = sample_uniform(c, 9, rng);
    CHECK(up.size() == 9);
    CHECK(up.extras.size() == 9);
    CHECK(up.label == 7);
    for (std::size_t i = 0; i < up.points.size(); ++i) {
        const bool first = up.points[i] == c.points[0];
        CHECK(up.extras[i] == (first ? c.extras[0] : c.extras[1]));
    }
    CHECK_THROWS_AS(sample_uniform(PointCloud{}, 1, rng), DimensionError);
}

TEST_CASE("fps picks the farthest-from-centroid start and exhausts at P=N") {
    std::vector<Vec3> pts = {{0, 0, 0}, {10, 0, 0}, {1, 0, 0}};
    const auto one = fps(pts, 1);
    CHECK(one == std::vector<std::int64_t>{1});

    Rng rng(13);
    auto c = random_cloud(17, rng);
    const auto all = fps(c.points, 17);
    auto sorted = all;
    std::sort(sorted.begin(), sorted.end());
    for (std::int64_t i = 0; i < 17; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);

    CHECK_THROWS_AS(fps(pts, 4), DimensionError);
}

TEST_CASE("fps random-start variant stays greedy after the first pick") {
    Rng rng(37);
    auto c = random_cloud(60, rng);
    Rng s1(1), s2(2);
    FpsOptions opts;
    opts.random_start = true;
    const auto a = fps(c.points, 8, &s1, opts);
    const auto b = fps(c.points, 8, &s2, opts);
    CHECK(a != b);  // different seeds move the start
    // each later anchor still maximizes the min distance to the chosen set
    for (std::size_t step = 1; step < a.size(); ++step) {
        double chosen_min = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < step; ++s) {
            chosen_min = std::min(chosen_min, dist2(c.points[static_cast<std::size_t>(a[step])],
                                                    c.points[static_cast<std::size_t>(a[s])]));
        }
        for (std::int64_t i = 0; i < c.size(); ++i) {
            double mind = std::numeric_limits<double>::infinity();
            for (std::size_t s = 0; s < step; ++s) {
                mind = std::min(mind, dist2(c.points[static_cast<std::size_t>(i)],
                                            c.points[static_cast<std::size_t>(a[s])]));
            }
            CHECK(mind <= chosen_min + 1e-12);
        }
    }
    CHECK_THROWS_AS(fps(c.points, 4, nullptr, opts), ConfigError);
}

TEST_CASE("fps matches the brute-force oracle index-exactly on 100 random clouds") {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = static_cast<std::int64_t>(8 + rng.next_below(505));
        const auto p = static_cast<std::int64_t>(1 + rng.next_below(std::min<std::uint64_t>(64, static_cast<std::uint64_t>(n))));
        auto c = random_cloud(n, rng);
        CHECK(fps(c.points, p) == fps_reference(c.points, p));
    }
}

TEST_CASE("fps is invariant to rigid z-rotation") {
    Rng rng(19);
    for (int trial = 0; trial < 10; ++trial) {
        auto c = random_cloud(100, rng);
        const auto base = fps(c.points, 16);
        const auto rotated = rotate_z(c, rng.uniform(0.1, 6.0));
        CHECK(fps(rotated.points, 16) == base);
    }
}

TEST_CASE("fps coverage never degrades as P grows") {
    Rng rng(23);
    auto c = random_cloud(200, rng);
    double prev = std::numeric_limits<double>::infinity();
    for (std::int64_t p = 1; p <= 40; ++p) {
        const auto anchors = fps(c.points, p);
        double worst = 0.0;
        for (const auto& pt : c.points) {
            double mind = std::numeric_limits<double>::infinity();
            for (const auto a : anchors) mind = std::min(mind, dist2(pt, c.points[static_cast<std::size_t>(a)]));
            worst = std::max(worst, mind);
        }
        CHECK(worst <= prev + 1e-12);
        prev = worst;
    }
}

TEST_CASE("knn_group anchor-only patches and collinear ordering") {
    std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}, {10, 0, 0}};
    const auto self_only = knn_group(pts, {2}, 1);
    CHECK(self_only.neighbor_indices[0] == std::vector<std::int64_t>{2});
    CHECK(self_only.relative[0][0] == Vec3{0, 0, 0});

    const auto three = knn_group(pts, {2}, 3);
    CHECK(three.neighbor_indices[0] == std::vector<std::int64_t>{2, 1, 3});

    CHECK_THROWS_AS(knn_group(pts, {0}, 6), DimensionError);
}

TEST_CASE("knn_group matches the full-sort oracle exactly") {
    Rng rng(29);
    for (int trial = 0; trial < 50; ++trial) {
        const auto n = static_cast<std::int64_t>(4 + rng.next_below(509));
        const auto k = static_cast<std::int64_t>(1 + rng.next_below(std::min<std::uint64_t>(32, static_cast<std::uint64_t>(n))));
        auto c = random_cloud(n, rng);
        const auto anchors = fps(c.points, std::min<std::int64_t>(8, n));
        const auto ps = knn_group(c.points, anchors, k);
        for (std::size_t a = 0; a < anchors.size(); ++a) {
            CHECK(ps.neighbor_indices[a] == knn_reference(c.points, anchors[a], k));
        }
    }
}

TEST_CASE("knn_group distances are non-decreasing and offsets reconstruct exactly") {
    Rng rng(31);
    auto c = random_cloud(128, rng);
    const auto anchors = fps(c.points, 12);
    const auto ps = knn_group(c.points, anchors, 16);
    for (std::int64_t p = 0; p < ps.patch_count(); ++p) {
        double prev = -1.0;
        for (std::int64_t j = 0; j < ps.points_per_patch(); ++j) {
            const auto& rel = ps.relative[static_cast<std::size_t>(p)][static_cast<std::size_t>(j)];
            const double d = rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2];
            CHECK(d >= prev);
            prev = d;
            // bitwise identity: relative + anchor == absolute
            const auto& anchor = ps.anchors[static_cast<std::size_t>(p)];
            const auto& abs = ps.absolute[static_cast<std::size_t>(p)][static_cast<std::size_t>(j)];
            CHECK(rel[0] + anchor[0] == abs[0]);
            CHECK(rel[1] + anchor[1] == abs[1]);
            CHECK(rel[2] + anchor[2] == abs[2]);
        }
    }
    // anchors are pairwise distinct
    auto sorted = ps.anchor_indices;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
}
