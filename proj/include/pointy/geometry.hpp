// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pointy/common.hpp"
#include "pointy/rng.hpp"

namespace pointy {

using Vec3 = std::array<double, 3>;

enum class ExtrasKind { None, Normals, Colors };

// =====================================================================
//  Point cloud
// =====================================================================

struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> extras;  // normals or colors, aligned with points
    ExtrasKind extras_kind = ExtrasKind::None;
    std::optional<std::int64_t> label;
    std::string id;

    std::int64_t size() const { return static_cast<std::int64_t>(points.size()); }
    bool has_extras() const { return extras_kind != ExtrasKind::None; }

    void validate() const {
        if (points.empty()) throw DimensionError("point cloud '" + id + "' is empty");
        for (const auto& p : points) {
            for (const double c : p) {
                if (!std::isfinite(c)) throw NumericError("point cloud '" + id + "' contains non-finite coordinates");
            }
        }
        if (has_extras() && extras.size() != points.size()) {
            throw DimensionError("point cloud '" + id + "': extras not aligned with points");
        }
    }
};

/// Anchors plus their grouped neighborhoods. absolute is reconstructed
/// as anchor + relative so that identity holds bitwise.
struct PatchSet {
    std::vector<std::int64_t> anchor_indices;        // P
    std::vector<Vec3> anchors;                       // P
    std::vector<std::vector<std::int64_t>> neighbor_indices;  // P x k
    std::vector<std::vector<Vec3>> relative;         // P x k
    std::vector<std::vector<Vec3>> absolute;         // P x k

    std::int64_t patch_count() const { return static_cast<std::int64_t>(anchors.size()); }
    std::int64_t points_per_patch() const { return relative.empty() ? 0 : static_cast<std::int64_t>(relative[0].size()); }
};

// =====================================================================
//  Operations
// =====================================================================

inline Vec3 centroid_of(const std::vector<Vec3>& pts) {
    Vec3 c{0, 0, 0};
    for (const auto& p : pts) {
        c[0] += p[0];
        c[1] += p[1];
        c[2] += p[2];
    }
    const double inv = 1.0 / static_cast<double>(pts.size());
    return {c[0] * inv, c[1] * inv, c[2] * inv};
}

inline double dist2(const Vec3& a, const Vec3& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

/// Centers on the centroid and divides by the largest absolute centered
/// coordinate, mapping every coordinate into [-1, 1]. Aspect ratio is
/// preserved; a degenerate single-point cloud keeps scale 1.
inline PointCloud normalize_unit_range(const PointCloud& cloud) {
    cloud.validate();
    const Vec3 c = centroid_of(cloud.points);
    double s = 0.0;
    for (const auto& p : cloud.points) {
        s = std::max({s, std::abs(p[0] - c[0]), std::abs(p[1] - c[1]), std::abs(p[2] - c[2])});
    }
    if (s == 0.0) s = 1.0;
    PointCloud out = cloud;
    const double inv = 1.0 / s;
    for (auto& p : out.points) {
        p[0] = (p[0] - c[0]) * inv;
        p[1] = (p[1] - c[1]) * inv;
        p[2] = (p[2] - c[2]) * inv;
    }
    return out;
}

/// Rotates about +z. Normals rotate with the points; colors do not.
inline PointCloud rotate_z(const PointCloud& cloud, double angle) {
    const double ca = std::cos(angle), sa = std::sin(angle);
    PointCloud out = cloud;
    auto rot = [ca, sa](Vec3& p) {
        const double x = p[0], y = p[1];
        p[0] = ca * x - sa * y;
        p[1] = sa * x + ca * y;
    };
    for (auto& p : out.points) rot(p);
    if (out.extras_kind == ExtrasKind::Normals) {
        for (auto& n : out.extras) rot(n);
    }
    return out;
}

/// n indices drawn uniformly: without replacement while n <= N, with
/// replacement once the cloud is smaller than the request.
inline PointCloud sample_uniform(const PointCloud& cloud, std::int64_t n, Rng& rng) {
    if (cloud.points.empty()) throw DimensionError("sample_uniform: empty cloud");
    if (n < 1) throw ConfigError("sample_uniform: need n >= 1");
    const auto total = cloud.size();
    std::vector<std::int64_t> picks;
    if (n <= total) {
        picks = rng.sample_without_replacement(total, n);
    } else {
        picks.reserve(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) picks.push_back(static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(total))));
    }
    PointCloud out;
    out.extras_kind = cloud.extras_kind;
    out.label = cloud.label;
    out.id = cloud.id;
    out.points.reserve(picks.size());
    for (const auto i : picks) out.points.push_back(cloud.points[static_cast<std::size_t>(i)]);
    if (cloud.has_extras()) {
        out.extras.reserve(picks.size());
        for (const auto i : picks) out.extras.push_back(cloud.extras[static_cast<std::size_t>(i)]);
    }
    return out;
}

struct FpsOptions {
    bool random_start = false;  // default start: farthest from centroid
};

/// Farthest point sampling. The first anchor maximizes distance to the
/// centroid; each next anchor maximizes the minimum distance to the
/// selected set. All ties break toward the lower index. O(N*P) via a
/// running minimum-distance array.
inline std::vector<std::int64_t> fps(const std::vector<Vec3>& points, std::int64_t anchor_count,
                                     Rng* rng = nullptr, const FpsOptions& opts = {}) {
    const auto n = static_cast<std::int64_t>(points.size());
    if (anchor_count < 1 || anchor_count > n) {
        throw DimensionError("fps: anchor count " + std::to_string(anchor_count) + " out of range for " +
                             std::to_string(n) + " points");
    }
    std::int64_t first = 0;
    if (opts.random_start) {
        if (!rng) throw ConfigError("fps: random start requires an rng");
        first = static_cast<std::int64_t>(rng->next_below(static_cast<std::uint64_t>(n)));
    } else {
        const Vec3 c = centroid_of(points);
        double best = -1.0;
        for (std::int64_t i = 0; i < n; ++i) {
            const double d = dist2(points[static_cast<std::size_t>(i)], c);
            if (d > best) {
                best = d;
                first = i;
            }
        }
    }
    std::vector<std::int64_t> anchors;
    anchors.reserve(static_cast<std::size_t>(anchor_count));
    anchors.push_back(first);
    std::vector<double> min_d2(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        min_d2[static_cast<std::size_t>(i)] = dist2(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(first)]);
    }
    while (static_cast<std::int64_t>(anchors.size()) < anchor_count) {
        std::int64_t next = 0;
        double best = -1.0;
        for (std::int64_t i = 0; i < n; ++i) {
            if (min_d2[static_cast<std::size_t>(i)] > best) {
                best = min_d2[static_cast<std::size_t>(i)];
                next = i;
            }
        }
        anchors.push_back(next);
        for (std::int64_t i = 0; i < n; ++i) {
            const double d = dist2(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(next)]);
            if (d < min_d2[static_cast<std::size_t>(i)]) min_d2[static_cast<std::size_t>(i)] = d;
        }
    }
    return anchors;
}

/// Exact brute-force kNN per anchor; neighbors sorted by (distance,
/// index) ascending, anchor included as its own nearest neighbor.
inline PatchSet knn_group(const std::vector<Vec3>& points, const std::vector<std::int64_t>& anchor_indices,
                          std::int64_t k) {
    const auto n = static_cast<std::int64_t>(points.size());
    if (k < 1 || k > n) {
        throw DimensionError("knn_group: k=" + std::to_string(k) + " out of range for " + std::to_string(n) +
                             " points");
    }
    PatchSet out;
    out.anchor_indices = anchor_indices;
    out.anchors.reserve(anchor_indices.size());
    out.neighbor_indices.resize(anchor_indices.size());
    out.relative.resize(anchor_indices.size());
    out.absolute.resize(anchor_indices.size());

    std::vector<std::pair<double, std::int64_t>> dists(static_cast<std::size_t>(n));
    for (std::size_t a = 0; a < anchor_indices.size(); ++a) {
        const Vec3 anchor = points[static_cast<std::size_t>(anchor_indices[a])];
        out.anchors.push_back(anchor);
        for (std::int64_t i = 0; i < n; ++i) {
            dists[static_cast<std::size_t>(i)] = {dist2(points[static_cast<std::size_t>(i)], anchor), i};
        }
        std::partial_sort(dists.begin(), dists.begin() + k, dists.end());
        auto& idx = out.neighbor_indices[a];
        auto& rel = out.relative[a];
        auto& abs = out.absolute[a];
        idx.reserve(static_cast<std::size_t>(k));
        rel.reserve(static_cast<std::size_t>(k));
        abs.reserve(static_cast<std::size_t>(k));
        for (std::int64_t j = 0; j < k; ++j) {
            const auto pi = dists[static_cast<std::size_t>(j)].second;
            const Vec3& p = points[static_cast<std::size_t>(pi)];
            const Vec3 r{p[0] - anchor[0], p[1] - anchor[1], p[2] - anchor[2]};
            idx.push_back(pi);
            rel.push_back(r);
            abs.push_back({anchor[0] + r[0], anchor[1] + r[1], anchor[2] + r[2]});
        }
    }
    return out;
}

}  // namespace pointy
