// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pointy/geometry.hpp"
#include "pointy/io.hpp"
#include "pointy/rng.hpp"

namespace pointy {

// =====================================================================
//  Dataset
// =====================================================================

struct Dataset {
    std::vector<PointCloud> clouds;
    std::vector<std::int64_t> labels;
    std::vector<std::string> class_names;
    std::string source;

    std::int64_t size() const { return static_cast<std::int64_t>(clouds.size()); }
    std::int64_t num_classes() const { return static_cast<std::int64_t>(class_names.size()); }

    void validate() const {
        if (clouds.size() != labels.size()) throw DimensionError("dataset '" + source + "': labels not aligned");
        for (const auto l : labels) {
            if (l < 0 || l >= num_classes()) {
                throw IndexError("dataset '" + source + "': label " + std::to_string(l) + " out of range");
            }
        }
    }
};

// =====================================================================
//  Synthetic shapes
// =====================================================================

inline const std::vector<std::string>& synthetic_class_names() {
    static const std::vector<std::string> names = {"sphere", "cube", "cylinder", "cone",
                                                   "torus",  "plane", "helix"};
    return names;
}

namespace detail {

inline Vec3 sample_surface_point(const std::string& cls, Rng& rng) {
    const double two_pi = 2.0 * 3.14159265358979323846;
    if (cls == "sphere") {
        const double z = rng.uniform(-1.0, 1.0);
        const double phi = rng.uniform(0.0, two_pi);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return {r * std::cos(phi), r * std::sin(phi), z};
    }
    if (cls == "cube") {
        const auto axis = rng.next_below(3);
        const double sign = rng.next_below(2) ? 1.0 : -1.0;
        const double a = rng.uniform(-1.0, 1.0);
        const double b = rng.uniform(-1.0, 1.0);
        if (axis == 0) return {sign, a, b};
        if (axis == 1) return {a, sign, b};
        return {a, b, sign};
    }
    if (cls == "cylinder") {
        // lateral area 4*pi vs. two caps 2*pi
        if (rng.next_double() < 2.0 / 3.0) {
            const double phi = rng.uniform(0.0, two_pi);
            return {std::cos(phi), std::sin(phi), rng.uniform(-1.0, 1.0)};
        }
        const double z = rng.next_below(2) ? 1.0 : -1.0;
        const double r = std::sqrt(rng.next_double());
        const double phi = rng.uniform(0.0, two_pi);
        return {r * std::cos(phi), r * std::sin(phi), z};
    }
    if (cls == "cone") {
        // apex (0,0,1), base disk radius 1 at z=-1
        const double slant = std::sqrt(5.0);
        const double p_lateral = slant / (slant + 1.0);
        const double phi = rng.uniform(0.0, two_pi);
        if (rng.next_double() < p_lateral) {
            const double u = std::sqrt(rng.next_double());  // area grows with radius
            return {u * std::cos(phi), u * std::sin(phi), 1.0 - 2.0 * u};
        }
        const double r = std::sqrt(rng.next_double());
        return {r * std::cos(phi), r * std::sin(phi), -1.0};
    }
    if (cls == "torus") {
        const double major = 0.7, minor = 0.3;
        const double u = rng.uniform(0.0, two_pi);
        double v;
        for (;;) {  // rejection keeps the surface density uniform
            v = rng.uniform(0.0, two_pi);
            if (rng.next_double() * (major + minor) <= major + minor * std::cos(v)) break;
        }
        const double ring = major + minor * std::cos(v);
        return {ring * std::cos(u), ring * std::sin(u), minor * std::sin(v)};
    }
    if (cls == "plane") {
        return {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 0.0};
    }
    if (cls == "helix") {
        const double turns = 2.0;
        const double t = rng.next_double();
        const double angle = t * turns * two_pi;
        return {0.8 * std::cos(angle), 0.8 * std::sin(angle), -1.0 + 2.0 * t};
    }
    throw ConfigError("unknown synthetic class '" + cls + "'; valid: sphere, cube, cylinder, cone, torus, plane, helix");
}

inline double quantize_f32(double v) {
    // volatile stops GCC's SLP pass from illegally folding the
    // narrow-then-widen pair back into the original double
    volatile float f = static_cast<float>(v);
    return static_cast<double>(f);
}

}  // namespace detail

/// Analytic surface sampling with per-sample random scale in [0.7, 1.3],
/// random z-rotation, and Gaussian coordinate noise. Coordinates are
/// quantized to f32 so in-memory datasets match their PCF files bit for
/// bit. Deterministic under the seed.
inline Dataset gen_synthetic(const std::vector<std::string>& classes, std::int64_t per_class,
                             std::int64_t n_points, double noise_sigma, std::uint64_t seed) {
    if (classes.empty()) throw ConfigError("gen_synthetic: no classes requested");
    if (per_class < 1) throw ConfigError("gen_synthetic: per_class must be >= 1");
    if (n_points < 8) throw ConfigError("gen_synthetic: need n_points >= 8");
    for (const auto& c : classes) {
        const auto& valid = synthetic_class_names();
        if (std::find(valid.begin(), valid.end(), c) == valid.end()) {
            std::string names;
            for (const auto& v : valid) names += (names.empty() ? "" : ", ") + v;
            throw ConfigError("gen_synthetic: unknown class '" + c + "'; valid: " + names);
        }
    }
    Dataset ds;
    ds.class_names = classes;
    ds.source = "synthetic";
    Rng rng(seed);
    for (std::size_t ci = 0; ci < classes.size(); ++ci) {
        for (std::int64_t s = 0; s < per_class; ++s) {
            const double scale_factor = rng.uniform(0.7, 1.3);
            const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
            const double ca = std::cos(angle), sa = std::sin(angle);
            PointCloud cloud;
            cloud.id = classes[ci] + "_" + std::to_string(s);
            cloud.label = static_cast<std::int64_t>(ci);
            cloud.points.reserve(static_cast<std::size_t>(n_points));
            for (std::int64_t i = 0; i < n_points; ++i) {
                Vec3 p = detail::sample_surface_point(classes[ci], rng);
                for (auto& c : p) c *= scale_factor;
                const double x = ca * p[0] - sa * p[1];
                const double y = sa * p[0] + ca * p[1];
                p[0] = x;
                p[1] = y;
                if (noise_sigma > 0.0) {
                    p[0] += rng.normal(0.0, noise_sigma);
                    p[1] += rng.normal(0.0, noise_sigma);
                    p[2] += rng.normal(0.0, noise_sigma);
                }
                cloud.points.push_back({detail::quantize_f32(p[0]), detail::quantize_f32(p[1]),
                                        detail::quantize_f32(p[2])});
            }
            ds.clouds.push_back(std::move(cloud));
            ds.labels.push_back(static_cast<std::int64_t>(ci));
        }
    }
    return ds;
}

// =====================================================================
//  Splits
// =====================================================================

struct SplitResult {
    Dataset train;
    Dataset test;
};

/// Stratified split: ceil(fraction * n_c) of each class to train, after
/// a seeded within-class shuffle. Disjoint and exhaustive.
inline SplitResult split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    ds.validate();
    if (ds.size() == 0) throw DimensionError("split: empty dataset");
    if (train_fraction < 0.0 || train_fraction > 1.0) throw ConfigError("split: fraction must be in [0, 1]");
    std::vector<std::vector<std::int64_t>> per_class(static_cast<std::size_t>(ds.num_classes()));
    for (std::int64_t i = 0; i < ds.size(); ++i) {
        per_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])].push_back(i);
    }
    Rng rng(seed);
    SplitResult out;
    out.train.class_names = ds.class_names;
    out.train.source = ds.source + ":train";
    out.test.class_names = ds.class_names;
    out.test.source = ds.source + ":test";
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        auto& idx = per_class[c];
        rng.shuffle(idx);
        const auto n_train = static_cast<std::int64_t>(
            std::ceil(train_fraction * static_cast<double>(idx.size())));
        if (idx.size() == 1 && train_fraction < 1.0) {
            std::cerr << "warning: class '" << ds.class_names[c] << "' has a single sample; assigning it to train\n";
        }
        for (std::size_t j = 0; j < idx.size(); ++j) {
            auto& dst = (static_cast<std::int64_t>(j) < n_train) ? out.train : out.test;
            dst.clouds.push_back(ds.clouds[static_cast<std::size_t>(idx[j])]);
            dst.labels.push_back(ds.labels[static_cast<std::size_t>(idx[j])]);
        }
    }
    if (out.test.size() == 0) {
        std::cerr << "warning: split produced an empty test set (train_fraction=" << train_fraction << ")\n";
    }
    return out;
}

// =====================================================================
//  PCF binary format
// =====================================================================
//
// Little-endian: magic "PCF1", u32 flags (bit0: extras present, bit1:
// extras are colors), u32 point count, N x 3 f32 coordinates, optional
// N x 3 f32 extras, CRC32 trailer.

inline void save_pcf(const PointCloud& cloud, const std::string& path) {
    cloud.validate();
    io::ByteWriter w;
    w.str("PCF1");
    std::uint32_t flags = 0;
    if (cloud.has_extras()) flags |= 1u;
    if (cloud.extras_kind == ExtrasKind::Colors) flags |= 2u;
    w.u32(flags);
    w.u32(static_cast<std::uint32_t>(cloud.size()));
    for (const auto& p : cloud.points) {
        w.f32(static_cast<float>(p[0]));
        w.f32(static_cast<float>(p[1]));
        w.f32(static_cast<float>(p[2]));
    }
    if (cloud.has_extras()) {
        for (const auto& e : cloud.extras) {
            w.f32(static_cast<float>(e[0]));
            w.f32(static_cast<float>(e[1]));
            w.f32(static_cast<float>(e[2]));
        }
    }
    w.finish_to_file(path);
}

inline PointCloud load_pcf(const std::string& path) {
    auto r = io::ByteReader::from_file(path);
    const std::string magic = r.str(4, "magic");
    if (magic != "PCF1") {
        throw FormatError(path + ": bad magic at byte offset 0 (expected PCF1)");
    }
    const std::uint32_t flags = r.u32("flags");
    if (flags & ~3u) throw FormatError(path + ": unknown flag bits at byte offset 4");
    const std::uint32_t n = r.u32("point count");
    if (n == 0) throw FormatError(path + ": zero points declared at byte offset 8");
    const bool has_extras = flags & 1u;
    const std::size_t payload = static_cast<std::size_t>(n) * 12u * (has_extras ? 2u : 1u);
    if (r.remaining() < payload + 4) {
        throw FormatError(path + ": payload truncated at byte offset " + std::to_string(r.offset()) +
                          " (declared " + std::to_string(n) + " points)");
    }
    PointCloud cloud;
    cloud.id = path;
    cloud.points.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const double x = r.f32("x");
        const double y = r.f32("y");
        const double z = r.f32("z");
        cloud.points.push_back({x, y, z});
    }
    if (has_extras) {
        cloud.extras_kind = (flags & 2u) ? ExtrasKind::Colors : ExtrasKind::Normals;
        cloud.extras.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            const double x = r.f32("extra x");
            const double y = r.f32("extra y");
            const double z = r.f32("extra z");
            cloud.extras.push_back({x, y, z});
        }
    }
    r.check_crc("PCF payload");
    cloud.validate();
    return cloud;
}

/// ASCII XYZ: one "x y z" triple per line; '#' starts a comment.
inline PointCloud load_xyz(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    PointCloud cloud;
    cloud.id = path;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        double x, y, z;
        if (!(ls >> x)) continue;  // blank or comment-only line
        if (!(ls >> y >> z)) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": expected three coordinates");
        }
        cloud.points.push_back({x, y, z});
    }
    if (cloud.points.empty()) throw FormatError(path + ": no points");
    cloud.validate();
    return cloud;
}

inline PointCloud load_cloud_file(const std::string& path) {
    const auto dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    if (ext == "pcf") return load_pcf(path);
    if (ext == "xyz" || ext == "txt") return load_xyz(path);
    throw FormatError(path + ": unsupported extension '" + ext + "' (expected .pcf or .xyz)");
}

// =====================================================================
//  Manifest ingestion
// =====================================================================

struct ManifestRow {
    std::string path;
    std::string class_name;
};

struct Manifest {
    std::vector<ManifestRow> rows;
    std::vector<std::string> class_names;  // sorted; index = class id

    std::int64_t class_index(const std::string& name) const {
        const auto it = std::lower_bound(class_names.begin(), class_names.end(), name);
        if (it == class_names.end() || *it != name) throw IndexError("manifest: unknown class '" + name + "'");
        return static_cast<std::int64_t>(it - class_names.begin());
    }
};

/// CSV with a "path,class" header. Class ids are assigned by sorted
/// class name, so row order cannot change the mapping.
inline Manifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open manifest '" + path + "'");
    Manifest m;
    std::string line;
    std::int64_t line_no = 0;
    std::set<std::string> seen_paths;
    std::set<std::string> classes;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "path,class") {
                throw FormatError(path + ":1: expected header 'path,class', got '" + line + "'");
            }
            continue;
        }
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": expected 'path,class'");
        }
        ManifestRow row{line.substr(0, comma), line.substr(comma + 1)};
        if (row.path.empty() || row.class_name.empty()) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": empty path or class");
        }
        if (!seen_paths.insert(row.path).second) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": duplicate path '" + row.path + "'");
        }
        classes.insert(row.class_name);
        m.rows.push_back(std::move(row));
    }
    if (m.rows.empty()) throw FormatError(path + ": empty manifest");
    m.class_names.assign(classes.begin(), classes.end());
    return m;
}

inline void write_manifest(const std::vector<ManifestRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open manifest '" + path + "' for writing");
    out << "path,class\n";
    for (const auto& r : rows) out << r.path << ',' << r.class_name << '\n';
    if (!out) throw FormatError("write failed for manifest '" + path + "'");
}

/// Loads every referenced file, resamples to n_points, and normalizes
/// to the unit range. Relative paths resolve against the manifest.
inline Dataset load_manifest(const std::string& path, std::int64_t n_points, std::uint64_t seed) {
    const Manifest m = read_manifest(path);
    const auto base = std::filesystem::path(path).parent_path();
    Dataset ds;
    ds.class_names = m.class_names;
    ds.source = path;
    Rng rng(seed);
    for (const auto& row : m.rows) {
        std::filesystem::path p(row.path);
        if (p.is_relative()) p = base / p;
        if (!std::filesystem::exists(p)) {
            throw FormatError("manifest '" + path + "': missing file '" + p.string() + "'");
        }
        PointCloud cloud = load_cloud_file(p.string());
        cloud = sample_uniform(cloud, n_points, rng);
        cloud = normalize_unit_range(cloud);
        const auto label = m.class_index(row.class_name);
        cloud.label = label;
        ds.clouds.push_back(std::move(cloud));
        ds.labels.push_back(label);
    }
    return ds;
}

// =====================================================================
//  Nearest-centroid baseline
// =====================================================================
//
// Classifies each cloud by a covariance signature of its normalized
// coordinates: the sorted eigenvalues of the coordinate covariance
// plus the radial variance (the Var(r) entry of the covariance of the
// radius-augmented coordinates). Deliberately crude: it anchors the
// training acceptance threshold as a separability oracle the model
// must beat.

inline std::array<double, 3> covariance_eigenvalues(const PointCloud& cloud) {
    const PointCloud n = normalize_unit_range(cloud);
    const Vec3 c = centroid_of(n.points);
    double xx = 0, yy = 0, zz = 0, xy = 0, xz = 0, yz = 0;
    for (const auto& p : n.points) {
        const double dx = p[0] - c[0], dy = p[1] - c[1], dz = p[2] - c[2];
        xx += dx * dx;
        yy += dy * dy;
        zz += dz * dz;
        xy += dx * dy;
        xz += dx * dz;
        yz += dy * dz;
    }
    const double inv = 1.0 / static_cast<double>(n.points.size());
    xx *= inv; yy *= inv; zz *= inv; xy *= inv; xz *= inv; yz *= inv;

    // closed-form symmetric 3x3 eigenvalues
    const double p1 = xy * xy + xz * xz + yz * yz;
    std::array<double, 3> eig;
    if (p1 == 0.0) {
        eig = {xx, yy, zz};
    } else {
        const double q = (xx + yy + zz) / 3.0;
        const double p2 = (xx - q) * (xx - q) + (yy - q) * (yy - q) + (zz - q) * (zz - q) + 2.0 * p1;
        const double p = std::sqrt(p2 / 6.0);
        const double bxx = (xx - q) / p, byy = (yy - q) / p, bzz = (zz - q) / p;
        const double bxy = xy / p, bxz = xz / p, byz = yz / p;
        const double det_b = bxx * (byy * bzz - byz * byz) - bxy * (bxy * bzz - byz * bxz) +
                             bxz * (bxy * byz - byy * bxz);
        double r = det_b / 2.0;
        r = std::clamp(r, -1.0, 1.0);
        const double phi = std::acos(r) / 3.0;
        const double e1 = q + 2.0 * p * std::cos(phi);
        const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * 3.14159265358979323846 / 3.0);
        eig = {e3, 3.0 * q - e1 - e3, e1};
    }
    std::sort(eig.begin(), eig.end());
    return eig;
}

inline std::vector<double> covariance_signature(const PointCloud& cloud) {
    const auto eig = covariance_eigenvalues(cloud);
    const PointCloud n = normalize_unit_range(cloud);
    const Vec3 c = centroid_of(n.points);
    double r_mean = 0.0, r2_mean = 0.0;
    for (const auto& p : n.points) {
        const double r = std::sqrt(dist2(p, c));
        r_mean += r;
        r2_mean += r * r;
    }
    r_mean /= static_cast<double>(n.points.size());
    r2_mean /= static_cast<double>(n.points.size());
    return {eig[0], eig[1], eig[2], r2_mean - r_mean * r_mean};
}

/// Overall accuracy (%) of the nearest-centroid oracle on the covariance
/// signature (features standardized by training statistics).
inline double nearest_centroid_baseline_oa(const Dataset& train, const Dataset& test) {
    train.validate();
    test.validate();
    const auto c = train.num_classes();
    std::vector<std::vector<double>> sigs;
    sigs.reserve(static_cast<std::size_t>(train.size()));
    for (const auto& cloud : train.clouds) sigs.push_back(covariance_signature(cloud));
    const std::size_t dim = sigs[0].size();

    std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
    for (const auto& s : sigs) {
        for (std::size_t d = 0; d < dim; ++d) mean[d] += s[d];
    }
    for (auto& v : mean) v /= static_cast<double>(sigs.size());
    for (const auto& s : sigs) {
        for (std::size_t d = 0; d < dim; ++d) sd[d] += (s[d] - mean[d]) * (s[d] - mean[d]);
    }
    for (auto& v : sd) v = std::sqrt(v / static_cast<double>(sigs.size())) + 1e-12;

    std::vector<std::vector<double>> centroids(static_cast<std::size_t>(c), std::vector<double>(dim, 0.0));
    std::vector<std::int64_t> counts(static_cast<std::size_t>(c), 0);
    for (std::int64_t i = 0; i < train.size(); ++i) {
        const auto label = static_cast<std::size_t>(train.labels[static_cast<std::size_t>(i)]);
        for (std::size_t d = 0; d < dim; ++d) {
            centroids[label][d] += (sigs[static_cast<std::size_t>(i)][d] - mean[d]) / sd[d];
        }
        ++counts[label];
    }
    for (std::size_t ci = 0; ci < centroids.size(); ++ci) {
        if (counts[ci] == 0) throw IndexError("baseline: class '" + train.class_names[ci] + "' has no samples");
        for (auto& v : centroids[ci]) v /= static_cast<double>(counts[ci]);
    }
    std::int64_t correct = 0;
    for (std::int64_t i = 0; i < test.size(); ++i) {
        const auto sig = covariance_signature(test.clouds[static_cast<std::size_t>(i)]);
        std::int64_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::int64_t ci = 0; ci < c; ++ci) {
            double d = 0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double diff = (sig[k] - mean[k]) / sd[k] - centroids[static_cast<std::size_t>(ci)][k];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = ci;
            }
        }
        if (best == test.labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace pointy
