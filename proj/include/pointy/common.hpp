// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pointy {

// =====================================================================
//  Error taxonomy
// =====================================================================

/// Shape/extent mismatch between operands.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Out-of-range label or index.
struct IndexError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite values, stale gradients, diverged training.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed file contents (bad magic, truncation, CRC mismatch).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value or combination.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// =====================================================================
//  Non-finite detection
// =====================================================================
//
// Every public tensor operation scans its output unless the check is
// switched off. Violations throw instead of propagating NaN/Inf.

inline std::atomic<bool>& finite_check_flag() {
    static std::atomic<bool> flag{true};
    return flag;
}

inline void set_finite_checks(bool on) { finite_check_flag().store(on, std::memory_order_relaxed); }
inline bool finite_checks_enabled() { return finite_check_flag().load(std::memory_order_relaxed); }

template <typename T>
inline void check_finite(const T* p, std::size_t n, const char* what) {
    if (!finite_checks_enabled()) return;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(p[i])) {
            throw NumericError(std::string(what) + ": non-finite value at flat index " + std::to_string(i));
        }
    }
}

template <typename T>
inline void check_finite(const std::vector<T>& v, const char* what) {
    check_finite(v.data(), v.size(), what);
}

// =====================================================================
//  Small utilities
// =====================================================================

inline std::string shape_str(const std::vector<std::int64_t>& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ')';
    return os.str();
}

inline std::string format_double(double v, int digits = 17) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

/// CRC-32 (IEEE 802.3, reflected, poly 0xEDB88320), incremental.
class Crc32 {
  public:
    void update(const void* bytes, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(bytes);
        std::uint32_t c = state_;
        for (std::size_t i = 0; i < n; ++i) {
            c = table()[(c ^ p[i]) & 0xFFu] ^ (c >> 8);
        }
        state_ = c;
    }

    std::uint32_t value() const { return state_ ^ 0xFFFFFFFFu; }

    static std::uint32_t of(const void* bytes, std::size_t n) {
        Crc32 c;
        c.update(bytes, n);
        return c.value();
    }

  private:
    static const std::uint32_t* table() {
        static const auto tab = [] {
            std::vector<std::uint32_t> t(256);
            for (std::uint32_t i = 0; i < 256; ++i) {
                std::uint32_t c = i;
                for (int j = 0; j < 8; ++j) {
                    c = (c & 1u) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
                }
                t[i] = c;
            }
            return t;
        }();
        return tab.data();
    }

    std::uint32_t state_ = 0xFFFFFFFFu;
};

/// Chunked parallel loop. threads <= 1 runs inline on the calling
/// thread; the first worker exception is rethrown after the join.
template <typename Fn>
inline void parallel_for(std::int64_t n, int threads, Fn&& fn) {
    if (n <= 0) return;
    if (threads <= 1 || n == 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const int workers = static_cast<int>(std::min<std::int64_t>(threads, n));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    std::atomic<std::int64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            try {
                for (;;) {
                    const std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
                    if (i >= n) break;
                    fn(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n, std::memory_order_relaxed);
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace pointy
