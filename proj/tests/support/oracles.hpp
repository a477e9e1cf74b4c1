#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the library's arithmetic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "trailgrade/labeling.hpp"
#include "trailgrade/nn/tensor.hpp"

namespace oracle {

using trailgrade::nn::Tensor;

inline Tensor random_tensor(const trailgrade::nn::Shape& shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Tensor t(shape);
    for (auto& v : t.values()) v = d(rng);
    return t;
}

// Direct definition: out[b,i,j,o] = bias[o] + sum pad(in)[b,i+u,j+v,c] * k[u,v,c,o],
// padding (kh-1)/2 rows on top and (kw-1)/2 columns on the left.
inline Tensor conv2d_brute(const Tensor& in, const Tensor& k, const Tensor& bias) {
    const std::size_t B = in.dim(0), H = in.dim(1), W = in.dim(2), C = in.dim(3);
    const std::size_t kh = k.dim(0), kw = k.dim(1), O = k.dim(3);
    const long top = static_cast<long>((kh - 1) / 2), left = static_cast<long>((kw - 1) / 2);
    Tensor out({B, H, W, O});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j)
                for (std::size_t o = 0; o < O; ++o) {
                    double s = bias[o];
                    for (std::size_t u = 0; u < kh; ++u)
                        for (std::size_t v = 0; v < kw; ++v) {
                            const long r = static_cast<long>(i + u) - top;
                            const long c = static_cast<long>(j + v) - left;
                            if (r < 0 || c < 0 || r >= static_cast<long>(H) || c >= static_cast<long>(W)) continue;
                            for (std::size_t ch = 0; ch < C; ++ch) {
                                s += in[((b * H + r) * W + c) * C + ch] * k[((u * kw + v) * C + ch) * O + o];
                            }
                        }
                    out[((b * H + i) * W + j) * O + o] = s;
                }
    return out;
}

// Central differences of a scalar function with respect to every entry of x.
inline std::vector<double> numeric_gradient(Tensor& x, const std::function<double()>& f, double h = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double up = f();
        x[i] = orig - h;
        const double down = f();
        x[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// Elementwise |a - n| / max(|a|, |n|, floor); the floor keeps round-off on
// near-zero entries from reading as a large relative error.
inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                                 double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

inline double weighted_sum(const Tensor& t, const Tensor& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * w[i];
    return s;
}

inline std::optional<trailgrade::Difficulty> label_scan(const std::vector<trailgrade::LabelSegment>& segs,
                                                        std::int64_t t) {
    for (const auto& s : segs) {
        if (s.start_ms <= t && t < s.end_ms) return s.label;
    }
    return std::nullopt;
}

// Paints segments onto a per-millisecond timeline, later ones on top.
inline std::vector<int> paint_timeline(std::int64_t horizon, const std::vector<trailgrade::LabelSegment>& segs,
                                       std::vector<int> base = {}) {
    if (base.empty()) base.assign(static_cast<std::size_t>(horizon), -1);
    for (const auto& s : segs) {
        for (std::int64_t t = std::max<std::int64_t>(0, s.start_ms); t < std::min(horizon, s.end_ms); ++t) {
            base[static_cast<std::size_t>(t)] = static_cast<int>(s.label);
        }
    }
    return base;
}

inline std::size_t count_window_starts(std::size_t length, std::size_t window, std::size_t stride) {
    std::size_t n = 0;
    for (std::size_t s = 0; s + window <= length; s += stride) ++n;
    return n;
}

inline std::size_t argmax_row(const Tensor& p, std::size_t row) {
    const std::size_t k = p.dim(1);
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
        if (p[row * k + j] > p[row * k + best]) best = j;
    }
    return best;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("trailgrade_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace oracle
