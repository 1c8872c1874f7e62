#pragma once

// Domain types shared by every calibration measure: prediction-label samples,
// empirical and weighted distributions, seeded randomness, grid rounding and
// reliability-diagram summaries.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace calib {

enum class ErrorKind {
    EmptyInput,
    OutOfRange,
    BadLabel,
    BadStep,
    BadBins,
    BadWidth,
    BadEps,
    BadAlpha,
    BadConfig,
    ModeKindMismatch,
    TooLarge,
    SolverFailure,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::BadLabel: return "BadLabel";
    case ErrorKind::BadStep: return "BadStep";
    case ErrorKind::BadBins: return "BadBins";
    case ErrorKind::BadWidth: return "BadWidth";
    case ErrorKind::BadEps: return "BadEps";
    case ErrorKind::BadAlpha: return "BadAlpha";
    case ErrorKind::BadConfig: return "BadConfig";
    case ErrorKind::ModeKindMismatch: return "ModeKindMismatch";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::SolverFailure: return "SolverFailure";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct Sample {
    double v = 0.0;
    int y = 0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

/// Uniform-weight empirical distribution over prediction-label pairs.
/// Insertion order is preserved.
class EmpiricalDistribution {
public:
    explicit EmpiricalDistribution(std::vector<Sample> samples) : samples_(std::move(samples)) {
        if (samples_.empty()) throw Error(ErrorKind::EmptyInput, "distribution needs at least one sample");
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            const auto& s = samples_[i];
            if (!(s.v >= 0.0 && s.v <= 1.0))
                throw Error(ErrorKind::OutOfRange, "prediction " + std::to_string(s.v) + " at index " +
                                                       std::to_string(i) + " outside [0,1]");
            if (s.y != 0 && s.y != 1)
                throw Error(ErrorKind::BadLabel,
                            "label " + std::to_string(s.y) + " at index " + std::to_string(i) + " not in {0,1}");
        }
        mass_ = 1.0 / static_cast<double>(samples_.size());
    }

    std::size_t size() const noexcept { return samples_.size(); }
    double prediction(std::size_t i) const { return samples_[i].v; }
    int label(std::size_t i) const { return samples_[i].y; }
    double mass(std::size_t) const noexcept { return mass_; }
    const std::vector<Sample>& samples() const noexcept { return samples_; }

private:
    std::vector<Sample> samples_;
    double mass_ = 0.0;
};

struct WeightedSample {
    double v = 0.0;
    int y = 0;
    double mass = 0.0;

    friend bool operator==(const WeightedSample&, const WeightedSample&) = default;
};

/// Finite-support distribution with explicit masses; used for exact
/// population distributions induced by a finite problem.
class WeightedDistribution {
public:
    explicit WeightedDistribution(std::vector<WeightedSample> points) : points_(std::move(points)) {
        if (points_.empty()) throw Error(ErrorKind::EmptyInput, "distribution needs at least one point");
        double total = 0.0;
        for (const auto& p : points_) {
            if (!(p.v >= 0.0 && p.v <= 1.0)) throw Error(ErrorKind::OutOfRange, "prediction outside [0,1]");
            if (p.y != 0 && p.y != 1) throw Error(ErrorKind::BadLabel, "label not in {0,1}");
            if (!(p.mass >= 0.0)) throw Error(ErrorKind::BadConfig, "negative mass");
            total += p.mass;
        }
        if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::BadConfig, "masses must sum to 1");
    }

    std::size_t size() const noexcept { return points_.size(); }
    double prediction(std::size_t i) const { return points_[i].v; }
    int label(std::size_t i) const { return points_[i].y; }
    double mass(std::size_t i) const { return points_[i].mass; }
    const std::vector<WeightedSample>& points() const noexcept { return points_; }

private:
    std::vector<WeightedSample> points_;
};

/// Anything exposing indexed (prediction, label, mass) triples.
template <class D>
concept PredictionLabelDistribution = requires(const D& d, std::size_t i) {
    { d.size() } -> std::convertible_to<std::size_t>;
    { d.prediction(i) } -> std::convertible_to<double>;
    { d.label(i) } -> std::convertible_to<int>;
    { d.mass(i) } -> std::convertible_to<double>;
};

inline EmpiricalDistribution make_empirical(const std::vector<std::pair<double, int>>& pairs) {
    std::vector<Sample> samples;
    samples.reserve(pairs.size());
    for (const auto& [v, y] : pairs) samples.push_back({v, y});
    return EmpiricalDistribution(std::move(samples));
}

inline WeightedDistribution to_weighted(const EmpiricalDistribution& dist) {
    std::vector<WeightedSample> points;
    points.reserve(dist.size());
    for (const auto& s : dist.samples()) points.push_back({s.v, s.y, dist.mass(0)});
    return WeightedDistribution(std::move(points));
}

// ---------------------------------------------------------------------------
// Seeded randomness
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic 64-bit generator. The uniform mapping is done here rather
/// than through <random> distributions so streams are identical across
/// standard libraries.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed = 0) : seed_(seed), engine_(splitmix64(seed)) {}

    std::uint64_t seed() const noexcept { return seed_; }

    /// Independent substream keyed by (seed, a, b).
    SeededRng derive(std::uint64_t a, std::uint64_t b = 0) const noexcept {
        return SeededRng(splitmix64(splitmix64(seed_ ^ 0x6a09e667f3bcc909ULL) ^ splitmix64(a + 0x3c6ef372fe94f82bULL) ^
                                    (splitmix64(b) << 1)));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0,1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0,1].
    double uniform_open_closed() { return 1.0 - uniform(); }

    /// Uniform on (0,1).
    double uniform_open() {
        double u;
        do u = uniform();
        while (u == 0.0);
        return u;
    }

    /// Uniform index in [0, n).
    std::size_t index(std::size_t n) {
        // Reject the tail so every residue is equally likely.
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t x;
        do x = engine_();
        while (x >= limit);
        return static_cast<std::size_t>(x % bound);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard Cauchy via tan(pi (U - 1/2)).
    double cauchy() { return std::tan(std::numbers::pi * (uniform_open() - 0.5)); }

    /// Gamma(shape 2, scale 1) as the sum of two unit exponentials.
    double gamma2() { return -std::log(uniform_open_closed()) - std::log(uniform_open_closed()); }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Grid rounding
// ---------------------------------------------------------------------------

/// Nearest multiple of `step`, ties upward, clamped to 1.
inline double round_value_to_grid(double v, double step) {
    const double k = std::floor(v / step + 0.5);
    return std::min(k * step, 1.0);
}

inline EmpiricalDistribution round_to_grid(const EmpiricalDistribution& dist, double step) {
    if (!(step > 0.0 && step <= 1.0)) throw Error(ErrorKind::BadStep, "step must lie in (0,1]");
    std::vector<Sample> out;
    out.reserve(dist.size());
    for (const auto& s : dist.samples()) out.push_back({round_value_to_grid(s.v, step), s.y});
    return EmpiricalDistribution(std::move(out));
}

inline WeightedDistribution round_to_grid(const WeightedDistribution& dist, double step) {
    if (!(step > 0.0 && step <= 1.0)) throw Error(ErrorKind::BadStep, "step must lie in (0,1]");
    std::vector<WeightedSample> out;
    out.reserve(dist.size());
    for (const auto& p : dist.points()) out.push_back({round_value_to_grid(p.v, step), p.y, p.mass});
    return WeightedDistribution(std::move(out));
}

// ---------------------------------------------------------------------------
// Reliability diagram
// ---------------------------------------------------------------------------

struct ReliabilityBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double mean_v = std::numeric_limits<double>::quiet_NaN();  // NaN when count == 0
    double mean_y = std::numeric_limits<double>::quiet_NaN();
};

/// Index of the equal-width bin holding v; [i/bins, (i+1)/bins) with the last bin closed at 1.
inline std::size_t equal_width_bin(double v, std::size_t bins) {
    const auto i = static_cast<std::size_t>(std::floor(v * static_cast<double>(bins)));
    return std::min(i, bins - 1);
}

inline std::vector<ReliabilityBin> reliability_bins(const EmpiricalDistribution& dist, int bins) {
    if (bins < 1) throw Error(ErrorKind::BadBins, "bins must be >= 1");
    const auto m = static_cast<std::size_t>(bins);
    std::vector<ReliabilityBin> out(m);
    std::vector<double> sum_v(m, 0.0), sum_y(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        out[i].lo = static_cast<double>(i) / static_cast<double>(m);
        out[i].hi = static_cast<double>(i + 1) / static_cast<double>(m);
    }
    for (const auto& s : dist.samples()) {
        const auto b = equal_width_bin(s.v, m);
        ++out[b].count;
        sum_v[b] += s.v;
        sum_y[b] += s.y;
    }
    for (std::size_t i = 0; i < m; ++i) {
        if (out[i].count == 0) continue;
        out[i].mean_v = sum_v[i] / static_cast<double>(out[i].count);
        out[i].mean_y = sum_y[i] / static_cast<double>(out[i].count);
    }
    return out;
}

namespace detail {

/// Support point aggregated over equal predictions: total mass and the
/// signed residual mass sum of (y - v).
struct SupportPoint {
    double v = 0.0;
    double mass = 0.0;
    double label_mass = 0.0;  // mass with y = 1
    double residual = 0.0;    // sum of mass * (y - v)
};

/// Distinct predictions in increasing order with aggregated masses. Exact
/// (bitwise) equality defines a group.
template <PredictionLabelDistribution D>
std::vector<SupportPoint> aggregate_support(const D& dist) {
    std::vector<std::size_t> order(dist.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dist.prediction(a) != dist.prediction(b)) return dist.prediction(a) < dist.prediction(b);
        if (dist.label(a) != dist.label(b)) return dist.label(a) < dist.label(b);
        return a < b;
    });
    std::vector<SupportPoint> out;
    for (auto i : order) {
        const double v = dist.prediction(i);
        const double m = dist.mass(i);
        const int y = dist.label(i);
        if (out.empty() || out.back().v != v) out.push_back({v, 0.0, 0.0, 0.0});
        auto& p = out.back();
        p.mass += m;
        if (y == 1) p.label_mass += m;
        p.residual += m * (static_cast<double>(y) - v);
    }
    return out;
}

/// Indices sorted by (prediction, label); ties keep original order, so any
/// permutation of identical samples yields the same sequence of values.
template <PredictionLabelDistribution D>
std::vector<std::size_t> sorted_order(const D& dist) {
    std::vector<std::size_t> order(dist.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dist.prediction(a) != dist.prediction(b)) return dist.prediction(a) < dist.prediction(b);
        return dist.label(a) < dist.label(b);
    });
    return order;
}

}  // namespace detail

}  // namespace calib
