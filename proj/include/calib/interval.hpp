#pragma once

// Interval calibration with randomly shifted fixed-width bins (RintCE) and
// its dyadic-width surrogate (SintCE).
//
// For a fixed width w, the binned residual sum is a step function of the
// shift r in [0, w): a point moves to the previous bin exactly when r passes
// (v mod w). Sweeping r across those event points once yields every value
// the sum can take, so each Monte Carlo shift is answered by a binary search.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "calib/core.hpp"

namespace calib {

struct IntervalEstimatorConfig {
    double epsilon = 0.01;
    double constant_c = 8.0;
    double delta = 0.05;
    /// Shifts per width; 0 selects ceil(C eps^-2 log(k*/delta)).
    std::int64_t shifts_m = 0;
    SeededRng rng{0};
};

/// Smallest k with 2^-k <= eps/2; then eps/4 < 2^-k.
inline int dyadic_depth(double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error(ErrorKind::BadEps, "epsilon must lie in (0,1)");
    int k = 0;
    while (std::ldexp(1.0, -k) > epsilon / 2.0) ++k;
    return k;
}

inline std::int64_t default_shift_count(double epsilon, double constant_c, double delta) {
    const int k_star = dyadic_depth(epsilon);
    const double log_term = std::log(std::max(1, k_star) / delta);
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(constant_c * log_term / (epsilon * epsilon))));
}

/// Binned residual sum sum_j |E[(y - v) 1(v in [r + j w, r + (j+1) w))]| as a
/// step function of r over [0, w).
class ShiftProfile {
public:
    template <PredictionLabelDistribution D>
    ShiftProfile(const D& dist, double width) : width_(width) {
        if (!(width > 0.0 && width <= 1.0)) throw Error(ErrorKind::BadWidth, "width must lie in (0,1]");
        const auto support = detail::aggregate_support(dist);

        // Bin index at r = 0 and the shift at which each point drops one bin.
        struct Event {
            double at;
            std::size_t point;
        };
        const auto bins = static_cast<std::size_t>(std::ceil(1.0 / width)) + 2;  // j in [-1, ceil(1/w)]
        std::vector<double> sums(bins, 0.0);
        std::vector<std::int64_t> bin_of(support.size());
        std::vector<Event> events;
        events.reserve(support.size());
        for (std::size_t i = 0; i < support.size(); ++i) {
            const double v = support[i].v;
            auto j = static_cast<std::int64_t>(std::floor(v / width));
            double offset = v - static_cast<double>(j) * width;  // v mod w, in [0, w)
            if (offset < 0.0) offset = 0.0;
            if (offset >= width) {
                ++j;
                offset = 0.0;
            }
            bin_of[i] = j + 1;
            sums[static_cast<std::size_t>(j + 1)] += support[i].residual;
            // The point stays in bin j while r <= offset and moves to j - 1 once r > offset.
            events.push_back({offset, i});
        }
        std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.at < b.at; });

        double total = 0.0;
        for (double s : sums) total += std::abs(s);
        breaks_.push_back(0.0);
        values_.push_back(total);
        for (std::size_t e = 0; e < events.size();) {
            const double at = events[e].at;
            // Every point whose offset equals `at` leaves its bin for r > at.
            for (; e < events.size() && events[e].at == at; ++e) {
                const auto i = events[e].point;
                const auto from = static_cast<std::size_t>(bin_of[i]);
                const auto to = from - 1;
                total -= std::abs(sums[from]) + std::abs(sums[to]);
                sums[from] -= support[i].residual;
                sums[to] += support[i].residual;
                total += std::abs(sums[from]) + std::abs(sums[to]);
                bin_of[i] = static_cast<std::int64_t>(to);
            }
            // Value on (at, next event]; exact recomputation stops drift from accumulating.
            if ((breaks_.size() & 63U) == 0) {
                total = 0.0;
                for (double s : sums) total += std::abs(s);
            }
            breaks_.push_back(at);
            values_.push_back(total);
        }
    }

    double width() const noexcept { return width_; }

    /// Binned residual sum at shift r in [0, w).
    double at(double r) const {
        // Piece k covers (breaks_[k], breaks_[k+1]]; piece 0 also covers r = 0.
        const auto it = std::lower_bound(breaks_.begin() + 1, breaks_.end(), r);
        return values_[static_cast<std::size_t>(std::distance(breaks_.begin(), it)) - 1];
    }

    /// Exact expectation over r ~ Unif[0, w).
    double expectation() const {
        double acc = 0.0;
        for (std::size_t k = 0; k < values_.size(); ++k) {
            const double hi = k + 1 < breaks_.size() ? breaks_[k + 1] : width_;
            acc += values_[k] * (hi - breaks_[k]);
        }
        return acc / width_;
    }

private:
    double width_;
    std::vector<double> breaks_;
    std::vector<double> values_;
};

/// Monte Carlo RintCE at a fixed width: mean over `shifts_m` uniform shifts.
template <PredictionLabelDistribution D>
double rintce_hat(const D& dist, double width, std::int64_t shifts_m, SeededRng& rng) {
    if (shifts_m < 1) throw Error(ErrorKind::BadConfig, "shifts_m must be >= 1");
    const ShiftProfile profile(dist, width);
    double acc = 0.0;
    for (std::int64_t s = 0; s < shifts_m; ++s) acc += profile.at(rng.uniform() * width);
    return acc / static_cast<double>(shifts_m);
}

/// RintCE with the expectation over shifts taken exactly.
template <PredictionLabelDistribution D>
double rintce_exact(const D& dist, double width) {
    return ShiftProfile(dist, width).expectation();
}

struct SintceResult {
    double value = 0.0;
    int best_k = 0;
    int k_star = 0;
    std::int64_t shifts_m = 0;
    std::size_t n = 0;
    std::vector<double> rintce_by_k;  // RintCE estimate at width 2^-k, k = 0..k_star
};

template <PredictionLabelDistribution D>
SintceResult sintce_detail(const D& dist, const IntervalEstimatorConfig& cfg) {
    SintceResult r;
    r.k_star = dyadic_depth(cfg.epsilon);
    r.shifts_m = cfg.shifts_m > 0 ? cfg.shifts_m : default_shift_count(cfg.epsilon, cfg.constant_c, cfg.delta);
    r.n = dist.size();
    r.value = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= r.k_star; ++k) {
        const double width = std::ldexp(1.0, -k);
        auto lane = cfg.rng.derive(static_cast<std::uint64_t>(k));
        const double est = rintce_hat(dist, width, r.shifts_m, lane);
        r.rintce_by_k.push_back(est);
        if (est + width < r.value) {
            r.value = est + width;
            r.best_k = k;
        }
    }
    return r;
}

template <PredictionLabelDistribution D>
double sintce_hat(const D& dist, const IntervalEstimatorConfig& cfg) {
    return sintce_detail(dist, cfg).value;
}

}  // namespace calib
