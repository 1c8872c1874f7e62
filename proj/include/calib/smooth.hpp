#pragma once

// Smooth calibration error: the largest correlation between the residual
// y - v and a 1-Lipschitz weight w : [0,1] -> [-1,1].
//
// On a sorted support the program is a chain: box constraints plus one
// Lipschitz constraint per adjacent pair. It is solved exactly by dynamic
// programming over concave piecewise-linear value functions. The verbatim
// program with every pairwise constraint is kept as an independent check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <vector>

#include "calib/core.hpp"
#include "calib/lp.hpp"

namespace calib {

/// Weights z_i in [-1,1] on the sorted distinct predictions v_(1) < ... < v_(d).
struct WeightVector {
    std::vector<double> v;
    std::vector<double> z;

    bool feasible() const {
        if (v.size() != z.size()) return false;
        for (std::size_t i = 0; i < z.size(); ++i) {
            if (!(std::abs(z[i]) <= 1.0)) return false;
            if (i + 1 < z.size() && !(std::abs(z[i + 1] - z[i]) <= v[i + 1] - v[i])) return false;
        }
        return true;
    }
};

struct SmoothResult {
    double value = 0.0;
    WeightVector witness;
};

namespace detail {

/// Concave piecewise-linear function on [-1,1] kept as slope segments: rising
/// pieces left of the maximum, falling pieces right of it, and an implicit
/// flat top in between. Slopes are stored relative to a shared offset so
/// adding a linear term is O(1) plus the pieces that change side.
class ConcaveChain {
public:
    /// Adds c * z to the function.
    void add_linear(double c) {
        if (c == 0.0) return;
        const double lo = plateau_lo(), hi = plateau_hi();
        offset_ += c;
        if (c > 0.0) {
            double value = max_ + c * hi;
            if (hi > lo) push_back_rise(hi - lo, c);
            while (!fall_.empty() && actual(fall_.front()) > 0.0) {
                const auto seg = fall_.front();
                fall_.pop_front();
                fall_len_ -= seg.len;
                value += actual(seg) * seg.len;
                push_back_rise(seg.len, actual(seg));
            }
            while (!fall_.empty() && actual(fall_.front()) == 0.0) {
                fall_len_ -= fall_.front().len;
                fall_.pop_front();
            }
            max_ = value;
        } else {
            double value = max_ + c * lo;
            if (hi > lo) push_front_fall(hi - lo, c);
            while (!rise_.empty() && actual(rise_.back()) < 0.0) {
                const auto seg = rise_.back();
                rise_.pop_back();
                rise_len_ -= seg.len;
                value -= actual(seg) * seg.len;
                push_front_fall(seg.len, actual(seg));
            }
            while (!rise_.empty() && actual(rise_.back()) == 0.0) {
                rise_len_ -= rise_.back().len;
                rise_.pop_back();
            }
            max_ = value;
        }
        if (rise_.empty()) rise_len_ = 0.0;
        if (fall_.empty()) fall_len_ = 0.0;
    }

    /// Replaces F by z -> max{F(t) : |t - z| <= g, t in [-1,1]}.
    void widen(double g) {
        double left = g;
        while (left > 0.0 && !rise_.empty()) {
            auto& seg = rise_.front();
            if (seg.len <= left) {
                left -= seg.len;
                rise_len_ -= seg.len;
                rise_.pop_front();
            } else {
                seg.len -= left;
                rise_len_ -= left;
                left = 0.0;
            }
        }
        double right = g;
        while (right > 0.0 && !fall_.empty()) {
            auto& seg = fall_.back();
            if (seg.len <= right) {
                right -= seg.len;
                fall_len_ -= seg.len;
                fall_.pop_back();
            } else {
                seg.len -= right;
                fall_len_ -= right;
                right = 0.0;
            }
        }
        if (rise_.empty()) rise_len_ = 0.0;
        if (fall_.empty()) fall_len_ = 0.0;
    }

    double max_value() const noexcept { return max_; }
    double plateau_lo() const { return std::min(1.0, -1.0 + rise_len_); }
    double plateau_hi() const { return std::max(plateau_lo(), 1.0 - fall_len_); }

private:
    struct Segment {
        double len;
        double slope;  // stored relative to offset_
    };

    double actual(const Segment& s) const noexcept { return s.slope + offset_; }
    void push_back_rise(double len, double slope) {
        rise_.push_back({len, slope - offset_});
        rise_len_ += len;
    }
    void push_front_fall(double len, double slope) {
        fall_.push_front({len, slope - offset_});
        fall_len_ += len;
    }

    std::deque<Segment> rise_, fall_;
    double rise_len_ = 0.0, fall_len_ = 0.0;
    double offset_ = 0.0;
    double max_ = 0.0;
};

/// Moves z toward `anchor` until |z - anchor| <= gap holds in floating point.
inline double nudge_within(double z, double anchor, double gap) {
    while (std::abs(z - anchor) > gap) z = std::nextafter(z, anchor);
    return z;
}

}  // namespace detail

/// smCE with an optimal weight vector on the distinct predictions.
template <PredictionLabelDistribution D>
SmoothResult smce_detail(const D& dist) {
    const auto support = detail::aggregate_support(dist);
    const std::size_t d = support.size();

    // Forward pass: F_i(z) = c_i z + max_{|t - z| <= g_{i-1}} F_{i-1}(t).
    detail::ConcaveChain chain;
    std::vector<double> lo(d), hi(d);
    for (std::size_t i = 0; i < d; ++i) {
        if (i > 0) chain.widen(support[i].v - support[i - 1].v);
        chain.add_linear(support[i].residual);
        lo[i] = chain.plateau_lo();
        hi[i] = chain.plateau_hi();
    }

    // Backward pass: the maximizer within reach of z_{i+1} is the reachable
    // point nearest the flat top of F_i.
    SmoothResult out;
    out.witness.v.resize(d);
    out.witness.z.resize(d);
    for (std::size_t k = d; k-- > 0;) {
        out.witness.v[k] = support[k].v;
        if (k + 1 == d) {
            out.witness.z[k] = std::clamp(0.0, lo[k], hi[k]);
            continue;
        }
        const double next = out.witness.z[k + 1];
        const double gap = support[k + 1].v - support[k].v;
        double z = std::clamp(next, lo[k], hi[k]);
        z = std::clamp(z, next - gap, next + gap);
        z = std::clamp(detail::nudge_within(z, next, gap), -1.0, 1.0);
        out.witness.z[k] = z;
    }
    double objective = 0.0;
    for (std::size_t i = 0; i < d; ++i) objective += support[i].residual * out.witness.z[i];
    out.value = std::clamp(objective, 0.0, 1.0);
    return out;
}

template <PredictionLabelDistribution D>
double smce(const D& dist) {
    return smce_detail(dist).value;
}

namespace detail {

/// Columns of the dual of the pairwise program: slack a_i, slack b_i and one
/// multiplier per ordered pair (i, j) with cost |v_i - v_j|.
struct PairwiseSmoothColumns {
    std::vector<double> v;

    std::size_t columns() const { return 2 * v.size() + v.size() * (v.size() - 1); }
    double cost(std::size_t j) const {
        if (j < 2 * v.size()) return 1.0;
        const auto [a, b] = pair(j);
        return std::abs(v[a] - v[b]);
    }
    template <class F>
    void visit(std::size_t j, F&& f) const {
        if (j < v.size()) {
            f(j, 1.0);
        } else if (j < 2 * v.size()) {
            f(j - v.size(), -1.0);
        } else {
            const auto [a, b] = pair(j);
            f(a, 1.0);
            f(b, -1.0);
        }
    }

private:
    std::pair<std::size_t, std::size_t> pair(std::size_t j) const {
        const std::size_t k = j - 2 * v.size();
        const std::size_t d = v.size();
        const std::size_t a = k / (d - 1);
        std::size_t b = k % (d - 1);
        if (b >= a) ++b;
        return {a, b};
    }
};

}  // namespace detail

inline constexpr std::size_t kSmoothPairwiseCap = 500;

/// The smooth program with a Lipschitz constraint for every pair of points,
/// solved through its linear-programming dual. Quadratic size; test oracle.
template <PredictionLabelDistribution D>
double smce_full_pairwise(const D& dist) {
    if (dist.size() > kSmoothPairwiseCap) throw Error(ErrorKind::TooLarge, "pairwise program limited to 500 samples");
    const auto support = detail::aggregate_support(dist);
    const std::size_t d = support.size();
    if (d == 1) return std::abs(support[0].residual);

    detail::PairwiseSmoothColumns cols;
    std::vector<double> rhs(d);
    for (std::size_t i = 0; i < d; ++i) {
        cols.v.push_back(support[i].v);
        rhs[i] = support[i].residual;
    }
    RevisedSimplex<detail::PairwiseSmoothColumns> lp(cols, rhs);
    const auto sol = lp.solve();
    if (sol.status != LpStatus::Optimal) throw SolverFailure(sol.status, "pairwise smooth program");
    return std::max(0.0, sol.objective);
}

}  // namespace calib
