#pragma once

// Synthetic families and small finite constructions with known calibration
// behavior, plus brute-force oracles for the true distance to calibration and
// the post-processing upper distance.
//
// A finite problem lists domain points with their mass, the Bayes value
// E[y|x] and the predictor value f(x). Oracles run on these exact
// populations rather than on samples.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "calib/core.hpp"

namespace calib {

struct FinitePoint {
    double mass = 0.0;
    double f_star = 0.0;  // E[y | x]
    double f = 0.0;       // predictor value
};

class FiniteProblem {
public:
    explicit FiniteProblem(std::vector<FinitePoint> points) : points_(std::move(points)) {
        if (points_.empty()) throw Error(ErrorKind::EmptyInput, "problem needs at least one point");
        long double total = 0.0L;
        for (const auto& p : points_) {
            if (!(p.mass > 0.0)) throw Error(ErrorKind::BadConfig, "point masses must be positive");
            if (!(p.f_star >= 0.0 && p.f_star <= 1.0)) throw Error(ErrorKind::OutOfRange, "Bayes value outside [0,1]");
            if (!(p.f >= 0.0 && p.f <= 1.0)) throw Error(ErrorKind::OutOfRange, "predictor value outside [0,1]");
            total += p.mass;
        }
        if (std::abs(static_cast<double>(total - 1.0L)) > 1e-12) throw Error(ErrorKind::BadConfig, "masses must sum to 1");
    }

    const std::vector<FinitePoint>& points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }

private:
    std::vector<FinitePoint> points_;
};

// ---------------------------------------------------------------------------
// Synthetic families
// ---------------------------------------------------------------------------

struct SyntheticConfig {
    double beta = 1.0;
    std::size_t n = 10000;
    SeededRng rng{0};
};

/// f^beta / (f^beta + (1-f)^beta).
inline double temperature_map(double f, double beta) {
    if (f <= 0.0) return 0.0;
    if (f >= 1.0) return 1.0;
    return 1.0 / (1.0 + std::pow((1.0 - f) / f, beta));
}

/// f ~ Unif[0,1], y ~ Bernoulli(f), prediction temperature_map(f, beta).
inline EmpiricalDistribution gen_dbeta(const SyntheticConfig& cfg) {
    if (!(cfg.beta > 0.0)) throw Error(ErrorKind::BadConfig, "beta must be positive");
    if (cfg.n < 1) throw Error(ErrorKind::BadConfig, "n must be >= 1");
    auto rng = cfg.rng;
    std::vector<Sample> out;
    out.reserve(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const double f = rng.uniform();
        const int y = rng.bernoulli(f) ? 1 : 0;
        out.push_back({temperature_map(f, cfg.beta), y});
    }
    return EmpiricalDistribution(std::move(out));
}

struct GaussGapConfig {
    double eps = 0.05;
    std::size_t n = 100000;
    SeededRng rng{0};
};

/// h(t) = cos(t / eps) exp(-t^2 / eps).
inline double gauss_gap_h(double t, double eps) { return std::cos(t / eps) * std::exp(-t * t / eps); }

/// P(y = 1 | v) = v + h(v - 1/2) / 4.
inline double gauss_gap_probability(double v, double eps) { return v + gauss_gap_h(v - 0.5, eps) / 4.0; }

/// v ~ Unif[1/4, 3/4] with an oscillating residual that a Gaussian kernel
/// barely sees but a Lipschitz weight does.
inline EmpiricalDistribution gen_gauss_gap(const GaussGapConfig& cfg) {
    if (!(cfg.eps > 0.0 && cfg.eps < 0.25)) throw Error(ErrorKind::BadEps, "eps must lie in (0, 1/4)");
    if (cfg.n < 1) throw Error(ErrorKind::BadConfig, "n must be >= 1");
    auto rng = cfg.rng;
    std::vector<Sample> out;
    out.reserve(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const double v = 0.25 + 0.5 * rng.uniform();
        out.push_back({v, rng.bernoulli(gauss_gap_probability(v, cfg.eps)) ? 1 : 0});
    }
    return EmpiricalDistribution(std::move(out));
}

// ---------------------------------------------------------------------------
// Finite constructions
// ---------------------------------------------------------------------------

/// Domain {00, 01, 10, 11} with masses alpha, 1/2 - alpha, 1/2 - alpha, alpha
/// and f = 1/2 + alpha when x1 = 0, 1/2 - alpha when x1 = 1. The first
/// problem has E[y|x] = (x1 + x2)/2, the second E[y|x] = 1/2 -+ alpha by x1.
/// Both induce the same prediction-label distribution.
inline std::pair<FiniteProblem, FiniteProblem> gap_pa_pair(double alpha) {
    if (!(alpha > 0.0 && alpha <= 0.5)) throw Error(ErrorKind::BadAlpha, "alpha must lie in (0, 1/2]");
    const double lo = 0.5 - alpha, hi = 0.5 + alpha;
    std::vector<FinitePoint> p1{{alpha, 0.0, hi}, {lo, 0.5, hi}, {lo, 0.5, lo}, {alpha, 1.0, lo}};
    std::vector<FinitePoint> p2{{alpha, lo, hi}, {lo, lo, hi}, {lo, hi, lo}, {alpha, hi, lo}};
    if (lo == 0.0) {  // alpha = 1/2 leaves only the two outer points
        std::erase_if(p1, [](const FinitePoint& p) { return p.mass == 0.0; });
        std::erase_if(p2, [](const FinitePoint& p) { return p.mass == 0.0; });
    }
    return {FiniteProblem(std::move(p1)), FiniteProblem(std::move(p2))};
}

/// The first problem of gap_pa_pair with predictions spread by beta = alpha/2:
/// f = 1/2 + alpha + beta, 1/2 + alpha, 1/2 - alpha, 1/2 - alpha - beta.
inline FiniteProblem gap_quadratic(double alpha) {
    if (!(alpha > 0.0 && alpha < 0.25)) throw Error(ErrorKind::BadAlpha, "alpha must lie in (0, 1/4)");
    const double beta = alpha / 2.0;
    const double m = 0.5 - alpha;
    return FiniteProblem({{alpha, 0.0, 0.5 + alpha + beta},
                          {m, 0.5, 0.5 + alpha},
                          {m, 0.5, 0.5 - alpha},
                          {alpha, 1.0, 0.5 - alpha - beta}});
}

/// Four equally likely points with alpha = 1/6, beta = 1/48. The first
/// predictor puts the middle points at 1/2; the second splits them to
/// 1/2 -+ eps. Bayes values are shared.
inline std::pair<FiniteProblem, FiniteProblem> discontinuity_pair(double eps) {
    if (!(eps > 0.0 && eps < 1.0 / 48.0)) throw Error(ErrorKind::BadEps, "eps must lie in (0, 1/48)");
    const double alpha = 1.0 / 6.0, beta = 1.0 / 48.0;
    const double fs[4] = {0.5 - beta + alpha, 0.5 - eps - alpha, 0.5 + eps + 2.0 * alpha, 0.5 + beta - 2.0 * alpha};
    const double f1[4] = {0.5 - beta, 0.5, 0.5, 0.5 + beta};
    const double f2[4] = {0.5 - beta, 0.5 - eps, 0.5 + eps, 0.5 + beta};
    std::vector<FinitePoint> p1, p2;
    for (int i = 0; i < 4; ++i) {
        p1.push_back({0.25, fs[i], f1[i]});
        p2.push_back({0.25, fs[i], f2[i]});
    }
    return {FiniteProblem(std::move(p1)), FiniteProblem(std::move(p2))};
}

/// Two equally likely points with Bayes values 0 and 1 and predictions
/// 1/2 - eps and 1/2 + eps: ECE is 1/2 - eps while the constant 1/2 is
/// within eps.
inline FiniteProblem f_eps_problem(double eps) {
    if (!(eps > 0.0 && eps < 0.5)) throw Error(ErrorKind::BadEps, "eps must lie in (0, 1/2)");
    return FiniteProblem({{0.5, 0.0, 0.5 - eps}, {0.5, 1.0, 0.5 + eps}});
}

// ---------------------------------------------------------------------------
// Induced prediction-label distributions
// ---------------------------------------------------------------------------

/// Draws x by mass, y ~ Bernoulli(E[y|x]) and emits (f(x), y).
inline EmpiricalDistribution induce_gamma(const FiniteProblem& prob, std::size_t n, SeededRng& rng) {
    if (n < 1) throw Error(ErrorKind::BadConfig, "n must be >= 1");
    std::vector<double> cum;
    double acc = 0.0;
    for (const auto& p : prob.points()) cum.push_back(acc += p.mass);
    std::vector<Sample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto it = std::upper_bound(cum.begin(), cum.end(), rng.uniform() * cum.back());
        const auto k = std::min(static_cast<std::size_t>(std::distance(cum.begin(), it)), cum.size() - 1);
        const auto& p = prob.points()[k];
        out.push_back({p.f, rng.bernoulli(p.f_star) ? 1 : 0});
    }
    return EmpiricalDistribution(std::move(out));
}

/// The population distribution of (f(x), y), one entry per (v, y) with
/// positive mass, ordered by (v, y). Masses and conditional means are
/// accumulated in extended precision and the mean is rounded before the split
/// into labels, so problems with the same conditional means agree bitwise.
inline WeightedDistribution induce_gamma_exact(const FiniteProblem& prob) {
    std::map<double, std::pair<long double, long double>> acc;  // v -> (mass, label mass)
    for (const auto& p : prob.points()) {
        auto& [mass, label] = acc[p.f];
        mass += static_cast<long double>(p.mass);
        label += static_cast<long double>(p.mass) * static_cast<long double>(p.f_star);
    }
    std::vector<WeightedSample> out;
    for (const auto& [v, ml] : acc) {
        const auto mass = ml.first;
        const auto mean = static_cast<long double>(static_cast<double>(ml.second / mass));
        const double label = static_cast<double>(mass * mean);
        const double rest = static_cast<double>(mass - mass * mean);
        if (rest > 0.0) out.push_back({v, 0, rest});
        if (label > 0.0) out.push_back({v, 1, label});
    }
    return WeightedDistribution(std::move(out));
}

// ---------------------------------------------------------------------------
// Brute-force oracles
// ---------------------------------------------------------------------------

inline constexpr std::size_t kBruteForceCap = 10;

/// Calls visit(labels, blocks) for every set partition of {0..n-1}, given as
/// a restricted growth string.
template <class F>
void for_each_set_partition(std::size_t n, F&& visit) {
    if (n == 0) return;
    std::vector<std::size_t> a(n, 0), maxes(n, 0);  // maxes[i] = max(a[0..i-1])
    for (;;) {
        std::size_t blocks = 0;
        for (auto x : a) blocks = std::max(blocks, x + 1);
        visit(static_cast<const std::vector<std::size_t>&>(a), blocks);
        // Next string: bump the rightmost position that can still grow.
        std::size_t i = n;
        while (i-- > 1) {
            if (a[i] <= maxes[i]) break;
        }
        if (i == 0) return;
        ++a[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            maxes[j] = std::max(maxes[j - 1], a[j - 1]);
            a[j] = 0;
        }
    }
}

namespace detail {

/// Minimum over set partitions of sum_i m_i |f_i - mean_block(fs)|.
inline double partition_oracle(const std::vector<long double>& mass, const std::vector<long double>& label_mass,
                               const std::vector<long double>& f) {
    const std::size_t n = mass.size();
    long double best = std::numeric_limits<long double>::infinity();
    std::vector<long double> bm(n), bl(n);
    for_each_set_partition(n, [&](const std::vector<std::size_t>& a, std::size_t blocks) {
        std::fill(bm.begin(), bm.begin() + static_cast<std::ptrdiff_t>(blocks), 0.0L);
        std::fill(bl.begin(), bl.begin() + static_cast<std::ptrdiff_t>(blocks), 0.0L);
        for (std::size_t i = 0; i < n; ++i) {
            bm[a[i]] += mass[i];
            bl[a[i]] += label_mass[i];
        }
        long double cost = 0.0L;
        for (std::size_t i = 0; i < n; ++i) cost += mass[i] * std::abs(f[i] - bl[a[i]] / bm[a[i]]);
        best = std::min(best, cost);
    });
    return static_cast<double>(best);
}

}  // namespace detail

/// True distance to calibration of a finite problem: every calibrated
/// predictor is the block-wise Bayes mean of some partition of the domain.
inline double dce_bruteforce(const FiniteProblem& prob) {
    if (prob.size() > kBruteForceCap) throw Error(ErrorKind::TooLarge, "brute force limited to 10 points");
    std::vector<long double> mass, label, f;
    for (const auto& p : prob.points()) {
        mass.push_back(p.mass);
        label.push_back(static_cast<long double>(p.mass) * static_cast<long double>(p.f_star));
        f.push_back(p.f);
    }
    return detail::partition_oracle(mass, label, f);
}

/// Upper distance: best calibrated post-processing of the predictions, over
/// all partitions of the distinct predicted values.
template <PredictionLabelDistribution D>
double udce_bruteforce(const D& dist) {
    std::map<double, std::pair<long double, long double>> acc;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        auto& [mass, label] = acc[dist.prediction(i)];
        mass += dist.mass(i);
        if (dist.label(i) == 1) label += dist.mass(i);
    }
    if (acc.size() > kBruteForceCap) throw Error(ErrorKind::TooLarge, "brute force limited to 10 distinct predictions");
    std::vector<long double> mass, label, f;
    for (const auto& [v, ml] : acc) {
        f.push_back(v);
        mass.push_back(ml.first);
        label.push_back(ml.second);
    }
    return detail::partition_oracle(mass, label, f);
}

}  // namespace calib
