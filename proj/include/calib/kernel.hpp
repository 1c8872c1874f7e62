#pragma once

// Kernel calibration error for the Laplace kernel exp(-|u-v|) and the
// Gaussian kernel exp(-(u-v)^2):
//
//   kCE^2 = sum_{i,j} m_i m_j (y_i - v_i)(y_j - v_j) K(v_i, v_j).
//
// Exact evaluation avoids the n^2 double sum. For Laplace, sorting turns the
// sum into a first-order recursion. For Gaussian, expanding exp(2 x_i x_j)
// around 1/2 writes the form as a rapidly converging sum of squares. The
// literal double sum is kept as kce_quadratic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "calib/core.hpp"

namespace calib {

enum class KernelKind { Laplace, Gaussian };

inline const char* to_string(KernelKind k) { return k == KernelKind::Laplace ? "laplace" : "gaussian"; }

inline double kernel_value(KernelKind kind, double u, double v) {
    const double d = u - v;
    return kind == KernelKind::Laplace ? std::exp(-std::abs(d)) : std::exp(-d * d);
}

enum class KernelMode { Exact, Subsample, Fourier, Binning };

inline const char* to_string(KernelMode m) {
    switch (m) {
    case KernelMode::Exact: return "exact";
    case KernelMode::Subsample: return "subsample";
    case KernelMode::Fourier: return "fourier";
    case KernelMode::Binning: return "binning";
    }
    return "unknown";
}

struct KernelEstimatorConfig {
    KernelMode mode = KernelMode::Subsample;
    /// Sampled (i, j) terms; 0 selects 10 n.
    std::int64_t terms_m = 0;
    /// Fourier or binning draws; 0 selects ceil(10 / accuracy^2).
    std::int64_t reps_r = 0;
    /// Target accuracy on the squared value used for the default reps_r.
    double accuracy = 0.05;
    SeededRng rng{0};
};

inline std::int64_t default_kernel_reps(double accuracy) {
    if (!(accuracy > 0.0)) throw Error(ErrorKind::BadConfig, "accuracy must be positive");
    return static_cast<std::int64_t>(std::ceil(10.0 / (accuracy * accuracy)));
}

struct KernelEstimate {
    double value = 0.0;        // sqrt of the clamped squared estimate
    double squared = 0.0;      // clamped at 0
    double squared_raw = 0.0;  // as estimated; may be negative for subsample
    std::int64_t terms = 0;    // sampled terms or draws used
};

namespace detail {

/// Weighted residuals m_i (y_i - v_i) with predictions, in sorted order.
template <PredictionLabelDistribution D>
std::pair<std::vector<double>, std::vector<double>> sorted_residuals(const D& dist) {
    const auto order = sorted_order(dist);
    std::vector<double> v(order.size()), a(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto i = order[k];
        v[k] = dist.prediction(i);
        a[k] = dist.mass(i) * (static_cast<double>(dist.label(i)) - dist.prediction(i));
    }
    return {std::move(v), std::move(a)};
}

inline double laplace_form(const std::vector<double>& v, const std::vector<double>& a) {
    // A_j = sum_{i<j} a_i exp(-(v_j - v_i)), updated left to right.
    double total = 0.0, carry = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
        if (j > 0) carry = std::exp(-(v[j] - v[j - 1])) * (carry + a[j - 1]);
        total += a[j] * a[j] + 2.0 * a[j] * carry;
    }
    return total;
}

inline double gaussian_form(const std::vector<double>& v, const std::vector<double>& a) {
    // exp(-(x_i - x_j)^2) = e^{-x_i^2} e^{-x_j^2} sum_k 2^k x_i^k x_j^k / k!
    // with x = v - 1/2, so |2 x_i x_j| <= 1/2 and every term is a square.
    constexpr int kTerms = 40;
    std::vector<double> moment(kTerms, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = v[i] - 0.5;
        double w = a[i] * std::exp(-x * x);
        for (int k = 0; k < kTerms; ++k) {
            moment[static_cast<std::size_t>(k)] += w;
            w *= x;
        }
    }
    double total = 0.0, coef = 1.0;
    for (int k = 0; k < kTerms; ++k) {
        total += coef * moment[static_cast<std::size_t>(k)] * moment[static_cast<std::size_t>(k)];
        coef *= 2.0 / static_cast<double>(k + 1);
    }
    return total;
}

}  // namespace detail

/// Exact squared kernel calibration error, clamped at 0.
template <PredictionLabelDistribution D>
double kce_exact_squared(const D& dist, KernelKind kind) {
    const auto [v, a] = detail::sorted_residuals(dist);
    const double s = kind == KernelKind::Laplace ? detail::laplace_form(v, a) : detail::gaussian_form(v, a);
    return std::max(0.0, s);
}

template <PredictionLabelDistribution D>
double kce_exact(const D& dist, KernelKind kind) {
    return std::sqrt(kce_exact_squared(dist, kind));
}

inline constexpr std::size_t kQuadraticKernelCap = 20000;

/// The literal O(n^2) double sum; squared value clamped at 0.
template <PredictionLabelDistribution D>
double kce_quadratic(const D& dist, KernelKind kind, std::size_t cap = kQuadraticKernelCap) {
    if (dist.size() > cap) throw Error(ErrorKind::TooLarge, "quadratic kernel sum limited to " + std::to_string(cap) + " samples");
    const auto [v, a] = detail::sorted_residuals(dist);
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) total += a[i] * a[j] * kernel_value(kind, v[i], v[j]);
    return std::sqrt(std::max(0.0, total));
}

/// Squared draws of the randomized Laplace estimators, one per repetition.
/// Each draw lies in [0, 1] and has mean kCE^2.
template <PredictionLabelDistribution D>
std::vector<double> kce_squared_draws(const D& dist, KernelMode mode, std::int64_t reps, SeededRng& rng) {
    if (mode != KernelMode::Fourier && mode != KernelMode::Binning)
        throw Error(ErrorKind::BadConfig, "draws exist only for fourier and binning modes");
    if (reps < 1) throw Error(ErrorKind::BadConfig, "reps_r must be >= 1");
    const auto [v, a] = detail::sorted_residuals(dist);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(reps));
    for (std::int64_t r = 0; r < reps; ++r) {
        if (mode == KernelMode::Fourier) {
            const double omega = rng.cauchy();
            double re = 0.0, im = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) {
                re += a[i] * std::cos(omega * v[i]);
                im += a[i] * std::sin(omega * v[i]);
            }
            out.push_back(re * re + im * im);
        } else {
            const double delta = rng.gamma2();
            const double tau = rng.uniform() * delta;
            // Sorted predictions fill bins in order, so bins are runs.
            double total = 0.0, bin_sum = 0.0;
            double current = std::floor((v[0] + tau) / delta);
            for (std::size_t i = 0; i < v.size(); ++i) {
                const double bin = std::floor((v[i] + tau) / delta);
                if (bin != current) {
                    total += bin_sum * bin_sum;
                    bin_sum = 0.0;
                    current = bin;
                }
                bin_sum += a[i];
            }
            out.push_back(total + bin_sum * bin_sum);
        }
    }
    return out;
}

template <PredictionLabelDistribution D>
KernelEstimate kce_estimate_detail(const D& dist, KernelKind kind, const KernelEstimatorConfig& cfg) {
    KernelEstimate out;
    auto rng = cfg.rng;
    switch (cfg.mode) {
    case KernelMode::Exact:
        out.squared_raw = kce_exact_squared(dist, kind);
        out.terms = static_cast<std::int64_t>(dist.size());
        break;
    case KernelMode::Subsample: {
        if (cfg.terms_m < 0) throw Error(ErrorKind::BadConfig, "terms_m must be >= 1");
        const std::int64_t m = cfg.terms_m > 0 ? cfg.terms_m : 10 * static_cast<std::int64_t>(dist.size());
        const std::size_t n = dist.size();
        // Index sampling proportional to mass; uniform for empirical data.
        std::vector<double> cum;
        constexpr bool uniform = std::is_same_v<D, EmpiricalDistribution>;
        if constexpr (!uniform) {
            cum.resize(n);
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) cum[i] = acc += dist.mass(i);
        }
        auto draw = [&]() -> std::size_t {
            if constexpr (uniform) {
                return rng.index(n);
            } else {
                const auto it = std::upper_bound(cum.begin(), cum.end(), rng.uniform() * cum.back());
                return std::min(static_cast<std::size_t>(std::distance(cum.begin(), it)), n - 1);
            }
        };
        double acc = 0.0;
        for (std::int64_t t = 0; t < m; ++t) {
            const auto i = draw();
            const auto j = draw();
            const double ri = static_cast<double>(dist.label(i)) - dist.prediction(i);
            const double rj = static_cast<double>(dist.label(j)) - dist.prediction(j);
            acc += ri * rj * kernel_value(kind, dist.prediction(i), dist.prediction(j));
        }
        out.squared_raw = acc / static_cast<double>(m);
        out.terms = m;
        break;
    }
    case KernelMode::Fourier:
    case KernelMode::Binning: {
        if (kind != KernelKind::Laplace)
            throw Error(ErrorKind::ModeKindMismatch, std::string(to_string(cfg.mode)) + " mode requires the laplace kernel");
        if (cfg.reps_r < 0) throw Error(ErrorKind::BadConfig, "reps_r must be >= 1");
        const std::int64_t reps = cfg.reps_r > 0 ? cfg.reps_r : default_kernel_reps(cfg.accuracy);
        const auto draws = kce_squared_draws(dist, cfg.mode, reps, rng);
        double acc = 0.0;
        for (double d : draws) acc += d;
        out.squared_raw = acc / static_cast<double>(reps);
        out.terms = reps;
        break;
    }
    }
    out.squared = std::max(0.0, out.squared_raw);
    out.value = std::sqrt(out.squared);
    return out;
}

template <PredictionLabelDistribution D>
double kce_estimate(const D& dist, KernelKind kind, const KernelEstimatorConfig& cfg) {
    return kce_estimate_detail(dist, kind, cfg).value;
}

/// Monte Carlo estimates of E[cos(omega d)] with omega ~ Cauchy(1), and of
/// the probability that 0 and d share a random bin of width Gamma(2,1) and
/// uniform offset. Both equal exp(-d).
inline std::pair<double, double> kernel_identity_check(double d, std::int64_t reps, SeededRng& rng) {
    if (!(d >= 0.0)) throw Error(ErrorKind::BadConfig, "distance must be nonnegative");
    if (reps < 1) throw Error(ErrorKind::BadConfig, "reps must be >= 1");
    double cos_sum = 0.0;
    std::int64_t same = 0;
    for (std::int64_t r = 0; r < reps; ++r) cos_sum += std::cos(rng.cauchy() * d);
    for (std::int64_t r = 0; r < reps; ++r) {
        const double delta = rng.gamma2();
        const double tau = rng.uniform() * delta;
        if (std::floor(tau / delta) == std::floor((d + tau) / delta)) ++same;
    }
    const auto n = static_cast<double>(reps);
    return {cos_sum / n, static_cast<double>(same) / n};
}

}  // namespace calib
