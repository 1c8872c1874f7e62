#pragma once

// Exact ECE, binned ECE over an interval partition, and the width-penalized
// binned ECE that upper-bounds the distance to calibration.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "calib/core.hpp"

namespace calib {

/// Boundaries 0 = b_0 < b_1 < ... < b_m = 1. Interval j is [b_j, b_{j+1}),
/// the last one closed at 1.
class IntervalPartition {
public:
    explicit IntervalPartition(std::vector<double> boundaries) : boundaries_(std::move(boundaries)) {
        if (boundaries_.size() < 2) throw Error(ErrorKind::BadBins, "partition needs at least two boundaries");
        if (boundaries_.front() != 0.0 || boundaries_.back() != 1.0)
            throw Error(ErrorKind::BadBins, "partition must start at 0 and end at 1");
        for (std::size_t i = 1; i < boundaries_.size(); ++i)
            if (!(boundaries_[i] > boundaries_[i - 1]))
                throw Error(ErrorKind::BadBins, "partition boundaries must be strictly increasing");
    }

    const std::vector<double>& boundaries() const noexcept { return boundaries_; }
    std::size_t intervals() const noexcept { return boundaries_.size() - 1; }
    double width(std::size_t j) const { return boundaries_[j + 1] - boundaries_[j]; }

    std::size_t locate(double v) const {
        const auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), v);
        const auto j = static_cast<std::size_t>(std::distance(boundaries_.begin(), it));
        return std::min(j == 0 ? 0 : j - 1, intervals() - 1);
    }

private:
    std::vector<double> boundaries_;
};

inline IntervalPartition uniform_partition(int bins) {
    if (bins < 1) throw Error(ErrorKind::BadBins, "bins must be >= 1");
    std::vector<double> b(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) b[static_cast<std::size_t>(i)] = static_cast<double>(i) / bins;
    b.back() = 1.0;
    return IntervalPartition(std::move(b));
}

/// Expected calibration error with groups formed by exact prediction equality.
template <PredictionLabelDistribution D>
double ece(const D& dist) {
    double total = 0.0;
    for (const auto& p : detail::aggregate_support(dist)) total += std::abs(p.residual);
    return total;
}

struct BinnedEceResult {
    double value = 0.0;          // binned residual sum, plus the width term when requested
    double residual_term = 0.0;  // sum_j |E[(v - y) 1(v in I_j)]|
    double width_term = 0.0;     // mass-weighted average interval width
};

template <PredictionLabelDistribution D>
BinnedEceResult binned_ece_detail(const D& dist, const IntervalPartition& part, bool width_penalty) {
    const auto m = part.intervals();
    std::vector<double> residual(m, 0.0), mass(m, 0.0);
    for (std::size_t i = 0; i < dist.size(); ++i) {
        const auto j = part.locate(dist.prediction(i));
        residual[j] += dist.mass(i) * (dist.prediction(i) - dist.label(i));
        mass[j] += dist.mass(i);
    }
    BinnedEceResult r;
    for (std::size_t j = 0; j < m; ++j) {
        r.residual_term += std::abs(residual[j]);
        r.width_term += mass[j] * part.width(j);
    }
    r.value = r.residual_term + (width_penalty ? r.width_term : 0.0);
    return r;
}

template <PredictionLabelDistribution D>
double binned_ece(const D& dist, const IntervalPartition& part, bool width_penalty = false) {
    return binned_ece_detail(dist, part, width_penalty).value;
}

}  // namespace calib
