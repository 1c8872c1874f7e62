#pragma once

// Lower distance to calibration: the cheapest coupling E|u - v| between the
// prediction-label distribution and a perfectly calibrated one, restricted
// to calibrated values u on a finite grid.
//
// Predictions are first rounded to a grid of spacing eps1; the calibrated
// values range over those points plus {0,1}, refined to spacing eps2. Two
// equivalent programs are offered: the coupling program (revised simplex
// over implicit columns) and the reduced dual with adjacent Lipschitz rows
// (dense tableau).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "calib/core.hpp"
#include "calib/lp.hpp"

namespace calib {

/// Strictly increasing points of [0,1] containing both endpoints.
class Grid {
public:
    Grid(std::vector<double> points, double radius) : points_(std::move(points)), radius_(radius) {
        if (points_.size() < 2 || points_.front() != 0.0 || points_.back() != 1.0)
            throw Error(ErrorKind::BadConfig, "grid must contain 0 and 1");
        for (std::size_t i = 1; i < points_.size(); ++i) {
            if (!(points_[i] > points_[i - 1])) throw Error(ErrorKind::BadConfig, "grid must be strictly increasing");
            if (points_[i] - points_[i - 1] > radius_ * (1.0 + 1e-9))
                throw Error(ErrorKind::BadConfig, "grid spacing exceeds its covering radius");
        }
    }

    /// Union of `anchors` with {0,1}, with evenly spaced points inserted so
    /// consecutive spacing is at most `spacing`.
    static Grid refine(std::vector<double> anchors, double spacing) {
        anchors.push_back(0.0);
        anchors.push_back(1.0);
        std::sort(anchors.begin(), anchors.end());
        anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
        std::vector<double> pts{anchors.front()};
        for (std::size_t i = 1; i < anchors.size(); ++i) {
            const double a = anchors[i - 1], b = anchors[i];
            const auto pieces = static_cast<std::size_t>(std::max(1.0, std::ceil((b - a) / spacing - 1e-9)));
            for (std::size_t k = 1; k < pieces; ++k)
                pts.push_back(a + (b - a) * static_cast<double>(k) / static_cast<double>(pieces));
            pts.push_back(b);
        }
        return Grid(std::move(pts), spacing);
    }

    const std::vector<double>& points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }
    double operator[](std::size_t i) const { return points_[i]; }
    double radius() const noexcept { return radius_; }

    std::size_t index_of(double v) const {
        const auto it = std::lower_bound(points_.begin(), points_.end(), v);
        return static_cast<std::size_t>(std::distance(points_.begin(), it));
    }

private:
    std::vector<double> points_;
    double radius_;
};

enum class LdceForm { Primal, Dual };

inline const char* to_string(LdceForm f) { return f == LdceForm::Primal ? "primal" : "dual"; }

struct LdceConfig {
    double eps1 = 0.005;
    double eps2 = 0.005;
    LdceForm form = LdceForm::Primal;
};

/// Mass moved from support pair (v, y) to calibrated value u.
struct CouplingEntry {
    double u = 0.0;
    double v = 0.0;
    int y = 0;
    double mass = 0.0;
};

struct CouplingSolution {
    std::vector<CouplingEntry> entries;  // nonzero masses only
    double objective = 0.0;
};

/// r(v, y) per grid point and label, s(v) per grid point.
struct DualSolution {
    std::vector<double> grid;
    std::vector<double> r0, r1, s;
    double objective = 0.0;
};

struct LdceResult {
    double value = 0.0;
    LdceForm form = LdceForm::Primal;
    Grid grid{{0.0, 1.0}, 1.0};
    std::vector<WeightedSample> gamma;  // rounded support with masses
    std::optional<CouplingSolution> coupling;
    std::optional<DualSolution> dual;
};

namespace detail {

inline void check_ldce_eps(double eps1, double eps2) {
    if (!(eps1 > 0.0 && eps1 <= 0.5)) throw Error(ErrorKind::BadEps, "eps1 must lie in (0, 1/2]");
    if (!(eps2 > 0.0 && eps2 <= 0.5)) throw Error(ErrorKind::BadEps, "eps2 must lie in (0, 1/2]");
}

/// Rounded support pairs with aggregated masses, ordered by (v, y).
template <PredictionLabelDistribution D>
std::vector<WeightedSample> rounded_gamma(const D& dist, double eps1) {
    std::map<std::pair<double, int>, double> acc;
    for (std::size_t i = 0; i < dist.size(); ++i)
        acc[{round_value_to_grid(dist.prediction(i), eps1), dist.label(i)}] += dist.mass(i);
    std::vector<WeightedSample> out;
    for (const auto& [key, mass] : acc)
        if (mass > 0.0) out.push_back({key.first, key.second, mass});
    return out;
}

/// Columns Pi(u, pair): one unit in the pair's marginal row, and the
/// calibration coefficient (1 - u) or -u in the row of u.
struct CouplingColumns {
    const Grid* grid;
    const std::vector<WeightedSample>* pairs;

    std::size_t columns() const { return grid->size() * pairs->size(); }
    double cost(std::size_t j) const {
        const auto [u, p] = split(j);
        return std::abs((*grid)[u] - (*pairs)[p].v);
    }
    template <class F>
    void visit(std::size_t j, F&& f) const {
        const auto [u, p] = split(j);
        f(p, 1.0);
        const double uu = (*grid)[u];
        const double coef = (*pairs)[p].y == 1 ? 1.0 - uu : -uu;
        if (coef != 0.0) f(pairs->size() + u, coef);
    }
    std::pair<std::size_t, std::size_t> split(std::size_t j) const { return {j / pairs->size(), j % pairs->size()}; }
};

inline CouplingSolution solve_coupling(const Grid& grid, const std::vector<WeightedSample>& pairs) {
    CouplingColumns cols{&grid, &pairs};
    std::vector<double> rhs(pairs.size() + grid.size(), 0.0);
    for (std::size_t p = 0; p < pairs.size(); ++p) rhs[p] = pairs[p].mass;
    RevisedSimplex<CouplingColumns> lp(cols, rhs);
    const auto sol = lp.solve();
    if (sol.status != LpStatus::Optimal) throw SolverFailure(sol.status, "coupling program");
    CouplingSolution out;
    out.objective = sol.objective;
    for (std::size_t j = 0; j < sol.primal.size(); ++j) {
        if (sol.primal[j] <= 0.0) continue;
        const auto [u, p] = cols.split(j);
        out.entries.push_back({grid[u], pairs[p].v, pairs[p].y, sol.primal[j]});
    }
    return out;
}

inline DualSolution solve_reduced_dual(const Grid& grid, const std::vector<WeightedSample>& pairs) {
    // Shifted variables x = r + 1 and t = s + 1 keep every right-hand side
    // nonnegative. Columns: r(., 0) | r(., 1) | s.
    const std::size_t g = grid.size();
    const std::size_t vars = 3 * g;
    std::vector<double> c(vars, 0.0);
    for (const auto& p : pairs) c[(p.y == 1 ? g : 0) + grid.index_of(p.v)] += p.mass;

    std::vector<std::vector<double>> a;
    std::vector<double> b;
    auto row = [&](std::initializer_list<std::pair<std::size_t, double>> entries, double rhs) {
        std::vector<double> r(vars, 0.0);
        for (const auto& [j, val] : entries) r[j] += val;
        a.push_back(std::move(r));
        b.push_back(rhs);
    };
    for (std::size_t y = 0; y < 2; ++y) {
        for (std::size_t i = 0; i + 1 < g; ++i) {
            const double gap = grid[i + 1] - grid[i];
            row({{y * g + i, 1.0}, {y * g + i + 1, -1.0}}, gap);
            row({{y * g + i, -1.0}, {y * g + i + 1, 1.0}}, gap);
        }
    }
    for (std::size_t i = 0; i < g; ++i) {
        for (std::size_t y = 0; y < 2; ++y) {
            const double k = static_cast<double>(y) - grid[i];
            row({{y * g + i, 1.0}, {2 * g + i, -k}}, 1.0 - k);
        }
        row({{2 * g + i, 1.0}}, 2.0);
    }

    DenseSimplex lp(a, b, c);
    const auto sol = lp.solve();
    if (sol.status != LpStatus::Optimal) throw SolverFailure(sol.status, "reduced dual program");

    DualSolution out;
    out.grid = grid.points();
    out.r0.resize(g);
    out.r1.resize(g);
    out.s.resize(g);
    for (std::size_t i = 0; i < g; ++i) {
        out.r0[i] = sol.primal[i] - 1.0;
        out.r1[i] = sol.primal[g + i] - 1.0;
        out.s[i] = sol.primal[2 * g + i] - 1.0;
    }
    double total = 0.0;
    for (const auto& p : pairs) total += p.mass;
    out.objective = sol.objective - total;
    return out;
}

}  // namespace detail

template <PredictionLabelDistribution D>
LdceResult ldce_detail(const D& dist, const LdceConfig& cfg = {}) {
    detail::check_ldce_eps(cfg.eps1, cfg.eps2);
    LdceResult out;
    out.form = cfg.form;
    out.gamma = detail::rounded_gamma(dist, cfg.eps1);
    std::vector<double> anchors;
    for (const auto& p : out.gamma) anchors.push_back(p.v);
    out.grid = Grid::refine(std::move(anchors), cfg.eps2);
    if (cfg.form == LdceForm::Primal) {
        out.coupling = detail::solve_coupling(out.grid, out.gamma);
        out.value = out.coupling->objective;
    } else {
        out.dual = detail::solve_reduced_dual(out.grid, out.gamma);
        out.value = out.dual->objective;
    }
    out.value = std::clamp(out.value, 0.0, 1.0);
    return out;
}

template <PredictionLabelDistribution D>
double ldce(const D& dist, double eps1 = 0.005, double eps2 = 0.005, LdceForm form = LdceForm::Primal) {
    return ldce_detail(dist, LdceConfig{eps1, eps2, form}).value;
}

/// (coupling objective, reduced dual objective) on the same discretization.
template <PredictionLabelDistribution D>
std::pair<double, double> ldce_both_forms(const D& dist, double eps1 = 0.005, double eps2 = 0.005) {
    detail::check_ldce_eps(eps1, eps2);
    const auto gamma = detail::rounded_gamma(dist, eps1);
    std::vector<double> anchors;
    for (const auto& p : gamma) anchors.push_back(p.v);
    const auto grid = Grid::refine(std::move(anchors), eps2);
    return {detail::solve_coupling(grid, gamma).objective, detail::solve_reduced_dual(grid, gamma).objective};
}

}  // namespace calib
