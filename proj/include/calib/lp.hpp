#pragma once

// Linear-programming engines behind the smooth calibration and lower-distance
// programs.
//
//  * DenseSimplex: tableau simplex for  max c.x  s.t.  A x <= b, x >= 0.
//    Suited to programs with a few hundred columns.
//  * RevisedSimplex: two-phase revised simplex for  min c.x  s.t.  A x = b,
//    x >= 0, with an explicit dense basis inverse and columns produced on
//    demand by a column source. Suited to few rows and very many sparse
//    columns (transport-like couplings, pairwise constraint duals).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "calib/core.hpp"

namespace calib {

enum class LpStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

inline const char* to_string(LpStatus s) {
    switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::NumericalFailure: return "numerical-failure";
    }
    return "unknown";
}

struct LinearProgramSolution {
    double objective = 0.0;
    std::vector<double> primal;
    std::vector<double> dual;  // one multiplier per constraint row
    LpStatus status = LpStatus::NumericalFailure;
    std::size_t iterations = 0;
};

class SolverFailure : public Error {
public:
    explicit SolverFailure(LpStatus status, const std::string& what = {})
        : Error(ErrorKind::SolverFailure, std::string(to_string(status)) + (what.empty() ? "" : ": " + what)),
          status_(status) {}

    LpStatus status() const noexcept { return status_; }

private:
    LpStatus status_;
};

// ---------------------------------------------------------------------------
// Dense tableau simplex
// ---------------------------------------------------------------------------

/// max c.x  s.t.  A x <= b, x >= 0. Rows of `a` have c.size() entries.
/// Entering columns use Dantzig's rule with index tie-breaking; the leaving
/// row is the minimum ratio, ties broken by basic variable index. A phase-one
/// pass handles negative right-hand sides.
class DenseSimplex {
public:
    DenseSimplex(const std::vector<std::vector<double>>& a, std::span<const double> b, std::span<const double> c,
                 double eps = 1e-10)
        : m_(static_cast<int>(b.size())),
          n_(static_cast<int>(c.size())),
          eps_(eps),
          nonbasic_(static_cast<std::size_t>(n_) + 1),
          basic_(static_cast<std::size_t>(m_)),
          d_(static_cast<std::size_t>(m_) + 2, std::vector<double>(static_cast<std::size_t>(n_) + 2, 0.0)) {
        for (int i = 0; i < m_; ++i)
            for (int j = 0; j < n_; ++j) at(i, j) = a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        for (int i = 0; i < m_; ++i) {
            basic_[static_cast<std::size_t>(i)] = n_ + i;
            at(i, n_) = -1.0;
            at(i, n_ + 1) = b[static_cast<std::size_t>(i)];
        }
        for (int j = 0; j < n_; ++j) {
            nonbasic_[static_cast<std::size_t>(j)] = j;
            at(m_, j) = -c[static_cast<std::size_t>(j)];
        }
        nonbasic_[static_cast<std::size_t>(n_)] = -1;
        at(m_ + 1, n_) = 1.0;
    }

    LinearProgramSolution solve(std::size_t max_iterations = 1'000'000) {
        LinearProgramSolution out;
        max_iterations_ = max_iterations;
        int r = 0;
        for (int i = 1; i < m_; ++i)
            if (at(i, n_ + 1) < at(r, n_ + 1)) r = i;
        if (m_ > 0 && at(r, n_ + 1) < -eps_) {
            pivot(r, n_);
            const auto phase1 = run(2);
            if (phase1 == LpStatus::NumericalFailure) return fail(out, phase1);
            if (phase1 != LpStatus::Optimal || at(m_ + 1, n_ + 1) < -eps_) return fail(out, LpStatus::Infeasible);
            for (int i = 0; i < m_; ++i) {
                if (basic_[static_cast<std::size_t>(i)] != -1) continue;
                int s = 0;
                for (int j = 1; j <= n_; ++j)
                    if (better(at(i, j), j, at(i, s), s)) s = j;
                pivot(i, s);
            }
        }
        const auto status = run(1);
        if (status != LpStatus::Optimal) return fail(out, status);

        out.status = LpStatus::Optimal;
        out.iterations = iterations_;
        out.objective = at(m_, n_ + 1);
        out.primal.assign(static_cast<std::size_t>(n_), 0.0);
        for (int i = 0; i < m_; ++i)
            if (basic_[static_cast<std::size_t>(i)] >= 0 && basic_[static_cast<std::size_t>(i)] < n_)
                out.primal[static_cast<std::size_t>(basic_[static_cast<std::size_t>(i)])] = at(i, n_ + 1);
        // The reduced cost of a nonbasic slack is the multiplier of its row.
        out.dual.assign(static_cast<std::size_t>(m_), 0.0);
        for (int j = 0; j <= n_; ++j) {
            const int var = nonbasic_[static_cast<std::size_t>(j)];
            if (var >= n_) out.dual[static_cast<std::size_t>(var - n_)] = at(m_, j);
        }
        return out;
    }

private:
    double& at(int i, int j) { return d_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]; }

    bool better(double x, int j, double y, int s) const {
        const int nj = nonbasic_[static_cast<std::size_t>(j)];
        const int ns = nonbasic_[static_cast<std::size_t>(s)];
        return x < y || (x == y && nj < ns);
    }

    LinearProgramSolution& fail(LinearProgramSolution& out, LpStatus status) const {
        out.status = status;
        out.iterations = iterations_;
        return out;
    }

    void pivot(int r, int s) {
        auto& row = d_[static_cast<std::size_t>(r)];
        const double inv = 1.0 / row[static_cast<std::size_t>(s)];
        for (int i = 0; i < m_ + 2; ++i) {
            if (i == r) continue;
            auto& other = d_[static_cast<std::size_t>(i)];
            if (std::abs(other[static_cast<std::size_t>(s)]) <= eps_ * 1e-3) continue;
            const double f = other[static_cast<std::size_t>(s)] * inv;
            for (int j = 0; j < n_ + 2; ++j) other[static_cast<std::size_t>(j)] -= row[static_cast<std::size_t>(j)] * f;
            other[static_cast<std::size_t>(s)] = row[static_cast<std::size_t>(s)] * f;
        }
        for (int j = 0; j < n_ + 2; ++j)
            if (j != s) row[static_cast<std::size_t>(j)] *= inv;
        for (int i = 0; i < m_ + 2; ++i)
            if (i != r) at(i, s) *= -inv;
        row[static_cast<std::size_t>(s)] = inv;
        std::swap(basic_[static_cast<std::size_t>(r)], nonbasic_[static_cast<std::size_t>(s)]);
        ++iterations_;
    }

    LpStatus run(int phase) {
        const int x = m_ + phase - 1;
        for (;;) {
            if (iterations_ > max_iterations_) return LpStatus::NumericalFailure;
            int s = -1;
            for (int j = 0; j <= n_; ++j) {
                if (nonbasic_[static_cast<std::size_t>(j)] == -phase) continue;
                if (s == -1 || better(at(x, j), j, at(x, s), s)) s = j;
            }
            if (at(x, s) >= -eps_) return LpStatus::Optimal;
            int r = -1;
            for (int i = 0; i < m_; ++i) {
                if (at(i, s) <= eps_) continue;
                if (r == -1) {
                    r = i;
                    continue;
                }
                const double lhs = at(i, n_ + 1) / at(i, s);
                const double rhs = at(r, n_ + 1) / at(r, s);
                if (lhs < rhs || (lhs == rhs && basic_[static_cast<std::size_t>(i)] < basic_[static_cast<std::size_t>(r)]))
                    r = i;
            }
            if (r == -1) return LpStatus::Unbounded;
            pivot(r, s);
        }
    }

    int m_, n_;
    double eps_;
    std::vector<int> nonbasic_, basic_;
    std::vector<std::vector<double>> d_;
    std::size_t iterations_ = 0;
    std::size_t max_iterations_ = 0;
};

// ---------------------------------------------------------------------------
// Revised simplex over implicit sparse columns
// ---------------------------------------------------------------------------

/// A column source enumerates structural columns of A together with costs.
/// `visit(j, f)` calls f(row, value) for every nonzero of column j.
template <class S>
concept ColumnSource = requires(const S& s, std::size_t j) {
    { s.columns() } -> std::convertible_to<std::size_t>;
    { s.cost(j) } -> std::convertible_to<double>;
    s.visit(j, [](std::size_t, double) {});
};

struct RevisedSimplexOptions {
    double optimality_tol = 1e-11;
    double pivot_tol = 1e-9;
    double feasibility_tol = 1e-10;
    std::size_t refactor_every = 1000;
    std::size_t max_iterations = 2'000'000;
    std::size_t degenerate_before_bland = 50;
};

template <ColumnSource Source>
class RevisedSimplex {
public:
    RevisedSimplex(const Source& source, std::span<const double> b, RevisedSimplexOptions options = {})
        : src_(source), b_(b.begin(), b.end()), opt_(options), m_(b.size()), n_(source.columns()) {}

    /// min c.x  s.t.  A x = b, x >= 0.
    LinearProgramSolution solve() {
        LinearProgramSolution out;
        init_artificial_basis();

        double initial = 0.0;
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] >= n_) initial += x_[i];
        auto status = initial > 0.0 ? run(/*phase=*/1) : LpStatus::Optimal;
        if (status != LpStatus::Optimal) return finish(out, status == LpStatus::Unbounded ? LpStatus::NumericalFailure : status);
        double infeasibility = 0.0;
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] >= n_) infeasibility += x_[i];
        const double scale = 1.0 + max_abs_b();
        if (infeasibility > 1e-9 * scale) return finish(out, LpStatus::Infeasible);

        status = run(/*phase=*/2);
        if (status != LpStatus::Optimal) return finish(out, status);

        out.primal.assign(n_, 0.0);
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] < n_) out.primal[basis_[i]] = std::max(0.0, x_[i]);
        out.objective = 0.0;
        for (std::size_t j = 0; j < n_; ++j)
            if (out.primal[j] != 0.0) out.objective += src_.cost(j) * out.primal[j];
        out.dual = y_;
        return finish(out, LpStatus::Optimal);
    }

private:
    LinearProgramSolution& finish(LinearProgramSolution& out, LpStatus status) const {
        out.status = status;
        out.iterations = iterations_;
        return out;
    }

    double max_abs_b() const {
        double m = 0.0;
        for (double v : b_) m = std::max(m, std::abs(v));
        return m;
    }

    // Artificial j >= n_ is sign_[j - n_] * e_{j - n_}.
    void init_artificial_basis() {
        sign_.assign(m_, 1.0);
        basis_.resize(m_);
        in_basis_.assign(n_ + m_, false);
        x_.resize(m_);
        binv_.assign(m_ * m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            sign_[i] = b_[i] < 0.0 ? -1.0 : 1.0;
            basis_[i] = n_ + i;
            in_basis_[n_ + i] = true;
            x_[i] = std::abs(b_[i]);
            binv_[i * m_ + i] = sign_[i];
        }
        // Crash: a structural column that is a positive multiple of e_i
        // replaces the artificial of row i.
        for (std::size_t j = 0; j < n_; ++j) {
            std::size_t count = 0, row = 0;
            double value = 0.0;
            src_.visit(j, [&](std::size_t r, double v) {
                if (v == 0.0) return;
                ++count;
                row = r;
                value = v;
            });
            if (count != 1 || value <= 0.0 || b_[row] < 0.0 || basis_[row] < n_) continue;
            in_basis_[basis_[row]] = false;
            basis_[row] = j;
            in_basis_[j] = true;
            x_[row] = b_[row] / value;
            binv_[row * m_ + row] = 1.0 / value;
        }
    }

    double phase_cost(std::size_t j, int phase) const {
        if (j >= n_) return phase == 1 ? 1.0 : 0.0;
        return phase == 1 ? 0.0 : src_.cost(j);
    }

    template <class F>
    void visit_column(std::size_t j, F&& f) const {
        if (j >= n_) {
            f(j - n_, sign_[j - n_]);
            return;
        }
        src_.visit(j, f);
    }

    void compute_duals(int phase) {
        y_.assign(m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            const double cb = phase_cost(basis_[i], phase);
            if (cb == 0.0) continue;
            const double* row = &binv_[i * m_];
            for (std::size_t k = 0; k < m_; ++k) y_[k] += cb * row[k];
        }
    }

    double reduced_cost(std::size_t j, int phase) const {
        double d = phase_cost(j, phase);
        visit_column(j, [&](std::size_t row, double value) { d -= y_[row] * value; });
        return d;
    }

    /// Entering column (n_ + m_ when the phase is optimal) and its reduced cost.
    std::pair<std::size_t, double> price(int phase, bool bland) const {
        std::size_t best = n_ + m_;
        double best_d = -opt_.optimality_tol;
        for (std::size_t j = 0; j < n_; ++j) {
            if (in_basis_[j]) continue;
            const double d = reduced_cost(j, phase);
            if (d < best_d) {
                best_d = d;
                best = j;
                if (bland) break;
            }
        }
        return {best, best_d};
    }

    void ftran(std::size_t j, std::vector<double>& w) const {
        w.assign(m_, 0.0);
        visit_column(j, [&](std::size_t row, double value) {
            for (std::size_t i = 0; i < m_; ++i) w[i] += binv_[i * m_ + row] * value;
        });
    }

    bool refactor() {
        // Gauss-Jordan inversion of the current basis matrix.
        std::vector<double> a(m_ * m_, 0.0);
        for (std::size_t c = 0; c < m_; ++c)
            visit_column(basis_[c], [&](std::size_t row, double value) { a[row * m_ + c] = value; });
        std::vector<double> inv(m_ * m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) inv[i * m_ + i] = 1.0;
        for (std::size_t col = 0; col < m_; ++col) {
            std::size_t piv = col;
            for (std::size_t r = col + 1; r < m_; ++r)
                if (std::abs(a[r * m_ + col]) > std::abs(a[piv * m_ + col])) piv = r;
            if (std::abs(a[piv * m_ + col]) < 1e-13) return false;
            if (piv != col) {
                for (std::size_t k = 0; k < m_; ++k) {
                    std::swap(a[piv * m_ + k], a[col * m_ + k]);
                    std::swap(inv[piv * m_ + k], inv[col * m_ + k]);
                }
            }
            const double p = 1.0 / a[col * m_ + col];
            for (std::size_t k = 0; k < m_; ++k) {
                a[col * m_ + k] *= p;
                inv[col * m_ + k] *= p;
            }
            for (std::size_t r = 0; r < m_; ++r) {
                if (r == col) continue;
                const double f = a[r * m_ + col];
                if (f == 0.0) continue;
                for (std::size_t k = 0; k < m_; ++k) {
                    a[r * m_ + k] -= f * a[col * m_ + k];
                    inv[r * m_ + k] -= f * inv[col * m_ + k];
                }
            }
        }
        binv_ = std::move(inv);
        for (std::size_t i = 0; i < m_; ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k < m_; ++k) acc += binv_[i * m_ + k] * b_[k];
            x_[i] = std::abs(acc) < opt_.feasibility_tol ? 0.0 : acc;
        }
        return true;
    }

    LpStatus run(int phase) {
        std::vector<double> w;
        std::size_t since_refactor = 0;
        std::size_t degenerate = 0;
        bool bland = false;
        bool fresh = phase == 1;  // the initial artificial basis inverse is exact
        compute_duals(phase);
        for (;;) {
            if (iterations_ > opt_.max_iterations) return LpStatus::NumericalFailure;
            if (since_refactor >= opt_.refactor_every) {
                if (!refactor()) return LpStatus::NumericalFailure;
                compute_duals(phase);
                since_refactor = 0;
                fresh = true;
            }
            const auto [q, dq] = price(phase, bland);
            if (q == n_ + m_) {
                // Confirm optimality against a freshly factored basis.
                if (fresh) return LpStatus::Optimal;
                if (!refactor()) return LpStatus::NumericalFailure;
                compute_duals(phase);
                since_refactor = 0;
                fresh = true;
                continue;
            }
            ftran(q, w);

            // Phase two keeps artificials at zero: any basic artificial the
            // column touches leaves first.
            std::size_t r = m_;
            if (phase == 2) {
                double best = opt_.pivot_tol;
                for (std::size_t i = 0; i < m_; ++i)
                    if (basis_[i] >= n_ && std::abs(w[i]) > best) {
                        best = std::abs(w[i]);
                        r = i;
                    }
            }
            if (r == m_) {
                if (bland) {
                    double best_ratio = std::numeric_limits<double>::infinity();
                    for (std::size_t i = 0; i < m_; ++i) {
                        if (w[i] <= opt_.pivot_tol) continue;
                        const double ratio = std::max(0.0, x_[i]) / w[i];
                        if (ratio < best_ratio || (ratio == best_ratio && basis_[i] < basis_[r])) {
                            best_ratio = ratio;
                            r = i;
                        }
                    }
                } else {
                    // Harris two-pass ratio test: bound the step with relaxed
                    // feasibility, then take the largest pivot under the bound.
                    double bound = std::numeric_limits<double>::infinity();
                    for (std::size_t i = 0; i < m_; ++i)
                        if (w[i] > opt_.pivot_tol)
                            bound = std::min(bound, (std::max(0.0, x_[i]) + opt_.feasibility_tol) / w[i]);
                    double best_pivot = 0.0;
                    for (std::size_t i = 0; i < m_; ++i)
                        if (w[i] > opt_.pivot_tol && std::max(0.0, x_[i]) / w[i] <= bound && w[i] > best_pivot) {
                            best_pivot = w[i];
                            r = i;
                        }
                }
                if (r == m_) return LpStatus::Unbounded;
            }

            const double theta = basis_[r] >= n_ && phase == 2 ? 0.0 : std::max(0.0, x_[r]) / w[r];
            for (std::size_t i = 0; i < m_; ++i) {
                if (i == r) continue;
                x_[i] -= theta * w[i];
                if (x_[i] < 0.0 && x_[i] > -opt_.feasibility_tol) x_[i] = 0.0;
            }
            x_[r] = theta;

            // Rank-one update of the basis inverse.
            double* prow = &binv_[r * m_];
            const double inv = 1.0 / w[r];
            for (std::size_t k = 0; k < m_; ++k) prow[k] *= inv;
            for (std::size_t i = 0; i < m_; ++i) {
                if (i == r || w[i] == 0.0) continue;
                double* row = &binv_[i * m_];
                const double f = w[i];
                for (std::size_t k = 0; k < m_; ++k) row[k] -= f * prow[k];
            }
            // Duals move along the new row r of the inverse.
            for (std::size_t k = 0; k < m_; ++k) y_[k] += dq * prow[k];
            in_basis_[basis_[r]] = false;
            basis_[r] = q;
            in_basis_[q] = true;
            ++iterations_;
            ++since_refactor;
            fresh = false;

            if (theta <= opt_.feasibility_tol) {
                if (++degenerate > opt_.degenerate_before_bland) bland = true;
            } else {
                degenerate = 0;
                bland = false;
            }
        }
    }

    const Source& src_;
    std::vector<double> b_;
    RevisedSimplexOptions opt_;
    std::size_t m_, n_;
    std::vector<double> sign_;
    std::vector<std::size_t> basis_;
    std::vector<bool> in_basis_;
    std::vector<double> x_;
    std::vector<double> binv_;  // row-major m x m
    std::vector<double> y_;
    std::size_t iterations_ = 0;
};

/// Column source backed by explicit sparse columns; handy for small programs.
struct ExplicitColumns {
    struct Column {
        std::vector<std::pair<std::size_t, double>> entries;
        double cost = 0.0;
    };
    std::vector<Column> cols;

    std::size_t columns() const { return cols.size(); }
    double cost(std::size_t j) const { return cols[j].cost; }
    template <class F>
    void visit(std::size_t j, F&& f) const {
        for (const auto& [row, value] : cols[j].entries) f(row, value);
    }
};

}  // namespace calib
