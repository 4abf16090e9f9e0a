#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "priorcd/errors.hpp"

namespace priorcd::optim {

/// Returns f(x) and writes the gradient into `grad`.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct BoundedOptions {
    int memory = 10;
    int max_iterations = 15000;
    int max_line_search = 40;
    double ftol = 2.220446049250313e-09;  // relative reduction, as in the classic L-BFGS-B factr=1e7
    double pgtol = 1e-5;                  // infinity norm of the projected gradient
    double armijo = 1e-4;
};

struct BoundedResult {
    Eigen::VectorXd x;
    double f = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string message;
    std::vector<double> history;  // accepted objective values, starting at f(x0)
};

namespace detail {

inline Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

inline double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                                      const Eigen::VectorXd& hi) {
    return (x - project(x - g, lo, hi)).cwiseAbs().maxCoeff();
}

inline double checked(double f, const char* where) {
    if (!std::isfinite(f)) throw NumericalError(std::string("non-finite objective in ") + where);
    return f;
}

/// Trial evaluation for a line search: overflow at a long step means "shorten", not failure.
inline double trial(const Objective& fn, const Eigen::VectorXd& x, Eigen::VectorXd& g, int& non_finite) {
    double f;
    try {
        f = fn(x, g);
    } catch (const NumericalError&) {
        f = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(f) || !g.allFinite()) {
        ++non_finite;
        return std::numeric_limits<double>::infinity();
    }
    return f;
}

}  // namespace detail

/**
 * Projected limited-memory BFGS for box constraints lo <= x <= hi.
 *
 * Variables pinned at a bound with the gradient pointing outward are frozen
 * for the iteration; the two-loop recursion acts on the remaining free set
 * and the step is found by Armijo backtracking along the projection arc.
 */
inline BoundedResult minimize_bounded(const Objective& fn, const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
                                      const Eigen::VectorXd& hi, const BoundedOptions& opt = {}) {
    const Eigen::Index n = x0.size();
    if (lo.size() != n || hi.size() != n) throw ContractViolation("bounds length differs from x0");
    if ((lo.array() > hi.array()).any()) throw ContractViolation("lower bound exceeds upper bound");

    BoundedResult res;
    Eigen::VectorXd x = detail::project(x0, lo, hi);
    Eigen::VectorXd g(n);
    double f = detail::checked(fn(x, g), "initial point");
    res.evaluations = 1;
    res.history.push_back(f);

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;

    auto free_mask = [&](const Eigen::VectorXd& xv, const Eigen::VectorXd& gv) {
        Eigen::ArrayXd mask = Eigen::ArrayXd::Ones(n);
        for (Eigen::Index i = 0; i < n; ++i)
            if ((xv(i) <= lo(i) && gv(i) > 0) || (xv(i) >= hi(i) && gv(i) < 0) || lo(i) == hi(i)) mask(i) = 0.0;
        return mask;
    };

    for (int it = 0; it < opt.max_iterations; ++it) {
        res.iterations = it;
        if (detail::projected_gradient_norm(x, g, lo, hi) <= opt.pgtol) {
            res.converged = true;
            res.message = "projected gradient below tolerance";
            break;
        }
        const Eigen::ArrayXd mask = free_mask(x, g);

        // two-loop recursion on the free coordinates
        Eigen::VectorXd q = (g.array() * mask).matrix();
        const auto m = static_cast<int>(s_hist.size());
        std::vector<double> a(static_cast<std::size_t>(m));
        for (int k = m - 1; k >= 0; --k) {
            const auto ks = static_cast<std::size_t>(k);
            a[ks] = rho_hist[ks] * s_hist[ks].dot(q);
            q -= a[ks] * y_hist[ks];
        }
        if (m > 0) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        for (int k = 0; k < m; ++k) {
            const auto ks = static_cast<std::size_t>(k);
            const double b = rho_hist[ks] * y_hist[ks].dot(q);
            q += (a[ks] - b) * s_hist[ks];
        }
        Eigen::VectorXd dir = -(q.array() * mask).matrix();
        bool steepest = m == 0;
        if (!(g.dot(dir) < 0)) {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = -(g.array() * mask).matrix();
            steepest = true;
        }

        double step = 1.0;
        if (steepest) {
            const double dmax = dir.cwiseAbs().maxCoeff();
            if (dmax > 0) step = std::min(1.0, 1.0 / dmax);
        }
        Eigen::VectorXd x_new, g_new(n);
        double f_new = f;
        bool accepted = false;
        int non_finite = 0, tried = 0;
        for (int ls = 0; ls < opt.max_line_search; ++ls) {
            x_new = detail::project(x + step * dir, lo, hi);
            const double decrease = g.dot(x_new - x);
            if (!(decrease < 0)) {
                step *= 0.5;
                continue;
            }
            ++tried;
            f_new = detail::trial(fn, x_new, g_new, non_finite);
            ++res.evaluations;
            if (f_new <= f + opt.armijo * decrease) {
                accepted = true;
                break;
            }
            step *= std::isfinite(f_new) ? 0.5 : 0.1;
        }
        if (!accepted && tried > 0 && non_finite == tried)
            throw NumericalError("non-finite objective in line search");
        if (!accepted) {
            if (!steepest) {
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                continue;
            }
            res.converged = true;
            res.message = "line search found no further decrease";
            break;
        }

        Eigen::VectorXd s = x_new - x;
        Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > std::numeric_limits<double>::epsilon() * y.squaredNorm()) {
            if (static_cast<int>(s_hist.size()) == opt.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
        }

        const double reduction = f - f_new;
        x = std::move(x_new);
        g = g_new;
        f = f_new;
        res.history.push_back(f);
        if (reduction <= opt.ftol * std::max({std::abs(f), std::abs(f + reduction), 1.0})) {
            res.converged = true;
            res.message = "relative reduction below tolerance";
            res.iterations = it + 1;
            break;
        }
        res.iterations = it + 1;
    }
    if (!res.converged) res.message = "iteration limit reached";
    res.x = std::move(x);
    res.f = f;
    return res;
}

/// Projected gradient descent with Barzilai-Borwein steps and Armijo backtracking.
inline BoundedResult minimize_projected_gradient(const Objective& fn, const Eigen::VectorXd& x0,
                                                 const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                                 const BoundedOptions& opt = {}) {
    const Eigen::Index n = x0.size();
    if (lo.size() != n || hi.size() != n) throw ContractViolation("bounds length differs from x0");
    BoundedResult res;
    Eigen::VectorXd x = detail::project(x0, lo, hi);
    Eigen::VectorXd g(n), g_new(n);
    double f = detail::checked(fn(x, g), "initial point");
    res.evaluations = 1;
    res.history.push_back(f);
    double step = 1.0 / std::max(1.0, g.cwiseAbs().maxCoeff());
    for (int it = 0; it < opt.max_iterations; ++it) {
        res.iterations = it;
        if (detail::projected_gradient_norm(x, g, lo, hi) <= opt.pgtol) {
            res.converged = true;
            res.message = "projected gradient below tolerance";
            break;
        }
        double t = step;
        bool accepted = false;
        Eigen::VectorXd x_new;
        double f_new = f;
        int non_finite = 0, tried = 0;
        for (int ls = 0; ls < opt.max_line_search; ++ls) {
            x_new = detail::project(x - t * g, lo, hi);
            const double decrease = g.dot(x_new - x);
            if (!(decrease < 0)) {
                t *= 0.5;
                continue;
            }
            ++tried;
            f_new = detail::trial(fn, x_new, g_new, non_finite);
            ++res.evaluations;
            if (f_new <= f + opt.armijo * decrease) {
                accepted = true;
                break;
            }
            t *= std::isfinite(f_new) ? 0.5 : 0.1;
        }
        if (!accepted && tried > 0 && non_finite == tried)
            throw NumericalError("non-finite objective in line search");
        if (!accepted) {
            res.converged = true;
            res.message = "line search found no further decrease";
            break;
        }
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        step = sy > 0 ? s.squaredNorm() / sy : t * 2.0;
        const double reduction = f - f_new;
        x = x_new;
        g = g_new;
        f = f_new;
        res.history.push_back(f);
        res.iterations = it + 1;
        if (reduction <= opt.ftol * std::max({std::abs(f), std::abs(f + reduction), 1.0})) {
            res.converged = true;
            res.message = "relative reduction below tolerance";
            break;
        }
    }
    if (!res.converged) res.message = "iteration limit reached";
    res.x = std::move(x);
    res.f = f;
    return res;
}

}  // namespace priorcd::optim
