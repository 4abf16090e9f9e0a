#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "priorcd/bounded_qn.hpp"
#include "priorcd/core.hpp"
#include "priorcd/priors.hpp"
#include "priorcd/search_result.hpp"

namespace priorcd::notears {

enum class InnerOptimizer { QuasiNewtonBounded, ProjectedGradient };

struct NotearsConfig {
    double lambda_prior = 0.0;
    double lambda_sparsity = 0.01;
    double rho_init = 1.0;
    double rho_mult = 10.0;
    double rho_max = 1e16;
    double h_tol = 1e-8;
    int max_outer_iterations = 100;
    InnerOptimizer inner_optimizer = InnerOptimizer::QuasiNewtonBounded;
    double threshold_tau = 0.3;
    // false: center only. Thresholding always happens in the space the optimizer saw.
    bool standardize = true;
    optim::BoundedOptions inner_options{};

    void validate() const {
        if (!(lambda_prior >= 0) || !(lambda_sparsity >= 0)) throw ContractViolation("notears: lambdas must be >= 0");
        if (!(rho_init > 0) || !(rho_max > 0)) throw ContractViolation("notears: rho_init and rho_max must be > 0");
        if (!(rho_mult > 1)) throw ContractViolation("notears: rho_mult must be > 1");
        if (!(h_tol > 0)) throw ContractViolation("notears: h_tol must be > 0");
        if (max_outer_iterations < 1) throw ContractViolation("notears: max_outer_iterations must be >= 1");
        if (!(threshold_tau >= 0)) throw ContractViolation("notears: threshold_tau must be >= 0");
    }
};

struct ValueGrad {
    double value = 0.0;
    Eigen::MatrixXd grad;
};

/// h(W) = tr(exp(W o W)) - d and its gradient exp(W o W)^T o 2W.
inline ValueGrad h_acyclicity(const Eigen::MatrixXd& w) {
    if (w.rows() != w.cols()) throw ContractViolation("h_acyclicity: matrix must be square");
    if (!w.allFinite()) throw NumericalError("h_acyclicity: non-finite entries");
    const Eigen::MatrixXd e = w.cwiseProduct(w).exp();
    return {e.trace() - static_cast<double>(w.rows()), e.transpose().cwiseProduct(2.0 * w)};
}

/// Least-squares loss (1/2n)||X - XW||_F^2 and gradient -(1/n) X^T (X - XW).
inline ValueGrad ls_objective(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x) {
    if (w.rows() != x.cols() || w.cols() != x.cols()) throw DimensionMismatch("ls_objective: W must be d x d");
    const double n = static_cast<double>(x.rows());
    const Eigen::MatrixXd r = x - x * w;
    return {0.5 / n * r.squaredNorm(), -1.0 / n * (x.transpose() * r)};
}

/// P = sum_m mu_m ||W - M_m||_F^2 with gradient 2 sum_m mu_m (W - M_m); diagonal of the gradient is zero.
inline ValueGrad prior_penalty_grad(const Eigen::MatrixXd& w, const PriorEnsemble& ensemble) {
    if (w.rows() != w.cols() || static_cast<Index>(w.rows()) != ensemble.dimension())
        throw DimensionMismatch("prior_penalty_grad: W and priors differ in dimension");
    ValueGrad out{0.0, Eigen::MatrixXd::Zero(w.rows(), w.cols())};
    for (Index k = 0; k < ensemble.size(); ++k) {
        const Eigen::MatrixXd diff = w - ensemble.prior(k).adjacency.values();
        out.value += ensemble.weight(k) * diff.squaredNorm();
        out.grad += 2.0 * ensemble.weight(k) * diff;
    }
    out.grad.diagonal().setZero();
    return out;
}

struct NotearsRun {
    SearchResult result;
    Eigen::MatrixXd w_fitted;                       // in the (standardized) optimization space
    Eigen::VectorXd column_scale;                   // std-dev used per column (1 when centering only)
    std::vector<std::vector<double>> inner_histories;
};

namespace detail {

inline Eigen::MatrixXd prepare(const Eigen::MatrixXd& x, bool standardize, Eigen::VectorXd& scale) {
    const Eigen::RowVectorXd mean = x.colwise().mean();
    Eigen::MatrixXd z = x.rowwise() - mean;
    scale = Eigen::VectorXd::Ones(x.cols());
    if (standardize) {
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            const double sd = std::sqrt(z.col(j).squaredNorm() / static_cast<double>(z.rows()));
            if (sd > 0) {
                z.col(j) /= sd;
                scale(j) = sd;
            }
        }
    }
    return z;
}

inline Eigen::MatrixXd unpack(const Eigen::VectorXd& v, Eigen::Index d) {
    const Eigen::Index dd = d * d;
    return Eigen::Map<const Eigen::MatrixXd>(v.data(), d, d) - Eigen::Map<const Eigen::MatrixXd>(v.data() + dd, d, d);
}

/// Smallest threshold >= tau whose thresholded graph is acyclic.
inline std::pair<AdjacencyMatrix, double> acyclic_threshold(const Eigen::MatrixXd& w, double tau) {
    AdjacencyMatrix g = threshold(AdjacencyMatrix::weighted(w), tau);
    if (is_acyclic(g)) return {g, tau};
    std::vector<double> mags;
    for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            if (i != j && std::abs(w(i, j)) > tau) mags.push_back(std::abs(w(i, j)));
    std::sort(mags.begin(), mags.end());
    for (double m : mags) {
        g = threshold(AdjacencyMatrix::weighted(w), m);
        if (is_acyclic(g)) return {g, m};
    }
    return {AdjacencyMatrix::zeros(static_cast<Index>(w.rows())), std::numeric_limits<double>::infinity()};
}

}  // namespace detail

/**
 * Augmented-Lagrangian solve of
 *   min  ls(W) + lambda_sparsity |W|_1 + lambda_prior P(W)   s.t. h(W) = 0
 * over the split W = W+ - W-, W+/- >= 0, with the diagonal pinned to zero.
 */
inline NotearsRun solve_detailed(const Dataset& data, const PriorEnsemble* ensemble, const NotearsConfig& cfg) {
    cfg.validate();
    const auto d = static_cast<Eigen::Index>(data.d());
    if (ensemble && static_cast<Eigen::Index>(ensemble->dimension()) != d)
        throw DimensionMismatch("notears: prior ensemble dimension differs from dataset");

    NotearsRun run;
    if (data.n() < data.d()) run.result.warnings.push_back("n < d: continuous problem is underdetermined");
    const Eigen::MatrixXd x = detail::prepare(data.values(), cfg.standardize, run.column_scale);
    const bool use_prior = ensemble != nullptr && cfg.lambda_prior > 0;

    const Eigen::Index dd = d * d;
    Eigen::VectorXd lo = Eigen::VectorXd::Zero(2 * dd);
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(2 * dd, std::numeric_limits<double>::infinity());
    for (Eigen::Index i = 0; i < d; ++i) {
        hi(i * d + i) = 0.0;
        hi(dd + i * d + i) = 0.0;
    }

    double rho = cfg.rho_init;
    double alpha = 0.0;
    double h = std::numeric_limits<double>::infinity();
    Eigen::VectorXd w_est = Eigen::VectorXd::Zero(2 * dd);

    auto objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
        const Eigen::MatrixXd w = detail::unpack(v, d);
        const auto loss = ls_objective(w, x);
        const auto hv = h_acyclicity(w);
        double f = loss.value + 0.5 * rho * hv.value * hv.value + alpha * hv.value + cfg.lambda_sparsity * v.sum();
        Eigen::MatrixXd g_smooth = loss.grad + (rho * hv.value + alpha) * hv.grad;
        if (use_prior) {
            const auto pv = prior_penalty_grad(w, *ensemble);
            f += cfg.lambda_prior * pv.value;
            g_smooth += cfg.lambda_prior * pv.grad;
        }
        grad.resize(2 * dd);
        Eigen::Map<Eigen::MatrixXd>(grad.data(), d, d) = g_smooth.array() + cfg.lambda_sparsity;
        Eigen::Map<Eigen::MatrixXd>(grad.data() + dd, d, d) = -g_smooth.array() + cfg.lambda_sparsity;
        return f;
    };

    auto state_dump = [&](int outer) {
        std::ostringstream s;
        s << "outer=" << outer << " rho=" << rho << " alpha=" << alpha << " h=" << h;
        return s.str();
    };

    bool hit_rho_max = false;
    for (int outer = 1; outer <= cfg.max_outer_iterations; ++outer) {
        Eigen::VectorXd w_new = w_est;
        double h_new = h;
        double f_inner = 0.0;
        while (rho < cfg.rho_max) {
            optim::BoundedResult inner;
            try {
                inner = cfg.inner_optimizer == InnerOptimizer::QuasiNewtonBounded
                            ? optim::minimize_bounded(objective, w_est, lo, hi, cfg.inner_options)
                            : optim::minimize_projected_gradient(objective, w_est, lo, hi, cfg.inner_options);
            } catch (const NumericalError& e) {
                throw NumericalError(std::string("notears inner solve diverged (") + e.what() + "); " + state_dump(outer));
            }
            run.inner_histories.push_back(inner.history);
            w_new = inner.x;
            f_inner = inner.f;
            h_new = h_acyclicity(detail::unpack(w_new, d)).value;
            if (h_new > 0.25 * h) {
                rho *= cfg.rho_mult;
            } else {
                break;
            }
        }
        w_est = w_new;
        h = h_new;
        alpha += rho * h;
        run.result.iterates.push_back({outer, h, f_inner, rho, alpha});
        run.result.trace.push_back({0, outer, "outer", f_inner});
        if (h <= cfg.h_tol) break;
        if (rho >= cfg.rho_max) {
            hit_rho_max = true;
            break;
        }
    }
    if (hit_rho_max && h > cfg.h_tol)
        run.result.warnings.push_back("rho_max reached with h=" + std::to_string(h) + " > h_tol");

    run.w_fitted = detail::unpack(w_est, d);
    auto [graph, tau_used] = detail::acyclic_threshold(run.w_fitted, cfg.threshold_tau);
    if (tau_used != cfg.threshold_tau)
        run.result.warnings.push_back("threshold raised to " + std::to_string(tau_used) + " to restore acyclicity");
    run.result.adjacency = std::move(graph);
    run.result.threshold_used = tau_used;

    // weights in original units: W_orig(i,j) = W(i,j) * sd_j / sd_i
    Eigen::MatrixXd w_orig = run.w_fitted;
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) w_orig(i, j) *= run.column_scale(j) / run.column_scale(i);
    run.result.weights = std::move(w_orig);

    double final_obj = ls_objective(run.w_fitted, x).value + cfg.lambda_sparsity * run.w_fitted.cwiseAbs().sum();
    if (use_prior) final_obj += cfg.lambda_prior * prior_penalty_grad(run.w_fitted, *ensemble).value;
    run.result.final_score = final_obj;
    return run;
}

inline SearchResult solve(const Dataset& data, const PriorEnsemble* ensemble, const NotearsConfig& cfg) {
    return solve_detailed(data, ensemble, cfg).result;
}

/// CSV with columns iteration,h,objective,rho.
inline std::string trace_csv(const SearchResult& r) {
    std::ostringstream out;
    out.precision(17);
    out << "iteration,h,objective,rho\n";
    for (const auto& it : r.iterates) out << it.iteration << ',' << it.h << ',' << it.objective << ',' << it.rho << '\n';
    return out.str();
}

}  // namespace priorcd::notears
