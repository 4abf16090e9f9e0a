#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "priorcd/core.hpp"
#include "priorcd/priors.hpp"

namespace priorcd {

enum class PenaltyKind { None, L1, L2 };
enum class Likelihood { GaussianLinear, DiscreteMultinomial };

inline std::string to_string(PenaltyKind k) {
    switch (k) {
        case PenaltyKind::None: return "none";
        case PenaltyKind::L1: return "l1";
        case PenaltyKind::L2: return "l2";
    }
    return "?";
}

inline std::string to_string(Likelihood k) {
    return k == Likelihood::GaussianLinear ? "gaussian" : "multinomial";
}

struct ScoreConfig {
    double lambda = 1.0;
    PenaltyKind penalty_kind = PenaltyKind::L1;
    Likelihood likelihood = Likelihood::GaussianLinear;
};

inline constexpr double kGaussianVarianceFloor = 1e-8;
inline constexpr double kRidgeJitter = 1e-8;
inline constexpr double kLaplaceAlpha = 1.0;

struct ScoreDiagnostics {
    std::atomic<std::size_t> local_evaluations{0};
    std::atomic<std::size_t> regressions_solved{0};
    std::atomic<std::size_t> ridge_fallbacks{0};
    std::atomic<std::size_t> cache_hits{0};
    std::atomic<std::size_t> cache_misses{0};
};

/**
 * Decomposable BIC: local term of node j is
 *   -2 * loglik(j | parents) + k_j * log(n)
 * with k_j = |parents| + 1 for the linear Gaussian model and
 * k_j = (r_j - 1) * prod(r_p) for the multinomial model.
 *
 * The Gaussian path works from the centered moment matrix, so one scorer
 * amortizes O(n d^2) setup over many local evaluations.
 */
class BicScorer {
public:
    BicScorer(const Dataset& data, Likelihood kind) : data_(&data), kind_(kind) {
        if (kind_ == Likelihood::GaussianLinear) {
            const Eigen::MatrixXd& x = data.values();
            const Eigen::RowVectorXd mean = x.colwise().mean();
            const Eigen::MatrixXd centered = x.rowwise() - mean;
            moments_ = (centered.transpose() * centered) / static_cast<double>(data.n());
        } else {
            codes_.resize(data.d());
            for (Index j = 0; j < data.d(); ++j) {
                const auto& meta = data.variable(j);
                if (!meta.is_discrete()) continue;
                auto& col = codes_[j];
                col.resize(data.n());
                for (Index r = 0; r < data.n(); ++r)
                    col[r] = static_cast<std::uint32_t>(data.values()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)));
            }
        }
    }

    Likelihood kind() const noexcept { return kind_; }
    const Dataset& data() const noexcept { return *data_; }
    ScoreDiagnostics& diagnostics() const noexcept { return diag_; }

    double local(Index j, const std::vector<Index>& parents) const {
        const Index d = data_->d();
        if (j >= d) throw ContractViolation("bic_local: node index out of range");
        for (Index p : parents) {
            if (p >= d) throw ContractViolation("bic_local: parent index out of range");
            if (p == j) throw ContractViolation("bic_local: node cannot be its own parent");
        }
        ++diag_.local_evaluations;
        const double s = kind_ == Likelihood::GaussianLinear ? gaussian(j, parents) : multinomial(j, parents);
        if (!std::isfinite(s))
            throw NumericalError("non-finite local score for node '" + data_->variable(j).name + "'");
        return s;
    }

private:
    double gaussian(Index j, const std::vector<Index>& parents) const {
        const double n = static_cast<double>(data_->n());
        const auto jj = static_cast<Eigen::Index>(j);
        double residual_var = moments_(jj, jj);
        if (!parents.empty()) {
            const auto k = static_cast<Eigen::Index>(parents.size());
            Eigen::MatrixXd spp(k, k);
            Eigen::VectorXd spj(k);
            for (Eigen::Index a = 0; a < k; ++a) {
                const auto pa = static_cast<Eigen::Index>(parents[static_cast<std::size_t>(a)]);
                spj(a) = moments_(pa, jj);
                for (Eigen::Index b = 0; b < k; ++b)
                    spp(a, b) = moments_(pa, static_cast<Eigen::Index>(parents[static_cast<std::size_t>(b)]));
            }
            ++diag_.regressions_solved;
            Eigen::LLT<Eigen::MatrixXd> llt(spp);
            if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-12)) {
                ++diag_.ridge_fallbacks;
                spp.diagonal().array() += kRidgeJitter;
                llt.compute(spp);
            }
            const Eigen::VectorXd beta = llt.solve(spj);
            residual_var -= spj.dot(beta);
        }
        residual_var = std::max(residual_var, kGaussianVarianceFloor);
        const double neg2ll = n * std::log(2.0 * std::numbers::pi * residual_var) + n;
        const double params = static_cast<double>(parents.size() + 1);
        return neg2ll + params * std::log(n);
    }

    double multinomial(Index j, const std::vector<Index>& parents) const {
        const auto& child = data_->variable(j);
        if (!child.is_discrete())
            throw ContractViolation("multinomial likelihood needs discrete column '" + child.name + "'");
        const Index r = child.cardinality();
        double q = 1.0;
        std::vector<Index> radix;
        for (Index p : parents) {
            const auto& meta = data_->variable(p);
            if (!meta.is_discrete())
                throw ContractViolation("multinomial likelihood needs discrete column '" + meta.name + "'");
            radix.push_back(meta.cardinality());
            q *= static_cast<double>(meta.cardinality());
        }
        const Index n = data_->n();
        const auto& y = codes_[j];

        // counts[config * r + category]; sparse storage once the table gets large
        double loglik = 0.0;
        auto config_of = [&](Index row) {
            std::uint64_t c = 0;
            for (Index k = 0; k < parents.size(); ++k) c = c * radix[k] + codes_[parents[k]][row];
            return c;
        };
        auto accumulate = [&](const std::uint32_t* counts) {
            std::uint64_t total = 0;
            for (Index c = 0; c < r; ++c) total += counts[c];
            if (total == 0) return;
            const double denom = static_cast<double>(total) + kLaplaceAlpha * static_cast<double>(r);
            for (Index c = 0; c < r; ++c)
                if (counts[c] > 0)
                    loglik += counts[c] * std::log((counts[c] + kLaplaceAlpha) / denom);
        };
        if (q * static_cast<double>(r) <= static_cast<double>(1u << 22)) {
            std::vector<std::uint32_t> counts(static_cast<std::size_t>(q) * r, 0);
            for (Index row = 0; row < n; ++row) ++counts[config_of(row) * r + y[row]];
            for (std::size_t c = 0; c < static_cast<std::size_t>(q); ++c) accumulate(counts.data() + c * r);
        } else {
            std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> table;
            for (Index row = 0; row < n; ++row) {
                auto& cell = table[config_of(row)];
                if (cell.empty()) cell.assign(r, 0);
                ++cell[y[row]];
            }
            for (const auto& [_, counts] : table) accumulate(counts.data());
        }
        const double params = static_cast<double>(r - 1) * q;
        return -2.0 * loglik + params * std::log(static_cast<double>(n));
    }

    const Dataset* data_;
    Likelihood kind_;
    Eigen::MatrixXd moments_;
    std::vector<std::vector<std::uint32_t>> codes_;
    mutable ScoreDiagnostics diag_;
};

inline double bic_local(const Dataset& data, Index j, const std::vector<Index>& parents, Likelihood kind) {
    return BicScorer(data, kind).local(j, parents);
}

inline double bic_total(const BicScorer& scorer, const AdjacencyMatrix& m) {
    m.require_binary("bic_total");
    if (m.size() != scorer.data().d()) throw DimensionMismatch("bic_total: graph and data dimensions differ");
    if (!is_acyclic(m)) throw ContractViolation("bic_total: graph is cyclic");
    double total = 0.0;
    for (Index j = 0; j < m.size(); ++j) total += scorer.local(j, parent_set(m, j));
    return total;
}

inline double bic_total(const Dataset& data, const AdjacencyMatrix& m, Likelihood kind) {
    return bic_total(BicScorer(data, kind), m);
}

inline LocalScoreFn local_score_fn(const BicScorer& scorer) {
    return [&scorer](Index j, const std::vector<Index>& parents) { return scorer.local(j, parents); };
}

/// Scores each prior against the data with plain BIC and returns the softmin ensemble.
inline PriorEnsemble compute_weights(std::vector<PriorGraph> priors, const Dataset& data, Likelihood kind) {
    BicScorer scorer(data, kind);
    return compute_weights(std::move(priors), local_score_fn(scorer));
}

// ---------------------------------------------------------------------------
// Prior penalties

namespace detail {

inline double cell_discrepancy(double diff, PenaltyKind kind) {
    return kind == PenaltyKind::L2 ? diff * diff : std::abs(diff);
}

inline void check_ensemble_dims(const AdjacencyMatrix& m, const PriorEnsemble& ensemble) {
    if (ensemble.dimension() != m.size())
        throw DimensionMismatch("penalty: graph has d=" + std::to_string(m.size()) + " but priors have d=" +
                                std::to_string(ensemble.dimension()));
}

}  // namespace detail

/// Sum over priors of mu * sum_{i,j} |m_ij - prior_ij|^p, p = 1 or 2.
inline double penalty(const AdjacencyMatrix& m, const PriorEnsemble& ensemble, PenaltyKind kind) {
    if (kind == PenaltyKind::None) return 0.0;
    detail::check_ensemble_dims(m, ensemble);
    double total = 0.0;
    for (Index k = 0; k < ensemble.size(); ++k) {
        const auto& prior = ensemble.prior(k).adjacency.values();
        double cells = 0.0;
        for (Eigen::Index j = 0; j < prior.cols(); ++j)
            for (Eigen::Index i = 0; i < prior.rows(); ++i)
                cells += detail::cell_discrepancy(m.values()(i, j) - prior(i, j), kind);
        total += ensemble.weight(k) * cells;
    }
    return total;
}

inline double penalty_l1(const AdjacencyMatrix& m, const PriorEnsemble& ensemble) {
    return penalty(m, ensemble, PenaltyKind::L1);
}

inline double penalty_l2(const AdjacencyMatrix& m, const PriorEnsemble& ensemble) {
    return penalty(m, ensemble, PenaltyKind::L2);
}

/// Node-j share of the penalty: only column j (the parents of j) is compared.
inline double penalty_local(Index j, const Eigen::Ref<const Eigen::VectorXd>& column, const PriorEnsemble& ensemble,
                            PenaltyKind kind) {
    if (kind == PenaltyKind::None) return 0.0;
    if (static_cast<Index>(column.size()) != ensemble.dimension() || j >= ensemble.dimension())
        throw DimensionMismatch("penalty_local: column length differs from prior dimension");
    const auto jj = static_cast<Eigen::Index>(j);
    double total = 0.0;
    for (Index k = 0; k < ensemble.size(); ++k) {
        const auto& prior = ensemble.prior(k).adjacency.values();
        double cells = 0.0;
        for (Eigen::Index i = 0; i < column.size(); ++i)
            cells += detail::cell_discrepancy(column(i) - prior(i, jj), kind);
        total += ensemble.weight(k) * cells;
    }
    return total;
}

/// S(G) = BIC(G) + lambda * P(G). Without an ensemble the penalty is zero.
inline double augmented_score(const BicScorer& scorer, const AdjacencyMatrix& m, const PriorEnsemble* ensemble,
                              const ScoreConfig& config) {
    const double bic = bic_total(scorer, m);
    if (config.penalty_kind == PenaltyKind::None || ensemble == nullptr) return bic;
    return bic + config.lambda * penalty(m, *ensemble, config.penalty_kind);
}

inline double augmented_score(const Dataset& data, const AdjacencyMatrix& m, const PriorEnsemble* ensemble,
                              const ScoreConfig& config) {
    return augmented_score(BicScorer(data, config.likelihood), m, ensemble, config);
}

// ---------------------------------------------------------------------------
// Cached local scores for search

using ParentMask = std::uint64_t;
inline constexpr Index kMaxMaskVariables = 64;

inline std::vector<Index> mask_to_parents(ParentMask mask) {
    std::vector<Index> out;
    for (Index i = 0; mask != 0; ++i, mask >>= 1)
        if (mask & 1u) out.push_back(i);
    return out;
}

inline ParentMask parents_to_mask(const std::vector<Index>& parents) {
    ParentMask m = 0;
    for (Index p : parents) m |= ParentMask{1} << p;
    return m;
}

/// (node, parent set) -> local BIC. Concurrent readers, exclusive inserts.
class LocalScoreCache {
public:
    std::optional<double> find(Index node, ParentMask parents) const {
        std::shared_lock lock(mutex_);
        auto it = map_.find(key(node, parents));
        if (it == map_.end()) return std::nullopt;
        return it->second;
    }

    void insert(Index node, ParentMask parents, double value) {
        std::unique_lock lock(mutex_);
        map_.emplace(key(node, parents), value);
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return map_.size();
    }

private:
    struct Key {
        Index node;
        ParentMask parents;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept {
            return std::hash<std::uint64_t>{}(k.parents * 0x9E3779B97F4A7C15ULL ^ k.node);
        }
    };
    static Key key(Index node, ParentMask parents) { return {node, parents}; }

    mutable std::shared_mutex mutex_;
    std::unordered_map<Key, double, KeyHash> map_;
};

/**
 * Augmented local score s(j, pa) = BIC_local(j, pa) + lambda * p_j(pa),
 * with BIC terms memoized. Summing over nodes reproduces augmented_score.
 */
class AugmentedLocalScorer {
public:
    AugmentedLocalScorer(const Dataset& data, const PriorEnsemble* ensemble, ScoreConfig config)
        : bic_(data, config.likelihood), ensemble_(ensemble), config_(config) {
        if (data.d() > kMaxMaskVariables)
            throw ContractViolation("search supports at most 64 variables");
        if (ensemble_ && ensemble_->dimension() != data.d())
            throw DimensionMismatch("prior ensemble dimension differs from dataset");
    }

    Index d() const noexcept { return bic_.data().d(); }
    const BicScorer& bic() const noexcept { return bic_; }
    const ScoreConfig& config() const noexcept { return config_; }
    const PriorEnsemble* ensemble() const noexcept { return ensemble_; }
    const LocalScoreCache& cache() const noexcept { return cache_; }

    double bic_local(Index j, ParentMask parents) const {
        if (auto hit = cache_.find(j, parents)) {
            ++bic_.diagnostics().cache_hits;
            return *hit;
        }
        ++bic_.diagnostics().cache_misses;
        const double s = bic_.local(j, mask_to_parents(parents));
        cache_.insert(j, parents, s);
        return s;
    }

    double penalty_local(Index j, ParentMask parents) const {
        if (!penalized()) return 0.0;
        Eigen::VectorXd column = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d()));
        for (Index i = 0; i < d(); ++i)
            if (parents >> i & 1u) column(static_cast<Eigen::Index>(i)) = 1.0;
        return priorcd::penalty_local(j, column, *ensemble_, config_.penalty_kind);
    }

    double local(Index j, ParentMask parents) const {
        const double s = bic_local(j, parents);
        if (!penalized()) return s;
        return s + config_.lambda * penalty_local(j, parents);
    }

    double total(const std::vector<ParentMask>& parents) const {
        double s = 0.0;
        for (Index j = 0; j < parents.size(); ++j) s += local(j, parents[j]);
        return s;
    }

    bool penalized() const noexcept {
        return ensemble_ != nullptr && config_.penalty_kind != PenaltyKind::None;
    }

private:
    BicScorer bic_;
    const PriorEnsemble* ensemble_;
    ScoreConfig config_;
    mutable LocalScoreCache cache_;
};

inline std::vector<ParentMask> parent_masks(const AdjacencyMatrix& m) {
    m.require_binary("parent_masks");
    if (m.size() > kMaxMaskVariables) throw ContractViolation("at most 64 variables supported");
    std::vector<ParentMask> out(m.size(), 0);
    for (const auto& [i, j] : m.edges()) out[j] |= ParentMask{1} << i;
    return out;
}

inline AdjacencyMatrix from_parent_masks(const std::vector<ParentMask>& masks) {
    std::vector<Edge> edges;
    for (Index j = 0; j < masks.size(); ++j)
        for (Index i : mask_to_parents(masks[j])) edges.emplace_back(i, j);
    return AdjacencyMatrix::from_edges(masks.size(), edges);
}

}  // namespace priorcd
