#pragma once

#include "anchorquad/anchored_function.hpp"
#include "anchorquad/cost_models.hpp"
#include "anchorquad/kernel.hpp"
#include "anchorquad/weights.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace anchorquad {

struct QuadratureResult {
    double estimate = 0.0;
    CostLedger ledger;
    std::size_t n_evals = 0;
    std::uint64_t seed = 0;
    /// Per-level (multilevel) or per-component (changing-dimension) contributions; they sum to
    /// the estimate up to the constant term.
    std::vector<double> parts;

    std::vector<VariableSet> sets() const { return ledger.active_sets(); }
};

/// Integrand wrapper that charges every evaluation to a ledger at the point's true active set.
class ChargedIntegrand {
public:
    ChargedIntegrand(const Integrand& f, double anchor, CostLedger& ledger) : f_(f), anchor_(anchor), ledger_(ledger) {}
    double operator()(const SparsePoint& x) const;

private:
    const Integrand& f_;
    double anchor_;
    CostLedger& ledger_;
};

/// Plain Monte Carlo for I(Psi_v f): mean of f over n i.i.d. points of rho^v, anchored outside v.
QuadratureResult mc_quad(const Integrand& f, const Kernel1D& k, const VariableSet& v, std::size_t n,
                         const CostModel& model, std::uint64_t seed);

/// Univariate randomized quadrature in coordinate j of the anchored Wiener-type space (anchor at the
/// left end of the domain). One evaluation at the right end fixes the linear control variate
/// L(x) = f(b)(x - a)/(b - a); the other n - 1 evaluations sample f - L once in each of n - 1 equal
/// strata. Unbiased, exact on linear f, RMSE O(n^{-3/2}) on the unit ball.
QuadratureResult uni_quad_rate3(const Integrand& f, const Kernel1D& k, std::size_t n, const CostModel& model,
                                std::uint64_t seed, Index j = 1);

struct LevelPlan {
    struct Level {
        VariableSet v;
        std::size_t n = 1;
    };
    std::vector<Level> levels;

    void validate() const;
};

/// Telescoping multilevel estimator over the plan's increasing sets. Level l >= 2 samples the
/// coupled difference f(x_{v_l}; a) - f(x_{v_{l-1}}; a) with shared coordinates on v_{l-1}.
QuadratureResult multilevel_quad(const Integrand& f, const Kernel1D& k, const LevelPlan& plan, const CostModel& model,
                                 std::uint64_t seed);

/// Level plan for budget N under a nested cost model: up to ceil(log2 N) chain members, equal budget
/// shares, truncated to the levels that can afford one sample.
LevelPlan multilevel_plan(const CostModel& model, double budget);

struct CDPlan {
    struct Entry {
        VariableSet u;
        double hat = 0.0;
        std::size_t n = 0;
    };
    std::vector<Entry> entries;
    double budget = 0.0;
    /// Upper bound on the plan's cost: $(0) + sum n_j 2^{|u_j|} $(|u_j|).
    double planned_cost = 0.0;
    /// Use stratified_component_mc for the components instead of plain Monte Carlo.
    bool stratified = true;
};

/// Greedy changing-dimension plan: sets in hat order while the cumulative per-sample cost stays
/// within the budget, then n_j proportional to hat_j^{1/2} scaled to the budget.
CDPlan cd_plan(const WeightFamily& w, double budget, const DollarFunction& dollar);

/// Changing-dimension estimator: f(a) plus, for every plan entry, a Monte Carlo estimate of
/// I_u(f_u) using the anchored component f_u (2^{|u|} evaluations per sample).
QuadratureResult cd_quad(const Integrand& f, const Kernel1D& k, const CDPlan& plan, const CostModel& model,
                         std::uint64_t seed);
QuadratureResult cd_quad(const Integrand& f, const Kernel1D& k, const WeightFamily& w, double budget,
                         const CostModel& model, std::uint64_t seed);

/// Plain Monte Carlo estimate of I_u(f_u) from a component accessor; u empty returns f_u at the anchor.
double tensor_mc(const Integrand& f_u, const Kernel1D& k, const VariableSet& u, std::size_t n, std::uint64_t seed);

/// Variance-reduced Monte Carlo for I_u(f_u) when the anchor is the left end of the domain: one
/// evaluation at the far corner fixes the control variate f_u(b,...,b) prod (x_j - a)/(b - a), and
/// the remaining n - 1 samples of the difference form a Latin hypercube (for |u| = 1, one sample per
/// stratum). Unbiased; falls back to tensor_mc for n < 2 or other anchors.
double stratified_component_mc(const Integrand& f_u, const Kernel1D& k, const VariableSet& u, std::size_t n,
                               std::uint64_t seed);

}  // namespace anchorquad
