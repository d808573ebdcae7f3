#include "anchorquad/quadrature.hpp"

#include "anchorquad/errors.hpp"
#include "anchorquad/rng.hpp"

#include <cmath>

namespace anchorquad {

double ChargedIntegrand::operator()(const SparsePoint& x) const {
    ledger_.charge(x.active_set(anchor_));
    return f_(x);
}

QuadratureResult mc_quad(const Integrand& f, const Kernel1D& k, const VariableSet& v, std::size_t n,
                         const CostModel& model, std::uint64_t seed) {
    if (n < 1) throw ParameterError("Monte Carlo needs n >= 1");
    QuadratureResult r{0.0, CostLedger(model), n, seed, {}};
    ChargedIntegrand g(f, k.anchor(), r.ledger);
    ProductMeasureSampler sampler(k, seed);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += g(sampler.draw(v));
    r.estimate = sum / static_cast<double>(n);
    return r;
}

QuadratureResult uni_quad_rate3(const Integrand& f, const Kernel1D& k, std::size_t n, const CostModel& model,
                                std::uint64_t seed, Index j) {
    if (n < 4 || n % 2 != 0) throw ParameterError("rate-3/2 scheme needs an even n >= 4");
    if (k.anchor() != k.lower()) throw ParameterError("rate-3/2 scheme needs the anchor at the left end of the domain");
    QuadratureResult r{0.0, CostLedger(model), n, seed, {}};
    ChargedIntegrand g(f, k.anchor(), r.ledger);
    Rng rng(seed);
    const double a = k.lower(), b = k.upper(), width = b - a;
    const double fb = g(SparsePoint{{j, b}});
    auto control = [&](double x) { return fb * (x - a) / width; };

    const std::size_t strata = n - 1;
    const double h = 1.0 / static_cast<double>(strata);
    double sum = 0.0;
    for (std::size_t i = 0; i < strata; ++i) {
        const double x = a + width * (static_cast<double>(i) + rng.uniform()) * h;
        sum += g(SparsePoint{{j, x}}) - control(x);
    }
    r.estimate = 0.5 * fb + sum * h;
    return r;
}

void LevelPlan::validate() const {
    if (levels.empty()) throw ParameterError("level plan needs at least one level");
    for (std::size_t l = 0; l < levels.size(); ++l) {
        if (levels[l].n < 1) throw ParameterError("every level needs n >= 1");
        if (l > 0 && (levels[l].v == levels[l - 1].v || !levels[l - 1].v.is_subset_of(levels[l].v)))
            throw ParameterError("level sets must be strictly increasing");
    }
}

QuadratureResult multilevel_quad(const Integrand& f, const Kernel1D& k, const LevelPlan& plan, const CostModel& model,
                                 std::uint64_t seed) {
    plan.validate();
    QuadratureResult r{0.0, CostLedger(model), 0, seed, {}};
    ChargedIntegrand g(f, k.anchor(), r.ledger);
    for (std::size_t l = 0; l < plan.levels.size(); ++l) {
        const auto& level = plan.levels[l];
        ProductMeasureSampler sampler(k, derive_seed(seed, l));
        double sum = 0.0;
        for (std::size_t i = 0; i < level.n; ++i) {
            const SparsePoint x = sampler.draw(level.v);
            double d = g(x);
            if (l > 0) d -= g(x.restricted(plan.levels[l - 1].v));
            sum += d;
        }
        const double mean = sum / static_cast<double>(level.n);
        r.parts.push_back(mean);
        r.estimate += mean;
    }
    r.n_evals = r.ledger.size();
    return r;
}

LevelPlan multilevel_plan(const CostModel& model, double budget) {
    if (model.kind() != CostModel::Kind::Nested) throw ConfigurationError("multilevel plans need a nested cost model");
    const auto& chain = model.chain();
    const auto& dollar = model.dollar();
    std::size_t L = budget > 2.0 ? static_cast<std::size_t>(std::ceil(std::log2(budget))) : 1;
    std::vector<double> unit;
    for (std::size_t l = 1; l <= L; ++l) {
        const auto size = chain.member_size(l);
        if (!size) break;
        double c = dollar(*size);
        if (l > 1) c += dollar(*chain.member_size(l - 1));
        unit.push_back(c);
    }
    L = unit.size();
    while (L > 0) {
        const double share = budget / static_cast<double>(L);
        std::size_t keep = 0;
        while (keep < L && unit[keep] <= share) ++keep;
        if (keep == L) break;
        L = keep;
    }
    if (L == 0) throw BudgetError("budget cannot afford a single sample on the first chain member");
    LevelPlan plan;
    const double share = budget / static_cast<double>(L);
    for (std::size_t l = 0; l < L; ++l)
        plan.levels.push_back({*chain.member(l + 1), static_cast<std::size_t>(std::floor(share / unit[l]))});
    return plan;
}

CDPlan cd_plan(const WeightFamily& w, double budget, const DollarFunction& dollar) {
    CDPlan plan;
    plan.budget = budget;
    const double base = dollar(0);
    if (!(budget >= base)) throw BudgetError("budget is below the cost of one anchor evaluation");
    plan.planned_cost = base;
    const double avail = budget - base;
    if (avail <= 0.0) return plan;

    auto unit_cost = [&](const VariableSet& u) { return std::ldexp(dollar(u.size()), static_cast<int>(u.size())); };
    const std::size_t want = static_cast<std::size_t>(std::min(avail / 2.0 + 1.0, 1e7));
    const auto support = enumerate_ordered(w, unbounded_order, std::max<std::size_t>(want, 1));
    double cumulative = 0.0, weight_sum = 0.0;
    std::vector<CDPlan::Entry> picked;
    for (const auto& e : support.entries) {
        const double c = unit_cost(e.u);
        if (cumulative + c > avail) break;
        cumulative += c;
        picked.push_back({e.u, e.hat, 0});
        weight_sum += std::sqrt(e.hat) * c;
    }
    if (picked.empty()) return plan;
    const double lambda = avail / weight_sum;
    for (auto& e : picked) {
        e.n = static_cast<std::size_t>(std::floor(lambda * std::sqrt(e.hat)));
        if (e.n == 0) continue;
        plan.planned_cost += static_cast<double>(e.n) * unit_cost(e.u);
        plan.entries.push_back(e);
    }
    return plan;
}

QuadratureResult cd_quad(const Integrand& f, const Kernel1D& k, const CDPlan& plan, const CostModel& model,
                         std::uint64_t seed) {
    QuadratureResult r{0.0, CostLedger(model), 0, seed, {}};
    const Integrand charged = [&f, &k, &r](const SparsePoint& x) { return ChargedIntegrand(f, k.anchor(), r.ledger)(x); };
    r.estimate = charged(SparsePoint{});
    for (std::size_t e = 0; e < plan.entries.size(); ++e) {
        const auto& entry = plan.entries[e];
        const Integrand component = [&charged, &entry](const SparsePoint& x) {
            return anchored_component_eval(charged, entry.u, x);
        };
        const double part = plan.stratified ? stratified_component_mc(component, k, entry.u, entry.n, derive_seed(seed, e))
                                            : tensor_mc(component, k, entry.u, entry.n, derive_seed(seed, e));
        r.parts.push_back(part);
        r.estimate += part;
    }
    r.n_evals = r.ledger.size();
    return r;
}

QuadratureResult cd_quad(const Integrand& f, const Kernel1D& k, const WeightFamily& w, double budget,
                         const CostModel& model, std::uint64_t seed) {
    return cd_quad(f, k, cd_plan(w, budget, model.dollar()), model, seed);
}

double tensor_mc(const Integrand& f_u, const Kernel1D& k, const VariableSet& u, std::size_t n, std::uint64_t seed) {
    if (u.empty()) return f_u(SparsePoint{});
    if (n < 1) throw ParameterError("Monte Carlo needs n >= 1");
    ProductMeasureSampler sampler(k, seed);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += f_u(sampler.draw(u));
    return sum / static_cast<double>(n);
}

double stratified_component_mc(const Integrand& f_u, const Kernel1D& k, const VariableSet& u, std::size_t n,
                               std::uint64_t seed) {
    if (u.empty()) return f_u(SparsePoint{});
    if (n < 2 || k.anchor() != k.lower()) return tensor_mc(f_u, k, u, n, seed);
    const double a = k.lower(), width = k.upper() - k.lower();
    const std::size_t d = u.size();

    // Control variate c * prod (x_j - a)/width with c the value at the far corner.
    SparsePoint corner;
    for (Index j : u) corner.set(j, k.upper());
    const double c = f_u(corner);
    const double control_integral = std::ldexp(c, -static_cast<int>(d));

    Rng rng(seed);
    const std::size_t m = n - 1;
    const double h = 1.0 / static_cast<double>(m);
    // Latin hypercube: an independent random permutation of the strata per coordinate.
    std::vector<std::vector<std::size_t>> perm(d, std::vector<std::size_t>(m));
    for (auto& p : perm) {
        for (std::size_t i = 0; i < m; ++i) p[i] = i;
        for (std::size_t i = m; i > 1; --i) std::swap(p[i - 1], p[rng.next() % i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<std::pair<Index, double>> coords;
        coords.reserve(d);
        double lin = c;
        for (std::size_t q = 0; q < d; ++q) {
            const double t = (static_cast<double>(perm[q][i]) + rng.uniform()) * h;
            coords.emplace_back(u[q], a + width * t);
            lin *= t;
        }
        sum += f_u(SparsePoint(std::move(coords))) - lin;
    }
    return control_integral + sum * h;
}

}  // namespace anchorquad
