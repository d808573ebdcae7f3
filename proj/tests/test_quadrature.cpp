#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "anchorquad/errors.hpp"
#include "anchorquad/quadrature.hpp"
#include "anchorquad/rng.hpp"
#include "anchorquad/weight_spec.hpp"

#include <cmath>
#include <functional>
#include <limits>

using namespace anchorquad;

namespace {

auto wiener() { return std::make_shared<const Kernel1D>(Kernel1D::wiener()); }

CostModel unr() { return CostModel::unrestricted(DollarFunction::poly(1.0)); }

Term translates(VariableSet u, double coeff, double t) {
    Term term{u, coeff, {}};
    for (std::size_t i = 0; i < u.size(); ++i) term.atoms.push_back(UnivariateAtom::translate(t));
    return term;
}

struct Moments {
    double mean = 0.0, se = 0.0, var = 0.0;
};

Moments replicate(std::size_t R, const std::function<double(std::uint64_t)>& run) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
        const double x = run(derive_seed(2024, r));
        s += x;
        s2 += x * x;
    }
    Moments m;
    m.mean = s / R;
    m.var = std::max(0.0, (s2 - R * m.mean * m.mean) / (R - 1));
    m.se = std::sqrt(m.var / R);
    return m;
}

/// Least-squares slope of -log(rmse) against log(n).
double rate(const std::vector<double>& n, const std::vector<double>& rmse) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) {
        const double x = std::log(n[i]), y = -std::log(rmse[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

double rmse_of(std::size_t R, double exact, const std::function<double(std::uint64_t)>& run) {
    double s = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
        const double e = run(derive_seed(77, r)) - exact;
        s += e * e;
    }
    return std::sqrt(s / R);
}

}  // namespace

TEST_CASE("mc_quad examples") {
    const auto k = wiener();
    const AnchoredFunction zero(k);
    CHECK(mc_quad(zero.as_integrand(), *k, {1, 2}, 17, unr(), 1).estimate == 0.0);
    const auto c = AnchoredFunction::constant(k, 2.5);
    for (std::size_t n : {1, 3, 100}) CHECK(mc_quad(c.as_integrand(), *k, {1}, n, unr(), 9).estimate == 2.5);

    const AnchoredFunction f(k, {translates({1}, 1.0, 1.0)});
    const auto r = mc_quad(f.as_integrand(), *k, {1}, 10000, unr(), 5);
    for (const auto& e : r.ledger.entries()) CHECK(e.active == VariableSet{1});
    double s = 0.0, s2 = 0.0;
    ProductMeasureSampler sampler(*k, 5);
    for (int i = 0; i < 10000; ++i) {
        const double y = f(sampler.draw({1}));
        s += y;
        s2 += y * y;
    }
    const double sigma = std::sqrt(s2 / 10000.0 - (s / 10000.0) * (s / 10000.0));
    CHECK(std::abs(r.estimate - 0.5) <= 4.0 * sigma / 100.0);
    CHECK(r.n_evals == r.ledger.size());
    CHECK(r.ledger.total() == 10000.0);
    CHECK_THROWS_AS(mc_quad(f.as_integrand(), *k, {1}, 0, unr(), 5), ParameterError);
}

TEST_CASE("mc_quad is unbiased for the projection") {
    const auto k = wiener();
    const AnchoredFunction f(k, {translates({1}, 1.0, 0.7), translates({1, 2}, -2.0, 0.4), translates({3}, 5.0, 1.0)});
    const auto m = replicate(10000, [&](std::uint64_t s) { return mc_quad(f.as_integrand(), *k, {1, 2}, 4, unr(), s).estimate; });
    const double covered = AnchoredFunction(k, {f.terms()[0], f.terms()[1]}).integral();
    CHECK(std::abs(m.mean - covered) <= 4.0 * m.se);
}

TEST_CASE("uni_quad_rate3 is exact on linear functions") {
    const auto k = wiener();
    for (double c : {-3.0, 0.5, 2.0}) {
        const AnchoredFunction f(k, {translates({1}, c, 1.0)});
        for (std::size_t n : {4, 6, 64, 1000}) {
            const auto r = uni_quad_rate3(f.as_integrand(), *k, n, unr(), n);
            CHECK(r.estimate == doctest::Approx(c / 2.0).epsilon(1e-13));
            CHECK(r.ledger.size() == n);
        }
    }
    const AnchoredFunction g(k, {translates({1}, 1.0, 0.5)});
    CHECK_THROWS_AS(uni_quad_rate3(g.as_integrand(), *k, 5, unr(), 1), ParameterError);
    CHECK_THROWS_AS(uni_quad_rate3(g.as_integrand(), *k, 2, unr(), 1), ParameterError);
}

TEST_CASE("uni_quad_rate3 rate on a kernel translate") {
    const auto k = wiener();
    const AnchoredFunction f(k, {translates({1}, 1.0, 0.5)});
    const double exact = f.integral();
    std::vector<double> ns, errs;
    for (int p = 4; p <= 12; ++p) {
        const std::size_t n = std::size_t{1} << p;
        ns.push_back(static_cast<double>(n));
        errs.push_back(rmse_of(100, exact, [&](std::uint64_t s) { return uni_quad_rate3(f.as_integrand(), *k, n, unr(), s).estimate; }));
    }
    const double slope = rate(ns, errs);
    CHECK(std::abs(slope - 1.5) <= 0.2);

    // self-consistency: the n = 2^10 error against the c n^{-3/2} fit from n <= 2^8
    double c = 0.0;
    for (std::size_t i = 0; i < 5; ++i) c = std::max(c, errs[i] * std::pow(ns[i], 1.5));
    CHECK(errs[6] <= 10.0 * c * std::pow(1024.0, -1.5));

    const auto m = replicate(10000, [&](std::uint64_t s) { return uni_quad_rate3(f.as_integrand(), *k, 4, unr(), s).estimate; });
    CHECK(std::abs(m.mean - exact) <= 4.0 * m.se);
}

TEST_CASE("multilevel_quad") {
    const auto k = wiener();
    const auto nested = CostModel::nested(NestedChain::explicit_sets({{1}, {1, 2}, {1, 2, 3}}), DollarFunction::poly(1.0));

    const AnchoredFunction one(k, {translates({1}, 1.0, 0.6)});
    const LevelPlan single{{{{1}, 50}}};
    CHECK(multilevel_quad(one.as_integrand(), *k, single, nested, 3).estimate ==
          mc_quad(one.as_integrand(), *k, {1}, 50, nested, derive_seed(3, 0)).estimate);

    const LevelPlan three{{{{1}, 20}, {{1, 2}, 10}, {{1, 2, 3}, 5}}};
    std::vector<double> corrections;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto r = multilevel_quad(one.as_integrand(), *k, three, nested, s);
        REQUIRE(r.parts.size() == 3);
        double sum = 0.0;
        for (double p : r.parts) sum += p;
        CHECK(sum == r.estimate);
        corrections.push_back(r.parts[1]);
        corrections.push_back(r.parts[2]);
    }
    double var = 0.0;
    for (double c : corrections) var += c * c;
    CHECK(var / corrections.size() < 1e-20);

    const AnchoredFunction two(k, {translates({1}, 1.0, 0.3), translates({1, 2}, 2.0, 0.8)});
    const LevelPlan pair{{{{1}, 4}, {{1, 2}, 2}}};
    const auto m = replicate(10000, [&](std::uint64_t s) { return multilevel_quad(two.as_integrand(), *k, pair, nested, s).estimate; });
    CHECK(std::abs(m.mean - two.integral()) <= 4.0 * m.se);

    const auto r = multilevel_quad(two.as_integrand(), *k, pair, nested, 1);
    CHECK_FALSE(r.ledger.infeasible());
    for (const auto& e : r.ledger.entries()) CHECK(e.active.is_subset_of({1, 2}));

    CHECK_THROWS_AS((LevelPlan{{{{1, 2}, 3}, {{1}, 3}}}).validate(), ParameterError);
    CHECK_THROWS_AS((LevelPlan{{{{1}, 0}}}).validate(), ParameterError);
}

TEST_CASE("multilevel_plan") {
    const auto nested = CostModel::nested(NestedChain::doubling(1), DollarFunction::poly(1.0));
    const auto p = multilevel_plan(nested, 1024.0);
    p.validate();
    CHECK(p.levels.size() <= 10);
    double cost = 0.0;
    for (const auto& l : p.levels) cost += static_cast<double>(l.n) * nested.cost(l.v);
    CHECK(cost <= 1024.0);
    CHECK_THROWS_AS(multilevel_plan(nested, 0.5), BudgetError);
    CHECK_THROWS_AS(multilevel_plan(CostModel::unrestricted(DollarFunction::poly(1.0)), 100.0), ConfigurationError);
}

TEST_CASE("tensor_mc examples") {
    const auto k = wiener();
    const AnchoredFunction c = AnchoredFunction::constant(k, 1.75);
    CHECK(tensor_mc(c.as_integrand(), *k, {}, 5, 1) == 1.75);
    const AnchoredFunction zero(k);
    CHECK(tensor_mc(zero.as_integrand(), *k, {1, 2}, 100, 1) == 0.0);
    const AnchoredFunction f(k, {translates({1, 2}, 1.0, 1.0)});
    const std::size_t n = 10000;
    const double est = tensor_mc(f.as_integrand(), *k, {1, 2}, n, 4);
    // Var(x1 x2) = 1/9 - 1/16
    CHECK(std::abs(est - 0.25) <= 4.0 * std::sqrt((1.0 / 9.0 - 1.0 / 16.0) / n));
}

TEST_CASE("stratified_component_mc is unbiased and exact on multilinear corners") {
    const auto k = wiener();
    const AnchoredFunction lin(k, {translates({1, 2, 3}, 1.5, 1.0)});
    CHECK(stratified_component_mc(lin.as_integrand(), *k, {1, 2, 3}, 9, 1) == doctest::Approx(1.5 / 8.0).epsilon(1e-13));
    const AnchoredFunction f(k, {translates({1, 2}, 1.0, 0.4)});
    const auto m = replicate(10000, [&](std::uint64_t s) { return stratified_component_mc(f.as_integrand(), *k, {1, 2}, 5, s); });
    CHECK(std::abs(m.mean - f.integral()) <= 4.0 * m.se);
}

TEST_CASE("cd_quad examples") {
    const auto k = wiener();
    const auto w = parse_weights("prod:pow:1:3").bound(k->C0());
    const auto c = AnchoredFunction::constant(k, 3.0);
    const auto rc = cd_quad(c.as_integrand(), *k, w, 1.0, unr(), 1);
    CHECK(rc.estimate == 3.0);
    CHECK(rc.n_evals == 1);
    CHECK(rc.ledger.total() == 1.0);

    const auto single = WeightFamily::explicit_weights({{{1}, 1.0}}).bound(k->C0());
    const AnchoredFunction f(k, {translates({1}, 1.0, 0.6)});
    for (bool stratified : {false, true}) {
        auto plan = cd_plan(single, 64.0, DollarFunction::poly(1.0));
        plan.stratified = stratified;
        REQUIRE(plan.entries.size() == 1);
        const auto m = replicate(10000, [&](std::uint64_t s) { return cd_quad(f.as_integrand(), *k, plan, unr(), s).estimate; });
        CHECK(std::abs(m.mean - f.integral()) <= 4.0 * m.se);
    }

    // a term on a set outside the plan is missed exactly
    const AnchoredFunction g(k, {translates({1}, 1.0, 0.6), translates({2}, 2.0, 0.9)});
    const double excluded = AnchoredFunction(k, {g.terms()[1]}).integral();
    auto plan = cd_plan(single, 64.0, DollarFunction::poly(1.0));
    plan.stratified = false;
    const auto m = replicate(10000, [&](std::uint64_t s) { return cd_quad(g.as_integrand(), *k, plan, unr(), s).estimate; });
    CHECK(std::abs(m.mean - (g.integral() - excluded)) <= 4.0 * m.se);
    CHECK(std::abs(m.mean - g.integral()) > 10.0 * m.se);

    const auto tiny = cd_quad(g.as_integrand(), *k, single, 2.0, unr(), 1);
    CHECK(tiny.estimate == 0.0);
    CHECK(tiny.n_evals == 1);
    CHECK_THROWS_AS(cd_quad(g.as_integrand(), *k, single, 0.5, unr(), 1), BudgetError);
}

TEST_CASE("cd_plan respects the budget and the hat order") {
    for (const char* spec : {"prod:pow:1:3", "prod:pow:1:2", "pod:pow:1:3:1,2", "lex:pow:1:3:2"}) {
        const auto w = parse_weights(spec).bound(1.0 / 3.0);
        for (double N : {1.0, 8.0, 100.0, 5000.0}) {
            for (const auto& d : {DollarFunction::poly(1.0), DollarFunction::exp(0.5)}) {
                const auto p = cd_plan(w, N, d);
                double cost = d(0);
                for (std::size_t i = 0; i < p.entries.size(); ++i) {
                    const auto& e = p.entries[i];
                    CHECK(e.n >= 1);
                    cost += static_cast<double>(e.n) * std::ldexp(d(e.u.size()), static_cast<int>(e.u.size()));
                    if (i > 0) CHECK(p.entries[i - 1].hat >= e.hat);
                }
                CHECK(cost <= N * (1 + 1e-12));
                CHECK(cost == doctest::Approx(p.planned_cost));
            }
        }
    }
}

TEST_CASE("unbiasedness of every engine on covered functions") {
    const auto k = wiener();
    const auto w = WeightFamily::explicit_weights({{{1}, 1.0}, {{2}, 0.5}, {{1, 2}, 0.25}}).bound(k->C0());
    const AnchoredFunction f(k, {AnchoredFunction::constant(k, 0.3).terms()[0], translates({1}, 1.0, 0.6),
                                 translates({2}, -1.0, 0.2), translates({1, 2}, 2.0, 0.7)});
    const double exact = f.integral();
    const auto nested = CostModel::nested(NestedChain::explicit_sets({{1}, {1, 2}}), DollarFunction::poly(1.0));
    const std::vector<std::pair<const char*, std::function<double(std::uint64_t)>>> engines = {
        {"mc", [&](std::uint64_t s) { return mc_quad(f.as_integrand(), *k, {1, 2}, 3, unr(), s).estimate; }},
        {"ml", [&](std::uint64_t s) { return multilevel_quad(f.as_integrand(), *k, LevelPlan{{{{1}, 3}, {{1, 2}, 2}}}, nested, s).estimate; }},
        {"cd", [&](std::uint64_t s) { return cd_quad(f.as_integrand(), *k, w, 60.0, unr(), s).estimate; }},
    };
    for (const auto& [name, run] : engines) {
        INFO(name);
        const auto m = replicate(10000, run);
        CHECK(std::abs(m.mean - exact) <= 4.0 * m.se);
    }
}

TEST_CASE("seed determinism") {
    const auto k = wiener();
    const auto w = parse_weights("prod:pow:1:3").bound(k->C0());
    const AnchoredFunction f(k, {translates({1}, 1.0, 0.6), translates({2, 3}, 0.5, 0.3)});
    const auto nested = CostModel::nested(NestedChain::doubling(1), DollarFunction::poly(1.0));
    for (std::uint64_t seed : {0ULL, 1ULL, 0xdeadbeefULL}) {
        const auto a = cd_quad(f.as_integrand(), *k, w, 500.0, unr(), seed);
        const auto b = cd_quad(f.as_integrand(), *k, w, 500.0, unr(), seed);
        CHECK(a.estimate == b.estimate);
        CHECK(a.ledger.to_csv() == b.ledger.to_csv());
        const auto plan = multilevel_plan(nested, 256.0);
        CHECK(multilevel_quad(f.as_integrand(), *k, plan, nested, seed).estimate ==
              multilevel_quad(f.as_integrand(), *k, plan, nested, seed).estimate);
        CHECK(uni_quad_rate3(f.as_integrand(), *k, 16, unr(), seed).estimate ==
              uni_quad_rate3(f.as_integrand(), *k, 16, unr(), seed).estimate);
        CHECK(mc_quad(f.as_integrand(), *k, {1, 2, 3}, 16, unr(), seed).estimate ==
              mc_quad(f.as_integrand(), *k, {1, 2, 3}, 16, unr(), seed).estimate);
    }
}

TEST_CASE("ledger faithfulness and certification") {
    const auto k = wiener();
    const auto w = parse_weights("prod:pow:1:3").bound(k->C0());
    AnchoredFunction f(k, {translates({1}, 1.0, 0.6), translates({1, 2}, 0.5, 0.3), translates({4}, 1.0, 0.8)});
    std::vector<VariableSet> seen;
    const Integrand spy = [&](const SparsePoint& x) {
        seen.push_back(x.active_set(k->anchor()));
        return f(x);
    };
    const auto r = cd_quad(spy, *k, w, 300.0, unr(), 3);
    REQUIRE(seen.size() == r.ledger.size());
    for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == r.ledger.entries()[i].active);

    const auto plan = cd_plan(w, 300.0, DollarFunction::poly(1.0));
    std::size_t omega = 0;
    for (const auto& e : plan.entries) omega = std::max(omega, e.u.size());
    std::vector<CostLedger> ledgers;
    for (std::uint64_t s = 0; s < 10; ++s) ledgers.push_back(cd_quad(f.as_integrand(), *k, plan, unr(), s).ledger);
    CHECK(certify_class(ledgers).name() == "res");
    CHECK(certify_class(ledgers, static_cast<int>(omega)).name() == "res_omega(" + std::to_string(omega) + ")");
}
