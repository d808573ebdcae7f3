#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "anchorquad/cost_models.hpp"
#include "anchorquad/errors.hpp"
#include "anchorquad/rng.hpp"

#include <cmath>
#include <limits>

using namespace anchorquad;

namespace {

VariableSet random_set(Rng& rng, Index n, double p) {
    std::vector<Index> idx;
    for (Index j = 1; j <= n; ++j)
        if (rng.uniform() < p) idx.push_back(j);
    return VariableSet(idx);
}

std::vector<DollarFunction> dollars() {
    return {DollarFunction::poly(1.0), DollarFunction::poly(0.5), DollarFunction::poly(2.5), DollarFunction::exp(0.0),
            DollarFunction::exp(0.7), DollarFunction::table({1.0, 1.0, 3.0, 4.0})};
}

}  // namespace

TEST_CASE("dollar examples") {
    CHECK(DollarFunction::poly(1.0)(3) == 3.0);
    CHECK(DollarFunction::poly(2.0)(0) == 1.0);
    for (std::size_t nu : {0, 1, 5, 40}) CHECK(DollarFunction::exp(0.0)(nu) == 1.0);
    CHECK(DollarFunction::exp(1.0)(3) == doctest::Approx(std::exp(3.0)));
    const auto t = DollarFunction::table({1.0, 2.0, 4.0});
    CHECK(t(1) == 2.0);
    CHECK(t(4) == 16.0);
    CHECK(DollarFunction::table({1.0, 2.0, 2.0})(7) == 2.0);
}

TEST_CASE("dollar validation and parsing") {
    CHECK_THROWS_AS(DollarFunction::poly(0.0), ParameterError);
    CHECK_THROWS_AS(DollarFunction::exp(-1.0), ParameterError);
    CHECK_THROWS_AS(DollarFunction::table({}), ParameterError);
    CHECK_THROWS_AS(DollarFunction::table({0.5, 1.0}), ParameterError);
    CHECK_THROWS_AS(DollarFunction::table({1.0, 3.0, 2.0}), ParameterError);
    CHECK(DollarFunction::parse("poly:2")(3) == 9.0);
    CHECK(DollarFunction::parse("exp:0.5")(2) == doctest::Approx(std::exp(1.0)));
    CHECK(DollarFunction::parse("table:1,2,4")(2) == 4.0);
    CHECK_THROWS(DollarFunction::parse("cubic:1"));
    for (const auto& d : dollars()) {
        const auto back = DollarFunction::from_json(d.to_json());
        for (std::size_t nu = 0; nu < 12; ++nu) CHECK(back(nu) == d(nu));
    }
}

TEST_CASE("dollar functions are monotone and at least one") {
    for (const auto& d : dollars()) {
        double prev = d(0);
        CHECK(prev >= 1.0);
        for (std::size_t nu = 1; nu < 60; ++nu) {
            CHECK(d(nu) >= prev);
            prev = d(nu);
        }
    }
}

TEST_CASE("nested_cost examples") {
    const auto chain = NestedChain::explicit_sets({{1}, {1, 2, 3}});
    const auto poly = DollarFunction::poly(1.0);
    CHECK(nested_cost(chain, poly, {1, 2}) == 3.0);
    CHECK(nested_cost(chain, poly, {}) == 1.0);
    CHECK(nested_cost(NestedChain::explicit_sets({{2}, {1, 2, 3}}), DollarFunction::poly(2.0), {}) == 1.0);
    const auto small = NestedChain::explicit_sets({{1}, {1, 2}, VariableSet::range(10)});
    CHECK(std::isinf(nested_cost(small, poly, {11})));
    const auto doubling = NestedChain::doubling(2);
    CHECK(nested_cost(doubling, poly, {11}) == 16.0);
    CHECK(nested_cost(doubling, poly, {1000000}) == 1048576.0);
    const auto extended = NestedChain::doubling(2, {{1}});
    CHECK(extended.member(1) == VariableSet{1});
    CHECK(extended.member(2) == VariableSet{1, 2});
    CHECK(extended.member(3) == VariableSet::range(4));
    CHECK(*extended.first_containing({3}) == 3);
}

TEST_CASE("chain validation and parsing") {
    CHECK_THROWS_AS(NestedChain::explicit_sets({}), ParameterError);
    CHECK_THROWS_AS(NestedChain::explicit_sets({{}, {1}}), ParameterError);
    CHECK_THROWS_AS(NestedChain::explicit_sets({{1, 2}, {1, 2}}), ParameterError);
    CHECK_THROWS_AS(NestedChain::explicit_sets({{1}, {2, 3}}), ParameterError);
    CHECK_THROWS_AS(NestedChain::doubling(0), ParameterError);
    const auto c = NestedChain::parse("1;1,2;1,2,3");
    CHECK(c.member(3) == VariableSet{1, 2, 3});
    CHECK_FALSE(c.member(4));
    CHECK(NestedChain::parse("doubling:3").member(2) == VariableSet::range(6));
    for (const auto& chain : {c, NestedChain::doubling(3), NestedChain::doubling(2, {{1}})}) {
        const auto back = NestedChain::from_json(chain.to_json());
        for (std::size_t i = 1; i <= 6; ++i) CHECK(back.member(i) == chain.member(i));
    }
}

TEST_CASE("unrestricted_cost examples") {
    CHECK(unrestricted_cost(DollarFunction::poly(1.0), {1, 5}) == 2.0);
    CHECK(unrestricted_cost(DollarFunction::poly(1.0), {}) == 1.0);
    CHECK(unrestricted_cost(DollarFunction::exp(1.0), {1, 2, 3}) == doctest::Approx(std::exp(3.0)));
}

TEST_CASE("model dominance, monotonicity and first-member attainment") {
    Rng rng(99);
    const std::vector<NestedChain> chains = {NestedChain::doubling(1), NestedChain::doubling(3, {{2}, {2, 5}}),
                                             NestedChain::explicit_sets({{1}, {1, 2}, VariableSet::range(7)})};
    for (int trial = 0; trial < 300; ++trial) {
        const auto a = random_set(rng, 12, 0.25);
        const auto b = a.united(random_set(rng, 12, 0.2));
        for (const auto& d : dollars()) {
            CHECK(unrestricted_cost(d, a) <= unrestricted_cost(d, b));
            for (const auto& chain : chains) {
                const double nc = nested_cost(chain, d, a);
                CHECK(unrestricted_cost(d, a) <= nc);
                CHECK(nc <= nested_cost(chain, d, b));
                // the first containing member is the cheapest containing member
                std::size_t i = 1;
                double best = std::numeric_limits<double>::infinity();
                while (auto v = chain.member(i)) {
                    if (a.is_subset_of(*v)) best = std::min(best, d(v->size()));
                    if (v->size() > 64) break;
                    ++i;
                }
                CHECK(nc == best);
            }
        }
    }
}

TEST_CASE("ledger") {
    CostLedger empty(CostModel::unrestricted(DollarFunction::poly(1.0)));
    empty.charge({});
    CHECK(empty.total() == 1.0);

    CostLedger two(CostModel::unrestricted(DollarFunction::poly(1.0)));
    two.charge({1});
    two.charge({1, 2});
    CHECK(two.total() == 3.0);
    CHECK(two.to_csv() == "eval_index,active_set,charged\n0,\"{1}\",1\n1,\"{1,2}\",2\n");

    CostLedger nested(CostModel::nested(NestedChain::explicit_sets({{2}, {2, 3}}), DollarFunction::poly(1.0)));
    nested.charge({2});
    CHECK_FALSE(nested.infeasible());
    CHECK(std::isinf(nested.charge({1})));
    CHECK(nested.infeasible());
    CHECK(std::isinf(nested.total()));
}

TEST_CASE("ledger additivity under interleaving and merging") {
    Rng rng(5);
    const auto model = CostModel::unrestricted(DollarFunction::poly(1.5));
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<VariableSet> sets;
        for (int i = 0; i < 20; ++i) sets.push_back(random_set(rng, 8, 0.3));
        CostLedger whole(model), left(model), right(model);
        for (std::size_t i = 0; i < sets.size(); ++i) {
            whole.charge(sets[i]);
            (i % 3 == 0 ? left : right).charge(sets[i]);
        }
        double sum = 0.0;
        for (const auto& e : whole.entries()) {
            CHECK(e.charged >= 1.0);
            sum += e.charged;
        }
        CHECK(whole.total() == doctest::Approx(sum).epsilon(1e-14));
        left.merge(right);
        CHECK(left.total() == doctest::Approx(whole.total()).epsilon(1e-14));
        CHECK(left.size() == whole.size());
    }
}

TEST_CASE("cost model json") {
    const auto a = CostModel::nested(NestedChain::doubling(2), DollarFunction::exp(0.3));
    const auto b = CostModel::from_json(a.to_json());
    CHECK(b.tag() == "nested");
    CHECK(b.cost({1, 4}) == a.cost({1, 4}));
    const auto c = CostModel::from_json(nlohmann::json::parse(R"({"model":"unrestricted","dollar":{"kind":"poly","s":2}})"));
    CHECK(c.cost({1, 7}) == 4.0);
    CHECK_THROWS(CostModel::from_json(nlohmann::json::parse(R"({"model":"nested","dollar":{"kind":"poly","s":2}})")));
    CHECK_THROWS(CostModel::unrestricted(DollarFunction::poly(1.0)).chain());
}

TEST_CASE("certify_class examples") {
    const std::vector<VariableSet> t = {{1}, {1}, {2}, {1, 2}, {1, 2}};
    const auto res = certify_class(std::vector<std::vector<VariableSet>>{t, t, t});
    CHECK(res.name() == "res");
    CHECK(res.n == 5);
    CHECK(res.sets == t);
    const auto w1 = certify_class(std::vector<std::vector<VariableSet>>{t, t}, 1);
    CHECK(w1.name() == "res");
    const auto w2 = certify_class(std::vector<std::vector<VariableSet>>{t, t}, 2);
    CHECK(w2.name() == "res_omega(2)");
    const auto ran = certify_class(std::vector<std::vector<VariableSet>>{{{1}, {2}, {3}}, {{1}, {2}, {3}, {4}}});
    CHECK(ran.name() == "ran");
    // differing active sets at equal counts certify with the per-position union
    const auto u = certify_class(std::vector<std::vector<VariableSet>>{{{1}, {}}, {{2}, {3}}});
    CHECK(u.name() == "res");
    CHECK(u.sets[0] == VariableSet{1, 2});
    CHECK(u.sets[1] == VariableSet{3});
    CHECK_THROWS_AS(certify_class(std::vector<std::vector<VariableSet>>{}), ParameterError);

    CostLedger l(CostModel::unrestricted(DollarFunction::poly(1.0)));
    l.charge({1});
    l.charge({1, 3});
    CHECK(certify_class(std::vector<CostLedger>{l, l}, 2).name() == "res_omega(2)");
}
