#include "anchorquad/anchored_function.hpp"
#include "anchorquad/experiment.hpp"
#include "anchorquad/kernel.hpp"
#include "anchorquad/lower_bounds.hpp"
#include "anchorquad/quadrature.hpp"
#include "anchorquad/rng.hpp"
#include "anchorquad/weight_spec.hpp"
#include "anchorquad/weights.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

using namespace anchorquad;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, double limit_s, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < limit_s;
    const bool ok = o.pass && in_time;
    if (!ok) ++failures;
    std::printf("%s criterion %d: %s (%.2f s, limit %.0f s%s)\n", ok ? "PASS" : "FAIL", id, o.detail.c_str(), secs, limit_s,
                in_time ? "" : ", over time");
    std::fflush(stdout);
}

std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

auto wiener() { return std::make_shared<const Kernel1D>(Kernel1D::wiener()); }

VariableSet random_set(Rng& rng, Index n, double p) {
    std::vector<Index> idx;
    for (Index j = 1; j <= n; ++j)
        if (rng.uniform() < p) idx.push_back(j);
    return VariableSet(idx);
}

nlohmann::json rate_config() {
    return nlohmann::json::parse(R"({
        "schema": 1,
        "kernel": {"family": "wiener"},
        "weights": "prod:pow:1:4",
        "cost_model": {"model": "unrestricted", "dollar": {"kind": "poly", "s": 1}},
        "algorithm": {"name": "cd"},
        "test_family": [
            {"kind": "representer", "rank_cap": 200},
            {"kind": "random_translates", "count": 3, "terms": 6, "pool": 20, "seed": 11}
        ],
        "budgets": [64, 128, 256, 512, 1024, 2048, 4096, 8192, 16384],
        "replications": 100,
        "seed": 20260101,
        "bound": {"model": "unr-res", "alpha": 3, "s": 1}
    })");
}

std::string first_rate_csv;

}  // namespace

int main() {
    criterion(1, 1.0, [] {
        const auto k = Kernel1D::wiener();
        const auto t = parse_kernel("tabulated-wiener");
        const bool exact = k.M() == 0.5 && k.C0() == 1.0 / 3.0;
        const double dm = std::abs(t.M() - 0.5), dc = std::abs(t.C0() - 1.0 / 3.0);
        return Outcome{exact && dm <= 1e-6 && dc <= 1e-6,
                       "M=" + num(k.M()) + " C0=" + num(k.C0()) + " tabulated |dM|=" + num(dm) + " |dC0|=" + num(dc)};
    });

    criterion(2, 5.0, [] {
        const auto hand = WeightFamily::explicit_weights({{{1}, 1.0}, {{2}, 0.125}, {{1, 2}, 0.125}}).bound(1.0 / 3.0);
        const double h = b_squared(hand, CoverFamily(std::vector<VariableSet>{{1}}), 1e-12).value;
        Rng rng(2);
        double worst = 0.0;
        for (int trial = 0; trial < 200; ++trial) {
            std::map<VariableSet, double> sets;
            const int count = 1 + static_cast<int>(rng.next() % 20);
            for (int i = 0; i < count; ++i) {
                auto u = random_set(rng, 8, 0.35);
                if (u.empty()) u = VariableSet{static_cast<Index>(1 + rng.next() % 8)};
                sets[u] = rng.uniform();
            }
            const auto w = WeightFamily::explicit_weights(WeightList(sets.begin(), sets.end())).bound(1.0 / 3.0);
            std::vector<VariableSet> cover;
            const int members = 1 + static_cast<int>(rng.next() % 3);
            for (int i = 0; i < members; ++i) cover.push_back(random_set(rng, 8, 0.5));
            const CoverFamily c(cover);
            double total = 0.0, covered = 0.0;
            for (const auto& [u, g] : sets) {
                const double hat = g * std::pow(1.0 / 3.0, static_cast<double>(u.size()));
                total += hat;
                if (c.covers(u)) covered += hat;
            }
            worst = std::max(worst, std::abs(b_squared(w, c, 1e-12).value - (total - covered)));
        }
        return Outcome{std::abs(h - 1.0 / 18.0) <= 1e-16 && worst <= 1e-12,
                       "hand b^2=" + num(h) + " max two-path gap " + num(worst) + " over 200 families"};
    });

    criterion(3, 60.0, [] {
        const auto k = Kernel1D::wiener();
        const auto w = parse_weights("prod:pow:1:3").bound(k.C0());
        const double closed = operator_norm_sq(w, 1e-12).full;
        double partial = 1.0;
        for (int j = 1; j <= 1000000; ++j) partial *= 1.0 + std::pow(static_cast<double>(j), -3.0) / 3.0;
        double target = 1.0;
        for (int j = 1; j <= 10; ++j) target *= 1.0 + std::pow(static_cast<double>(j), -3.0) / 3.0;
        ProductMeasureSampler sx(k, 31), sy(k, 32);
        const VariableSet box = VariableSet::range(10);
        const int n = 100000;
        double s = 0.0, s2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double v = Kgamma_eval(k, w, sx.draw(box), sy.draw(box)).value;
            s += v;
            s2 += v * v;
        }
        const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / (n - 1));
        const bool ok = std::abs(closed - partial) <= 1e-8 && std::abs(mean - target) <= 3.0 * se;
        return Outcome{ok, "closed " + num(closed) + " vs partial " + num(partial) + "; MC " + num(mean) + " vs " + num(target) +
                               " (3 SE = " + num(3 * se) + ")"};
    });

    criterion(4, 120.0, [] {
        const auto k = wiener();
        const AnchoredFunction f(k, {{{1}, 1.0, {UnivariateAtom::translate(0.7)}}});
        const double exact = f.integral();
        const auto model = CostModel::unrestricted(DollarFunction::poly(1.0));
        std::vector<double> ns, errs;
        for (int p = 4; p <= 12; ++p) {
            const std::size_t n = std::size_t{1} << p;
            double s = 0.0;
            for (std::uint64_t r = 0; r < 200; ++r) {
                const double e = uni_quad_rate3(f.as_integrand(), *k, n, model, derive_seed(4, p * 1000 + r)).estimate - exact;
                s += e * e;
            }
            ns.push_back(static_cast<double>(n));
            errs.push_back(std::sqrt(s / 200.0));
        }
        const double r = fit_rate(ns, errs).r;
        return Outcome{r >= 1.3 && r <= 1.7, "fitted slope " + num(r)};
    });

    criterion(5, 1.0, [] {
        const auto d3 = parse_weights("prod:pow:1:3").bound(1.0 / 3.0);
        const auto d4 = parse_weights("prod:pow:1:4").bound(1.0 / 3.0);
        const auto sig = default_sigmas();
        const double nest = exponent_lower_bound(BoundModel::NestRan, 3.0, 1.0, d3, sig).bound;
        const double unr = exponent_lower_bound(BoundModel::UnrRes, 3.0, 1.0, d3, sig).bound;
        const double omg = exponent_lower_bound(BoundModel::UnrResOmega, 3.0, 1.0, d3, sig).bound;
        const double unr4 = exponent_lower_bound(BoundModel::UnrRes, 3.0, 1.0, d4, sig).bound;
        const double pw = pw11_upper_bound(3.0, d4);
        const bool ok = nest == 1.0 && unr == 1.0 && omg == 1.0 && unr4 == 2.0 / 3.0 && pw == 2.0 / 3.0;
        return Outcome{ok, "nest_ran " + num(nest) + ", unr_res " + num(unr) + ", unr_res_omega " + num(omg) +
                               "; decay 4: unr_res " + num(unr4) + ", pw11 " + num(pw)};
    });

    criterion(6, 30.0, [] {
        const auto k = wiener();
        const auto hand = WeightFamily::explicit_weights({{{1}, 1.0}, {{2}, 0.125}, {{1, 2}, 0.125}}).bound(k->C0());
        const QuadratureRule Q = [k](const Integrand& f, std::uint64_t seed) {
            return mc_quad(f, *k, {1}, 32, CostModel::unrestricted(DollarFunction::poly(1.0)), seed);
        };
        const auto r = fooling_experiment(Q, k, hand, CoverFamily(std::vector<VariableSet>{{1}}), 200, 6);
        const double floor = 0.95 * std::sqrt(1.0 / 18.0);
        return Outcome{r.empirical_rmse >= floor && r.certificate == "res",
                       "rmse " + num(r.empirical_rmse) + " >= " + num(floor) + ", certificate " + r.certificate};
    });

    criterion(7, 5.0, [] {
        const auto k = wiener();
        Rng rng(7);
        double worst = 0.0;
        std::size_t checks = 0;
        for (int trial = 0; trial < 100; ++trial) {
            AnchoredFunction f(k);
            const int terms = 1 + static_cast<int>(rng.next() % 8);
            for (int t = 0; t < terms; ++t) {
                std::vector<Index> idx;
                for (Index j = 1; j <= 6 && idx.size() < 4; ++j)
                    if (rng.uniform() < 0.5) idx.push_back(j);
                Term term{VariableSet(idx), 2.0 * rng.uniform() - 1.0, {}};
                for (std::size_t p = 0; p < idx.size(); ++p)
                    term.atoms.push_back(rng.uniform() < 0.3 ? UnivariateAtom::mean_embedding() : UnivariateAtom::translate(rng.uniform()));
                f.add_term(std::move(term));
            }
            SparsePoint x;
            for (Index j = 1; j <= 6; ++j) x.set(j, rng.uniform());
            const auto box = VariableSet::range(6);
            for (unsigned long long m = 0; m < 64; ++m) {
                const auto u = box.subset_by_mask(m);
                if (u.size() > 4) continue;
                double direct = 0.0;
                for (std::size_t i = 0; i < f.terms().size(); ++i)
                    if (f.terms()[i].u == u) direct += f.term_value(i, x);
                worst = std::max(worst, std::abs(anchored_component_eval(f.as_integrand(), u, x) - direct));
                ++checks;
            }
        }
        return Outcome{worst <= 1e-10, "max deviation " + num(worst) + " over " + std::to_string(checks) + " components"};
    });

    criterion(8, 600.0, [] {
        const auto cfg = ExperimentConfig::from_json(rate_config());
        const auto run = run_experiment(cfg);
        first_rate_csv = runs_csv(run);
        if (!run.fit || !run.comparison) return Outcome{false, "no rate fit or bound comparison"};
        double cost_ratio = 0.0;
        for (const auto& row : run.rows) cost_ratio = std::max(cost_ratio, row.realized_cost_max / row.budget);
        const double r = run.fit->r;
        const bool ok = run.comparison->verdict == Verdict::Pass && r >= 0.5;
        return Outcome{ok, "rate " + num(r) + ", cap 1/p = " + num(run.comparison->rate_cap) + " + slack 0.2, verdict " +
                               to_string(run.comparison->verdict) + ", max cost/budget " + num(cost_ratio)};
    });

    criterion(9, 600.0, [] {
        if (first_rate_csv.empty()) return Outcome{false, "criterion 8 produced no output"};
        const auto again = runs_csv(run_experiment(ExperimentConfig::from_json(rate_config())));
        return Outcome{again == first_rate_csv, again == first_rate_csv ? "runs.csv byte-identical (" +
                                                                              std::to_string(again.size()) + " bytes)"
                                                                        : "runs.csv differs between runs"};
    });

    return failures == 0 ? 0 : 1;
}
