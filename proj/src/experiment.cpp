#include "anchorquad/experiment.hpp"

#include "anchorquad/errors.hpp"
#include "anchorquad/quadrature.hpp"
#include "anchorquad/rng.hpp"
#include "anchorquad/weight_spec.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <mutex>
#include <thread>

namespace anchorquad {

namespace {

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    return out;
}

double to_double(const std::string& s) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ParameterError("not a number: '" + s + "'");
    }
    if (pos != s.size()) throw ParameterError("not a number: '" + s + "'");
    return v;
}

Kernel1D tabulated_wiener(double scale, std::size_t grid) {
    return Kernel1D::tabulated([scale](double x, double y) { return scale * std::min(x, y); }, 0.0, 1.0, 0.0, grid);
}

}  // namespace

Kernel1D parse_kernel(const std::string& text) {
    const auto parts = split(text, ':');
    if (parts.empty()) throw ParameterError("empty kernel spec");
    const double scale = parts.size() > 1 ? to_double(parts[1]) : 1.0;
    if (parts[0] == "wiener") return Kernel1D::wiener(scale);
    if (parts[0] == "tabulated-wiener")
        return tabulated_wiener(scale, parts.size() > 2 ? static_cast<std::size_t>(to_double(parts[2])) : Kernel1D::default_grid);
    throw ParameterError("unknown kernel '" + text + "' (expected wiener[:c] or tabulated-wiener[:c[:grid]])");
}

Kernel1D kernel_from_json(const nlohmann::json& j) {
    if (j.is_string()) return parse_kernel(j.get<std::string>());
    try {
        const auto family = j.at("family").get<std::string>();
        const double scale = j.value("scale", 1.0);
        if (family == "wiener") return Kernel1D::wiener(scale);
        if (family == "tabulated-wiener") return tabulated_wiener(scale, j.value("grid", Kernel1D::default_grid));
        throw ParameterError("unknown kernel family '" + family + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed kernel spec: ") + e.what());
    }
}

// ---------------------------------------------------------------- configuration

void ExperimentConfig::validate() const {
    if (!kernel) throw ConfigurationError("config needs a kernel");
    if (!weights) throw ConfigurationError("config needs a weight family");
    if (!cost) throw ConfigurationError("config needs a cost model");
    if (budgets.empty()) throw ConfigurationError("config needs at least one budget");
    for (std::size_t i = 0; i < budgets.size(); ++i) {
        if (!(budgets[i] > 0.0)) throw ConfigurationError("budgets must be positive");
        if (i > 0 && !(budgets[i] > budgets[i - 1])) throw ConfigurationError("budgets must be strictly increasing");
    }
    if (replications < 30) throw ConfigurationError("replications must be at least 30");
    if (tests.empty()) throw ConfigurationError("config needs at least one test function");
    for (const auto& t : tests) {
        if (t.f.terms().empty()) continue;
        const double n = func_norm(t.f, *weights);
        if (std::abs(n - 1.0) > 1e-9 && n != 0.0)
            throw ConfigurationError("test function '" + t.id + "' has norm " + fmt(n) + ", expected 1");
    }
    const auto& name = algorithm.name;
    if (name != "mc" && name != "uni3" && name != "ml" && name != "cd")
        throw ConfigurationError("unknown algorithm '" + name + "' (expected mc, uni3, ml or cd)");
    if (name == "ml" && cost->kind() != CostModel::Kind::Nested)
        throw ConfigurationError("the multilevel algorithm needs a nested cost model");
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    ExperimentConfig cfg;
    cfg.source = j;
    try {
        if (j.value("schema", 0) != 1) throw ConfigurationError("config must declare \"schema\": 1");
        cfg.kernel = std::make_shared<const Kernel1D>(kernel_from_json(j.at("kernel")));
        const auto& wj = j.at("weights");
        WeightFamily w = [&] {
            if (!wj.is_string()) return weights_from_json(wj);
            const auto text = wj.get<std::string>();
            const auto path = base_dir / text;
            if (text.find(':') == std::string::npos && std::filesystem::exists(path)) return parse_weights(path.string());
            return parse_weights(text);
        }();
        cfg.weights = w.bound(cfg.kernel->C0());
        cfg.cost = CostModel::from_json(j.at("cost_model"));
        const auto& aj = j.at("algorithm");
        cfg.algorithm.name = aj.at("name").get<std::string>();
        if (aj.contains("params")) cfg.algorithm.params = aj["params"];
        cfg.budgets = j.at("budgets").get<std::vector<double>>();
        cfg.replications = j.at("replications").get<std::size_t>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("bound")) {
            const auto& bj = j["bound"];
            BoundSpec b;
            b.model = parse_bound_model(bj.value("model", std::string("unr-res")));
            b.alpha = bj.value("alpha", 3.0);
            b.s = bj.value("s", cfg.cost->dollar().kind() == DollarFunction::Kind::Poly ? cfg.cost->dollar().s() : 1.0);
            if (bj.contains("omega")) b.omega = bj["omega"].get<int>();
            b.sigmas = bj.contains("sigmas") ? bj["sigmas"].get<std::vector<int>>() : default_sigmas(b.omega);
            b.slack = bj.value("slack", 0.2);
            cfg.bound = b;
        }
        cfg.output_dir = j.contains("output") ? base_dir / j["output"].get<std::string>() : base_dir / "out";
        cfg.tests = build_test_family(j.at("test_family"), cfg.kernel, *cfg.weights);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError(std::string("malformed config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigurationError("cannot read config '" + file.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError("config '" + file.string() + "' is not valid JSON: " + e.what());
    }
    return from_json(j, file.parent_path());
}

std::vector<TestFunction> build_test_family(const nlohmann::json& spec, std::shared_ptr<const Kernel1D> k,
                                            const WeightFamily& w) {
    std::vector<TestFunction> out;
    try {
        for (const auto& e : spec) {
            const auto kind = e.at("kind").get<std::string>();
            if (kind == "zero") {
                out.push_back({e.value("id", std::string("zero")), AnchoredFunction(k)});
            } else if (kind == "representer") {
                const auto cap = e.value("rank_cap", std::size_t{200});
                auto r = worst_case_residual(k, w, CoverFamily({VariableSet{}}), cap);
                out.push_back({e.value("id", std::string("representer")), std::move(r.g)});
            } else if (kind == "random_translates") {
                const auto count = e.value("count", std::size_t{3});
                const auto terms = e.value("terms", std::size_t{6});
                const auto pool_size = e.value("pool", std::size_t{20});
                Rng rng(e.value("seed", std::uint64_t{1}));
                const auto pool = enumerate_ordered(w, unbounded_order, pool_size).entries;
                for (std::size_t i = 0; i < count; ++i) {
                    AnchoredFunction f(k);
                    for (std::size_t t = 0; t < terms; ++t) {
                        const auto& u = pool[rng.next() % pool.size()].u;
                        Term term{u, 2.0 * rng.uniform() - 1.0, {}};
                        for (std::size_t p = 0; p < u.size(); ++p)
                            term.atoms.push_back(UnivariateAtom::translate(k->lower() + (k->upper() - k->lower()) * rng.uniform()));
                        f.add_term(std::move(term));
                    }
                    const double n = func_norm(f, w);
                    out.push_back({"translates_" + std::to_string(i + 1), n > 0.0 ? f.scaled(1.0 / n) : f});
                }
            } else if (kind == "explicit") {
                auto f = AnchoredFunction::from_json(e.at("function"), k);
                const double n = func_norm(f, w);
                out.push_back({e.value("id", std::string("explicit_") + std::to_string(out.size() + 1)),
                               n > 0.0 ? f.scaled(1.0 / n) : f});
            } else {
                throw ConfigurationError("unknown test function kind '" + kind + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError(std::string("malformed test family: ") + e.what());
    }
    return out;
}

QuadratureRule make_algorithm(const ExperimentConfig& cfg, double budget) {
    const auto k = cfg.kernel;
    const CostModel model = *cfg.cost;
    const auto& name = cfg.algorithm.name;
    const auto& params = cfg.algorithm.params;
    if (name == "mc") {
        const VariableSet v = VariableSet::range(params.value("dims", 1));
        const double c = model.cost(v);
        const auto n = static_cast<std::size_t>(std::floor(budget / c));
        if (n < 1) throw BudgetError("budget below the cost of one Monte Carlo sample");
        return [k, model, v, n](const Integrand& f, std::uint64_t seed) { return mc_quad(f, *k, v, n, model, seed); };
    }
    if (name == "uni3") {
        const Index j = params.value("coordinate", 1);
        const double c = model.cost(VariableSet{j});
        auto n = static_cast<std::size_t>(std::floor(budget / c));
        n -= n % 2;
        if (n < 4) throw BudgetError("budget below the cost of four univariate samples");
        return [k, model, n, j](const Integrand& f, std::uint64_t seed) { return uni_quad_rate3(f, *k, n, model, seed, j); };
    }
    if (name == "ml") {
        const auto plan = multilevel_plan(model, budget);
        return [k, model, plan](const Integrand& f, std::uint64_t seed) { return multilevel_quad(f, *k, plan, model, seed); };
    }
    if (name == "cd") {
        auto plan = cd_plan(*cfg.weights, budget, model.dollar());
        plan.stratified = params.value("stratified", true);
        return [k, model, plan](const Integrand& f, std::uint64_t seed) { return cd_quad(f, *k, plan, model, seed); };
    }
    throw ConfigurationError("unknown algorithm '" + name + "'");
}

// ---------------------------------------------------------------- statistics

std::pair<double, double> rmse_with_jackknife(const std::vector<double>& errors) {
    const std::size_t R = errors.size();
    if (R == 0) return {0.0, 0.0};
    double s = 0.0;
    for (double e : errors) s += e * e;
    const double rmse = std::sqrt(s / static_cast<double>(R));
    if (R < 2) return {rmse, 0.0};
    std::vector<double> loo(R);
    double mean = 0.0;
    for (std::size_t i = 0; i < R; ++i) {
        loo[i] = std::sqrt(std::max(0.0, s - errors[i] * errors[i]) / static_cast<double>(R - 1));
        mean += loo[i];
    }
    mean /= static_cast<double>(R);
    double v = 0.0;
    for (double x : loo) v += (x - mean) * (x - mean);
    return {rmse, std::sqrt(v * static_cast<double>(R - 1) / static_cast<double>(R))};
}

RateFit fit_rate(const std::vector<double>& budgets, const std::vector<double>& rmse) {
    if (budgets.size() != rmse.size()) throw ShapeError("budgets and rmse differ in length");
    RateFit fit;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < budgets.size(); ++i) {
        if (!(rmse[i] > 0.0)) {
            fit.notes.push_back("budget " + fmt(budgets[i]) + " excluded: zero rmse");
            continue;
        }
        x.push_back(std::log(budgets[i]));
        y.push_back(std::log(rmse[i]));
    }
    if (x.size() < 4) throw ParameterError("rate fit needs at least 4 rows with positive rmse");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double slope = sxy / sxx;
    fit.r = -slope;
    const double log_c = my - slope * mx;
    fit.c = std::exp(log_c);
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = y[i] - (log_c + slope * x[i]);
        ss += d * d;
    }
    fit.residual = std::sqrt(ss / n);
    fit.rows_used = x.size();
    return fit;
}

RateFit fit_rate(const ExperimentRun& run) {
    std::vector<double> n, e;
    std::vector<std::string> notes;
    for (const auto& row : run.rows) {
        if (row.skipped) {
            notes.push_back("budget " + fmt(row.budget) + " skipped: " + row.note);
            continue;
        }
        n.push_back(row.budget);
        e.push_back(row.worst_rmse);
    }
    auto fit = fit_rate(n, e);
    fit.notes.insert(fit.notes.begin(), notes.begin(), notes.end());
    return fit;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "PASS";
        case Verdict::Fail: return "FAIL";
        case Verdict::Vacuous: return "VACUOUS";
    }
    return "";
}

BoundComparison compare_with_bounds(double r, const ExponentBound& bound, double slack) {
    BoundComparison c;
    c.slack = slack;
    if (std::isinf(bound.bound) || !bound.necessary_condition_ok) return c;
    c.rate_cap = 1.0 / bound.bound;
    c.margin = c.rate_cap - r;
    c.verdict = r <= c.rate_cap + slack ? Verdict::Pass : Verdict::Fail;
    return c;
}

unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ANCHORQUAD_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return n;
}

// ---------------------------------------------------------------- orchestration

ExperimentRun run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentRun run;
    const std::size_t F = cfg.tests.size(), R = cfg.replications;
    std::vector<double> exact(F);
    std::vector<Integrand> integrands;
    for (std::size_t i = 0; i < F; ++i) {
        exact[i] = cfg.tests[i].f.integral();
        integrands.push_back(cfg.tests[i].f.as_integrand());
    }

    for (std::size_t b = 0; b < cfg.budgets.size(); ++b) {
        BudgetRow row;
        row.budget = cfg.budgets[b];
        QuadratureRule Q;
        try {
            Q = make_algorithm(cfg, row.budget);
        } catch (const BudgetError& e) {
            row.skipped = true;
            row.note = e.what();
            run.rows.push_back(std::move(row));
            continue;
        }
        std::vector<double> err(F * R), cost(F * R);
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto work = [&] {
            for (std::size_t cell; (cell = next.fetch_add(1)) < F * R;) {
                const std::size_t fi = cell / R, r = cell % R;
                try {
                    const auto res = Q(integrands[fi], derive_seed(derive_seed(cfg.seed, b), fi * R + r));
                    err[cell] = res.estimate - exact[fi];
                    cost[cell] = res.ledger.total();
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        const unsigned workers = std::min<std::size_t>(worker_count(), F * R);
        for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
        work();
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);

        double cost_sum = 0.0;
        for (std::size_t fi = 0; fi < F; ++fi) {
            std::vector<double> e(err.begin() + static_cast<std::ptrdiff_t>(fi * R),
                                  err.begin() + static_cast<std::ptrdiff_t>((fi + 1) * R));
            const auto [rmse, se] = rmse_with_jackknife(e);
            double c = 0.0;
            for (std::size_t r = 0; r < R; ++r) {
                c += cost[fi * R + r];
                row.realized_cost_max = std::max(row.realized_cost_max, cost[fi * R + r]);
            }
            cost_sum += c;
            row.cells.push_back({cfg.tests[fi].id, rmse, se, c / static_cast<double>(R)});
            if (fi == 0 || rmse > row.worst_rmse) {
                row.worst_rmse = rmse;
                row.worst_id = cfg.tests[fi].id;
            }
        }
        row.realized_cost_mean = cost_sum / static_cast<double>(F * R);
        if (row.realized_cost_max > 1.05 * row.budget) row.note = "realized cost exceeds 1.05 x budget";
        run.rows.push_back(std::move(row));
    }

    std::size_t usable = 0;
    for (const auto& row : run.rows)
        if (!row.skipped && row.worst_rmse > 0.0) ++usable;
    if (usable >= 4) run.fit = fit_rate(run);
    if (cfg.bound) {
        const auto& bs = *cfg.bound;
        run.bound = exponent_lower_bound(bs.model, bs.alpha, bs.s, *cfg.weights, bs.sigmas, bs.omega);
        if (run.fit) run.comparison = compare_with_bounds(run.fit->r, *run.bound, bs.slack);
    }
    return run;
}

// ---------------------------------------------------------------- persistence

std::string runs_csv(const ExperimentRun& run) {
    std::string out = "budget,realized_cost_mean,function_id,rmse,se\n";
    for (const auto& row : run.rows) {
        if (row.skipped) continue;
        for (const auto& c : row.cells)
            out += fmt(row.budget) + "," + fmt(row.realized_cost_mean) + "," + c.id + "," + fmt(c.rmse) + "," + fmt(c.se) + "\n";
    }
    return out;
}

std::string plotdata_csv(const ExperimentRun& run) {
    std::string out = "log_budget,log_worst_rmse\n";
    for (const auto& row : run.rows)
        if (!row.skipped && row.worst_rmse > 0.0) out += fmt(std::log(row.budget)) + "," + fmt(std::log(row.worst_rmse)) + "\n";
    return out;
}

nlohmann::ordered_json summary_json(const ExperimentRun& run, const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["algorithm"] = cfg.algorithm.name;
    j["cost_model"] = cfg.cost->tag();
    j["weights"] = cfg.weights->class_name();
    j["replications"] = cfg.replications;
    j["seed"] = cfg.seed;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : run.rows) {
        nlohmann::ordered_json r;
        r["budget"] = row.budget;
        r["skipped"] = row.skipped;
        if (!row.skipped) {
            r["realized_cost_mean"] = row.realized_cost_mean;
            r["realized_cost_max"] = row.realized_cost_max;
            r["worst_rmse"] = row.worst_rmse;
            r["worst_function"] = row.worst_id;
        }
        if (!row.note.empty()) r["note"] = row.note;
        rows.push_back(r);
    }
    j["rows"] = rows;
    if (run.fit) {
        j["fit"] = {{"r", run.fit->r}, {"c", run.fit->c}, {"residual", run.fit->residual}, {"rows_used", run.fit->rows_used},
                    {"notes", run.fit->notes}};
    } else {
        j["fit"] = nullptr;
    }
    if (run.bound) j["bound"] = run.bound->to_json();
    if (run.comparison) {
        j["verdict"] = to_string(run.comparison->verdict);
        j["rate_cap"] = run.comparison->rate_cap;
        j["margin"] = run.comparison->margin;
        j["slack"] = run.comparison->slack;
    } else if (run.bound) {
        j["verdict"] = to_string(Verdict::Vacuous);
    }
    return j;
}

void write_outputs(const ExperimentRun& run, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write = [&](const char* name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw ConfigurationError("cannot write " + (dir / name).string());
        out << text;
    };
    write("runs.csv", runs_csv(run));
    write("plotdata.csv", plotdata_csv(run));
    write("summary.json", summary_json(run, cfg).dump(2) + "\n");
}

}  // namespace anchorquad
