#include "anchorquad/cost_models.hpp"
#include "anchorquad/errors.hpp"
#include "anchorquad/experiment.hpp"
#include "anchorquad/lower_bounds.hpp"
#include "anchorquad/quadrature.hpp"
#include "anchorquad/rng.hpp"
#include "anchorquad/weight_spec.hpp"
#include "anchorquad/weights.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

using namespace anchorquad;
using ojson = nlohmann::ordered_json;

namespace {

ojson num(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

std::vector<int> parse_sigmas(const std::string& text) {
    std::vector<int> out;
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const int a = parse_order(text.substr(0, dots)), b = parse_order(text.substr(dots + 2));
        if (b < a) throw ParameterError("empty sigma range '" + text + "'");
        for (int s = a; s <= b; ++s) out.push_back(s);
        return out;
    }
    std::string part;
    std::istringstream in(text);
    while (std::getline(in, part, ',')) out.push_back(parse_order(part));
    if (out.empty()) throw ParameterError("no sigma values given");
    return out;
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ConfigurationError("cannot write '" + out + "'");
    f << text;
}

CostModel make_cost_model(const std::string& model, const std::string& dollar, const std::string& chain) {
    auto d = DollarFunction::parse(dollar);
    if (model == "unrestricted") return CostModel::unrestricted(d);
    if (model == "nested") return CostModel::nested(NestedChain::parse(chain), d);
    throw ParameterError("--model must be nested or unrestricted");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Randomized integration on weighted anchored kernel spaces"};
    app.require_subcommand(1);

    std::string kernel_spec = "wiener";
    std::string weights_spec, out, cover_spec, function_file, algo = "cd", model = "unrestricted", dollar = "poly:1",
                                                                chain = "doubling:1", sigma_text = "inf", sigmas_text = "1..6",
                                                                bound_model, config_file, omega_text;
    std::size_t count = 10, ranks = 1000, reps = 1, n_samples = 100, dims = 1, rank_cap = 1000;
    double tail_tol = 1e-8, alpha = 3.0, s = 1.0, kappa = 3.0, budget = 1024, decay_value = 0.0;
    std::uint64_t seed = 0;

    auto* constants = app.add_subcommand("constants", "kernel constants M and C0");
    constants->add_option("--kernel", kernel_spec, "wiener[:c] or tabulated-wiener[:c[:grid]]");

    auto* weights = app.add_subcommand("weights", "weight-family diagnostics");
    weights->require_subcommand(1);
    auto add_weight_opts = [&](CLI::App* c) {
        c->add_option("--weights", weights_spec, "weight spec or JSON file")->required();
        c->add_option("--kernel", kernel_spec, "kernel spec");
    };
    auto* w_enum = weights->add_subcommand("enumerate", "hat-ordered support as CSV");
    add_weight_opts(w_enum);
    w_enum->add_option("--sigma", sigma_text, "cut-off order or inf");
    w_enum->add_option("--count", count, "number of sets")->check(CLI::PositiveNumber);
    w_enum->add_option("--out", out, "CSV file (default stdout)");
    auto* w_decay = weights->add_subcommand("decay", "decay report");
    add_weight_opts(w_decay);
    w_decay->add_option("--sigma", sigma_text, "cut-off order or inf");
    w_decay->add_option("--ranks", ranks, "ranks used by the estimator");
    auto* w_tstar = weights->add_subcommand("tstar", "t* report");
    add_weight_opts(w_tstar);
    w_tstar->add_option("--sigma", sigma_text, "cut-off order")->required();
    auto* w_norm = weights->add_subcommand("norm", "squared norm of the integration functional");
    add_weight_opts(w_norm);
    w_norm->add_option("--tail-tol", tail_tol, "tail tolerance");

    auto* bounds = app.add_subcommand("bounds", "lower-bound calculators");
    bounds->require_subcommand(1);
    auto* b_bsq = bounds->add_subcommand("bsq", "projection error b^2");
    add_weight_opts(b_bsq);
    b_bsq->add_option("--cover", cover_spec, "cover sets, e.g. \"1;1,2\"")->required();
    b_bsq->add_option("--tail-tol", tail_tol, "tail tolerance");
    auto* b_exp = bounds->add_subcommand("exponent", "tractability exponent lower bound");
    add_weight_opts(b_exp);
    b_exp->add_option("--model", bound_model, "nest-ran | unr-res | unr-res-omega")->required();
    b_exp->add_option("--alpha", alpha, "univariate exponent alpha");
    b_exp->add_option("--s", s, "cost exponent s");
    b_exp->add_option("--sigmas", sigmas_text, "e.g. 1..6 or 1,2,4");
    b_exp->add_option("--omega", omega_text, "omega for unr-res-omega");
    auto* b_pw = bounds->add_subcommand("pw11", "upper bound max(2/kappa, 2/(decay_1 - 1))");
    b_pw->add_option("--kappa", kappa, "univariate exponent kappa");
    b_pw->add_option("--weights", weights_spec, "weight spec");
    b_pw->add_option("--kernel", kernel_spec, "kernel spec");
    b_pw->add_option("--decay", decay_value, "decay_1 given directly");

    auto* integrate = app.add_subcommand("integrate", "run a quadrature engine");
    integrate->add_option("--algo", algo, "mc | uni3 | ml | cd")->check(CLI::IsMember({"mc", "uni3", "ml", "cd"}));
    integrate->add_option("--weights", weights_spec, "weight spec (needed by cd)");
    integrate->add_option("--kernel", kernel_spec, "kernel spec");
    integrate->add_option("--function", function_file, "anchored function JSON")->required();
    integrate->add_option("--budget", budget, "cost budget N");
    integrate->add_option("--model", model, "nested | unrestricted");
    integrate->add_option("--dollar", dollar, "poly:s | exp:r | table:v0,v1,...");
    integrate->add_option("--chain", chain, "doubling:d or explicit sets \"1;1,2\"");
    integrate->add_option("--dims", dims, "dimension of the Monte Carlo subspace");
    integrate->add_option("--seed", seed, "master seed")->required();
    integrate->add_option("--reps", reps, "replications");
    integrate->add_option("--out", out, "CSV summary file");

    auto* experiment = app.add_subcommand("experiment", "run a configured experiment");
    experiment->add_option("--config", config_file, "experiment config (JSON, schema 1)")->required();
    experiment->add_option("--seed", seed, "master seed (overrides the config)")->required();
    experiment->add_option("--out", out, "output directory (overrides the config)");

    auto* fool = app.add_subcommand("fool", "fooling-pair experiment for a cover-restricted Monte Carlo rule");
    add_weight_opts(fool);
    fool->add_option("--cover", cover_spec, "cover sets")->required();
    fool->add_option("--reps", reps, "replications");
    fool->add_option("--n", n_samples, "samples per cover member");
    fool->add_option("--rank-cap", rank_cap, "terms in the residual function");
    fool->add_option("--seed", seed, "master seed")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        auto kernel = std::make_shared<const Kernel1D>(parse_kernel(kernel_spec));
        auto bound_weights = [&] { return parse_weights(weights_spec).bound(kernel->C0()); };

        if (*constants) {
            ojson j;
            j["M"] = kernel->M();
            j["C0"] = kernel->C0();
            if (kernel->family() == Kernel1D::Family::Tabulated) j["quadrature_error"] = kernel->constants().quadrature_error;
            std::cout << j.dump() << "\n";
        } else if (*w_enum) {
            const auto w = bound_weights();
            const auto sup = enumerate_ordered(w, parse_order(sigma_text), count);
            std::ostringstream csv;
            csv.precision(17);
            csv << "rank,set,gamma,gamma_hat\n";
            for (const auto& e : sup.entries)
                csv << e.rank << ",\"" << e.u.to_string() << "\"," << w.weight(e.u) << "," << e.hat << "\n";
            emit(csv.str(), out);
        } else if (*w_decay) {
            const auto d = decay(bound_weights(), parse_order(sigma_text), ranks);
            ojson j;
            j["sigma"] = d.sigma == unbounded_order ? ojson("inf") : ojson(d.sigma);
            j["closed_form"] = d.closed_form ? num(*d.closed_form) : ojson(nullptr);
            j["estimate"] = num(d.estimate);
            j["window"] = {d.window_begin, d.window_end};
            j["residual"] = d.residual;
            j["slope_stderr"] = d.slope_stderr;
            j["saturated"] = d.saturated;
            std::cout << j.dump() << "\n";
        } else if (*w_tstar) {
            const auto t = tstar(bound_weights(), parse_order(sigma_text));
            ojson j;
            j["closed_form"] = t.closed_form ? ojson(*t.closed_form) : ojson(nullptr);
            j["estimate"] = t.estimate ? ojson(*t.estimate) : ojson(nullptr);
            j["saturated"] = t.saturated;
            std::cout << j.dump() << "\n";
        } else if (*w_norm) {
            const auto r = operator_norm_sq(bound_weights(), tail_tol);
            ojson j;
            j["full"] = r.full;
            j["nonempty"] = r.nonempty;
            j["tail_bound"] = r.tail_bound;
            std::cout << j.dump() << "\n";
        } else if (*b_bsq) {
            const auto r = b_squared(bound_weights(), CoverFamily::parse(cover_spec), tail_tol);
            std::cout << r.to_json().dump() << "\n";
        } else if (*b_exp) {
            std::optional<int> omega;
            if (!omega_text.empty()) omega = parse_order(omega_text);
            const auto b = exponent_lower_bound(parse_bound_model(bound_model), alpha, s, bound_weights(),
                                                parse_sigmas(sigmas_text), omega);
            std::cout << b.to_json().dump() << "\n";
        } else if (*b_pw) {
            double bound = 0.0;
            if (decay_value > 0.0) bound = pw11_upper_bound(kappa, decay_value);
            else if (!weights_spec.empty()) bound = pw11_upper_bound(kappa, bound_weights());
            else throw ParameterError("pw11 needs --weights or --decay");
            ojson j;
            j["bound"] = num(bound);
            std::cout << j.dump() << "\n";
        } else if (*integrate) {
            if (reps < 1) throw ParameterError("--reps must be at least 1");
            std::ifstream in(function_file);
            if (!in) throw ParameterError("cannot read function file '" + function_file + "'");
            nlohmann::json fj;
            try {
                in >> fj;
            } catch (const nlohmann::json::exception& e) {
                throw ParameterError(std::string("function file is not valid JSON: ") + e.what());
            }
            const auto f = AnchoredFunction::from_json(fj, kernel);
            const auto integrand = f.as_integrand();
            const auto cost = make_cost_model(model, dollar, chain);
            QuadratureRule Q;
            if (algo == "mc") {
                const auto v = VariableSet::range(static_cast<Index>(dims));
                const auto n = static_cast<std::size_t>(std::floor(budget / cost.cost(v)));
                if (n < 1) throw BudgetError("budget below one sample");
                Q = [&, v, n](const Integrand& g, std::uint64_t sd) { return mc_quad(g, *kernel, v, n, cost, sd); };
            } else if (algo == "uni3") {
                auto n = static_cast<std::size_t>(std::floor(budget / cost.cost(VariableSet{1})));
                n -= n % 2;
                Q = [&, n](const Integrand& g, std::uint64_t sd) { return uni_quad_rate3(g, *kernel, n, cost, sd); };
            } else if (algo == "ml") {
                const auto plan = multilevel_plan(cost, budget);
                Q = [&, plan](const Integrand& g, std::uint64_t sd) { return multilevel_quad(g, *kernel, plan, cost, sd); };
            } else {
                if (weights_spec.empty()) throw ParameterError("cd needs --weights");
                const auto plan = cd_plan(bound_weights(), budget, cost.dollar());
                Q = [&, plan](const Integrand& g, std::uint64_t sd) { return cd_quad(g, *kernel, plan, cost, sd); };
            }
            const double exact = f.integral();
            ojson arr = ojson::array();
            std::ostringstream csv;
            csv.precision(17);
            csv << "rep,seed,estimate,error,cost,n_evals,infeasible\n";
            for (std::size_t r = 0; r < reps; ++r) {
                const auto sd = derive_seed(seed, r);
                const auto res = Q(integrand, sd);
                ojson j;
                j["rep"] = r;
                j["seed"] = sd;
                j["estimate"] = res.estimate;
                j["exact"] = exact;
                j["cost"] = num(res.ledger.total());
                j["n_evals"] = res.n_evals;
                j["infeasible"] = res.ledger.infeasible();
                arr.push_back(j);
                csv << r << "," << sd << "," << res.estimate << "," << res.estimate - exact << "," << res.ledger.total() << ","
                    << res.n_evals << "," << (res.ledger.infeasible() ? 1 : 0) << "\n";
            }
            std::cout << arr.dump() << "\n";
            if (!out.empty()) emit(csv.str(), out);
        } else if (*experiment) {
            auto cfg = ExperimentConfig::load(config_file);
            cfg.seed = seed;
            const auto run = run_experiment(cfg);
            const std::filesystem::path dir = out.empty() ? cfg.output_dir : std::filesystem::path(out);
            write_outputs(run, cfg, dir);
            std::cout << summary_json(run, cfg).dump() << "\n";
        } else if (*fool) {
            const auto w = bound_weights();
            const auto cover = CoverFamily::parse(cover_spec);
            const auto model_u = CostModel::unrestricted(DollarFunction::parse(dollar));
            QuadratureRule Q = [&](const Integrand& g, std::uint64_t sd) {
                QuadratureResult total{0.0, CostLedger(model_u), 0, sd, {}};
                for (std::size_t i = 0; i < cover.sets().size(); ++i) {
                    auto r = mc_quad(g, *kernel, cover.sets()[i], n_samples, model_u, derive_seed(sd, i));
                    total.estimate += r.estimate / static_cast<double>(cover.sets().size());
                    total.ledger.merge(r.ledger);
                }
                total.n_evals = total.ledger.size();
                return total;
            };
            const auto r = fooling_experiment(Q, kernel, w, cover, reps, seed, rank_cap);
            std::cout << r.to_json().dump() << "\n";
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
