#include "anchorquad/lower_bounds.hpp"

#include "anchorquad/errors.hpp"
#include "anchorquad/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace anchorquad {

namespace {

constexpr double infinity = std::numeric_limits<double>::infinity();

nlohmann::ordered_json number_or_inf(double x) {
    if (std::isinf(x)) return "inf";
    return x;
}

}  // namespace

CoverFamily::CoverFamily(std::vector<VariableSet> sets) {
    if (sets.empty()) throw ParameterError("cover needs at least one set");
    for (auto& v : sets)
        if (std::find(sets_.begin(), sets_.end(), v) == sets_.end()) sets_.push_back(std::move(v));
}

CoverFamily CoverFamily::parse(const std::string& text) {
    std::vector<VariableSet> sets;
    std::string part;
    std::istringstream in(text);
    while (std::getline(in, part, ';')) sets.push_back(VariableSet::parse(part));
    if (!text.empty() && text.back() == ';') sets.emplace_back();
    if (text.empty()) sets.emplace_back();
    return CoverFamily(std::move(sets));
}

bool CoverFamily::covers(const VariableSet& u) const {
    for (const auto& v : sets_)
        if (u.is_subset_of(v)) return true;
    return false;
}

AnchoredFunction project(const AnchoredFunction& f, const CoverFamily& cover) {
    AnchoredFunction out(f.kernel_ptr());
    for (const auto& t : f.terms())
        if (cover.covers(t.u)) out.add_term(t);
    return out;
}

nlohmann::ordered_json BsqReport::to_json() const {
    return {{"value", value},
            {"covered_mass", covered_mass},
            {"total_mass", total_mass},
            {"tail_bound", tail_bound},
            {"upper", value + tail_bound},
            {"truncation_rank", truncation_rank}};
}

BsqReport b_squared(const WeightFamily& w, const CoverFamily& cover, double tail_tol) {
    const auto support = enumerate_until_tail(w, unbounded_order, tail_tol);
    BsqReport r;
    for (const auto& e : support.entries) {
        if (cover.covers(e.u)) r.covered_mass += e.hat;
        else r.value += e.hat;
    }
    r.tail_bound = support.tail_bound;
    r.truncation_rank = support.entries.size();
    r.total_mass = support.total_mass.value_or(support.enumerated_mass + support.tail_bound);
    return r;
}

double b_squared_complement(const WeightFamily& w, const CoverFamily& cover) {
    const auto total = w.hat_mass(unbounded_order);
    if (!total) throw UnsupportedFamilyError("no closed-form total mass for " + w.class_name() + " weights");
    std::set<VariableSet> covered;
    for (const auto& v : cover.sets()) {
        if (v.size() > max_component_order) throw BudgetError("cover member too large for subset enumeration");
        for (unsigned long long mask = 1; mask < (1ULL << v.size()); ++mask) covered.insert(v.subset_by_mask(mask));
    }
    double mass = 0.0;
    for (const auto& u : covered) mass += w.hat(u);
    return *total - mass;
}

ResidualFunction worst_case_residual(std::shared_ptr<const Kernel1D> k, const WeightFamily& w, const CoverFamily& cover,
                                     std::size_t rank_cap) {
    if (rank_cap < 1) throw ParameterError("rank cap must be at least 1");
    std::vector<OrderedEntry> uncovered;
    for (std::size_t m = std::max<std::size_t>(64, 2 * rank_cap);; m *= 4) {
        const auto support = enumerate_ordered(w, unbounded_order, m);
        uncovered.clear();
        for (const auto& e : support.entries) {
            if (!cover.covers(e.u) && e.hat > 0.0) uncovered.push_back(e);
            if (uncovered.size() == rank_cap) break;
        }
        if (uncovered.size() == rank_cap || support.exhausted || m > default_candidate_cap / 4) break;
    }
    if (uncovered.empty()) throw DegenerateInputError("cover contains every positive-weight set: no residual mass");
    double mass = 0.0;
    for (const auto& e : uncovered) mass += e.hat;
    const double norm = std::sqrt(mass);
    ResidualFunction r{AnchoredFunction(k), norm, uncovered.size()};
    for (const auto& e : uncovered)
        r.g.add_term(Term{e.u, w.weight(e.u) / norm,
                          std::vector<UnivariateAtom>(e.u.size(), UnivariateAtom::mean_embedding())});
    return r;
}

BoundModel parse_bound_model(const std::string& text) {
    if (text == "nest-ran" || text == "nest_ran") return BoundModel::NestRan;
    if (text == "unr-res" || text == "unr_res") return BoundModel::UnrRes;
    if (text == "unr-res-omega" || text == "unr_res_omega") return BoundModel::UnrResOmega;
    throw ParameterError("model must be nest-ran, unr-res or unr-res-omega, got '" + text + "'");
}

std::string to_string(BoundModel m) {
    switch (m) {
        case BoundModel::NestRan: return "nest_ran";
        case BoundModel::UnrRes: return "unr_res";
        case BoundModel::UnrResOmega: return "unr_res_omega";
    }
    return "";
}

nlohmann::ordered_json ExponentBound::to_json() const {
    nlohmann::ordered_json terms = nlohmann::ordered_json::array();
    for (const auto& t : per_sigma)
        terms.push_back({{"sigma", t.sigma == unbounded_order ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(t.sigma)},
                         {"decay", number_or_inf(t.decay)},
                         {"tstar", t.tstar},
                         {"term", number_or_inf(t.term)}});
    nlohmann::ordered_json j = {{"bound", number_or_inf(bound)},
                        {"rate_cap", std::isinf(bound) ? 0.0 : 1.0 / bound},
                        {"model", to_string(model)},
                        {"alpha", alpha},
                        {"s", s},
                        {"necessary_condition_ok", necessary_condition_ok},
                        {"per_sigma", terms}};
    if (omega) j["omega"] = *omega;
    return j;
}

ExponentBound exponent_bound_from_terms(BoundModel model, double alpha, double s, std::vector<SigmaTerm> terms) {
    if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
    if (!(s > 0.0)) throw ParameterError("s must be positive");
    if (terms.empty()) throw ParameterError("at least one sigma is required");
    ExponentBound b;
    b.model = model;
    b.alpha = alpha;
    b.s = s;
    b.bound = 2.0 / alpha;
    for (auto& t : terms) {
        if (!(t.decay > 1.0)) {
            b.necessary_condition_ok = false;
            t.term = infinity;
        } else if (std::isinf(t.decay)) {
            t.term = 0.0;
        } else {
            double numerator = 2.0;
            if (model == BoundModel::NestRan) numerator = t.tstar > 0.0 ? 2.0 * s / t.tstar : infinity;
            else if (model == BoundModel::UnrRes) numerator = 2.0 * (t.tstar > 0.0 ? std::min(1.0, s / t.tstar) : 1.0);
            t.term = numerator / (t.decay - 1.0);
        }
        b.bound = std::max(b.bound, t.term);
    }
    b.per_sigma = std::move(terms);
    if (!b.necessary_condition_ok) b.bound = infinity;
    return b;
}

std::vector<int> default_sigmas(std::optional<int> omega) {
    std::vector<int> s{1, 2, 3, 4, 5, 6};
    if (omega && *omega != unbounded_order && std::find(s.begin(), s.end(), *omega) == s.end()) s.push_back(*omega);
    return s;
}

ExponentBound exponent_lower_bound(BoundModel model, double alpha, double s, const WeightFamily& w,
                                   const std::vector<int>& sigmas, std::optional<int> omega) {
    std::vector<SigmaTerm> terms;
    for (int sigma : sigmas) {
        if (sigma < 1) throw ParameterError("sigma must be at least 1");
        SigmaTerm t;
        t.sigma = sigma;
        const auto d = decay(w, sigma, 1000);
        t.decay = d.closed_form.value_or(d.estimate);
        const auto ts = tstar(w, sigma);
        t.tstar = ts.closed_form.value_or(ts.estimate.value_or(static_cast<double>(sigma)));
        terms.push_back(t);
    }
    auto b = exponent_bound_from_terms(model, alpha, s, std::move(terms));
    if (model == BoundModel::UnrResOmega) b.omega = omega;
    return b;
}

double pw11_upper_bound(double kappa, double decay1) {
    if (!(kappa > 0.0)) throw ParameterError("kappa must be positive");
    if (!(decay1 > 1.0)) return infinity;
    return std::max(2.0 / kappa, std::isinf(decay1) ? 0.0 : 2.0 / (decay1 - 1.0));
}

double pw11_upper_bound(double kappa, const WeightFamily& w) {
    const auto d = decay(w, 1, 1000);
    return pw11_upper_bound(kappa, d.closed_form.value_or(d.estimate));
}

double lemma3_lower_bound(double theta, double bsq) {
    if (!(theta > 0.5 && theta <= 1.0)) throw ParameterError("theta must lie in (1/2, 1]");
    return (2.0 * theta - 1.0) * bsq;
}

nlohmann::ordered_json FoolingResult::to_json() const {
    return {{"empirical_rmse", empirical_rmse}, {"rmse_plus", rmse_plus}, {"rmse_minus", rmse_minus},
            {"b", b},                           {"achieved", achieved},   {"certificate", certificate}};
}

FoolingResult fooling_experiment(const QuadratureRule& Q, std::shared_ptr<const Kernel1D> k, const WeightFamily& w,
                                 const CoverFamily& cover, std::size_t replications, std::uint64_t seed,
                                 std::size_t rank_cap, double tail_tol) {
    if (replications < 1) throw ParameterError("replications must be at least 1");
    FoolingResult out;
    const auto bsq = b_squared(w, cover, tail_tol);
    out.b = std::sqrt(bsq.value);
    if (bsq.value <= 0.0) {
        out.certificate = "n/a";
        return out;
    }
    const auto residual = worst_case_residual(k, w, cover, rank_cap);
    out.achieved = residual.achieved;
    const Integrand plus = residual.g.as_integrand();
    const Integrand minus = (-residual.g).as_integrand();

    std::vector<std::vector<VariableSet>> traces;
    double se_plus = 0.0, se_minus = 0.0;
    for (std::size_t r = 0; r < replications; ++r) {
        const std::uint64_t s = derive_seed(seed, r);
        for (int sign : {1, -1}) {
            const auto res = Q(sign > 0 ? plus : minus, s);
            for (const auto& v : res.sets())
                if (!cover.covers(v))
                    throw ClassError("algorithm evaluated in " + v.to_string() + ", outside every cover member");
            const double err = res.estimate - sign * residual.achieved;
            (sign > 0 ? se_plus : se_minus) += err * err;
            traces.push_back(res.sets());
        }
    }
    const auto cert = certify_class(traces);
    if (cert.cls == ClassCertificate::Class::Ran) throw ClassError("algorithm traces do not certify as res");
    out.certificate = cert.name();
    out.rmse_plus = std::sqrt(se_plus / static_cast<double>(replications));
    out.rmse_minus = std::sqrt(se_minus / static_cast<double>(replications));
    out.empirical_rmse = std::max(out.rmse_plus, out.rmse_minus);
    return out;
}

}  // namespace anchorquad
