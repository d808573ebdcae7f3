#include "anchorquad/anchored_function.hpp"

#include "anchorquad/errors.hpp"
#include "anchorquad/weights.hpp"

#include <bit>
#include <cmath>

namespace anchorquad {

double atom_eval(const Kernel1D& k, const UnivariateAtom& a, double x) {
    if (a.kind == UnivariateAtom::Kind::KernelTranslate) return k(x, a.t);
    return k.mean(x);
}

double atom_integral(const Kernel1D& k, const UnivariateAtom& a) {
    if (a.kind == UnivariateAtom::Kind::KernelTranslate) return k.mean(a.t);
    return k.C0();
}

double atom_inner(const Kernel1D& k, const UnivariateAtom& a, const UnivariateAtom& b) {
    using K = UnivariateAtom::Kind;
    if (a.kind == K::KernelTranslate && b.kind == K::KernelTranslate) return k(a.t, b.t);
    if (a.kind == K::MeanEmbedding && b.kind == K::MeanEmbedding) return k.C0();
    return k.mean(a.kind == K::KernelTranslate ? a.t : b.t);
}

AnchoredFunction::AnchoredFunction(std::shared_ptr<const Kernel1D> kernel, std::vector<Term> terms)
    : kernel_(std::move(kernel)) {
    if (!kernel_) throw ParameterError("anchored function needs a kernel");
    for (auto& t : terms) add_term(std::move(t));
}

AnchoredFunction AnchoredFunction::constant(std::shared_ptr<const Kernel1D> kernel, double c) {
    AnchoredFunction f(std::move(kernel));
    f.add_term(Term{{}, c, {}});
    return f;
}

void AnchoredFunction::add_term(Term term) {
    if (term.atoms.size() != term.u.size())
        throw ShapeError("term on " + term.u.to_string() + " needs one atom per index");
    for (const auto& a : term.atoms)
        if (a.kind == UnivariateAtom::Kind::KernelTranslate && !kernel_->in_domain(a.t))
            throw DomainError("kernel translate location outside the kernel domain");
    terms_.push_back(std::move(term));
}

double AnchoredFunction::term_value(std::size_t i, const SparsePoint& x) const {
    const Term& term = terms_[i];
    const double a = kernel_->anchor();
    double prod = term.coeff;
    for (std::size_t p = 0; p < term.u.size(); ++p) {
        double xj = x.value(term.u[p], a);
        // Anchored components vanish as soon as one active coordinate sits at the anchor.
        if (xj == a) return 0.0;
        prod *= atom_eval(*kernel_, term.atoms[p], xj);
    }
    return prod;
}

double AnchoredFunction::operator()(const SparsePoint& x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < terms_.size(); ++i) s += term_value(i, x);
    return s;
}

double AnchoredFunction::integral() const {
    double s = 0.0;
    for (const auto& term : terms_) {
        double prod = term.coeff;
        for (const auto& a : term.atoms) prod *= atom_integral(*kernel_, a);
        s += prod;
    }
    return s;
}

std::map<VariableSet, double> AnchoredFunction::component_norms_sq() const {
    std::map<VariableSet, std::vector<const Term*>> groups;
    for (const auto& t : terms_) groups[t.u].push_back(&t);
    std::map<VariableSet, double> out;
    for (const auto& [u, list] : groups) {
        double s = 0.0;
        for (const Term* a : list) {
            for (const Term* b : list) {
                double prod = a->coeff * b->coeff;
                for (std::size_t p = 0; p < u.size(); ++p) prod *= atom_inner(*kernel_, a->atoms[p], b->atoms[p]);
                s += prod;
            }
        }
        out[u] = std::max(s, 0.0);
    }
    return out;
}

double AnchoredFunction::component_value(const VariableSet& u, const SparsePoint& x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < terms_.size(); ++i)
        if (terms_[i].u == u) s += term_value(i, x);
    return s;
}

AnchoredFunction AnchoredFunction::scaled(double factor) const {
    AnchoredFunction g = *this;
    for (auto& t : g.terms_) t.coeff *= factor;
    return g;
}

AnchoredFunction AnchoredFunction::operator+(const AnchoredFunction& other) const {
    if (kernel_ != other.kernel_) throw ParameterError("cannot add anchored functions over different kernels");
    AnchoredFunction g = *this;
    g.terms_.insert(g.terms_.end(), other.terms_.begin(), other.terms_.end());
    return g;
}

AnchoredFunction AnchoredFunction::operator-(const AnchoredFunction& other) const {
    return *this + (-other);
}

Integrand AnchoredFunction::as_integrand() const {
    auto self = std::make_shared<const AnchoredFunction>(*this);
    return [self](const SparsePoint& x) { return (*self)(x); };
}

nlohmann::json AnchoredFunction::to_json() const {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : terms_) {
        nlohmann::json atoms = nlohmann::json::array();
        for (const auto& a : t.atoms) {
            if (a.kind == UnivariateAtom::Kind::KernelTranslate) atoms.push_back({{"kind", "translate"}, {"t", a.t}});
            else atoms.push_back({{"kind", "mean"}});
        }
        std::vector<Index> u(t.u.begin(), t.u.end());
        terms.push_back({{"u", u}, {"coeff", t.coeff}, {"atoms", atoms}});
    }
    return {{"terms", terms}};
}

AnchoredFunction AnchoredFunction::from_json(const nlohmann::json& j, std::shared_ptr<const Kernel1D> kernel) {
    AnchoredFunction f(std::move(kernel));
    try {
        for (const auto& jt : j.at("terms")) {
            Term t;
            t.u = VariableSet(jt.at("u").get<std::vector<Index>>());
            t.coeff = jt.at("coeff").get<double>();
            for (const auto& ja : jt.at("atoms")) {
                const auto kind = ja.at("kind").get<std::string>();
                if (kind == "translate") t.atoms.push_back(UnivariateAtom::translate(ja.at("t").get<double>()));
                else if (kind == "mean") t.atoms.push_back(UnivariateAtom::mean_embedding());
                else throw ParameterError("unknown atom kind '" + kind + "'");
            }
            f.add_term(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed anchored function: ") + e.what());
    }
    return f;
}

double func_norm(const AnchoredFunction& f, const WeightFamily& w) {
    double s = 0.0;
    for (const auto& [u, nsq] : f.component_norms_sq()) {
        const double g = w.weight(u);
        if (g == 0.0) {
            bool nonzero = false;
            for (const auto& t : f.terms())
                if (t.u == u && t.coeff != 0.0) nonzero = true;
            if (nonzero) throw NotInSpaceError("term on " + u.to_string() + " has zero weight: not in H_gamma");
            continue;
        }
        s += nsq / g;
    }
    return std::sqrt(s);
}

double anchor_restrict(const Integrand& f, const VariableSet& v, const SparsePoint& x) {
    return f(x.restricted(v));
}

double anchored_component_eval(const Integrand& f, const VariableSet& u, const SparsePoint& x) {
    if (u.size() > max_component_order)
        throw BudgetError("anchored component of order " + std::to_string(u.size()) + " exceeds the 2^25 guard");
    const unsigned long long count = 1ULL << u.size();
    double s = 0.0;
    for (unsigned long long mask = 0; mask < count; ++mask) {
        const VariableSet w = u.subset_by_mask(mask);
        const bool negative = (u.size() - static_cast<std::size_t>(std::popcount(mask))) % 2 == 1;
        const double v = f(x.restricted(w));
        s += negative ? -v : v;
    }
    return s;
}

KernelValue Kgamma_eval(const Kernel1D& k, const WeightFamily& w, const SparsePoint& x, const SparsePoint& y,
                        double /*tail_tol*/) {
    const double a = k.anchor();
    std::vector<Index> common;
    std::vector<double> factor;
    for (const auto& [j, xj] : x.coords()) {
        if (xj == a) continue;
        const double yj = y.value(j, a);
        if (yj == a) continue;
        common.push_back(j);
        factor.push_back(k(xj, yj));
    }
    const VariableSet support(common);
    auto f = [&](Index j) {
        auto it = std::lower_bound(common.begin(), common.end(), j);
        return factor[static_cast<std::size_t>(it - common.begin())];
    };
    return {w.weighted_subset_sum(support, f), 0.0};
}

}  // namespace anchorquad
