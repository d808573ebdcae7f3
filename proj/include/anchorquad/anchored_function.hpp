#pragma once

#include "anchorquad/kernel.hpp"
#include "anchorquad/variable_set.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

namespace anchorquad {

class WeightFamily;

/// Black-box integrand: any function of a sparse point (unstored coordinates sit at the anchor).
using Integrand = std::function<double(const SparsePoint&)>;

/// Univariate element of H(k): a kernel translate k(., t) or the mean embedding m_k.
struct UnivariateAtom {
    enum class Kind { KernelTranslate, MeanEmbedding };
    Kind kind = Kind::KernelTranslate;
    double t = 0.0;

    static UnivariateAtom translate(double t) { return {Kind::KernelTranslate, t}; }
    static UnivariateAtom mean_embedding() { return {Kind::MeanEmbedding, 0.0}; }

    friend bool operator==(const UnivariateAtom&, const UnivariateAtom&) = default;
};

double atom_eval(const Kernel1D& k, const UnivariateAtom& a, double x);
double atom_integral(const Kernel1D& k, const UnivariateAtom& a);
/// Closed-form H(k) inner product.
double atom_inner(const Kernel1D& k, const UnivariateAtom& a, const UnivariateAtom& b);

/// coeff * prod_{j in u} atoms[i](x_j), atoms listed in the order of u's indices.
struct Term {
    VariableSet u;
    double coeff = 0.0;
    std::vector<UnivariateAtom> atoms;

    friend bool operator==(const Term&, const Term&) = default;
};

/// Element of H_gamma given as a finite sum of per-subset products of univariate atoms.
/// Integral and norm are available in closed form.
class AnchoredFunction {
public:
    explicit AnchoredFunction(std::shared_ptr<const Kernel1D> kernel, std::vector<Term> terms = {});

    static AnchoredFunction constant(std::shared_ptr<const Kernel1D> kernel, double c);

    void add_term(Term term);

    const std::vector<Term>& terms() const { return terms_; }
    const Kernel1D& kernel() const { return *kernel_; }
    std::shared_ptr<const Kernel1D> kernel_ptr() const { return kernel_; }

    /// Exact evaluation; unstored coordinates are anchored.
    double operator()(const SparsePoint& x) const;
    /// Value of the single term `i` at x.
    double term_value(std::size_t i, const SparsePoint& x) const;

    /// I(f) in closed form.
    double integral() const;

    /// ||f_u||^2_{H_u} for every u carrying at least one term.
    std::map<VariableSet, double> component_norms_sq() const;

    /// Direct evaluation of the component f_u (the sum of the terms on u).
    double component_value(const VariableSet& u, const SparsePoint& x) const;

    AnchoredFunction scaled(double factor) const;
    AnchoredFunction operator-() const { return scaled(-1.0); }
    AnchoredFunction operator+(const AnchoredFunction& other) const;
    AnchoredFunction operator-(const AnchoredFunction& other) const;

    /// Shares the term data with the returned callable.
    Integrand as_integrand() const;

    nlohmann::json to_json() const;
    static AnchoredFunction from_json(const nlohmann::json& j, std::shared_ptr<const Kernel1D> kernel);

private:
    std::shared_ptr<const Kernel1D> kernel_;
    std::vector<Term> terms_;
};

/// ||f||_gamma = (sum_u gamma_u^{-1} ||f_u||^2)^{1/2}; throws NotInSpaceError when a term sits on a
/// set with gamma_u = 0.
double func_norm(const AnchoredFunction& f, const WeightFamily& w);

/// (Psi_{v,a} f)(x) = f(x_v; a).
double anchor_restrict(const Integrand& f, const VariableSet& v, const SparsePoint& x);

/// Largest |u| accepted by anchored_component_eval.
inline constexpr std::size_t max_component_order = 25;

/// f_u(x) = sum_{w subset u} (-1)^{|u|-|w|} f(x_w; a), using exactly 2^{|u|} evaluations of f.
double anchored_component_eval(const Integrand& f, const VariableSet& u, const SparsePoint& x);

struct KernelValue {
    double value = 0.0;
    double tail_bound = 0.0;
};

/// K_gamma(x,y) = sum_u gamma_u k_u(x,y). Only sets inside the common non-anchor support of x and
/// y contribute, so the sum is finite and the reported tail bound is zero.
KernelValue Kgamma_eval(const Kernel1D& k, const WeightFamily& w, const SparsePoint& x, const SparsePoint& y,
                        double tail_tol = 0.0);

}  // namespace anchorquad
