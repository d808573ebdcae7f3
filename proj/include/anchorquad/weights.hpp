#pragma once

#include "anchorquad/variable_set.hpp"

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

namespace anchorquad {

/// Order / cut-off value standing for sigma = infinity.
inline constexpr int unbounded_order = std::numeric_limits<int>::max();

/// Non-increasing sequence gamma_1 >= gamma_2 >= ... >= 0, either c j^{-beta} or an explicit
/// finite list (zero beyond its end).
class Generator {
public:
    static Generator power(double c, double beta);
    static Generator list(std::vector<double> values);

    double operator()(Index j) const;
    bool is_power() const { return values_.empty(); }
    double c() const { return c_; }
    double beta() const { return beta_; }
    const std::vector<double>& values() const { return values_; }

    /// Number of strictly positive entries; unbounded_order for a positive power law.
    Index positive_count() const;
    bool summable() const;
    /// sum_{j > J} gamma_j^p (Euler-Maclaurin for power laws, exact for lists).
    double tail_power_sum(Index J, double p) const;

    nlohmann::json to_json() const;

private:
    double c_ = 0.0, beta_ = 0.0;
    std::vector<double> values_;
};

using WeightList = std::vector<std::pair<VariableSet, double>>;

class WeightFamily;

struct ProductWeights {
    Generator g;
};
struct FiniteProductWeights {
    Generator g;
    int omega = 1;
};
/// gamma_u = Gamma_{|u|} prod gamma_j; Gamma beyond the stored list is zero.
struct PODWeights {
    Generator g;
    std::vector<double> Gamma;
};
/// Either an explicit list checked against the intersection-degree condition, or the block rule:
/// every singleton {j} gets g(j) and every block {(i-1)b+1, ..., ib} gets g(i).
struct FiniteIntersectionWeights {
    WeightList sets;
    int degree = 0;
    std::optional<Generator> block_generator;
    int block_size = 0;
    double empty_weight = 1.0;
};
/// The i-th set in the lexicographic order of the decreasing index words gets hat weight hat_g(i).
struct LexOrderedWeights {
    int omega = unbounded_order;
    Generator hat_g;
};
struct ExplicitWeights {
    WeightList sets;
};
struct CutOffWeights {
    std::shared_ptr<const WeightFamily> base;
    int sigma = 1;
};

/// Weight family gamma = (gamma_u). Immutable; optionally bound to a kernel constant C0 for hat weights.
class WeightFamily {
public:
    using Class = std::variant<ProductWeights, FiniteProductWeights, PODWeights, FiniteIntersectionWeights,
                               LexOrderedWeights, ExplicitWeights, CutOffWeights>;

    static WeightFamily product(Generator g);
    static WeightFamily finite_product(Generator g, int omega);
    static WeightFamily pod(Generator g, std::vector<double> Gamma);
    static WeightFamily finite_intersection(WeightList sets, int degree, double empty_weight = 1.0);
    static WeightFamily finite_intersection_blocks(Generator g, int block_size);
    static WeightFamily lex_ordered(int omega, Generator hat_g);
    static WeightFamily explicit_weights(WeightList sets);

    const Class& cls() const { return cls_; }
    std::string class_name() const;

    WeightFamily bound(double C0) const;
    std::optional<double> C0() const { return c0_; }
    double require_C0() const;

    /// gamma_u
    double weight(const VariableSet& u) const;
    /// gamma_u C0^{|u|}
    double hat(const VariableSet& u) const;

    /// Largest |u| with possibly positive weight (unbounded_order if none).
    int max_order() const;
    bool finite_support() const;
    bool summable() const;

    /// sum over u subset S of gamma_u prod_{j in u} factor(j), the empty set included.
    double weighted_subset_sum(const VariableSet& S, const std::function<double(Index)>& factor) const;

    /// |{u != empty : gamma^{(sigma)}_u > 0, u subset {1..m}}| (as a real: counts overflow integers).
    double count_in_box(Index m, int sigma) const;

    /// Closed form of sum_{u != empty, |u| <= sigma} hat_u when one is available.
    std::optional<double> hat_mass(int sigma) const;

    nlohmann::json to_json() const;

    // Product-type view used by enumeration and the closed forms.
    struct ProductView {
        Generator g;
        std::vector<double> mult;  ///< multiplier per cardinality; empty means 1 for every k
        bool pod = false;
        int max_k() const { return mult.empty() ? unbounded_order : static_cast<int>(mult.size()) - 1; }
        double multiplier(std::size_t k) const { return mult.empty() ? 1.0 : (k < mult.size() ? mult[k] : 0.0); }
    };
    std::optional<ProductView> product_view() const;

private:
    explicit WeightFamily(Class c) : cls_(std::move(c)) {}
    friend WeightFamily cutoff(const WeightFamily& w, int sigma);

    Class cls_;
    std::optional<double> c0_;
};

/// Cut-off weights of order sigma: zero for |u| > sigma.
WeightFamily cutoff(const WeightFamily& w, int sigma);

struct OrderedEntry {
    std::size_t rank = 0;
    VariableSet u;
    double hat = 0.0;
};

struct OrderedSupport {
    int sigma = unbounded_order;
    std::vector<OrderedEntry> entries;
    /// True when the positive support was exhausted before reaching the requested count.
    bool exhausted = false;
};

inline constexpr std::size_t default_candidate_cap = 10'000'000;

/// The m largest-hat non-empty sets with |u| <= sigma; ties by cardinality then lexicographic order.
OrderedSupport enumerate_ordered(const WeightFamily& w, int sigma, std::size_t m,
                                 std::size_t candidate_cap = default_candidate_cap);

struct DecayReport {
    int sigma = unbounded_order;
    std::optional<double> closed_form;
    double estimate = 0.0;
    std::size_t window_begin = 0, window_end = 0;  ///< ranks used by the regression (1-based, inclusive)
    double residual = 0.0;                         ///< RMS of the regression residuals
    double slope_stderr = 0.0;
    bool saturated = false;
};

DecayReport decay(const WeightFamily& w, int sigma, std::size_t ranks);

struct TstarReport {
    std::optional<double> closed_form;
    std::optional<double> estimate;
    bool saturated = false;
};

TstarReport tstar(const WeightFamily& w, int sigma);

struct OperatorNormReport {
    double full = 0.0;      ///< sum over all u including the empty set
    double nonempty = 0.0;  ///< sum over non-empty u
    double tail_bound = 0.0;
};

/// ||I||^2 = sum_u hat_u.
OperatorNormReport operator_norm_sq(const WeightFamily& w, double tail_tol);

/// Enumerates the hat-ordered support (sets with |u| <= sigma) until the remaining mass is below
/// tail_tol. Returns the entries and a bound on the mass not enumerated.
struct TruncatedSupport {
    std::vector<OrderedEntry> entries;
    double enumerated_mass = 0.0;
    double tail_bound = 0.0;
    std::optional<double> total_mass;
};
TruncatedSupport enumerate_until_tail(const WeightFamily& w, int sigma, double tail_tol,
                                      std::size_t candidate_cap = default_candidate_cap);

}  // namespace anchorquad
