#pragma once

#include "anchorquad/anchored_function.hpp"
#include "anchorquad/quadrature.hpp"
#include "anchorquad/weights.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace anchorquad {

/// Sets v_1..v_n sampled by a restricted algorithm (duplicates removed, order kept).
class CoverFamily {
public:
    explicit CoverFamily(std::vector<VariableSet> sets);
    /// "1;1,2" (';' separates sets, "{}" is the empty set).
    static CoverFamily parse(const std::string& text);

    const std::vector<VariableSet>& sets() const { return sets_; }
    /// u subset v_i for some i.
    bool covers(const VariableSet& u) const;

private:
    std::vector<VariableSet> sets_;
};

/// Keeps exactly the terms whose set lies inside some cover member.
AnchoredFunction project(const AnchoredFunction& f, const CoverFamily& cover);

struct BsqReport {
    double value = 0.0;         ///< sum of hat over enumerated sets not covered (lower estimate)
    double covered_mass = 0.0;  ///< sum of hat over enumerated covered non-empty sets
    double total_mass = 0.0;    ///< total non-empty hat mass
    double tail_bound = 0.0;    ///< mass not enumerated; value + tail_bound is an upper estimate
    std::size_t truncation_rank = 0;

    nlohmann::ordered_json to_json() const;
};

/// b^2 = sum of hat_u over the sets u not contained in any cover member.
BsqReport b_squared(const WeightFamily& w, const CoverFamily& cover, double tail_tol);

/// Second code path: total non-empty mass minus the mass of the non-empty subsets of the cover
/// members (needs a closed-form total and cover members of size <= 25).
double b_squared_complement(const WeightFamily& w, const CoverFamily& cover);

struct ResidualFunction {
    AnchoredFunction g;
    double achieved = 0.0;  ///< I(g) = ||truncated residual representer||
    std::size_t terms = 0;
};

/// Normalised representer of I - I o Psi over the first rank_cap uncovered sets:
/// g = sum_u h_u / (sum_u hat_u)^{1/2} with h_u = gamma_u prod_{j in u} m_k.
ResidualFunction worst_case_residual(std::shared_ptr<const Kernel1D> k, const WeightFamily& w, const CoverFamily& cover,
                                     std::size_t rank_cap);

enum class BoundModel { NestRan, UnrRes, UnrResOmega };
BoundModel parse_bound_model(const std::string& text);
std::string to_string(BoundModel m);

struct SigmaTerm {
    int sigma = 1;
    double decay = 0.0;
    double tstar = 0.0;
    double term = 0.0;
};

struct ExponentBound {
    BoundModel model = BoundModel::NestRan;
    std::optional<int> omega;
    double alpha = 0.0, s = 0.0;
    std::vector<SigmaTerm> per_sigma;
    double bound = 0.0;
    bool necessary_condition_ok = true;

    nlohmann::ordered_json to_json() const;
};

/// Exponent bound from given decay and t* values per sigma.
ExponentBound exponent_bound_from_terms(BoundModel model, double alpha, double s, std::vector<SigmaTerm> terms);
/// Exponent bound with decay and t* taken from the family (closed forms, else estimates).
ExponentBound exponent_lower_bound(BoundModel model, double alpha, double s, const WeightFamily& w,
                                   const std::vector<int>& sigmas, std::optional<int> omega = std::nullopt);

/// Default sigma probe set {1..6} plus omega when present.
std::vector<int> default_sigmas(std::optional<int> omega = std::nullopt);

/// max(2/kappa, 2/(decay_1 - 1)); +inf when decay_1 <= 1.
double pw11_upper_bound(double kappa, double decay1);
double pw11_upper_bound(double kappa, const WeightFamily& w);

/// (2 theta - 1) b^2, the squared error forced on an algorithm that sees zero data with probability theta.
double lemma3_lower_bound(double theta, double bsq);

/// Algorithm under test: runs on an integrand with a given seed.
using QuadratureRule = std::function<QuadratureResult(const Integrand&, std::uint64_t)>;

struct FoolingResult {
    double empirical_rmse = 0.0;
    double rmse_plus = 0.0, rmse_minus = 0.0;
    double b = 0.0;
    double achieved = 0.0;
    std::string certificate;

    nlohmann::ordered_json to_json() const;
};

/// Runs Q on the worst-case residual g and on -g, R replications each, and reports the larger RMSE.
/// Q must be restricted to the cover: every evaluation inside some cover member and the traces
/// certifiable as res.
FoolingResult fooling_experiment(const QuadratureRule& Q, std::shared_ptr<const Kernel1D> k, const WeightFamily& w,
                                 const CoverFamily& cover, std::size_t replications, std::uint64_t seed,
                                 std::size_t rank_cap = 1000, double tail_tol = 1e-12);

}  // namespace anchorquad
