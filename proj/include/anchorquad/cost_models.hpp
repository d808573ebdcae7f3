#pragma once

#include "anchorquad/variable_set.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace anchorquad {

/// Monotone cost $(nu) >= 1 of one evaluation in a nu-dimensional anchored subspace.
class DollarFunction {
public:
    enum class Kind { Poly, Exp, Table };

    /// max(1, nu^s)
    static DollarFunction poly(double s);
    /// e^{r nu}
    static DollarFunction exp(double r);
    /// Stored values on 0..n, continued geometrically with the ratio of the last two values.
    static DollarFunction table(std::vector<double> values);

    double operator()(std::size_t nu) const;

    Kind kind() const { return kind_; }
    double s() const { return param_; }
    double r() const { return param_; }
    const std::vector<double>& values() const { return values_; }

    nlohmann::json to_json() const;
    static DollarFunction from_json(const nlohmann::json& j);
    /// "poly:1", "exp:0.5", "table:1,2,4".
    static DollarFunction parse(const std::string& text);

private:
    Kind kind_ = Kind::Poly;
    double param_ = 1.0;
    std::vector<double> values_;
};

/// Strictly increasing chain v_1 subset v_2 subset ... of non-empty sets: an explicit prefix,
/// optionally continued by the rule v = {1, ..., d 2^{k-1}}, k = 1, 2, ... (only members strictly
/// containing the last prefix set are used).
class NestedChain {
public:
    static NestedChain explicit_sets(std::vector<VariableSet> sets);
    static NestedChain doubling(Index d, std::vector<VariableSet> prefix = {});

    /// i-th member (1-based); nullopt past the end of a finite chain.
    std::optional<VariableSet> member(std::size_t i) const;
    /// Size of the i-th member without materialising it.
    std::optional<std::size_t> member_size(std::size_t i) const;
    /// Smallest i with active subset v_i.
    std::optional<std::size_t> first_containing(const VariableSet& active) const;

    bool infinite() const { return generator_base_ > 0; }
    const std::vector<VariableSet>& prefix() const { return prefix_; }
    Index generator_base() const { return generator_base_; }

    nlohmann::json to_json() const;
    static NestedChain from_json(const nlohmann::json& j);
    /// "doubling:d" or "1;1,2;1,2,3" (explicit sets separated by ';').
    static NestedChain parse(const std::string& text);

private:
    std::vector<VariableSet> prefix_;
    Index generator_base_ = 0;
    int first_generated_ = 1;  ///< generator exponent k used for the member after the prefix
};

/// $(|v_i|) for the first chain member containing `active`; +inf when none does.
double nested_cost(const NestedChain& chain, const DollarFunction& dollar, const VariableSet& active);
/// $(|active|).
double unrestricted_cost(const DollarFunction& dollar, const VariableSet& active);

class CostModel {
public:
    enum class Kind { Nested, Unrestricted };

    static CostModel unrestricted(DollarFunction dollar);
    static CostModel nested(NestedChain chain, DollarFunction dollar);

    Kind kind() const { return kind_; }
    const DollarFunction& dollar() const { return dollar_; }
    const NestedChain& chain() const;
    std::string tag() const { return kind_ == Kind::Nested ? "nested" : "unrestricted"; }

    double cost(const VariableSet& active) const;

    nlohmann::json to_json() const;
    static CostModel from_json(const nlohmann::json& j);

private:
    Kind kind_ = Kind::Unrestricted;
    DollarFunction dollar_;
    std::optional<NestedChain> chain_;
};

struct LedgerEntry {
    VariableSet active;
    double charged = 0.0;
};

/// Running record of the evaluations made by one algorithm run.
class CostLedger {
public:
    explicit CostLedger(CostModel model) : model_(std::move(model)) {}

    /// Charges an evaluation whose non-anchor coordinates are `active`; returns the charge.
    double charge(const VariableSet& active);

    const std::vector<LedgerEntry>& entries() const { return entries_; }
    double total() const { return total_; }
    bool infeasible() const { return infeasible_; }
    const CostModel& model() const { return model_; }
    std::size_t size() const { return entries_.size(); }

    /// Appends the other ledger's entries (same model assumed).
    void merge(const CostLedger& other);

    std::vector<VariableSet> active_sets() const;
    /// eval_index,active_set,charged
    std::string to_csv() const;

private:
    CostModel model_;
    std::vector<LedgerEntry> entries_;
    double total_ = 0.0;
    bool infeasible_ = false;
};

struct ClassCertificate {
    enum class Class { Ran, Res, ResOmega };
    Class cls = Class::Ran;
    std::size_t n = 0;
    std::vector<VariableSet> sets;  ///< v_1..v_n for the restricted classes
    std::optional<int> omega;

    std::string name() const;
};

/// Widest-to-narrowest certification of a set of traces (one active-set sequence per input).
/// v_i is the union of the i-th active sets over all traces.
ClassCertificate certify_class(const std::vector<std::vector<VariableSet>>& traces, std::optional<int> omega = std::nullopt);
ClassCertificate certify_class(const std::vector<CostLedger>& ledgers, std::optional<int> omega = std::nullopt);

}  // namespace anchorquad
