#include "anchorquad/cost_models.hpp"

#include "anchorquad/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace anchorquad {

namespace {

constexpr double infinity = std::numeric_limits<double>::infinity();

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

void check_strict_chain(const std::vector<VariableSet>& sets) {
    for (std::size_t i = 0; i < sets.size(); ++i) {
        if (sets[i].empty()) throw ParameterError("nested chain members must be non-empty");
        if (i > 0 && (sets[i] == sets[i - 1] || !sets[i - 1].is_subset_of(sets[i])))
            throw ParameterError("nested chain must be strictly increasing: " + sets[i - 1].to_string() + " then " +
                                 sets[i].to_string());
    }
}

}  // namespace

// ---------------------------------------------------------------- DollarFunction

DollarFunction DollarFunction::poly(double s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ParameterError("polynomial cost exponent s must be positive");
    DollarFunction d;
    d.kind_ = Kind::Poly;
    d.param_ = s;
    return d;
}

DollarFunction DollarFunction::exp(double r) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ParameterError("exponential cost rate r must be >= 0");
    DollarFunction d;
    d.kind_ = Kind::Exp;
    d.param_ = r;
    return d;
}

DollarFunction DollarFunction::table(std::vector<double> values) {
    if (values.empty()) throw ParameterError("cost table needs at least one value");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] >= 1.0)) throw ParameterError("cost table values must be >= 1");
        if (i > 0 && values[i] < values[i - 1]) throw ParameterError("cost table must be non-decreasing");
    }
    DollarFunction d;
    d.kind_ = Kind::Table;
    d.values_ = std::move(values);
    return d;
}

double DollarFunction::operator()(std::size_t nu) const {
    const double x = static_cast<double>(nu);
    switch (kind_) {
        case Kind::Poly: return std::max(1.0, std::pow(x, param_));
        case Kind::Exp: return std::exp(param_ * x);
        case Kind::Table: {
            if (nu < values_.size()) return values_[nu];
            const double last = values_.back();
            const double ratio = values_.size() >= 2 ? last / values_[values_.size() - 2] : 1.0;
            return last * std::pow(ratio, static_cast<double>(nu - (values_.size() - 1)));
        }
    }
    return infinity;
}

nlohmann::json DollarFunction::to_json() const {
    switch (kind_) {
        case Kind::Poly: return {{"kind", "poly"}, {"s", param_}};
        case Kind::Exp: return {{"kind", "exp"}, {"r", param_}};
        case Kind::Table: return {{"kind", "table"}, {"table", values_}};
    }
    return {};
}

DollarFunction DollarFunction::from_json(const nlohmann::json& j) {
    try {
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "poly") return poly(j.at("s").get<double>());
        if (kind == "exp") return exp(j.at("r").get<double>());
        if (kind == "table") return table(j.at("table").get<std::vector<double>>());
        throw ParameterError("unknown dollar function kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed dollar function: ") + e.what());
    }
}

DollarFunction DollarFunction::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ParameterError("dollar function must look like poly:s, exp:r or table:v0,v1,...");
    const auto kind = text.substr(0, colon);
    const auto arg = text.substr(colon + 1);
    if (kind == "poly") return poly(to_double(arg));
    if (kind == "exp") return exp(to_double(arg));
    if (kind == "table") {
        std::vector<double> v;
        for (const auto& p : split(arg, ',')) v.push_back(to_double(p));
        return table(std::move(v));
    }
    throw ParameterError("unknown dollar function kind '" + kind + "'");
}

// ---------------------------------------------------------------- NestedChain

NestedChain NestedChain::explicit_sets(std::vector<VariableSet> sets) {
    if (sets.empty()) throw ParameterError("nested chain needs at least one set");
    check_strict_chain(sets);
    NestedChain c;
    c.prefix_ = std::move(sets);
    return c;
}

NestedChain NestedChain::doubling(Index d, std::vector<VariableSet> prefix) {
    if (d < 1) throw ParameterError("chain base d must be at least 1");
    check_strict_chain(prefix);
    NestedChain c;
    c.prefix_ = std::move(prefix);
    c.generator_base_ = d;
    c.first_generated_ = 1;
    if (!c.prefix_.empty()) {
        const VariableSet& last = c.prefix_.back();
        // first generated [d 2^{k-1}] strictly containing the last prefix set
        while (true) {
            const long long size = static_cast<long long>(d) << (c.first_generated_ - 1);
            if (size >= last.max() && static_cast<std::size_t>(size) > last.size()) break;
            ++c.first_generated_;
        }
    }
    return c;
}

std::optional<std::size_t> NestedChain::member_size(std::size_t i) const {
    if (i == 0) return std::nullopt;
    if (i <= prefix_.size()) return prefix_[i - 1].size();
    if (generator_base_ == 0) return std::nullopt;
    const std::size_t k = static_cast<std::size_t>(first_generated_) + (i - prefix_.size()) - 1;
    if (k > 40) return std::nullopt;
    return static_cast<std::size_t>(generator_base_) << (k - 1);
}

std::optional<VariableSet> NestedChain::member(std::size_t i) const {
    if (i >= 1 && i <= prefix_.size()) return prefix_[i - 1];
    const auto size = member_size(i);
    if (!size) return std::nullopt;
    if (*size > (std::size_t{1} << 26)) throw BudgetError("chain member too large to materialise");
    return VariableSet::range(static_cast<Index>(*size));
}

std::optional<std::size_t> NestedChain::first_containing(const VariableSet& active) const {
    for (std::size_t i = 0; i < prefix_.size(); ++i)
        if (active.is_subset_of(prefix_[i])) return i + 1;
    if (generator_base_ == 0) return std::nullopt;
    const Index need = active.empty() ? 1 : active.max();
    for (std::size_t i = prefix_.size() + 1;; ++i) {
        const auto size = member_size(i);
        if (!size) return std::nullopt;
        if (static_cast<long long>(*size) >= need) return i;
    }
}

nlohmann::json NestedChain::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    if (!prefix_.empty()) {
        nlohmann::json sets = nlohmann::json::array();
        for (const auto& v : prefix_) sets.push_back(std::vector<Index>(v.begin(), v.end()));
        j["sets"] = sets;
    }
    if (generator_base_ > 0) j["generator"] = {{"base", generator_base_}};
    return j;
}

NestedChain NestedChain::from_json(const nlohmann::json& j) {
    try {
        std::vector<VariableSet> sets;
        if (j.contains("sets"))
            for (const auto& s : j["sets"]) sets.emplace_back(s.get<std::vector<Index>>());
        if (j.contains("generator")) return doubling(j["generator"].at("base").get<Index>(), std::move(sets));
        return explicit_sets(std::move(sets));
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed nested chain: ") + e.what());
    }
}

NestedChain NestedChain::parse(const std::string& text) {
    if (text.rfind("doubling:", 0) == 0) return doubling(static_cast<Index>(to_double(text.substr(9))));
    std::vector<VariableSet> sets;
    for (const auto& p : split(text, ';')) sets.push_back(VariableSet::parse(p));
    return explicit_sets(std::move(sets));
}

double nested_cost(const NestedChain& chain, const DollarFunction& dollar, const VariableSet& active) {
    const auto i = chain.first_containing(active);
    if (!i) return infinity;
    return dollar(*chain.member_size(*i));
}

double unrestricted_cost(const DollarFunction& dollar, const VariableSet& active) {
    return dollar(active.size());
}

// ---------------------------------------------------------------- CostModel

CostModel CostModel::unrestricted(DollarFunction dollar) {
    CostModel m;
    m.kind_ = Kind::Unrestricted;
    m.dollar_ = std::move(dollar);
    return m;
}

CostModel CostModel::nested(NestedChain chain, DollarFunction dollar) {
    CostModel m;
    m.kind_ = Kind::Nested;
    m.dollar_ = std::move(dollar);
    m.chain_ = std::move(chain);
    return m;
}

const NestedChain& CostModel::chain() const {
    if (!chain_) throw ConfigurationError("unrestricted cost model has no chain");
    return *chain_;
}

double CostModel::cost(const VariableSet& active) const {
    return kind_ == Kind::Nested ? nested_cost(*chain_, dollar_, active) : unrestricted_cost(dollar_, active);
}

nlohmann::json CostModel::to_json() const {
    nlohmann::json j = {{"model", tag()}, {"dollar", dollar_.to_json()}};
    if (chain_) j["chain"] = chain_->to_json();
    return j;
}

CostModel CostModel::from_json(const nlohmann::json& j) {
    try {
        const auto model = j.at("model").get<std::string>();
        auto dollar = DollarFunction::from_json(j.at("dollar"));
        if (model == "unrestricted") return unrestricted(std::move(dollar));
        if (model == "nested") return nested(NestedChain::from_json(j.at("chain")), std::move(dollar));
        throw ParameterError("cost model must be 'nested' or 'unrestricted', got '" + model + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed cost model: ") + e.what());
    }
}

// ---------------------------------------------------------------- CostLedger

double CostLedger::charge(const VariableSet& active) {
    const double c = model_.cost(active);
    if (std::isinf(c)) infeasible_ = true;
    entries_.push_back({active, c});
    total_ += c;
    return c;
}

void CostLedger::merge(const CostLedger& other) {
    entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
    total_ += other.total_;
    infeasible_ = infeasible_ || other.infeasible_;
}

std::vector<VariableSet> CostLedger::active_sets() const {
    std::vector<VariableSet> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.active);
    return out;
}

std::string CostLedger::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "eval_index,active_set,charged\n";
    for (std::size_t i = 0; i < entries_.size(); ++i)
        out << i << ",\"" << entries_[i].active.to_string() << "\"," << entries_[i].charged << "\n";
    return out.str();
}

// ---------------------------------------------------------------- certification

std::string ClassCertificate::name() const {
    switch (cls) {
        case Class::Ran: return "ran";
        case Class::Res: return "res";
        case Class::ResOmega: return "res_omega(" + std::to_string(omega.value_or(0)) + ")";
    }
    return "ran";
}

ClassCertificate certify_class(const std::vector<std::vector<VariableSet>>& traces, std::optional<int> omega) {
    if (traces.empty()) throw ParameterError("certification needs at least one trace");
    ClassCertificate cert;
    const std::size_t n = traces.front().size();
    for (const auto& t : traces)
        if (t.size() != n) return cert;
    cert.cls = ClassCertificate::Class::Res;
    cert.n = n;
    cert.sets.resize(n);
    for (const auto& t : traces)
        for (std::size_t i = 0; i < n; ++i) cert.sets[i] = cert.sets[i].united(t[i]);
    if (omega) {
        bool ok = true;
        for (const auto& v : cert.sets)
            if (static_cast<int>(v.size()) > *omega) ok = false;
        if (ok) {
            cert.cls = ClassCertificate::Class::ResOmega;
            cert.omega = omega;
        }
    }
    return cert;
}

ClassCertificate certify_class(const std::vector<CostLedger>& ledgers, std::optional<int> omega) {
    std::vector<std::vector<VariableSet>> traces;
    traces.reserve(ledgers.size());
    for (const auto& l : ledgers) traces.push_back(l.active_sets());
    return certify_class(traces, omega);
}

}  // namespace anchorquad
