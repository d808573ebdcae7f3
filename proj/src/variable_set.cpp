#include "anchorquad/variable_set.hpp"

#include "anchorquad/errors.hpp"

#include <algorithm>
#include <charconv>

namespace anchorquad {

namespace {

void check_increasing(const std::vector<Index>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] < 1) throw ShapeError("variable indices must be positive");
        if (i > 0 && v[i] <= v[i - 1]) throw ShapeError("variable indices must be strictly increasing");
    }
}

}  // namespace

VariableSet::VariableSet(std::initializer_list<Index> indices) : indices_(indices) {
    check_increasing(indices_);
}

VariableSet::VariableSet(std::vector<Index> indices) : indices_(std::move(indices)) {
    check_increasing(indices_);
}

VariableSet VariableSet::range(Index d) {
    std::vector<Index> v(static_cast<std::size_t>(std::max(d, 0)));
    for (Index i = 0; i < d; ++i) v[static_cast<std::size_t>(i)] = i + 1;
    return VariableSet(std::move(v));
}

bool VariableSet::contains(Index j) const {
    return std::binary_search(indices_.begin(), indices_.end(), j);
}

bool VariableSet::is_subset_of(const VariableSet& other) const {
    return std::includes(other.indices_.begin(), other.indices_.end(), indices_.begin(), indices_.end());
}

bool VariableSet::intersects(const VariableSet& other) const {
    auto a = indices_.begin();
    auto b = other.indices_.begin();
    while (a != indices_.end() && b != other.indices_.end()) {
        if (*a == *b) return true;
        if (*a < *b) ++a;
        else ++b;
    }
    return false;
}

VariableSet VariableSet::united(const VariableSet& other) const {
    std::vector<Index> out;
    out.reserve(size() + other.size());
    std::set_union(indices_.begin(), indices_.end(), other.indices_.begin(), other.indices_.end(),
                   std::back_inserter(out));
    VariableSet r;
    r.indices_ = std::move(out);
    return r;
}

VariableSet VariableSet::with(Index j) const {
    return united(VariableSet{j});
}

VariableSet VariableSet::subset_by_mask(unsigned long long mask) const {
    VariableSet r;
    for (std::size_t i = 0; i < indices_.size(); ++i)
        if (mask & (1ULL << i)) r.indices_.push_back(indices_[i]);
    return r;
}

std::string VariableSet::to_string() const {
    std::string s = "{";
    for (std::size_t i = 0; i < indices_.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(indices_[i]);
    }
    s += '}';
    return s;
}

VariableSet VariableSet::parse(std::string_view text) {
    std::vector<Index> v;
    std::size_t pos = 0;
    while (pos < text.size()) {
        char c = text[pos];
        if (c == '{' || c == '}' || c == ',' || c == ' ' || c == '[' || c == ']') {
            ++pos;
            continue;
        }
        Index value = 0;
        auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), value);
        if (ec != std::errc())
            throw ParameterError("cannot parse variable set '" + std::string(text) + "'");
        pos = static_cast<std::size_t>(ptr - text.data());
        v.push_back(value);
    }
    std::sort(v.begin(), v.end());
    if (std::adjacent_find(v.begin(), v.end()) != v.end())
        throw ParameterError("duplicate index in variable set '" + std::string(text) + "'");
    return VariableSet(std::move(v));
}

bool cardinality_then_lex_less(const VariableSet& a, const VariableSet& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

SparsePoint::SparsePoint(std::initializer_list<std::pair<Index, double>> coords)
    : SparsePoint(std::vector<std::pair<Index, double>>(coords)) {}

SparsePoint::SparsePoint(std::vector<std::pair<Index, double>> coords) : coords_(std::move(coords)) {
    std::sort(coords_.begin(), coords_.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < coords_.size(); ++i) {
        if (coords_[i].first < 1) throw ShapeError("coordinate indices must be positive");
        if (i > 0 && coords_[i].first == coords_[i - 1].first)
            throw ShapeError("duplicate coordinate index in point");
    }
}

SparsePoint SparsePoint::from_dense(std::span<const double> values) {
    SparsePoint p;
    p.coords_.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        p.coords_.emplace_back(static_cast<Index>(i + 1), values[i]);
    return p;
}

void SparsePoint::set(Index j, double value) {
    auto it = std::lower_bound(coords_.begin(), coords_.end(), j,
                               [](const auto& c, Index k) { return c.first < k; });
    if (it != coords_.end() && it->first == j) it->second = value;
    else coords_.insert(it, {j, value});
}

double SparsePoint::value(Index j, double anchor) const {
    auto it = std::lower_bound(coords_.begin(), coords_.end(), j,
                               [](const auto& c, Index k) { return c.first < k; });
    if (it != coords_.end() && it->first == j) return it->second;
    return anchor;
}

bool SparsePoint::has(Index j) const {
    auto it = std::lower_bound(coords_.begin(), coords_.end(), j,
                               [](const auto& c, Index k) { return c.first < k; });
    return it != coords_.end() && it->first == j;
}

VariableSet SparsePoint::active_set(double anchor) const {
    std::vector<Index> v;
    for (const auto& [j, x] : coords_)
        if (x != anchor) v.push_back(j);
    return VariableSet(std::move(v));
}

SparsePoint SparsePoint::restricted(const VariableSet& v) const {
    SparsePoint r;
    for (const auto& c : coords_)
        if (v.contains(c.first)) r.coords_.push_back(c);
    return r;
}

}  // namespace anchorquad
