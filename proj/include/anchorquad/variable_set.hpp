#pragma once

#include <compare>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace anchorquad {

using Index = int;

/// Finite set of positive coordinate indices, stored strictly increasing.
/// The empty set stands for the anchor-only subspace.
class VariableSet {
public:
    VariableSet() = default;
    VariableSet(std::initializer_list<Index> indices);
    explicit VariableSet(std::vector<Index> indices);

    /// {1, ..., d}
    static VariableSet range(Index d);

    std::size_t size() const { return indices_.size(); }
    bool empty() const { return indices_.empty(); }
    Index max() const { return indices_.back(); }
    std::span<const Index> indices() const { return indices_; }
    auto begin() const { return indices_.begin(); }
    auto end() const { return indices_.end(); }
    Index operator[](std::size_t i) const { return indices_[i]; }

    bool contains(Index j) const;
    bool is_subset_of(const VariableSet& other) const;
    bool intersects(const VariableSet& other) const;
    VariableSet united(const VariableSet& other) const;
    VariableSet with(Index j) const;

    /// Subset selected by the bits of `mask` (bit i picks the i-th smallest index).
    VariableSet subset_by_mask(unsigned long long mask) const;

    /// "{1,2,5}"
    std::string to_string() const;
    /// Parses "1,2,5", "{1,2,5}" or "" / "{}".
    static VariableSet parse(std::string_view text);

    /// Lexicographic on the increasing index sequence.
    friend auto operator<=>(const VariableSet&, const VariableSet&) = default;
    friend bool operator==(const VariableSet&, const VariableSet&) = default;

private:
    std::vector<Index> indices_;
};

/// Ordering used wherever ties in weight must be broken: smaller cardinality, then lexicographic.
bool cardinality_then_lex_less(const VariableSet& a, const VariableSet& b);

/// Point of the infinite-dimensional domain with finitely many explicitly stored coordinates.
/// Unstored coordinates equal the anchor.
class SparsePoint {
public:
    SparsePoint() = default;
    SparsePoint(std::initializer_list<std::pair<Index, double>> coords);
    explicit SparsePoint(std::vector<std::pair<Index, double>> coords);

    /// Dense convenience: x_1 = values[0], x_2 = values[1], ...
    static SparsePoint from_dense(std::span<const double> values);

    void set(Index j, double value);
    double value(Index j, double anchor) const;
    /// True when coordinate j is stored (it may still equal the anchor).
    bool has(Index j) const;

    /// Indices whose value differs from the anchor.
    VariableSet active_set(double anchor) const;
    /// The point (x_v; a): coordinates outside v are dropped.
    SparsePoint restricted(const VariableSet& v) const;

    std::span<const std::pair<Index, double>> coords() const { return coords_; }

private:
    std::vector<std::pair<Index, double>> coords_;
};

}  // namespace anchorquad
