#pragma once

#include "anchorquad/rng.hpp"
#include "anchorquad/variable_set.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>

namespace anchorquad {

struct KernelConstants {
    double M = 0.0;   ///< integral of k(x,x) against rho
    double C0 = 0.0;  ///< double integral of k(x,y) against rho x rho
    /// Richardson-style estimate of the quadrature error (0 for closed forms).
    double quadrature_error = 0.0;
};

/// Univariate anchored reproducing kernel on an interval with rho uniform on that interval.
///
/// The Wiener family k(x,y) = c min(x,y) on [0,1] (anchor 0) has closed-form constants.
/// Tabulated kernels wrap an arbitrary callable and compute M, C0 and the mean function
/// m_k(t) by composite Simpson quadrature on a uniform grid.
class Kernel1D {
public:
    enum class Family { Wiener, Tabulated };
    using Function = std::function<double(double, double)>;

    static constexpr std::size_t default_grid = (std::size_t{1} << 12) + 1;

    static Kernel1D wiener(double scale = 1.0);
    static Kernel1D tabulated(Function k, double lower, double upper, double anchor,
                              std::size_t grid = default_grid);

    Family family() const { return family_; }
    double lower() const { return lower_; }
    double upper() const { return upper_; }
    double anchor() const { return anchor_; }
    double scale() const { return scale_; }
    std::size_t grid() const { return grid_; }

    /// k(x,y); throws DomainError outside the interval.
    double operator()(double x, double y) const;
    /// m_k(t) = int k(x,t) rho(dx).
    double mean(double t) const;

    const KernelConstants& constants() const { return constants_; }
    double M() const { return constants_.M; }
    double C0() const { return constants_.C0; }

    bool in_domain(double x) const { return x >= lower_ && x <= upper_; }

private:
    Kernel1D() = default;
    void check_domain(double x) const;

    Family family_ = Family::Wiener;
    double lower_ = 0.0, upper_ = 1.0, anchor_ = 0.0, scale_ = 1.0;
    std::size_t grid_ = 0;
    Function fn_;
    KernelConstants constants_;
};

/// k_u(x,y) = prod_{j in u} k(x_j, y_j); k_empty = 1.
double ku_eval(const Kernel1D& k, const VariableSet& u, const SparsePoint& x, const SparsePoint& y);

/// Draws points from rho^v, coordinates outside v pinned to the anchor.
class ProductMeasureSampler {
public:
    ProductMeasureSampler(const Kernel1D& k, std::uint64_t seed)
        : lower_(k.lower()), width_(k.upper() - k.lower()), rng_(seed) {}

    double draw_coordinate() { return lower_ + width_ * rng_.uniform(); }
    SparsePoint draw(const VariableSet& v);
    Rng& rng() { return rng_; }

private:
    double lower_, width_;
    Rng rng_;
};

}  // namespace anchorquad
