#include "anchorquad/kernel.hpp"

#include "anchorquad/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace anchorquad {

namespace {

/// Simpson weights on n (odd) uniform nodes over an interval of unit length.
std::vector<double> simpson_weights(std::size_t n) {
    std::vector<double> w(n, 0.0);
    const double h = 1.0 / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        double c = (i == 0 || i + 1 == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        w[i] = c * h / 3.0;
    }
    return w;
}

/// Simpson weights of the half-resolution rule, laid out on the fine grid (zero at odd nodes).
std::vector<double> coarse_simpson_weights(std::size_t n) {
    std::vector<double> w(n, 0.0);
    const std::size_t m = (n + 1) / 2;
    auto coarse = simpson_weights(m);
    for (std::size_t i = 0; i < m; ++i) w[2 * i] = coarse[i];
    return w;
}

}  // namespace

Kernel1D Kernel1D::wiener(double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ParameterError("Wiener kernel scale must be positive");
    Kernel1D k;
    k.family_ = Family::Wiener;
    k.scale_ = scale;
    k.constants_ = {0.5 * scale, scale / 3.0, 0.0};
    return k;
}

Kernel1D Kernel1D::tabulated(Function fn, double lower, double upper, double anchor, std::size_t grid) {
    if (!fn) throw ParameterError("tabulated kernel needs a callable");
    if (!(lower < upper)) throw ParameterError("tabulated kernel needs lower < upper");
    if (anchor < lower || anchor > upper) throw DomainError("anchor outside the kernel domain");
    if (grid < 5) throw ParameterError("tabulated kernel grid needs at least 5 nodes");
    // Simpson needs an odd node count; the error estimate needs an odd half-grid as well.
    while (grid % 4 != 1) ++grid;

    Kernel1D k;
    k.family_ = Family::Tabulated;
    k.lower_ = lower;
    k.upper_ = upper;
    k.anchor_ = anchor;
    k.grid_ = grid;
    k.fn_ = std::move(fn);

    if (std::abs(k.fn_(anchor, anchor)) > 1e-12)
        throw ConfigurationError("kernel is not anchored: k(a,a) != 0");

    const double width = upper - lower;
    std::vector<double> x(grid);
    for (std::size_t i = 0; i < grid; ++i)
        x[i] = lower + width * static_cast<double>(i) / static_cast<double>(grid - 1);
    // rho is uniform, so the unit-length weights already include the density 1/width.
    const auto w = simpson_weights(grid);
    const auto wc = coarse_simpson_weights(grid);

    double M = 0.0, Mc = 0.0, C0 = 0.0, C0c = 0.0;
    for (std::size_t i = 0; i < grid; ++i) {
        double diag = k.fn_(x[i], x[i]);
        M += w[i] * diag;
        Mc += wc[i] * diag;
        double row = 0.0, rowc = 0.0;
        for (std::size_t j = 0; j < grid; ++j) {
            double v = k.fn_(x[i], x[j]);
            row += w[j] * v;
            rowc += wc[j] * v;
        }
        C0 += w[i] * row;
        C0c += wc[i] * rowc;
    }
    if (!std::isfinite(M) || !std::isfinite(C0))
        throw IntegrationError("kernel quadrature produced a non-finite value");
    if (!(C0 > 0.0)) throw ConfigurationError("kernel has C0 <= 0; the integration functional is trivial");
    if (C0 > M * (1.0 + 1e-9)) throw ConfigurationError("kernel violates C0 <= M");
    k.constants_ = {M, C0, std::max(std::abs(M - Mc), std::abs(C0 - C0c)) / 15.0};
    return k;
}

void Kernel1D::check_domain(double x) const {
    if (!(x >= lower_ && x <= upper_))
        throw DomainError("kernel argument " + std::to_string(x) + " outside [" + std::to_string(lower_) + ", " +
                          std::to_string(upper_) + "]");
}

double Kernel1D::operator()(double x, double y) const {
    check_domain(x);
    check_domain(y);
    if (family_ == Family::Wiener) return scale_ * std::min(x, y);
    return fn_(x, y);
}

double Kernel1D::mean(double t) const {
    check_domain(t);
    if (family_ == Family::Wiener) return scale_ * (t - 0.5 * t * t);
    const auto w = simpson_weights(grid_);
    const double width = upper_ - lower_;
    double s = 0.0;
    for (std::size_t i = 0; i < grid_; ++i)
        s += w[i] * fn_(lower_ + width * static_cast<double>(i) / static_cast<double>(grid_ - 1), t);
    return s;
}

double ku_eval(const Kernel1D& k, const VariableSet& u, const SparsePoint& x, const SparsePoint& y) {
    double prod = 1.0;
    for (Index j : u) {
        if (!x.has(j) || !y.has(j))
            throw ShapeError("point is missing coordinate " + std::to_string(j));
        prod *= k(x.value(j, k.anchor()), y.value(j, k.anchor()));
    }
    return prod;
}

SparsePoint ProductMeasureSampler::draw(const VariableSet& v) {
    std::vector<std::pair<Index, double>> coords;
    coords.reserve(v.size());
    for (Index j : v) coords.emplace_back(j, draw_coordinate());
    return SparsePoint(std::move(coords));
}

}  // namespace anchorquad
