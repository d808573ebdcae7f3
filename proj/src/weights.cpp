#include "anchorquad/weights.hpp"

#include "anchorquad/errors.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

namespace anchorquad {

namespace {

constexpr Index closed_form_terms = 1 << 16;

long double binomial(long double n, int k) {
    if (k < 0 || n < k) return 0.0L;
    long double r = 1.0L;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

/// Number of decreasing words over {1..n} of length <= L, the empty word included.
long double word_count(Index n, int L) {
    if (n <= 0) return 1.0L;
    if (L >= n) return std::ldexp(1.0L, n);
    long double s = 0.0L;
    for (int k = 0; k <= L; ++k) s += binomial(n, k);
    return s;
}

/// 1-based position of u among the non-empty sets with |u| <= omega, ordered lexicographically by
/// their decreasing index words (prefixes first).
long double lex_rank(const VariableSet& u, int omega) {
    long double r = 0.0L;
    int level = omega;
    for (std::size_t p = u.size(); p-- > 0;) {
        r += word_count(u[p] - 1, level);
        if (level != unbounded_order) --level;
    }
    return r;
}

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double list_lookup(const WeightList& list, const VariableSet& u, double fallback) {
    for (const auto& [v, g] : list)
        if (v == u) return g;
    return fallback;
}

/// Hat weight of a product-type family on a sorted index list; the single code path used by both
/// WeightFamily::hat and the enumeration so the two agree bit-for-bit.
double view_hat(const WeightFamily::ProductView& view, double C0, std::span<const Index> idx) {
    double prod = 1.0;
    for (Index j : idx) prod *= view.g(j) * C0;
    return view.multiplier(idx.size()) * prod;
}

/// Elementary symmetric sums e_0..e_K of the sequence x_j = g(j) * scale, with a first-order
/// correction for the terms beyond the truncation point.
std::vector<double> elementary_sums(const Generator& g, double scale, int K) {
    const Index P = std::min<Index>(g.positive_count(), closed_form_terms);
    std::vector<double> e(static_cast<std::size_t>(K) + 1, 0.0);
    e[0] = 1.0;
    for (Index j = 1; j <= P; ++j) {
        const double x = g(j) * scale;
        for (int k = std::min<int>(K, j); k >= 1; --k) e[static_cast<std::size_t>(k)] += x * e[static_cast<std::size_t>(k) - 1];
    }
    if (g.is_power() && g.positive_count() == unbounded_order) {
        const double T = scale * g.tail_power_sum(P, 1.0);
        for (int k = K; k >= 1; --k) e[static_cast<std::size_t>(k)] += T * e[static_cast<std::size_t>(k) - 1];
    }
    return e;
}

double generator_total(const Generator& g) {
    if (!g.is_power()) {
        double s = 0.0;
        for (double v : g.values()) s += v;
        return s;
    }
    double s = 0.0;
    for (Index j = closed_form_terms; j >= 1; --j) s += g(j);
    return s + g.tail_power_sum(closed_form_terms, 1.0);
}

/// sum over all non-empty u of prod_{j in u} x_j  =  prod (1 + x_j) - 1.
double product_mass(const Generator& g, double scale) {
    if (!g.is_power()) {
        double log_sum = 0.0;
        for (double v : g.values()) log_sum += std::log1p(v * scale);
        return std::expm1(log_sum);
    }
    double log_sum = 0.0;
    for (Index j = closed_form_terms; j >= 1; --j) log_sum += std::log1p(g(j) * scale);
    const double t1 = g.tail_power_sum(closed_form_terms, 1.0);
    const double t2 = g.tail_power_sum(closed_form_terms, 2.0);
    const double t3 = g.tail_power_sum(closed_form_terms, 3.0);
    log_sum += scale * t1 - scale * scale * t2 / 2.0 + scale * scale * scale * t3 / 3.0;
    return std::expm1(log_sum);
}

bool better(double ha, const std::vector<Index>& a, double hb, const std::vector<Index>& b) {
    if (ha != hb) return ha > hb;
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

struct Candidate {
    double hat;
    std::vector<Index> idx;
};
struct CandidateWorse {
    bool operator()(const Candidate& a, const Candidate& b) const { return better(b.hat, b.idx, a.hat, a.idx); }
};

OrderedSupport enumerate_product(const WeightFamily::ProductView& view, double C0, int sigma, std::size_t m,
                                 std::size_t cap) {
    OrderedSupport out;
    out.sigma = sigma;
    const Index P = view.g.positive_count();
    const int K = std::min(sigma, view.max_k());
    std::priority_queue<Candidate, std::vector<Candidate>, CandidateWorse> heap;
    std::set<std::vector<Index>> visited;
    std::size_t work = 0;

    auto push = [&](std::vector<Index> idx) {
        if (!visited.insert(idx).second) return;
        if (++work > cap) throw EnumerationError("weight enumeration exceeded the candidate cap");
        double h = view_hat(view, C0, idx);
        heap.push({h, std::move(idx)});
    };
    auto head = [&](int k) {
        std::vector<Index> idx(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i + 1;
        return idx;
    };

    int next_k = 1;
    const bool lazy = K == unbounded_order;
    auto open_streams = [&] {
        while (next_k <= K && next_k <= P) {
            if (view.multiplier(static_cast<std::size_t>(next_k)) <= 0.0) {
                ++next_k;
                continue;
            }
            auto idx = head(next_k);
            double h = view_hat(view, C0, idx);
            if (h <= 0.0) {
                next_k = K == unbounded_order ? unbounded_order : K + 1;
                break;
            }
            if (lazy && !heap.empty() && !(h > heap.top().hat) && view.g(next_k + 1) * C0 <= 1.0) break;
            push(std::move(idx));
            ++next_k;
        }
    };

    while (out.entries.size() < m) {
        open_streams();
        if (heap.empty()) {
            out.exhausted = true;
            break;
        }
        Candidate c = heap.top();
        heap.pop();
        const std::size_t k = c.idx.size();
        for (std::size_t p = 0; p < k; ++p) {
            const Index limit = p + 1 < k ? c.idx[p + 1] : (P == unbounded_order ? unbounded_order : P + 1);
            if (c.idx[p] + 1 < limit) {
                auto next = c.idx;
                ++next[p];
                push(std::move(next));
            }
        }
        out.entries.push_back({out.entries.size() + 1, VariableSet(std::move(c.idx)), c.hat});
    }
    return out;
}

OrderedSupport enumerate_lex(const LexOrderedWeights& lex, int sigma, std::size_t m, std::size_t cap) {
    OrderedSupport out;
    out.sigma = sigma;
    const int depth = std::min(sigma, lex.omega);
    const Index P = lex.hat_g.positive_count();
    std::size_t work = 0;
    std::vector<Index> word;  // decreasing
    bool done = false;

    // Depth-first walk over decreasing words; children in increasing letter order gives the
    // prefix-first lexicographic order.
    std::function<void()> visit = [&] {
        if (done) return;
        if (++work > cap) throw EnumerationError("lexicographic enumeration exceeded the candidate cap");
        std::vector<Index> sorted(word.rbegin(), word.rend());
        VariableSet u(std::move(sorted));
        long double r = lex_rank(u, lex.omega);
        if (P != unbounded_order && r > static_cast<long double>(P)) return;
        out.entries.push_back({out.entries.size() + 1, std::move(u), lex.hat_g.is_power()
                                                                         ? lex.hat_g.c() * std::pow(static_cast<double>(r), -lex.hat_g.beta())
                                                                         : lex.hat_g(static_cast<Index>(r))});
        if (out.entries.size() >= m) {
            done = true;
            return;
        }
        if (static_cast<int>(word.size()) >= depth) return;
        for (Index c = 1; c < word.back() && !done; ++c) {
            word.push_back(c);
            visit();
            word.pop_back();
        }
    };
    for (Index top = 1; !done; ++top) {
        if (P != unbounded_order && lex_rank(VariableSet{top}, lex.omega) > static_cast<long double>(P)) {
            out.exhausted = true;
            break;
        }
        word = {top};
        visit();
    }
    return out;
}

OrderedSupport enumerate_blocks(const FiniteIntersectionWeights& fi, double C0, int sigma, std::size_t m) {
    OrderedSupport out;
    out.sigma = sigma;
    const Generator& g = *fi.block_generator;
    const Index P = g.positive_count();
    const int b = fi.block_size;
    const bool blocks = b <= sigma;
    double cb = 1.0;
    for (int i = 0; i < b; ++i) cb *= C0;
    Index j = 1, i = 1;
    while (out.entries.size() < m) {
        const bool have_single = j <= P;
        const bool have_block = blocks && i <= P;
        if (!have_single && !have_block) {
            out.exhausted = true;
            break;
        }
        const double hs = have_single ? g(j) * C0 : -1.0;
        const double hb = have_block ? g(i) * cb : -1.0;
        // Singletons win ties (smaller cardinality).
        if (have_single && hs >= hb) {
            out.entries.push_back({out.entries.size() + 1, VariableSet{j}, hs});
            ++j;
        } else {
            std::vector<Index> idx(static_cast<std::size_t>(b));
            for (int p = 0; p < b; ++p) idx[static_cast<std::size_t>(p)] = (i - 1) * b + p + 1;
            out.entries.push_back({out.entries.size() + 1, VariableSet(std::move(idx)), hb});
            ++i;
        }
    }
    return out;
}

void check_order(int order, const char* what) {
    if (order < 1) throw ParameterError(std::string(what) + " must be at least 1");
}

bool is_block(const VariableSet& u, int b, Index& block_index) {
    if (static_cast<int>(u.size()) != b || (u[0] - 1) % b != 0) return false;
    for (std::size_t p = 1; p < u.size(); ++p)
        if (u[p] != u[p - 1] + 1) return false;
    block_index = (u[0] - 1) / b + 1;
    return true;
}

}  // namespace

// ---------------------------------------------------------------- Generator

Generator Generator::power(double c, double beta) {
    if (!(c >= 0.0) || !(beta >= 0.0) || !std::isfinite(c) || !std::isfinite(beta))
        throw ParameterError("power generator needs c >= 0 and beta >= 0");
    Generator g;
    g.c_ = c;
    g.beta_ = beta;
    return g;
}

Generator Generator::list(std::vector<double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] >= 0.0) || !std::isfinite(values[i])) throw ParameterError("generator values must be finite and >= 0");
        if (i > 0 && values[i] > values[i - 1]) throw ParameterError("generator values must be non-increasing");
    }
    Generator g;
    g.values_ = std::move(values);
    if (g.values_.empty()) g.values_.push_back(0.0);
    return g;
}

double Generator::operator()(Index j) const {
    if (j < 1) return 0.0;
    if (is_power()) return c_ * std::pow(static_cast<double>(j), -beta_);
    return static_cast<std::size_t>(j) <= values_.size() ? values_[static_cast<std::size_t>(j) - 1] : 0.0;
}

Index Generator::positive_count() const {
    if (is_power()) return c_ > 0.0 ? unbounded_order : 0;
    Index n = 0;
    for (double v : values_)
        if (v > 0.0) ++n;
    return n;
}

bool Generator::summable() const {
    return !is_power() || c_ == 0.0 || beta_ > 1.0;
}

double Generator::tail_power_sum(Index J, double p) const {
    if (!is_power()) {
        double s = 0.0;
        for (std::size_t j = static_cast<std::size_t>(std::max(J, 0)); j < values_.size(); ++j) s += std::pow(values_[j], p);
        return s;
    }
    if (c_ == 0.0) return 0.0;
    const double q = beta_ * p;
    if (q <= 1.0) return std::numeric_limits<double>::infinity();
    double head = 0.0;
    Index start = std::max<Index>(J, 0);
    if (start < 64) {
        for (Index j = 64; j > start; --j) head += std::pow(static_cast<double>(j), -q);
        start = 64;
    }
    const double x = static_cast<double>(start);
    // Euler-Maclaurin: sum_{j > x} j^{-q}
    const double em = std::pow(x, 1.0 - q) / (q - 1.0) - 0.5 * std::pow(x, -q) + q / 12.0 * std::pow(x, -q - 1.0);
    return std::pow(c_, p) * (head + em);
}

nlohmann::json Generator::to_json() const {
    if (is_power()) return {{"kind", "power"}, {"c", c_}, {"beta", beta_}};
    return {{"kind", "list"}, {"values", values_}};
}

// ---------------------------------------------------------------- WeightFamily

WeightFamily WeightFamily::product(Generator g) {
    return WeightFamily(ProductWeights{std::move(g)});
}

WeightFamily WeightFamily::finite_product(Generator g, int omega) {
    check_order(omega, "finite-product order");
    return WeightFamily(FiniteProductWeights{std::move(g), omega});
}

WeightFamily WeightFamily::pod(Generator g, std::vector<double> Gamma) {
    if (Gamma.size() < 2) Gamma.resize(2, 1.0);
    if (Gamma[0] != 1.0 || Gamma[1] != 1.0) throw ParameterError("POD weights need Gamma_0 = Gamma_1 = 1");
    for (double v : Gamma)
        if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError("POD Gamma values must be finite and >= 0");
    return WeightFamily(PODWeights{std::move(g), std::move(Gamma)});
}

WeightFamily WeightFamily::finite_intersection(WeightList sets, int degree, double empty_weight) {
    check_order(degree, "intersection degree");
    WeightList clean;
    for (auto& [u, g] : sets) {
        if (!(g >= 0.0) || !std::isfinite(g)) throw ParameterError("weights must be finite and >= 0");
        if (u.empty()) {
            empty_weight = g;
            continue;
        }
        if (list_lookup(clean, u, -1.0) >= 0.0) throw ParameterError("duplicate set " + u.to_string());
        clean.emplace_back(u, g);
    }
    for (const auto& [u, g] : clean) {
        if (g <= 0.0) continue;
        int meets = 0;
        for (const auto& [v, h] : clean)
            if (h > 0.0 && u.intersects(v)) ++meets;
        if (meets > 1 + degree)
            throw ParameterError("set " + u.to_string() + " meets " + std::to_string(meets) +
                                 " positive-weight sets; intersection degree " + std::to_string(degree) + " allows " +
                                 std::to_string(1 + degree));
    }
    FiniteIntersectionWeights fi;
    fi.sets = std::move(clean);
    fi.degree = degree;
    fi.empty_weight = empty_weight;
    return WeightFamily(std::move(fi));
}

WeightFamily WeightFamily::finite_intersection_blocks(Generator g, int block_size) {
    if (block_size < 2) throw ParameterError("block size must be at least 2");
    FiniteIntersectionWeights fi;
    fi.block_generator = std::move(g);
    fi.block_size = block_size;
    fi.degree = block_size;
    return WeightFamily(std::move(fi));
}

WeightFamily WeightFamily::lex_ordered(int omega, Generator hat_g) {
    check_order(omega, "lexicographic order");
    if (hat_g.positive_count() == 0) throw ParameterError("lexicographically-ordered weights must be positive");
    if (hat_g.is_power() && hat_g.beta() <= 0.0)
        throw ParameterError("lexicographically-ordered weights need a strictly decreasing generator");
    if (!hat_g.is_power()) {
        const auto& v = hat_g.values();
        for (std::size_t i = 1; i < v.size(); ++i)
            if (v[i] > 0.0 && !(v[i] < v[i - 1]))
                throw ParameterError("lexicographically-ordered weights need a strictly decreasing generator");
    }
    return WeightFamily(LexOrderedWeights{omega, std::move(hat_g)});
}

WeightFamily WeightFamily::explicit_weights(WeightList sets) {
    WeightList clean;
    for (auto& [u, g] : sets) {
        if (!(g >= 0.0) || !std::isfinite(g)) throw ParameterError("weights must be finite and >= 0");
        if (list_lookup(clean, u, -1.0) >= 0.0) throw ParameterError("duplicate set " + u.to_string());
        clean.emplace_back(u, g);
    }
    return WeightFamily(ExplicitWeights{std::move(clean)});
}

WeightFamily cutoff(const WeightFamily& w, int sigma) {
    check_order(sigma, "cut-off order");
    if (const auto* c = std::get_if<CutOffWeights>(&w.cls_)) {
        WeightFamily out(CutOffWeights{c->base, std::min(sigma, c->sigma)});
        out.c0_ = w.c0_;
        return out;
    }
    WeightFamily out(CutOffWeights{std::make_shared<const WeightFamily>(w), sigma});
    out.c0_ = w.c0_;
    return out;
}

std::string WeightFamily::class_name() const {
    return std::visit(Overloaded{[](const ProductWeights&) { return std::string("product"); },
                                 [](const FiniteProductWeights&) { return std::string("finite_product"); },
                                 [](const PODWeights&) { return std::string("pod"); },
                                 [](const FiniteIntersectionWeights&) { return std::string("finite_intersection"); },
                                 [](const LexOrderedWeights&) { return std::string("lex"); },
                                 [](const ExplicitWeights&) { return std::string("explicit"); },
                                 [](const CutOffWeights&) { return std::string("cutoff"); }},
                      cls_);
}

WeightFamily WeightFamily::bound(double C0) const {
    if (!(C0 > 0.0) || !std::isfinite(C0)) throw ParameterError("C0 must be positive");
    WeightFamily w = *this;
    w.c0_ = C0;
    if (auto* c = std::get_if<CutOffWeights>(&w.cls_)) c->base = std::make_shared<const WeightFamily>(c->base->bound(C0));
    return w;
}

double WeightFamily::require_C0() const {
    if (!c0_) throw ConfigurationError("weight family is not bound to a kernel constant C0");
    return *c0_;
}

std::optional<WeightFamily::ProductView> WeightFamily::product_view() const {
    return std::visit(Overloaded{[](const ProductWeights& p) -> std::optional<ProductView> { return ProductView{p.g, {}, false}; },
                                 [](const FiniteProductWeights& p) -> std::optional<ProductView> {
                                     return ProductView{p.g, std::vector<double>(static_cast<std::size_t>(p.omega) + 1, 1.0), false};
                                 },
                                 [](const PODWeights& p) -> std::optional<ProductView> { return ProductView{p.g, p.Gamma, true}; },
                                 [](const CutOffWeights& c) -> std::optional<ProductView> {
                                     auto base = c.base->product_view();
                                     if (!base) return std::nullopt;
                                     const std::size_t n = static_cast<std::size_t>(c.sigma) + 1;
                                     if (base->mult.empty()) base->mult.assign(n, 1.0);
                                     else if (base->mult.size() > n) base->mult.resize(n);
                                     return base;
                                 },
                                 [](const auto&) -> std::optional<ProductView> { return std::nullopt; }},
                      cls_);
}

double WeightFamily::weight(const VariableSet& u) const {
    if (auto view = product_view()) {
        double prod = 1.0;
        for (Index j : u) prod *= view->g(j);
        return view->multiplier(u.size()) * prod;
    }
    return std::visit(Overloaded{[&](const FiniteIntersectionWeights& fi) -> double {
                                     if (u.empty()) return fi.empty_weight;
                                     if (!fi.block_generator) return list_lookup(fi.sets, u, 0.0);
                                     if (u.size() == 1) return (*fi.block_generator)(u[0]);
                                     Index i = 0;
                                     return is_block(u, fi.block_size, i) ? (*fi.block_generator)(i) : 0.0;
                                 },
                                 [&](const LexOrderedWeights& lex) -> double {
                                     if (u.empty()) return 1.0;
                                     if (static_cast<int>(u.size()) > lex.omega) return 0.0;
                                     double h = hat(u);
                                     const double C0 = require_C0();
                                     for (std::size_t i = 0; i < u.size(); ++i) h /= C0;
                                     return h;
                                 },
                                 [&](const ExplicitWeights& e) -> double { return list_lookup(e.sets, u, 0.0); },
                                 [&](const CutOffWeights& c) -> double {
                                     return static_cast<int>(u.size()) > c.sigma ? 0.0 : c.base->weight(u);
                                 },
                                 [](const auto&) -> double { return 0.0; }},
                      cls_);
}

double WeightFamily::hat(const VariableSet& u) const {
    const double C0 = require_C0();
    if (auto view = product_view()) return view_hat(*view, C0, u.indices());
    if (const auto* lex = std::get_if<LexOrderedWeights>(&cls_)) {
        if (u.empty()) return 1.0;
        if (static_cast<int>(u.size()) > lex->omega) return 0.0;
        const long double r = lex_rank(u, lex->omega);
        if (lex->hat_g.is_power()) return lex->hat_g.c() * std::pow(static_cast<double>(r), -lex->hat_g.beta());
        return r > static_cast<long double>(lex->hat_g.values().size()) ? 0.0 : lex->hat_g(static_cast<Index>(r));
    }
    if (const auto* c = std::get_if<CutOffWeights>(&cls_))
        return static_cast<int>(u.size()) > c->sigma ? 0.0 : c->base->hat(u);
    double h = weight(u);
    for (std::size_t i = 0; i < u.size(); ++i) h *= C0;
    return h;
}

int WeightFamily::max_order() const {
    if (auto view = product_view()) {
        if (view->mult.empty()) return unbounded_order;
        int k = view->max_k();
        while (k > 0 && view->mult[static_cast<std::size_t>(k)] <= 0.0) --k;
        return k;
    }
    return std::visit(Overloaded{[](const FiniteIntersectionWeights& fi) {
                                     if (fi.block_generator) return fi.block_size;
                                     int k = 0;
                                     for (const auto& [u, g] : fi.sets)
                                         if (g > 0.0) k = std::max(k, static_cast<int>(u.size()));
                                     return k;
                                 },
                                 [](const LexOrderedWeights& lex) { return lex.omega; },
                                 [](const ExplicitWeights& e) {
                                     int k = 0;
                                     for (const auto& [u, g] : e.sets)
                                         if (g > 0.0) k = std::max(k, static_cast<int>(u.size()));
                                     return k;
                                 },
                                 [](const CutOffWeights& c) { return std::min(c.sigma, c.base->max_order()); },
                                 [](const auto&) { return unbounded_order; }},
                      cls_);
}

bool WeightFamily::finite_support() const {
    if (auto view = product_view()) return view->g.positive_count() != unbounded_order;
    return std::visit(Overloaded{[](const FiniteIntersectionWeights& fi) {
                                     return !fi.block_generator || fi.block_generator->positive_count() != unbounded_order;
                                 },
                                 [](const LexOrderedWeights& lex) { return lex.hat_g.positive_count() != unbounded_order; },
                                 [](const ExplicitWeights&) { return true; },
                                 [](const CutOffWeights& c) { return c.base->finite_support(); },
                                 [](const auto&) { return false; }},
                      cls_);
}

bool WeightFamily::summable() const {
    if (auto view = product_view()) return view->g.summable();
    return std::visit(Overloaded{[](const FiniteIntersectionWeights& fi) {
                                     return !fi.block_generator || fi.block_generator->summable();
                                 },
                                 [](const LexOrderedWeights& lex) { return lex.hat_g.summable(); },
                                 [](const ExplicitWeights&) { return true; },
                                 [](const CutOffWeights& c) { return c.base->summable(); },
                                 [](const auto&) { return true; }},
                      cls_);
}

double WeightFamily::weighted_subset_sum(const VariableSet& S, const std::function<double(Index)>& factor) const {
    if (auto view = product_view()) {
        if (view->mult.empty()) {
            double prod = 1.0;
            for (Index j : S) prod *= 1.0 + view->g(j) * factor(j);
            return prod;
        }
        const int K = std::min<int>(view->max_k(), static_cast<int>(S.size()));
        std::vector<double> e(static_cast<std::size_t>(K) + 1, 0.0);
        e[0] = 1.0;
        for (Index j : S) {
            const double x = view->g(j) * factor(j);
            for (int k = K; k >= 1; --k) e[static_cast<std::size_t>(k)] += x * e[static_cast<std::size_t>(k) - 1];
        }
        double s = 0.0;
        for (int k = 0; k <= K; ++k) s += view->multiplier(static_cast<std::size_t>(k)) * e[static_cast<std::size_t>(k)];
        return s;
    }
    auto over_list = [&](const WeightList& list, double empty, int sigma) {
        double s = empty;
        for (const auto& [u, g] : list) {
            if (u.empty() || static_cast<int>(u.size()) > sigma || !u.is_subset_of(S)) continue;
            double prod = g;
            for (Index j : u) prod *= factor(j);
            s += prod;
        }
        return s;
    };
    if (const auto* e = std::get_if<ExplicitWeights>(&cls_)) return over_list(e->sets, weight({}), unbounded_order);
    if (const auto* fi = std::get_if<FiniteIntersectionWeights>(&cls_); fi && !fi->block_generator)
        return over_list(fi->sets, fi->empty_weight, unbounded_order);
    if (const auto* c = std::get_if<CutOffWeights>(&cls_)) {
        if (const auto* e = std::get_if<ExplicitWeights>(&c->base->cls_))
            return over_list(e->sets, weight({}), c->sigma);
        if (const auto* fi = std::get_if<FiniteIntersectionWeights>(&c->base->cls_); fi && !fi->block_generator)
            return over_list(fi->sets, fi->empty_weight, c->sigma);
    }
    if (S.size() > 25)
        throw UnsupportedFamilyError("kernel sum over " + std::to_string(S.size()) + " active coordinates is not supported for " +
                                     class_name() + " weights");
    double s = 0.0;
    for (unsigned long long mask = 0; mask < (1ULL << S.size()); ++mask) {
        const VariableSet u = S.subset_by_mask(mask);
        double prod = weight(u);
        if (prod == 0.0) continue;
        for (Index j : u) prod *= factor(j);
        s += prod;
    }
    return s;
}

double WeightFamily::count_in_box(Index m, int sigma) const {
    if (auto view = product_view()) {
        const Index mm = std::min(m, view->g.positive_count());
        const int K = std::min({sigma, view->max_k(), static_cast<int>(mm)});
        long double s = 0.0L;
        for (int k = 1; k <= K; ++k)
            if (view->multiplier(static_cast<std::size_t>(k)) > 0.0) s += binomial(mm, k);
        return static_cast<double>(s);
    }
    auto over_list = [&](const WeightList& list, int cap) {
        double n = 0.0;
        for (const auto& [u, g] : list)
            if (g > 0.0 && !u.empty() && static_cast<int>(u.size()) <= cap && (u.max() <= m)) n += 1.0;
        return n;
    };
    return std::visit(Overloaded{[&](const FiniteIntersectionWeights& fi) -> double {
                                     if (!fi.block_generator) return over_list(fi.sets, sigma);
                                     const Index P = fi.block_generator->positive_count();
                                     double n = static_cast<double>(std::min(m, P));
                                     if (fi.block_size <= sigma) n += static_cast<double>(std::min(m / fi.block_size, P));
                                     return n;
                                 },
                                 [&](const LexOrderedWeights& lex) -> double {
                                     const int K = std::min({sigma, lex.omega, static_cast<int>(m)});
                                     long double s = 0.0L;
                                     for (int k = 1; k <= K; ++k) s += binomial(m, k);
                                     return static_cast<double>(s);
                                 },
                                 [&](const ExplicitWeights& e) -> double { return over_list(e.sets, sigma); },
                                 [&](const CutOffWeights& c) -> double { return c.base->count_in_box(m, std::min(sigma, c.sigma)); },
                                 [](const auto&) -> double { return 0.0; }},
                      cls_);
}

std::optional<double> WeightFamily::hat_mass(int sigma) const {
    const double C0 = require_C0();
    if (auto view = product_view()) {
        const int K = std::min(sigma, view->max_k());
        if (K == unbounded_order) return product_mass(view->g, C0);
        const auto e = elementary_sums(view->g, C0, K);
        double s = 0.0;
        for (int k = 1; k <= K; ++k) s += view->multiplier(static_cast<std::size_t>(k)) * e[static_cast<std::size_t>(k)];
        return s;
    }
    auto over_list = [&](const WeightList& list, int cap) {
        double s = 0.0;
        for (const auto& [u, g] : list)
            if (!u.empty() && static_cast<int>(u.size()) <= cap) s += hat(u);
        return s;
    };
    return std::visit(Overloaded{[&](const FiniteIntersectionWeights& fi) -> std::optional<double> {
                                     if (!fi.block_generator) return over_list(fi.sets, sigma);
                                     const double total = generator_total(*fi.block_generator);
                                     double cb = 1.0;
                                     for (int i = 0; i < fi.block_size; ++i) cb *= C0;
                                     return C0 * total + (fi.block_size <= sigma ? cb * total : 0.0);
                                 },
                                 [&](const LexOrderedWeights& lex) -> std::optional<double> {
                                     if (sigma < lex.omega) return std::nullopt;
                                     return generator_total(lex.hat_g);
                                 },
                                 [&](const ExplicitWeights& e) -> std::optional<double> { return over_list(e.sets, sigma); },
                                 [&](const CutOffWeights& c) -> std::optional<double> { return c.base->hat_mass(std::min(sigma, c.sigma)); },
                                 [](const auto&) -> std::optional<double> { return std::nullopt; }},
                      cls_);
}

nlohmann::json WeightFamily::to_json() const {
    auto list_json = [](const WeightList& list) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [u, g] : list) arr.push_back({{"u", std::vector<Index>(u.begin(), u.end())}, {"gamma", g}});
        return arr;
    };
    nlohmann::json j = std::visit(
        Overloaded{[](const ProductWeights& p) -> nlohmann::json { return {{"class", "product"}, {"generator", p.g.to_json()}}; },
                   [](const FiniteProductWeights& p) -> nlohmann::json {
                       return {{"class", "finite_product"}, {"omega", p.omega}, {"generator", p.g.to_json()}};
                   },
                   [](const PODWeights& p) -> nlohmann::json {
                       return {{"class", "pod"}, {"Gamma", p.Gamma}, {"generator", p.g.to_json()}};
                   },
                   [&](const FiniteIntersectionWeights& fi) -> nlohmann::json {
                       if (fi.block_generator)
                           return {{"class", "finite_intersection"},
                                   {"blocks", {{"size", fi.block_size}, {"generator", fi.block_generator->to_json()}}}};
                       return {{"class", "finite_intersection"}, {"degree", fi.degree}, {"empty", fi.empty_weight}, {"sets", list_json(fi.sets)}};
                   },
                   [](const LexOrderedWeights& lex) -> nlohmann::json {
                       nlohmann::json j = {{"class", "lex"}, {"generator", lex.hat_g.to_json()}};
                       if (lex.omega == unbounded_order) j["omega"] = "inf";
                       else j["omega"] = lex.omega;
                       return j;
                   },
                   [&](const ExplicitWeights& e) -> nlohmann::json { return {{"class", "explicit"}, {"sets", list_json(e.sets)}}; },
                   [](const CutOffWeights& c) -> nlohmann::json {
                       return {{"class", "cutoff"}, {"sigma", c.sigma}, {"base", c.base->to_json()}};
                   }},
        cls_);
    if (c0_) j["C0"] = *c0_;
    return j;
}

// ---------------------------------------------------------------- enumeration and rates

OrderedSupport enumerate_ordered(const WeightFamily& w, int sigma, std::size_t m, std::size_t candidate_cap) {
    if (m < 1) throw ParameterError("enumeration count must be at least 1");
    if (sigma < 1) throw ParameterError("sigma must be at least 1");
    const double C0 = w.require_C0();
    if (auto view = w.product_view()) {
        if (!view->g.summable() && view->g.positive_count() == unbounded_order && sigma == unbounded_order)
            throw EnumerationError("generator does not decay; the ordered support is not well defined");
        return enumerate_product(*view, C0, sigma, m, candidate_cap);
    }
    if (const auto* c = std::get_if<CutOffWeights>(&w.cls())) {
        auto out = enumerate_ordered(*c->base, std::min(sigma, c->sigma), m, candidate_cap);
        out.sigma = sigma;
        return out;
    }
    if (const auto* lex = std::get_if<LexOrderedWeights>(&w.cls())) return enumerate_lex(*lex, sigma, m, candidate_cap);
    if (const auto* fi = std::get_if<FiniteIntersectionWeights>(&w.cls()); fi && fi->block_generator)
        return enumerate_blocks(*fi, C0, sigma, m);

    const WeightList& list = std::holds_alternative<ExplicitWeights>(w.cls())
                                 ? std::get<ExplicitWeights>(w.cls()).sets
                                 : std::get<FiniteIntersectionWeights>(w.cls()).sets;
    std::vector<OrderedEntry> all;
    for (const auto& [u, g] : list) {
        if (u.empty() || static_cast<int>(u.size()) > sigma || g <= 0.0) continue;
        all.push_back({0, u, w.hat(u)});
    }
    std::sort(all.begin(), all.end(), [](const OrderedEntry& a, const OrderedEntry& b) {
        if (a.hat != b.hat) return a.hat > b.hat;
        return cardinality_then_lex_less(a.u, b.u);
    });
    OrderedSupport out;
    out.sigma = sigma;
    out.exhausted = all.size() < m;
    if (all.size() > m) all.resize(m);
    for (std::size_t i = 0; i < all.size(); ++i) all[i].rank = i + 1;
    out.entries = std::move(all);
    return out;
}

namespace {

std::optional<double> decay_closed_form(const WeightFamily& w, int sigma) {
    if (auto view = w.product_view()) {
        if (view->g.is_power() && view->g.c() > 0.0 && view->multiplier(1) > 0.0 && sigma >= 1) return view->g.beta();
        return std::nullopt;
    }
    return std::visit(Overloaded{[&](const LexOrderedWeights& lex) -> std::optional<double> {
                                     if (sigma >= lex.omega && lex.hat_g.is_power()) return lex.hat_g.beta();
                                     return std::nullopt;
                                 },
                                 [&](const FiniteIntersectionWeights& fi) -> std::optional<double> {
                                     if (fi.block_generator && fi.block_generator->is_power() && fi.block_generator->c() > 0.0)
                                         return fi.block_generator->beta();
                                     return std::nullopt;
                                 },
                                 [&](const CutOffWeights& c) -> std::optional<double> {
                                     return decay_closed_form(*c.base, std::min(sigma, c.sigma));
                                 },
                                 [](const auto&) -> std::optional<double> { return std::nullopt; }},
                      w.cls());
}

std::optional<double> tstar_closed_form(const WeightFamily& w, int sigma, bool& saturated) {
    if (auto view = w.product_view()) {
        if (view->g.positive_count() != unbounded_order) {
            saturated = true;
            return 0.0;
        }
        if (view->pod) return std::nullopt;
        const int K = std::min(sigma, view->max_k());
        if (K == unbounded_order) return std::nullopt;
        return static_cast<double>(K);
    }
    return std::visit(Overloaded{[&](const FiniteIntersectionWeights& fi) -> std::optional<double> {
                                     if (!fi.block_generator || fi.block_generator->positive_count() != unbounded_order)
                                         saturated = true;
                                     return 1.0;
                                 },
                                 [&](const LexOrderedWeights& lex) -> std::optional<double> {
                                     const int K = std::min(sigma, lex.omega);
                                     if (K == unbounded_order) return std::nullopt;
                                     return static_cast<double>(K);
                                 },
                                 [&](const ExplicitWeights&) -> std::optional<double> {
                                     saturated = true;
                                     return 0.0;
                                 },
                                 [&](const CutOffWeights& c) -> std::optional<double> {
                                     return tstar_closed_form(*c.base, std::min(sigma, c.sigma), saturated);
                                 },
                                 [](const auto&) -> std::optional<double> { return std::nullopt; }},
                      w.cls());
}

struct LineFit {
    double slope = 0.0, intercept = 0.0, residual = 0.0, slope_stderr = 0.0;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss += r * r;
    }
    f.residual = std::sqrt(ss / n);
    f.slope_stderr = (x.size() > 2 && sxx > 0.0) ? std::sqrt(ss / (n - 2.0) / sxx) : 0.0;
    return f;
}

}  // namespace

DecayReport decay(const WeightFamily& w, int sigma, std::size_t ranks) {
    if (ranks < 16) throw ParameterError("decay estimation needs at least 16 ranks");
    DecayReport r;
    r.sigma = sigma;
    r.closed_form = decay_closed_form(w, sigma);
    const auto support = enumerate_ordered(w, sigma, ranks);
    if (support.entries.size() < ranks) {
        r.saturated = true;
        r.estimate = std::numeric_limits<double>::infinity();
        if (!r.closed_form) r.closed_form = std::numeric_limits<double>::infinity();
        return r;
    }
    r.window_begin = ranks / 2;
    r.window_end = ranks;
    std::vector<double> x, y;
    for (std::size_t j = r.window_begin; j <= r.window_end; ++j) {
        x.push_back(std::log(static_cast<double>(j)));
        y.push_back(-std::log(support.entries[j - 1].hat));
    }
    const auto fit = least_squares(x, y);
    r.estimate = fit.slope;
    r.residual = fit.residual;
    r.slope_stderr = fit.slope_stderr;
    return r;
}

TstarReport tstar(const WeightFamily& w, int sigma) {
    if (sigma < 1) throw ParameterError("sigma must be at least 1");
    TstarReport r;
    r.closed_form = tstar_closed_form(w, sigma, r.saturated);
    std::vector<double> x, y;
    for (Index m : {16, 32, 64}) {
        const double n = w.count_in_box(m, sigma);
        if (n > 0.0) {
            x.push_back(std::log(static_cast<double>(m)));
            y.push_back(std::log(n));
        }
    }
    r.estimate = x.size() >= 2 ? least_squares(x, y).slope : 0.0;
    return r;
}

TruncatedSupport enumerate_until_tail(const WeightFamily& w, int sigma, double tail_tol, std::size_t candidate_cap) {
    if (!(tail_tol > 0.0)) throw ParameterError("tail tolerance must be positive");
    if (!w.summable()) throw ParameterError("weights fail the summability certificate");
    TruncatedSupport out;
    out.total_mass = w.hat_mass(sigma);
    const auto* lex = std::get_if<LexOrderedWeights>(&w.cls());
    if (!lex)
        if (const auto* c = std::get_if<CutOffWeights>(&w.cls())) lex = std::get_if<LexOrderedWeights>(&c->base->cls());
    if (!out.total_mass && !lex) throw UnsupportedFamilyError("no tail bound available for " + w.class_name() + " weights");

    for (std::size_t m = 64;; m *= 4) {
        if (m > candidate_cap) throw EnumerationError("tail tolerance not reached within the candidate cap");
        auto support = enumerate_ordered(w, sigma, m, candidate_cap);
        double sum = 0.0;
        for (const auto& e : support.entries) sum += e.hat;
        double tail = 0.0;
        if (support.exhausted) tail = 0.0;
        else if (out.total_mass) tail = std::max(0.0, *out.total_mass - sum);
        else {
            // Remaining sets all come later in the lexicographic order.
            const auto& last = support.entries.back().u;
            const long double r = lex_rank(last, lex->omega);
            const Generator& g = lex->hat_g;
            tail = g.is_power() ? g.c() * std::pow(static_cast<double>(r), -g.beta()) * static_cast<double>(r) / (g.beta() - 1.0)
                                : g.tail_power_sum(static_cast<Index>(r), 1.0);
        }
        if (tail <= tail_tol || support.exhausted) {
            out.entries = std::move(support.entries);
            out.enumerated_mass = sum;
            out.tail_bound = tail;
            return out;
        }
    }
}

OperatorNormReport operator_norm_sq(const WeightFamily& w, double tail_tol) {
    if (!w.summable()) throw ParameterError("weights fail the summability certificate");
    OperatorNormReport r;
    const double empty = w.weight({});
    if (auto mass = w.hat_mass(unbounded_order)) {
        r.nonempty = *mass;
    } else {
        auto t = enumerate_until_tail(w, unbounded_order, tail_tol);
        r.nonempty = t.enumerated_mass;
        r.tail_bound = t.tail_bound;
    }
    r.full = empty + r.nonempty;
    return r;
}

}  // namespace anchorquad
