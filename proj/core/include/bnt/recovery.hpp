#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "bnt/nt_map.hpp"

namespace bnt {

// Symmetric 2x2 table of tangential boundary jets, slots (11, 12, 22).
template <class S>
using SymTableT = std::array<Jet3T<S>, 3>;

// Boundary jet of the inverse metric read off an NT symbol: g^{ab} to
// tangential order T, and d_n^k g^{ab} to order T - k for k = 1..Kmax.
template <class S>
struct RecoveredJetT {
    SymTableT<S> boundary_metric;
    std::vector<SymTableT<S>> normal_derivs;
    int T = 0;
    std::vector<double> stage_residuals;  // max forward mismatch per stage
};

// First two normal derivatives recovered degree by degree, together with
// the curvature trace D = -(1/2) g^{ab} d_n g_{ab} at the boundary and its
// first normal derivative.
template <class S>
struct FirstOrdersT {
    SymTableT<S> first, second;
    Jet3T<S> D, dnD;
};

using XiDirections = std::vector<std::pair<Rational, Rational>>;

inline const XiDirections& default_directions() {
    static const XiDirections dirs = {{rat(1), rat(0)},  {rat(0), rat(1)}, {rat(1), rat(1)},
                                      {rat(1), rat(-1)}, {rat(2), rat(1)}, {rat(1), rat(-2)}};
    return dirs;
}

// Metric whose inverse matches the given boundary table and normal
// derivative tables and is polynomial in x^n beyond them.
template <class S>
MetricJetT<S> metric_from_inverse_tables(const SymTableT<S>& h0,
                                         const std::vector<SymTableT<S>>& derivs, int order) {
    std::array<Jet3T<S>, 3> h;
    for (int i = 0; i < 3; ++i) {
        Jet3T<S> acc(order);
        auto add_layer = [&](const Jet3T<S>& tab, int n, const S& fac) {
            for (const auto& [key, val] : tab.coeffs()) {
                MIdx m = MIdx::unpack(key);
                if (m.an != 0)
                    throw ContractError("normal derivative tables must be tangential jets");
                MIdx full{m.a1, m.a2, n};
                if (full.total() > order) continue;
                acc.set(full, acc.coeff(full) + val * fac);
            }
        };
        add_layer(h0[i], 0, ScalarOps<S>::one());
        S fac = ScalarOps<S>::one();
        for (std::size_t k = 0; k < derivs.size(); ++k) {
            fac = fac / ScalarOps<S>::from_long(static_cast<long>(k) + 1);
            add_layer(derivs[k][i], static_cast<int>(k) + 1, fac);
        }
        h[i] = acc;
    }
    Jet3T<S> det = h[0] * h[2] - h[1] * h[1];
    Jet3T<S> idet = det.reciprocal();
    return MetricJetT<S>(h[2] * idet, (h[1] * idet).scaled(-ScalarOps<S>::one()), h[0] * idet,
                         order);
}

namespace detail {

inline void require_directions(const XiDirections& dirs, std::size_t need) {
    std::vector<std::pair<Rational, Rational>> lines;
    for (const auto& d : dirs) {
        if (d.first == 0 && d.second == 0) throw ContractError("zero covector direction");
        bool fresh = true;
        for (const auto& l : lines)
            if (l.first * d.second - l.second * d.first == 0) fresh = false;
        if (fresh) lines.push_back(d);
    }
    if (lines.size() < need)
        throw DegenerateDirections("need " + std::to_string(need) +
                                   " pairwise independent covector directions, got " +
                                   std::to_string(lines.size()));
}

template <class S>
double cjet_scale(const CJetT<S>& c, int order) {
    return std::max(jet_max_abs(c.re, order), jet_max_abs(c.im, order));
}

// Solves rows[i] . (Y11, Y12, Y22) = rhs[i] for jet unknowns by elimination
// on the rational coefficient matrix; surplus rows must close to zero.
template <class S>
std::array<CJetT<S>, 3> solve_quadratic_form(std::vector<std::array<Rational, 3>> rows,
                                             std::vector<CJetT<S>> rhs, int order, double tol,
                                             const std::string& what) {
    if (rows.size() != rhs.size()) throw InternalError("quadratic form fit shape mismatch");
    double scale = 0.0;
    for (auto& r : rhs) {
        if (r.re.order() < order || r.im.order() < order)
            throw OrderTooLow(what + ": coefficient jets too shallow for the requested order");
        r = r.truncated(order);
        if constexpr (!ScalarOps<S>::exact) scale = std::max(scale, cjet_scale(r, order));
    }
    std::size_t prow = 0;
    for (int col = 0; col < 3 && prow < rows.size(); ++col) {
        std::size_t pivot = rows.size();
        for (std::size_t r = prow; r < rows.size(); ++r) {
            if (rows[r][col] == 0) continue;
            if (pivot == rows.size() || abs(rows[r][col]) > abs(rows[pivot][col])) pivot = r;
        }
        if (pivot == rows.size())
            throw DegenerateDirections(what + ": directions do not determine the form");
        std::swap(rows[pivot], rows[prow]);
        std::swap(rhs[pivot], rhs[prow]);
        Rational inv = 1 / rows[prow][col];
        for (int c = 0; c < 3; ++c) rows[prow][c] *= inv;
        rhs[prow] = rhs[prow].scaled(ScalarOps<S>::from_rat(inv));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (r == prow || rows[r][col] == 0) continue;
            Rational f = rows[r][col];
            for (int c = 0; c < 3; ++c) rows[r][c] -= f * rows[prow][c];
            rhs[r] -= rhs[prow].scaled(ScalarOps<S>::from_rat(f));
        }
        ++prow;
    }
    if (prow < 3) throw DegenerateDirections(what + ": directions do not determine the form");
    for (std::size_t r = prow; r < rows.size(); ++r) {
        if constexpr (ScalarOps<S>::exact) {
            if (!rhs[r].is_zero()) throw InconsistentData(what + ": overdetermined fit disagrees");
        } else {
            if (cjet_scale(rhs[r], order) > tol * (1.0 + scale))
                throw InconsistentData(what + ": overdetermined fit disagrees");
        }
    }
    return {rhs[0], rhs[1], rhs[2]};
}

template <class S>
std::array<Jet3T<S>, 3> real_table(const std::array<CJetT<S>, 3>& t, int order, double tol,
                                   const std::string& what) {
    std::array<Jet3T<S>, 3> out;
    for (int i = 0; i < 3; ++i) {
        bool ok;
        if constexpr (ScalarOps<S>::exact)
            ok = t[i].im.is_zero();
        else
            ok = jet_max_abs(t[i].im, order) <= tol * (1.0 + cjet_scale(t[i], order));
        if (!ok) throw InconsistentData(what + ": table has an imaginary residue");
        out[i] = t[i].re.truncated(order);
    }
    return out;
}

// Lower boundary metric from the inverse table, as tangential jets.
template <class S>
std::array<Jet3T<S>, 3> lower_from_inverse(const SymTableT<S>& h0, int order) {
    Jet3T<S> det = (h0[0] * h0[2] - h0[1] * h0[1]).truncated(order);
    Jet3T<S> idet = det.reciprocal();
    return {(h0[2] * idet).truncated(order),
            (h0[1] * idet).scaled(-ScalarOps<S>::one()).truncated(order),
            (h0[0] * idet).truncated(order)};
}

// g_{ab} T^{ab} for a symmetric slot table.
template <class S>
Jet3T<S> contract_lower(const std::array<Jet3T<S>, 3>& glow, const SymTableT<S>& t, int order) {
    Jet3T<S> two = Jet3T<S>::constant(ScalarOps<S>::from_long(2));
    return (glow[0] * t[0] + glow[1] * t[1] * two + glow[2] * t[2]).truncated(order);
}

// Copy of a symbol series over another context with boundary-restricted
// coefficients; boundary values of every term are unchanged.
template <class S>
SymbolSeriesT<S> rehost_boundary(const SymbolSeriesT<S>& s,
                                 std::shared_ptr<const MetricContextT<S>> ctx) {
    SymbolSeriesT<S> out(std::move(ctx), s.rows(), s.cols());
    for (int m : s.degrees())
        for (int r = 0; r < s.rows(); ++r)
            for (int c = 0; c < s.cols(); ++c)
                for (const auto& [key, coeff] : s.entry(m, r, c))
                    out.add_term(m, r, c, XiMonomial::unpack(key), coeff.boundary());
    return out;
}

// The omega-even content of a single scalar degree is a quadratic form
// Y(omega, omega) |xi|^deg; fits Y from direction samples.  Content of the
// other parity at the same degree is unrelated and ignored.
template <class S>
std::array<CJetT<S>, 3> even_quadratic_table(const SymbolSeriesT<S>& series, int deg,
                                             const XiDirections& dirs, int order, double tol,
                                             const std::string& what) {
    std::array<CJetT<S>, 3> zero{CJetT<S>(Jet3T<S>(order)), CJetT<S>(Jet3T<S>(order)),
                                 CJetT<S>(Jet3T<S>(order))};
    if (!series.has_degree(deg)) return zero;
    SymbolSeriesT<S> p = series.part(deg);
    const bool even_deg = ((deg % 2) + 2) % 2 == 0;
    const int qpow = even_deg ? (2 - deg) / 2 : (3 - deg) / 2;
    std::vector<std::array<Rational, 3>> rows;
    std::vector<CJetT<S>> rhs;
    for (const auto& [x1, x2] : dirs) {
        auto ab = p.eval_ab(x1, x2);
        Jet3T<S> qb = p.ctx()->q_jet(x1, x2).boundary().truncated(order);
        Jet3T<S> qp = Jet3T<S>::constant(ScalarOps<S>::one(), order);
        for (int e = 0; e < qpow; ++e) qp = qp * qb;
        CJetT<S> val = even_deg ? ab[0].A : ab[0].B;
        rows.push_back({x1 * x1, 2 * x1 * x2, x2 * x2});
        rhs.push_back((val.boundary() * qp).truncated(order));
    }
    return solve_quadratic_form(std::move(rows), std::move(rhs), order, tol, what);
}

// The omega-odd content of a single degree of a 2x1 column with structure
// i xi_nu P(omega, omega) |xi|^(deg-1); fits the quadratic form P.
template <class S>
std::array<CJetT<S>, 3> odd_column_table(const SymbolSeriesT<S>& series, int deg,
                                         const XiDirections& dirs, int order, double tol,
                                         const std::string& what) {
    std::array<CJetT<S>, 3> zero{CJetT<S>(Jet3T<S>(order)), CJetT<S>(Jet3T<S>(order)),
                                 CJetT<S>(Jet3T<S>(order))};
    if (!series.has_degree(deg)) return zero;
    SymbolSeriesT<S> p = series.part(deg);
    const bool even_deg = ((deg % 2) + 2) % 2 == 0;
    const int qpow = even_deg ? (4 - deg) / 2 : (3 - deg) / 2;
    std::vector<std::array<Rational, 3>> rows;
    std::vector<CJetT<S>> rhs;
    for (const auto& [x1, x2] : dirs) {
        auto ab = p.eval_ab(x1, x2);
        Jet3T<S> qb = p.ctx()->q_jet(x1, x2).boundary().truncated(order);
        Jet3T<S> qp = Jet3T<S>::constant(ScalarOps<S>::one(), order);
        for (int e = 0; e < qpow; ++e) qp = qp * qb;
        for (int nu = 0; nu < 2; ++nu) {
            CJetT<S> val = even_deg ? ab[nu].B : ab[nu].A;
            const Rational& xn = nu == 0 ? x1 : x2;
            rows.push_back({xn * x1 * x1, 2 * xn * x1 * x2, xn * x2 * x2});
            rhs.push_back(-(val.boundary() * qp).times_i().truncated(order));
        }
    }
    return solve_quadratic_form(std::move(rows), std::move(rhs), order, tol, what);
}

inline std::vector<std::array<int, 3>> table_slots(int cap) {
    std::vector<std::array<int, 3>> v;
    for (int comp = 0; comp < 3; ++comp)
        for (int t = 0; t <= cap; ++t)
            for (int a1 = t; a1 >= 0; --a1) v.push_back({comp, a1, t - a1});
    return v;
}

inline std::string slot_name(const std::array<int, 3>& s) {
    static const char* comp[] = {"g^{11}", "g^{12}", "g^{22}"};
    return std::string(comp[s[0]]) + " @ (" + std::to_string(s[1]) + "," + std::to_string(s[2]) +
           ")";
}

template <class S>
SymTableT<S> table_from_vector(const std::vector<std::array<int, 3>>& slots,
                               const std::vector<S>& u, int cap) {
    SymTableT<S> t{Jet3T<S>(cap), Jet3T<S>(cap), Jet3T<S>(cap)};
    for (std::size_t i = 0; i < slots.size(); ++i)
        if (!ScalarOps<S>::is_zero(u[i])) t[slots[i][0]].set(MIdx{slots[i][1], slots[i][2], 0}, u[i]);
    return t;
}

// Boundary observation of one symbol degree: coefficients of the rational
// and square-root parts at every direction, in a fixed flattening order.
template <class S>
std::vector<S> flatten_observation(const SymbolSeriesT<S>& sigma, int deg,
                                   const XiDirections& dirs, int cap) {
    std::vector<S> out;
    for (const auto& [x1, x2] : dirs) {
        std::vector<EvalABT<S>> ab;
        if (sigma.has_degree(deg))
            ab = sigma.part(deg).eval_ab(x1, x2);
        else
            ab.resize(static_cast<std::size_t>(sigma.rows()) * sigma.cols());
        for (const auto& e : ab) {
            for (const Jet3T<S>* j : {&e.A.re, &e.A.im, &e.B.re, &e.B.im}) {
                Jet3T<S> b = j->boundary();
                if (b.order() < cap)
                    throw OrderTooLow(
                        "symbol coefficients too shallow for the requested recovery order");
                for (int t = 0; t <= cap; ++t)
                    for (int a1 = t; a1 >= 0; --a1) out.push_back(b.coeff(a1, t - a1, 0));
            }
        }
    }
    return out;
}

// Elimination for the probing systems.  Pivotless columns are reported by
// slot name; rows that cannot be matched mean the observations are not
// produced by any candidate jet.
template <class S>
std::vector<S> solve_affine(std::vector<std::vector<S>> a, std::vector<S> b,
                            const std::vector<std::string>& names, double tol) {
    const std::size_t n = names.size();
    double scale = 0.0;
    if constexpr (!ScalarOps<S>::exact) {
        for (const auto& row : a)
            for (const S& v : row) scale = std::max(scale, std::abs(ScalarOps<S>::to_double(v)));
        for (const S& v : b) scale = std::max(scale, std::abs(ScalarOps<S>::to_double(v)));
    }
    std::vector<std::size_t> pivot_row(n);
    std::vector<std::string> free_slots;
    std::size_t prow = 0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = a.size();
        for (std::size_t r = prow; r < a.size(); ++r) {
            if constexpr (ScalarOps<S>::exact) {
                if (!ScalarOps<S>::is_zero(a[r][col])) {
                    pivot = r;
                    break;
                }
            } else {
                double v = std::abs(ScalarOps<S>::to_double(a[r][col]));
                if (v > tol * (1.0 + scale) &&
                    (pivot == a.size() ||
                     v > std::abs(ScalarOps<S>::to_double(a[pivot][col]))))
                    pivot = r;
            }
        }
        if (pivot == a.size()) {
            free_slots.push_back(names[col]);
            continue;
        }
        std::swap(a[pivot], a[prow]);
        std::swap(b[pivot], b[prow]);
        S inv = ScalarOps<S>::one() / a[prow][col];
        for (std::size_t c = col; c < n; ++c) a[prow][c] = a[prow][c] * inv;
        b[prow] = b[prow] * inv;
        for (std::size_t r = 0; r < a.size(); ++r) {
            if (r == prow || ScalarOps<S>::is_zero(a[r][col])) continue;
            S f = a[r][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] = a[r][c] - f * a[prow][c];
            b[r] = b[r] - f * b[prow];
        }
        pivot_row[col] = prow;
        ++prow;
    }
    if (!free_slots.empty()) {
        std::string msg = "underdetermined recovery stage; free coefficients:";
        for (const auto& s : free_slots) msg += " " + s;
        throw RankDeficiency(msg);
    }
    for (std::size_t r = prow; r < a.size(); ++r) {
        bool bad;
        if constexpr (ScalarOps<S>::exact)
            bad = !ScalarOps<S>::is_zero(b[r]);
        else
            bad = std::abs(ScalarOps<S>::to_double(b[r])) > tol * (1.0 + scale);
        if (bad)
            throw InconsistentData("observations are not consistent with any candidate jet");
    }
    std::vector<S> x(n);
    for (std::size_t col = 0; col < n; ++col) x[col] = b[pivot_row[col]];
    return x;
}

}  // namespace detail

// Reads the boundary inverse metric off the principal part i xi / |xi|, as
// tangential jets of order T.
template <class S>
SymTableT<S> recover_boundary_metric(const NTSymbolT<S>& nt, int T,
                                     const XiDirections& dirs = default_directions()) {
    if (T < 0) throw ContractError("negative jet order");
    detail::require_directions(dirs, 3);
    if (!nt.sigma.has_degree(0)) throw ContractError("NT symbol has no principal part");
    const double tol = 1e-10;
    SymbolSeriesT<S> top = nt.sigma.part(0);
    std::vector<std::array<Rational, 3>> rows;
    std::vector<CJetT<S>> rhs;
    for (const auto& [x1, x2] : dirs) {
        auto ab = top.eval_ab(x1, x2);
        const int use = abs(x1) >= abs(x2) ? 0 : 1;
        const Rational& xu = use == 0 ? x1 : x2;
        Jet3T<S> binv = ab[use].B.im.boundary().truncated(T);
        if (ScalarOps<S>::is_zero(binv.at0()))
            throw InconsistentData("principal part does not have unit-covector form");
        Jet3T<S> qrec = binv.reciprocal().scaled(ScalarOps<S>::from_rat(xu));
        double scale = 1.0 + jet_max_abs(qrec, T);
        auto near_zero = [&](const Jet3T<S>& j) {
            if constexpr (ScalarOps<S>::exact)
                return j.truncated(T).is_zero();
            else
                return jet_max_abs(j, T) <= tol * scale;
        };
        for (int nu = 0; nu < 2; ++nu) {
            Rational xn = nu == 0 ? x1 : x2;
            if (!near_zero(ab[nu].A.re.boundary()) || !near_zero(ab[nu].A.im.boundary()) ||
                !near_zero(ab[nu].B.re.boundary()) ||
                !near_zero(ab[nu].B.im.boundary() * qrec -
                           Jet3T<S>::constant(ScalarOps<S>::from_rat(xn), T)))
                throw InconsistentData("principal part does not have unit-covector form");
        }
        rows.push_back({x1 * x1, 2 * x1 * x2, x2 * x2});
        rhs.push_back(CJetT<S>(qrec));
    }
    auto fit = detail::solve_quadratic_form(std::move(rows), std::move(rhs), T, tol,
                                            "boundary metric recovery");
    SymTableT<S> h0 = detail::real_table(fit, T, tol, "boundary metric recovery");
    double h11 = ScalarOps<S>::to_double(h0[0].at0());
    double det = h11 * ScalarOps<S>::to_double(h0[2].at0()) -
                 ScalarOps<S>::to_double(h0[1].at0()) * ScalarOps<S>::to_double(h0[1].at0());
    if (h11 <= 0.0 || det <= 0.0)
        throw InconsistentData("recovered boundary metric is not positive definite");
    return h0;
}

// Recovers normal derivative tables d_n^k g^{ab}, k = 1..kmax, by affine
// probing: each stage forwards candidate jets through the symbol
// construction and solves for the candidate matching the observed degree.
template <class S>
RecoveredJetT<S> recover_jet(const NTSymbolT<S>& nt, int kmax, int T = 0,
                             const XiDirections& dirs = default_directions()) {
    if (kmax < 1) throw ContractError("kmax must be positive");
    if (T == 0) T = kmax + 1;
    if (T < kmax) throw ContractError("jet order T must be at least kmax");
    if (nt.bottom > -kmax)
        throw ContractError("NT symbol too shallow: stage k consumes degree -(k+1)");
    detail::require_directions(dirs, 3);

    RecoveredJetT<S> out;
    out.T = T;
    out.boundary_metric = recover_boundary_metric(nt, T, dirs);
    const int kf = T + 3;
    const double tol = 1e-8;

    for (int k = 0; k < kmax; ++k) {
        const int cap = T - (k + 1);
        const int deg = -(k + 1);
        auto slots = detail::table_slots(cap);
        const std::size_t n = slots.size();
        std::vector<std::string> names;
        names.reserve(n);
        for (const auto& s : slots) names.push_back(detail::slot_name(s));

        auto forward = [&](const std::vector<S>& u) {
            auto derivs = out.normal_derivs;
            derivs.push_back(detail::table_from_vector(slots, u, cap));
            auto ctx = std::make_shared<const MetricContextT<S>>(
                metric_from_inverse_tables(out.boundary_metric, derivs, kf));
            return detail::flatten_observation(nt_symbol(ctx, nt.lambda, deg).sigma, deg, dirs,
                                               cap);
        };

        std::vector<S> y = detail::flatten_observation(nt.sigma, deg, dirs, cap);
        std::vector<S> f0 = forward(std::vector<S>(n, ScalarOps<S>::zero()));

        // two deterministic probes certify that the stage observation is
        // affine before the solve trusts superposition
        std::vector<S> u1(n, ScalarOps<S>::zero()), u2(n, ScalarOps<S>::zero()), u12(n);
        for (std::size_t j = 0; j < n; ++j) {
            if (j % 3 == 0) u1[j] = ScalarOps<S>::from_rat(rat(1, 2 + static_cast<long>(j % 5)));
            if (j % 3 == 1) u2[j] = ScalarOps<S>::from_rat(rat(-1, 3 + static_cast<long>(j % 4)));
            u12[j] = u1[j] + u2[j];
        }
        std::vector<S> f1 = forward(u1), f2 = forward(u2), f12 = forward(u12);
        double fscale = 0.0;
        if constexpr (!ScalarOps<S>::exact)
            for (const S& v : y) fscale = std::max(fscale, std::abs(ScalarOps<S>::to_double(v)));
        for (std::size_t r = 0; r < y.size(); ++r) {
            S gap = f12[r] - f1[r] - f2[r] + f0[r];
            bool bad;
            if constexpr (ScalarOps<S>::exact)
                bad = !ScalarOps<S>::is_zero(gap);
            else
                bad = std::abs(ScalarOps<S>::to_double(gap)) > tol * (1.0 + fscale);
            if (bad)
                throw AffinityViolation("stage observation is not affine in the candidate jet");
        }

        std::vector<std::vector<S>> a(y.size(), std::vector<S>(n));
        std::vector<S> b(y.size());
        for (std::size_t r = 0; r < y.size(); ++r) b[r] = y[r] - f0[r];
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<S> e(n, ScalarOps<S>::zero());
            e[j] = ScalarOps<S>::one();
            std::vector<S> fj = forward(e);
            for (std::size_t r = 0; r < y.size(); ++r) a[r][j] = fj[r] - f0[r];
        }
        std::vector<S> x = detail::solve_affine(std::move(a), std::move(b), names, tol);

        std::vector<S> fx = forward(x);
        double resid = 0.0;
        for (std::size_t r = 0; r < y.size(); ++r) {
            S gap = fx[r] - y[r];
            if constexpr (ScalarOps<S>::exact) {
                if (!ScalarOps<S>::is_zero(gap))
                    throw InconsistentData("recovered jet does not reproduce the observations");
            } else {
                resid = std::max(resid, std::abs(ScalarOps<S>::to_double(gap)));
            }
        }
        if constexpr (!ScalarOps<S>::exact)
            if (resid > tol * (1.0 + fscale))
                throw InconsistentData("recovered jet does not reproduce the observations");
        out.normal_derivs.push_back(detail::table_from_vector(slots, x, cap));
        out.stage_residuals.push_back(resid);
    }
    return out;
}

// Recovers the first two normal derivative tables degree by degree: the
// symbol is re-expanded around a candidate metric, and the two defect
// relations at the next open degree are quadratic forms in the direction
// whose coefficient tables are linear in the missing derivative.  The
// tangential and normal relations each determine the table; they must
// agree.
template <class S>
FirstOrdersT<S> recover_first_orders_explicit(const NTSymbolT<S>& nt, int T = 3,
                                              const XiDirections& dirs = default_directions()) {
    if (T < 2) throw ContractError("jet order T must be at least 2");
    if (nt.bottom > -2)
        throw ContractError("NT symbol too shallow: degrees 0, -1, -2 are needed");
    detail::require_directions(dirs, 3);
    const double tol = 1e-8;
    const bool beltrami = !ScalarOps<S>::is_zero(nt.lambda);
    const int kf = T + 3;
    const S one = ScalarOps<S>::one();
    const S half = ScalarOps<S>::from_rat(rat(1, 2));

    SymTableT<S> h0 = recover_boundary_metric(nt, T, dirs);
    FirstOrdersT<S> out;

    // first stage: expand around the candidate with no normal dependence
    const int ord1 = T - 1;
    auto glow1 = detail::lower_from_inverse(h0, ord1);
    auto ctx0 = std::make_shared<const MetricContextT<S>>(metric_from_inverse_tables(h0, {}, kf));
    DNSymbolT<S> d0 = factorize_dn(ctx0, nt.lambda, 0);
    NTSymbolT<S> ntr0{detail::rehost_boundary(nt.sigma, ctx0), nt.lambda, ctx0, -1};
    SymbolSeriesT<S> tdef = -nt_tangential_residual(ntr0, d0);
    SymbolSeriesT<S> ndef = -nt_normal_residual(ntr0, d0);

    auto p1 = detail::real_table(
        detail::odd_column_table(tdef, 0, dirs, ord1, tol, "first-order tangential relation"),
        ord1, tol, "first-order tangential relation");
    Jet3T<S> dtr = detail::contract_lower(glow1, p1, ord1).scaled(ScalarOps<S>::from_long(2));
    SymTableT<S> u1t;
    for (int i = 0; i < 3; ++i)
        u1t[i] = ((dtr * h0[i]).scaled(ScalarOps<S>::from_long(2)) -
                  p1[i].scaled(ScalarOps<S>::from_long(4)))
                     .truncated(ord1);

    // fold the curvature-trace term back into the normal defect so its even
    // content is again a plain quadratic form
    if (beltrami) {
        SymbolSeriesT<S> ttilde(ctx0, 1, 2);
        Jet3T<S> sj = ctx0->metric().inv_sqrt_det().scaled(one / nt.lambda);
        ttilde.add_term(1, 0, 0, XiMonomial{0, 1, 0}, CJetT<S>(sj).scaled(-one).times_i());
        ttilde.add_term(1, 0, 1, XiMonomial{1, 0, 0}, CJetT<S>(sj).times_i());
        SymbolSeriesT<S> dser(ctx0, 1, 1);
        dser.add_term(0, 0, 0, XiMonomial{}, CJetT<S>(dtr));
        ndef += dser * sym_compose(ttilde, ntr0.sigma, 0);
    }
    auto y1 = detail::real_table(
        detail::even_quadratic_table(ndef, 0, dirs, ord1, tol, "first-order normal relation"),
        ord1, tol, "first-order normal relation");
    SymTableT<S> u1n;
    for (int i = 0; i < 3; ++i) {
        Jet3T<S> shift = (dtr * h0[i]).scaled(half);
        Jet3T<S> base = beltrami ? y1[i] - shift : y1[i] + shift;
        u1n[i] = base.scaled(ScalarOps<S>::from_long(4)).truncated(ord1);
    }
    for (int i = 0; i < 3; ++i)
        if (!jets_agree(u1n[i], u1t[i], ord1, tol))
            throw InconsistentData("first-order recovery: the two defect relations disagree");
    out.first = u1n;
    out.D = dtr;

    // second stage: expand around the candidate carrying the first table
    const int ord2 = T - 2;
    auto glow2 = detail::lower_from_inverse(h0, ord2);
    auto ctx1 = std::make_shared<const MetricContextT<S>>(
        metric_from_inverse_tables(h0, {out.first}, kf));
    DNSymbolT<S> d1 = factorize_dn(ctx1, nt.lambda, -1);
    NTSymbolT<S> ntr1{detail::rehost_boundary(nt.sigma, ctx1), nt.lambda, ctx1, -2};
    SymbolSeriesT<S> tdef1 = -nt_tangential_residual(ntr1, d1);
    SymbolSeriesT<S> ndef1 = -nt_normal_residual(ntr1, d1);

    auto p2 = detail::real_table(
        detail::odd_column_table(tdef1, -1, dirs, ord2, tol, "second-order tangential relation"),
        ord2, tol, "second-order tangential relation");
    Jet3T<S> dninc_t = detail::contract_lower(glow2, p2, ord2).scaled(ScalarOps<S>::from_long(-4));
    auto y2 = detail::real_table(
        detail::even_quadratic_table(ndef1, -1, dirs, ord2, tol, "second-order normal relation"),
        ord2, tol, "second-order normal relation");
    Jet3T<S> dninc = detail::contract_lower(glow2, y2, ord2).scaled(ScalarOps<S>::from_long(4));

    SymTableT<S> u2t, u2n;
    for (int i = 0; i < 3; ++i) {
        Jet3T<S> tshift = (dninc_t * h0[i]).scaled(ScalarOps<S>::from_long(2));
        u2t[i] = (p2[i].scaled(ScalarOps<S>::from_long(8)) + tshift).truncated(ord2);
        Jet3T<S> nshift = (dninc * h0[i]).scaled(ScalarOps<S>::from_long(2));
        u2n[i] = (y2[i].scaled(ScalarOps<S>::from_long(-8)) + nshift).truncated(ord2);
    }
    for (int i = 0; i < 3; ++i)
        if (!jets_agree(u2n[i], u2t[i], ord2, tol))
            throw InconsistentData("second-order recovery: the two defect relations disagree");

    for (int i = 0; i < 3; ++i) {
        static const int idx[3][2] = {{1, 1}, {1, 2}, {2, 2}};
        Jet3T<S> base = ctx1->ginv(idx[i][0], idx[i][1]).derivative(3).derivative(3).boundary();
        out.second[i] = (base + u2n[i]).truncated(ord2);
    }
    out.dnD =
        (mean_curvature_D(ctx1->metric()).derivative(3).boundary() + dninc).truncated(ord2);
    return out;
}

using RecoveredJet = RecoveredJetT<QuadRat>;
using FirstOrders = FirstOrdersT<QuadRat>;

}  // namespace bnt
