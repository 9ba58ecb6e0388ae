#pragma once

#include "bnt/hodge_dn.hpp"

namespace bnt {

// Normal-to-tangential symbol: maps the scalar normal trace to the
// tangential covector components, order zero.  Orientation convention:
// eps^{12} = +1 with (x^1, x^2) positively oriented relative to the inward
// normal.  lambda = 0 selects the harmonic variant.
template <class S>
struct NTSymbolT {
    SymbolSeriesT<S> sigma;  // 2x1, top degree 0
    S lambda;
    std::shared_ptr<const MetricContextT<S>> ctx;
    int bottom;
};

namespace detail {

// (lambda/sqrt|g|) g_{a gamma} eps^{a b}, the rotation coupling the
// tangential components back into the x^3-derivative.
template <class S>
SymbolSeriesT<S> nt_rotation(const std::shared_ptr<const MetricContextT<S>>& ctx,
                             const S& lambda) {
    const MetricJetT<S>& m = ctx->metric();
    Jet3T<S> ls = m.inv_sqrt_det().scaled(lambda);
    SymbolSeriesT<S> rot(ctx, 2, 2);
    for (int gam = 1; gam <= 2; ++gam) {
        Jet3T<S> c1 = m.g(2, gam) * ls;
        Jet3T<S> c2 = m.g(1, gam) * ls;
        if (!c1.is_zero())
            rot.add_term(0, gam - 1, 0, XiMonomial{}, CJetT<S>(c1).scaled(-ScalarOps<S>::one()));
        if (!c2.is_zero()) rot.add_term(0, gam - 1, 1, XiMonomial{}, CJetT<S>(c2));
    }
    return rot;
}

template <class S>
SymbolSeriesT<S> i_xi_column(const std::shared_ptr<const MetricContextT<S>>& ctx) {
    SymbolSeriesT<S> s(ctx, 2, 1);
    CJetT<S> i = CJetT<S>::real_const(ScalarOps<S>::one()).times_i();
    s.add_term(1, 0, 0, XiMonomial{1, 0, 0}, i);
    s.add_term(1, 1, 0, XiMonomial{0, 1, 0}, i);
    return s;
}

}  // namespace detail

// Solves b^{tt} # sigma + b^{tn} = rot sigma + i xi degree by degree; the
// top degree forces sigma_0 = i xi / |xi| and every lower degree is affine
// in the unknown with factor |xi|.
template <class S>
NTSymbolT<S> nt_symbol(const DNSymbolT<S>& d, int bottom) {
    if (bottom > 0) throw ContractError("NT symbol top degree is zero");
    if (d.bottom > bottom + 1)
        throw ContractError("DN symbol too shallow for requested NT bottom degree");

    BlockSymbolT<S> blocks = dn_blocks(d);
    SymbolSeriesT<S> rot = detail::nt_rotation(d.ctx, d.lambda);
    SymbolSeriesT<S> ixi = detail::i_xi_column(d.ctx);

    SymbolSeriesT<S> sigma(d.ctx, 2, 1);
    for (int m = 0; m >= bottom; --m) {
        SymbolSeriesT<S> r = rot * sigma;
        r += ixi;
        r -= sym_compose(blocks.tt, sigma, m + 1);
        r -= blocks.tn;
        if (!r.has_degree(m + 1)) continue;
        sigma += r.part(m + 1).shifted(-1, ScalarOps<S>::one());
    }
    return NTSymbolT<S>{std::move(sigma), d.lambda, d.ctx, bottom};
}

template <class S>
NTSymbolT<S> nt_symbol(std::shared_ptr<const MetricContextT<S>> ctx, const S& lambda,
                       int bottom) {
    return nt_symbol(factorize_dn(std::move(ctx), lambda, bottom + 1), bottom);
}

namespace detail {

template <class S>
void check_compatible(const NTSymbolT<S>& nt, const DNSymbolT<S>& d, int need) {
    if (nt.ctx != d.ctx) throw ContractError("NT and DN symbols built over different metrics");
    if (!ScalarOps<S>::is_zero(nt.lambda - d.lambda))
        throw ContractError("NT and DN symbols built at different frequencies");
    if (d.bottom > need) throw ContractError("DN symbol too shallow for residual check");
}

}  // namespace detail

// Tangential relation recomputed from the finished symbol; structurally
// zero by construction, kept as a bookkeeping check.  Coefficients capped
// as in dn_residual.
template <class S>
SymbolSeriesT<S> nt_tangential_residual(const NTSymbolT<S>& nt, const DNSymbolT<S>& d) {
    detail::check_compatible(nt, d, nt.bottom + 1);
    const int cap = d.ctx->metric().order() - 1 + nt.bottom;
    BlockSymbolT<S> blocks = dn_blocks(d);
    SymbolSeriesT<S> res = sym_compose(blocks.tt, nt.sigma, nt.bottom + 1).coeff_truncated(cap);
    res += blocks.tn.coeff_truncated(cap);
    res -= (detail::nt_rotation(d.ctx, d.lambda) * nt.sigma).coeff_truncated(cap);
    res -= detail::i_xi_column(d.ctx);
    return res.truncated_below(nt.bottom + 1);
}

// Normal relation residual: b^{nt} # sigma + b^{nn} minus the first-order
// tangential operator acting on sigma.  The tangential operator raises the
// degree by one, so closing degree m consumes sigma_{m-1}; the residual is
// reliable for degrees >= bottom + 1 and structurally zero there for a
// correct symbol.  Nonzero output is a reported value, not an error.
template <class S>
SymbolSeriesT<S> nt_normal_residual(const NTSymbolT<S>& nt, const DNSymbolT<S>& d) {
    const int win = nt.bottom + 1;
    detail::check_compatible(nt, d, win);
    const auto& ctx = d.ctx;
    const MetricJetT<S>& m = ctx->metric();
    const int cap = m.order() - 1 + nt.bottom;
    BlockSymbolT<S> blocks = dn_blocks(d);

    SymbolSeriesT<S> res = sym_compose(blocks.nt, nt.sigma, win).coeff_truncated(cap);
    res += blocks.nn.coeff_truncated(cap);

    if (!ScalarOps<S>::is_zero(nt.lambda)) {
        Jet3T<S> s = m.inv_sqrt_det();
        Jet3T<S> s2 = s * s;

        // A^b = s eps^{dg} eps^{ab} d_d (s g_{ag}), multiplication operator.
        SymbolSeriesT<S> a(ctx, 1, 2);
        Jet3T<S> a1 = ((s * m.g(2, 2)).derivative(1) - (s * m.g(2, 1)).derivative(2)) * s;
        Jet3T<S> a2 = ((s * m.g(1, 2)).derivative(1) - (s * m.g(1, 1)).derivative(2)) * s;
        if (!a1.is_zero()) a.add_term(0, 0, 0, XiMonomial{}, CJetT<S>(a1).scaled(-ScalarOps<S>::one()));
        if (!a2.is_zero()) a.add_term(0, 0, 1, XiMonomial{}, CJetT<S>(a2));

        // C(i xi)^b = (i/|g|) eps^{dg} g_{ag} eps^{ab} xi_d.
        SymbolSeriesT<S> c(ctx, 1, 2);
        c.add_term(1, 0, 0, XiMonomial{1, 0, 0}, CJetT<S>(s2 * m.g(2, 2)).scaled(-ScalarOps<S>::one()).times_i());
        c.add_term(1, 0, 0, XiMonomial{0, 1, 0}, CJetT<S>(s2 * m.g(2, 1)).times_i());
        c.add_term(1, 0, 1, XiMonomial{1, 0, 0}, CJetT<S>(s2 * m.g(1, 2)).times_i());
        c.add_term(1, 0, 1, XiMonomial{0, 1, 0}, CJetT<S>(s2 * m.g(1, 1)).scaled(-ScalarOps<S>::one()).times_i());

        // (1/lambda) d_3(s) eps^{ag} xi_a, with d_3(s) taken from jets.
        Jet3T<S> ds = s.derivative(3).scaled(ScalarOps<S>::one() / nt.lambda);
        SymbolSeriesT<S> t(ctx, 1, 2);
        if (!ds.is_zero()) {
            t.add_term(1, 0, 0, XiMonomial{0, 1, 0}, CJetT<S>(ds).scaled(-ScalarOps<S>::one()).times_i());
            t.add_term(1, 0, 1, XiMonomial{1, 0, 0}, CJetT<S>(ds).times_i());
        }

        res -= (a * nt.sigma).coeff_truncated(cap);
        res -= sym_compose(c, nt.sigma, win).coeff_truncated(cap);
        res -= sym_compose(t, nt.sigma, win).coeff_truncated(cap);
    } else {
        // Harmonic variant from the coderivative: b^{nt}#sigma + b^{nn}
        // equals the mean curvature minus s d_a (h^{ab} sigma_b) with
        // h^{ab} = sqrt|g| g^{ab}.
        Jet3T<S> sd = m.sqrt_det();
        SymbolSeriesT<S> bsym(ctx, 1, 2);
        for (int be = 1; be <= 2; ++be) {
            Jet3T<S> h1 = sd * ctx->ginv(1, be);
            Jet3T<S> h2 = sd * ctx->ginv(2, be);
            bsym.add_term(1, 0, be - 1, XiMonomial{1, 0, 0}, CJetT<S>(h1).times_i());
            bsym.add_term(1, 0, be - 1, XiMonomial{0, 1, 0}, CJetT<S>(h2).times_i());
            Jet3T<S> dh = h1.derivative(1) + h2.derivative(2);
            if (!dh.is_zero()) bsym.add_term(0, 0, be - 1, XiMonomial{}, CJetT<S>(dh));
        }
        SymbolSeriesT<S> sser(ctx, 1, 1);
        sser.add_term(0, 0, 0, XiMonomial{}, CJetT<S>(m.inv_sqrt_det()));
        SymbolSeriesT<S> dser(ctx, 1, 1);
        Jet3T<S> dcurv = ctx->geo().D();
        if (!dcurv.is_zero()) dser.add_term(0, 0, 0, XiMonomial{}, CJetT<S>(dcurv));

        res -= dser.coeff_truncated(cap);
        res += (sser * sym_compose(bsym, nt.sigma, win)).coeff_truncated(cap);
    }
    return res.truncated_below(win);
}

using NTSymbol = NTSymbolT<QuadRat>;

}  // namespace bnt
