#pragma once

#include "bnt/symbols.hpp"

namespace bnt {

// Symbols of the operators appearing in the normal factorization of the
// Hodge Laplacian on 1-forms: the first-order coefficient E and the
// tangential operators of degrees 2, 1, 0.  Row index is the output
// component, column index the input component; index 3 is normal.
template <class S>
struct OperatorSymbolsT {
    SymbolSeriesT<S> E, q2, q1, q0;
};

// Total symbol of the Dirichlet-to-Neumann map on 1-forms, computed down to
// `bottom`.  Degrees below `bottom` are not represented.
template <class S>
struct DNSymbolT {
    SymbolSeriesT<S> b;
    S lambda;
    std::shared_ptr<const MetricContextT<S>> ctx;
    int bottom;
};

template <class S>
OperatorSymbolsT<S> build_operator_symbols(std::shared_ptr<const MetricContextT<S>> ctx,
                                           const S& lambda) {
    const MetricJetT<S>& m = ctx->metric();
    if (m.order() < 3) throw OrderTooLow("operator symbols need a metric jet of order >= 3");
    const GeometryCacheT<S>& geo = ctx->geo();
    const S one = ScalarOps<S>::one();
    const S two = ScalarOps<S>::from_long(2);

    OperatorSymbolsT<S> ops{SymbolSeriesT<S>(ctx, 3, 3), SymbolSeriesT<S>(ctx, 3, 3),
                            SymbolSeriesT<S>(ctx, 3, 3), SymbolSeriesT<S>(ctx, 3, 3)};

    for (int r = 0; r < 3; ++r)
        ops.q2.add_term(2, r, r, XiMonomial{0, 0, 2}, CJetT<S>::real_const(one));

    // Tangential trace of the Christoffel symbols, one jet per upper index.
    std::array<Jet3T<S>, 3> gtrace;
    for (int k = 1; k <= 3; ++k) {
        Jet3T<S> sum(m.order() - 1);
        for (int a = 1; a <= 2; ++a)
            for (int b = 1; b <= 2; ++b) sum += m.g_inv(a, b) * geo.gamma(k, a, b);
        gtrace[k - 1] = sum;
    }

    XiMonomial xi[2] = {XiMonomial{1, 0, 0}, XiMonomial{0, 1, 0}};
    for (int lam = 1; lam <= 3; ++lam) {
        for (int p = 1; p <= 3; ++p) {
            Jet3T<S> e = geo.gamma(p, 3, lam).scaled(two);
            if (p == lam) e += geo.D();
            if (!e.is_zero()) ops.E.add_term(0, lam - 1, p - 1, XiMonomial{}, CJetT<S>(e));

            for (int beta = 1; beta <= 2; ++beta) {
                Jet3T<S> c(m.order() - 1);
                for (int alpha = 1; alpha <= 2; ++alpha)
                    c += m.g_inv(alpha, beta) * geo.gamma(p, alpha, lam);
                c = c.scaled(two);
                if (p == lam) c += gtrace[beta - 1];
                if (!c.is_zero())
                    ops.q1.add_term(1, lam - 1, p - 1, xi[beta - 1], CJetT<S>(c).times_i());
            }

            Jet3T<S> c0 = geo.gamma(p, 3, lam).derivative(3) + geo.ricci(p, lam);
            for (int a = 1; a <= 2; ++a)
                for (int b = 1; b <= 2; ++b)
                    c0 += m.g_inv(a, b) * geo.gamma(p, b, lam).derivative(a);
            for (int i = 1; i <= 3; ++i)
                for (int j = 1; j <= 3; ++j) {
                    Jet3T<S> inner(m.order() - 2);
                    for (int q = 1; q <= 3; ++q)
                        inner += geo.gamma(q, i, lam) * geo.gamma(p, j, q) +
                                 geo.gamma(q, i, j) * geo.gamma(p, q, lam);
                    c0 -= m.g_inv(i, j) * inner;
                }
            if (p == lam) c0 -= Jet3T<S>::constant(lambda * lambda);
            if (!c0.is_zero()) ops.q0.add_term(0, lam - 1, p - 1, XiMonomial{}, CJetT<S>(c0));
        }
    }
    return ops;
}

template <class S>
OperatorSymbolsT<S> build_operator_symbols(const MetricJetT<S>& m, const S& lambda) {
    return build_operator_symbols(std::make_shared<const MetricContextT<S>>(m), lambda);
}

// Solves d_n b - E b + b # b = q2 + q1 + q0 degree by degree.  The top
// degree is the exact square root of q2; each lower degree is affine in the
// unknown with invertible factor 2|xi|.
template <class S>
DNSymbolT<S> factorize_dn(std::shared_ptr<const MetricContextT<S>> ctx, const S& lambda,
                          int bottom) {
    const int k = ctx->metric().order();
    if (bottom > 1) throw ContractError("symbol bottom degree may not exceed 1");
    if (bottom < 3 - k) throw OrderTooLow("jet budget exhausted for requested bottom degree");

    OperatorSymbolsT<S> ops = build_operator_symbols(ctx, lambda);
    SymbolSeriesT<S> q = ops.q2;
    q += ops.q1;
    q += ops.q0;

    const S half = ScalarOps<S>::one() / ScalarOps<S>::from_long(2);
    SymbolSeriesT<S> b(ctx, 3, 3);
    for (int r = 0; r < 3; ++r)
        b.add_term(1, r, r, XiMonomial{0, 0, 1}, CJetT<S>::real_const(ScalarOps<S>::one()));

    for (int m = 0; m >= bottom; --m) {
        SymbolSeriesT<S> rhs = q;
        rhs -= sym_dx(b, 3);
        rhs += ops.E * b;
        rhs -= sym_compose(b, b, m + 1);
        if (!rhs.has_degree(m + 1)) continue;
        b += rhs.part(m + 1).shifted(-1, half);
    }
    return DNSymbolT<S>{std::move(b), lambda, std::move(ctx), bottom};
}

template <class S>
DNSymbolT<S> factorize_dn(const MetricJetT<S>& m, const S& lambda, int bottom) {
    return factorize_dn(std::make_shared<const MetricContextT<S>>(m), lambda, bottom);
}

template <class S>
BlockSymbolT<S> dn_blocks(const DNSymbolT<S>& d) {
    return split_blocks(d.b);
}

// Left-hand side minus right-hand side of the factorization identity,
// reliable down to degree bottom+1; structurally zero for a correct symbol.
// The deepest coefficients of b are only valid to jet order K-1+bottom, so
// every piece is capped there before combining; otherwise exact in-series
// cancellations leave unmatched tails above that order.
template <class S>
SymbolSeriesT<S> dn_residual(const DNSymbolT<S>& d) {
    OperatorSymbolsT<S> ops = build_operator_symbols(d.ctx, d.lambda);
    const int cap = d.ctx->metric().order() - 1 + d.bottom;
    SymbolSeriesT<S> res = sym_dx(d.b, 3).coeff_truncated(cap);
    res -= (ops.E * d.b).coeff_truncated(cap);
    res += sym_compose(d.b, d.b, d.bottom + 1).coeff_truncated(cap);
    res -= ops.q2.coeff_truncated(cap);
    res -= ops.q1.coeff_truncated(cap);
    res -= ops.q0.coeff_truncated(cap);
    return res;
}

using OperatorSymbols = OperatorSymbolsT<QuadRat>;
using DNSymbol = DNSymbolT<QuadRat>;

}  // namespace bnt
