#pragma once

#include <array>
#include <optional>

#include "bnt/jet.hpp"

namespace bnt {

// Largest |coefficient| of a jet through the given total order, in doubles.
template <class S>
double jet_max_abs(const Jet3T<S>& a, int through_order) {
    double m = 0.0;
    for (const auto& [key, val] : a.coeffs()) {
        if (MIdx::unpack(key).total() > through_order) continue;
        double v = std::abs(ScalarOps<S>::to_double(val));
        if (v > m) m = v;
    }
    return m;
}

// Equality of two jets through the given order; exact mode compares
// coefficients exactly, float mode up to a relative tolerance.
template <class S>
bool jets_agree(const Jet3T<S>& a, const Jet3T<S>& b, int through_order, double rel_tol = 1e-12) {
    Jet3T<S> diff = a - b;
    if constexpr (ScalarOps<S>::exact) {
        return jet_max_abs(diff, through_order) == 0.0;
    } else {
        double scale = std::max({1.0, jet_max_abs(a, through_order), jet_max_abs(b, through_order)});
        return jet_max_abs(diff, through_order) <= rel_tol * scale;
    }
}

// Riemannian metric jet in boundary normal coordinates: g_nn = 1 and
// g_an = 0 identically, so only the tangential block carries data.  Indices
// run 1..3 with 3 the normal direction.
template <class S>
class MetricJetT {
  public:
    MetricJetT(const Jet3T<S>& g11, const Jet3T<S>& g12, const Jet3T<S>& g22, int k) : k_(k) {
        if (k < 1) throw ContractError("metric jet order must be at least 1");
        if (g11.order() < k || g12.order() < k || g22.order() < k)
            throw OrderTooLow("metric entries carry fewer orders than requested");
        g_[0][0] = g11.truncated(k);
        g_[0][1] = g_[1][0] = g12.truncated(k);
        g_[1][1] = g22.truncated(k);
        g_[2][2] = Jet3T<S>::constant(ScalarOps<S>::one());
        g_[0][2] = g_[2][0] = g_[1][2] = g_[2][1] = Jet3T<S>(k);
        finish();
    }

    // Full 3x3 input; rejects anything outside the normal gauge.
    static MetricJetT from_full(const std::array<std::array<Jet3T<S>, 3>, 3>& g, int k) {
        Jet3T<S> one = Jet3T<S>::constant(ScalarOps<S>::one());
        if (!jets_agree(g[2][2], one, k)) throw ContractError("metric jet violates g_nn = 1");
        for (int a = 0; a < 2; ++a) {
            if (!g[a][2].truncated(k).is_zero() || !g[2][a].truncated(k).is_zero())
                throw ContractError("metric jet violates g_an = 0");
        }
        if (!jets_agree(g[0][1], g[1][0], k)) throw ContractError("metric jet is not symmetric");
        return MetricJetT(g[0][0], g[0][1], g[1][1], k);
    }

    int order() const { return k_; }

    // Indices 1..3.
    const Jet3T<S>& g(int i, int j) const { return g_[i - 1][j - 1]; }
    const Jet3T<S>& g_inv(int i, int j) const { return ginv_[i - 1][j - 1]; }
    const Jet3T<S>& det() const { return det_; }
    const S& det0() const { return det0_; }

    // 1/sqrt(|g|) as a jet.  The constant factor is irrational in general;
    // in exact mode it lands in the quadratic extension by sqrt(|g|(0)).
    const Jet3T<S>& inv_sqrt_det() const { return inv_sqrt_det_; }
    Jet3T<S> sqrt_det() const { return det_ * inv_sqrt_det_; }

  private:
    void finish() {
        det_ = g_[0][0] * g_[1][1] - g_[0][1] * g_[0][1];
        det0_ = det_.at0();
        if (ScalarOps<S>::sign(g_[0][0].at0()) <= 0 || ScalarOps<S>::sign(det0_) <= 0)
            throw ContractError("tangential metric block is not positive definite at 0");
        Jet3T<S> inv_det = det_.reciprocal();
        ginv_[0][0] = g_[1][1] * inv_det;
        ginv_[1][1] = g_[0][0] * inv_det;
        ginv_[0][1] = ginv_[1][0] = -(g_[0][1] * inv_det);
        ginv_[2][2] = Jet3T<S>::constant(ScalarOps<S>::one());
        ginv_[0][2] = ginv_[2][0] = ginv_[1][2] = ginv_[2][1] = Jet3T<S>(k_);
        S c = ScalarOps<S>::inv_sqrt(det0_);
        Jet3T<S> h = det_.scaled(ScalarOps<S>::one() / det0_);
        inv_sqrt_det_ = h.inv_sqrt1().scaled(c);
    }

    int k_;
    std::array<std::array<Jet3T<S>, 3>, 3> g_, ginv_;
    Jet3T<S> det_, inv_sqrt_det_;
    S det0_{ScalarOps<S>::zero()};
};

// Christoffel symbols, Ricci curvature, and the normal-derivative scalar D
// of a metric jet.  D is computed five independent ways and the results are
// required to coincide; a mismatch means broken arithmetic, not bad input.
template <class S>
class GeometryCacheT {
  public:
    explicit GeometryCacheT(const MetricJetT<S>& m) : m_(m) {
        compute_gamma();
        compute_D();
        if (m.order() >= 2) compute_ricci();
    }

    const MetricJetT<S>& metric() const { return m_; }

    // Gamma^k_{ij}, order K-1; indices 1..3.
    const Jet3T<S>& gamma(int k, int i, int j) const { return gamma_[k - 1][i - 1][j - 1]; }

    // Ric^i_j, order K-2.
    const Jet3T<S>& ricci(int i, int j) const {
        if (!ric_) throw OrderTooLow("ricci needs a metric jet of order >= 2");
        return (*ric_)[i - 1][j - 1];
    }

    const Jet3T<S>& D() const { return D_; }

  private:
    void compute_gamma() {
        const MetricJetT<S>& m = m_;
        std::array<std::array<std::array<Jet3T<S>, 3>, 3>, 3> dg;
        for (int i = 1; i <= 3; ++i)
            for (int j = 1; j <= 3; ++j)
                for (int l = 1; l <= 3; ++l) dg[i - 1][j - 1][l - 1] = m.g(j, l).derivative(i);
        S half = ScalarOps<S>::one() / ScalarOps<S>::from_long(2);
        for (int k = 1; k <= 3; ++k)
            for (int i = 1; i <= 3; ++i)
                for (int j = i; j <= 3; ++j) {
                    Jet3T<S> sum(m.order() - 1);
                    for (int l = 1; l <= 3; ++l) {
                        Jet3T<S> bracket =
                            dg[i - 1][j - 1][l - 1] + dg[j - 1][i - 1][l - 1] - dg[l - 1][i - 1][j - 1];
                        sum += m.g_inv(k, l) * bracket;
                    }
                    gamma_[k - 1][i - 1][j - 1] = sum.scaled(half);
                    gamma_[k - 1][j - 1][i - 1] = gamma_[k - 1][i - 1][j - 1];
                }
    }

    void compute_D() {
        const MetricJetT<S>& m = m_;
        int ord = m.order() - 1;
        S half = ScalarOps<S>::one() / ScalarOps<S>::from_long(2);

        std::array<Jet3T<S>, 5> cand;
        for (auto& c : cand) c = Jet3T<S>(ord);
        for (int a = 1; a <= 2; ++a)
            for (int b = 1; b <= 2; ++b) {
                cand[0] += m.g_inv(a, b) * gamma(3, a, b);
                cand[2] -= (m.g_inv(a, b) * m.g(a, b).derivative(3)).scaled(half);
                cand[3] += (m.g(a, b) * m.g_inv(a, b).derivative(3)).scaled(half);
            }
        for (int a = 1; a <= 2; ++a) cand[1] -= gamma(a, 3, a);
        // -(1/sqrt|g|) d_n sqrt|g|; the constant factor sqrt(|g|(0)) cancels,
        // so this stays inside rational arithmetic.
        Jet3T<S> h = m.det().scaled(ScalarOps<S>::one() / m.det0());
        cand[4] = -(h.inv_sqrt1() * h.sqrt1().derivative(3));

        for (int i = 1; i < 5; ++i) {
            if (!jets_agree(cand[0], cand[i], ord))
                throw InternalError("mean curvature expressions disagree");
        }
        D_ = cand[0];
    }

    void compute_ricci() {
        const MetricJetT<S>& m = m_;
        int ord = m.order() - 2;
        ric_.emplace();
        for (int i = 1; i <= 3; ++i)
            for (int l = 1; l <= 3; ++l) {
                Jet3T<S> sum(ord);
                for (int j = 1; j <= 3; ++j) {
                    Jet3T<S> low(ord);
                    for (int k = 1; k <= 3; ++k) {
                        low += gamma(k, l, j).derivative(k) - gamma(k, k, j).derivative(l);
                        for (int p = 1; p <= 3; ++p)
                            low += gamma(k, k, p) * gamma(p, l, j) - gamma(k, l, p) * gamma(p, k, j);
                    }
                    sum += m.g_inv(i, j) * low;
                }
                (*ric_)[i - 1][l - 1] = sum;
            }
    }

    MetricJetT<S> m_;
    std::array<std::array<std::array<Jet3T<S>, 3>, 3>, 3> gamma_;
    std::optional<std::array<std::array<Jet3T<S>, 3>, 3>> ric_;
    Jet3T<S> D_;
};

template <class S>
GeometryCacheT<S> christoffel(const MetricJetT<S>& m) {
    return GeometryCacheT<S>(m);
}

template <class S>
GeometryCacheT<S> ricci(const MetricJetT<S>& m) {
    if (m.order() < 2) throw OrderTooLow("ricci needs a metric jet of order >= 2");
    return GeometryCacheT<S>(m);
}

template <class S>
Jet3T<S> mean_curvature_D(const MetricJetT<S>& m) {
    return GeometryCacheT<S>(m).D();
}

using MetricJet = MetricJetT<QuadRat>;
using GeometryCache = GeometryCacheT<QuadRat>;

}  // namespace bnt
