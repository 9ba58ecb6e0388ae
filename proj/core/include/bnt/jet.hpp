#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <utility>

#include "bnt/errors.hpp"
#include "bnt/scalar.hpp"

namespace bnt {

// Multi-index (a1, a2, an) in the three coordinates, with xn = x3 the
// normal direction.  Packed into one integer for use as a sparse-map key.
struct MIdx {
    int a1 = 0;
    int a2 = 0;
    int an = 0;

    int total() const { return a1 + a2 + an; }
    int operator[](int i) const { return i == 1 ? a1 : (i == 2 ? a2 : an); }

    std::uint32_t pack() const {
        return (static_cast<std::uint32_t>(a1) << 16) | (static_cast<std::uint32_t>(a2) << 8) |
               static_cast<std::uint32_t>(an);
    }
    static MIdx unpack(std::uint32_t key) {
        return MIdx{static_cast<int>((key >> 16) & 0xff), static_cast<int>((key >> 8) & 0xff),
                    static_cast<int>(key & 0xff)};
    }
    MIdx bumped(int i, int by) const {
        MIdx m = *this;
        (i == 1 ? m.a1 : (i == 2 ? m.a2 : m.an)) += by;
        return m;
    }
};

// Sentinel order for jets that are exact polynomials (no truncation applies).
inline constexpr int kInfOrder = 1 << 20;

// Truncated Taylor expansion in (x1, x2, xn) about 0: sparse coefficient map
// plus the order K through which the coefficients are trustworthy.  Mixed-K
// arithmetic truncates to the smaller order; the strict equal-K contract is
// exposed through jet_product below.
template <class S>
class Jet3T {
  public:
    using Ops = ScalarOps<S>;

    Jet3T() : k_(kInfOrder) {}
    explicit Jet3T(int k) : k_(k) {
        if (k < 0) throw ContractError("negative jet order");
    }

    static Jet3T constant(S value, int k = kInfOrder) {
        Jet3T j(k);
        j.set(MIdx{}, std::move(value));
        return j;
    }
    static Jet3T variable(int i, int k = kInfOrder) {
        Jet3T j(k);
        if (k >= 1) j.set(MIdx{}.bumped(i, 1), Ops::one());
        return j;
    }
    static Jet3T monomial(MIdx m, S value, int k = kInfOrder) {
        Jet3T j(k);
        if (m.total() <= k) j.set(m, std::move(value));
        return j;
    }

    int order() const { return k_; }
    bool is_zero() const { return c_.empty(); }
    const std::map<std::uint32_t, S>& coeffs() const { return c_; }

    S coeff(const MIdx& m) const {
        auto it = c_.find(m.pack());
        return it == c_.end() ? Ops::zero() : it->second;
    }
    S coeff(int a1, int a2, int an) const { return coeff(MIdx{a1, a2, an}); }
    S at0() const { return coeff(MIdx{}); }

    void set(const MIdx& m, S value) {
        if (m.total() > k_) throw ContractError("multi-index exceeds jet order");
        if (Ops::is_zero(value))
            c_.erase(m.pack());
        else
            c_[m.pack()] = std::move(value);
    }

    // Truncation can only lower the validity order.
    Jet3T truncated(int k) const {
        Jet3T out(std::min(k, k_));
        for (const auto& [key, val] : c_) {
            if (MIdx::unpack(key).total() <= out.k_) out.c_.emplace(key, val);
        }
        return out;
    }

    Jet3T operator-() const {
        Jet3T out(k_);
        for (const auto& [key, val] : c_) out.c_.emplace(key, -val);
        return out;
    }

    Jet3T& operator+=(const Jet3T& o) { return combine(o, false); }
    Jet3T& operator-=(const Jet3T& o) { return combine(o, true); }
    friend Jet3T operator+(Jet3T a, const Jet3T& b) { return a += b; }
    friend Jet3T operator-(Jet3T a, const Jet3T& b) { return a -= b; }

    friend Jet3T operator*(const Jet3T& a, const Jet3T& b) {
        Jet3T out(std::min(a.k_, b.k_));
        for (const auto& [ka, va] : a.c_) {
            MIdx ma = MIdx::unpack(ka);
            if (ma.total() > out.k_) continue;
            for (const auto& [kb, vb] : b.c_) {
                MIdx mb = MIdx::unpack(kb);
                MIdx m{ma.a1 + mb.a1, ma.a2 + mb.a2, ma.an + mb.an};
                if (m.total() > out.k_) continue;
                if (m.a1 > 0xff || m.a2 > 0xff || m.an > 0xff)
                    throw InternalError("jet multi-index component overflow");
                auto [it, fresh] = out.c_.try_emplace(m.pack(), Ops::zero());
                it->second += va * vb;
                if (Ops::is_zero(it->second)) out.c_.erase(it);
            }
        }
        return out;
    }
    Jet3T& operator*=(const Jet3T& o) { return *this = *this * o; }

    Jet3T scaled(const S& s) const {
        Jet3T out(k_);
        if (Ops::is_zero(s)) return out;
        for (const auto& [key, val] : c_) {
            S v = val * s;
            if (!Ops::is_zero(v)) out.c_.emplace(key, std::move(v));
        }
        return out;
    }

    // d/dx_i; drops the validity order by one.
    Jet3T derivative(int i) const {
        if (k_ == 0) throw OrderTooLow("cannot differentiate an order-0 jet");
        Jet3T out(k_ == kInfOrder ? kInfOrder : k_ - 1);
        for (const auto& [key, val] : c_) {
            MIdx m = MIdx::unpack(key);
            int a = m[i];
            if (a == 0) continue;
            out.set(m.bumped(i, -1), val * Ops::from_long(a));
        }
        return out;
    }

    // Restriction to the boundary xn = 0: keeps only an = 0 terms.
    Jet3T boundary() const {
        Jet3T out(k_);
        for (const auto& [key, val] : c_) {
            if (MIdx::unpack(key).an == 0) out.c_.emplace(key, val);
        }
        return out;
    }

    // Newton iteration for 1/a; needs a(0) != 0 and a finite order unless a
    // is a constant.
    Jet3T reciprocal() const {
        S a0 = at0();
        if (Ops::is_zero(a0)) throw SingularJet("reciprocal of jet with zero constant term");
        S r0 = Ops::one() / a0;
        if (c_.size() == 1 && c_.begin()->first == 0) return constant(r0, k_);
        if (k_ == kInfOrder) throw ContractError("reciprocal of an untruncated non-constant jet");
        Jet3T r = constant(std::move(r0), k_);
        Jet3T two = constant(Ops::from_long(2), k_);
        for (int correct = 0; correct < k_; correct = 2 * correct + 1) r = r * (two - *this * r);
        return r;
    }

    // h^{-1/2} for h with h(0) = 1, by Newton iteration y -> y(3 - h y^2)/2.
    // Float mode tolerates roundoff in the constant term; the iteration still
    // converges to full precision.
    Jet3T inv_sqrt1() const {
        bool unit_lead;
        if constexpr (Ops::exact)
            unit_lead = Ops::is_zero(at0() - Ops::one());
        else
            unit_lead = std::abs(Ops::to_double(at0()) - 1.0) < 1e-8;
        if (!unit_lead) throw ContractError("inv_sqrt1 requires constant term 1");
        if (k_ == kInfOrder) {
            if (c_.size() == 1) return constant(Ops::one(), k_);
            throw ContractError("inv_sqrt1 of an untruncated non-constant jet");
        }
        Jet3T y = constant(Ops::one(), k_);
        Jet3T three = constant(Ops::from_long(3), k_);
        S half = Ops::one() / Ops::from_long(2);
        for (int correct = 0; correct < k_; correct = 2 * correct + 1)
            y = (y * (three - *this * y * y)).scaled(half);
        return y;
    }
    Jet3T sqrt1() const { return (*this) * inv_sqrt1(); }

    // Value of the stored Taylor polynomial at a point.
    S eval(const S& x1, const S& x2, const S& xn) const {
        S total = Ops::zero();
        for (const auto& [key, val] : c_) {
            MIdx m = MIdx::unpack(key);
            S term = val;
            for (int i = 0; i < m.a1; ++i) term = term * x1;
            for (int i = 0; i < m.a2; ++i) term = term * x2;
            for (int i = 0; i < m.an; ++i) term = term * xn;
            total += term;
        }
        return total;
    }

  private:
    Jet3T& combine(const Jet3T& o, bool subtract) {
        int k = std::min(k_, o.k_);
        if (k < k_) *this = truncated(k);
        for (const auto& [key, val] : o.c_) {
            if (MIdx::unpack(key).total() > k) continue;
            auto [it, fresh] = c_.try_emplace(key, Ops::zero());
            if (subtract)
                it->second -= val;
            else
                it->second += val;
            if (Ops::is_zero(it->second)) c_.erase(it);
        }
        return *this;
    }

    std::map<std::uint32_t, S> c_;
    int k_;
};

// The strict product: both operands must carry the same truncation order.
template <class S>
Jet3T<S> jet_product(const Jet3T<S>& a, const Jet3T<S>& b) {
    if (a.order() != b.order()) throw OrderMismatch("jet_product operands have different orders");
    return a * b;
}

template <class S>
Jet3T<S> jet_reciprocal(const Jet3T<S>& a) {
    return a.reciprocal();
}

using Jet3 = Jet3T<QuadRat>;
using Jet3d = Jet3T<double>;

}  // namespace bnt
