#pragma once

#include <cmath>
#include <string>

#include "bnt/rational.hpp"

namespace bnt {

// Element of the quadratic extension Q(sqrt(d)): value = u + v*sqrt(d).
// Values with v == 0 are stored with d == 0 and combine with any extension;
// mixing two distinct nontrivial extensions is a contract error.  Perfect
// square discriminants collapse back to plain rationals on construction.
class QuadRat {
  public:
    QuadRat() : u_(0), v_(0), d_(0) {}
    QuadRat(long n) : u_(n), v_(0), d_(0) {}  // NOLINT: implicit by design
    explicit QuadRat(const Rational& u) : u_(u), v_(0), d_(0) {}
    QuadRat(Rational u, Rational v, Rational d) : u_(std::move(u)), v_(std::move(v)), d_(std::move(d)) {
        normalize();
    }

    const Rational& u() const { return u_; }
    const Rational& v() const { return v_; }
    const Rational& d() const { return d_; }

    bool is_zero() const { return sgn(u_) == 0 && sgn(v_) == 0; }
    bool is_rational() const { return sgn(v_) == 0; }

    const Rational& rat() const {
        if (!is_rational()) throw ContractError("quadratic scalar is not rational");
        return u_;
    }

    double to_double() const {
        double x = u_.get_d();
        if (sgn(v_) != 0) x += v_.get_d() * std::sqrt(d_.get_d());
        return x;
    }

    // Exact sign of u + v*sqrt(d).
    int sign() const {
        int su = sgn(u_);
        int sv = sgn(v_);
        if (sv == 0) return su;
        if (su == 0 || su == sv) return sv;
        // Opposite signs: compare u^2 against v^2 d; equality would mean d is
        // a perfect square, which normalization rules out.
        int c = cmp(u_ * u_, v_ * v_ * d_);
        if (c == 0) throw InternalError("unnormalized quadratic scalar");
        return c > 0 ? su : sv;
    }

    QuadRat operator-() const {
        QuadRat r;
        r.u_ = -u_;
        r.v_ = -v_;
        r.d_ = d_;
        return r;
    }

    QuadRat& operator+=(const QuadRat& o) {
        merge_d(o);
        u_ += o.u_;
        v_ += o.v_;
        if (sgn(v_) == 0) d_ = 0;
        return *this;
    }
    QuadRat& operator-=(const QuadRat& o) {
        merge_d(o);
        u_ -= o.u_;
        v_ -= o.v_;
        if (sgn(v_) == 0) d_ = 0;
        return *this;
    }
    QuadRat& operator*=(const QuadRat& o) {
        if (sgn(v_) == 0 && sgn(o.v_) == 0) {
            u_ *= o.u_;
            return *this;
        }
        merge_d(o);
        Rational nu = u_ * o.u_ + v_ * o.v_ * d_;
        Rational nv = u_ * o.v_ + v_ * o.u_;
        u_ = std::move(nu);
        v_ = std::move(nv);
        if (sgn(v_) == 0) d_ = 0;
        return *this;
    }
    QuadRat& operator/=(const QuadRat& o) {
        if (o.is_zero()) throw ContractError("division by zero scalar");
        if (sgn(o.v_) == 0) {
            u_ /= o.u_;
            if (sgn(v_) != 0) v_ /= o.u_;
            return *this;
        }
        merge_d(o);
        Rational norm = o.u_ * o.u_ - o.v_ * o.v_ * d_;
        if (sgn(norm) == 0) throw InternalError("non-square discriminant produced zero norm");
        QuadRat conj;
        conj.u_ = o.u_ / norm;
        conj.v_ = -o.v_ / norm;
        conj.d_ = d_;
        return (*this) *= conj;
    }

    friend QuadRat operator+(QuadRat a, const QuadRat& b) { return a += b; }
    friend QuadRat operator-(QuadRat a, const QuadRat& b) { return a -= b; }
    friend QuadRat operator*(QuadRat a, const QuadRat& b) { return a *= b; }
    friend QuadRat operator/(QuadRat a, const QuadRat& b) { return a /= b; }
    friend bool operator==(const QuadRat& a, const QuadRat& b) {
        return a.u_ == b.u_ && a.v_ == b.v_ && (sgn(a.v_) == 0 || a.d_ == b.d_);
    }
    friend bool operator!=(const QuadRat& a, const QuadRat& b) { return !(a == b); }

    // 1/sqrt(r) for a positive rational r, as sqrt(r)/r.
    static QuadRat inv_sqrt(const Rational& r) {
        if (sgn(r) <= 0) throw ContractError("inv_sqrt of non-positive rational");
        Rational root;
        if (rational_sqrt(r, root)) return QuadRat(1 / root);
        return QuadRat(Rational(0), 1 / r, r);
    }

  private:
    void normalize() {
        if (sgn(v_) == 0) {
            d_ = 0;
            return;
        }
        if (sgn(d_) <= 0) throw ContractError("quadratic scalar needs positive discriminant");
        Rational root;
        if (rational_sqrt(d_, root)) {
            u_ += v_ * root;
            v_ = 0;
            d_ = 0;
        }
    }
    void merge_d(const QuadRat& o) {
        if (sgn(o.v_) == 0) return;
        if (sgn(v_) == 0) {
            d_ = o.d_;
            return;
        }
        if (d_ != o.d_) throw ContractError("mixing distinct quadratic extensions");
    }

    Rational u_, v_, d_;
};

// Uniform scalar interface for the exact and floating point modes.
template <class S>
struct ScalarOps;

template <>
struct ScalarOps<QuadRat> {
    static QuadRat zero() { return QuadRat(); }
    static QuadRat one() { return QuadRat(1); }
    static QuadRat from_long(long n) { return QuadRat(Rational(n)); }
    static QuadRat from_rat(const Rational& q) { return QuadRat(q); }
    static bool is_zero(const QuadRat& x) { return x.is_zero(); }
    static int sign(const QuadRat& x) { return x.sign(); }
    static double to_double(const QuadRat& x) { return x.to_double(); }
    static QuadRat inv_sqrt(const QuadRat& x) { return QuadRat::inv_sqrt(x.rat()); }
    static constexpr bool exact = true;
};

template <>
struct ScalarOps<double> {
    static double zero() { return 0.0; }
    static double one() { return 1.0; }
    static double from_long(long n) { return static_cast<double>(n); }
    static double from_rat(const Rational& q) { return q.get_d(); }
    static bool is_zero(double x) { return x == 0.0; }
    static int sign(double x) { return (x > 0.0) - (x < 0.0); }
    static double to_double(double x) { return x; }
    static double inv_sqrt(double x) { return 1.0 / std::sqrt(x); }
    static constexpr bool exact = false;
};

// Complex pair over either scalar mode.
template <class S>
struct Cplx {
    S re{ScalarOps<S>::zero()};
    S im{ScalarOps<S>::zero()};

    Cplx() = default;
    explicit Cplx(S r) : re(std::move(r)) {}
    Cplx(S r, S i) : re(std::move(r)), im(std::move(i)) {}

    bool is_zero() const { return ScalarOps<S>::is_zero(re) && ScalarOps<S>::is_zero(im); }

    Cplx operator-() const { return Cplx(-re, -im); }
    Cplx& operator+=(const Cplx& o) {
        re += o.re;
        im += o.im;
        return *this;
    }
    Cplx& operator-=(const Cplx& o) {
        re -= o.re;
        im -= o.im;
        return *this;
    }
    friend Cplx operator+(Cplx a, const Cplx& b) { return a += b; }
    friend Cplx operator-(Cplx a, const Cplx& b) { return a -= b; }
    friend Cplx operator*(const Cplx& a, const Cplx& b) {
        return Cplx(a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re);
    }
    friend bool operator==(const Cplx& a, const Cplx& b) { return a.re == b.re && a.im == b.im; }
};

template <class S>
double cplx_abs(const Cplx<S>& z) {
    double r = ScalarOps<S>::to_double(z.re);
    double i = ScalarOps<S>::to_double(z.im);
    return std::hypot(r, i);
}

}  // namespace bnt
