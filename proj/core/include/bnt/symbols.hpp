#pragma once

#include <climits>
#include <complex>
#include <iterator>
#include <memory>
#include <vector>

#include "bnt/metric.hpp"

namespace bnt {

// Complex-valued jet as a pair of real jets; the exact mode stays free of
// floating complex arithmetic this way.
template <class S>
struct CJetT {
    Jet3T<S> re, im;

    CJetT() = default;
    explicit CJetT(Jet3T<S> r) : re(std::move(r)) {}
    CJetT(Jet3T<S> r, Jet3T<S> i) : re(std::move(r)), im(std::move(i)) {}

    static CJetT real_const(S v) { return CJetT(Jet3T<S>::constant(std::move(v))); }

    bool is_zero() const { return re.is_zero() && im.is_zero(); }

    CJetT operator-() const { return CJetT(-re, -im); }
    CJetT& operator+=(const CJetT& o) {
        re += o.re;
        im += o.im;
        return *this;
    }
    CJetT& operator-=(const CJetT& o) {
        re -= o.re;
        im -= o.im;
        return *this;
    }
    friend CJetT operator+(CJetT a, const CJetT& b) { return a += b; }
    friend CJetT operator-(CJetT a, const CJetT& b) { return a -= b; }
    friend CJetT operator*(const CJetT& a, const CJetT& b) {
        return CJetT(a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re);
    }
    CJetT operator*(const Jet3T<S>& j) const { return CJetT(re * j, im * j); }

    CJetT scaled(const S& s) const { return CJetT(re.scaled(s), im.scaled(s)); }
    CJetT scaled(const Cplx<S>& z) const {
        return CJetT(re.scaled(z.re) - im.scaled(z.im), re.scaled(z.im) + im.scaled(z.re));
    }
    CJetT times_i() const { return CJetT(-im, re); }

    CJetT derivative(int i) const { return CJetT(re.derivative(i), im.derivative(i)); }
    CJetT boundary() const { return CJetT(re.boundary(), im.boundary()); }
    CJetT truncated(int k) const { return CJetT(re.truncated(k), im.truncated(k)); }

    Cplx<S> at0() const { return Cplx<S>(re.at0(), im.at0()); }
    Cplx<S> eval(const S& x1, const S& x2, const S& xn) const {
        return Cplx<S>(re.eval(x1, x2, xn), im.eval(x1, x2, xn));
    }
    std::complex<double> eval_d(double x1, double x2, double xn) const {
        auto num = [&](const Jet3T<S>& j) {
            double total = 0;
            for (const auto& [key, val] : j.coeffs()) {
                MIdx m = MIdx::unpack(key);
                double term = ScalarOps<S>::to_double(val);
                for (int i = 0; i < m.a1; ++i) term *= x1;
                for (int i = 0; i < m.a2; ++i) term *= x2;
                for (int i = 0; i < m.an; ++i) term *= xn;
                total += term;
            }
            return total;
        };
        return {num(re), num(im)};
    }
};

// xi_1^a xi_2^b |xi|^p with |xi| the metric length of the covector.
struct XiMonomial {
    int a = 0;
    int b = 0;
    int p = 0;

    int degree() const { return a + b + p; }

    std::int32_t pack() const {
        if (a < 0 || a > 0xff || b < 0 || b > 0xff || p < -128 || p > 127)
            throw InternalError("xi monomial exponent out of range");
        return (a << 16) | (b << 8) | (p + 128);
    }
    static XiMonomial unpack(std::int32_t key) {
        return XiMonomial{(key >> 16) & 0xff, (key >> 8) & 0xff, (key & 0xff) - 128};
    }
};

// Shared geometric data for all symbols over one metric jet.
template <class S>
class MetricContextT {
  public:
    explicit MetricContextT(MetricJetT<S> m) : metric_(std::move(m)), geo_(metric_) {
        for (int i = 1; i <= 3; ++i)
            for (int a = 1; a <= 2; ++a)
                for (int b = 1; b <= 2; ++b)
                    dginv_[i - 1][a - 1][b - 1] = metric_.g_inv(a, b).derivative(i);
    }

    const MetricJetT<S>& metric() const { return metric_; }
    const GeometryCacheT<S>& geo() const { return geo_; }
    const Jet3T<S>& ginv(int a, int b) const { return metric_.g_inv(a, b); }
    const Jet3T<S>& dginv(int i, int a, int b) const { return dginv_[i - 1][a - 1][b - 1]; }

    // |xi|^2 at a fixed rational covector, as a jet in x.
    Jet3T<S> q_jet(const Rational& xi1, const Rational& xi2) const {
        auto s = [&](const Rational& q) { return ScalarOps<S>::from_rat(q); };
        Jet3T<S> q = ginv(1, 1).scaled(s(xi1 * xi1));
        q += ginv(1, 2).scaled(s(2 * xi1 * xi2));
        q += ginv(2, 2).scaled(s(xi2 * xi2));
        return q;
    }

    double q_at(const double x[3], double xi1, double xi2) const {
        auto ev = [&](const Jet3T<S>& j) { return CJetT<S>(j).eval_d(x[0], x[1], x[2]).real(); };
        return ev(ginv(1, 1)) * xi1 * xi1 + 2 * ev(ginv(1, 2)) * xi1 * xi2 +
               ev(ginv(2, 2)) * xi2 * xi2;
    }

  private:
    MetricJetT<S> metric_;
    GeometryCacheT<S> geo_;
    std::array<std::array<std::array<Jet3T<S>, 2>, 2>, 3> dginv_;
};

// Dense complex matrix, for numeric symbol evaluation.
struct CMat {
    int rows = 0, cols = 0;
    std::vector<std::complex<double>> v;

    CMat() = default;
    CMat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c) {}
    std::complex<double>& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    const std::complex<double>& at(int r, int c) const {
        return v[static_cast<size_t>(r) * cols + c];
    }
};

// Exact partial evaluation at a fixed covector: the value is A + B*sqrt(q)
// with q = |xi|^2_g as a jet in x.  The split by |xi|-parity is canonical:
// it does not depend on how powers of |xi|^2 were rewritten via the metric.
template <class S>
struct EvalABT {
    CJetT<S> A, B;
};

// Matrix-valued graded symbol: per homogeneity degree, a matrix of finite
// sums of (complex jet coefficient) x (xi monomial).  `bottom` is the lowest
// degree the series is reliable at; an `entire` series has no unknown tail,
// degrees outside the stored range are genuinely zero.
template <class S>
class SymbolSeriesT {
  public:
    using Ctx = std::shared_ptr<const MetricContextT<S>>;
    using TermMap = std::map<std::int32_t, CJetT<S>>;
    using Mat = std::vector<TermMap>;

    static constexpr int kNegInf = INT_MIN / 4;

    SymbolSeriesT(Ctx ctx, int rows, int cols)
        : ctx_(std::move(ctx)), rows_(rows), cols_(cols), bottom_(kNegInf), entire_(true) {
        if (!ctx_) throw ContractError("symbol needs a metric context");
        if (rows < 1 || rows > 3 || cols < 1 || cols > 3)
            throw ShapeMismatch("symbol shape out of range");
    }

    static SymbolSeriesT identity(Ctx ctx, int n = 3) {
        SymbolSeriesT s(std::move(ctx), n, n);
        for (int r = 0; r < n; ++r)
            s.add_term(0, r, r, XiMonomial{}, CJetT<S>::real_const(ScalarOps<S>::one()));
        return s;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    const Ctx& ctx() const { return ctx_; }
    bool entire() const { return entire_; }

    // Lowest reliable degree; kNegInf when the series is entire.
    int floor_degree() const { return entire_ ? kNegInf : bottom_; }
    int top_degree() const { return parts_.empty() ? kNegInf : parts_.rbegin()->first; }
    int bottom_degree() const {
        if (!entire_) return bottom_;
        return parts_.empty() ? 0 : parts_.begin()->first;
    }
    bool has_degree(int m) const { return parts_.count(m) != 0; }
    std::vector<int> degrees() const {
        std::vector<int> d;
        for (const auto& [m, mat] : parts_) d.push_back(m);
        return d;
    }
    bool empty() const { return parts_.empty(); }

    void require_floor(int need) const {
        if (floor_degree() > need) throw ContractError("symbol series not reliable that deep");
    }

    void add_term(int m, int r, int c, const XiMonomial& mono, const CJetT<S>& coeff) {
        if (mono.degree() != m) throw InternalError("monomial degree does not match slot");
        if (r < 0 || r >= rows_ || c < 0 || c >= cols_) throw ShapeMismatch("entry out of shape");
        if (coeff.is_zero()) return;
        if (!entire_ && m < bottom_) return;
        Mat& mat = slot(m);
        auto [it, fresh] = mat[idx(r, c)].try_emplace(mono.pack());
        it->second += coeff;
        if (it->second.is_zero()) mat[idx(r, c)].erase(it);
    }

    const TermMap& entry(int m, int r, int c) const {
        static const TermMap kEmpty;
        auto it = parts_.find(m);
        if (it == parts_.end()) return kEmpty;
        return it->second[idx(r, c)];
    }

    // Single homogeneous part, as an exact standalone symbol.
    SymbolSeriesT part(int m) const {
        require_floor(m);
        SymbolSeriesT out(ctx_, rows_, cols_);
        auto it = parts_.find(m);
        if (it != parts_.end()) out.parts_.emplace(m, it->second);
        out.prune();
        return out;
    }

    SymbolSeriesT truncated_below(int bottom) const {
        SymbolSeriesT out(ctx_, rows_, cols_);
        bool nothing_cut = entire_ && (parts_.empty() || parts_.begin()->first >= bottom);
        out.entire_ = nothing_cut;
        out.bottom_ = nothing_cut ? kNegInf : std::max(bottom, floor_degree());
        for (const auto& [m, mat] : parts_) {
            if (m >= bottom) out.parts_.emplace(m, mat);
        }
        return out;
    }

    // Caps every coefficient at jet order k.  Needed when combining series
    // whose coefficients are valid to different orders: a sparse sum cannot
    // see that an absent monomial stands for a low-order zero.
    SymbolSeriesT coeff_truncated(int k) const {
        SymbolSeriesT out(ctx_, rows_, cols_);
        out.entire_ = entire_;
        out.bottom_ = bottom_;
        for (const auto& [m, mat] : parts_) {
            Mat tm(mat.size());
            for (size_t e = 0; e < mat.size(); ++e)
                for (const auto& [key, c] : mat[e]) tm[e].emplace(key, c.truncated(k));
            out.parts_.emplace(m, std::move(tm));
        }
        return out;
    }

    SymbolSeriesT operator-() const {
        SymbolSeriesT out(ctx_, rows_, cols_);
        out.entire_ = entire_;
        out.bottom_ = bottom_;
        for (const auto& [m, mat] : parts_) {
            Mat neg(mat.size());
            for (size_t e = 0; e < mat.size(); ++e)
                for (const auto& [key, c] : mat[e]) neg[e].emplace(key, -c);
            out.parts_.emplace(m, std::move(neg));
        }
        return out;
    }

    SymbolSeriesT& operator+=(const SymbolSeriesT& o) { return combine(o, false); }
    SymbolSeriesT& operator-=(const SymbolSeriesT& o) { return combine(o, true); }
    friend SymbolSeriesT operator+(SymbolSeriesT a, const SymbolSeriesT& b) { return a += b; }
    friend SymbolSeriesT operator-(SymbolSeriesT a, const SymbolSeriesT& b) { return a -= b; }

    SymbolSeriesT scaled(const Cplx<S>& z) const {
        SymbolSeriesT out(ctx_, rows_, cols_);
        out.entire_ = entire_;
        out.bottom_ = bottom_;
        if (z.is_zero()) return out;
        for (const auto& [m, mat] : parts_) {
            Mat sm(mat.size());
            for (size_t e = 0; e < mat.size(); ++e)
                for (const auto& [key, c] : mat[e]) {
                    CJetT<S> sc = c.scaled(z);
                    if (!sc.is_zero()) sm[e].emplace(key, std::move(sc));
                }
            out.parts_.emplace(m, std::move(sm));
        }
        out.prune();
        return out;
    }
    SymbolSeriesT scaled(const S& s) const { return scaled(Cplx<S>(s)); }
    SymbolSeriesT times_i() const {
        return scaled(Cplx<S>(ScalarOps<S>::zero(), ScalarOps<S>::one()));
    }

    // Multiplication by the scalar monomial factor * |xi|^p.
    SymbolSeriesT shifted(int p, const S& factor) const {
        SymbolSeriesT out(ctx_, rows_, cols_);
        out.entire_ = entire_;
        out.bottom_ = entire_ ? kNegInf : bottom_ + p;
        for (const auto& [m, mat] : parts_) {
            Mat sm(mat.size());
            for (size_t e = 0; e < mat.size(); ++e)
                for (const auto& [key, c] : mat[e]) {
                    XiMonomial mono = XiMonomial::unpack(key);
                    mono.p += p;
                    CJetT<S> sc = c.scaled(factor);
                    if (!sc.is_zero()) sm[e].emplace(mono.pack(), std::move(sc));
                }
            out.parts_.emplace(m + p, std::move(sm));
        }
        out.prune();
        return out;
    }

    // Matrix product, degreewise; the reliability floor follows from the
    // unknown tails of the factors.
    friend SymbolSeriesT operator*(const SymbolSeriesT& a, const SymbolSeriesT& b) {
        require_same_ctx(a, b);
        if (a.cols_ != b.rows_) throw ShapeMismatch("symbol product shapes");
        SymbolSeriesT out(a.ctx_, a.rows_, b.cols_);
        int floor = std::max(addcap(a.floor_degree(), b.top_degree()),
                             addcap(b.floor_degree(), a.top_degree()));
        out.entire_ = floor <= kNegInf;
        out.bottom_ = out.entire_ ? kNegInf : floor;
        for (const auto& [ma, mata] : a.parts_)
            for (const auto& [mb, matb] : b.parts_) {
                int m = ma + mb;
                if (!out.entire_ && m < out.bottom_) continue;
                for (int r = 0; r < a.rows_; ++r)
                    for (int c = 0; c < b.cols_; ++c)
                        for (int k = 0; k < a.cols_; ++k) {
                            const TermMap& ta = mata[a.idx(r, k)];
                            const TermMap& tb = matb[b.idx(k, c)];
                            for (const auto& [ka, va] : ta)
                                for (const auto& [kb, vb] : tb) {
                                    XiMonomial xa = XiMonomial::unpack(ka);
                                    XiMonomial xb = XiMonomial::unpack(kb);
                                    out.add_term(m, r, c,
                                                 XiMonomial{xa.a + xb.a, xa.b + xb.b, xa.p + xb.p},
                                                 va * vb);
                                }
                        }
            }
        out.prune();
        return out;
    }

    // d/dxi_alpha, alpha in {1,2}: lowers degree by one.
    SymbolSeriesT dxi(int alpha) const {
        if (alpha != 1 && alpha != 2) throw ContractError("dxi direction must be tangential");
        SymbolSeriesT out(ctx_, rows_, cols_);
        out.entire_ = entire_;
        out.bottom_ = entire_ ? kNegInf : bottom_ - 1;
        for (const auto& [m, mat] : parts_)
            for (int r = 0; r < rows_; ++r)
                for (int c = 0; c < cols_; ++c)
                    for (const auto& [key, coeff] : mat[idx(r, c)]) {
                        XiMonomial mono = XiMonomial::unpack(key);
                        if (alpha == 1 && mono.a > 0)
                            out.add_term(m - 1, r, c, XiMonomial{mono.a - 1, mono.b, mono.p},
                                         coeff.scaled(ScalarOps<S>::from_long(mono.a)));
                        if (alpha == 2 && mono.b > 0)
                            out.add_term(m - 1, r, c, XiMonomial{mono.a, mono.b - 1, mono.p},
                                         coeff.scaled(ScalarOps<S>::from_long(mono.b)));
                        if (mono.p != 0) {
                            // d/dxi_a |xi|^p = p |xi|^{p-2} g^{ab} xi_b
                            CJetT<S> base = coeff.scaled(ScalarOps<S>::from_long(mono.p));
                            out.add_term(m - 1, r, c, XiMonomial{mono.a + 1, mono.b, mono.p - 2},
                                         base * ctx_->ginv(alpha, 1));
                            out.add_term(m - 1, r, c, XiMonomial{mono.a, mono.b + 1, mono.p - 2},
                                         base * ctx_->ginv(alpha, 2));
                        }
                    }
        out.prune();
        return out;
    }

    // d/dx_i, i in {1,2,3}: differentiates coefficients and applies the
    // x-dependence of |xi| through the metric.
    SymbolSeriesT dx(int i) const {
        SymbolSeriesT out(ctx_, rows_, cols_);
        out.entire_ = entire_;
        out.bottom_ = bottom_;
        for (const auto& [m, mat] : parts_)
            for (int r = 0; r < rows_; ++r)
                for (int c = 0; c < cols_; ++c)
                    for (const auto& [key, coeff] : mat[idx(r, c)]) {
                        XiMonomial mono = XiMonomial::unpack(key);
                        out.add_term(m, r, c, mono, coeff.derivative(i));
                        if (mono.p != 0) {
                            // d/dx |xi|^p = (p/2)|xi|^{p-2} (d g^{ab}) xi_a xi_b
                            CJetT<S> base = coeff.scaled(ScalarOps<S>::from_rat(rat(mono.p, 2)));
                            out.add_term(m, r, c, XiMonomial{mono.a + 2, mono.b, mono.p - 2},
                                         base * ctx_->dginv(i, 1, 1));
                            out.add_term(m, r, c, XiMonomial{mono.a + 1, mono.b + 1, mono.p - 2},
                                         (base * ctx_->dginv(i, 1, 2))
                                             .scaled(ScalarOps<S>::from_long(2)));
                            out.add_term(m, r, c, XiMonomial{mono.a, mono.b + 2, mono.p - 2},
                                         base * ctx_->dginv(i, 2, 2));
                        }
                    }
        out.prune();
        return out;
    }

    // a # b = sum over tangential multi-indices alpha of
    // (1/alpha!) (d_xi^alpha a) (D_x^alpha b), D = -i d, truncated at degree
    // `bottom`.  The alpha sum is finite: each step lowers the degree.
    SymbolSeriesT compose(const SymbolSeriesT& b, int bottom) const {
        require_same_ctx(*this, b);
        if (cols_ != b.rows_) throw ShapeMismatch("symbol composition shapes");
        if (bottom <= kNegInf) throw ContractError("composition needs a finite bottom degree");
        int floor = std::max({addcap(floor_degree(), b.top_degree()),
                              addcap(b.floor_degree(), top_degree()), bottom});
        SymbolSeriesT out(ctx_, rows_, b.cols_);
        if (parts_.empty() || b.parts_.empty()) {
            out.entire_ = entire_ && b.entire_;
            out.bottom_ = out.entire_ ? kNegInf : floor;
            return out;
        }
        int lmax = top_degree() + b.top_degree() - floor;
        bool dropped = false;
        bool terminated = false;

        // a-derivatives are computed eagerly (they cannot fail); b-derivatives
        // lazily, so unneeded branches never exhaust jet orders.  Before each
        // derivative the chain is cut at the lowest b-degree that can still
        // reach the floor at that level, so discarded degrees cannot throw.
        const int atop = top_degree();
        std::map<std::pair<int, int>, SymbolSeriesT> da, db;
        da.emplace(std::make_pair(0, 0), *this);
        db.emplace(std::make_pair(0, 0), b);
        auto db_step = [&](const SymbolSeriesT& prev, int lvl, int dir) {
            int need = floor + lvl - atop;
            if (!prev.parts_.empty() && prev.parts_.begin()->first < need) dropped = true;
            return prev.truncated_below(need).dx(dir);
        };
        auto get_db = [&](int j, int l) -> const SymbolSeriesT& {
            for (int t = 1; t <= j; ++t)
                if (!db.count({t, 0}))
                    db.emplace(std::make_pair(t, 0), db_step(db.at({t - 1, 0}), t, 1));
            for (int t = 1; t <= l; ++t)
                if (!db.count({j, t}))
                    db.emplace(std::make_pair(j, t), db_step(db.at({j, t - 1}), j + t, 2));
            return db.at({j, l});
        };

        for (int level = 0; level <= lmax; ++level) {
            bool all_empty = true;
            for (int j = level; j >= 0; --j) {
                int l = level - j;
                const SymbolSeriesT& aj = da.at({j, l});
                if (aj.parts_.empty()) continue;
                const SymbolSeriesT& bj = get_db(j, l);
                if (bj.parts_.empty()) continue;
                all_empty = false;
                SymbolSeriesT prod = aj * bj;
                Rational fact = 1;
                for (int t = 2; t <= j; ++t) fact *= t;
                for (int t = 2; t <= l; ++t) fact *= t;
                Cplx<S> z(ScalarOps<S>::from_rat(1 / fact));
                switch (level % 4) {  // (-i)^level
                    case 1: z = Cplx<S>(ScalarOps<S>::zero(), -z.re); break;
                    case 2: z = Cplx<S>(-z.re, ScalarOps<S>::zero()); break;
                    case 3: z = Cplx<S>(ScalarOps<S>::zero(), z.re); break;
                    default: break;
                }
                for (const auto& [m, mat] : prod.parts_) {
                    if (m < floor) {
                        dropped = true;
                        continue;
                    }
                    for (int r = 0; r < out.rows_; ++r)
                        for (int c = 0; c < out.cols_; ++c)
                            for (const auto& [key, coeff] : mat[prod.idx(r, c)])
                                out.add_term(m, r, c, XiMonomial::unpack(key), coeff.scaled(z));
                }
            }
            if (all_empty) {
                terminated = true;
                break;
            }
            if (level == lmax) break;
            for (int j = 0; j <= level; ++j) {
                auto& prev = da.at({j, level - j});
                da.emplace(std::make_pair(j, level - j + 1), prev.dxi(2));
            }
            da.emplace(std::make_pair(level + 1, 0), da.at({level, 0}).dxi(1));
        }
        out.entire_ = terminated && entire_ && b.entire_ && !dropped;
        out.bottom_ = out.entire_ ? kNegInf : floor;
        out.prune();
        return out;
    }

    // Sub-matrix view (copies the terms; symbols are immutable values).
    SymbolSeriesT block(int r0, int nr, int c0, int nc) const {
        if (r0 < 0 || c0 < 0 || r0 + nr > rows_ || c0 + nc > cols_)
            throw ShapeMismatch("block outside symbol shape");
        SymbolSeriesT out(ctx_, nr, nc);
        out.entire_ = entire_;
        out.bottom_ = bottom_;
        for (const auto& [m, mat] : parts_)
            for (int r = 0; r < nr; ++r)
                for (int c = 0; c < nc; ++c)
                    for (const auto& [key, coeff] : mat[idx(r0 + r, c0 + c)])
                        out.add_term(m, r, c, XiMonomial::unpack(key), coeff);
        out.prune();
        return out;
    }

    // Inverse of the tt/tn/nt/nn split.
    static SymbolSeriesT from_blocks(const SymbolSeriesT& tt, const SymbolSeriesT& tn,
                                     const SymbolSeriesT& nt, const SymbolSeriesT& nn) {
        require_same_ctx(tt, tn);
        require_same_ctx(tt, nt);
        require_same_ctx(tt, nn);
        if (tt.rows_ != 2 || tt.cols_ != 2 || tn.rows_ != 2 || tn.cols_ != 1 || nt.rows_ != 1 ||
            nt.cols_ != 2 || nn.rows_ != 1 || nn.cols_ != 1)
            throw ShapeMismatch("block shapes do not assemble to 3x3");
        SymbolSeriesT out(tt.ctx_, 3, 3);
        int floor = std::max({tt.floor_degree(), tn.floor_degree(), nt.floor_degree(),
                              nn.floor_degree()});
        out.entire_ = floor <= kNegInf;
        out.bottom_ = out.entire_ ? kNegInf : floor;
        auto put = [&](const SymbolSeriesT& blk, int r0, int c0) {
            for (const auto& [m, mat] : blk.parts_)
                for (int r = 0; r < blk.rows_; ++r)
                    for (int c = 0; c < blk.cols_; ++c)
                        for (const auto& [key, coeff] : mat[blk.idx(r, c)])
                            out.add_term(m, r0 + r, c0 + c, XiMonomial::unpack(key), coeff);
        };
        put(tt, 0, 0);
        put(tn, 0, 2);
        put(nt, 2, 0);
        put(nn, 2, 2);
        out.prune();
        return out;
    }

    // Numeric evaluation at a point and covector.
    CMat eval(const double x[3], double xi1, double xi2) const {
        if (xi1 == 0.0 && xi2 == 0.0) throw ContractError("symbol evaluation at xi = 0");
        double q = ctx_->q_at(x, xi1, xi2);
        if (!(q > 0)) throw ContractError("covector has non-positive metric length");
        double nrm = std::sqrt(q);
        CMat out(rows_, cols_);
        for (const auto& [m, mat] : parts_)
            for (int r = 0; r < rows_; ++r)
                for (int c = 0; c < cols_; ++c)
                    for (const auto& [key, coeff] : mat[idx(r, c)]) {
                        XiMonomial mono = XiMonomial::unpack(key);
                        std::complex<double> v = coeff.eval_d(x[0], x[1], x[2]);
                        v *= std::pow(xi1, mono.a) * std::pow(xi2, mono.b) * std::pow(nrm, mono.p);
                        out.at(r, c) += v;
                    }
        return out;
    }

    // Exact evaluation at a fixed rational covector, split as A + B sqrt(q);
    // A and B stay jets in x.  Entries indexed row-major.
    std::vector<EvalABT<S>> eval_ab(const Rational& xi1, const Rational& xi2) const {
        if (sgn(xi1) == 0 && sgn(xi2) == 0) throw ContractError("symbol evaluation at xi = 0");
        Jet3T<S> q = ctx_->q_jet(xi1, xi2);
        int pow_min = 0, pow_max = 0;
        for (const auto& [m, mat] : parts_)
            for (const auto& terms : mat)
                for (const auto& [key, coeff] : terms) {
                    XiMonomial mono = XiMonomial::unpack(key);
                    int e = (mono.p - (((mono.p % 2) + 2) % 2)) / 2;
                    pow_min = std::min(pow_min, e);
                    pow_max = std::max(pow_max, e);
                }
        std::map<int, Jet3T<S>> qpow;
        qpow[0] = Jet3T<S>::constant(ScalarOps<S>::one());
        for (int e = 1; e <= pow_max; ++e) qpow[e] = qpow[e - 1] * q;
        if (pow_min < 0) {
            Jet3T<S> qinv = q.reciprocal();
            for (int e = -1; e >= pow_min; --e) qpow[e] = qpow[e + 1] * qinv;
        }
        std::vector<EvalABT<S>> out(static_cast<size_t>(rows_) * cols_);
        for (const auto& [m, mat] : parts_)
            for (int r = 0; r < rows_; ++r)
                for (int c = 0; c < cols_; ++c)
                    for (const auto& [key, coeff] : mat[idx(r, c)]) {
                        XiMonomial mono = XiMonomial::unpack(key);
                        Rational xi_val = 1;
                        for (int t = 0; t < mono.a; ++t) xi_val *= xi1;
                        for (int t = 0; t < mono.b; ++t) xi_val *= xi2;
                        CJetT<S> v = coeff.scaled(ScalarOps<S>::from_rat(xi_val));
                        bool odd = (((mono.p % 2) + 2) % 2) == 1;
                        int e = odd ? (mono.p - 1) / 2 : mono.p / 2;
                        v = v * qpow.at(e);
                        if (odd)
                            out[idx(r, c)].B += v;
                        else
                            out[idx(r, c)].A += v;
                    }
        return out;
    }

    // Structural zero test (exact mode): within each degree, entry, and
    // |xi|-parity class, rewrite all terms to one common |xi| power by
    // multiplying coefficients with the quadratic form, then compare the
    // resulting xi-polynomial coefficient jets against zero.
    bool is_zero_structural() const {
        for (const auto& [m, mat] : parts_)
            for (int r = 0; r < rows_; ++r)
                for (int c = 0; c < cols_; ++c) {
                    if (!entry_parity_zero(mat[idx(r, c)], 0)) return false;
                    if (!entry_parity_zero(mat[idx(r, c)], 1)) return false;
                }
        return true;
    }

  private:
    static int addcap(int x, int y) { return (x <= kNegInf || y <= kNegInf) ? kNegInf : x + y; }
    static void require_same_ctx(const SymbolSeriesT& a, const SymbolSeriesT& b) {
        if (a.ctx_ != b.ctx_) throw ContractError("symbols built over different metric contexts");
    }
    size_t idx(int r, int c) const { return static_cast<size_t>(r) * cols_ + c; }
    Mat& slot(int m) {
        auto it = parts_.find(m);
        if (it == parts_.end())
            it = parts_.emplace(m, Mat(static_cast<size_t>(rows_) * cols_)).first;
        return it->second;
    }
    void prune() {
        for (auto it = parts_.begin(); it != parts_.end();) {
            bool any = false;
            for (const auto& terms : it->second)
                if (!terms.empty()) {
                    any = true;
                    break;
                }
            it = any ? std::next(it) : parts_.erase(it);
        }
    }

    SymbolSeriesT& combine(const SymbolSeriesT& o, bool subtract) {
        require_same_ctx(*this, o);
        if (rows_ != o.rows_ || cols_ != o.cols_) throw ShapeMismatch("symbol sum shapes");
        int floor = std::max(floor_degree(), o.floor_degree());
        entire_ = floor <= kNegInf;
        bottom_ = entire_ ? kNegInf : floor;
        if (!entire_) {
            for (auto it = parts_.begin(); it != parts_.end();)
                it = (it->first < bottom_) ? parts_.erase(it) : std::next(it);
        }
        for (const auto& [m, mat] : o.parts_) {
            if (!entire_ && m < bottom_) continue;
            for (int r = 0; r < rows_; ++r)
                for (int c = 0; c < cols_; ++c)
                    for (const auto& [key, coeff] : mat[idx(r, c)])
                        add_term(m, r, c, XiMonomial::unpack(key),
                                 subtract ? -coeff : coeff);
        }
        prune();
        return *this;
    }

    bool entry_parity_zero(const TermMap& terms, int parity) const {
        int pmin = INT_MAX;
        for (const auto& [key, coeff] : terms) {
            XiMonomial mono = XiMonomial::unpack(key);
            if ((((mono.p % 2) + 2) % 2) != parity) continue;
            pmin = std::min(pmin, mono.p);
        }
        if (pmin == INT_MAX) return true;
        std::map<std::pair<int, int>, CJetT<S>> poly;
        for (const auto& [key, coeff] : terms) {
            XiMonomial mono = XiMonomial::unpack(key);
            if ((((mono.p % 2) + 2) % 2) != parity) continue;
            int s = (mono.p - pmin) / 2;
            std::map<std::pair<int, int>, CJetT<S>> local;
            local[{mono.a, mono.b}] = coeff;
            for (int t = 0; t < s; ++t) {
                std::map<std::pair<int, int>, CJetT<S>> next;
                for (const auto& [ab, cj] : local) {
                    next[{ab.first + 2, ab.second}] += cj * ctx_->ginv(1, 1);
                    next[{ab.first + 1, ab.second + 1}] +=
                        (cj * ctx_->ginv(1, 2)).scaled(ScalarOps<S>::from_long(2));
                    next[{ab.first, ab.second + 2}] += cj * ctx_->ginv(2, 2);
                }
                local = std::move(next);
            }
            for (const auto& [ab, cj] : local) poly[ab] += cj;
        }
        for (const auto& [ab, cj] : poly)
            if (!cj.is_zero()) return false;
        return true;
    }

    Ctx ctx_;
    int rows_, cols_;
    std::map<int, Mat> parts_;
    int bottom_;
    bool entire_;
};

template <class S>
SymbolSeriesT<S> sym_mul(const SymbolSeriesT<S>& a, const SymbolSeriesT<S>& b) {
    return a * b;
}
template <class S>
SymbolSeriesT<S> sym_dxi(const SymbolSeriesT<S>& a, int alpha) {
    return a.dxi(alpha);
}
template <class S>
SymbolSeriesT<S> sym_dx(const SymbolSeriesT<S>& a, int i) {
    return a.dx(i);
}
template <class S>
SymbolSeriesT<S> sym_compose(const SymbolSeriesT<S>& a, const SymbolSeriesT<S>& b, int bottom) {
    return a.compose(b, bottom);
}
template <class S>
CMat sym_eval(const SymbolSeriesT<S>& a, const double x[3], double xi1, double xi2) {
    return a.eval(x, xi1, xi2);
}

// Randomized equality backend; the exact mode uses the structural test on
// the difference instead.
template <class S>
bool sym_equal_sampled(const SymbolSeriesT<S>& a, const SymbolSeriesT<S>& b, double tol = 1e-10) {
    static const double xs[8][3] = {{0, 0, 0},           {0.11, -0.07, 0.05},
                                    {-0.13, 0.02, -0.08}, {0.04, 0.09, 0.12},
                                    {-0.06, -0.1, 0.03},  {0.08, 0.05, -0.11},
                                    {0.02, -0.12, 0.07},  {-0.09, 0.13, -0.04}};
    static const double xis[8][2] = {{1, 0},  {0, 1},     {1, 1},     {2, -1},
                                     {-1, 3}, {0.5, 0.7}, {-2, -0.3}, {1.4, -2.2}};
    for (int s = 0; s < 8; ++s) {
        CMat va = a.eval(xs[s], xis[s][0], xis[s][1]);
        CMat vb = b.eval(xs[s], xis[s][0], xis[s][1]);
        double scale = 1.0;
        for (size_t i = 0; i < va.v.size(); ++i)
            scale = std::max({scale, std::abs(va.v[i]), std::abs(vb.v[i])});
        for (size_t i = 0; i < va.v.size(); ++i)
            if (std::abs(va.v[i] - vb.v[i]) > tol * scale) return false;
    }
    return true;
}

template <class S>
bool sym_equal(const SymbolSeriesT<S>& a, const SymbolSeriesT<S>& b, double tol = 1e-10) {
    if constexpr (ScalarOps<S>::exact) {
        int floor = std::max(a.floor_degree(), b.floor_degree());
        SymbolSeriesT<S> diff = a - b;
        if (floor > SymbolSeriesT<S>::kNegInf) diff = diff.truncated_below(floor);
        return diff.is_zero_structural();
    } else {
        return sym_equal_sampled(a, b, tol);
    }
}

// Blocks of a 3x3 symbol split at the normal index: tangential-tangential,
// tangential-normal, normal-tangential, normal-normal.
template <class S>
struct BlockSymbolT {
    SymbolSeriesT<S> tt, tn, nt, nn;
};

template <class S>
BlockSymbolT<S> split_blocks(const SymbolSeriesT<S>& s) {
    if (s.rows() != 3 || s.cols() != 3) throw ShapeMismatch("block split needs a 3x3 symbol");
    return BlockSymbolT<S>{s.block(0, 2, 0, 2), s.block(0, 2, 2, 1), s.block(2, 1, 0, 2),
                           s.block(2, 1, 2, 1)};
}

template <class S>
SymbolSeriesT<S> assemble_blocks(const BlockSymbolT<S>& b) {
    return SymbolSeriesT<S>::from_blocks(b.tt, b.tn, b.nt, b.nn);
}

// Coefficient tensors of the omega = xi/|xi| expansion of a single-degree
// symbol at the boundary.  Rank-j tensors are symmetric; slot k holds the
// coefficient of the symmetrized monomial with k indices equal to 2.
template <class S>
struct OmegaTablesT {
    int rows = 0, cols = 0;
    std::vector<std::map<int, std::vector<CJetT<S>>>> table;

    const std::map<int, std::vector<CJetT<S>>>& at(int r, int c) const {
        return table[static_cast<size_t>(r) * cols + c];
    }
};

namespace detail {

// Exact inverse of the small Vandermonde system V_{ik} = t_i^k.
inline std::vector<std::vector<Rational>> vandermonde_inverse(const std::vector<Rational>& ts) {
    size_t n = ts.size();
    std::vector<std::vector<Rational>> m(n, std::vector<Rational>(2 * n, 0));
    for (size_t i = 0; i < n; ++i) {
        Rational p = 1;
        for (size_t k = 0; k < n; ++k) {
            m[i][k] = p;
            p *= ts[i];
        }
        m[i][n + i] = 1;
    }
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        while (piv < n && sgn(m[piv][col]) == 0) ++piv;
        if (piv == n) throw DegenerateDirections("direction set does not determine coefficients");
        std::swap(m[piv], m[col]);
        Rational inv = 1 / m[col][col];
        for (size_t k = 0; k < 2 * n; ++k) m[col][k] *= inv;
        for (size_t row = 0; row < n; ++row) {
            if (row == col || sgn(m[row][col]) == 0) continue;
            Rational f = m[row][col];
            for (size_t k = 0; k < 2 * n; ++k) m[row][k] -= f * m[col][k];
        }
    }
    std::vector<std::vector<Rational>> inv(n, std::vector<Rational>(n));
    for (size_t i = 0; i < n; ++i)
        for (size_t k = 0; k < n; ++k) inv[i][k] = m[i][n + k];
    return inv;
}

inline Rational binomial(int n, int k) {
    Rational r = 1;
    for (int t = 1; t <= k; ++t) r *= Rational(n - t + 1) / t;
    return r;
}

}  // namespace detail

// Extract omega-coefficient tensors of a single-degree symbol, as jets on
// the boundary.  Terms are split by omega-parity and each parity class is
// homogenized to its top omega-degree with the unit relation q(omega) = 1;
// the class polynomial is then evaluated at rational directions (1, t) and
// the monomial coefficients recovered by an exact Vandermonde solve.
template <class S>
OmegaTablesT<S> omega_coeff_jets(const SymbolSeriesT<S>& am, int d,
                                 const std::vector<Rational>* ts = nullptr) {
    std::vector<int> degs = am.degrees();
    if (degs.size() != 1) throw ContractError("omega extraction needs a single-degree symbol");
    int m = degs.front();
    if (d < 0 || d > 4) throw ContractError("omega degree bound out of range");

    const auto& ctx = *am.ctx();
    Jet3T<S> qb[3] = {ctx.ginv(1, 1).boundary(), ctx.ginv(1, 2).boundary(),
                      ctx.ginv(2, 2).boundary()};

    OmegaTablesT<S> out;
    out.rows = am.rows();
    out.cols = am.cols();
    out.table.resize(static_cast<size_t>(out.rows) * out.cols);

    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) {
            const auto& terms = am.entry(m, r, c);
            for (int parity = 0; parity < 2; ++parity) {
                int j = -1;
                for (const auto& [key, coeff] : terms) {
                    XiMonomial mono = XiMonomial::unpack(key);
                    int w = mono.a + mono.b;
                    if (w % 2 != parity) continue;
                    j = std::max(j, w);
                }
                if (j < 0) continue;
                if (j > d) throw ContractError("omega degree exceeds the stated bound");

                // Homogenize the parity class to omega-degree j.
                std::map<int, CJetT<S>> poly;  // exponent of xi_2 -> coefficient
                for (const auto& [key, coeff] : terms) {
                    XiMonomial mono = XiMonomial::unpack(key);
                    int w = mono.a + mono.b;
                    if (w % 2 != parity) continue;
                    std::map<std::pair<int, int>, CJetT<S>> local;
                    local[{mono.a, mono.b}] = coeff.boundary();
                    for (int s = 0; s < (j - w) / 2; ++s) {
                        std::map<std::pair<int, int>, CJetT<S>> next;
                        for (const auto& [ab, cj] : local) {
                            next[{ab.first + 2, ab.second}] += cj * qb[0];
                            next[{ab.first + 1, ab.second + 1}] +=
                                (cj * qb[1]).scaled(ScalarOps<S>::from_long(2));
                            next[{ab.first, ab.second + 2}] += cj * qb[2];
                        }
                        local = std::move(next);
                    }
                    for (const auto& [ab, cj] : local) poly[ab.second] += cj;
                }

                // Evaluate at directions (1, t) and solve for the monomial
                // coefficients.
                std::vector<Rational> dirs;
                if (ts) {
                    if (static_cast<int>(ts->size()) < j + 1)
                        throw DegenerateDirections("not enough directions for this omega degree");
                    dirs.assign(ts->begin(), ts->begin() + j + 1);
                } else {
                    for (int t = 0; t <= j; ++t) dirs.push_back(t);
                }
                std::vector<CJetT<S>> values(j + 1);
                for (int i = 0; i <= j; ++i) {
                    Rational tp = 1;
                    for (int k = 0; k <= j; ++k) {
                        auto it = poly.find(k);
                        if (it != poly.end())
                            values[i] += it->second.scaled(ScalarOps<S>::from_rat(tp));
                        tp *= dirs[i];
                    }
                }
                auto vinv = detail::vandermonde_inverse(dirs);
                std::vector<CJetT<S>> slots(j + 1);
                for (int k = 0; k <= j; ++k) {
                    CJetT<S> ck;
                    for (int i = 0; i <= j; ++i)
                        ck += values[i].scaled(ScalarOps<S>::from_rat(vinv[k][i]));
                    slots[k] = ck.scaled(ScalarOps<S>::from_rat(1 / detail::binomial(j, k)));
                }
                out.table[static_cast<size_t>(r) * out.cols + c][j] = std::move(slots);
            }
        }
    return out;
}

// Same tables evaluated at a boundary point.
template <class S>
struct OmegaValuesT {
    int rows = 0, cols = 0;
    std::vector<std::map<int, std::vector<Cplx<S>>>> table;

    const std::map<int, std::vector<Cplx<S>>>& at(int r, int c) const {
        return table[static_cast<size_t>(r) * cols + c];
    }
};

template <class S>
OmegaValuesT<S> omega_coeffs(const SymbolSeriesT<S>& am, const Rational& x1, const Rational& x2,
                             int d, const std::vector<Rational>* ts = nullptr) {
    OmegaTablesT<S> jets = omega_coeff_jets(am, d, ts);
    OmegaValuesT<S> out;
    out.rows = jets.rows;
    out.cols = jets.cols;
    out.table.resize(jets.table.size());
    S p1 = ScalarOps<S>::from_rat(x1), p2 = ScalarOps<S>::from_rat(x2);
    S z = ScalarOps<S>::zero();
    for (size_t e = 0; e < jets.table.size(); ++e)
        for (const auto& [rank, slots] : jets.table[e]) {
            std::vector<Cplx<S>> vals;
            vals.reserve(slots.size());
            for (const auto& cj : slots) vals.push_back(cj.eval(p1, p2, z));
            out.table[e][rank] = std::move(vals);
        }
    return out;
}

using MetricContext = MetricContextT<QuadRat>;
using SymbolSeries = SymbolSeriesT<QuadRat>;
using CJet = CJetT<QuadRat>;

}  // namespace bnt
