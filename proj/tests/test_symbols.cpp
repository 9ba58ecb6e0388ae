#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "bnt/symbols.hpp"
#include "test_util.hpp"

using namespace bnt;
using namespace bnt::testutil;

namespace {

template <class S>
using Ctx = std::shared_ptr<const MetricContextT<S>>;

template <class S>
Ctx<S> euclid_ctx(int k) {
    Jet3T<S> one = Jet3T<S>::constant(ScalarOps<S>::one(), k);
    return std::make_shared<const MetricContextT<S>>(MetricJetT<S>(one, Jet3T<S>(k), one, k));
}

template <class S>
Ctx<S> random_ctx(std::mt19937& rng, int k) {
    return std::make_shared<const MetricContextT<S>>(random_metric<S>(rng, k));
}

template <class S>
SymbolSeriesT<S> scalar_term(Ctx<S> ctx, XiMonomial mono, CJetT<S> coeff) {
    SymbolSeriesT<S> s(std::move(ctx), 1, 1);
    s.add_term(mono.degree(), 0, 0, mono, std::move(coeff));
    return s;
}

// Coefficients are exact polynomials so products and derivative chains stay
// representable at every order the tests reach.
template <class S>
SymbolSeriesT<S> random_symbol(Ctx<S> ctx, std::mt19937& rng, int rows, int cols) {
    SymbolSeriesT<S> s(ctx, rows, cols);
    std::uniform_int_distribution<int> ab(0, 2), pshift(-2, 1), entry(0, rows * cols - 1);
    for (int t = 0; t < 6; ++t) {
        XiMonomial mono{ab(rng), ab(rng), pshift(rng)};
        int e = entry(rng);
        s.add_term(mono.degree(), e / cols, e % cols, mono,
                   CJetT<S>(random_poly_jet<S>(rng, 2, 3), random_poly_jet<S>(rng, 2, 2)));
    }
    return s;
}

double cmat_diff(const CMat& a, const CMat& b) {
    double m = 0;
    for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
    return m;
}

CMat cmat_mul(const CMat& a, const CMat& b) {
    CMat out(a.rows, b.cols);
    for (int r = 0; r < a.rows; ++r)
        for (int c = 0; c < b.cols; ++c)
            for (int k = 0; k < a.cols; ++k) out.at(r, c) += a.at(r, k) * b.at(k, c);
    return out;
}

}  // namespace

TEST_CASE("symbol product basics") {
    auto ctx = euclid_ctx<QuadRat>(4);
    std::mt19937 rng(41);
    SymbolSeries a = random_symbol<QuadRat>(ctx, rng, 3, 3);
    SymbolSeries id = SymbolSeries::identity(ctx);
    CHECK(sym_equal(sym_mul(a, id), a));
    CHECK(sym_equal(sym_mul(id, a), a));

    SymbolSeries xi(ctx, 3, 3), xi_inv(ctx, 3, 3);
    for (int r = 0; r < 3; ++r) {
        xi.add_term(1, r, r, XiMonomial{0, 0, 1}, CJet::real_const(ScalarOps<QuadRat>::one()));
        xi_inv.add_term(-1, r, r, XiMonomial{0, 0, -1},
                        CJet::real_const(ScalarOps<QuadRat>::one()));
    }
    CHECK(sym_equal(sym_mul(xi, xi_inv), id));

    SymbolSeries bad(ctx, 2, 2);
    CHECK_THROWS_AS(sym_mul(a.block(0, 3, 0, 3).block(0, 2, 0, 2), a), ShapeMismatch);
}

TEST_CASE("symbol product matches product of evaluations") {
    std::mt19937 rng(43);
    auto ctx = random_ctx<double>(rng, 4);
    SymbolSeriesT<double> a = random_symbol<double>(ctx, rng, 3, 3);
    SymbolSeriesT<double> b = random_symbol<double>(ctx, rng, 3, 3);
    double x[3] = {0.05, -0.08, 0.1};
    CMat va = a.eval(x, 1.2, -0.7);
    CMat vb = b.eval(x, 1.2, -0.7);
    CMat vab = (a * b).eval(x, 1.2, -0.7);
    double scale = 0;
    for (auto& z : vab.v) scale = std::max(scale, std::abs(z));
    CHECK(cmat_diff(vab, cmat_mul(va, vb)) <= 1e-12 * std::max(1.0, scale));
}

TEST_CASE("xi derivative") {
    auto ctx = euclid_ctx<QuadRat>(4);
    auto one = ScalarOps<QuadRat>::one();

    SymbolSeries xi1 = scalar_term<QuadRat>(ctx, XiMonomial{1, 0, 0}, CJet::real_const(one));
    SymbolSeries d = sym_dxi(xi1, 1);
    SymbolSeries expect = scalar_term<QuadRat>(ctx, XiMonomial{}, CJet::real_const(one));
    CHECK(sym_equal(d, expect));
    CHECK(d.top_degree() == 0);
    CHECK(sym_dxi(xi1, 2).empty());

    // d|xi|/dxi_a = g^{ab} xi_b / |xi| for any metric.
    std::mt19937 rng(47);
    auto rctx = random_ctx<QuadRat>(rng, 4);
    SymbolSeries norm = scalar_term<QuadRat>(rctx, XiMonomial{0, 0, 1}, CJet::real_const(one));
    for (int alpha = 1; alpha <= 2; ++alpha) {
        SymbolSeries want(rctx, 1, 1);
        want.add_term(0, 0, 0, XiMonomial{1, 0, -1}, CJet(rctx->ginv(alpha, 1)));
        want.add_term(0, 0, 0, XiMonomial{0, 1, -1}, CJet(rctx->ginv(alpha, 2)));
        CHECK(sym_equal(sym_dxi(norm, alpha), want));
    }
}

TEST_CASE("xi derivative finite difference oracle") {
    auto ctx = euclid_ctx<double>(4);
    SymbolSeriesT<double> a =
        scalar_term<double>(ctx, XiMonomial{0, 2, -1}, CJetT<double>::real_const(1.0));
    double x[3] = {0, 0, 0};
    double v = sym_dxi(a, 1).eval(x, 1.0, 1.0).at(0, 0).real();
    double h = 1e-4;
    double fd = (a.eval(x, 1.0 + h, 1.0).at(0, 0).real() -
                 a.eval(x, 1.0 - h, 1.0).at(0, 0).real()) /
                (2 * h);
    CHECK(v == doctest::Approx(fd).epsilon(1e-7));
}

TEST_CASE("x derivative") {
    auto one = ScalarOps<QuadRat>::one();
    SUBCASE("constant coefficients over a flat metric differentiate to zero") {
        auto ctx = euclid_ctx<QuadRat>(4);
        SymbolSeries a = scalar_term<QuadRat>(ctx, XiMonomial{1, 1, -1}, CJet::real_const(one));
        for (int i = 1; i <= 3; ++i) CHECK(sym_dx(a, i).empty());
    }
    SUBCASE("normal derivative of |xi| over the conformal jet") {
        int k = 4;
        Jet3T<QuadRat> e = Jet3T<QuadRat>::constant(one, k);
        e.set(MIdx{0, 0, 1}, one);
        auto ctx = std::make_shared<const MetricContext>(MetricJet(e, Jet3T<QuadRat>(k), e, k));
        SymbolSeries norm = scalar_term<QuadRat>(ctx, XiMonomial{0, 0, 1}, CJet::real_const(one));
        double x[3] = {0, 0, 0};
        CMat v = sym_dx(norm, 3).eval(x, 1.0, 0.0);
        CHECK(v.at(0, 0).real() == doctest::Approx(-0.5).epsilon(1e-13));
        CHECK(v.at(0, 0).imag() == 0.0);
    }
    SUBCASE("mixed partials commute") {
        std::mt19937 rng(53);
        auto ctx = random_ctx<QuadRat>(rng, 4);
        SymbolSeries a = random_symbol<QuadRat>(ctx, rng, 2, 2);
        CHECK(sym_equal(sym_dx(sym_dxi(a, 2), 1), sym_dxi(sym_dx(a, 1), 2)));
    }
    SUBCASE("exhausted jet order throws") {
        auto ctx = euclid_ctx<QuadRat>(2);
        SymbolSeries a(ctx, 1, 1);
        a.add_term(0, 0, 0, XiMonomial{}, CJet(Jet3T<QuadRat>::constant(ScalarOps<QuadRat>::one(), 0)));
        CHECK_THROWS_AS(sym_dx(a, 1), OrderTooLow);
    }
}

TEST_CASE("composition") {
    auto one = ScalarOps<QuadRat>::one();
    SUBCASE("identity is neutral") {
        std::mt19937 rng(59);
        auto ctx = random_ctx<QuadRat>(rng, 4);
        SymbolSeries a = random_symbol<QuadRat>(ctx, rng, 3, 3);
        SymbolSeries id = SymbolSeries::identity(ctx);
        CHECK(sym_equal(sym_compose(a, id, -6), a));
        CHECK(sym_equal(sym_compose(id, a, -6), a));
    }
    SUBCASE("x-independent symbols compose by multiplication") {
        auto ctx = euclid_ctx<QuadRat>(4);
        std::mt19937 rng(61);
        SymbolSeries a(ctx, 2, 2), b(ctx, 2, 2);
        std::uniform_int_distribution<int> ab(0, 2), ent(0, 3);
        for (int t = 0; t < 4; ++t) {
            XiMonomial ma{ab(rng), ab(rng), 0}, mb{ab(rng), ab(rng), 0};
            a.add_term(ma.degree(), ent(rng) / 2, ent(rng) % 2, ma,
                       CJet::real_const(ScalarOps<QuadRat>::from_rat(small_rat(rng))));
            b.add_term(mb.degree(), ent(rng) / 2, ent(rng) % 2, mb,
                       CJet::real_const(ScalarOps<QuadRat>::from_rat(small_rat(rng))));
        }
        CHECK(sym_equal(sym_compose(a, b, -5), sym_mul(a, b)));
    }
    SUBCASE("plane wave oracle") {
        // Op(xi_1) Op(c(x_1)) acts on e^{ix xi} as (xi_1 c - i c') e^{ix xi}.
        auto ctx = euclid_ctx<QuadRat>(4);
        SymbolSeries xi1 = scalar_term<QuadRat>(ctx, XiMonomial{1, 0, 0}, CJet::real_const(one));
        Jet3T<QuadRat> c = Jet3T<QuadRat>::constant(one, 4);
        c.set(MIdx{1, 0, 0}, ScalarOps<QuadRat>::from_rat(rat(1, 3)));
        c.set(MIdx{2, 0, 0}, ScalarOps<QuadRat>::from_rat(rat(1, 2)));
        SymbolSeries cs = scalar_term<QuadRat>(ctx, XiMonomial{}, CJet(c));
        SymbolSeries comp = sym_compose(xi1, cs, -3);

        SymbolSeries expect(ctx, 1, 1);
        expect.add_term(1, 0, 0, XiMonomial{1, 0, 0}, CJet(c));
        expect.add_term(0, 0, 0, XiMonomial{}, CJet(c.derivative(1)).times_i().scaled(
                                                   -ScalarOps<QuadRat>::one()));
        CHECK(sym_equal(comp, expect));
        CHECK(comp.entire());

        double x[3] = {0.2, 0, 0};
        auto v = comp.eval(x, 0.9, 0.4).at(0, 0);
        double cx = 1 + 0.2 / 3.0 + 0.04 / 2.0;
        double cpx = 1 / 3.0 + 0.2;
        CHECK(v.real() == doctest::Approx(0.9 * cx).epsilon(1e-12));
        CHECK(v.imag() == doctest::Approx(-cpx).epsilon(1e-12));
    }
    SUBCASE("associativity down to common bottom") {
        std::mt19937 rng(67);
        auto ctx = euclid_ctx<double>(6);
        SymbolSeriesT<double> a = random_symbol<double>(ctx, rng, 2, 2);
        SymbolSeriesT<double> b = random_symbol<double>(ctx, rng, 2, 2);
        SymbolSeriesT<double> c = random_symbol<double>(ctx, rng, 2, 2);
        auto left = sym_compose(sym_compose(a, b, -4), c, -4);
        auto right = sym_compose(a, sym_compose(b, c, -4), -4);
        int floor = std::max(left.floor_degree(), right.floor_degree());
        CHECK(sym_equal(left.truncated_below(floor), right.truncated_below(floor), 1e-10));
    }
}

TEST_CASE("leibniz rule for the xi derivative") {
    std::mt19937 rng(71);
    auto ctx = random_ctx<QuadRat>(rng, 4);
    SymbolSeries a = random_symbol<QuadRat>(ctx, rng, 2, 2);
    SymbolSeries b = random_symbol<QuadRat>(ctx, rng, 2, 2);
    for (int alpha = 1; alpha <= 2; ++alpha) {
        SymbolSeries lhs = sym_dxi(a * b, alpha);
        SymbolSeries rhs = sym_dxi(a, alpha) * b + a * sym_dxi(b, alpha);
        CHECK(sym_equal(lhs, rhs));
    }
}

TEST_CASE("numeric evaluation") {
    auto ctx = euclid_ctx<double>(3);
    SymbolSeriesT<double> id = SymbolSeriesT<double>::identity(ctx);
    double x[3] = {0.3, -0.2, 0.1};
    CMat v = sym_eval(id, x, 2.0, -1.0);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            CHECK(v.at(r, c) == std::complex<double>(r == c ? 1.0 : 0.0, 0.0));

    SymbolSeriesT<double> b1(ctx, 3, 3);
    for (int r = 0; r < 3; ++r)
        b1.add_term(1, r, r, XiMonomial{0, 0, 1}, CJetT<double>::real_const(1.0));
    CMat v5 = b1.eval(x, 3.0, 4.0);
    for (int r = 0; r < 3; ++r) CHECK(v5.at(r, r).real() == doctest::Approx(5.0));

    CHECK_THROWS_AS(b1.eval(x, 0.0, 0.0), ContractError);

    std::mt19937 rng(73);
    auto rctx = random_ctx<double>(rng, 4);
    SymbolSeriesT<double> a = random_symbol<double>(rctx, rng, 3, 3);
    for (int m : a.degrees()) {
        auto part = a.part(m);
        CMat v1 = part.eval(x, 0.8, -0.5);
        CMat v2 = part.eval(x, 1.6, -1.0);
        double scale = 1.0;
        for (auto& z : v2.v) scale = std::max(scale, std::abs(z));
        for (size_t i = 0; i < v1.v.size(); ++i)
            CHECK(std::abs(v2.v[i] - std::pow(2.0, m) * v1.v[i]) <= 1e-12 * scale);
    }
}

TEST_CASE("block split and reassembly") {
    std::mt19937 rng(79);
    auto ctx = random_ctx<QuadRat>(rng, 4);
    SymbolSeries s = random_symbol<QuadRat>(ctx, rng, 3, 3);
    auto blocks = split_blocks(s);
    CHECK(blocks.tt.rows() == 2);
    CHECK(blocks.tn.cols() == 1);
    CHECK(blocks.nt.rows() == 1);
    CHECK(sym_equal(assemble_blocks(blocks), s));
}

TEST_CASE("omega coefficient extraction") {
    auto one = ScalarOps<QuadRat>::one();
    SUBCASE("omega_1 omega_2 splits over the symmetric slots") {
        auto ctx = euclid_ctx<QuadRat>(4);
        SymbolSeries s = scalar_term<QuadRat>(ctx, XiMonomial{1, 1, -2}, CJet::real_const(one));
        auto tab = omega_coeff_jets(s, 4);
        const auto& ranks = tab.at(0, 0);
        REQUIRE(ranks.count(2) == 1);
        CHECK(ranks.size() == 1);
        const auto& slots = ranks.at(2);
        CHECK(slots[0].is_zero());
        CHECK(slots[1].re.at0() == ScalarOps<QuadRat>::from_rat(rat(1, 2)));
        CHECK(slots[1].im.is_zero());
        CHECK(slots[2].is_zero());
    }
    SUBCASE("constant input sits at rank zero") {
        auto ctx = euclid_ctx<QuadRat>(4);
        QuadRat c = ScalarOps<QuadRat>::from_rat(rat(7, 3));
        SymbolSeries s = scalar_term<QuadRat>(ctx, XiMonomial{}, CJet::real_const(c));
        auto tab = omega_coeff_jets(s, 4);
        const auto& ranks = tab.at(0, 0);
        REQUIRE(ranks.count(0) == 1);
        CHECK(ranks.size() == 1);
        CHECK(ranks.at(0)[0].re.at0() == c);
    }
    SUBCASE("conformal slab quadratic tensor") {
        // Symbol (1/2) D + T^{ab} omega_a omega_b with T = -(1/4) d_n g^{ab};
        // homogenizing the constant with q(omega) = 1 must return
        // (1/2) g^{ab} D - (1/4) d_n g^{ab}.
        int k = 5;
        Jet3T<QuadRat> phi(k);
        phi.set(MIdx{0, 0, 1}, ScalarOps<QuadRat>::from_rat(rat(1, 4)));
        phi.set(MIdx{0, 0, 2}, ScalarOps<QuadRat>::from_rat(rat(-1, 6)));
        Jet3T<QuadRat> conf = jet_exp(phi.scaled(ScalarOps<QuadRat>::from_long(2)), k);
        auto ctx = std::make_shared<const MetricContext>(
            MetricJet(conf, Jet3T<QuadRat>(k), conf, k));
        const auto& m = ctx->metric();
        Jet3T<QuadRat> D = ctx->geo().D();
        QuadRat half = ScalarOps<QuadRat>::from_rat(rat(1, 2));
        QuadRat quarter = ScalarOps<QuadRat>::from_rat(rat(1, 4));

        SymbolSeries s(ctx, 1, 1);
        s.add_term(0, 0, 0, XiMonomial{}, CJet(D.scaled(half)));
        s.add_term(0, 0, 0, XiMonomial{2, 0, -2},
                   CJet(m.g_inv(1, 1).derivative(3).scaled(-quarter)));
        s.add_term(0, 0, 0, XiMonomial{1, 1, -2},
                   CJet(m.g_inv(1, 2).derivative(3).scaled(-quarter))
                       .scaled(ScalarOps<QuadRat>::from_long(2)));
        s.add_term(0, 0, 0, XiMonomial{0, 2, -2},
                   CJet(m.g_inv(2, 2).derivative(3).scaled(-quarter)));

        auto tab = omega_coeff_jets(s, 2);
        const auto& slots = tab.at(0, 0).at(2);
        auto expected = [&](int a, int b) {
            return (m.g_inv(a, b).scaled(half) * D -
                    m.g_inv(a, b).derivative(3).scaled(quarter))
                .boundary()
                .truncated(k - 2);
        };
        CHECK(jets_agree(slots[0].re.truncated(k - 2), expected(1, 1), k - 2));
        CHECK(jets_agree(slots[1].re.truncated(k - 2), expected(1, 2), k - 2));
        CHECK(jets_agree(slots[2].re.truncated(k - 2), expected(2, 2), k - 2));
        CHECK(slots[0].im.is_zero());
    }
    SUBCASE("degree bound is enforced") {
        auto ctx = euclid_ctx<QuadRat>(4);
        SymbolSeries s = scalar_term<QuadRat>(ctx, XiMonomial{3, 0, -3}, CJet::real_const(one));
        CHECK_THROWS_AS(omega_coeff_jets(s, 2), ContractError);
    }
}

TEST_CASE("degree bookkeeping through truncation") {
    std::mt19937 rng(83);
    auto ctx = random_ctx<QuadRat>(rng, 6);
    SymbolSeries a = random_symbol<QuadRat>(ctx, rng, 2, 2);
    CHECK(a.entire());
    SymbolSeries cut = a.truncated_below(0);
    if (a.bottom_degree() < 0) {
        CHECK_FALSE(cut.entire());
        CHECK(cut.floor_degree() == 0);
        CHECK_THROWS_AS(cut.part(-1), ContractError);
    }
    SymbolSeries prod = cut * a;
    CHECK(prod.floor_degree() == cut.floor_degree() + a.top_degree());
}
