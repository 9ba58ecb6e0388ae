#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <numbers>

#include "bnt/slab.hpp"
#include "test_util.hpp"

using namespace bnt;
using Cd = std::complex<double>;

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;
const Cd kI{0.0, 1.0};

template <class S>
using Ctx = std::shared_ptr<const MetricContextT<S>>;

template <class S>
Ctx<S> wrap(MetricJetT<S> m) {
    return std::make_shared<const MetricContextT<S>>(std::move(m));
}

template <class S>
Ctx<S> euclid_ctx(int k) {
    Jet3T<S> one = Jet3T<S>::constant(ScalarOps<S>::one(), k);
    return wrap(MetricJetT<S>(one, Jet3T<S>(k), one, k));
}

QuadRat qr(long num, long den = 1) { return ScalarOps<QuadRat>::from_rat(rat(num, den)); }

// Closed-form solution of the constant-coefficient euclidean mode with
// xi = (K, 0): the tangential system decouples into u2'' = (K^2 - l^2) u2
// with u2(-L) = 0 and the normal trace pinned to one at the boundary.
struct EuclidMode {
    double K, lam, L, mu;

    EuclidMode(double K_, double lam_, double L_) : K(K_), lam(lam_), L(L_) {
        mu = std::sqrt(K * K - lam * lam);
    }
    Cd u2(double x) const { return -kI * lam / (K * std::sinh(mu * L)) * std::sinh(mu * (x + L)); }
    Cd u1(double x) const {
        return kI * mu / (K * std::sinh(mu * L)) * std::cosh(mu * (x + L));
    }
    Cd u3(double x) const { return kI * K / lam * u2(x); }
};

double dist2(const std::array<Cd, 2>& a, const std::array<Cd, 2>& b) {
    return std::max(std::abs(a[0] - b[0]), std::abs(a[1] - b[1]));
}

// Fourth-order central difference, step h.
template <class F>
Cd fd4(const F& f, double h) {
    return (8.0 * (f(h) - f(-h)) - (f(2 * h) - f(-2 * h))) / (12.0 * h);
}

}  // namespace

TEST_CASE("euclidean mode solution matches the constant-coefficient closed form") {
    SlabConfig c;
    c.lambda = 1.0;
    auto s = solve_mode(c, {1, 0});
    EuclidMode ref(kTau, c.lambda, c.L);

    REQUIRE(s.x.size() == s.u_t.size());
    REQUIRE(s.x.size() == s.u_n.size());
    CHECK(s.x.front() == doctest::Approx(-1.0));
    CHECK(s.x.back() == doctest::Approx(0.0));

    double worst = 0;
    for (size_t j = 0; j < s.x.size(); ++j) {
        worst = std::max(worst, std::abs(s.u_t[j][0] - ref.u1(s.x[j])));
        worst = std::max(worst, std::abs(s.u_t[j][1] - ref.u2(s.x[j])));
        worst = std::max(worst, std::abs(s.u_n[j] - ref.u3(s.x[j])));
    }
    CHECK(worst <= 1e-8);

    CHECK(std::abs(s.u_n.front()) <= 1e-12);
    CHECK(std::abs(s.u_n.back() - 1.0) <= 1e-12);
    CHECK(std::abs(s.nt_value[0] - ref.u1(0)) <= 1e-9);
    CHECK(std::abs(s.nt_value[1] - ref.u2(0)) <= 1e-9);
    CHECK(s.condition >= 1.0);
}

TEST_CASE("normal trace and algebraic constraint hold on curved profiles") {
    for (auto [profile, lam, k1, k2] :
         {std::tuple{conformal_profile(0.3), 1.5, 1, -1},
          std::tuple{sheared_profile(0.4), 1.0, 2, 1}}) {
        SlabConfig c;
        c.profile = profile;
        c.lambda = lam;
        auto s = solve_mode(c, {k1, k2});
        double xi1 = kTau * k1, xi2 = kTau * k2;

        CHECK(std::abs(s.u_n.front()) <= 1e-12);
        CHECK(std::abs(s.u_n.back() - 1.0) <= 1e-12);
        for (size_t j = 0; j < s.x.size(); ++j) {
            auto g = c.profile.lower(s.x[j]);
            double sd = 1.0 / std::sqrt(g[0] * g[2] - g[1] * g[1]);
            Cd rhs = kI * sd / lam * (xi1 * s.u_t[j][1] - xi2 * s.u_t[j][0]);
            CHECK(std::abs(s.u_n[j] - rhs) <= 1e-12 * (1.0 + std::abs(s.u_n[j])));
        }
    }
}

TEST_CASE("hand-rolled finite differences confirm the field equation") {
    // Oracle fully independent of the module: closed-form euclidean mode,
    // curl computed from 3-D difference quotients of the plane-wave field.
    double lam = 1.0, L = 1.0, K = kTau;
    EuclidMode ref(K, lam, L);
    auto field = [&](double x1, double, double x3) {
        Cd ph = std::exp(kI * (K * x1));
        return std::array<Cd, 3>{ref.u1(x3) * ph, ref.u2(x3) * ph, ref.u3(x3) * ph};
    };
    double p[3] = {0.17, -0.4, -0.37};
    double h = 5e-3;
    auto d = [&](int i, int j) {
        return fd4(
            [&](double t) {
                double q[3] = {p[0], p[1], p[2]};
                q[i - 1] += t;
                return field(q[0], q[1], q[2])[j - 1];
            },
            h);
    };
    auto u = field(p[0], p[1], p[2]);
    Cd r1 = d(2, 3) - d(3, 2) - lam * u[0];
    Cd r2 = d(3, 1) - d(1, 3) - lam * u[1];
    Cd r3 = d(1, 2) - d(2, 1) - lam * u[2];
    Cd dv = d(1, 1) + d(2, 2) + d(3, 3);
    double scale = (lam + K) * std::abs(u[0]);
    CHECK(std::abs(r1) / scale <= 1e-6);
    CHECK(std::abs(r2) / scale <= 1e-6);
    CHECK(std::abs(r3) / scale <= 1e-6);
    CHECK(std::abs(dv) / scale <= 1e-6);
}

TEST_CASE("finite-difference residuals vanish on slab solutions") {
    struct Case {
        MetricProfile profile;
        double lam;
        std::array<int, 2> k;
        SlabMode mode;
    };
    for (const Case& tc : {Case{euclidean_profile(), 1.0, {1, 0}, SlabMode::beltrami},
                           Case{conformal_profile(0.3), 2.5, {1, 1}, SlabMode::beltrami},
                           Case{sheared_profile(0.4), 1.0, {2, -1}, SlabMode::beltrami},
                           Case{euclidean_profile(), 0.0, {1, 0}, SlabMode::harmonic},
                           Case{sheared_profile(0.4), 0.0, {0, 2}, SlabMode::harmonic}}) {
        SlabConfig c;
        c.profile = tc.profile;
        c.lambda = tc.lam;
        c.mode = tc.mode;
        auto s = solve_mode(c, tc.k);
        auto r = slab_residuals(c, s);
        CAPTURE(tc.k[0]);
        CAPTURE(tc.k[1]);
        CHECK(r.curl <= 1e-6);
        CHECK(r.div <= 1e-6);
        CHECK(r.laplace <= 1e-5);
    }
}

TEST_CASE("harmonic euclidean mode reproduces the cosh extension") {
    SlabConfig c;
    c.mode = SlabMode::harmonic;
    auto s = solve_mode(c, {2, 1});
    double xi1 = kTau * 2, xi2 = kTau;
    double n = std::hypot(xi1, xi2);

    // phi = cosh(n (x+L)) / (n sinh(n L)) has unit normal derivative at 0.
    double worst = 0;
    for (size_t j = 0; j < s.x.size(); ++j) {
        double ph = std::cosh(n * (s.x[j] + c.L)) / (n * std::sinh(n * c.L));
        double dph = std::sinh(n * (s.x[j] + c.L)) / std::sinh(n * c.L);
        worst = std::max(worst, std::abs(s.u_t[j][0] - kI * xi1 * ph));
        worst = std::max(worst, std::abs(s.u_t[j][1] - kI * xi2 * ph));
        worst = std::max(worst, std::abs(s.u_n[j] - dph));
    }
    CHECK(worst <= 1e-8);

    double coth = std::cosh(n * c.L) / std::sinh(n * c.L);
    CHECK(std::abs(s.nt_value[0] - kI * xi1 / n * coth) <= 1e-9);
    CHECK(std::abs(s.nt_value[1] - kI * xi2 / n * coth) <= 1e-9);
    // far-wall correction is exponentially small at this frequency
    CHECK(std::abs(s.nt_value[0] - kI * xi1 / n) <= 1e-10);
    CHECK(std::abs(s.nt_value[1] - kI * xi2 / n) <= 1e-10);

    // the harmonic solve does not look at lambda
    SlabConfig c5 = c;
    c5.lambda = 5.0;
    auto s5 = solve_mode(c5, {2, 1});
    CHECK(dist2(s5.nt_value, s.nt_value) <= 1e-15);
}

TEST_CASE("normal-to-tangential values approach the principal symbol") {
    SlabConfig c;
    c.lambda = 1.0;
    for (int m : {4, 8}) {
        double K = kTau * m;
        auto nt = nt_mode(c, {m, 0});
        std::array<Cd, 2> lead{kI, 0.0};
        double d0 = dist2(nt, lead);
        CHECK(d0 * K / c.lambda == doctest::Approx(1.0).epsilon(0.05));

        // next term: i lam (xi_2, -xi_1) / |xi|^2, then lam^2 / (2 |xi|^2) down
        std::array<Cd, 2> r{(nt[0] - kI) * K, (nt[1] - Cd{0.0}) * K + kI * c.lambda};
        double d1 = std::max(std::abs(r[0]), std::abs(r[1]));
        CHECK(d1 * 2.0 * K / (c.lambda * c.lambda) == doctest::Approx(1.0).epsilon(0.1));
    }
}

TEST_CASE("mode values obey conjugate symmetry") {
    SlabConfig c;
    c.profile = sheared_profile(0.5);
    c.lambda = 1.3;
    auto plus = nt_mode(c, {2, 1});
    auto minus = nt_mode(c, {-2, -1});
    CHECK(std::abs(minus[0] - std::conj(plus[0])) <= 1e-12);
    CHECK(std::abs(minus[1] - std::conj(plus[1])) <= 1e-12);
}

TEST_CASE("decay fit measures the remainder order") {
    auto ctx = euclid_ctx<QuadRat>(5);
    auto nt = nt_symbol(ctx, qr(1, 2), -2);
    SlabConfig c;
    c.lambda = 0.5;
    std::vector<std::array<int, 2>> modes{{4, 0}, {5, 0}, {6, 0}, {7, 0},
                                          {8, 0}, {9, 0}, {10, 0}, {12, 0}};
    auto f0 = symbol_decay_fit(c, modes, nt, 0);
    CHECK(f0.slope <= -0.8);
    CHECK(f0.slope >= -1.15);
    auto f1 = symbol_decay_fit(c, modes, nt, 1);
    CHECK(f1.slope <= -1.8);
    CHECK(f1.slope >= -2.25);
}

TEST_CASE("a corrupted symbol degrades the decay order") {
    auto ctx = euclid_ctx<QuadRat>(5);
    auto nt = nt_symbol(ctx, qr(1, 2), -2);
    NTSymbolT<QuadRat> bad = nt;
    SymbolSeriesT<QuadRat> junk(ctx, 2, 1);
    junk.add_term(-1, 0, 0, XiMonomial{1, 0, -2}, CJetT<QuadRat>::real_const(qr(1, 10)));
    bad.sigma += junk;

    SlabConfig c;
    c.lambda = 0.5;
    std::vector<std::array<int, 2>> modes{{4, 0}, {5, 0}, {6, 0}, {7, 0},
                                          {8, 0}, {9, 0}, {10, 0}, {12, 0}};
    auto f1 = symbol_decay_fit(c, modes, bad, 1);
    CHECK(f1.slope <= -0.85);
    CHECK(f1.slope >= -1.2);
}

TEST_CASE("decay fit validates the curved-metric symbol") {
    const int K = 6;
    Jet3T<QuadRat> gd =
        Jet3T<QuadRat>::constant(qr(1), K) + Jet3T<QuadRat>::variable(3, K).scaled(qr(1, 4));
    auto ctx = wrap(MetricJetT<QuadRat>(gd, Jet3T<QuadRat>(K), gd, K));
    auto nt = nt_symbol(ctx, qr(1, 2), -2);

    Jet3T<double> gdd;
    gdd.set(MIdx{}, 1.0);
    gdd.set(MIdx{0, 0, 1}, 0.25);
    MetricJetT<double> md(gdd, Jet3T<double>(), gdd, K);

    SlabConfig c;
    c.profile = jet_profile(md);
    c.lambda = 0.5;
    std::vector<std::array<int, 2>> modes{{4, 0}, {5, 0}, {6, 0}, {7, 0}, {8, 0}, {9, 0}, {10, 0}};
    auto f1 = symbol_decay_fit(c, modes, nt, 1);
    CHECK(f1.slope <= -1.8);
    CHECK(f1.slope >= -2.3);

    // pointwise: three symbol terms against the ODE value
    auto ntv = nt_mode(c, {6, 0});
    double x0[3] = {0, 0, 0};
    Cd sum0 = 0, sum1 = 0;
    for (int m = 0; m >= -2; --m) {
        CMat v = nt.sigma.part(m).eval(x0, kTau * 6, 0.0);
        sum0 += v.at(0, 0);
        sum1 += v.at(1, 0);
    }
    CHECK(std::abs(ntv[0] - sum0) <= 1e-4);
    CHECK(std::abs(ntv[1] - sum1) <= 1e-4);
}

TEST_CASE("boundary solve conditioning blows up at a Beltrami singular value") {
    // euclidean, xi = (2 pi, 0), L = 1: tangent eigenfields appear at
    // lambda^2 = (2 pi)^2 + (j pi)^2
    double lam_star = std::sqrt(kTau * kTau + std::numbers::pi * std::numbers::pi);
    SlabConfig c;
    std::vector<double> conds;
    for (double gap : {0.5, 0.2, 0.1, 0.05, 0.02, 0.01}) {
        c.lambda = lam_star - gap;
        conds.push_back(solve_mode(c, {1, 0}).condition);
    }
    for (size_t i = 0; i + 1 < conds.size(); ++i) CHECK(conds[i] < conds[i + 1]);
    CHECK(conds.back() >= 10.0 * conds.front());

    SlabConfig cs;
    cs.lambda = lam_star;
    cs.singular_tol = 1e-6;
    CHECK_THROWS_AS(solve_mode(cs, {1, 0}), BeltramiSingularValue);

    // smooth dependence away from the singular set
    SlabConfig ca;
    ca.lambda = 2.0;
    auto sa = solve_mode(ca, {1, 0});
    ca.lambda = 2.0 + 1e-6;
    auto sb = solve_mode(ca, {1, 0});
    double worst = 0;
    for (size_t j = 0; j < sa.x.size(); ++j) worst = std::max(worst, dist2(sa.u_t[j], sb.u_t[j]));
    CHECK(worst <= 1e-3);
}

TEST_CASE("jet profiles evaluate the truncated Taylor expansion") {
    Jet3T<double> g11, g12, g22;
    g11.set(MIdx{}, 1.0);
    g11.set(MIdx{0, 0, 1}, 0.5);
    g11.set(MIdx{0, 0, 2}, 0.25);
    g12.set(MIdx{0, 0, 1}, -0.1);
    g22.set(MIdx{}, 2.0);
    MetricJetT<double> m(g11, g12, g22, 4);
    auto p = jet_profile(m);
    double x = -0.3;
    auto g = p.lower(x);
    CHECK(g[0] == doctest::Approx(1.0 + 0.5 * x + 0.25 * x * x).epsilon(1e-14));
    CHECK(g[1] == doctest::Approx(-0.1 * x).epsilon(1e-14));
    CHECK(g[2] == doctest::Approx(2.0).epsilon(1e-14));

    MetricProfile handmade{"poly", [](double t) {
                               return std::array<double, 3>{1.0 + 0.5 * t + 0.25 * t * t, -0.1 * t,
                                                            2.0};
                           }};
    SlabConfig cj, ch;
    cj.profile = p;
    ch.profile = handmade;
    cj.lambda = ch.lambda = 1.2;
    auto a = nt_mode(cj, {1, 1});
    auto b = nt_mode(ch, {1, 1});
    CHECK(dist2(a, b) <= 1e-12);
}

TEST_CASE("degenerate slab configurations are rejected") {
    SlabConfig c;
    CHECK_THROWS_AS(solve_mode(c, {0, 0}), ContractError);
    c.lambda = 0.0;
    CHECK_THROWS_AS(solve_mode(c, {1, 0}), ContractError);
    c.lambda = 1.0;
    c.L = -1.0;
    CHECK_THROWS_AS(solve_mode(c, {1, 0}), ContractError);

    // tangential dependence has no Fourier decoupling
    Jet3T<double> bad;
    bad.set(MIdx{}, 1.0);
    bad.set(MIdx{1, 0, 0}, 0.3);
    Jet3T<double> one;
    one.set(MIdx{}, 1.0);
    CHECK_THROWS_AS(jet_profile(MetricJetT<double>(bad, Jet3T<double>(), one, 3)), ContractError);

    // profile losing positivity inside the slab
    Jet3T<double> sink;
    sink.set(MIdx{}, 1.0);
    sink.set(MIdx{0, 0, 1}, 2.0);
    SlabConfig cb;
    cb.profile = jet_profile(MetricJetT<double>(sink, Jet3T<double>(), one, 3));
    cb.lambda = 1.0;
    CHECK_THROWS_AS(solve_mode(cb, {1, 0}), ContractError);
}

TEST_CASE("decay fit rejects unusable mode lists") {
    auto ctx = euclid_ctx<QuadRat>(3);
    auto nt = nt_symbol(ctx, qr(1, 2), -1);
    SlabConfig c;
    c.lambda = 0.5;
    std::vector<std::array<int, 2>> few{{4, 0}, {5, 0}, {6, 0}, {7, 0}, {8, 0}};
    CHECK_THROWS_AS(symbol_decay_fit(c, few, nt, 0), ContractError);
    std::vector<std::array<int, 2>> bent{{4, 0}, {5, 0}, {6, 0}, {7, 0}, {8, 1}, {9, 0}};
    CHECK_THROWS_AS(symbol_decay_fit(c, bent, nt, 0), ContractError);
    std::vector<std::array<int, 2>> shrink{{4, 0}, {5, 0}, {6, 0}, {7, 0}, {8, 0}, {7, 0}};
    CHECK_THROWS_AS(symbol_decay_fit(c, shrink, nt, 0), ContractError);
    std::vector<std::array<int, 2>> good{{4, 0}, {5, 0}, {6, 0}, {7, 0}, {8, 0}, {9, 0}};
    CHECK_THROWS_AS(symbol_decay_fit(c, good, nt, 2), ContractError);
}
