#include "bnt/slab.hpp"

#include <algorithm>
#include <cmath>

namespace bnt {

namespace {

using Cd = std::complex<double>;
constexpr double kTau = 2.0 * std::numbers::pi;
const Cd kI{0.0, 1.0};

struct GVal {
    double g11, g12, g22, det, s;  // s = 1 / sqrt(det)
};

GVal metric_at(const MetricProfile& p, double x) {
    auto g = p.lower(x);
    GVal v{g[0], g[1], g[2], g[0] * g[2] - g[1] * g[1], 0.0};
    if (!(v.g11 > 0.0) || !(v.det > 0.0))
        throw ContractError("slab metric is not positive definite at x = " + std::to_string(x));
    v.s = 1.0 / std::sqrt(v.det);
    return v;
}

template <size_t N>
using State = std::array<Cd, N>;

using detail::integrate;
using detail::sup;

template <size_t N>
struct RawProfile {
    std::vector<double> x;
    std::vector<State<N>> y;     // renormalized states
    std::vector<double> logs;    // true value = y * exp(logs)
};

// Integrate over the node grid, renormalizing between segments so that
// exponentially growing fundamental solutions never overflow.
template <size_t N, class F>
RawProfile<N> integrate_profile(const F& f, double L, int steps, const State<N>& y0, double tol) {
    RawProfile<N> out;
    out.x.resize(static_cast<size_t>(steps) + 1);
    for (int j = 0; j <= steps; ++j) out.x[j] = -L + L * j / steps;
    out.x.back() = 0.0;
    out.y.reserve(out.x.size());
    out.logs.reserve(out.x.size());

    State<N> y = y0;
    double lg = 0.0;
    out.y.push_back(y);
    out.logs.push_back(lg);
    for (int j = 0; j < steps; ++j) {
        integrate(f, out.x[j], out.x[j + 1], y, tol);
        double m = sup(y);
        if (m > 1.0) {
            for (Cd& z : y) z /= m;
            lg += std::log(m);
        }
        out.y.push_back(y);
        out.logs.push_back(lg);
    }
    return out;
}

std::function<State<2>(double, const State<2>&)> beltrami_rhs(const MetricProfile& p,
                                                              double lambda, double xi1,
                                                              double xi2) {
    return [=, &p](double x, const State<2>& u) {
        GVal g = metric_at(p, x);
        Cd phi = xi1 * u[1] - xi2 * u[0];
        double a = g.s * lambda, b = g.s / lambda;
        State<2> d;
        d[0] = a * (-g.g12 * u[0] + g.g11 * u[1]) - b * xi1 * phi;
        d[1] = a * (-g.g22 * u[0] + g.g12 * u[1]) - b * xi2 * phi;
        return d;
    };
}

// Scalar Neumann problem in first-order form, state (phi, sqrt|g| phi').
std::function<State<2>(double, const State<2>&)> harmonic_rhs(const MetricProfile& p, double xi1,
                                                              double xi2) {
    return [=, &p](double x, const State<2>& y) {
        GVal g = metric_at(p, x);
        double Q = g.g22 * xi1 * xi1 - 2.0 * g.g12 * xi1 * xi2 + g.g11 * xi2 * xi2;
        return State<2>{g.s * y[1], g.s * Q * y[0]};
    };
}

void check_config(const SlabConfig& c, std::array<int, 2> k) {
    if (k[0] == 0 && k[1] == 0)
        throw ContractError("zero mode excluded: slab data has zero boundary mean");
    if (!(c.L > 0.0)) throw ContractError("slab thickness must be positive");
    if (!(c.ode_tol > 0.0)) throw ContractError("ODE tolerance must be positive");
    if (c.mode == SlabMode::beltrami && c.lambda == 0.0)
        throw ContractError("Beltrami slab mode needs lambda != 0");
}

int effective_steps(const SlabConfig& c, double xin) {
    int n = std::max(c.ode_steps, 16);
    n = std::max(n, static_cast<int>(std::ceil(xin * c.L / 40.0)));
    return n;
}

// Field evaluation anywhere in the slab: short re-integration of the mode
// ODE from the nearest stored node, then the plane-wave factor.
struct ModeField {
    const SlabConfig& c;
    const SlabModeSolution& s;
    std::function<State<2>(double, const State<2>&)> rhs;

    ModeField(const SlabConfig& cfg, const SlabModeSolution& sol) : c(cfg), s(sol) {
        if (c.mode == SlabMode::beltrami)
            rhs = beltrami_rhs(c.profile, c.lambda, s.xi[0], s.xi[1]);
        else
            rhs = harmonic_rhs(c.profile, s.xi[0], s.xi[1]);
    }

    State<2> profile_state(size_t j) const {
        if (c.mode == SlabMode::beltrami) return {s.u_t[j][0], s.u_t[j][1]};
        Cd phi = (std::abs(s.xi[0]) >= std::abs(s.xi[1])) ? s.u_t[j][0] / (kI * s.xi[0])
                                                          : s.u_t[j][1] / (kI * s.xi[1]);
        Cd psi = s.u_n[j] / metric_at(c.profile, s.x[j]).s;
        return {phi, psi};
    }

    std::array<Cd, 3> operator()(double x1, double x2, double x3) const {
        double step = s.x[1] - s.x[0];
        size_t j = static_cast<size_t>(
            std::clamp<long>(std::lround((x3 - s.x[0]) / step), 0, long(s.x.size()) - 1));
        State<2> y = profile_state(j);
        integrate(rhs, s.x[j], x3, y, c.ode_tol);
        Cd ph = std::exp(kI * (s.xi[0] * x1 + s.xi[1] * x2));
        if (c.mode == SlabMode::beltrami) {
            GVal g = metric_at(c.profile, x3);
            Cd un = kI * g.s / c.lambda * (s.xi[0] * y[1] - s.xi[1] * y[0]);
            return {y[0] * ph, y[1] * ph, un * ph};
        }
        GVal g = metric_at(c.profile, x3);
        return {kI * s.xi[0] * y[0] * ph, kI * s.xi[1] * y[0] * ph, g.s * y[1] * ph};
    }
};

using Vec3 = std::array<Cd, 3>;

template <class F>
Vec3 fd_dir(const F& f, const double p[3], int i, double h) {
    auto at = [&](double t) {
        double q[3] = {p[0], p[1], p[2]};
        q[i - 1] += t;
        return f(q);
    };
    Vec3 a = at(h), b = at(-h), c = at(2 * h), d = at(-2 * h), out;
    for (int j = 0; j < 3; ++j) out[j] = (8.0 * (a[j] - b[j]) - (c[j] - d[j])) / (12.0 * h);
    return out;
}

// *du at a point from difference quotients of u and exact metric values.
template <class F>
Vec3 star_du(const F& u, const double p[3], const MetricProfile& prof, double ht, double hn) {
    Vec3 d1 = fd_dir(u, p, 1, ht), d2 = fd_dir(u, p, 2, ht), d3 = fd_dir(u, p, 3, hn);
    GVal g = metric_at(prof, p[2]);
    Cd w23 = d2[2] - d3[1];  // d_2 u_3 - d_3 u_2
    Cd w31 = d3[0] - d1[2];
    Cd w12 = d1[1] - d2[0];
    return {g.s * (g.g11 * w23 + g.g12 * w31), g.s * (g.g12 * w23 + g.g22 * w31), g.s * w12};
}

// Codifferential of u via the divergence form.
template <class F>
Cd delta_u(const F& u, const double p[3], const MetricProfile& prof, double ht, double hn) {
    auto flux = [&](const double q[3], int j) -> Cd {
        GVal g = metric_at(prof, q[2]);
        Vec3 v = u(q);
        if (j == 1) return g.s * (g.g22 * v[0] - g.g12 * v[1]);
        if (j == 2) return g.s * (-g.g12 * v[0] + g.g11 * v[1]);
        return v[2] / g.s;
    };
    Cd sum = 0;
    for (int j = 1; j <= 3; ++j) {
        double h = (j == 3) ? hn : ht;
        auto at = [&](double t) {
            double q[3] = {p[0], p[1], p[2]};
            q[j - 1] += t;
            return flux(q, j);
        };
        sum += (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
    }
    return -metric_at(prof, p[2]).s * sum;
}

}  // namespace

MetricProfile euclidean_profile() {
    return {"euclidean", [](double) { return std::array<double, 3>{1.0, 0.0, 1.0}; }};
}

MetricProfile conformal_profile(double a) {
    return {"conformal", [a](double x) {
                double e = std::exp(2.0 * a * x);
                return std::array<double, 3>{e, 0.0, e};
            }};
}

MetricProfile sheared_profile(double s) {
    return {"sheared", [s](double x) {
                double t = s * x;
                return std::array<double, 3>{1.0 + t * t, t, 1.0};
            }};
}

MetricProfile jet_profile(const MetricJetT<double>& m) {
    std::array<std::vector<double>, 3> taylor;
    static const int idx[3][2] = {{1, 1}, {1, 2}, {2, 2}};
    for (int e = 0; e < 3; ++e) {
        for (const auto& [key, coeff] : m.g(idx[e][0], idx[e][1]).coeffs()) {
            MIdx mi = MIdx::unpack(key);
            if (coeff == 0.0) continue;
            if (mi.a1 != 0 || mi.a2 != 0)
                throw ContractError("slab profile must not depend on the tangential variables");
            if (taylor[e].size() <= static_cast<size_t>(mi.an)) taylor[e].resize(mi.an + 1, 0.0);
            taylor[e][mi.an] = coeff;
        }
    }
    return {"jet", [taylor](double x) {
                std::array<double, 3> g{};
                for (int e = 0; e < 3; ++e) {
                    double v = 0.0;
                    for (size_t d = taylor[e].size(); d-- > 0;) v = v * x + taylor[e][d];
                    g[e] = v;
                }
                return g;
            }};
}

SlabModeSolution solve_mode(const SlabConfig& c, std::array<int, 2> k) {
    check_config(c, k);
    SlabModeSolution out;
    out.k = k;
    out.xi = {kTau * k[0], kTau * k[1]};
    const double xi1 = out.xi[0], xi2 = out.xi[1];
    const double xin = std::hypot(xi1, xi2);
    const int steps = effective_steps(c, xin);

    if (c.mode == SlabMode::beltrami) {
        State<2> y0{xi1 / xin, xi2 / xin};  // far-wall normal trace vanishes on this ray
        auto prof = integrate_profile(beltrami_rhs(c.profile, c.lambda, xi1, xi2), c.L, steps,
                                      y0, c.ode_tol);
        const State<2>& top = prof.y.back();
        Cd cross = xi1 * top[1] - xi2 * top[0];
        double nrm = std::sqrt(std::norm(top[0]) + std::norm(top[1]));
        out.condition = xin * nrm / std::max(std::abs(cross), 1e-300);
        if (out.condition * c.singular_tol >= 1.0)
            throw BeltramiSingularValue(
                "boundary solve degenerate: lambda = " + std::to_string(c.lambda) +
                " is within tolerance of a Beltrami singular value");

        GVal g0 = metric_at(c.profile, 0.0);
        Cd w3 = kI * g0.s / c.lambda * cross;
        double lg_top = prof.logs.back();
        out.x = prof.x;
        out.u_t.resize(prof.x.size());
        out.u_n.resize(prof.x.size());
        for (size_t j = 0; j < prof.x.size(); ++j) {
            double resc = std::exp(prof.logs[j] - lg_top);
            Cd f = resc / w3;
            out.u_t[j] = {prof.y[j][0] * f, prof.y[j][1] * f};
            GVal g = metric_at(c.profile, prof.x[j]);
            out.u_n[j] =
                kI * g.s / c.lambda * (xi1 * out.u_t[j][1] - xi2 * out.u_t[j][0]);
        }
    } else {
        auto prof = integrate_profile(harmonic_rhs(c.profile, xi1, xi2), c.L, steps,
                                      State<2>{1.0, 0.0}, c.ode_tol);
        GVal g0 = metric_at(c.profile, 0.0);
        Cd phi0 = prof.y.back()[0], psi0 = prof.y.back()[1];
        double q0 = g0.s * g0.s *
                    (g0.g22 * xi1 * xi1 - 2.0 * g0.g12 * xi1 * xi2 + g0.g11 * xi2 * xi2);
        Cd denom = g0.s * psi0;
        if (std::abs(denom) <= 1e-300)
            throw InternalError("harmonic slab solve degenerated despite a definite form");
        out.condition = std::hypot(std::sqrt(q0) * std::abs(phi0), std::abs(denom)) /
                        std::abs(denom);

        double lg_top = prof.logs.back();
        out.x = prof.x;
        out.u_t.resize(prof.x.size());
        out.u_n.resize(prof.x.size());
        for (size_t j = 0; j < prof.x.size(); ++j) {
            double resc = std::exp(prof.logs[j] - lg_top);
            Cd phi = prof.y[j][0] * resc / denom;
            out.u_t[j] = {kI * xi1 * phi, kI * xi2 * phi};
            out.u_n[j] = metric_at(c.profile, prof.x[j]).s * prof.y[j][1] * resc / denom;
        }
    }
    out.nt_value = out.u_t.back();
    return out;
}

std::array<Cd, 2> nt_mode(const SlabConfig& c, std::array<int, 2> k) {
    return solve_mode(c, k).nt_value;
}

FieldResiduals slab_residuals(const SlabConfig& c, const SlabModeSolution& s) {
    ModeField field(c, s);
    auto u = [&](const double p[3]) { return field(p[0], p[1], p[2]); };

    const double lam = (c.mode == SlabMode::beltrami) ? c.lambda : 0.0;
    const double xin = std::hypot(s.xi[0], s.xi[1]);
    const double ht = 0.025 / xin;
    const double hn = std::min(0.025 / xin, 0.01 * c.L);
    const double Ht = 0.08 / xin;
    const double Hn = std::min(0.08 / xin, 0.04 * c.L);

    FieldResiduals r;
    for (double frac : {0.75, 0.55, 0.35, 0.2}) {
        for (auto [p1, p2] : {std::pair{0.0, 0.0}, {0.31, -0.12}}) {
            double p[3] = {p1, p2, -frac * c.L};
            Vec3 v = u(p);
            double nv = std::sqrt(std::norm(v[0]) + std::norm(v[1]) + std::norm(v[2]));
            double first = (std::abs(lam) + xin) * nv + 1e-300;
            double second = (lam * lam + xin * xin) * nv + 1e-300;

            Vec3 cu = star_du(u, p, c.profile, ht, hn);
            for (int i = 0; i < 3; ++i)
                r.curl = std::max(r.curl, std::abs(cu[i] - lam * v[i]) / first);

            r.div = std::max(r.div, std::abs(delta_u(u, p, c.profile, ht, hn)) / first);

            // (delta d + d delta) u via nested quotients
            auto inner_curl = [&](const double q[3]) {
                return star_du(u, q, c.profile, ht, hn);
            };
            Vec3 ddu = star_du(inner_curl, p, c.profile, Ht, Hn);
            Vec3 grad_div{};
            for (int i = 1; i <= 3; ++i) {
                double h = (i == 3) ? Hn : Ht;
                auto at = [&](double t) {
                    double q[3] = {p[0], p[1], p[2]};
                    q[i - 1] += t;
                    return delta_u(u, q, c.profile, ht, hn);
                };
                grad_div[i - 1] =
                    (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
            }
            for (int i = 0; i < 3; ++i) {
                Cd res = ddu[i] + grad_div[i] - lam * lam * v[i];
                r.laplace = std::max(r.laplace, std::abs(res) / second);
            }
        }
    }
    return r;
}

namespace detail {

void require_ray(const std::vector<std::array<int, 2>>& modes) {
    if (modes.size() < 6) throw ContractError("decay fit needs at least six modes");
    for (size_t i = 0; i + 1 < modes.size(); ++i) {
        long cross = long(modes[i][0]) * modes[i + 1][1] - long(modes[i][1]) * modes[i + 1][0];
        long dot = long(modes[i][0]) * modes[i + 1][0] + long(modes[i][1]) * modes[i + 1][1];
        if (cross != 0 || dot <= 0)
            throw ContractError("decay fit modes must lie on one ray");
        long n0 = long(modes[i][0]) * modes[i][0] + long(modes[i][1]) * modes[i][1];
        long n1 = long(modes[i + 1][0]) * modes[i + 1][0] + long(modes[i + 1][1]) * modes[i + 1][1];
        if (n1 <= n0) throw ContractError("decay fit modes must grow in magnitude");
    }
}

}  // namespace detail

}  // namespace bnt
