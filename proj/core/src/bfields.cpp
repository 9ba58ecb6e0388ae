#include "bnt/bfields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bnt/detail/numerics.hpp"

namespace bnt {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;
constexpr double kFourPi = 4.0 * std::numbers::pi;

Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 scl(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double nrm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Orthonormal frame spanning the plane orthogonal to the unit vector w.
// Without a hint the seed axis is the one least aligned with w, so the
// choice is deterministic and degrades for no w.
std::array<Vec3, 2> plane_frame(const Vec3& w, const Vec3& hint) {
    Vec3 seed = hint;
    if (nrm(seed) == 0.0) {
        int m = 0;
        for (int i = 1; i < 3; ++i)
            if (std::abs(w[i]) < std::abs(w[m])) m = i;
        seed = {};
        seed[m] = 1.0;
    }
    Vec3 e1 = sub(seed, scl(dot(seed, w), w));
    double n = nrm(e1);
    if (n <= 1e-8) throw ContractError("frame hint is parallel to the loop axis");
    e1 = scl(1.0 / n, e1);
    return {e1, cross(w, e1)};
}

Mat3 metric_value(const MetricField& metric, const Vec3& x) {
    Mat3 g = metric(x);
    double m2 = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    double det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1]) -
                 g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0]) +
                 g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
    if (!(g[0][0] > 0.0) || !(m2 > 0.0) || !(det > 0.0))
        throw ContractError("loop metric is not positive definite");
    return g;
}

Mat3 inverse3(const Mat3& g) {
    double det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1]) -
                 g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0]) +
                 g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
    Mat3 inv;
    inv[0][0] = (g[1][1] * g[2][2] - g[1][2] * g[2][1]) / det;
    inv[0][1] = (g[0][2] * g[2][1] - g[0][1] * g[2][2]) / det;
    inv[0][2] = (g[0][1] * g[1][2] - g[0][2] * g[1][1]) / det;
    inv[1][0] = (g[1][2] * g[2][0] - g[1][0] * g[2][2]) / det;
    inv[1][1] = (g[0][0] * g[2][2] - g[0][2] * g[2][0]) / det;
    inv[1][2] = (g[0][2] * g[1][0] - g[0][0] * g[1][2]) / det;
    inv[2][0] = (g[1][0] * g[2][1] - g[1][1] * g[2][0]) / det;
    inv[2][1] = (g[0][1] * g[2][0] - g[0][0] * g[2][1]) / det;
    inv[2][2] = (g[0][0] * g[1][1] - g[0][1] * g[1][0]) / det;
    return inv;
}

// Geodesic right-hand side with Christoffel symbols from centered metric
// differences; h balances truncation against rounding at ~1e-11.
std::array<double, 6> geodesic_rhs(const MetricField& metric, const std::array<double, 6>& y) {
    const double h = 1e-5;
    Vec3 x{y[0], y[1], y[2]}, v{y[3], y[4], y[5]};
    Mat3 g = metric_value(metric, x);
    Mat3 ginv = inverse3(g);
    double dg[3][3][3];
    for (int m = 0; m < 3; ++m) {
        Vec3 xp = x, xm = x;
        xp[m] += h;
        xm[m] -= h;
        Mat3 gp = metric_value(metric, xp), gm = metric_value(metric, xm);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) dg[m][i][j] = (gp[i][j] - gm[i][j]) / (2.0 * h);
    }
    std::array<double, 6> out{v[0], v[1], v[2], 0.0, 0.0, 0.0};
    for (int k = 0; k < 3; ++k) {
        double acc = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double gamma = 0.0;
                for (int l = 0; l < 3; ++l)
                    gamma += ginv[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                acc += 0.5 * gamma * v[i] * v[j];
            }
        out[3 + k] = -acc;
    }
    return out;
}

// Tangents of a closed curve from its uniform nodes, eighth-order periodic
// central differences; the antisymmetric stencil makes the tangent sum
// vanish identically.
std::vector<Vec3> periodic_tangents(const std::vector<Vec3>& nodes) {
    const int n = static_cast<int>(nodes.size());
    const double dt = kTau / n;
    static const double c[4] = {672.0, -168.0, 32.0, -3.0};
    std::vector<Vec3> out(nodes.size());
    for (int i = 0; i < n; ++i) {
        Vec3 acc{};
        for (int k = 1; k <= 4; ++k) {
            const Vec3& fw = nodes[(i + k) % n];
            const Vec3& bw = nodes[(i - k + n) % n];
            acc = add(acc, scl(c[k - 1], sub(fw, bw)));
        }
        out[i] = scl(1.0 / (840.0 * dt), acc);
    }
    return out;
}

void sample_curve(const CurrentLoop& loop, int n, std::vector<Vec3>& nodes,
                  std::vector<Vec3>& tangents) {
    nodes.resize(n);
    for (int i = 0; i < n; ++i) nodes[i] = loop.at(kTau * i / n);
    if (loop.vel) {
        tangents.resize(n);
        for (int i = 0; i < n; ++i) tangents[i] = loop.vel(kTau * i / n);
    } else {
        tangents = periodic_tangents(nodes);
    }
}

// Integrand of b = (curl + lambda)(phi_lambda * J) at one loop sample.
Vec3 kernel_term(double lambda, const Vec3& x, const Vec3& gam, const Vec3& dgam) {
    Vec3 d = sub(x, gam);
    double r = nrm(d);
    double phi = std::cos(lambda * r) / (kFourPi * r);
    double dphi = -(lambda * r * std::sin(lambda * r) + std::cos(lambda * r)) /
                  (kFourPi * r * r);
    return add(scl(dphi / r, cross(d, dgam)), scl(lambda * phi, dgam));
}

Vec3 quad_field(double lambda, const Vec3& x, const std::vector<Vec3>& nodes,
                const std::vector<Vec3>& tangents) {
    Vec3 sum{};
    for (size_t i = 0; i < nodes.size(); ++i)
        sum = add(sum, kernel_term(lambda, x, nodes[i], tangents[i]));
    return scl(kTau / nodes.size(), sum);
}

double dist_to_loop(const CurrentLoop& loop, const Vec3& x) {
    if (!loop.vel) {
        // geodesic mode: nearest node plus a parabolic correction in d^2
        size_t best = 0;
        double bd = std::numeric_limits<double>::max();
        for (size_t i = 0; i < loop.nodes.size(); ++i) {
            double d = nrm(sub(x, loop.nodes[i]));
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        size_t n = loop.nodes.size();
        auto d2 = [&](size_t i) {
            Vec3 e = sub(x, loop.nodes[i % n]);
            return dot(e, e);
        };
        double fm = d2(best + n - 1), f0 = d2(best), fp = d2(best + 1);
        double curv = fm + fp - 2.0 * f0;
        double low = f0 - (curv > 0.0 ? (fp - fm) * (fp - fm) / (8.0 * curv) : 0.0);
        return std::sqrt(std::max(low, 0.0));
    }
    Vec3 r = sub(x, loop.center);
    double h = dot(r, loop.omega);
    double rho = nrm(sub(r, scl(h, loop.omega)));
    return std::hypot(rho - loop.delta, h);
}

// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
template <std::size_t N>
double min_eig_sym(std::array<std::array<double, N>, N> a) {
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            scale += std::abs(a[i][i]);
            for (std::size_t j = i + 1; j < N; ++j) off += std::abs(a[i][j]);
        }
        if (off <= 1e-15 * (scale + off)) break;
        for (std::size_t p = 0; p < N; ++p)
            for (std::size_t q = p + 1; q < N; ++q) {
                if (a[p][q] == 0.0) continue;
                double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < N; ++k) {
                    double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < N; ++k) {
                    double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
    }
    double m = a[0][0];
    for (std::size_t i = 1; i < N; ++i) m = std::min(m, a[i][i]);
    return m;
}

std::vector<double> field_samples(const std::vector<Vec3>& patch, const CurrentLoop& loop,
                                  double lambda) {
    std::vector<double> out;
    out.reserve(3 * patch.size());
    for (const Vec3& p : patch) {
        Vec3 v = bfield_eval(loop, lambda, p).value;
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

}  // namespace

CurrentLoop make_loop(const Vec3& center, const Vec3& omega, double delta, int n,
                      const MetricField& metric, const Vec3& e1_hint) {
    if (std::abs(nrm(omega) - 1.0) > 1e-9)
        throw ContractError("loop axis must be a unit vector");
    if (!(delta > 0.0)) throw ContractError("loop radius must be positive");
    if (n < 16) throw ContractError("a loop needs at least sixteen nodes");

    CurrentLoop loop;
    loop.center = center;
    loop.omega = scl(1.0 / nrm(omega), omega);
    loop.delta = delta;
    auto [e1, e2] = plane_frame(loop.omega, e1_hint);

    if (!metric) {
        Vec3 c = center;
        loop.at = [c, e1, e2, delta](double t) {
            return add(c, add(scl(delta * std::cos(t), e1), scl(delta * std::sin(t), e2)));
        };
        loop.vel = [e1, e2, delta](double t) {
            return add(scl(-delta * std::sin(t), e1), scl(delta * std::cos(t), e2));
        };
    } else {
        Vec3 c = center;
        loop.metric = metric;
        loop.at = [c, e1, e2, delta, metric](double t) {
            Vec3 v = add(scl(delta * std::cos(t), e1), scl(delta * std::sin(t), e2));
            std::array<double, 6> y{c[0], c[1], c[2], v[0], v[1], v[2]};
            auto rhs = [&metric](double, const std::array<double, 6>& s) {
                return geodesic_rhs(metric, s);
            };
            detail::integrate(rhs, 0.0, 1.0, y, 1e-12);
            for (double s : y)
                if (!std::isfinite(s)) throw ContractError("geodesic integration failed");
            return Vec3{y[0], y[1], y[2]};
        };
    }
    sample_curve(loop, n, loop.nodes, loop.tangents);
    return loop;
}

double loop_functional(const CurrentLoop& loop, const std::function<Vec3(const Vec3&)>& a) {
    double sum = 0.0;
    for (size_t i = 0; i < loop.nodes.size(); ++i)
        sum += dot(a(loop.nodes[i]), loop.tangents[i]);
    return kTau / loop.nodes.size() * sum;
}

BFieldSample bfield_eval(const CurrentLoop& loop, double lambda, const Vec3& x) {
    BFieldSample out;
    out.x = x;
    out.dist_to_loop = dist_to_loop(loop, x);
    if (out.dist_to_loop <= 1e-14 * loop.delta)
        throw ContractError("evaluation point lies on the loop");

    const int cap = 1 << 17;
    int n = static_cast<int>(loop.nodes.size());
    Vec3 val = quad_field(lambda, x, loop.nodes, loop.tangents);
    bool converged = false;
    std::vector<Vec3> nodes, tangents;
    while (n < cap) {
        n *= 2;
        sample_curve(loop, n, nodes, tangents);
        Vec3 cur = quad_field(lambda, x, nodes, tangents);
        double gap = nrm(sub(cur, val));
        val = cur;
        if (gap <= 1e-10 * (1.0 + nrm(cur))) {
            converged = true;
            break;
        }
    }
    out.value = val;
    out.near_loop = !converged || out.dist_to_loop < 3.0 * (kTau * loop.delta / n);
    return out;
}

ApproachFit asymptotic_fit(const CurrentLoop& loop, double lambda,
                           const std::function<Vec3(double)>& path, int samples) {
    if (samples < 4) throw ContractError("exponent fit needs at least four samples");

    // Requested distances cover [1e-3, 1e-2] of the radius; farther out the
    // curvature of the wire pollutes the line-singularity exponent with
    // d log d corrections.
    ApproachFit fit;
    double prev = std::numeric_limits<double>::max();
    for (int j = 0; j < samples; ++j) {
        double d = loop.delta * std::pow(10.0, -2.0 - double(j) / (samples - 1));
        BFieldSample s = bfield_eval(loop, lambda, path(d));
        if (s.dist_to_loop >= prev || s.dist_to_loop > 0.03 * loop.delta)
            throw ContractError("approach path does not close in on the loop");
        prev = s.dist_to_loop;
        fit.log_d.push_back(std::log(s.dist_to_loop));
        fit.log_b.push_back(std::log(nrm(s.value)));
    }
    if (prev > 3e-3 * loop.delta)
        throw ContractError("approach path does not close in on the loop");

    auto lf = detail::fit_line(fit.log_d, fit.log_b);
    fit.slope = lf.slope;
    fit.intercept = lf.intercept;
    return fit;
}

EmbeddingReport embedding_probe(const std::vector<SphereSample>& grid,
                                const std::vector<Vec3>& patch, double lambda, double delta,
                                int nodes) {
    if (grid.size() < 2) throw ContractError("injectivity probe needs at least two loops");
    if (patch.empty()) throw ContractError("embedding probe needs patch points");

    auto loop_of = [&](const Vec3& base, const Vec3& w) {
        return make_loop(base, w, delta, nodes);
    };
    const double margin = 3.0 * (kTau * delta / nodes);
    for (const SphereSample& s : grid) {
        CurrentLoop loop = loop_of(s.base, s.omega);
        for (const Vec3& p : patch)
            if (dist_to_loop(loop, p) < margin)
                throw ContractError("patch intersects a loop");
    }

    EmbeddingReport rep;
    rep.grid_size = grid.size();
    rep.patch_size = patch.size();

    std::vector<std::vector<double>> b;
    for (const SphereSample& s : grid)
        b.push_back(field_samples(patch, loop_of(s.base, s.omega), lambda));

    rep.min_pair_distance = std::numeric_limits<double>::max();
    for (size_t i = 0; i < b.size(); ++i)
        for (size_t j = i + 1; j < b.size(); ++j) {
            double d2 = 0.0;
            for (size_t k = 0; k < b[i].size(); ++k)
                d2 += (b[i][k] - b[j][k]) * (b[i][k] - b[j][k]);
            rep.min_pair_distance = std::min(rep.min_pair_distance, std::sqrt(d2));
        }

    // Jacobian in the five bundle directions: three base shifts and two
    // axis rotations toward the orthogonal frame.
    const double h = 1e-3;
    rep.min_jacobian_sv = std::numeric_limits<double>::max();
    for (const SphereSample& s : grid) {
        auto [t1, t2] = plane_frame(scl(1.0 / nrm(s.omega), s.omega), {0.0, 0.0, 0.0});
        std::vector<std::vector<double>> cols;
        for (int k = 0; k < 3; ++k) {
            Vec3 bp = s.base, bm = s.base;
            bp[k] += h;
            bm[k] -= h;
            auto fp = field_samples(patch, loop_of(bp, s.omega), lambda);
            auto fm = field_samples(patch, loop_of(bm, s.omega), lambda);
            std::vector<double> col(fp.size());
            for (size_t i = 0; i < fp.size(); ++i) col[i] = (fp[i] - fm[i]) / (2.0 * h);
            cols.push_back(std::move(col));
        }
        for (const Vec3& tau : {t1, t2}) {
            Vec3 wp = add(scl(std::cos(h), s.omega), scl(std::sin(h), tau));
            Vec3 wm = add(scl(std::cos(h), s.omega), scl(-std::sin(h), tau));
            auto fp = field_samples(patch, loop_of(s.base, wp), lambda);
            auto fm = field_samples(patch, loop_of(s.base, wm), lambda);
            std::vector<double> col(fp.size());
            for (size_t i = 0; i < fp.size(); ++i) col[i] = (fp[i] - fm[i]) / (2.0 * h);
            cols.push_back(std::move(col));
        }
        std::array<std::array<double, 5>, 5> jtj{};
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j)
                for (size_t k = 0; k < cols[i].size(); ++k) jtj[i][j] += cols[i][k] * cols[j][k];
        double ev = min_eig_sym(jtj);
        rep.min_jacobian_sv = std::min(rep.min_jacobian_sv, std::sqrt(std::max(ev, 0.0)));
    }
    return rep;
}

}  // namespace bnt
