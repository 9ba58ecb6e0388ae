#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "bnt/detail/numerics.hpp"
#include "bnt/nt_map.hpp"

namespace bnt {

// Flat-torus slab -L <= x^3 <= 0 with an x'-independent metric; data lives
// on the x^3 = 0 face, the far face carries the zero normal datum.  Modes
// e^{i xi x'} with xi = 2 pi k decouple into 1-D problems in x^3, which is
// the ground-truth side of the symbol pipeline.

struct MetricProfile {
    std::string name;
    std::function<std::array<double, 3>(double)> lower;  // {g_11, g_12, g_22}(x^3)
};

MetricProfile euclidean_profile();
MetricProfile conformal_profile(double a);  // e^{2 a x^3} delta
MetricProfile sheared_profile(double s);    // unit-determinant shear, g_12 = s x^3
MetricProfile jet_profile(const MetricJetT<double>& m);  // Taylor polynomial along the normal

enum class SlabMode { beltrami, harmonic };

struct SlabConfig {
    MetricProfile profile = euclidean_profile();
    double L = 1.0;
    double lambda = 1.0;
    SlabMode mode = SlabMode::beltrami;
    std::vector<std::array<int, 2>> modes;  // lattice indices, xi = 2 pi k, k != 0
    int ode_steps = 400;
    double ode_tol = 1e-10;
    double singular_tol = 1e-8;  // throw when the boundary solve margin drops below this
};

struct SlabModeSolution {
    std::array<int, 2> k{};
    std::array<double, 2> xi{};
    std::vector<double> x;  // integration grid, -L .. 0
    std::vector<std::array<std::complex<double>, 2>> u_t;
    std::vector<std::complex<double>> u_n;
    std::array<std::complex<double>, 2> nt_value{};
    double condition = 1.0;
};

SlabModeSolution solve_mode(const SlabConfig& c, std::array<int, 2> k);
std::array<std::complex<double>, 2> nt_mode(const SlabConfig& c, std::array<int, 2> k);

// Difference-quotient checks of the 3-D equations on the reconstructed
// field, each a sup over interior sample points relative to the local
// field scale.
struct FieldResiduals {
    double curl = 0.0;     // *du - lambda u
    double div = 0.0;      // codifferential
    double laplace = 0.0;  // (d delta + delta d) u - lambda^2 u
};

FieldResiduals slab_residuals(const SlabConfig& c, const SlabModeSolution& s);

struct DecayFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::vector<double> log_xi, log_err;
};

namespace detail {

void require_ray(const std::vector<std::array<int, 2>>& modes);

}  // namespace detail

// Remainder order of the symbol expansion against slab ground truth:
// fits log |nt_mode(xi) - sum_{m >= -depth} sigma_m(xi)| over a ray of
// growing modes.  A correct series to degree -depth gives slope about
// -(depth + 1).
template <class S>
DecayFit symbol_decay_fit(const SlabConfig& c, const std::vector<std::array<int, 2>>& modes,
                          const NTSymbolT<S>& nt, int depth = -1) {
    if (depth < 0) depth = -nt.bottom;
    if (-depth < nt.bottom) throw ContractError("NT symbol too shallow for the requested depth");
    detail::require_ray(modes);

    auto g0 = c.profile.lower(0.0);
    const double x0[3] = {0.0, 0.0, 0.0};
    for (auto [i, j] : {std::pair{1, 1}, {1, 2}, {2, 2}}) {
        double ref = CJetT<S>(nt.ctx->metric().g(i, j)).eval_d(0, 0, 0).real();
        if (std::abs(ref - g0[i + j - 2]) > 1e-9)
            throw ContractError("slab profile and symbol context disagree at the boundary");
    }

    std::vector<double> lx, le;
    for (auto k : modes) {
        auto val = nt_mode(c, k);
        double xi1 = 2.0 * std::numbers::pi * k[0];
        double xi2 = 2.0 * std::numbers::pi * k[1];
        std::complex<double> e1 = val[0], e2 = val[1];
        for (int m = 0; m >= -depth; --m) {
            if (!nt.sigma.has_degree(m)) continue;
            CMat v = nt.sigma.part(m).eval(x0, xi1, xi2);
            e1 -= v.at(0, 0);
            e2 -= v.at(1, 0);
        }
        double err = std::sqrt(std::norm(e1) + std::norm(e2));
        lx.push_back(std::log(std::hypot(xi1, xi2)));
        le.push_back(std::log(std::max(err, 1e-300)));
    }
    auto lf = detail::fit_line(lx, le);
    return DecayFit{lf.slope, lf.intercept, std::move(lx), std::move(le)};
}

}  // namespace bnt
