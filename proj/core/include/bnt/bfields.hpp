#pragma once

#include <array>
#include <functional>
#include <vector>

#include "bnt/errors.hpp"

namespace bnt {

// Current loops in R^3 and the fields b = (curl + lambda)(phi_lambda * J)
// they generate, with phi_lambda(r) = cos(lambda r) / (4 pi r).  Away from
// the loop b solves curl b = lambda b and div b = 0; at lambda = 0 it is
// the Biot-Savart field of a unit current.

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

// Riemannian metric as a callable; an empty function means Euclidean.
using MetricField = std::function<Mat3(const Vec3&)>;

struct CurrentLoop {
    Vec3 center{};
    Vec3 omega{};  // unit axis, loop lies in the orthogonal plane
    double delta = 0.0;
    std::vector<Vec3> nodes;     // gamma(t_i) on the uniform grid t_i = 2 pi i / N
    std::vector<Vec3> tangents;  // gamma'(t_i)
    MetricField metric;          // empty in euclidean mode
    std::function<Vec3(double)> at;   // gamma at arbitrary parameter
    std::function<Vec3(double)> vel;  // exact tangent; empty in geodesic mode
};

// Circle of radius delta about center in the plane orthogonal to omega.
// With a metric callable the nodes are exp-mapped: the geodesic equation is
// integrated from center with the planar initial velocities.  The frame
// spanning the plane is chosen deterministically unless e1_hint is nonzero.
CurrentLoop make_loop(const Vec3& center, const Vec3& omega, double delta, int n,
                      const MetricField& metric = {}, const Vec3& e1_hint = {0.0, 0.0, 0.0});

// J(A) = integral of the pullback of the 1-form A over the loop, by the
// periodic trapezoid rule on the stored nodes.
double loop_functional(const CurrentLoop& loop, const std::function<Vec3(const Vec3&)>& a);

struct BFieldSample {
    Vec3 x{};
    Vec3 value{};
    double dist_to_loop = 0.0;
    bool near_loop = false;  // set when quadrature accuracy is degraded
};

// Field at x by loop quadrature of the exact kernel, doubling the node
// count until successive values agree to 1e-10.
BFieldSample bfield_eval(const CurrentLoop& loop, double lambda, const Vec3& x);

struct ApproachFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::vector<double> log_d, log_b;
};

// Fits log |b| against log dist along a path approaching the loop; the
// 1/d line singularity gives slope -1.  path(d) should produce points at
// requested distance roughly d; the fit uses measured distances, sampled
// over d in [1e-3, 1e-2] * delta where the line model dominates.
ApproachFit asymptotic_fit(const CurrentLoop& loop, double lambda,
                           const std::function<Vec3(double)>& path, int samples = 8);

struct SphereSample {
    Vec3 base{};
    Vec3 omega{};
};

struct EmbeddingReport {
    double min_pair_distance = 0.0;  // injectivity proxy over distinct samples
    double min_jacobian_sv = 0.0;    // immersion proxy, 5 bundle directions
    std::size_t grid_size = 0;
    std::size_t patch_size = 0;
};

// Samples omega -> b_omega at the patch points and probes the map for
// injectivity (pairwise sample distances) and immersion (finite-difference
// Jacobian in the three base and two axis directions).
EmbeddingReport embedding_probe(const std::vector<SphereSample>& grid,
                                const std::vector<Vec3>& patch, double lambda,
                                double delta = 0.1, int nodes = 64);

}  // namespace bnt
