#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace bnt::detail {

template <class T, std::size_t N>
std::array<T, N> lin(const std::array<T, N>& a, double h, const std::array<T, N>& b) {
    std::array<T, N> out;
    for (std::size_t i = 0; i < N; ++i) out[i] = a[i] + h * b[i];
    return out;
}

template <class T, std::size_t N>
double sup(const std::array<T, N>& a) {
    double m = 0.0;
    for (const T& z : a) m = std::max(m, std::abs(z));
    return m;
}

// Classical RK4 with step doubling; the Richardson difference drives the
// step size and feeds the fifth-order update.
template <class T, std::size_t N, class F>
void integrate(const F& f, double x0, double x1, std::array<T, N>& y, double tol) {
    using St = std::array<T, N>;
    double span = x1 - x0;
    if (span == 0.0) return;
    auto step = [&](double x, const St& u, double h) {
        St k1 = f(x, u);
        St k2 = f(x + h / 2, lin(u, h / 2, k1));
        St k3 = f(x + h / 2, lin(u, h / 2, k2));
        St k4 = f(x + h, lin(u, h, k3));
        St out;
        for (std::size_t i = 0; i < N; ++i)
            out[i] = u[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        return out;
    };
    double x = x0;
    double h = span / 16.0;
    const double floor_h = 1e-13 * std::abs(span);
    while ((span > 0.0) ? (x < x1 - floor_h) : (x > x1 + floor_h)) {
        if ((span > 0.0) ? (x + h > x1) : (x + h < x1)) h = x1 - x;
        for (;;) {
            St full = step(x, y, h);
            St half = step(x, y, h / 2);
            half = step(x + h / 2, half, h / 2);
            St diff;
            for (std::size_t i = 0; i < N; ++i) diff[i] = half[i] - full[i];
            double err = sup(diff) / 15.0;
            double want = tol * (1.0 + sup(y));
            if (err <= want || std::abs(h) <= floor_h) {
                for (std::size_t i = 0; i < N; ++i) y[i] = half[i] + diff[i] / 15.0;
                x += h;
                double grow = 0.9 * std::pow(want / std::max(err, 1e-300), 0.2);
                h *= std::clamp(grow, 0.2, 5.0);
                break;
            }
            h *= std::max(0.9 * std::pow(want / err, 0.2), 0.1);
        }
    }
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    LineFit out;
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    return out;
}

}  // namespace bnt::detail
