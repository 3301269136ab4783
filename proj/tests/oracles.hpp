#ifndef TREEAMP_TESTS_ORACLES_HPP
#define TREEAMP_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// Moments of the density exp(logf(x)) on [lo, hi] by composite Simpson.
struct Moments {
    double A = 0, r = 0, v = 0;
};

inline Moments simpson(const std::function<double(double)> &logf, double lo, double hi, int n = 40000)
{
    if (n % 2) ++n;
    double h = (hi - lo) / n;
    std::vector<double> lf(n + 1);
    double mx = -INFINITY;
    for (int i = 0; i <= n; ++i) {
        lf[i] = logf(lo + i * h);
        mx = std::max(mx, lf[i]);
    }
    double z = 0, s1 = 0, s2 = 0;
    for (int i = 0; i <= n; ++i) {
        double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
        double x = lo + i * h;
        double f = w * std::exp(lf[i] - mx);
        z += f;
        s1 += f * x;
        s2 += f * x * x;
    }
    Moments m;
    m.r = s1 / z;
    m.v = s2 / z - m.r * m.r;
    m.A = mx + std::log(z * h / 3);
    return m;
}

} // namespace oracle

#endif
