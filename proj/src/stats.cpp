#include "mi/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

namespace mi {

double mean(const std::vector<double>& v) {
    if (v.empty()) throw StatsError("mean of an empty sample");
    double s = 0;
    for (double x : v) s += x;
    return s / v.size();
}

double median(std::vector<double> v) {
    if (v.empty()) throw StatsError("median of an empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double sample_variance(const std::vector<double>& v) {
    if (v.size() < 2) throw StatsError("variance needs at least two values");
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
}

double entropy_bits(const std::vector<double>& p) {
    double h = 0;
    for (double q : p)
        if (q > 0) h -= q * std::log2(q);
    return h;
}

double student_t_two_sided(double t, double df) {
    if (std::isnan(t)) return 1.0;
    if (std::isinf(t)) return 0.0;
    boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

TTestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw StatsError("Welch's test needs two values per sample");
    const double va = sample_variance(a) / a.size();
    const double vb = sample_variance(b) / b.size();
    if (va + vb == 0) throw StatsError("both samples have zero variance");
    TTestResult r;
    r.t = (mean(a) - mean(b)) / std::sqrt(va + vb);
    r.df = (va + vb) * (va + vb) /
           (va * va / (a.size() - 1.0) + vb * vb / (b.size() - 1.0));
    r.p = student_t_two_sided(r.t, r.df);
    return r;
}

Regression linear_regression(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw StatsError("x and y differ in length");
    if (x.size() < 3) throw StatsError("regression needs at least three points");
    const double n = static_cast<double>(x.size());
    const double mx = mean(x), my = mean(y);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0) throw StatsError("x is constant");
    Regression r;
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (r.intercept + r.slope * x[i]);
        sse += e * e;
    }
    r.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
    const double se = std::sqrt(sse / (n - 2) / sxx);
    if (se == 0) {
        r.t = r.slope == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.slope);
        r.p = r.slope == 0 ? 1.0 : 0.0;
    } else {
        r.t = r.slope / se;
        r.p = student_t_two_sided(r.t, n - 2);
    }
    return r;
}

}  // namespace mi
