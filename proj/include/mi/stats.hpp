#pragma once

#include <stdexcept>
#include <vector>

namespace mi {

struct StatsError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct TTestResult {
    double t = 0;
    double df = 0;
    double p = 1;
};

// Welch's unequal-variance t-test, two-sided.
TTestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct Regression {
    double slope = 0;
    double intercept = 0;
    double p = 1;  // two-sided, slope = 0 under the null
    double t = 0;
    double r2 = 0;
};

// Ordinary least squares of y on x.
Regression linear_regression(const std::vector<double>& x, const std::vector<double>& y);

// Two-sided tail probability of Student's t with `df` degrees of freedom.
double student_t_two_sided(double t, double df);

double mean(const std::vector<double>& v);
double median(std::vector<double> v);
double sample_variance(const std::vector<double>& v);
// Shannon entropy in bits of a discrete distribution.
double entropy_bits(const std::vector<double>& p);

}  // namespace mi
