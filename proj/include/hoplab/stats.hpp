#pragma once

#include <optional>
#include <vector>

namespace hoplab::stats {

double mean(const std::vector<double>& xs);

/// Population standard deviation (divide by n); the CV metric uses this.
double stddev_population(const std::vector<double>& xs);

/// Sample standard deviation (divide by n-1); used by the t-test.
double stddev_sample(const std::vector<double>& xs);

/// Round half away from zero at `decimals` places.
double round_to(double value, int decimals);

struct TTestResult {
    double t = 0.0;
    double df = 0.0;
    double p_value = 1.0; // two-sided
};

/// Unpaired two-sample Welch t-test. Requires >= 2 observations per side.
std::optional<TTestResult> welch_t_test(const std::vector<double>& a,
                                        const std::vector<double>& b);

/// Survival function of Student's t (P(T > t) for t >= 0), via the
/// regularized incomplete beta function.
double student_t_sf(double t, double df);

} // namespace hoplab::stats
