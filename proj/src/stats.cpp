#include "hoplab/stats.hpp"

#include <cmath>

namespace hoplab::stats {

double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

namespace {
double sum_sq_dev(const std::vector<double>& xs) {
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s;
}
} // namespace

double stddev_population(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    return std::sqrt(sum_sq_dev(xs) / static_cast<double>(xs.size()));
}

double stddev_sample(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    return std::sqrt(sum_sq_dev(xs) / static_cast<double>(xs.size() - 1));
}

double round_to(double value, int decimals) {
    double scale = 1.0;
    for (int i = 0; i < decimals; ++i) scale *= 10.0;
    return std::round(value * scale) / scale;
}

namespace {

// Regularized incomplete beta via the continued fraction (Lentz's method).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14;
    constexpr double kFpMin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

double ibeta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

} // namespace

double student_t_sf(double t, double df) {
    if (df <= 0.0) return 0.5;
    const double x = df / (df + t * t);
    return 0.5 * ibeta(df / 2.0, 0.5, x);
}

std::optional<TTestResult> welch_t_test(const std::vector<double>& a,
                                        const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) return std::nullopt;
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double va = stddev_sample(a) * stddev_sample(a);
    const double vb = stddev_sample(b) * stddev_sample(b);
    const double se2 = va / na + vb / nb;
    if (se2 <= 0.0) return std::nullopt;

    TTestResult r;
    r.t = (mean(a) - mean(b)) / std::sqrt(se2);
    r.df = se2 * se2 /
           (va * va / (na * na * (na - 1.0)) + vb * vb / (nb * nb * (nb - 1.0)));
    r.p_value = 2.0 * student_t_sf(std::fabs(r.t), r.df);
    return r;
}

} // namespace hoplab::stats
