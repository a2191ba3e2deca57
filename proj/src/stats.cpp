#include "letterdec/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace letterdec {

namespace {

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// Lentz continued fraction for the incomplete beta, textbook term layout.
double incbeta_cf(double x, double a, double b) {
    constexpr double tiny = 1e-300;
    constexpr double tol = 1e-15;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double result = d;
    for (int m = 1; m <= 300; ++m) {
        const double m2 = 2.0 * m;
        // even step
        double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        result *= d * c;
        // odd step
        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        result *= delta;
        if (std::fabs(delta - 1.0) < tol) break;
    }
    return result;
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw NumericError("incomplete beta requires positive a, b");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b));
    if (x < (a + 1.0) / (a + b + 2.0)) return front * incbeta_cf(x, a, b) / a;
    return 1.0 - std::exp(b * std::log1p(-x) + a * std::log(x) - log_beta(a, b)) * incbeta_cf(1.0 - x, b, a) / b;
}

double f_survival(double f, double d1, double d2) {
    if (f <= 0.0) return 1.0;
    return regularized_incomplete_beta(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0);
}

double t_survival(double t, double df) {
    if (t == 0.0) return 0.5;
    const double tail = 0.5 * regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5);
    return t > 0.0 ? tail : 1.0 - tail;
}

double mean(const std::vector<double>& v) {
    if (v.empty()) throw NumericError("mean of empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
    if (v.size() < 2) throw NumericError("sample variance needs at least 2 values");
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw NumericError("quantile of empty vector");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = static_cast<size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + (v[hi] - v[lo]) * frac;
}

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw NumericError("one-way ANOVA needs at least 2 groups");
    size_t n_total = 0;
    double grand_sum = 0.0;
    for (const auto& g : groups) {
        if (g.size() < 2) throw NumericError("one-way ANOVA needs at least 2 values per group");
        for (double x : g) grand_sum += x;
        n_total += g.size();
    }
    const double grand_mean = grand_sum / static_cast<double>(n_total);

    double ss_between = 0.0, ss_within = 0.0;
    for (const auto& g : groups) {
        const double gm = mean(g);
        ss_between += static_cast<double>(g.size()) * (gm - grand_mean) * (gm - grand_mean);
        for (double x : g) ss_within += (x - gm) * (x - gm);
    }

    AnovaResult r;
    r.df_between = static_cast<double>(groups.size() - 1);
    r.df_within = static_cast<double>(n_total - groups.size());
    if (ss_within <= 0.0) {
        if (ss_between <= 0.0) throw NumericError("ANOVA undefined: zero between- and within-group variance");
        r.f = std::numeric_limits<double>::infinity();
        r.p = 0.0;
        return r;
    }
    r.f = (ss_between / r.df_between) / (ss_within / r.df_within);
    r.p = f_survival(r.f, r.df_between, r.df_within);
    return r;
}

TTestResult ttest_one_tailed(const std::vector<double>& a, const std::vector<double>& b, TTestMode mode) {
    TTestResult r;
    if (mode == TTestMode::paired) {
        if (a.size() != b.size()) throw NumericError("paired t-test requires equal-length samples");
        if (a.size() < 2) throw NumericError("paired t-test needs at least 2 pairs");
        std::vector<double> d(a.size());
        for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
        const double md = mean(d);
        const double vd = sample_variance(d);
        r.df = static_cast<double>(d.size() - 1);
        if (vd <= 0.0) {
            if (md == 0.0) {
                r.t = 0.0;
                r.p = 0.5;
                return r;
            }
            throw NumericError("paired t-test degenerate: zero variance of nonzero differences");
        }
        r.t = md / std::sqrt(vd / static_cast<double>(d.size()));
    } else {
        if (a.size() < 2 || b.size() < 2) throw NumericError("Welch t-test needs at least 2 values per sample");
        const double ma = mean(a), mb = mean(b);
        const double va = sample_variance(a) / static_cast<double>(a.size());
        const double vb = sample_variance(b) / static_cast<double>(b.size());
        if (va + vb <= 0.0) {
            if (ma == mb) {
                r.t = 0.0;
                r.p = 0.5;
                r.df = static_cast<double>(a.size() + b.size() - 2);
                return r;
            }
            throw NumericError("Welch t-test degenerate: zero variance in both samples");
        }
        r.t = (ma - mb) / std::sqrt(va + vb);
        r.df = (va + vb) * (va + vb) /
               (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
    }
    r.p = t_survival(r.t, r.df);
    return r;
}

}  // namespace letterdec
