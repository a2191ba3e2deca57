#pragma once

#include <vector>

#include "letterdec/common.hpp"

namespace letterdec {

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double x, double a, double b);

// Upper-tail p of the F distribution with (d1, d2) degrees of freedom.
double f_survival(double f, double d1, double d2);

// Upper-tail p of Student's t with df degrees of freedom (P[T > t]).
double t_survival(double t, double df);

struct AnovaResult {
    double f = 0.0;
    double p = 1.0;
    double df_between = 0.0;
    double df_within = 0.0;
};

// Classical one-way ANOVA between/within decomposition.
AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups);

enum class TTestMode { paired, welch };

struct TTestResult {
    double t = 0.0;
    double p = 0.5;  // H1: mean(a) > mean(b), upper tail
    double df = 0.0;
};

TTestResult ttest_one_tailed(const std::vector<double>& a, const std::vector<double>& b, TTestMode mode);

double mean(const std::vector<double>& v);
// Sample variance (n-1 divisor).
double sample_variance(const std::vector<double>& v);
// Quantile with linear interpolation at position (n-1)*q on the sorted values.
double quantile(std::vector<double> v, double q);

}  // namespace letterdec
