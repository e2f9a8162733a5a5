#pragma once

#include <span>
#include <vector>

#include "mivs/rng.h"

namespace mivs::stats {

double sigmoid(double x);
double logit(double p);
double normal_cdf(double x);
// Upper tail of chi-square with one degree of freedom.
double chi2_1_upper(double stat);
// Two-sided normal p-value for a z statistic.
double two_sided_p(double z);

double mean(std::span<const double> v);
// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double sd(std::span<const double> v);
double median(std::span<const double> v);

// Sample quantile with linear interpolation between order statistics
// (Hyndman-Fan type 7, the R default).
double quantile(std::span<const double> v, double prob);

// Draw from N(mean, 1) restricted to (0, inf) when `positive`, else (-inf, 0).
double truncated_normal(Rng& rng, double mean, bool positive);

// Binomial deviance contribution -2 log p(y | prob), prob clamped away from 0/1.
double binomial_deviance(double y, double prob);

} // namespace mivs::stats
