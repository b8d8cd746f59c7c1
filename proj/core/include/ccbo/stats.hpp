#pragma once

#include <span>
#include <vector>

namespace ccbo::stats {

double mean(std::span<const double> values);
// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double stddev(std::span<const double> values);
// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile(std::vector<double> values, double p);
double median(std::vector<double> values);

}  // namespace ccbo::stats
