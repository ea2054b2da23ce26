#pragma once

#include <span>
#include <vector>

namespace rsdkit::stats {

double mean(std::span<const double> xs);
/// Population standard deviation (divides by n).
double population_std(std::span<const double> xs);
/// Linear-interpolation quantile (the "type 7" estimator): position q*(n-1).
double quantile(std::span<const double> xs, double q);
/// Lower median: element (n-1)/2 of the sorted values.
double lower_median(std::span<const double> xs);
/// Ranks with ties sharing their average rank (1-based).
std::vector<double> average_ranks(std::span<const double> xs);
double pearson(std::span<const double> xs, std::span<const double> ys);
double spearman(std::span<const double> xs, std::span<const double> ys);

}  // namespace rsdkit::stats
