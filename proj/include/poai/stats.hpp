#pragma once

#include <span>
#include <vector>

namespace poai {

// 1-based ranks, ties receive the average of the positions they span.
std::vector<double> average_ranks(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);

// Pearson correlation of average ranks. Returns 0 when either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> values);

// sum_ij |x_i - x_j| / (2 n^2 mean); 0 for an all-zero vector.
double gini(std::span<const double> counts);

// Shannon entropy in bits of the distribution proportional to counts.
double entropy_bits(std::span<const double> counts);

}  // namespace poai
