#pragma once

#include <span>

namespace judgekit {

double mean(std::span<const double> values);

/// Population standard deviation (divides by N). Used everywhere variability
/// is reported so the same run always prints the same number.
double population_stddev(std::span<const double> values);

}  // namespace judgekit
