#include "judgekit/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace judgekit {

double mean(std::span<const double> values) {
    if (values.empty()) {
        throw std::invalid_argument("mean of an empty sequence");
    }
    double sum = 0.0;
    for (const double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double population_stddev(std::span<const double> values) {
    const double mu = mean(values);
    double sq_sum = 0.0;
    for (const double v : values) sq_sum += (v - mu) * (v - mu);
    return std::sqrt(sq_sum / static_cast<double>(values.size()));
}

}  // namespace judgekit
