#include "airylab/grid_function.hpp"

#include <algorithm>
#include <cmath>

namespace airylab {

GridFunction::GridFunction(double start, double end, std::vector<double> values)
    : start_(start), end_(end), values_(std::move(values)) {
    if (!(start_ < end_))
        throw InvalidInput("GridFunction: interval start must be below end");
    if (values_.size() < 2)
        throw InvalidInput("GridFunction: need at least one mesh interval");
    for (double v : values_)
        if (!std::isfinite(v))
            throw InvalidInput("GridFunction: values must be finite");
}

GridFunction GridFunction::zeros(double start, double end, std::size_t mesh) {
    return constant(start, end, mesh, 0.0);
}

GridFunction GridFunction::constant(double start, double end, std::size_t mesh, double value) {
    return GridFunction(start, end, std::vector<double>(mesh + 1, value));
}

double GridFunction::operator()(double s) const {
    if (s <= start_) return values_.front();
    if (s >= end_) return values_.back();
    const double u = (s - start_) / step();
    const auto j = static_cast<std::size_t>(u);
    if (j + 1 >= values_.size()) return values_.back();
    const double w = u - static_cast<double>(j);
    return values_[j] * (1.0 - w) + values_[j + 1] * w;
}

double GridFunction::min_value() const {
    return *std::min_element(values_.begin(), values_.end());
}

double GridFunction::max_value() const {
    return *std::max_element(values_.begin(), values_.end());
}

bool GridFunction::same_mesh(const GridFunction& other) const {
    return values_.size() == other.values_.size() && start_ == other.start_ &&
           end_ == other.end_;
}

void require_common_mesh(const FunctionTuple& f) {
    if (f.empty())
        throw InvalidInput("FunctionTuple: need k >= 1 lines");
    for (std::size_t i = 1; i < f.size(); ++i)
        if (!f[i].same_mesh(f[0]))
            throw InvalidInput("FunctionTuple: lines must share one mesh");
}

} // namespace airylab
