#pragma once

#include <cstddef>
#include <vector>

#include "airylab/errors.hpp"

namespace airylab {

// Real-valued function sampled on a uniform mesh over a closed interval.
// Values between nodes are defined by linear interpolation.
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(double start, double end, std::vector<double> values);

    static GridFunction zeros(double start, double end, std::size_t mesh);
    static GridFunction constant(double start, double end, std::size_t mesh, double value);

    template <typename F>
    static GridFunction sampled(double start, double end, std::size_t mesh, F&& f) {
        std::vector<double> v(mesh + 1);
        const double h = (end - start) / static_cast<double>(mesh);
        for (std::size_t j = 0; j <= mesh; ++j)
            v[j] = f(start + h * static_cast<double>(j));
        return GridFunction(start, end, std::move(v));
    }

    double start() const { return start_; }
    double end() const { return end_; }
    // Number of mesh intervals; node count is mesh()+1.
    std::size_t mesh() const { return values_.size() - 1; }
    std::size_t nodes() const { return values_.size(); }
    double step() const { return (end_ - start_) / static_cast<double>(mesh()); }
    double node(std::size_t j) const {
        return start_ + step() * static_cast<double>(j);
    }

    double operator[](std::size_t j) const { return values_[j]; }
    double& operator[](std::size_t j) { return values_[j]; }
    const std::vector<double>& values() const { return values_; }

    // Linear interpolation; clamps s to [start, end].
    double operator()(double s) const;

    double min_value() const;
    double max_value() const;

    bool same_mesh(const GridFunction& other) const;

private:
    double start_ = 0.0;
    double end_ = 1.0;
    std::vector<double> values_{0.0, 0.0};
};

// Ordered k-tuple of functions sharing one mesh: f = (f_1, ..., f_k).
using FunctionTuple = std::vector<GridFunction>;

// Throws InvalidInput unless the tuple is nonempty with a common mesh.
void require_common_mesh(const FunctionTuple& f);

} // namespace airylab
