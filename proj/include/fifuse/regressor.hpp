#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fifuse/matrix.hpp"

namespace fifuse {

/// Anything that maps a feature row to a real prediction. Explainers only
/// see this interface, so hand-written test functions work as well as
/// trained models.
class Regressor {
public:
    virtual ~Regressor() = default;

    virtual std::size_t n_features() const = 0;
    virtual double predict_row(std::span<const double> x) const = 0;

    /// Batch prediction; rows are evaluated in parallel.
    std::vector<double> predict(const Matrix& X) const;

    virtual bool supports_input_gradient() const { return false; }
    /// d f / d x at x. Throws std::logic_error unless supports_input_gradient().
    virtual std::vector<double> input_gradient(std::span<const double> x) const;

    virtual std::string name() const { return "custom"; }

protected:
    void check_width(std::size_t cols) const {
        if (cols != n_features()) {
            throw std::invalid_argument("expected " + std::to_string(n_features()) + " features, got " +
                                        std::to_string(cols));
        }
    }
};

}  // namespace fifuse
