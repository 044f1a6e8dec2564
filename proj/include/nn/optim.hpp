#pragma once

#include <span>
#include <string>
#include <vector>

#include "nn/core.hpp"
#include "nn/expr.hpp"

namespace nn {

/// Closed ball { x : d(x, center) <= radius }, radius > 1.
struct Ball {
    Ball(NNReal center_, NNReal radius_) : center(center_), radius(radius_) {
        if (!(radius.log() > 0.0))
            throw DomainError("ball radius must be > 1");
    }
    NNReal center;
    NNReal radius;
};

bool in_ball(NNReal x, const Ball& b);

struct DescentReport {
    NNReal direction;          // 1 (-) df(x)
    NNReal directional_slope;  // df(x) (*) direction
    bool is_descent;           // slope < 1
};

/// Direction 1 (-) df(x); its slope df(x) (*) d is < 1 whenever df(x) != 1,
/// which makes it a descent direction.  At a stationary point (within
/// stat_tol on the log of the derivative) the direction is 1 and is_descent
/// is false.
DescentReport descent_direction(const NNFunction& f, NNReal x,
                                double stat_tol = 1e-12);

/// Checks the definition directly: f(x (+) eps (*) d) < f(x) for every eps
/// in the grid (all > 1, decreasing).  Strict inequality, so constant f
/// never passes.
bool empirical_descent_check(const NNFunction& f, NNReal x, NNReal d,
                             std::span<const NNReal> eps_grid);

/// d(df(x), 1) = [[df(x)]]; equals 1 exactly at stationary points.
NNReal stationarity_residual(const NNFunction& f, NNReal x);

struct TraceRow {
    int iter;
    double x_log;
    double f_log;
    double residual_log;
};

struct GdResult {
    NNReal x;
    bool converged = false;
    int iterations = 0;
    std::vector<TraceRow> trace;
};

/// Iterates x <- x (+) eta (*) (1 (-) df(x)); on logs this is classical
/// gradient descent with step ln(eta).  Stops when the stationarity
/// residual is <= exp(tol).  Diverging iterates raise RangeError.
GdResult nn_gradient_descent(const NNFunction& f, NNReal x0, NNReal eta,
                             int max_iter = 200, double tol = 1e-8);

/// CSV rows "iter,x_log,f_log,residual_log" with header.
std::string trace_csv(std::span<const TraceRow> trace);

}  // namespace nn
