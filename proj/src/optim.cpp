#include "nn/optim.hpp"

#include <cmath>
#include <cstdio>

#include "nn/analysis.hpp"

namespace nn {

bool in_ball(NNReal x, const Ball& b) {
    return nn_dist(x, b.center) <= b.radius;
}

DescentReport descent_direction(const NNFunction& f, NNReal x, double stat_tol) {
    NNReal df = nn_deriv(f, x);
    DescentReport rep;
    if (std::abs(df.log()) <= stat_tol) {
        rep.direction = NNReal::zero();
        rep.directional_slope = NNReal::zero();
        rep.is_descent = false;
        return rep;
    }
    rep.direction = ominus(NNReal::zero(), df);
    rep.directional_slope = odot(df, rep.direction);  // log = -(log df)^2 < 0
    rep.is_descent = rep.directional_slope.log() < 0.0;
    return rep;
}

bool empirical_descent_check(const NNFunction& f, NNReal x, NNReal d,
                             std::span<const NNReal> eps_grid) {
    NNReal fx = f(x);
    for (NNReal eps : eps_grid) {
        if (!(eps.log() > 0.0))
            throw DomainError("eps grid entries must be > 1");
        NNReal probe = f(oplus(x, odot(eps, d)));
        if (!(probe < fx)) return false;
    }
    return !eps_grid.empty();
}

NNReal stationarity_residual(const NNFunction& f, NNReal x) {
    return nn_abs(nn_deriv(f, x));
}

GdResult nn_gradient_descent(const NNFunction& f, NNReal x0, NNReal eta,
                             int max_iter, double tol) {
    if (!(eta.log() > 0.0)) throw DomainError("step eta must be > 1");
    if (max_iter < 0) throw DomainError("max_iter must be >= 0");

    GdResult res;
    NNReal x = x0;
    for (int k = 0; k <= max_iter; ++k) {
        NNReal df = nn_deriv(f, x);
        double residual_log = std::abs(df.log());
        res.trace.push_back({k, x.log(), f(x).log(), residual_log});
        if (residual_log <= tol) {
            res.x = x;
            res.converged = true;
            res.iterations = k;
            return res;
        }
        if (k == max_iter) break;
        x = oplus(x, odot(eta, ominus(NNReal::zero(), df)));
        if (std::abs(x.log()) > 1e8)
            throw RangeError("gradient descent diverged");
    }
    res.x = x;
    res.converged = false;
    res.iterations = max_iter;
    return res;
}

std::string trace_csv(std::span<const TraceRow> trace) {
    std::string out = "iter,x_log,f_log,residual_log\n";
    char buf[160];
    for (const TraceRow& row : trace) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", row.iter,
                      row.x_log, row.f_log, row.residual_log);
        out += buf;
    }
    return out;
}

}  // namespace nn
