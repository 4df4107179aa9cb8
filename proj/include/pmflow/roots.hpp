#pragma once

#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>

#include "pmflow/errors.hpp"

namespace pmflow {

// Bracketed scalar root finder. Every scalar equation in the library is
// monotone on a known interval, so a sign change is required up front and a
// missing one is reported with the bracket values for diagnosis.
template <class F>
double find_root(F&& f, double a, double b, const std::string& what, int bits = 52,
                 std::uintmax_t max_iter = 400) {
    double fa = f(a);
    double fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (!(std::isfinite(fa) && std::isfinite(fb)) || (fa > 0) == (fb > 0)) {
        std::ostringstream os;
        os.precision(17);
        os << what << ": root not bracketed on [" << a << ", " << b << "], f = (" << fa << ", "
           << fb << ")";
        throw NumericalFailure(os.str());
    }
    std::uintmax_t iters = max_iter;
    boost::math::tools::eps_tolerance<double> tol(bits);
    auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
    if (iters >= max_iter) {
        throw NumericalFailure(what + ": iteration limit reached");
    }
    // Pick the endpoint with the smaller residual; the bracket is already at
    // the resolution requested.
    double x0 = r.first, x1 = r.second;
    if (x0 == x1) return x0;
    return std::abs(f(x0)) <= std::abs(f(x1)) ? x0 : x1;
}

}  // namespace pmflow
