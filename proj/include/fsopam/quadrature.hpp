/*
   Copyright 2026 The fsopam Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

// Adaptive Gauss-Kronrod integration (GSL QUADPACK backend: QAGS on finite
// ranges, QAGIU with the x = a + (1-t)/t map for an infinite upper limit).
// A call either meets max(abs_tol, rel_tol*|I|) on the error estimate or
// throws numeric_error carrying the estimate and the backend's reason.

#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <memory>
#include <string>
#include <type_traits>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include "fsopam/errors.hpp"

namespace fsopam {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
};

struct QuadratureOptions {
    double abs_tol = 1e-9;
    double rel_tol = 1e-10;
    std::size_t max_intervals = 2000;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

namespace detail {

struct WorkspaceDeleter {
    void operator()(gsl_integration_workspace* w) const { gsl_integration_workspace_free(w); }
};

inline void silence_gsl()
{
    static const bool once = [] {
        gsl_set_error_handler_off();
        return true;
    }();
    (void)once;
}

template <class F>
struct Thunk {
    F* f;
    std::exception_ptr error;

    static double call(double x, void* self)
    {
        auto* t = static_cast<Thunk*>(self);
        if (t->error)
            return 0.0;
        try {
            return (*t->f)(x);
        } catch (...) {
            t->error = std::current_exception();
            return 0.0;
        }
    }
};

} // namespace detail

template <class F>
QuadratureResult integrate(F&& f, double lower, double upper, const QuadratureOptions& opts = {},
                           const char* what = "integral")
{
    detail::silence_gsl();
    using Fn = std::remove_reference_t<F>;
    detail::Thunk<Fn> thunk{&f, nullptr};
    gsl_function gf;
    gf.function = &detail::Thunk<Fn>::call;
    gf.params = &thunk;

    std::unique_ptr<gsl_integration_workspace, detail::WorkspaceDeleter> ws(
        gsl_integration_workspace_alloc(opts.max_intervals));
    double value = 0.0;
    double error = 0.0;
    int status = 0;
    if (std::isinf(upper))
        status = gsl_integration_qagiu(&gf, lower, opts.abs_tol, opts.rel_tol, opts.max_intervals,
                                       ws.get(), &value, &error);
    else
        status = gsl_integration_qags(&gf, lower, upper, opts.abs_tol, opts.rel_tol,
                                      opts.max_intervals, ws.get(), &value, &error);
    if (thunk.error)
        std::rethrow_exception(thunk.error);

    const double allowed = std::max(opts.abs_tol, opts.rel_tol * std::abs(value));
    if (status != GSL_SUCCESS || !std::isfinite(value) || !(error <= allowed)) {
        char buf[320];
        std::snprintf(buf, sizeof buf,
                      ": quadrature on [%.6g, %.6g] did not converge (estimate %.10g, error %.3e, "
                      "allowed %.3e, status '%s')",
                      lower, upper, value, error, allowed, gsl_strerror(status));
        throw numeric_error(std::string(what) + buf, value, error);
    }
    return {value, error};
}

} // namespace fsopam
