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

#include <stdexcept>
#include <string>

namespace fsopam {

// Caller supplied something the operation's contract forbids (wrong block
// length, un-bootstrapped receiver, search budget exceeded, bad config).
class usage_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A quadrature did not reach its tolerance. Carries the last estimate so the
// caller can report it.
class numeric_error : public std::runtime_error {
public:
    numeric_error(const std::string& what, double estimate, double error_estimate)
        : std::runtime_error(what), estimate_(estimate), error_estimate_(error_estimate)
    {
    }

    double estimate() const noexcept { return estimate_; }
    double error_estimate() const noexcept { return error_estimate_; }

private:
    double estimate_;
    double error_estimate_;
};

// Amplitude estimate unavailable (zero denominator / non-positive estimate).
class estimation_failure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace fsopam
