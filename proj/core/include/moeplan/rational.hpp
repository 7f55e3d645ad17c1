/*
 Copyright 2026 The MoEPlan Authors

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

#include <boost/rational.hpp>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace moeplan {

// Exact rational arithmetic for all closed-form volume and memory formulas.
// Conversion to double happens only at the time/bytes boundary.
using Rat = boost::rational<long long>;

inline Rat rat(long long num, long long den = 1) {
    if (den == 0) {
        throw std::domain_error("rational with zero denominator");
    }
    return Rat(num, den);
}

inline double to_double(const Rat& r) {
    return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

// Exact integer value of a rational known to be integral.
inline long long to_integer(const Rat& r) {
    if (r.denominator() != 1) {
        throw std::domain_error("rational " + std::to_string(r.numerator()) + "/" +
                                std::to_string(r.denominator()) + " is not integral");
    }
    return r.numerator();
}

}  // namespace moeplan
