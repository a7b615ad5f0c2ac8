#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dift {

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Desk-scale oracle suites: convolution vs a direct loop, bilinear shift vs
// grid sampling, tiled lookup vs the all-pairs volume, serial vs OpenMP,
// memory fixtures, metric identities. Prints one line per suite.
std::vector<SuiteResult> run_selftest(std::ostream& log, unsigned seed = 2024);

}  // namespace dift
