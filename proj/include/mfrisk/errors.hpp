#pragma once

#include <stdexcept>
#include <string>

namespace mfrisk {

// Malformed or degenerate inputs: files, configs, empty data.
class input_error : public std::runtime_error {
public:
    explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures: non-convergence, rank deficiency, separation.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mfrisk
