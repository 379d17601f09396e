#pragma once

#include <stdexcept>
#include <string>

namespace fedorl {

/// The evaluated policy puts mass where the reference policy has none.
struct UnsupportedSupport : std::runtime_error {
    explicit UnsupportedSupport(const std::string& what) : std::runtime_error(what) {}
};

struct EmptyDataset : std::runtime_error {
    explicit EmptyDataset(const std::string& what) : std::runtime_error(what) {}
};

/// delta_pi requires D(pi, pi_b) > 0.
struct UndefinedDeltaPi : std::runtime_error {
    explicit UndefinedDeltaPi(const std::string& what) : std::runtime_error(what) {}
};

/// A brute-force policy grid would exceed the candidate budget.
struct BudgetExceeded : std::runtime_error {
    explicit BudgetExceeded(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed experiment configuration or missing input file.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fedorl
