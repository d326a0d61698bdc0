#pragma once

#include <string>
#include <vector>

#include "mwld/types.hpp"

namespace mwld {

enum class Method { BranchConvex, GridDP, ClosedFormI2, Bound };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::BranchConvex: return "branch-convex";
        case Method::GridDP: return "grid-dp";
        case Method::ClosedFormI2: return "closed-form-i2";
        case Method::Bound: return "bound";
    }
    return "?";
}

// Result of a rate-function evaluation in normalized units. The path has
// `timescale` slots; service[i] is the rate vector used at slot
// timescale - i (the first is always zero since the path starts empty), so
// replay(optimal_path, branch_sequence) reproduces the optimizing trajectory.
struct RateFnOutcome {
    double value = kInf;
    Eigen::Index timescale = 1;
    ArrivalPath optimal_path;
    std::vector<Vec> branch_sequence;
    std::vector<std::string> branch_labels;
    Method method = Method::BranchConvex;
    bool truncated = false;
};

}  // namespace mwld
