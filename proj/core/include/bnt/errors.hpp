#pragma once

#include <stdexcept>
#include <string>

namespace bnt {

// Contract violations: bad inputs, shape/order mismatches, singular data.
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input documents that fail to parse.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invariants that should hold if the arithmetic is correct; a throw here
// signals a bug, not bad input.
struct InternalError : std::logic_error {
    explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

struct OrderMismatch : ContractError {
    using ContractError::ContractError;
};
struct OrderTooLow : ContractError {
    using ContractError::ContractError;
};
struct SingularJet : ContractError {
    using ContractError::ContractError;
};
struct ShapeMismatch : ContractError {
    using ContractError::ContractError;
};
struct DegenerateDirections : ContractError {
    using ContractError::ContractError;
};
struct RankDeficiency : ContractError {
    using ContractError::ContractError;
};
struct InconsistentData : ContractError {
    using ContractError::ContractError;
};
struct AffinityViolation : ContractError {
    using ContractError::ContractError;
};
struct BeltramiSingularValue : ContractError {
    using ContractError::ContractError;
};

}  // namespace bnt
