#pragma once

#include <stdexcept>
#include <string>

namespace thbez
{
    /// Evaluation point outside the parametric domain.
    class DomainError : public std::out_of_range
    {
    public:
        using std::out_of_range::out_of_range;
    };

    /// Malformed input or a precondition violated by the caller.
    class ArgumentError : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    /// Knot insertion that would leave the domain or exceed multiplicity p.
    class RefinementError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Two spaces that were expected to be nested are not.
    class NestingError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Factorization failure, singular projection, residual check failure.
    class NumericalError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };
}
