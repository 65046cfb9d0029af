#pragma once

#include <thbez/hierarchy.hpp>
#include <thbez/poisson.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace thbez::cli
{
    /// Malformed or schema-violating case file. The message carries the line
    /// (syntax errors) or the JSON pointer (schema errors) of the offending value.
    class CaseError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct RefinementStep
    {
        enum class Mode
        {
            Global,
            Region,
            Indicator,
            Elements,
        };

        Mode mode = Mode::Global;
        int repeat = 1;
        Point lower{ 0.0, 0.0 };
        Point upper{ 1.0, 1.0 };
        double theta = 0.2;
        std::vector<ElementKey> elements;
    };

    struct ExactSpec
    {
        enum class Kind
        {
            Gaussian,
            Polynomial,
        };

        Kind kind = Kind::Gaussian;
        double c = 100.0;
        std::vector<ExactSolution::Monomial> terms;

        ExactSolution build() const;
    };

    struct CaseFile
    {
        int dim = 2;
        std::array<int, 2> degree{ 2, 2 };
        std::array<int, 2> elements{ 8, 8 };
        ExactSpec exact;
        BoundarySpec boundary;
        std::vector<RefinementStep> refinement;
        std::optional<std::string> quadrature;
        std::optional<std::string> solutionPath;
        std::optional<std::string> csvPath;

        HierarchicalSpace initialSpace() const;
    };

    CaseFile parse_case( const std::string& text );
    CaseFile load_case( const std::string& path );
}
