#pragma once

#include <thbez/splines.hpp>

#include <string>
#include <vector>

namespace thbez
{
    /// What happens at one interior element boundary xi between element
    /// `element` (on the left) and its right neighbour.
    struct BoundaryAttribution
    {
        double xi = 0.0;
        int element = 0;
        int elementSpan = 0;
        /// Span returned by the half-open span lookup at xi.
        int naiveSpan = 0;

        std::vector<int> localFunctions;
        /// Left limit of the element's local functions at xi.
        std::vector<double> leftLimit;
        /// Values of the span lookup, read positionally as the element's local values.
        std::vector<double> naive;
        /// Bezier-extracted evaluation E^e B(1).
        std::vector<double> extracted;

        double naiveDeviation = 0.0;
        double extractionDeviation = 0.0;
    };

    struct BasisIntegral
    {
        int function = 0;
        /// (xi_{i+p+1} - xi_i) / (p+1).
        double analytic = 0.0;
        double extraction = 0.0;
        double naive = 0.0;
    };

    struct PathologyReport
    {
        int degree = 0;
        int points = 0;
        std::vector<BoundaryAttribution> boundaries;
        std::vector<BasisIntegral> integrals;
    };

    /// Element-wise closed Newton-Cotes integration of every basis function,
    /// once through the span lookup and once through Bezier extraction.
    PathologyReport demo_newton_cotes_pathology( const KnotVector& kv, int points = 3 );

    std::string format_report( const PathologyReport& report );
}
