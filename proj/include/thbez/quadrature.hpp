#pragma once

#include <string>
#include <vector>

namespace thbez
{
    enum class QuadratureKind
    {
        Gauss,
        NewtonCotesClosed,
    };

    /// Rule on the unit interval; weights sum to one.
    struct QuadratureRule
    {
        QuadratureKind kind = QuadratureKind::Gauss;
        std::vector<double> points;
        std::vector<double> weights;

        int size() const { return static_cast<int>( points.size() ); }
    };

    /// Gauss-Legendre rule with n points, 1 <= n <= 10. Exact up to degree 2n-1.
    QuadratureRule gauss_rule( int n );

    /// Closed Newton-Cotes rule with n equispaced points including both ends, 2 <= n <= 7.
    QuadratureRule newton_cotes_rule( int n );

    /// Parses "gauss:N" or "nc:N".
    QuadratureRule parse_quadrature( const std::string& spec );
}
