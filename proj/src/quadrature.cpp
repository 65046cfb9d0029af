#include <thbez/quadrature.hpp>

#include <thbez/errors.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <numbers>

namespace thbez
{
    QuadratureRule gauss_rule( const int n )
    {
        if( n < 1 or n > 10 ) throw ArgumentError( "Gauss rule needs 1 <= n <= 10, got " + std::to_string( n ) );
        QuadratureRule rule{ QuadratureKind::Gauss, std::vector<double>( n ), std::vector<double>( n ) };
        for( int i = 0; i < n; ++i )
        {
            // Newton iteration on P_n from the Chebyshev-like initial guess.
            double z = std::cos( std::numbers::pi * ( i + 0.75 ) / ( n + 0.5 ) );
            double dp = 0.0;
            for( int iter = 0; iter < 100; ++iter )
            {
                double p0 = 1.0;
                double p1 = z;
                for( int k = 2; k <= n; ++k )
                {
                    const double pk = ( ( 2.0 * k - 1.0 ) * z * p1 - ( k - 1.0 ) * p0 ) / k;
                    p0 = p1;
                    p1 = pk;
                }
                dp = n * ( z * p1 - p0 ) / ( z * z - 1.0 );
                const double dz = p1 / dp;
                z -= dz;
                if( std::abs( dz ) < 1e-16 ) break;
            }
            // Recompute the derivative at the converged root.
            double p0 = 1.0;
            double p1 = z;
            for( int k = 2; k <= n; ++k )
            {
                const double pk = ( ( 2.0 * k - 1.0 ) * z * p1 - ( k - 1.0 ) * p0 ) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = n * ( z * p1 - p0 ) / ( z * z - 1.0 );
            const double w = 2.0 / ( ( 1.0 - z * z ) * dp * dp );
            // Roots come out descending in z, so 1 - z ascends.
            rule.points[i] = 0.5 * ( 1.0 - z );
            rule.weights[i] = 0.5 * w;
        }
        return rule;
    }

    QuadratureRule newton_cotes_rule( const int n )
    {
        if( n < 2 or n > 7 ) throw ArgumentError( "closed Newton-Cotes rule needs 2 <= n <= 7, got " + std::to_string( n ) );
        static const std::array<std::vector<double>, 8> numerators{ {
            {},
            {},
            { 1, 1 },
            { 1, 4, 1 },
            { 1, 3, 3, 1 },
            { 7, 32, 12, 32, 7 },
            { 19, 75, 50, 50, 75, 19 },
            { 41, 216, 27, 272, 27, 216, 41 },
        } };
        static const std::array<double, 8> denominators{ 0, 0, 2, 6, 8, 90, 288, 840 };

        QuadratureRule rule{ QuadratureKind::NewtonCotesClosed, std::vector<double>( n ), std::vector<double>( n ) };
        for( int i = 0; i < n; ++i )
        {
            rule.points[i] = static_cast<double>( i ) / ( n - 1 );
            rule.weights[i] = numerators[n][i] / denominators[n];
        }
        return rule;
    }

    QuadratureRule parse_quadrature( const std::string& spec )
    {
        const auto colon = spec.find( ':' );
        if( colon == std::string::npos ) throw ArgumentError( "quadrature spec must look like gauss:N or nc:N" );
        const std::string kind = spec.substr( 0, colon );
        int n = 0;
        const char* begin = spec.data() + colon + 1;
        const char* end = spec.data() + spec.size();
        const auto [ptr, ec] = std::from_chars( begin, end, n );
        if( ec != std::errc() or ptr != end ) throw ArgumentError( "invalid point count in quadrature spec '" + spec + "'" );
        if( kind == "gauss" ) return gauss_rule( n );
        if( kind == "nc" ) return newton_cotes_rule( n );
        throw ArgumentError( "unknown quadrature kind '" + kind + "'" );
    }
}
