#include <thbez/pathology.hpp>

#include <thbez/bezier.hpp>
#include <thbez/quadrature.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace thbez
{
    namespace
    {
        double max_deviation( const std::vector<double>& a, const std::vector<double>& b )
        {
            double d = 0.0;
            for( size_t i = 0; i < a.size(); ++i ) d = std::max( d, std::abs( a[i] - b[i] ) );
            return d;
        }
    }

    PathologyReport demo_newton_cotes_pathology( const KnotVector& kv, const int points )
    {
        const int p = kv.degree();
        const auto rule = newton_cotes_rule( points );
        const auto ops = decompose( kv );

        PathologyReport report;
        report.degree = p;
        report.points = points;

        for( int e = 0; e + 1 < kv.numElements(); ++e )
        {
            BoundaryAttribution b;
            b.element = e;
            b.elementSpan = kv.elementSpan( e );
            b.xi = kv[b.elementSpan + 1];
            b.localFunctions = ops[e].functions;

            const auto naive = eval_basis( kv, b.xi );
            b.naiveSpan = naive.span;
            b.naive = naive.values;
            b.leftLimit = eval_basis_in_span( kv, b.elementSpan, b.xi ).values;

            const Eigen::VectorXd ext = ops[e].matrix * bernstein( p, 1.0 );
            b.extracted.assign( ext.data(), ext.data() + ext.size() );

            b.naiveDeviation = max_deviation( b.naive, b.leftLimit );
            b.extractionDeviation = max_deviation( b.extracted, b.leftLimit );
            report.boundaries.push_back( std::move( b ) );
        }

        std::vector<double> viaExtraction( kv.numFunctions(), 0.0 );
        std::vector<double> viaLookup( kv.numFunctions(), 0.0 );
        for( int e = 0; e < kv.numElements(); ++e )
        {
            const int span = kv.elementSpan( e );
            const double lo = kv[span];
            const double h = kv[span + 1] - lo;
            for( int q = 0; q < rule.size(); ++q )
            {
                const double w = rule.weights[q] * h;
                const Eigen::VectorXd ext = ops[e].matrix * bernstein( p, rule.points[q] );
                // The lookup result is stored in this element's local slots, as an
                // element-by-element assembly would do.
                const auto naive = eval_basis( kv, lo + rule.points[q] * h );
                for( int a = 0; a <= p; ++a )
                {
                    viaExtraction[span - p + a] += w * ext( a );
                    viaLookup[span - p + a] += w * naive.values[a];
                }
            }
        }
        for( int i = 0; i < kv.numFunctions(); ++i )
            report.integrals.push_back( { i, ( kv[i + p + 1] - kv[i] ) / ( p + 1 ), viaExtraction[i], viaLookup[i] } );
        return report;
    }

    std::string format_report( const PathologyReport& report )
    {
        std::ostringstream out;
        out << std::setprecision( 6 ) << std::fixed;
        const auto row = []( std::ostringstream& os, const std::vector<double>& v ) {
            os << '[';
            for( size_t i = 0; i < v.size(); ++i ) os << ( i ? ", " : "" ) << v[i];
            os << ']';
        };

        out << "degree " << report.degree << ", closed Newton-Cotes with " << report.points << " points\n";
        if( report.boundaries.empty() ) out << "no interior element boundaries\n";
        for( const auto& b : report.boundaries )
        {
            out << "boundary xi=" << b.xi << " (element " << b.element << ", span " << b.elementSpan
                << "; span lookup gives " << b.naiveSpan << ")\n";
            out << "  left limit  ";
            row( out, b.leftLimit );
            out << "\n  span lookup ";
            row( out, b.naive );
            out << "  deviation " << std::scientific << b.naiveDeviation << std::fixed << "\n  extraction  ";
            row( out, b.extracted );
            out << "  deviation " << std::scientific << b.extractionDeviation << std::fixed << "\n";
        }
        out << "basis integrals (analytic, extraction, span lookup)\n";
        for( const auto& i : report.integrals )
            out << "  N_" << i.function << "  " << i.analytic << "  " << i.extraction << "  " << i.naive << "\n";
        return out.str();
    }
}
