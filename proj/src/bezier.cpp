#include <thbez/bezier.hpp>

#include <thbez/errors.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace thbez
{
    namespace
    {
        // Coarse-to-fine transfer stored by rows so insertion only shifts
        // pointers and mixes the p rows affected by the new knot.
        class Transfer
        {
        public:
            Transfer( std::vector<double> knots, int degree )
                : mKnots( std::move( knots ) ), mDegree( degree )
            {
                const int n = static_cast<int>( mKnots.size() ) - degree - 1;
                mRows.reserve( n );
                for( int i = 0; i < n; ++i ) mRows.push_back( Eigen::RowVectorXd::Unit( n, i ) );
            }

            void insert( double x )
            {
                const double tol = KnotVector::tolerance();
                for( const double v : mKnots )
                    if( std::abs( v - x ) <= tol ) x = v;
                if( not( x > mKnots.front() + tol and x < mKnots.back() - tol ) )
                    throw RefinementError( "inserted knot " + std::to_string( x ) + " must lie strictly inside the domain" );
                const auto mult = std::count_if( mKnots.begin(), mKnots.end(),
                                                 [&]( double v ) { return std::abs( v - x ) <= tol; } );
                if( mult + 1 > mDegree )
                    throw RefinementError( "inserting " + std::to_string( x ) + " exceeds multiplicity p" );

                const int p = mDegree;
                // Last index s with knots[s] <= x.
                const int s = static_cast<int>( std::upper_bound( mKnots.begin(), mKnots.end(), x ) - mKnots.begin() ) - 1;

                // New rows s-p+1 .. s are convex combinations; rows beyond shift by one.
                std::vector<Eigen::RowVectorXd> mixed;
                for( int j = s - p + 1; j <= s; ++j )
                {
                    const double alpha = ( x - mKnots[j] ) / ( mKnots[j + p] - mKnots[j] );
                    mixed.push_back( alpha * mRows[j] + ( 1.0 - alpha ) * mRows[j - 1] );
                }
                Eigen::RowVectorXd shifted = mRows[s - 1];
                mRows.insert( mRows.begin() + s, std::move( shifted ) );
                for( int k = 0; k < p; ++k ) mRows[s - p + 1 + k] = std::move( mixed[k] );
                mKnots.insert( mKnots.begin() + s + 1, x );
            }

            const std::vector<double>& knots() const { return mKnots; }
            const std::vector<Eigen::RowVectorXd>& rows() const { return mRows; }

            Eigen::MatrixXd matrix() const
            {
                Eigen::MatrixXd out( mRows.size(), mRows.empty() ? 0 : mRows.front().size() );
                for( size_t i = 0; i < mRows.size(); ++i ) out.row( i ) = mRows[i];
                return out;
            }

        private:
            std::vector<double> mKnots;
            int mDegree;
            std::vector<Eigen::RowVectorXd> mRows;
        };
    }

    KnotInsertionResult insert_knots( const KnotVector& kv, const std::span<const double> knots )
    {
        Transfer transfer( { kv.values().begin(), kv.values().end() }, kv.degree() );
        for( const double x : knots ) transfer.insert( x );
        return { KnotVector( transfer.knots(), kv.degree() ), transfer.matrix() };
    }

    KnotInsertionResult insert_knot( const KnotVector& kv, const double xi_hat )
    {
        return insert_knots( kv, std::span<const double>( &xi_hat, 1 ) );
    }

    std::vector<ExtractionOperator> decompose( const KnotVector& kv )
    {
        const int p = kv.degree();
        Transfer transfer( { kv.values().begin(), kv.values().end() }, p );
        const auto breaks = kv.breakpoints();
        for( size_t b = 1; b + 1 < breaks.size(); ++b )
        {
            const int missing = p - kv.multiplicity( breaks[b] );
            for( int k = 0; k < missing; ++k ) transfer.insert( breaks[b] );
        }

        const auto& rows = transfer.rows();
        std::vector<ExtractionOperator> out;
        out.reserve( kv.numElements() );
        for( int e = 0; e < kv.numElements(); ++e )
        {
            const int first = kv.elementSpan( e ) - p;
            ExtractionOperator op;
            op.element = e;
            op.matrix.resize( p + 1, p + 1 );
            for( int a = 0; a <= p; ++a )
                for( int b = 0; b <= p; ++b ) op.matrix( a, b ) = rows[e * p + b]( first + a );
            for( int a = 0; a <= p; ++a ) op.functions.push_back( first + a );
            out.push_back( std::move( op ) );
        }
        return out;
    }

    ExtractionOperator tensor_extraction( const ExtractionOperator& e_xi, const ExtractionOperator& e_eta,
                                          const TensorSpace& space )
    {
        if( space.dim() != 2 ) throw ArgumentError( "tensor extraction needs a bivariate space" );
        const auto nx = static_cast<int>( e_xi.matrix.rows() );
        const auto ny = static_cast<int>( e_eta.matrix.rows() );
        if( nx != space.degree( 0 ) + 1 or ny != space.degree( 1 ) + 1 )
            throw ArgumentError( "extraction operator sizes do not match the space degrees" );

        ExtractionOperator out;
        out.element = space.flattenElement( { e_xi.element, e_eta.element } );
        out.matrix.resize( nx * ny, nx * ny );
        for( int j = 0; j < ny; ++j )
            for( int i = 0; i < nx; ++i )
                for( int l = 0; l < ny; ++l )
                    for( int k = 0; k < nx; ++k )
                        out.matrix( i + nx * j, k + nx * l ) = e_xi.matrix( i, k ) * e_eta.matrix( j, l );
        for( int j = 0; j < ny; ++j )
            for( int i = 0; i < nx; ++i )
                out.functions.push_back( space.flattenFunction( { e_xi.functions[i], e_eta.functions[j] } ) );
        return out;
    }
}
