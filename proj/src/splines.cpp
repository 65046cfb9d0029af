#include <thbez/splines.hpp>

#include <thbez/errors.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace thbez
{
    KnotVector::KnotVector( std::vector<double> values, const int degree )
        : mValues( std::move( values ) ), mDegree( degree )
    {
        if( mDegree < kMinDegree or mDegree > kMaxDegree )
            throw ArgumentError( "degree " + std::to_string( mDegree ) + " outside supported range [1,4]" );
        const size_t p = static_cast<size_t>( mDegree );
        if( mValues.size() < 2 * ( p + 1 ) )
            throw ArgumentError( "knot vector too short for degree " + std::to_string( mDegree ) );
        for( double v : mValues )
            if( not std::isfinite( v ) ) throw ArgumentError( "knot vector contains non-finite values" );

        const double lo = mValues.front();
        const double hi = mValues.back();
        const double tol = tolerance() * std::max( 1.0, std::abs( hi - lo ) );
        for( size_t i = 0; i + 1 < mValues.size(); ++i )
            if( mValues[i] > mValues[i + 1] + tol ) throw ArgumentError( "knot vector is decreasing" );
        if( hi - lo <= tol ) throw ArgumentError( "knot vector has an empty parametric domain" );

        // Snap near-equal knots onto the first knot of their cluster.
        for( size_t i = 1; i < mValues.size(); ++i )
            if( std::abs( mValues[i] - mValues[i - 1] ) <= tol ) mValues[i] = mValues[i - 1];

        for( double& v : mValues ) v = ( v - lo ) / ( hi - lo );
        const size_t last = mValues.size() - 1;
        for( size_t i = 0; i <= last; ++i )
        {
            if( mValues[i] == mValues.front() ) mValues[i] = 0.0;
            if( mValues[i] == mValues.back() ) mValues[i] = 1.0;
        }

        const size_t n = mValues.size() - p - 1;
        for( size_t i = 0; i <= p; ++i )
            if( mValues[i] != 0.0 or mValues[last - i] != 1.0 )
                throw ArgumentError( "knot vector is not open: end knots need multiplicity p+1" );
        if( mValues[p + 1] == 0.0 or mValues[n - 1] == 1.0 )
            throw ArgumentError( "end knot multiplicity exceeds p+1" );

        size_t run = 1;
        for( size_t i = p + 2; i < n; ++i )
        {
            run = ( mValues[i] == mValues[i - 1] ) ? run + 1 : 1;
            if( run > p ) throw ArgumentError( "interior knot multiplicity exceeds the degree" );
        }

        mSpanElement.assign( mValues.size() - 1, -1 );
        for( size_t s = p; s < n; ++s )
        {
            if( mValues[s] < mValues[s + 1] )
            {
                mSpanElement[s] = static_cast<int>( mElementSpans.size() );
                mElementSpans.push_back( static_cast<int>( s ) );
            }
        }
    }

    std::vector<double> KnotVector::breakpoints() const
    {
        std::vector<double> out;
        out.push_back( mValues.front() );
        for( int s : mElementSpans ) out.push_back( mValues[s + 1] );
        return out;
    }

    int KnotVector::multiplicity( const double value ) const
    {
        return static_cast<int>( std::count_if( mValues.begin(), mValues.end(), [&]( double v ) {
            return std::abs( v - value ) <= tolerance();
        } ) );
    }

    std::array<int, 2> KnotVector::supportElements( const int function ) const
    {
        if( function < 0 or function >= numFunctions() ) throw ArgumentError( "function index out of range" );
        int first = -1;
        int last = -1;
        for( int s = function; s <= function + mDegree; ++s )
        {
            const int e = mSpanElement[s];
            if( e < 0 ) continue;
            if( first < 0 ) first = e;
            last = e;
        }
        return { first, last };
    }

    KnotVector uniform_knot_vector( const int degree, const int elements )
    {
        if( elements < 1 ) throw ArgumentError( "need at least one element" );
        std::vector<double> values( degree, 0.0 );
        for( int i = 0; i <= elements; ++i ) values.push_back( static_cast<double>( i ) / elements );
        values.insert( values.end(), degree, 1.0 );
        return KnotVector( std::move( values ), degree );
    }

    std::vector<double> greville( const KnotVector& kv )
    {
        const int p = kv.degree();
        std::vector<double> out( kv.numFunctions() );
        for( int i = 0; i < kv.numFunctions(); ++i )
        {
            double sum = 0.0;
            for( int k = 1; k <= p; ++k ) sum += kv[i + k];
            out[i] = sum / p;
        }
        return out;
    }

    int find_span( const KnotVector& kv, const double xi )
    {
        const double tol = KnotVector::tolerance();
        if( not( xi >= kv.front() - tol and xi <= kv.back() + tol ) )
            throw DomainError( "parameter " + std::to_string( xi ) + " outside the knot vector domain" );
        const int p = kv.degree();
        const int n = kv.numFunctions();
        if( xi >= kv[n] ) return n - 1;
        if( xi <= kv[p] ) return kv.elementSpan( 0 );
        const auto values = kv.values();
        const auto it = std::upper_bound( values.begin() + p, values.begin() + n + 1, xi );
        return static_cast<int>( it - values.begin() ) - 1;
    }

    namespace
    {
        void check_span( const KnotVector& kv, const int span )
        {
            if( span < kv.degree() or span >= kv.numFunctions() or kv.spanElement( span ) < 0 )
                throw ArgumentError( "span " + std::to_string( span ) + " is not a non-empty knot span" );
        }
    }

    BasisValues eval_basis_in_span( const KnotVector& kv, const int span, const double xi )
    {
        check_span( kv, span );
        const int p = kv.degree();
        std::vector<double> N( p + 1, 0.0 );
        std::array<double, KnotVector::kMaxDegree + 1> left{};
        std::array<double, KnotVector::kMaxDegree + 1> right{};
        N[0] = 1.0;
        for( int j = 1; j <= p; ++j )
        {
            left[j] = xi - kv[span + 1 - j];
            right[j] = kv[span + j] - xi;
            double saved = 0.0;
            for( int r = 0; r < j; ++r )
            {
                const double temp = N[r] / ( right[r + 1] + left[j - r] );
                N[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            N[j] = saved;
        }
        return { span, std::move( N ) };
    }

    BasisValues eval_basis( const KnotVector& kv, const double xi )
    {
        return eval_basis_in_span( kv, find_span( kv, xi ), xi );
    }

    Eigen::MatrixXd eval_basis_derivs_in_span( const KnotVector& kv, const int span, const double xi, const int max_order )
    {
        const int p = kv.degree();
        if( max_order < 0 or max_order > p ) throw ArgumentError( "derivative order must lie in [0, p]" );
        check_span( kv, span );

        // Triangular table: upper part holds basis values, lower part knot differences.
        Eigen::MatrixXd ndu( p + 1, p + 1 );
        std::array<double, KnotVector::kMaxDegree + 1> left{};
        std::array<double, KnotVector::kMaxDegree + 1> right{};
        ndu( 0, 0 ) = 1.0;
        for( int j = 1; j <= p; ++j )
        {
            left[j] = xi - kv[span + 1 - j];
            right[j] = kv[span + j] - xi;
            double saved = 0.0;
            for( int r = 0; r < j; ++r )
            {
                ndu( j, r ) = right[r + 1] + left[j - r];
                const double temp = ndu( r, j - 1 ) / ndu( j, r );
                ndu( r, j ) = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu( j, j ) = saved;
        }

        Eigen::MatrixXd ders = Eigen::MatrixXd::Zero( max_order + 1, p + 1 );
        for( int j = 0; j <= p; ++j ) ders( 0, j ) = ndu( j, p );

        Eigen::MatrixXd a( 2, p + 1 );
        for( int r = 0; r <= p; ++r )
        {
            int s1 = 0;
            int s2 = 1;
            a( 0, 0 ) = 1.0;
            for( int k = 1; k <= max_order; ++k )
            {
                double d = 0.0;
                const int rk = r - k;
                const int pk = p - k;
                if( r >= k )
                {
                    a( s2, 0 ) = a( s1, 0 ) / ndu( pk + 1, rk );
                    d = a( s2, 0 ) * ndu( rk, pk );
                }
                const int j1 = rk >= -1 ? 1 : -rk;
                const int j2 = ( r - 1 <= pk ) ? k - 1 : p - r;
                for( int j = j1; j <= j2; ++j )
                {
                    a( s2, j ) = ( a( s1, j ) - a( s1, j - 1 ) ) / ndu( pk + 1, rk + j );
                    d += a( s2, j ) * ndu( rk + j, pk );
                }
                if( r <= pk )
                {
                    a( s2, k ) = -a( s1, k - 1 ) / ndu( pk + 1, r );
                    d += a( s2, k ) * ndu( r, pk );
                }
                ders( k, r ) = d;
                std::swap( s1, s2 );
            }
        }

        double factor = p;
        for( int k = 1; k <= max_order; ++k )
        {
            ders.row( k ) *= factor;
            factor *= ( p - k );
        }
        return ders;
    }

    Eigen::MatrixXd eval_basis_derivs( const KnotVector& kv, const double xi, const int max_order )
    {
        if( max_order < 0 or max_order > kv.degree() ) throw ArgumentError( "derivative order must lie in [0, p]" );
        return eval_basis_derivs_in_span( kv, find_span( kv, xi ), xi, max_order );
    }

    namespace
    {
        // Bernstein values of degree q by the de Casteljau-style recurrence.
        Eigen::VectorXd bernstein_recurrence( const int q, const double t )
        {
            Eigen::VectorXd b = Eigen::VectorXd::Zero( q + 1 );
            b( 0 ) = 1.0;
            const double s = 1.0 - t;
            for( int j = 1; j <= q; ++j )
            {
                double saved = 0.0;
                for( int k = 0; k < j; ++k )
                {
                    const double temp = b( k );
                    b( k ) = saved + s * temp;
                    saved = t * temp;
                }
                b( j ) = saved;
            }
            return b;
        }

        void check_unit( const double t )
        {
            if( not( t >= -1e-12 and t <= 1.0 + 1e-12 ) )
                throw DomainError( "Bernstein parameter " + std::to_string( t ) + " outside [0,1]" );
        }
    }

    Eigen::VectorXd bernstein( const int p, const double t )
    {
        if( p < 0 ) throw ArgumentError( "negative Bernstein degree" );
        check_unit( t );
        return bernstein_recurrence( p, t );
    }

    Eigen::MatrixXd bernstein_derivs( const int p, const double t, const int max_order )
    {
        if( p < 0 ) throw ArgumentError( "negative Bernstein degree" );
        if( max_order < 0 or max_order > p ) throw ArgumentError( "derivative order must lie in [0, p]" );
        check_unit( t );

        Eigen::MatrixXd out = Eigen::MatrixXd::Zero( max_order + 1, p + 1 );
        double falling = 1.0;
        for( int k = 0; k <= max_order; ++k )
        {
            const Eigen::VectorXd low = bernstein_recurrence( p - k, t );
            // d^k B_i^p = p!/(p-k)! sum_j (-1)^(k-j) C(k,j) B_{i-j}^{p-k}
            for( int i = 0; i <= p; ++i )
            {
                double sum = 0.0;
                double binom = 1.0;
                for( int j = 0; j <= k; ++j )
                {
                    const int idx = i - j;
                    if( idx >= 0 and idx <= p - k ) sum += ( ( k - j ) % 2 == 0 ? 1.0 : -1.0 ) * binom * low( idx );
                    binom = binom * ( k - j ) / ( j + 1 );
                }
                out( k, i ) = falling * sum;
            }
            falling *= ( p - k );
        }
        return out;
    }

    TensorSpace::TensorSpace( std::vector<KnotVector> directions ) : mDirections( std::move( directions ) )
    {
        if( mDirections.empty() or mDirections.size() > 2 )
            throw ArgumentError( "tensor spaces support one or two parametric directions" );
    }

    int TensorSpace::numFunctions() const
    {
        int n = 1;
        for( const auto& kv : mDirections ) n *= kv.numFunctions();
        return n;
    }

    int TensorSpace::numElements() const
    {
        int n = 1;
        for( const auto& kv : mDirections ) n *= kv.numElements();
        return n;
    }

    int TensorSpace::numLocalFunctions() const
    {
        int n = 1;
        for( const auto& kv : mDirections ) n *= kv.degree() + 1;
        return n;
    }

    int TensorSpace::flattenFunction( const std::array<int, 2> index ) const
    {
        return dim() == 1 ? index[0] : index[0] + numFunctions( 0 ) * index[1];
    }

    std::array<int, 2> TensorSpace::unflattenFunction( const int flat ) const
    {
        if( dim() == 1 ) return { flat, 0 };
        const int n0 = numFunctions( 0 );
        return { flat % n0, flat / n0 };
    }

    int TensorSpace::flattenElement( const std::array<int, 2> index ) const
    {
        return dim() == 1 ? index[0] : index[0] + numElements( 0 ) * index[1];
    }

    std::array<int, 2> TensorSpace::unflattenElement( const int flat ) const
    {
        if( dim() == 1 ) return { flat, 0 };
        const int n0 = numElements( 0 );
        return { flat % n0, flat / n0 };
    }

    std::array<std::array<double, 2>, 2> TensorSpace::elementBox( const int element ) const
    {
        if( element < 0 or element >= numElements() ) throw ArgumentError( "element index out of range" );
        const auto idx = unflattenElement( element );
        std::array<std::array<double, 2>, 2> box{};
        for( int k = 0; k < dim(); ++k )
        {
            const int s = mDirections[k].elementSpan( idx[k] );
            box[0][k] = mDirections[k][s];
            box[1][k] = mDirections[k][s + 1];
        }
        return box;
    }

    std::vector<int> TensorSpace::elementFunctions( const int element ) const
    {
        if( element < 0 or element >= numElements() ) throw ArgumentError( "element index out of range" );
        const auto idx = unflattenElement( element );
        std::array<int, 2> first{ 0, 0 };
        std::array<int, 2> count{ 1, 1 };
        for( int k = 0; k < dim(); ++k )
        {
            first[k] = mDirections[k].elementSpan( idx[k] ) - mDirections[k].degree();
            count[k] = mDirections[k].degree() + 1;
        }
        std::vector<int> out;
        out.reserve( count[0] * count[1] );
        for( int j = 0; j < count[1]; ++j )
            for( int i = 0; i < count[0]; ++i ) out.push_back( flattenFunction( { first[0] + i, first[1] + j } ) );
        return out;
    }

    ControlNet identity_net( const TensorSpace& space )
    {
        ControlNet net{ Eigen::MatrixXd( space.numFunctions(), space.dim() ) };
        std::array<std::vector<double>, 2> g;
        for( int k = 0; k < space.dim(); ++k ) g[k] = greville( space.direction( k ) );
        for( int f = 0; f < space.numFunctions(); ++f )
        {
            const auto idx = space.unflattenFunction( f );
            for( int k = 0; k < space.dim(); ++k ) net.points( f, k ) = g[k][idx[k]];
        }
        return net;
    }

    Eigen::VectorXd eval_curve( const KnotVector& kv, const ControlNet& net, const double xi )
    {
        if( net.count() != kv.numFunctions() )
            throw ArgumentError( "control net size does not match the number of basis functions" );
        const auto basis = eval_basis( kv, xi );
        const int first = basis.span - kv.degree();
        Eigen::VectorXd point = Eigen::VectorXd::Zero( net.spatialDim() );
        for( int a = 0; a <= kv.degree(); ++a ) point += basis.values[a] * net.points.row( first + a ).transpose();
        return point;
    }

    Eigen::VectorXd eval_surface( const TensorSpace& space, const ControlNet& net, const double xi, const double eta )
    {
        if( space.dim() != 2 ) throw ArgumentError( "surface evaluation requires a bivariate space" );
        if( net.count() != space.numFunctions() )
            throw ArgumentError( "control net size does not match the number of basis functions" );
        const auto bx = eval_basis( space.direction( 0 ), xi );
        const auto by = eval_basis( space.direction( 1 ), eta );
        const int fx = bx.span - space.degree( 0 );
        const int fy = by.span - space.degree( 1 );
        Eigen::VectorXd point = Eigen::VectorXd::Zero( net.spatialDim() );
        for( int b = 0; b <= space.degree( 1 ); ++b )
            for( int a = 0; a <= space.degree( 0 ); ++a )
                point += bx.values[a] * by.values[b] *
                         net.points.row( space.flattenFunction( { fx + a, fy + b } ) ).transpose();
        return point;
    }
}
