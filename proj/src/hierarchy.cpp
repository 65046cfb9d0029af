#include <thbez/hierarchy.hpp>

#include <thbez/bezier.hpp>
#include <thbez/errors.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace thbez
{
    KnotVector dyadic_refine( const KnotVector& kv )
    {
        std::vector<double> values( kv.values().begin(), kv.values().end() );
        for( int e = 0; e < kv.numElements(); ++e )
        {
            const int s = kv.elementSpan( e );
            values.push_back( 0.5 * ( kv[s] + kv[s + 1] ) );
        }
        std::sort( values.begin(), values.end() );
        return KnotVector( std::move( values ), kv.degree() );
    }

    TensorSpace dyadic_refine( const TensorSpace& space )
    {
        std::vector<KnotVector> dirs;
        for( const auto& kv : space.directions() ) dirs.push_back( dyadic_refine( kv ) );
        return TensorSpace( std::move( dirs ) );
    }

    Eigen::MatrixXd subdivision_matrix( const KnotVector& coarse, const KnotVector& fine )
    {
        if( coarse.degree() != fine.degree() ) throw NestingError( "nested spaces must share the degree" );
        const double tol = KnotVector::tolerance();
        std::vector<double> extra;
        size_t i = 0;
        for( const double f : fine.values() )
        {
            if( i < coarse.size() and std::abs( coarse[i] - f ) <= tol )
                ++i;
            else
                extra.push_back( f );
        }
        if( i != coarse.size() ) throw NestingError( "coarse knot vector is not contained in the fine one" );

        auto result = insert_knots( coarse, extra );
        for( size_t k = 0; k < fine.size(); ++k )
            if( std::abs( result.refined[k] - fine[k] ) > tol )
                throw NestingError( "refined knot vector does not reproduce the fine one" );
        return std::move( result.transfer );
    }

    Eigen::SparseMatrix<double> subdivision_matrix( const TensorSpace& coarse, const TensorSpace& fine )
    {
        if( coarse.dim() != fine.dim() ) throw NestingError( "nested spaces must share the dimension" );
        std::array<Eigen::MatrixXd, 2> factors;
        for( int k = 0; k < coarse.dim(); ++k )
            factors[k] = subdivision_matrix( coarse.direction( k ), fine.direction( k ) );
        if( coarse.dim() == 1 ) factors[1] = Eigen::MatrixXd::Ones( 1, 1 );

        std::vector<Eigen::Triplet<double>> triplets;
        const auto& sx = factors[0];
        const auto& sy = factors[1];
        for( Eigen::Index cj = 0; cj < sy.cols(); ++cj )
            for( Eigen::Index fj = 0; fj < sy.rows(); ++fj )
            {
                if( sy( fj, cj ) == 0.0 ) continue;
                for( Eigen::Index ci = 0; ci < sx.cols(); ++ci )
                    for( Eigen::Index fi = 0; fi < sx.rows(); ++fi )
                    {
                        if( sx( fi, ci ) == 0.0 ) continue;
                        triplets.emplace_back( fi + sx.rows() * fj, ci + sx.cols() * cj, sx( fi, ci ) * sy( fj, cj ) );
                    }
            }
        Eigen::SparseMatrix<double> s( fine.numFunctions(), coarse.numFunctions() );
        s.setFromTriplets( triplets.begin(), triplets.end() );
        return s;
    }

    HierarchicalSpace::HierarchicalSpace( TensorSpace base )
    {
        Level level;
        level.geometry = std::make_shared<const LevelGeometry>( LevelGeometry{ std::move( base ), {} } );
        level.elements.assign( level.geometry->space.numElements(), ElementState::Active );
        mLevels.push_back( std::move( level ) );
        classify();
    }

    const Eigen::SparseMatrix<double>& HierarchicalSpace::subdivision( const int l ) const
    {
        if( l < 0 or l + 1 >= numLevels() ) throw ArgumentError( "no subdivision matrix above level " + std::to_string( l ) );
        return mLevels[l + 1].geometry->fromCoarser;
    }

    ElementState HierarchicalSpace::elementState( const ElementKey key ) const
    {
        if( key.level < 0 or key.level >= numLevels() ) return ElementState::Outside;
        const auto& states = mLevels[key.level].elements;
        if( key.index < 0 or key.index >= static_cast<int>( states.size() ) ) return ElementState::Outside;
        return states[key.index];
    }

    FunctionState HierarchicalSpace::functionState( const FunctionKey key ) const
    {
        if( key.level < 0 or key.level >= numLevels() ) return FunctionState::Passive;
        const auto& states = mLevels[key.level].functions;
        if( key.index < 0 or key.index >= static_cast<int>( states.size() ) )
            throw ArgumentError( "function index out of range" );
        return states[key.index];
    }

    std::optional<int> HierarchicalSpace::functionId( const FunctionKey key ) const
    {
        if( key.level < 0 or key.level >= numLevels() ) return std::nullopt;
        const auto& ids = mLevels[key.level].functionIds;
        if( key.index < 0 or key.index >= static_cast<int>( ids.size() ) or ids[key.index] < 0 ) return std::nullopt;
        return ids[key.index];
    }

    std::optional<int> HierarchicalSpace::elementOrdinal( const ElementKey key ) const
    {
        if( elementState( key ) != ElementState::Active ) return std::nullopt;
        return mLevels[key.level].elementOrdinals[key.index];
    }

    std::vector<int> HierarchicalSpace::activeIndices( const int level ) const
    {
        std::vector<int> out;
        const auto& states = mLevels.at( level ).functions;
        for( size_t i = 0; i < states.size(); ++i )
            if( states[i] == FunctionState::Active ) out.push_back( static_cast<int>( i ) );
        return out;
    }

    std::vector<int> HierarchicalSpace::deactivatedIndices( const int level ) const
    {
        std::vector<int> out;
        const auto& states = mLevels.at( level ).functions;
        for( size_t i = 0; i < states.size(); ++i )
            if( states[i] != FunctionState::Active ) out.push_back( static_cast<int>( i ) );
        return out;
    }

    int HierarchicalSpace::elementAt( const int level, const Point& point ) const
    {
        const auto& space = this->level( level );
        std::array<int, 2> idx{ 0, 0 };
        for( int k = 0; k < space.dim(); ++k )
        {
            const auto& kv = space.direction( k );
            idx[k] = kv.spanElement( find_span( kv, point[k] ) );
        }
        return space.flattenElement( idx );
    }

    ElementKey HierarchicalSpace::locate( const Point& point ) const
    {
        for( int l = 0; l < numLevels(); ++l )
        {
            const ElementKey key{ l, elementAt( l, point ) };
            const auto state = elementState( key );
            if( state == ElementState::Active ) return key;
            if( state == ElementState::Outside ) break;
        }
        throw std::logic_error( "hierarchical mesh does not cover the point" );
    }

    std::array<std::array<double, 2>, 2> HierarchicalSpace::elementBox( const ElementKey key ) const
    {
        return level( key.level ).elementBox( key.index );
    }

    void HierarchicalSpace::appendLevel()
    {
        const auto& coarse = mLevels.back().geometry->space;
        auto fine = dyadic_refine( coarse );
        auto s = subdivision_matrix( coarse, fine );
        Level level;
        level.geometry = std::make_shared<const LevelGeometry>( LevelGeometry{ std::move( fine ), std::move( s ) } );
        level.elements.assign( level.geometry->space.numElements(), ElementState::Outside );
        mLevels.push_back( std::move( level ) );
    }

    void HierarchicalSpace::classify()
    {
        mActiveElements.clear();
        mActiveFunctions.clear();
        int nextId = 0;
        for( int l = 0; l < numLevels(); ++l )
        {
            auto& level = mLevels[l];
            const auto& space = level.geometry->space;

            level.elementOrdinals.assign( level.elements.size(), -1 );
            for( int e = 0; e < static_cast<int>( level.elements.size() ); ++e )
            {
                if( level.elements[e] != ElementState::Active ) continue;
                level.elementOrdinals[e] = static_cast<int>( mActiveElements.size() );
                mActiveElements.push_back( { l, e } );
            }

            const int nf = space.numFunctions();
            level.functions.assign( nf, FunctionState::Passive );
            level.functionIds.assign( nf, -1 );
            for( int f = 0; f < nf; ++f )
            {
                const auto idx = space.unflattenFunction( f );
                std::array<std::array<int, 2>, 2> range{ { { 0, 0 }, { 0, 0 } } };
                for( int k = 0; k < space.dim(); ++k )
                {
                    const auto r = space.direction( k ).supportElements( idx[k] );
                    range[k] = { r[0], r[1] };
                }
                bool inside = true;
                bool anyActive = false;
                for( int ey = range[1][0]; ey <= range[1][1] and inside; ++ey )
                    for( int ex = range[0][0]; ex <= range[0][1]; ++ex )
                    {
                        const auto state = level.elements[space.flattenElement( { ex, ey } )];
                        if( state == ElementState::Outside )
                        {
                            inside = false;
                            break;
                        }
                        anyActive = anyActive or state == ElementState::Active;
                    }
                if( not inside ) continue;
                level.functions[f] = anyActive ? FunctionState::Active : FunctionState::Refined;
                if( anyActive )
                {
                    level.functionIds[f] = nextId++;
                    mActiveFunctions.push_back( { l, f } );
                }
            }
        }
    }

    HierarchicalSpace refine( const HierarchicalSpace& h, const std::span<const ElementKey> marked )
    {
        std::vector<ElementKey> keys( marked.begin(), marked.end() );
        std::sort( keys.begin(), keys.end() );
        keys.erase( std::unique( keys.begin(), keys.end() ), keys.end() );
        for( const auto& key : keys )
            if( h.elementState( key ) != ElementState::Active )
                throw ArgumentError( "cannot refine element (" + std::to_string( key.level ) + ", " +
                                     std::to_string( key.index ) + "): it is not active" );
        if( keys.empty() ) return h;

        HierarchicalSpace out = h;
        for( const auto& key : keys )
        {
            if( key.level + 1 == out.numLevels() ) out.appendLevel();
            out.mLevels[key.level].elements[key.index] = ElementState::Refined;

            const auto& coarse = out.level( key.level );
            const auto& fine = out.level( key.level + 1 );
            const auto idx = coarse.unflattenElement( key.index );
            const int ny = coarse.dim() == 2 ? 2 : 1;
            for( int b = 0; b < ny; ++b )
                for( int a = 0; a < 2; ++a )
                {
                    const std::array<int, 2> child{ 2 * idx[0] + a, coarse.dim() == 2 ? 2 * idx[1] + b : 0 };
                    out.mLevels[key.level + 1].elements[fine.flattenElement( child )] = ElementState::Active;
                }
        }
        out.classify();
        return out;
    }

    std::vector<ElementKey> elements_in_region( const HierarchicalSpace& h, const Point& lower, const Point& upper )
    {
        std::vector<ElementKey> out;
        for( const auto& key : h.activeElements() )
        {
            const auto box = h.elementBox( key );
            bool overlaps = true;
            for( int k = 0; k < h.dim(); ++k )
                overlaps = overlaps and box[0][k] < upper[k] and lower[k] < box[1][k];
            if( overlaps ) out.push_back( key );
        }
        return out;
    }

    SparseCoefficients TruncatedFunction::finest() const
    {
        if( levels.empty() ) return { { key.index, 1.0 } };
        return levels.back();
    }

    TruncatedFunction truncation( const HierarchicalSpace& h, const FunctionKey key )
    {
        if( key.level < 0 or key.level >= h.numLevels() or h.functionState( key ) != FunctionState::Active )
            throw ArgumentError( "truncation requires an active function" );

        TruncatedFunction out{ key, false, {} };
        SparseCoefficients current{ { key.index, 1.0 } };
        for( int l = key.level; l < h.finestLevel(); ++l )
        {
            const auto& s = h.subdivision( l );
            std::map<int, double> expanded;
            for( const auto& [j, c] : current )
                for( Eigen::SparseMatrix<double>::InnerIterator it( s, j ); it; ++it )
                    expanded[static_cast<int>( it.row() )] += c * it.value();

            SparseCoefficients kept;
            for( const auto& [i, c] : expanded )
            {
                if( h.functionState( { l + 1, i } ) == FunctionState::Passive )
                    kept.emplace_back( i, c );
                else if( c != 0.0 )
                    out.truncated = true;
            }
            out.levels.push_back( kept );
            current = std::move( kept );
        }
        return out;
    }

    ThbEvaluator::ThbEvaluator( HierarchicalSpace h ) : mSpace( std::move( h ) )
    {
        mFunctions.reserve( mSpace.numActiveFunctions() );
        mFinest.reserve( mSpace.numActiveFunctions() );
        for( const auto& key : mSpace.activeFunctions() )
        {
            mFunctions.push_back( truncation( mSpace, key ) );
            mFinest.push_back( mFunctions.back().finest() );
        }
    }

    ThbPointValues ThbEvaluator::eval( const Point& point, const bool with_gradients ) const
    {
        const int dim = mSpace.dim();
        const int order = with_gradients ? 1 : 0;

        // Finest-level tensor functions nonzero at the point with their values and gradients.
        const auto& finest = mSpace.level( mSpace.finestLevel() );
        std::array<Eigen::MatrixXd, 2> ders;
        std::array<int, 2> first{ 0, 0 };
        std::array<int, 2> count{ 1, 1 };
        for( int k = 0; k < dim; ++k )
        {
            const auto& kv = finest.direction( k );
            const int span = find_span( kv, point[k] );
            ders[k] = eval_basis_derivs_in_span( kv, span, point[k], order );
            first[k] = span - kv.degree();
            count[k] = kv.degree() + 1;
        }
        if( dim == 1 ) ders[1] = Eigen::MatrixXd::Ones( order + 1, 1 );

        struct Local
        {
            int index;
            double value;
            std::array<double, 2> grad;
        };
        std::vector<Local> locals;
        for( int b = 0; b < count[1]; ++b )
            for( int a = 0; a < count[0]; ++a )
            {
                Local loc{ finest.flattenFunction( { first[0] + a, first[1] + b } ), ders[0]( 0, a ) * ders[1]( 0, b ), { 0.0, 0.0 } };
                if( with_gradients )
                {
                    loc.grad[0] = ders[0]( 1, a ) * ders[1]( 0, b );
                    if( dim == 2 ) loc.grad[1] = ders[0]( 0, a ) * ders[1]( 1, b );
                }
                locals.push_back( loc );
            }

        ThbPointValues out;
        std::vector<std::array<double, 2>> grads;
        for( int l = 0; l < mSpace.numLevels(); ++l )
        {
            const auto& space = mSpace.level( l );
            std::array<int, 2> lfirst{ 0, 0 };
            for( int k = 0; k < dim; ++k )
                lfirst[k] = find_span( space.direction( k ), point[k] ) - space.degree( k );
            const int ny = dim == 2 ? space.degree( 1 ) + 1 : 1;
            for( int b = 0; b < ny; ++b )
                for( int a = 0; a <= space.degree( 0 ); ++a )
                {
                    const auto id = mSpace.functionId( { l, space.flattenFunction( { lfirst[0] + a, lfirst[1] + b } ) } );
                    if( not id ) continue;
                    const auto& coeffs = mFinest[*id];
                    double value = 0.0;
                    std::array<double, 2> grad{ 0.0, 0.0 };
                    for( const auto& loc : locals )
                    {
                        const auto it = std::lower_bound( coeffs.begin(), coeffs.end(), loc.index,
                                                          []( const auto& entry, int idx ) { return entry.first < idx; } );
                        if( it == coeffs.end() or it->first != loc.index ) continue;
                        value += it->second * loc.value;
                        grad[0] += it->second * loc.grad[0];
                        grad[1] += it->second * loc.grad[1];
                    }
                    out.ids.push_back( *id );
                    out.values.push_back( value );
                    grads.push_back( grad );
                }
        }

        if( with_gradients )
        {
            out.gradients.resize( static_cast<Eigen::Index>( grads.size() ), dim );
            for( size_t r = 0; r < grads.size(); ++r )
                for( int k = 0; k < dim; ++k ) out.gradients( r, k ) = grads[r][k];
        }
        return out;
    }

    ThbPointValues eval_thb( const HierarchicalSpace& h, const Point& point, const bool with_gradients )
    {
        return ThbEvaluator( h ).eval( point, with_gradients );
    }
}
