#include <thbez/multilevel.hpp>

#include <thbez/errors.hpp>

#include <algorithm>
#include <map>
#include <string>

namespace thbez
{
    namespace
    {
        using Triplets = std::vector<Eigen::Triplet<double>>;

        // Unit rows for the active functions of one level, appended below `rowOffset`.
        void append_unit_rows( const HierarchicalSpace& h, const int level, const int rowOffset, Triplets& out )
        {
            int row = rowOffset;
            for( const int f : h.activeIndices( level ) ) out.emplace_back( row++, f, 1.0 );
        }

        std::vector<GlobalExtraction> build_all_levels( const HierarchicalSpace& h, const int upTo )
        {
            std::vector<GlobalExtraction> out;
            int rows = 0;
            for( int l = 0; l <= upTo; ++l )
            {
                const int ncols = h.level( l ).numFunctions();
                Triplets triplets;
                if( l > 0 )
                {
                    // Re-expand the previous operator into this level, then drop the
                    // children whose support lies inside this level's subdomain.
                    const auto& prev = out.back().matrix;
                    Eigen::SparseMatrix<double> expanded = prev * h.subdivision( l - 1 ).transpose();
                    for( int c = 0; c < expanded.outerSize(); ++c )
                    {
                        if( h.functionState( { l, c } ) != FunctionState::Passive ) continue;
                        for( Eigen::SparseMatrix<double>::InnerIterator it( expanded, c ); it; ++it )
                            triplets.emplace_back( static_cast<int>( it.row() ), c, it.value() );
                    }
                }
                const int coarseRows = rows;
                append_unit_rows( h, l, coarseRows, triplets );
                rows += static_cast<int>( h.activeIndices( l ).size() );

                GlobalExtraction g;
                g.level = l;
                g.rowFunctions.resize( rows );
                for( int r = 0; r < rows; ++r ) g.rowFunctions[r] = r;
                g.matrix.resize( rows, ncols );
                g.matrix.setFromTriplets( triplets.begin(), triplets.end() );
                out.push_back( std::move( g ) );
            }
            return out;
        }
    }

    MultilevelExtraction::MultilevelExtraction( HierarchicalSpace h ) : mSpace( std::move( h ) )
    {
        mGlobal = build_all_levels( mSpace, mSpace.finestLevel() );
        for( int l = 0; l < mSpace.numLevels(); ++l )
        {
            std::array<std::vector<ExtractionOperator>, 2> ops;
            for( int k = 0; k < mSpace.dim(); ++k ) ops[k] = decompose( mSpace.level( l ).direction( k ) );
            mBezier.push_back( std::move( ops ) );
        }
    }

    void MultilevelExtraction::requireActive( const ElementKey key ) const
    {
        if( mSpace.elementState( key ) != ElementState::Active )
            throw ArgumentError( "element (" + std::to_string( key.level ) + ", " + std::to_string( key.index ) +
                                 ") is not active" );
    }

    ExtractionOperator MultilevelExtraction::bezier( const ElementKey key ) const
    {
        const auto& space = mSpace.level( key.level );
        if( key.index < 0 or key.index >= space.numElements() ) throw ArgumentError( "element index out of range" );
        const auto idx = space.unflattenElement( key.index );
        const auto& ops = mBezier.at( key.level );
        if( space.dim() == 1 ) return ops[0][idx[0]];
        return tensor_extraction( ops[0][idx[0]], ops[1][idx[1]], space );
    }

    LocalExtraction MultilevelExtraction::local( const ElementKey key ) const
    {
        requireActive( key );
        const auto& g = mGlobal.at( key.level ).matrix;
        LocalExtraction out;
        out.columns = mSpace.level( key.level ).elementFunctions( key.index );

        std::map<int, std::vector<std::pair<int, double>>> rows;
        for( size_t a = 0; a < out.columns.size(); ++a )
            for( Eigen::SparseMatrix<double>::InnerIterator it( g, out.columns[a] ); it; ++it )
                if( it.value() != 0.0 ) rows[static_cast<int>( it.row() )].emplace_back( static_cast<int>( a ), it.value() );

        out.matrix = Eigen::MatrixXd::Zero( static_cast<Eigen::Index>( rows.size() ),
                                            static_cast<Eigen::Index>( out.columns.size() ) );
        int r = 0;
        for( const auto& [row, entries] : rows )
        {
            out.functions.push_back( mGlobal[key.level].rowFunctions[row] );
            for( const auto& [a, v] : entries ) out.matrix( r, a ) = v;
            ++r;
        }
        return out;
    }

    ElementRecord MultilevelExtraction::element( const ElementKey key ) const
    {
        auto loc = local( key );
        auto ext = bezier( key );

        ElementRecord rec;
        rec.key = key;
        rec.ordinal = *mSpace.elementOrdinal( key );
        const auto& space = mSpace.level( key.level );
        const auto idx = space.unflattenElement( key.index );
        for( int k = 0; k < space.dim(); ++k ) rec.spans[k] = space.direction( k ).elementSpan( idx[k] );
        rec.box = space.elementBox( key.index );
        rec.functions = std::move( loc.functions );
        rec.M = std::move( loc.matrix );
        rec.E = std::move( ext.matrix );
        rec.C = rec.M * rec.E;
        return rec;
    }

    GlobalExtraction global_extraction( const HierarchicalSpace& h, const int level )
    {
        if( level < 0 or level > h.finestLevel() ) throw ArgumentError( "level outside the hierarchy" );
        return build_all_levels( h, level ).back();
    }

    LocalExtraction local_extraction( const HierarchicalSpace& h, const ElementKey key )
    {
        return MultilevelExtraction( h ).local( key );
    }

    ElementRecord element_operator( const HierarchicalSpace& h, const ElementKey key )
    {
        return MultilevelExtraction( h ).element( key );
    }
}
