#pragma once

#include <thbez/bezier.hpp>
#include <thbez/hierarchy.hpp>

#include <array>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace thbez
{
    /// M^glob for one level: one row per active function of levels <= level,
    /// one column per tensor function of that level. Rows of coarser functions
    /// hold their truncated subdivision coefficients; rows of the level's own
    /// active functions are unit rows.
    struct GlobalExtraction
    {
        int level = 0;
        std::vector<int> rowFunctions;
        Eigen::SparseMatrix<double> matrix;
    };

    /// M^loc of one element: the global operator restricted to the element's
    /// tensor functions (columns) and the active functions that touch it (rows).
    struct LocalExtraction
    {
        std::vector<int> functions;
        std::vector<int> columns;
        Eigen::MatrixXd matrix;
    };

    /// Per-element operators with C = M E, mapping the reference Bernstein basis
    /// to the active hierarchical functions supported on the element.
    struct ElementRecord
    {
        ElementKey key;
        int ordinal = 0;
        std::array<int, 2> spans{ 0, 0 };
        std::array<std::array<double, 2>, 2> box{};
        std::vector<int> functions;
        Eigen::MatrixXd M;
        Eigen::MatrixXd E;
        Eigen::MatrixXd C;
    };

    /// Builds and caches M^glob for every level and the Bezier extraction of
    /// every level's knot vectors. Element records are produced on demand.
    class MultilevelExtraction
    {
    public:
        explicit MultilevelExtraction( HierarchicalSpace h );

        const HierarchicalSpace& hierarchy() const { return mSpace; }
        const GlobalExtraction& global( int level ) const { return mGlobal.at( level ); }

        /// Bezier extraction of a level's element (tensorized in 2D).
        ExtractionOperator bezier( ElementKey key ) const;

        LocalExtraction local( ElementKey key ) const;
        ElementRecord element( ElementKey key ) const;

    private:
        void requireActive( ElementKey key ) const;

        HierarchicalSpace mSpace;
        std::vector<GlobalExtraction> mGlobal;
        std::vector<std::array<std::vector<ExtractionOperator>, 2>> mBezier;
    };

    GlobalExtraction global_extraction( const HierarchicalSpace& h, int level );
    LocalExtraction local_extraction( const HierarchicalSpace& h, ElementKey key );
    ElementRecord element_operator( const HierarchicalSpace& h, ElementKey key );
}
