#pragma once

#include <thbez/splines.hpp>

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace thbez
{
    /// Bisects every non-empty span once.
    KnotVector dyadic_refine( const KnotVector& kv );
    TensorSpace dyadic_refine( const TensorSpace& space );

    /// Two-scale relation N_coarse = S^T N_fine; S is n_fine x n_coarse and its
    /// columns hold the children coefficients of each parent function.
    Eigen::MatrixXd subdivision_matrix( const KnotVector& coarse, const KnotVector& fine );
    /// Bivariate S is the Kronecker product of the directional factors.
    Eigen::SparseMatrix<double> subdivision_matrix( const TensorSpace& coarse, const TensorSpace& fine );

    enum class ElementState : std::uint8_t
    {
        Outside,  ///< not part of this level's subdomain
        Active,   ///< leaf of the hierarchical mesh
        Refined,  ///< covered by active elements of finer levels
    };

    /// Status of a tensor function of one level. Passive and Refined together
    /// form the deactivated set.
    enum class FunctionState : std::uint8_t
    {
        Passive,  ///< support leaves the level's subdomain
        Active,
        Refined,  ///< support inside the level's subdomain but without an active element
    };

    struct ElementKey
    {
        int level = 0;
        int index = 0;
        auto operator<=>( const ElementKey& ) const = default;
    };

    struct FunctionKey
    {
        int level = 0;
        int index = 0;
        auto operator<=>( const FunctionKey& ) const = default;
    };

    using Point = std::array<double, 2>;

    /// Multi-level spline space built from nested dyadic levels of one base
    /// TensorSpace. Immutable; `refine` returns a new space. Level geometry and
    /// subdivision matrices are shared between refined copies.
    ///
    /// Active functions carry global ids ordered by (level, tensor index); active
    /// elements are ordered the same way.
    class HierarchicalSpace
    {
    public:
        explicit HierarchicalSpace( TensorSpace base );

        int dim() const { return base().dim(); }
        int numLevels() const { return static_cast<int>( mLevels.size() ); }
        int finestLevel() const { return numLevels() - 1; }
        const TensorSpace& base() const { return mLevels.front().geometry->space; }
        const TensorSpace& level( int l ) const { return mLevels.at( l ).geometry->space; }

        /// S between level l and l+1.
        const Eigen::SparseMatrix<double>& subdivision( int l ) const;

        ElementState elementState( ElementKey key ) const;
        FunctionState functionState( FunctionKey key ) const;

        const std::vector<ElementKey>& activeElements() const { return mActiveElements; }
        const std::vector<FunctionKey>& activeFunctions() const { return mActiveFunctions; }
        int numActiveFunctions() const { return static_cast<int>( mActiveFunctions.size() ); }

        std::optional<int> functionId( FunctionKey key ) const;
        std::optional<int> elementOrdinal( ElementKey key ) const;

        /// Ascending tensor indices of active / deactivated functions of a level.
        std::vector<int> activeIndices( int level ) const;
        std::vector<int> deactivatedIndices( int level ) const;

        /// Active element containing the point (right-continuous except at the
        /// domain end).
        ElementKey locate( const Point& point ) const;

        /// Parametric box of an element of any level.
        std::array<std::array<double, 2>, 2> elementBox( ElementKey key ) const;

        /// Element of `level` that contains the point.
        int elementAt( int level, const Point& point ) const;

        friend HierarchicalSpace refine( const HierarchicalSpace& h, std::span<const ElementKey> marked );

    private:
        struct LevelGeometry
        {
            TensorSpace space;
            Eigen::SparseMatrix<double> fromCoarser;
        };

        struct Level
        {
            std::shared_ptr<const LevelGeometry> geometry;
            std::vector<ElementState> elements;
            std::vector<FunctionState> functions;
            std::vector<int> functionIds;
            std::vector<int> elementOrdinals;
        };

        void appendLevel();
        void classify();

        std::vector<Level> mLevels;
        std::vector<ElementKey> mActiveElements;
        std::vector<FunctionKey> mActiveFunctions;
    };

    /// Deactivates the marked elements and activates their children, appending a
    /// finer level when needed. A level-l function is active iff its support lies
    /// in the level-l subdomain and contains at least one active level-l element.
    HierarchicalSpace refine( const HierarchicalSpace& h, std::span<const ElementKey> marked );

    /// Active elements whose parametric box overlaps the open region
    /// (lower[k], upper[k]) in every direction.
    std::vector<ElementKey> elements_in_region( const HierarchicalSpace& h, const Point& lower, const Point& upper );

    /// Sparse coefficient vector, sorted by index.
    using SparseCoefficients = std::vector<std::pair<int, double>>;

    /// Truncated representation of an active function. `levels[k]` holds its
    /// coefficients over level key.level + 1 + k after re-expansion through S and
    /// removal of the children whose support lies inside that level's subdomain.
    struct TruncatedFunction
    {
        FunctionKey key;
        bool truncated = false;
        std::vector<SparseCoefficients> levels;

        /// Coefficients over the finest level (the function itself when it lives there).
        SparseCoefficients finest() const;
    };

    TruncatedFunction truncation( const HierarchicalSpace& h, FunctionKey key );

    struct ThbPointValues
    {
        std::vector<int> ids;
        std::vector<double> values;
        /// One row per id, one column per parametric direction (empty unless requested).
        Eigen::MatrixXd gradients;
    };

    /// Evaluates truncated hierarchical functions through Cox-de Boor on the finest
    /// level and the truncated coefficients of every active function. No Bezier
    /// extraction is involved.
    class ThbEvaluator
    {
    public:
        explicit ThbEvaluator( HierarchicalSpace h );

        const HierarchicalSpace& hierarchy() const { return mSpace; }
        const TruncatedFunction& function( int id ) const { return mFunctions.at( id ); }

        ThbPointValues eval( const Point& point, bool with_gradients = false ) const;

    private:
        HierarchicalSpace mSpace;
        std::vector<TruncatedFunction> mFunctions;
        std::vector<SparseCoefficients> mFinest;
    };

    ThbPointValues eval_thb( const HierarchicalSpace& h, const Point& point, bool with_gradients = false );
}
