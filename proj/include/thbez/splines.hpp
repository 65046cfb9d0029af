#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace thbez
{
    /// Open, non-decreasing knot vector of degree p, normalized to [0,1].
    ///
    /// Construction snaps knots closer than the equality tolerance onto each
    /// other, then rescales the parametric domain affinely onto [0,1]. The end
    /// knots carry multiplicity exactly p+1 and no interior knot exceeds p.
    class KnotVector
    {
    public:
        static constexpr int kMinDegree = 1;
        static constexpr int kMaxDegree = 4;

        KnotVector( std::vector<double> values, int degree );

        int degree() const { return mDegree; }
        std::span<const double> values() const { return mValues; }
        double operator[]( size_t i ) const { return mValues[i]; }
        size_t size() const { return mValues.size(); }

        /// Number of basis functions n = size - p - 1.
        int numFunctions() const { return static_cast<int>( mValues.size() ) - mDegree - 1; }

        /// Non-empty knot spans, left to right.
        int numElements() const { return static_cast<int>( mElementSpans.size() ); }
        int elementSpan( int element ) const { return mElementSpans.at( element ); }
        /// Element owning a non-empty span, -1 for an empty span.
        int spanElement( int span ) const { return mSpanElement.at( span ); }

        /// Distinct knot values (element boundaries).
        std::vector<double> breakpoints() const;
        int multiplicity( double value ) const;

        /// Range of elements [first, last] on which function i is supported.
        std::array<int, 2> supportElements( int function ) const;

        double front() const { return mValues.front(); }
        double back() const { return mValues.back(); }

        bool operator==( const KnotVector& other ) const = default;

        static double tolerance() { return 1e-12; }

    private:
        std::vector<double> mValues;
        int mDegree;
        std::vector<int> mElementSpans;
        std::vector<int> mSpanElement;
    };

    /// Uniform open knot vector with the given number of elements on [0,1].
    KnotVector uniform_knot_vector( int degree, int elements );

    /// Greville abscissae, one per function.
    std::vector<double> greville( const KnotVector& kv );

    struct BasisValues
    {
        int span;
        /// N_{span-p .. span}(xi), p+1 values.
        std::vector<double> values;
    };

    /// Index s with values[s] <= xi < values[s+1]. The right end of the domain
    /// belongs to the last non-empty span.
    int find_span( const KnotVector& kv, double xi );

    /// Cox-de Boor evaluation of the p+1 functions that are nonzero on the span
    /// containing xi.
    BasisValues eval_basis( const KnotVector& kv, double xi );

    /// Evaluates the polynomial pieces living on `span` at xi, even when xi lies
    /// outside that span. Used for one-sided limits at element boundaries.
    BasisValues eval_basis_in_span( const KnotVector& kv, int span, double xi );

    /// Rows 0..max_order hold the k-th derivatives of the p+1 nonzero functions.
    Eigen::MatrixXd eval_basis_derivs( const KnotVector& kv, double xi, int max_order );
    Eigen::MatrixXd eval_basis_derivs_in_span( const KnotVector& kv, int span, double xi, int max_order );

    /// B_{i,p}(t) = C(p,i) t^i (1-t)^(p-i), i = 0..p.
    Eigen::VectorXd bernstein( int p, double t );
    /// Rows 0..max_order: derivatives of the Bernstein polynomials on [0,1].
    Eigen::MatrixXd bernstein_derivs( int p, double t, int max_order );

    /// Tensor-product B-spline space with one knot vector per direction (d = 1 or 2).
    ///
    /// Functions and elements are flattened lexicographically with the first
    /// direction running fastest.
    class TensorSpace
    {
    public:
        explicit TensorSpace( std::vector<KnotVector> directions );

        int dim() const { return static_cast<int>( mDirections.size() ); }
        const KnotVector& direction( int k ) const { return mDirections.at( k ); }
        std::span<const KnotVector> directions() const { return mDirections; }
        int degree( int k ) const { return mDirections.at( k ).degree(); }

        int numFunctions() const;
        int numFunctions( int k ) const { return mDirections.at( k ).numFunctions(); }
        int numElements() const;
        int numElements( int k ) const { return mDirections.at( k ).numElements(); }
        /// Number of functions nonzero on one element, prod (p_k + 1).
        int numLocalFunctions() const;

        int flattenFunction( std::array<int, 2> index ) const;
        std::array<int, 2> unflattenFunction( int flat ) const;
        int flattenElement( std::array<int, 2> index ) const;
        std::array<int, 2> unflattenElement( int flat ) const;

        /// Lower and upper corners of an element's parametric box.
        std::array<std::array<double, 2>, 2> elementBox( int element ) const;

        /// Flat indices of the functions nonzero on an element, ascending.
        std::vector<int> elementFunctions( int element ) const;

        bool operator==( const TensorSpace& other ) const = default;

    private:
        std::vector<KnotVector> mDirections;
    };

    /// Physical control points, one row per function (lexicographic order).
    struct ControlNet
    {
        Eigen::MatrixXd points;

        int count() const { return static_cast<int>( points.rows() ); }
        int spatialDim() const { return static_cast<int>( points.cols() ); }
    };

    /// Control net at the Greville points, reproducing the identity map.
    ControlNet identity_net( const TensorSpace& space );

    Eigen::VectorXd eval_curve( const KnotVector& kv, const ControlNet& net, double xi );
    Eigen::VectorXd eval_surface( const TensorSpace& space, const ControlNet& net, double xi, double eta );
}
