#pragma once

#include <thbez/splines.hpp>

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace thbez
{
    /// Result of refining a knot vector. `transfer` maps coarse control
    /// coefficients to refined ones (P_fine = T P_coarse), so the coarse basis
    /// satisfies N_coarse = T^T N_fine. Every row sums to one.
    struct KnotInsertionResult
    {
        KnotVector refined;
        Eigen::MatrixXd transfer;
    };

    KnotInsertionResult insert_knot( const KnotVector& kv, double xi_hat );

    /// Inserts the knots one at a time in the given order and composes the transfers.
    KnotInsertionResult insert_knots( const KnotVector& kv, std::span<const double> knots );

    /// Bezier extraction operator of one element: N_local = matrix * B, where
    /// rows follow the element's functions (ascending global index) and
    /// columns follow the Bernstein polynomials on the reference interval [0,1].
    struct ExtractionOperator
    {
        int element = 0;
        Eigen::MatrixXd matrix;
        std::vector<int> functions;
    };

    /// One extraction operator per element, built by raising every interior
    /// knot to multiplicity p through repeated single-knot insertion.
    std::vector<ExtractionOperator> decompose( const KnotVector& kv );

    /// Bivariate operator from the two univariate ones. Rows and columns are
    /// flattened with the first direction running fastest.
    ExtractionOperator tensor_extraction( const ExtractionOperator& e_xi, const ExtractionOperator& e_eta,
                                          const TensorSpace& space );

    /// Maps an element parameter to the reference interval of that element.
    inline double to_reference( double xi, double lo, double hi ) { return ( xi - lo ) / ( hi - lo ); }
}
