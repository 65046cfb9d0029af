#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "../oracles.hpp"

#include <thbez/errors.hpp>
#include <thbez/poisson.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace thbez;

namespace
{
    PoissonCase make_case( HierarchicalSpace h, ExactSolution u, BoundarySpec b = {} )
    {
        return PoissonCase{ std::move( h ), b, std::move( u ) };
    }

    HierarchicalSpace two_level( int p )
    {
        auto h = oracle::square( p, 4 );
        return oracle::refine_region( h, { 0.25, 0.25 }, { 0.75, 0.6 } );
    }

    // Stiffness of one tensor B-spline element by direct Cox-de Boor quadrature,
    // written against the recursive oracle.
    Eigen::MatrixXd direct_bspline_element( const TensorSpace& s, int e, int points )
    {
        const auto fns = s.elementFunctions( e );
        const auto box = s.elementBox( e );
        const auto tx = oracle::knots_of( s.direction( 0 ) ), ty = oracle::knots_of( s.direction( 1 ) );
        const int p = s.degree( 0 ), q = s.degree( 1 );
        const auto r = gauss_rule( points );
        const double hx = box[1][0] - box[0][0], hy = box[1][1] - box[0][1];
        const double d = 1e-6;
        Eigen::MatrixXd k = Eigen::MatrixXd::Zero( fns.size(), fns.size() );
        for( int j = 0; j < r.size(); ++j )
            for( int i = 0; i < r.size(); ++i )
            {
                const double x = box[0][0] + r.points[i] * hx, y = box[0][1] + r.points[j] * hy;
                Eigen::MatrixXd g( fns.size(), 2 );
                for( size_t a = 0; a < fns.size(); ++a )
                {
                    const auto idx = s.unflattenFunction( fns[a] );
                    const double nx = oracle::cox_de_boor( tx, p, idx[0], x ), ny = oracle::cox_de_boor( ty, q, idx[1], y );
                    const double dx = ( oracle::cox_de_boor( tx, p, idx[0], x + d ) - oracle::cox_de_boor( tx, p, idx[0], x - d ) ) / ( 2 * d );
                    const double dy = ( oracle::cox_de_boor( ty, q, idx[1], y + d ) - oracle::cox_de_boor( ty, q, idx[1], y - d ) ) / ( 2 * d );
                    g( a, 0 ) = dx * ny;
                    g( a, 1 ) = nx * dy;
                }
                k += r.weights[i] * r.weights[j] * hx * hy * g * g.transpose();
            }
        return k;
    }
}

TEST_CASE( "reference Bezier stiffness" )
{
    const auto k = bezier_element_stiffness( 1, 1, gauss_rule( 2 ), 1.0, 1.0 );
    Eigen::Matrix4d expected;
    expected << 4, -1, -1, -2, -1, 4, -2, -1, -1, -2, 4, -1, -2, -1, -1, 4;
    expected /= 6.0;
    CHECK( ( k - expected ).norm() <= 1e-15 );
    CHECK( k( 0, 0 ) == doctest::Approx( 2.0 / 3.0 ) );

    for( int p = 1; p <= 4; ++p )
    {
        const auto kp = bezier_element_stiffness( p, p, gauss_rule( p + 1 ), 0.25, 0.25 );
        CHECK( kp.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-13 );
        CHECK( ( kp - kp.transpose() ).norm() == 0.0 );
        // Scale invariance of the 2D Laplace stiffness.
        CHECK( ( kp - bezier_element_stiffness( p, p, gauss_rule( p + 1 ), 1.0, 1.0 ) ).norm() <= 1e-13 );
    }
    CHECK_THROWS_AS( bezier_element_stiffness( 2, 2, gauss_rule( 3 ), 0.0, 1.0 ), ArgumentError );
}

TEST_CASE( "element stiffness mapping" )
{
    const auto kb = bezier_element_stiffness( 2, 2, gauss_rule( 3 ), 1.0, 1.0 );
    ElementRecord rec;
    rec.C = Eigen::MatrixXd::Identity( 9, 9 );
    CHECK( ( element_stiffness( rec, kb ) - kb ).norm() == 0.0 );
    rec.C = Eigen::MatrixXd::Identity( 4, 4 );
    CHECK_THROWS_AS( element_stiffness( rec, kb ), ArgumentError );

    // Single level: C K_Bezier C^T against directly integrated B-spline elements.
    const TensorSpace s( { uniform_knot_vector( 2, 4 ), uniform_knot_vector( 2, 4 ) } );
    const HierarchicalSpace h( s );
    const MultilevelExtraction ml( h );
    for( int e : { 0, 5, 10, 15 } )
    {
        const auto r = ml.element( { 0, e } );
        const auto ke = element_stiffness( r, kb );
        CHECK( ke.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12 );
        CHECK( ( ke - direct_bspline_element( s, e, 3 ) ).norm() / ke.norm() <= 1e-8 );
    }
}

TEST_CASE( "assembly equivalence with direct quadrature" )
{
    const auto u = ExactSolution::gaussian( 100.0 );
    std::vector<HierarchicalSpace> spaces{ oracle::square( 2, 4 ), two_level( 2 ), two_level( 3 ) };
    for( const auto& cfg : oracle::configurations() )
        if( cfg.space.dim() == 2 ) spaces.push_back( cfg.space );
    for( const auto& h : spaces )
    {
        const auto c = make_case( h, u );
        const MultilevelExtraction ml( h );
        const ThbEvaluator ev( h );
        const auto a = assemble( c, ml );
        const auto b = assemble_direct( c, ev );
        CHECK( relative_frobenius( a.stiffness, b.stiffness ) <= 1e-12 );
        CHECK( ( a.load - b.load ).norm() / b.load.norm() <= 1e-12 );

        const Eigen::SparseMatrix<double> asym = a.stiffness - Eigen::SparseMatrix<double>( a.stiffness.transpose() );
        CHECK( asym.norm() <= 1e-12 * a.stiffness.norm() );
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones( a.stiffness.cols() );
        CHECK( ( a.stiffness * ones ).cwiseAbs().maxCoeff() <= 1e-11 );

        // Same visitation order, same bits.
        const auto again = assemble( c, ml );
        CHECK( relative_frobenius( again.stiffness, a.stiffness ) == 0.0 );
    }
}

TEST_CASE( "constant solution" )
{
    const auto h = two_level( 2 );
    const auto c = make_case( h, ExactSolution::polynomial( { { 2.5, 0, 0 } } ) );
    const auto sol = solve_poisson( c );
    CHECK( ( sol.coefficients.array() - 2.5 ).abs().maxCoeff() <= 1e-12 );
    CHECK( sol.l2Error <= 1e-12 );
}

TEST_CASE( "patch test on a two-level mesh" )
{
    for( int p : { 2, 3 } )
    {
        CAPTURE( p );
        // Degree p in each variable lies in the tensor space.
        std::vector<ExactSolution::Monomial> terms{ { 1.0, 0, 0 }, { -0.5, 1, 0 }, { 2.0, 0, 1 }, { 0.75, 1, 1 },
                                                    { 1.5, p, 0 }, { -1.0, 0, p }, { 0.3, p, p - 1 } };
        const auto c = make_case( two_level( p ), ExactSolution::polynomial( terms ) );
        CHECK( solve_poisson( c ).l2Error <= 1e-10 );
        const ThbEvaluator ev( c.hierarchy );
        CHECK( solve_poisson_direct( c, ev ).l2Error <= 1e-10 );
    }
}

TEST_CASE( "homogeneous Dirichlet data" )
{
    // x(1-x)y(1-y) vanishes on the boundary and is biquadratic.
    const auto u = ExactSolution::polynomial( { { 1.0, 1, 1 }, { -1.0, 2, 1 }, { -1.0, 1, 2 }, { 1.0, 2, 2 } } );
    const auto c = make_case( two_level( 2 ), u );
    const MultilevelExtraction ml( c.hierarchy );
    const BezierPath path( ml );
    const auto sys = apply_bcs( assemble( c, ml ), c, path );
    CHECK( not sys.dirichlet.empty() );
    for( const auto& [id, g] : sys.dirichlet ) CHECK( std::abs( g ) <= 1e-14 );
    const auto x = solve( sys );
    CHECK( l2_error( c, path, x ) <= 1e-12 );
}

TEST_CASE( "boundary conditions" )
{
    const auto u = ExactSolution::gaussian( 10.0 );
    BoundarySpec none;
    none.edges.fill( BoundaryKind::Neumann );
    const auto bad = make_case( oracle::square( 2, 4 ), u, none );
    const MultilevelExtraction mlBad( bad.hierarchy );
    CHECK_THROWS_AS( apply_bcs( assemble( bad, mlBad ), bad, BezierPath( mlBad ) ), ArgumentError );

    // Boundary projection converges at rate p+1; a Neumann edge keeps the interior rate.
    BoundarySpec mixed;
    mixed.edges[static_cast<int>( Edge::Right )] = BoundaryKind::Neumann;
    std::vector<double> boundary, dirichlet, neumann;
    for( int n : { 4, 8, 16 } )
    {
        const auto cd = make_case( oracle::square( 2, n ), u );
        const MultilevelExtraction ml( cd.hierarchy );
        const auto sol = solve_poisson( cd, ml );
        boundary.push_back( boundary_l2_error( cd, BezierPath( ml ), sol.coefficients ) );
        dirichlet.push_back( sol.l2Error );
        neumann.push_back( solve_poisson( make_case( oracle::square( 2, n ), u, mixed ) ).l2Error );
    }
    const double boundaryRate = std::log2( boundary[1] / boundary[2] );
    const double dirichletRate = std::log2( dirichlet[1] / dirichlet[2] );
    const double neumannRate = std::log2( neumann[1] / neumann[2] );
    CHECK( boundaryRate > 2.5 );
    CHECK( dirichletRate > 2.5 );
    CHECK( neumannRate > 2.5 );
    CHECK( neumannRate == doctest::Approx( dirichletRate ).epsilon( 0.15 ) );
}

TEST_CASE( "reduced stiffness is positive definite" )
{
    const auto c = make_case( two_level( 2 ), ExactSolution::gaussian( 100.0 ) );
    const MultilevelExtraction ml( c.hierarchy );
    const auto sys = apply_bcs( assemble( c, ml ), c, BezierPath( ml ) );
    std::vector<int> isFree( c.hierarchy.numActiveFunctions(), 1 );
    for( const auto& [id, g] : sys.dirichlet ) isFree[id] = 0;
    std::vector<int> freeIds;
    for( int i = 0; i < static_cast<int>( isFree.size() ); ++i )
        if( isFree[i] ) freeIds.push_back( i );
    const Eigen::MatrixXd k = sys.stiffness;
    Eigen::MatrixXd kff( freeIds.size(), freeIds.size() );
    for( size_t i = 0; i < freeIds.size(); ++i )
        for( size_t j = 0; j < freeIds.size(); ++j ) kff( i, j ) = k( freeIds[i], freeIds[j] );
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig( kff );
    CHECK( eig.eigenvalues().minCoeff() > 0.0 );
}

TEST_CASE( "solve" )
{
    LinearSystem one;
    one.stiffness.resize( 1, 1 );
    one.stiffness.insert( 0, 0 ) = 4.0;
    one.load = Eigen::VectorXd::Constant( 1, 2.0 );
    CHECK( solve( one )( 0 ) == 0.5 );

    LinearSystem singular;
    singular.stiffness.resize( 2, 2 );
    singular.stiffness.insert( 0, 0 ) = 1.0;
    singular.stiffness.insert( 0, 1 ) = 1.0;
    singular.stiffness.insert( 1, 0 ) = 1.0;
    singular.stiffness.insert( 1, 1 ) = 1.0;
    singular.load = Eigen::VectorXd::Ones( 2 );
    CHECK_THROWS_AS( solve( singular ), NumericalError );
}

TEST_CASE( "global convergence rate" )
{
    for( int p : { 2, 3 } )
    {
        CAPTURE( p );
        const auto u = ExactSolution::gaussian( 20.0 );
        std::vector<double> err;
        for( int n : { 4, 8, 16, 32, 64 } ) err.push_back( solve_poisson( make_case( oracle::square( p, n ), u ) ).l2Error );
        for( size_t i = 1; i < err.size(); ++i ) CHECK( err[i] < err[i - 1] );
        const double rate = std::log2( err[3] / err[4] );
        CHECK( rate > p + 0.8 );
        CHECK( rate < p + 1.3 );
    }
}

TEST_CASE( "indicator and marking" )
{
    const auto c = make_case( oracle::square( 2, 8 ), ExactSolution::gaussian( 100.0 ) );
    const MultilevelExtraction ml( c.hierarchy );
    const BezierPath path( ml );
    const auto sol = solve_poisson( c, ml );
    const auto eta = gradient_indicator( path, sol.coefficients );
    REQUIRE( eta.size() == 64 );
    const ThbEvaluator ev( c.hierarchy );
    const auto etaDirect = gradient_indicator( DirectThbPath( ev ), sol.coefficients );
    for( size_t i = 0; i < eta.size(); ++i ) CHECK( std::abs( eta[i] - etaDirect[i] ) <= 1e-12 * ( 1.0 + eta[i] ) );

    const auto marked = mark_top_fraction( c.hierarchy, eta, 0.2 );
    CHECK( marked.size() == 13 );
    // The Gaussian peak sits in the centre, so the centre elements carry the largest gradients.
    const auto& sp = c.hierarchy.level( 0 );
    for( const auto& key : marked )
    {
        const auto idx = sp.unflattenElement( key.index );
        CHECK( idx[0] >= 1 );
        CHECK( idx[0] <= 6 );
        CHECK( idx[1] >= 1 );
        CHECK( idx[1] <= 6 );
    }
    CHECK_THROWS_AS( mark_top_fraction( c.hierarchy, eta, 0.0 ), ArgumentError );
    CHECK_THROWS_AS( mark_top_fraction( c.hierarchy, { 1.0 }, 0.2 ), ArgumentError );
}
