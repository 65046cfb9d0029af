// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include "../oracles.hpp"

#include <thbez/bezier.hpp>
#include <thbez/hierarchy.hpp>
#include <thbez/multilevel.hpp>
#include <thbez/pathology.hpp>
#include <thbez/poisson.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace thbez;

namespace
{
    struct Outcome
    {
        bool pass = false;
        std::string detail;
    };

    char buffer[512];

    template <typename... A>
    std::string fmt( const char* f, A... a )
    {
        std::snprintf( buffer, sizeof buffer, f, a... );
        return buffer;
    }

    PoissonCase make_case( HierarchicalSpace h, ExactSolution u )
    {
        return PoissonCase{ std::move( h ), BoundarySpec{}, std::move( u ) };
    }

    // Least-squares slope of log(error) against log(h).
    double loglog_slope( const std::vector<double>& h, const std::vector<double>& e )
    {
        const auto n = static_cast<double>( h.size() );
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for( size_t i = 0; i < h.size(); ++i )
        {
            const double x = std::log( h[i] ), y = std::log( e[i] );
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        return ( n * sxy - sx * sy ) / ( n * sxx - sx * sx );
    }

    Eigen::VectorXd tensor_bernstein( const HierarchicalSpace& h, double tx, double ty )
    {
        const Eigen::VectorXd bx = bernstein( h.base().degree( 0 ), tx );
        if( h.dim() == 1 ) return bx;
        const Eigen::VectorXd by = bernstein( h.base().degree( 1 ), ty );
        Eigen::VectorXd out( bx.size() * by.size() );
        for( Eigen::Index b = 0; b < by.size(); ++b )
            for( Eigen::Index a = 0; a < bx.size(); ++a ) out( a + bx.size() * b ) = bx( a ) * by( b );
        return out;
    }

    const std::vector<double> kReferenceKnots{ 0, 0, 0, 0.25, 0.5, 0.75, 0.75, 1, 1, 1 };

    // Shared between criteria 6 and 7.
    struct GlobalStudy
    {
        std::vector<int> dofs;
        std::vector<double> h;
        std::vector<double> errors;
    };

    GlobalStudy global_study( int p, double c, int refinements )
    {
        GlobalStudy s;
        auto h = oracle::square( p, 8 );
        const auto u = ExactSolution::gaussian( c );
        for( int k = 0; k <= refinements; ++k )
        {
            if( k > 0 ) h = refine( h, h.activeElements() );
            s.dofs.push_back( h.numActiveFunctions() );
            s.h.push_back( 1.0 / ( 8 << k ) );
            s.errors.push_back( solve_poisson( make_case( h, u ) ).l2Error );
        }
        return s;
    }

    GlobalStudy gStudyP2;

    Outcome criterion1()
    {
        std::mt19937 rng( 1001 );
        std::uniform_real_distribution<double> u( 0.0, 1.0 );
        std::vector<KnotVector> kvs{ KnotVector( kReferenceKnots, 2 ) };
        for( int i = 0; i < 20; ++i ) kvs.push_back( oracle::random_knot_vector( rng, 1 + i % 4 ) );
        double worst = 0.0;
        for( const auto& kv : kvs )
        {
            const auto ops = decompose( kv );
            const auto t = oracle::knots_of( kv );
            const auto bp = kv.breakpoints();
            for( int k = 0; k < 100; ++k )
            {
                const double x = u( rng );
                const int e = kv.spanElement( find_span( kv, x ) );
                const double tt = ( x - bp[e] ) / ( bp[e + 1] - bp[e] );
                const Eigen::VectorXd n = ops[e].matrix * bernstein( kv.degree(), tt );
                for( size_t a = 0; a < ops[e].functions.size(); ++a )
                    worst = std::max( worst, std::abs( n( static_cast<Eigen::Index>( a ) ) -
                                                       oracle::cox_de_boor( t, kv.degree(), ops[e].functions[a], x ) ) );
            }
        }
        return { worst <= 1e-12, fmt( "%zu knot vectors, max |E B - N| = %.2e (tol 1e-12)", kvs.size(), worst ) };
    }

    Outcome criterion2()
    {
        std::mt19937 rng( 1002 );
        std::uniform_real_distribution<double> u( 0.0, 1.0 );
        double worstRepro = 0.0, worstKron = 0.0;
        for( int p = 1; p <= 4; ++p )
        {
            const auto coarse = uniform_knot_vector( p, 4 );
            const auto fine = dyadic_refine( coarse );
            const auto s = subdivision_matrix( coarse, fine );
            const auto tc = oracle::knots_of( coarse ), tf = oracle::knots_of( fine );
            for( int k = 0; k < 100; ++k )
            {
                const double x = u( rng );
                const auto nf = oracle::all_basis( tf, p, x );
                for( int i = 0; i < coarse.numFunctions(); ++i )
                {
                    double v = 0.0;
                    for( int j = 0; j < fine.numFunctions(); ++j ) v += s( j, i ) * nf[j];
                    worstRepro = std::max( worstRepro, std::abs( v - oracle::cox_de_boor( tc, p, i, x ) ) );
                }
            }

            const TensorSpace c2( { coarse, uniform_knot_vector( p, 3 ) } );
            const auto f2 = dyadic_refine( c2 );
            const Eigen::MatrixXd s2 = subdivision_matrix( c2, f2 );
            const auto sy = subdivision_matrix( c2.direction( 1 ), f2.direction( 1 ) );
            const auto ty = oracle::knots_of( c2.direction( 1 ) ), tfy = oracle::knots_of( f2.direction( 1 ) );
            for( int J = 0; J < f2.numFunctions(); ++J )
                for( int I = 0; I < c2.numFunctions(); ++I )
                {
                    const auto fj = f2.unflattenFunction( J ), ci = c2.unflattenFunction( I );
                    worstKron = std::max( worstKron, std::abs( s2( J, I ) - s( fj[0], ci[0] ) * sy( fj[1], ci[1] ) ) );
                }
            for( int k = 0; k < 100; ++k )
            {
                const double x = u( rng ), y = u( rng );
                const auto nfx = oracle::all_basis( tf, p, x ), nfy = oracle::all_basis( tfy, p, y );
                for( int I = 0; I < c2.numFunctions(); ++I )
                {
                    const auto ci = c2.unflattenFunction( I );
                    double v = 0.0;
                    for( int J = 0; J < f2.numFunctions(); ++J )
                    {
                        if( s2( J, I ) == 0.0 ) continue;
                        const auto fj = f2.unflattenFunction( J );
                        v += s2( J, I ) * nfx[fj[0]] * nfy[fj[1]];
                    }
                    const double ref = oracle::cox_de_boor( tc, p, ci[0], x ) * oracle::cox_de_boor( ty, p, ci[1], y );
                    worstRepro = std::max( worstRepro, std::abs( v - ref ) );
                }
            }
        }
        return { worstRepro <= 1e-12 and worstKron <= 1e-14,
                 fmt( "p=1..4, 1D+2D: max reproduction error %.2e (tol 1e-12), max |S2 - Sx (x) Sy| %.2e (tol 1e-14)",
                      worstRepro, worstKron ) };
    }

    Outcome criterion3()
    {
        std::mt19937 rng( 1003 );
        const auto configs = oracle::configurations();
        double worstSum = 0.0, minValue = 1.0;
        for( const auto& cfg : configs )
        {
            const ThbEvaluator ev( cfg.space );
            for( int k = 0; k < 1000; ++k )
            {
                const auto r = ev.eval( oracle::random_point( rng, cfg.space.dim() ) );
                double sum = 0.0;
                for( double v : r.values )
                {
                    sum += v;
                    minValue = std::min( minValue, v );
                }
                worstSum = std::max( worstSum, std::abs( sum - 1.0 ) );
            }
        }
        return { worstSum <= 1e-12 and minValue >= -1e-14,
                 fmt( "%zu configurations, max |sum - 1| = %.2e (tol 1e-12), min value %.2e (tol -1e-14)", configs.size(),
                      worstSum, minValue ) };
    }

    Outcome criterion4()
    {
        std::mt19937 rng( 1004 );
        std::uniform_real_distribution<double> u( 0.0, 1.0 );
        double worst = 0.0, worstCol = 0.0;
        int elements = 0;
        bool coverage = true;
        for( const auto& cfg : oracle::configurations() )
        {
            const auto& h = cfg.space;
            const MultilevelExtraction ml( h );
            const ThbEvaluator ev( h );
            for( const auto& key : h.activeElements() )
            {
                ++elements;
                const auto rec = ml.element( key );
                worstCol = std::max( worstCol, ( rec.C.colwise().sum().array() - 1.0 ).abs().maxCoeff() );
                for( int k = 0; k < 50; ++k )
                {
                    const double tx = u( rng ), ty = h.dim() == 2 ? u( rng ) : 0.0;
                    const Point x{ rec.box[0][0] + tx * ( rec.box[1][0] - rec.box[0][0] ),
                                   h.dim() == 2 ? rec.box[0][1] + ty * ( rec.box[1][1] - rec.box[0][1] ) : 0.0 };
                    const Eigen::VectorXd hv = rec.C * tensor_bernstein( h, tx, ty );
                    const auto ref = ev.eval( x );
                    std::vector<double> refById( h.numActiveFunctions(), 0.0 );
                    for( size_t i = 0; i < ref.ids.size(); ++i ) refById[ref.ids[i]] = ref.values[i];
                    for( size_t a = 0; a < rec.functions.size(); ++a )
                    {
                        worst = std::max( worst, std::abs( hv( static_cast<Eigen::Index>( a ) ) - refById[rec.functions[a]] ) );
                        refById[rec.functions[a]] = 0.0;
                    }
                    // Anything left is a function the element record missed.
                    for( double v : refById )
                        if( std::abs( v ) > 1e-12 ) coverage = false;
                }
            }
        }
        return { worst <= 1e-12 and worstCol <= 1e-12 and coverage,
                 fmt( "%d elements: max |eval_thb - C B| = %.2e, max |colsum - 1| = %.2e (tol 1e-12)%s", elements, worst,
                      worstCol, coverage ? "" : ", missing functions" ) };
    }

    Outcome criterion5()
    {
        std::vector<std::pair<std::string, HierarchicalSpace>> spaces;
        {
            auto h = oracle::square( 2, 8 );
            h = oracle::refine_region( h, { 0.25, 0.25 }, { 0.75, 0.75 } );
            h = oracle::refine_region( h, { 0.375, 0.375 }, { 0.625, 0.625 } );
            h = oracle::refine_region( h, { 0.4375, 0.4375 }, { 0.5625, 0.5625 } );
            spaces.emplace_back( "p=2 centre, 4 levels", h );
        }
        {
            auto h = oracle::square( 3, 8 );
            h = oracle::refine_region( h, { 0.3, 0.3 }, { 0.7, 0.7 } );
            h = oracle::refine_region( h, { 0.4, 0.4 }, { 0.6, 0.6 } );
            spaces.emplace_back( "p=3 centre, 3 levels", h );
        }
        {
            auto h = oracle::square( 3, 6 );
            h = oracle::refine_region( h, { 0.0, 0.0 }, { 0.5, 0.4 } );
            h = oracle::refine_region( h, { 0.1, 0.0 }, { 0.3, 0.25 } );
            spaces.emplace_back( "p=3 corner, 3 levels", h );
        }
        {
            const auto u = ExactSolution::gaussian( 100.0 );
            auto h = oracle::square( 2, 8 );
            for( int k = 0; k < 3; ++k )
            {
                const MultilevelExtraction ml( h );
                const auto sol = solve_poisson( make_case( h, u ), ml );
                h = refine( h, mark_top_fraction( h, gradient_indicator( BezierPath( ml ), sol.coefficients ), 0.2 ) );
            }
            spaces.emplace_back( "p=2 indicator, 3 steps", h );
        }

        const auto u = ExactSolution::gaussian( 100.0 );
        double worstK = 0.0, worstL2 = 0.0;
        for( const auto& [name, h] : spaces )
        {
            const auto c = make_case( h, u );
            const MultilevelExtraction ml( h );
            const ThbEvaluator ev( h );
            const auto viaBezier = solve_poisson( c, ml );
            const auto viaDirect = solve_poisson_direct( c, ev );
            worstK = std::max( worstK, relative_frobenius( viaBezier.system.stiffness, viaDirect.system.stiffness ) );
            worstL2 = std::max( worstL2, std::abs( viaBezier.l2Error - viaDirect.l2Error ) / viaDirect.l2Error );
        }
        // Ten significant digits: relative difference below half a unit in the tenth digit.
        return { worstK <= 1e-12 and worstL2 <= 5e-11,
                 fmt( "%zu locally refined cases: max rel. Frobenius %.2e (tol 1e-12), max rel. L2 difference %.2e (tol 5e-11)",
                      spaces.size(), worstK, worstL2 ) };
    }

    Outcome criterion6()
    {
        gStudyP2 = global_study( 2, 100.0, 5 );
        const auto p3 = global_study( 3, 100.0, 5 );
        const auto tail = []( const std::vector<double>& v ) { return std::vector<double>( v.end() - 4, v.end() ); };
        const double s2 = loglog_slope( tail( gStudyP2.h ), tail( gStudyP2.errors ) );
        const double s3 = loglog_slope( tail( p3.h ), tail( p3.errors ) );
        return { s2 >= 2.8 and s2 <= 3.3 and s3 >= 3.8 and s3 <= 4.3,
                 fmt( "8x8 + 5 global refinements, slope over the last three: p=2 %.3f in [2.8, 3.3], p=3 %.3f in [3.8, 4.3]",
                      s2, s3 ) };
    }

    Outcome criterion7()
    {
        const auto u = ExactSolution::gaussian( 100.0 );
        auto h = oracle::square( 2, 8 );
        std::vector<int> dofs;
        std::vector<double> errors;
        for( int k = 0; k <= 4; ++k )
        {
            const MultilevelExtraction ml( h );
            const auto sol = solve_poisson( make_case( h, u ), ml );
            dofs.push_back( h.numActiveFunctions() );
            errors.push_back( sol.l2Error );
            if( k < 4 )
                h = refine( h, mark_top_fraction( h, gradient_indicator( BezierPath( ml ), sol.coefficients ), 0.2 ) );
        }
        // Compare refined meshes only: the shared initial mesh is not a comparison point.
        std::string best;
        for( size_t k = 1; k < dofs.size() and best.empty(); ++k )
            for( size_t j = 1; j < gStudyP2.dofs.size(); ++j )
                if( dofs[k] <= gStudyP2.dofs[j] and errors[k] <= gStudyP2.errors[j] )
                {
                    best = fmt( "local step %zu (%d dofs, %.3e) vs global step %zu (%d dofs, %.3e)", k, dofs[k], errors[k], j,
                                gStudyP2.dofs[j], gStudyP2.errors[j] );
                    break;
                }
        return { not best.empty(), best.empty() ? std::string( "no local step reaches a global error at fewer dofs" ) : best };
    }

    Outcome criterion8()
    {
        const auto r = demo_newton_cotes_pathology( KnotVector( kReferenceKnots, 2 ), 3 );
        double minNaive = 1e300, maxExtracted = 0.0, maxIntegral = 0.0;
        for( const auto& b : r.boundaries )
        {
            minNaive = std::min( minNaive, b.naiveDeviation );
            maxExtracted = std::max( maxExtracted, b.extractionDeviation );
        }
        for( const auto& in : r.integrals ) maxIntegral = std::max( maxIntegral, std::abs( in.extraction - in.analytic ) );
        return { r.boundaries.size() == 3 and minNaive > 1e-14 and maxExtracted <= 1e-14 and maxIntegral <= 1e-10,
                 fmt( "%zu boundaries: min span-lookup deviation %.2e (> 0), max extraction deviation %.2e (tol 1e-14), "
                      "max integral error %.2e (tol 1e-10)",
                      r.boundaries.size(), minNaive, maxExtracted, maxIntegral ) };
    }

    Outcome criterion9()
    {
        std::mt19937 rng( 1009 );
        std::uniform_real_distribution<double> coef( -1.0, 1.0 );
        std::string detail;
        bool pass = true;
        for( int p : { 2, 3 } )
        {
            std::vector<ExactSolution::Monomial> terms;
            for( int a = 0; a <= p; ++a )
                for( int b = 0; a + b <= p; ++b ) terms.push_back( { coef( rng ), a, b } );
            auto h = oracle::square( p, 4 );
            h = oracle::refine_region( h, { 0.25, 0.25 }, { 0.75, 0.75 } );
            const double e = solve_poisson( make_case( h, ExactSolution::polynomial( terms ) ) ).l2Error;
            pass = pass and e <= 1e-10 and h.numLevels() == 2;
            detail += fmt( "%sp=%d: L2 error %.2e", detail.empty() ? "" : ", ", p, e );
        }
        return { pass, "two-level mesh, " + detail + " (tol 1e-10)" };
    }
}

int main()
{
    struct Criterion
    {
        int id;
        const char* name;
        double budget;  // seconds, 0 for none
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        { 1, "extraction matches Cox-de Boor", 5.0, criterion1 },
        { 2, "subdivision exactness", 10.0, criterion2 },
        { 3, "THB partition of unity and non-negativity", 0.0, criterion3 },
        { 4, "multi-level extraction reproduction", 0.0, criterion4 },
        { 5, "Bezier-mapped assembly equals direct THB assembly", 60.0, criterion5 },
        { 6, "global convergence rates", 120.0, criterion6 },
        { 7, "local beats global per dof", 0.0, criterion7 },
        { 8, "Newton-Cotes boundary pathology", 0.0, criterion8 },
        { 9, "patch test on a two-level mesh", 0.0, criterion9 },
    };

    int failures = 0;
    for( const auto& c : criteria )
    {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try
        {
            o = c.run();
        }
        catch( const std::exception& e )
        {
            o = { false, std::string( "exception: " ) + e.what() };
        }
        const double secs = std::chrono::duration<double>( std::chrono::steady_clock::now() - t0 ).count();
        const bool inTime = c.budget == 0.0 or secs < c.budget;
        const bool pass = o.pass and inTime;
        if( not pass ) ++failures;
        std::printf( "%s %d %s: %s [%.2f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                     c.budget > 0.0 ? fmt( ", budget %.0f s", c.budget ).c_str() : "" );
        std::fflush( stdout );
    }
    std::printf( "%d/%zu criteria passed\n", static_cast<int>( criteria.size() ) - failures, criteria.size() );
    return failures == 0 ? 0 : 1;
}
