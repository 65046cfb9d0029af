#include <thbez/cli/case_file.hpp>

#include <thbez/errors.hpp>
#include <thbez/quadrature.hpp>

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>

namespace thbez::cli
{
    namespace
    {
        using nlohmann::json;

        [[noreturn]] void fail( const std::string& where, const std::string& what )
        {
            throw CaseError( ( where.empty() ? std::string( "/" ) : where ) + ": " + what );
        }

        void allow_keys( const json& obj, const std::string& where, std::initializer_list<const char*> keys )
        {
            if( not obj.is_object() ) fail( where, "expected an object" );
            const std::set<std::string> allowed( keys.begin(), keys.end() );
            for( const auto& [k, v] : obj.items() )
                if( not allowed.contains( k ) ) fail( where + "/" + k, "unknown key" );
        }

        int get_int( const json& v, const std::string& where, int lo, int hi )
        {
            if( not v.is_number_integer() ) fail( where, "expected an integer" );
            const auto x = v.get<long long>();
            if( x < lo or x > hi ) fail( where, "must lie in [" + std::to_string( lo ) + ", " + std::to_string( hi ) + "]" );
            return static_cast<int>( x );
        }

        double get_number( const json& v, const std::string& where )
        {
            if( not v.is_number() ) fail( where, "expected a number" );
            return v.get<double>();
        }

        std::string get_string( const json& v, const std::string& where )
        {
            if( not v.is_string() ) fail( where, "expected a string" );
            return v.get<std::string>();
        }

        // Scalar or one entry per direction.
        std::array<int, 2> per_direction( const json& v, const std::string& where, int dim, int lo, int hi )
        {
            if( v.is_array() )
            {
                if( static_cast<int>( v.size() ) != dim ) fail( where, "expected " + std::to_string( dim ) + " entries" );
                std::array<int, 2> out{ 0, 0 };
                for( int k = 0; k < dim; ++k ) out[k] = get_int( v[k], where + "/" + std::to_string( k ), lo, hi );
                if( dim == 1 ) out[1] = out[0];
                return out;
            }
            const int x = get_int( v, where, lo, hi );
            return { x, x };
        }

        std::array<double, 2> interval( const json& v, const std::string& where )
        {
            if( not v.is_array() or v.size() != 2 ) fail( where, "expected [lower, upper]" );
            const double a = get_number( v[0], where + "/0" ), b = get_number( v[1], where + "/1" );
            if( not( a < b ) ) fail( where, "lower must be below upper" );
            return { a, b };
        }

        // 1-based line and column of a 0-based byte offset.
        std::string position( const std::string& text, std::size_t byte )
        {
            const auto head = std::string_view( text ).substr( 0, std::min( byte, text.size() ) );
            const auto line = 1 + std::count( head.begin(), head.end(), '\n' );
            const auto nl = head.rfind( '\n' );
            const auto col = nl == std::string_view::npos ? head.size() + 1 : head.size() - nl;
            return "line " + std::to_string( line ) + ", column " + std::to_string( col );
        }

        RefinementStep parse_step( const json& s, const std::string& where, int dim )
        {
            if( not s.is_object() ) fail( where, "expected an object" );
            if( not s.contains( "mode" ) ) fail( where, "missing \"mode\"" );
            const auto mode = get_string( s["mode"], where + "/mode" );
            RefinementStep step;
            if( mode == "global" )
            {
                allow_keys( s, where, { "mode", "repeat" } );
                step.mode = RefinementStep::Mode::Global;
            }
            else if( mode == "region" )
            {
                allow_keys( s, where, { "mode", "repeat", "x", "y" } );
                step.mode = RefinementStep::Mode::Region;
                if( not s.contains( "x" ) ) fail( where, "missing \"x\"" );
                const auto x = interval( s["x"], where + "/x" );
                step.lower[0] = x[0];
                step.upper[0] = x[1];
                if( dim == 2 )
                {
                    if( not s.contains( "y" ) ) fail( where, "missing \"y\"" );
                    const auto y = interval( s["y"], where + "/y" );
                    step.lower[1] = y[0];
                    step.upper[1] = y[1];
                }
                else if( s.contains( "y" ) )
                    fail( where + "/y", "not allowed for a univariate case" );
            }
            else if( mode == "indicator" )
            {
                allow_keys( s, where, { "mode", "repeat", "theta" } );
                step.mode = RefinementStep::Mode::Indicator;
                if( s.contains( "theta" ) )
                {
                    step.theta = get_number( s["theta"], where + "/theta" );
                    if( not( step.theta > 0.0 and step.theta <= 1.0 ) ) fail( where + "/theta", "must lie in (0, 1]" );
                }
            }
            else if( mode == "elements" )
            {
                allow_keys( s, where, { "mode", "repeat", "ids" } );
                step.mode = RefinementStep::Mode::Elements;
                if( not s.contains( "ids" ) or not s["ids"].is_array() ) fail( where + "/ids", "expected a list of [level, index]" );
                for( std::size_t i = 0; i < s["ids"].size(); ++i )
                {
                    const auto& e = s["ids"][i];
                    const auto w = where + "/ids/" + std::to_string( i );
                    if( not e.is_array() or e.size() != 2 ) fail( w, "expected [level, index]" );
                    step.elements.push_back( { get_int( e[0], w + "/0", 0, 64 ), get_int( e[1], w + "/1", 0, 1 << 30 ) } );
                }
            }
            else
                fail( where + "/mode", "unknown mode \"" + mode + "\" (global, region, indicator, elements)" );

            if( s.contains( "repeat" ) ) step.repeat = get_int( s["repeat"], where + "/repeat", 1, 32 );
            return step;
        }
    }

    ExactSolution ExactSpec::build() const
    {
        return kind == Kind::Gaussian ? ExactSolution::gaussian( c ) : ExactSolution::polynomial( terms );
    }

    HierarchicalSpace CaseFile::initialSpace() const
    {
        std::vector<KnotVector> dirs;
        for( int k = 0; k < dim; ++k ) dirs.push_back( uniform_knot_vector( degree[k], elements[k] ) );
        return HierarchicalSpace( TensorSpace( std::move( dirs ) ) );
    }

    CaseFile parse_case( const std::string& text )
    {
        json j;
        try
        {
            j = json::parse( text );
        }
        catch( const json::parse_error& e )
        {
            throw CaseError( position( text, e.byte == 0 ? 0 : e.byte - 1 ) + ": invalid JSON: " + e.what() );
        }

        allow_keys( j, "", { "dimension", "degree", "elements", "exact", "boundary", "refinement", "quadrature", "output" } );

        CaseFile c;
        if( j.contains( "dimension" ) ) c.dim = get_int( j["dimension"], "/dimension", 1, 2 );
        if( not j.contains( "degree" ) ) fail( "", "missing \"degree\"" );
        c.degree = per_direction( j["degree"], "/degree", c.dim, KnotVector::kMinDegree, KnotVector::kMaxDegree );
        if( not j.contains( "elements" ) ) fail( "", "missing \"elements\"" );
        c.elements = per_direction( j["elements"], "/elements", c.dim, 1, 4096 );

        if( j.contains( "exact" ) )
        {
            const auto& e = j["exact"];
            if( not e.is_object() or not e.contains( "type" ) ) fail( "/exact", "expected an object with \"type\"" );
            const auto type = get_string( e["type"], "/exact/type" );
            if( type == "gaussian" )
            {
                allow_keys( e, "/exact", { "type", "C" } );
                c.exact.kind = ExactSpec::Kind::Gaussian;
                if( e.contains( "C" ) ) c.exact.c = get_number( e["C"], "/exact/C" );
                if( not( c.exact.c > 0.0 ) ) fail( "/exact/C", "must be positive" );
            }
            else if( type == "polynomial" )
            {
                allow_keys( e, "/exact", { "type", "terms" } );
                c.exact.kind = ExactSpec::Kind::Polynomial;
                if( not e.contains( "terms" ) or not e["terms"].is_array() or e["terms"].empty() )
                    fail( "/exact/terms", "expected a non-empty list of [coefficient, x power, y power]" );
                for( std::size_t i = 0; i < e["terms"].size(); ++i )
                {
                    const auto& t = e["terms"][i];
                    const auto w = "/exact/terms/" + std::to_string( i );
                    if( not t.is_array() or t.size() != 3 ) fail( w, "expected [coefficient, x power, y power]" );
                    c.exact.terms.push_back( { get_number( t[0], w + "/0" ), get_int( t[1], w + "/1", 0, 16 ),
                                               get_int( t[2], w + "/2", 0, 16 ) } );
                }
            }
            else
                fail( "/exact/type", "unknown type \"" + type + "\" (gaussian, polynomial)" );
        }

        if( j.contains( "boundary" ) )
        {
            allow_keys( j["boundary"], "/boundary", { "left", "right", "bottom", "top" } );
            const std::array<const char*, 4> names{ "left", "right", "bottom", "top" };
            for( int k = 0; k < 4; ++k )
            {
                if( not j["boundary"].contains( names[k] ) ) continue;
                const auto w = std::string( "/boundary/" ) + names[k];
                const auto v = get_string( j["boundary"][names[k]], w );
                if( v == "dirichlet" )
                    c.boundary.edges[k] = BoundaryKind::Dirichlet;
                else if( v == "neumann" )
                    c.boundary.edges[k] = BoundaryKind::Neumann;
                else
                    fail( w, "expected \"dirichlet\" or \"neumann\"" );
            }
            if( not c.boundary.hasDirichlet() ) fail( "/boundary", "at least one edge must be dirichlet" );
        }

        if( j.contains( "refinement" ) )
        {
            if( not j["refinement"].is_array() ) fail( "/refinement", "expected a list of steps" );
            for( std::size_t i = 0; i < j["refinement"].size(); ++i )
                c.refinement.push_back( parse_step( j["refinement"][i], "/refinement/" + std::to_string( i ), c.dim ) );
        }

        if( j.contains( "quadrature" ) )
        {
            c.quadrature = get_string( j["quadrature"], "/quadrature" );
            try
            {
                parse_quadrature( *c.quadrature );
            }
            catch( const ArgumentError& e )
            {
                fail( "/quadrature", e.what() );
            }
        }

        if( j.contains( "output" ) )
        {
            allow_keys( j["output"], "/output", { "solution", "csv" } );
            if( j["output"].contains( "solution" ) ) c.solutionPath = get_string( j["output"]["solution"], "/output/solution" );
            if( j["output"].contains( "csv" ) ) c.csvPath = get_string( j["output"]["csv"], "/output/csv" );
        }
        return c;
    }

    CaseFile load_case( const std::string& path )
    {
        std::ifstream in( path, std::ios::binary );
        if( not in ) throw CaseError( path + ": cannot open case file" );
        std::ostringstream buf;
        buf << in.rdbuf();
        try
        {
            return parse_case( buf.str() );
        }
        catch( const CaseError& e )
        {
            throw CaseError( path + ": " + e.what() );
        }
    }
}
