#include <thbez/cli/commands.hpp>

#include <thbez/errors.hpp>
#include <thbez/pathology.hpp>
#include <thbez/quadrature.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

namespace thbez::cli
{
    namespace
    {
        using nlohmann::json;
        using Clock = std::chrono::steady_clock;

        class ElementNotFound : public std::runtime_error
        {
        public:
            using std::runtime_error::runtime_error;
        };

        std::shared_ptr<spdlog::logger> make_logger( std::ostream& err )
        {
            auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>( err, true );
            auto log = std::make_shared<spdlog::logger>( "thbez", sink );
            log->set_pattern( "[%l] %v" );
            log->set_level( spdlog::level::warn );
            if( const char* env = std::getenv( "THBEZ_LOG" ) )
            {
                const auto level = spdlog::level::from_str( env );
                // from_str maps unknown names to off; only accept real level names.
                if( level != spdlog::level::off or std::string( env ) == "off" )
                    log->set_level( level );
                else
                    log->warn( "ignoring unknown THBEZ_LOG level '{}'", env );
            }
            return log;
        }

        AssemblyOptions assembly_options( const CaseFile& c, const std::string& quadOverride )
        {
            AssemblyOptions opts;
            const std::string spec = not quadOverride.empty() ? quadOverride : c.quadrature.value_or( "" );
            if( not spec.empty() )
            {
                const auto rule = parse_quadrature( spec );
                opts.stiffnessRule = rule;
                opts.loadRule = rule;
            }
            return opts;
        }

        PoissonCase make_case( const CaseFile& c, HierarchicalSpace h )
        {
            return PoissonCase{ std::move( h ), c.boundary, c.exact.build() };
        }

        HierarchicalSpace apply_step( const CaseFile& c, const HierarchicalSpace& h, const RefinementStep& step,
                                      const AssemblyOptions& options )
        {
            switch( step.mode )
            {
                case RefinementStep::Mode::Global: return refine( h, h.activeElements() );
                case RefinementStep::Mode::Region: return refine( h, elements_in_region( h, step.lower, step.upper ) );
                case RefinementStep::Mode::Elements:
                    try
                    {
                        return refine( h, step.elements );
                    }
                    catch( const ArgumentError& e )
                    {
                        throw CaseError( std::string( "refinement script: " ) + e.what() );
                    }
                case RefinementStep::Mode::Indicator:
                {
                    if( h.dim() != 2 ) throw CaseError( "indicator refinement needs a bivariate case" );
                    const MultilevelExtraction ml( h );
                    const auto sol = solve_poisson( make_case( c, h ), ml, options );
                    const auto eta = gradient_indicator( BezierPath( ml ), sol.coefficients );
                    return refine( h, mark_top_fraction( h, eta, step.theta ) );
                }
            }
            return h;
        }

        std::vector<RefinementStep> expanded_script( const CaseFile& c )
        {
            std::vector<RefinementStep> out;
            for( const auto& s : c.refinement )
                for( int r = 0; r < s.repeat; ++r ) out.push_back( s );
            return out;
        }

        std::string format_number( double x ) { return fmt::format( "{}", x ); }

        json matrix_json( const Eigen::MatrixXd& m )
        {
            json rows = json::array();
            for( Eigen::Index i = 0; i < m.rows(); ++i )
            {
                json row = json::array();
                for( Eigen::Index j = 0; j < m.cols(); ++j ) row.push_back( m( i, j ) );
                rows.push_back( std::move( row ) );
            }
            return rows;
        }

        json hierarchy_json( const HierarchicalSpace& h )
        {
            json levels = json::array();
            for( int l = 0; l < h.numLevels(); ++l )
            {
                json knots = json::array();
                for( int k = 0; k < h.dim(); ++k )
                {
                    const auto v = h.level( l ).direction( k ).values();
                    knots.push_back( std::vector<double>( v.begin(), v.end() ) );
                }
                levels.push_back( { { "level", l },
                                    { "knots", knots },
                                    { "active", h.activeIndices( l ) },
                                    { "deactivated", h.deactivatedIndices( l ) } } );
            }
            return levels;
        }

        json function_keys_json( const HierarchicalSpace& h, const std::vector<int>& ids )
        {
            json out = json::array();
            for( int id : ids )
            {
                const auto key = h.activeFunctions().at( id );
                out.push_back( { key.level, key.index } );
            }
            return out;
        }

        void write_text( const std::string& path, const std::string& text )
        {
            std::ofstream f( path, std::ios::binary );
            if( not f ) throw std::ios_base::failure( "cannot write " + path );
            f << text;
            if( not f ) throw std::ios_base::failure( "cannot write " + path );
        }

        void emit( const std::string& path, const std::string& text, std::ostream& out )
        {
            if( path.empty() or path == "-" )
                out << text;
            else
                write_text( path, text );
        }

        struct Solved
        {
            ConvergenceRow row;
            PoissonSolution solution;
        };

        Solved solve_row( const CaseFile& c, const HierarchicalSpace& h, int step, const AssemblyOptions& options,
                          bool withEquivalence, bool deterministic, Clock::time_point started )
        {
            const auto problem = make_case( c, h );
            const MultilevelExtraction ml( h );
            Solved s;
            s.solution = solve_poisson( problem, ml, options );
            s.row.step = step;
            s.row.dofs = h.numActiveFunctions();
            s.row.h = mesh_size( h );
            s.row.l2Error = s.solution.l2Error;
            if( withEquivalence )
            {
                const ThbEvaluator ev( h );
                const auto direct = assemble_direct( problem, ev, options );
                s.row.equivResidual = relative_frobenius( assemble( problem, ml, options ).stiffness, direct.stiffness );
            }
            if( not deterministic )
                s.row.wallMs = std::chrono::duration<double, std::milli>( Clock::now() - started ).count();
            return s;
        }

        struct Common
        {
            std::string config;
            std::string outPath;
            std::string quad;
            bool deterministic = false;
        };

        void add_common( CLI::App* cmd, Common& o )
        {
            cmd->add_option( "--config", o.config, "Case file (JSON)" )->required();
            cmd->add_option( "--out", o.outPath, "Output path ('-' for stdout)" );
            cmd->add_option( "--quad", o.quad, "Element quadrature override: gauss:N or nc:N" );
            cmd->add_flag( "--deterministic", o.deterministic, "Byte-stable output (omits wall times)" );
        }

        int cmd_solve( const Common& o, std::ostream& out, spdlog::logger& log )
        {
            const auto c = load_case( o.config );
            if( c.dim != 2 ) throw CaseError( o.config + ": solve needs a bivariate case" );
            const auto options = assembly_options( c, o.quad );

            std::vector<ConvergenceRow> rows;
            auto started = Clock::now();
            HierarchicalSpace h = c.initialSpace();
            auto s = solve_row( c, h, 0, options, false, o.deterministic, started );
            log.info( "step 0: {} dofs, L2 error {}", s.row.dofs, s.row.l2Error );
            rows.push_back( s.row );

            int step = 0;
            for( const auto& st : expanded_script( c ) )
            {
                started = Clock::now();
                if( st.mode == RefinementStep::Mode::Indicator )
                {
                    const MultilevelExtraction ml( h );
                    const auto eta = gradient_indicator( BezierPath( ml ), s.solution.coefficients );
                    h = refine( h, mark_top_fraction( h, eta, st.theta ) );
                }
                else
                    h = apply_step( c, h, st, options );
                s = solve_row( c, h, ++step, options, false, o.deterministic, started );
                log.info( "step {}: {} dofs, L2 error {}", step, s.row.dofs, s.row.l2Error );
                rows.push_back( s.row );
            }

            const std::string csvPath = not o.outPath.empty() ? o.outPath : c.csvPath.value_or( "" );
            emit( csvPath, format_csv( rows ), out );

            if( c.solutionPath )
            {
                std::vector<int> ids( h.numActiveFunctions() );
                for( int i = 0; i < h.numActiveFunctions(); ++i ) ids[i] = i;
                const json sol{ { "dofs", h.numActiveFunctions() },
                                { "l2_error", s.solution.l2Error },
                                { "coefficients", std::vector<double>( s.solution.coefficients.data(),
                                                                       s.solution.coefficients.data() + s.solution.coefficients.size() ) },
                                { "functions", function_keys_json( h, ids ) },
                                { "hierarchy", hierarchy_json( h ) } };
                write_text( *c.solutionPath, sol.dump( 2 ) + "\n" );
            }
            return kOk;
        }

        int cmd_convergence( const Common& o, const std::string& mode, int steps, std::ostream& out, spdlog::logger& log )
        {
            const auto c = load_case( o.config );
            if( c.dim != 2 ) throw CaseError( o.config + ": convergence needs a bivariate case" );
            const auto options = assembly_options( c, o.quad );
            const bool local = mode == "local";
            double theta = 0.2;
            for( const auto& st : c.refinement )
                if( st.mode == RefinementStep::Mode::Indicator )
                {
                    theta = st.theta;
                    break;
                }

            std::vector<ConvergenceRow> rows;
            HierarchicalSpace h = c.initialSpace();
            for( int k = 0; k < steps; ++k )
            {
                auto started = Clock::now();
                if( k > 0 )
                {
                    if( local )
                    {
                        const MultilevelExtraction ml( h );
                        const auto sol = solve_poisson( make_case( c, h ), ml, options );
                        h = refine( h, mark_top_fraction( h, gradient_indicator( BezierPath( ml ), sol.coefficients ), theta ) );
                    }
                    else
                        h = refine( h, h.activeElements() );
                }
                const auto s = solve_row( c, h, k, options, local, o.deterministic, started );
                log.info( "{} step {}: {} dofs, L2 error {}", mode, k, s.row.dofs, s.row.l2Error );
                rows.push_back( s.row );
            }
            emit( not o.outPath.empty() ? o.outPath : c.csvPath.value_or( "" ), format_csv( rows ), out );
            return kOk;
        }

        int cmd_extract( const Common& o, const std::string& element, std::ostream& out )
        {
            const auto c = load_case( o.config );
            const auto options = assembly_options( c, o.quad );
            const auto h = run_refinement_script( c, options );
            const auto key = parse_element( element, h );
            if( not key ) throw ElementNotFound( "element '" + element + "' is not an active element" );

            const MultilevelExtraction ml( h );
            const auto rec = ml.element( *key );
            const auto loc = ml.local( *key );
            json j{ { "element", { { "level", key->level }, { "index", key->index }, { "ordinal", rec.ordinal } } },
                    { "box", { { "lower", { rec.box[0][0], rec.box[0][1] } }, { "upper", { rec.box[1][0], rec.box[1][1] } } } },
                    { "functions", rec.functions },
                    { "function_keys", function_keys_json( h, rec.functions ) },
                    { "columns", loc.columns },
                    { "M", matrix_json( rec.M ) },
                    { "E", matrix_json( rec.E ) },
                    { "C", matrix_json( rec.C ) } };
            if( h.dim() == 1 ) j["box"] = { { "lower", { rec.box[0][0] } }, { "upper", { rec.box[1][0] } } };
            emit( o.outPath, j.dump( 2 ) + "\n", out );
            return kOk;
        }

        std::vector<double> parse_knots( const std::string& text )
        {
            std::vector<double> out;
            std::string item;
            std::istringstream in( text );
            while( std::getline( in, item, ',' ) )
            {
                const auto b = item.find_first_not_of( " \t[]" );
                const auto e = item.find_last_not_of( " \t[]" );
                if( b == std::string::npos ) throw CaseError( "empty entry in knot vector '" + text + "'" );
                const auto token = item.substr( b, e - b + 1 );
                std::size_t used = 0;
                double v = 0.0;
                try
                {
                    v = std::stod( token, &used );
                }
                catch( const std::exception& )
                {
                    used = 0;
                }
                if( used != token.size() ) throw CaseError( "cannot parse knot '" + token + "'" );
                out.push_back( v );
            }
            if( out.size() < 4 ) throw CaseError( "knot vector needs at least four entries" );
            return out;
        }

        int cmd_demo_nc( const std::string& knots, int degree, const std::string& quad, const std::string& outPath,
                         std::ostream& out )
        {
            const auto values = parse_knots( knots );
            if( degree <= 0 )
            {
                // Open knot vectors repeat the first knot p+1 times.
                degree = 0;
                while( degree + 1 < static_cast<int>( values.size() ) and values[degree + 1] == values[0] ) ++degree;
            }
            int points = 3;
            if( not quad.empty() )
            {
                const auto rule = parse_quadrature( quad );
                if( rule.kind != QuadratureKind::NewtonCotesClosed ) throw CaseError( "demo-nc expects --quad nc:N" );
                points = rule.size();
            }
            const KnotVector kv( values, degree );
            emit( outPath, format_report( demo_newton_cotes_pathology( kv, points ) ), out );
            return kOk;
        }

        int cmd_validate( const std::string& config, std::ostream& out )
        {
            const auto c = load_case( config );
            out << config << ": valid (dimension " << c.dim << ", degree " << c.degree[0];
            if( c.dim == 2 ) out << "x" << c.degree[1];
            out << ", elements " << c.elements[0];
            if( c.dim == 2 ) out << "x" << c.elements[1];
            out << ", " << c.refinement.size() << " refinement steps)\n";
            return kOk;
        }
    }

    std::string format_csv( const std::vector<ConvergenceRow>& rows )
    {
        std::string s = "step,dofs,h,l2_error,equiv_residual,wall_ms\r\n";
        for( const auto& r : rows )
        {
            s += std::to_string( r.step ) + "," + std::to_string( r.dofs ) + "," + format_number( r.h ) + "," +
                 format_number( r.l2Error ) + "," + ( r.equivResidual ? format_number( *r.equivResidual ) : "" ) + "," +
                 ( r.wallMs ? fmt::format( "{:.3f}", *r.wallMs ) : "" ) + "\r\n";
        }
        return s;
    }

    double mesh_size( const HierarchicalSpace& h )
    {
        double out = 1.0;
        for( const auto& key : h.activeElements() )
        {
            const auto box = h.elementBox( key );
            double size = box[1][0] - box[0][0];
            if( h.dim() == 2 ) size = std::max( size, box[1][1] - box[0][1] );
            out = std::min( out, size );
        }
        return out;
    }

    std::optional<ElementKey> parse_element( const std::string& spec, const HierarchicalSpace& h )
    {
        const auto number = [&]( const std::string& s ) {
            if( s.empty() or s.find_first_not_of( "0123456789" ) != std::string::npos )
                throw CaseError( "malformed element '" + spec + "' (expected L:i, L:i,j or an ordinal)" );
            try
            {
                return std::stoi( s );
            }
            catch( const std::out_of_range& )
            {
                return -1;
            }
        };

        const auto colon = spec.find( ':' );
        if( colon == std::string::npos )
        {
            const int ordinal = number( spec );
            if( ordinal < 0 or ordinal >= static_cast<int>( h.activeElements().size() ) ) return std::nullopt;
            return h.activeElements()[ordinal];
        }

        const int level = number( spec.substr( 0, colon ) );
        if( level < 0 or level >= h.numLevels() ) return std::nullopt;
        const auto& space = h.level( level );
        const auto rest = spec.substr( colon + 1 );
        const auto comma = rest.find( ',' );
        int index = 0;
        if( comma == std::string::npos )
        {
            index = number( rest );
            if( index < 0 or index >= space.numElements() ) return std::nullopt;
        }
        else
        {
            if( h.dim() != 2 ) throw CaseError( "malformed element '" + spec + "' (univariate case takes L:i)" );
            const int i = number( rest.substr( 0, comma ) );
            const int j = number( rest.substr( comma + 1 ) );
            if( i < 0 or j < 0 or i >= space.numElements( 0 ) or j >= space.numElements( 1 ) ) return std::nullopt;
            index = space.flattenElement( { i, j } );
        }
        const ElementKey key{ level, index };
        if( h.elementState( key ) != ElementState::Active ) return std::nullopt;
        return key;
    }

    HierarchicalSpace run_refinement_script( const CaseFile& c, const AssemblyOptions& options )
    {
        HierarchicalSpace h = c.initialSpace();
        for( const auto& st : expanded_script( c ) ) h = apply_step( c, h, st, options );
        return h;
    }

    int run_cli( const int argc, const char* const* argv, std::ostream& out, std::ostream& err )
    {
        auto log = make_logger( err );

        CLI::App app{ "Truncated hierarchical B-splines with multi-level Bezier extraction" };
        app.name( "thbez" );
        app.require_subcommand( 1 );

        Common solveOpts, convOpts, extractOpts;
        auto* solve = app.add_subcommand( "solve", "Refine, assemble, solve and report the L2 error" );
        add_common( solve, solveOpts );

        std::string mode = "global";
        int steps = 5;
        auto* conv = app.add_subcommand( "convergence", "Convergence study under global or local refinement" );
        add_common( conv, convOpts );
        conv->add_option( "--mode", mode, "global or local" )->check( CLI::IsMember( { "global", "local" } ) );
        conv->add_option( "--steps", steps, "Number of meshes (rows)" )->check( CLI::Range( 0, 64 ) );

        std::string element;
        auto* extract = app.add_subcommand( "extract", "Dump M, E and C of one active element as JSON" );
        add_common( extract, extractOpts );
        extract->add_option( "--element", element, "L:i, L:i,j or an active-element ordinal" )->required();

        std::string knots, demoQuad, demoOut;
        int degree = 0;
        auto* demo = app.add_subcommand( "demo-nc", "Newton-Cotes boundary attribution report" );
        demo->add_option( "knots", knots, "Comma-separated knot vector" )->required();
        demo->add_option( "--degree", degree, "Spline degree (default: from the first knot's multiplicity)" );
        demo->add_option( "--quad", demoQuad, "Closed Newton-Cotes rule nc:N (default nc:3)" );
        demo->add_option( "--out", demoOut, "Output path" );

        std::string validateConfig;
        auto* validate = app.add_subcommand( "validate", "Check a case file against the schema" );
        validate->add_option( "--config", validateConfig, "Case file (JSON)" )->required();

        try
        {
            app.parse( argc, argv );
        }
        catch( const CLI::ParseError& e )
        {
            const int code = app.exit( e, out, err );
            return code == 0 ? kOk : kInvalidInput;
        }

        try
        {
            if( solve->parsed() ) return cmd_solve( solveOpts, out, *log );
            if( conv->parsed() ) return cmd_convergence( convOpts, mode, steps, out, *log );
            if( extract->parsed() ) return cmd_extract( extractOpts, element, out );
            if( demo->parsed() ) return cmd_demo_nc( knots, degree, demoQuad, demoOut, out );
            if( validate->parsed() ) return cmd_validate( validateConfig, out );
        }
        catch( const CaseError& e )
        {
            log->error( "{}", e.what() );
            return kInvalidInput;
        }
        catch( const ElementNotFound& e )
        {
            log->error( "{}", e.what() );
            return kBadElement;
        }
        catch( const ArgumentError& e )
        {
            log->error( "{}", e.what() );
            return kInvalidInput;
        }
        catch( const NumericalError& e )
        {
            log->error( "numerical failure: {}", e.what() );
            return kNumerical;
        }
        catch( const RefinementError& e )
        {
            log->error( "refinement failure: {}", e.what() );
            return kNumerical;
        }
        catch( const NestingError& e )
        {
            log->error( "nesting failure: {}", e.what() );
            return kNumerical;
        }
        catch( const DomainError& e )
        {
            log->error( "{}", e.what() );
            return kNumerical;
        }
        catch( const std::ios_base::failure& e )
        {
            log->error( "{}", e.what() );
            return kFailure;
        }
        catch( const std::exception& e )
        {
            log->error( "unexpected failure: {}", e.what() );
            return kFailure;
        }
        return kFailure;
    }
}
