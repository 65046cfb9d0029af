#include <thbez/bezier.hpp>
#include <thbez/cli/commands.hpp>
#include <thbez/errors.hpp>
#include <thbez/hierarchy.hpp>
#include <thbez/multilevel.hpp>
#include <thbez/pathology.hpp>
#include <thbez/poisson.hpp>
#include <thbez/splines.hpp>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace thbez;

namespace
{
    using Key = std::pair<int, int>;

    std::vector<ElementKey> to_elements( const std::vector<Key>& keys )
    {
        std::vector<ElementKey> out;
        for( const auto& [l, i] : keys ) out.push_back( { l, i } );
        return out;
    }

    template <typename K>
    std::vector<Key> to_pairs( const std::vector<K>& keys )
    {
        std::vector<Key> out;
        for( const auto& k : keys ) out.emplace_back( k.level, k.index );
        return out;
    }

    BoundarySpec boundary_from( const std::vector<std::string>& neumann )
    {
        BoundarySpec b;
        const std::array<const char*, 4> names{ "left", "right", "bottom", "top" };
        for( const auto& n : neumann )
        {
            const auto it = std::find( names.begin(), names.end(), n );
            if( it == names.end() ) throw ArgumentError( "unknown edge '" + n + "'" );
            b.edges[it - names.begin()] = BoundaryKind::Neumann;
        }
        return b;
    }
}

PYBIND11_MODULE( _thbez, m )
{
    m.doc() = "Truncated hierarchical B-splines with multi-level Bezier extraction";

    py::register_exception<DomainError>( m, "DomainError", PyExc_ValueError );
    py::register_exception<ArgumentError>( m, "ArgumentError", PyExc_ValueError );
    py::register_exception<RefinementError>( m, "RefinementError", PyExc_RuntimeError );
    py::register_exception<NestingError>( m, "NestingError", PyExc_RuntimeError );
    py::register_exception<NumericalError>( m, "NumericalError", PyExc_ArithmeticError );

    py::class_<KnotVector>( m, "KnotVector" )
        .def( py::init<std::vector<double>, int>(), py::arg( "values" ), py::arg( "degree" ) )
        .def_property_readonly( "degree", &KnotVector::degree )
        .def_property_readonly( "values",
                                []( const KnotVector& kv ) { return std::vector<double>( kv.values().begin(), kv.values().end() ); } )
        .def_property_readonly( "num_functions", &KnotVector::numFunctions )
        .def_property_readonly( "num_elements", &KnotVector::numElements )
        .def( "breakpoints", &KnotVector::breakpoints )
        .def( "__len__", &KnotVector::size )
        .def( "__repr__", []( const KnotVector& kv ) {
            std::ostringstream s;
            s << "KnotVector(degree=" << kv.degree() << ", size=" << kv.size() << ")";
            return s.str();
        } );

    m.def( "uniform_knot_vector", &uniform_knot_vector, py::arg( "degree" ), py::arg( "elements" ) );
    m.def( "dyadic_refine", py::overload_cast<const KnotVector&>( &dyadic_refine ), py::arg( "knots" ) );
    m.def( "find_span", &find_span, py::arg( "knots" ), py::arg( "xi" ) );
    m.def(
        "eval_basis",
        []( const KnotVector& kv, double xi ) {
            const auto b = eval_basis( kv, xi );
            return py::make_tuple( b.span, b.values );
        },
        py::arg( "knots" ), py::arg( "xi" ), "Returns (span, values of the p+1 nonzero functions)." );
    m.def( "bernstein", &bernstein, py::arg( "degree" ), py::arg( "t" ) );
    m.def(
        "decompose",
        []( const KnotVector& kv ) {
            py::list out;
            for( const auto& op : decompose( kv ) ) out.append( py::make_tuple( op.functions, op.matrix ) );
            return out;
        },
        py::arg( "knots" ), "Per element: (function indices, extraction operator)." );
    m.def( "subdivision_matrix", py::overload_cast<const KnotVector&, const KnotVector&>( &subdivision_matrix ),
           py::arg( "coarse" ), py::arg( "fine" ) );

    py::class_<HierarchicalSpace>( m, "HierarchicalSpace" )
        .def( py::init( []( std::vector<KnotVector> dirs ) { return HierarchicalSpace( TensorSpace( std::move( dirs ) ) ); } ),
              py::arg( "directions" ) )
        .def_property_readonly( "dim", &HierarchicalSpace::dim )
        .def_property_readonly( "num_levels", &HierarchicalSpace::numLevels )
        .def_property_readonly( "num_active_functions", &HierarchicalSpace::numActiveFunctions )
        .def( "active_elements", []( const HierarchicalSpace& h ) { return to_pairs( h.activeElements() ); } )
        .def( "active_functions", []( const HierarchicalSpace& h ) { return to_pairs( h.activeFunctions() ); } )
        .def( "active_indices", &HierarchicalSpace::activeIndices, py::arg( "level" ) )
        .def( "deactivated_indices", &HierarchicalSpace::deactivatedIndices, py::arg( "level" ) )
        .def(
            "element_box",
            []( const HierarchicalSpace& h, Key k ) { return h.elementBox( { k.first, k.second } ); }, py::arg( "element" ) )
        .def(
            "locate",
            []( const HierarchicalSpace& h, const Point& x ) {
                const auto k = h.locate( x );
                return Key{ k.level, k.index };
            },
            py::arg( "point" ) )
        .def(
            "refine",
            []( const HierarchicalSpace& h, const std::vector<Key>& marked ) { return refine( h, to_elements( marked ) ); },
            py::arg( "elements" ) )
        .def(
            "refine_region",
            []( const HierarchicalSpace& h, const Point& lower, const Point& upper ) {
                return refine( h, elements_in_region( h, lower, upper ) );
            },
            py::arg( "lower" ), py::arg( "upper" ) )
        .def( "refine_all", []( const HierarchicalSpace& h ) { return refine( h, h.activeElements() ); } );

    m.def(
        "eval_thb",
        []( const HierarchicalSpace& h, const Point& x ) {
            const auto r = eval_thb( h, x );
            return py::make_tuple( r.ids, r.values );
        },
        py::arg( "space" ), py::arg( "point" ), "Returns (function ids, values) of the nonzero THB functions." );

    m.def(
        "element_operator",
        []( const HierarchicalSpace& h, Key key ) {
            const MultilevelExtraction ml( h );
            const auto rec = ml.element( { key.first, key.second } );
            py::dict d;
            d["ordinal"] = rec.ordinal;
            d["box"] = rec.box;
            d["functions"] = rec.functions;
            d["M"] = rec.M;
            d["E"] = rec.E;
            d["C"] = rec.C;
            return d;
        },
        py::arg( "space" ), py::arg( "element" ), "Multi-level operators M, E and C = M E of one active element." );

    m.def(
        "solve_poisson",
        []( const HierarchicalSpace& h, double c, const std::vector<std::string>& neumann, bool direct ) {
            const PoissonCase problem{ h, boundary_from( neumann ), ExactSolution::gaussian( c ) };
            const auto sol = direct ? solve_poisson_direct( problem, ThbEvaluator( h ) ) : solve_poisson( problem );
            py::dict d;
            d["coefficients"] = sol.coefficients;
            d["l2_error"] = sol.l2Error;
            d["stiffness"] = Eigen::MatrixXd( sol.system.stiffness );
            return d;
        },
        py::arg( "space" ), py::arg( "C" ) = 100.0, py::arg( "neumann" ) = std::vector<std::string>{},
        py::arg( "direct" ) = false,
        "Solves -lap u = f for the Gaussian bump exact solution; returns coefficients, L2 error and the dense stiffness." );

    m.def(
        "run_cli",
        []( std::vector<std::string> args ) {
            args.insert( args.begin(), "thbez" );
            std::vector<const char*> argv;
            for( const auto& a : args ) argv.push_back( a.c_str() );
            std::ostringstream out, err;
            const int code = cli::run_cli( static_cast<int>( argv.size() ), argv.data(), out, err );
            return py::make_tuple( code, out.str(), err.str() );
        },
        py::arg( "args" ), "Runs the command-line tool in-process; returns (exit code, stdout, stderr)." );
}
