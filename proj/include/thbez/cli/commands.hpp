#pragma once

#include <thbez/cli/case_file.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace thbez::cli
{
    enum ExitCode : int
    {
        kOk = 0,
        kFailure = 1,        ///< I/O failure on outputs
        kInvalidInput = 2,   ///< usage, case file syntax or schema
        kNumerical = 3,      ///< factorization, residual, projection failures
        kBadElement = 4,     ///< inactive or unknown element for extract
    };

    struct ConvergenceRow
    {
        int step = 0;
        int dofs = 0;
        double h = 0.0;
        double l2Error = 0.0;
        std::optional<double> equivResidual;
        std::optional<double> wallMs;
    };

    /// RFC 4180 CSV with the fixed header step,dofs,h,l2_error,equiv_residual,wall_ms.
    std::string format_csv( const std::vector<ConvergenceRow>& rows );

    /// Size of the smallest active element (the finest active level).
    double mesh_size( const HierarchicalSpace& h );

    /// "L:i" (flat index), "L:i,j" (tensor index) or a plain ordinal into the
    /// active elements. Returns nullopt when the element does not exist or is not
    /// active; throws CaseError on malformed input.
    std::optional<ElementKey> parse_element( const std::string& spec, const HierarchicalSpace& h );

    /// Applies every step of the case's refinement script, solving where an
    /// indicator needs the current solution.
    HierarchicalSpace run_refinement_script( const CaseFile& c, const AssemblyOptions& options );

    /// Entry point for the `thbez` executable; returns the process exit code.
    int run_cli( int argc, const char* const* argv, std::ostream& out, std::ostream& err );
}
