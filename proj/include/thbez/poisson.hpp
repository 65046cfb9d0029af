#pragma once

#include <thbez/hierarchy.hpp>
#include <thbez/multilevel.hpp>
#include <thbez/quadrature.hpp>

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace thbez
{
    enum class Edge
    {
        Left = 0,
        Right = 1,
        Bottom = 2,
        Top = 3,
    };

    enum class BoundaryKind
    {
        Dirichlet,
        Neumann,
    };

    struct BoundarySpec
    {
        std::array<BoundaryKind, 4> edges{ BoundaryKind::Dirichlet, BoundaryKind::Dirichlet, BoundaryKind::Dirichlet,
                                           BoundaryKind::Dirichlet };

        BoundaryKind operator[]( Edge e ) const { return edges[static_cast<int>( e )]; }
        bool hasDirichlet() const;
    };

    /// Manufactured solution u with its gradient and Laplacian. The source is
    /// f = -Laplacian(u), Dirichlet data g = u, Neumann data h = grad(u).n.
    struct ExactSolution
    {
        std::function<double( double, double )> value;
        std::function<std::array<double, 2>( double, double )> gradient;
        std::function<double( double, double )> laplacian;

        /// u = exp(-C ((x-0.5)^2 + (y-0.5)^2)).
        static ExactSolution gaussian( double c );

        struct Monomial
        {
            double coefficient;
            int xPower;
            int yPower;
        };
        /// u = sum c x^a y^b.
        static ExactSolution polynomial( std::vector<Monomial> terms );
    };

    /// Poisson problem on the parametric unit square (identity geometry).
    struct PoissonCase
    {
        HierarchicalSpace hierarchy;
        BoundarySpec boundary;
        ExactSolution exact;
    };

    struct LinearSystem
    {
        Eigen::SparseMatrix<double> stiffness;
        Eigen::VectorXd load;
        /// Prescribed values of constrained functions, sorted by id.
        std::vector<std::pair<int, double>> dirichlet;
    };

    /// Basis functions supported on one active element, evaluated at reference
    /// coordinates in [0,1]^2.
    class ElementBasis
    {
    public:
        virtual ~ElementBasis() = default;
        virtual const std::vector<int>& functions() const = 0;
        /// Gradients are with respect to physical coordinates, one row per function.
        virtual void eval( double tx, double ty, Eigen::VectorXd& values, Eigen::MatrixXd* gradients ) const = 0;
    };

    /// Strategy for evaluating the hierarchical basis element by element.
    class BasisPath
    {
    public:
        virtual ~BasisPath() = default;
        virtual const HierarchicalSpace& hierarchy() const = 0;
        virtual std::unique_ptr<ElementBasis> element( ElementKey key ) const = 0;
    };

    /// C^e B(t): the multi-level Bezier extraction route.
    class BezierPath : public BasisPath
    {
    public:
        explicit BezierPath( const MultilevelExtraction& extraction ) : mExtraction( extraction ) {}
        const HierarchicalSpace& hierarchy() const override { return mExtraction.hierarchy(); }
        std::unique_ptr<ElementBasis> element( ElementKey key ) const override;

    private:
        const MultilevelExtraction& mExtraction;
    };

    /// Truncated functions evaluated through Cox-de Boor on the finest level.
    class DirectThbPath : public BasisPath
    {
    public:
        explicit DirectThbPath( const ThbEvaluator& evaluator ) : mEvaluator( evaluator ) {}
        const HierarchicalSpace& hierarchy() const override { return mEvaluator.hierarchy(); }
        std::unique_ptr<ElementBasis> element( ElementKey key ) const override;

    private:
        const ThbEvaluator& mEvaluator;
    };

    struct AssemblyOptions
    {
        /// Rule for stiffness integrals; defaults to (p+1) Gauss points per direction.
        std::optional<QuadratureRule> stiffnessRule;
        /// Rule for load, boundary and error integrals; defaults to (p+2) Gauss points.
        std::optional<QuadratureRule> loadRule;
    };

    /// Stiffness of the Bernstein basis on an axis-aligned element of size hx by hy.
    Eigen::MatrixXd bezier_element_stiffness( int p, int q, const QuadratureRule& rule, double hx, double hy );

    /// Integrals of f against the Bernstein basis on an element box.
    Eigen::VectorXd bezier_element_load( int p, int q, const QuadratureRule& rule,
                                         const std::array<std::array<double, 2>, 2>& box,
                                         const std::function<double( double, double )>& f );

    /// C K_Bezier C^T.
    Eigen::MatrixXd element_stiffness( const ElementRecord& rec, const Eigen::MatrixXd& k_bezier );

    /// Global system through the per-element operators and one reference
    /// Bernstein stiffness per element shape.
    LinearSystem assemble( const PoissonCase& problem, const MultilevelExtraction& extraction,
                           const AssemblyOptions& options = {} );

    /// Global system by direct quadrature of the truncated basis. Independent of
    /// the extraction operators.
    LinearSystem assemble_direct( const PoissonCase& problem, const ThbEvaluator& evaluator,
                                  const AssemblyOptions& options = {} );

    /// Adds Neumann loads and fixes Dirichlet functions by L2 projection of g onto
    /// the boundary trace space.
    LinearSystem apply_bcs( LinearSystem system, const PoissonCase& problem, const BasisPath& path,
                            const AssemblyOptions& options = {} );

    /// Eliminates the Dirichlet functions and factorizes the reduced SPD system.
    Eigen::VectorXd solve( const LinearSystem& system );

    double l2_error( const PoissonCase& problem, const BasisPath& path, const Eigen::VectorXd& coefficients,
                     const std::optional<QuadratureRule>& rule = std::nullopt );

    /// Boundary L2 error of the discrete solution against g on the Dirichlet edges.
    double boundary_l2_error( const PoissonCase& problem, const BasisPath& path, const Eigen::VectorXd& coefficients );

    /// Element-wise L2 norm of the discrete gradient, ordered like activeElements().
    std::vector<double> gradient_indicator( const BasisPath& path, const Eigen::VectorXd& coefficients );

    /// Top ceil(theta * n) active elements by indicator.
    std::vector<ElementKey> mark_top_fraction( const HierarchicalSpace& h, const std::vector<double>& indicator,
                                               double theta );

    /// ||A - B||_F / ||B||_F.
    double relative_frobenius( const Eigen::SparseMatrix<double>& a, const Eigen::SparseMatrix<double>& b );

    struct PoissonSolution
    {
        Eigen::VectorXd coefficients;
        LinearSystem system;
        double l2Error = 0.0;
    };

    /// assemble -> apply_bcs -> solve -> l2_error through the extraction route.
    PoissonSolution solve_poisson( const PoissonCase& problem, const AssemblyOptions& options = {} );
    PoissonSolution solve_poisson( const PoissonCase& problem, const MultilevelExtraction& extraction,
                                   const AssemblyOptions& options = {} );

    /// Same pipeline through direct truncated-basis quadrature.
    PoissonSolution solve_poisson_direct( const PoissonCase& problem, const ThbEvaluator& evaluator,
                                          const AssemblyOptions& options = {} );
}
