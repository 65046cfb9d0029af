#include <thbez/poisson.hpp>

#include <thbez/errors.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/SparseCholesky>

namespace thbez
{
    bool BoundarySpec::hasDirichlet() const
    {
        return std::any_of( edges.begin(), edges.end(), []( BoundaryKind k ) { return k == BoundaryKind::Dirichlet; } );
    }

    ExactSolution ExactSolution::gaussian( const double c )
    {
        ExactSolution u;
        u.value = [c]( double x, double y ) {
            return std::exp( -c * ( ( x - 0.5 ) * ( x - 0.5 ) + ( y - 0.5 ) * ( y - 0.5 ) ) );
        };
        u.gradient = [c]( double x, double y ) {
            const double v = std::exp( -c * ( ( x - 0.5 ) * ( x - 0.5 ) + ( y - 0.5 ) * ( y - 0.5 ) ) );
            return std::array<double, 2>{ -2.0 * c * ( x - 0.5 ) * v, -2.0 * c * ( y - 0.5 ) * v };
        };
        u.laplacian = [c]( double x, double y ) {
            const double r2 = ( x - 0.5 ) * ( x - 0.5 ) + ( y - 0.5 ) * ( y - 0.5 );
            return ( 4.0 * c * c * r2 - 4.0 * c ) * std::exp( -c * r2 );
        };
        return u;
    }

    ExactSolution ExactSolution::polynomial( std::vector<Monomial> terms )
    {
        const auto pw = []( double x, int k ) { return k <= 0 ? ( k == 0 ? 1.0 : 0.0 ) : std::pow( x, k ); };
        ExactSolution u;
        u.value = [terms, pw]( double x, double y ) {
            double s = 0.0;
            for( const auto& t : terms ) s += t.coefficient * pw( x, t.xPower ) * pw( y, t.yPower );
            return s;
        };
        u.gradient = [terms, pw]( double x, double y ) {
            std::array<double, 2> g{ 0.0, 0.0 };
            for( const auto& t : terms )
            {
                g[0] += t.coefficient * t.xPower * pw( x, t.xPower - 1 ) * pw( y, t.yPower );
                g[1] += t.coefficient * t.yPower * pw( x, t.xPower ) * pw( y, t.yPower - 1 );
            }
            return g;
        };
        u.laplacian = [terms, pw]( double x, double y ) {
            double s = 0.0;
            for( const auto& t : terms )
            {
                s += t.coefficient * t.xPower * ( t.xPower - 1 ) * pw( x, t.xPower - 2 ) * pw( y, t.yPower );
                s += t.coefficient * t.yPower * ( t.yPower - 1 ) * pw( x, t.xPower ) * pw( y, t.yPower - 2 );
            }
            return s;
        };
        return u;
    }

    namespace
    {
        using Box = std::array<std::array<double, 2>, 2>;

        void require_2d( const HierarchicalSpace& h )
        {
            if( h.dim() != 2 ) throw ArgumentError( "the Poisson solver works on bivariate spaces" );
        }

        int default_points( const HierarchicalSpace& h, int extra )
        {
            return std::max( h.base().degree( 0 ), h.base().degree( 1 ) ) + extra;
        }

        // Tensor Bernstein values and reference derivatives, first direction fastest.
        struct BernsteinTensor
        {
            Eigen::VectorXd values;
            Eigen::MatrixXd refGradients;
        };

        BernsteinTensor bernstein_tensor( int p, int q, double tx, double ty, bool gradients )
        {
            const int order = gradients ? 1 : 0;
            const Eigen::MatrixXd bx = bernstein_derivs( p, tx, order );
            const Eigen::MatrixXd by = bernstein_derivs( q, ty, order );
            BernsteinTensor out;
            out.values.resize( ( p + 1 ) * ( q + 1 ) );
            if( gradients ) out.refGradients.resize( ( p + 1 ) * ( q + 1 ), 2 );
            for( int b = 0; b <= q; ++b )
                for( int a = 0; a <= p; ++a )
                {
                    const int k = a + ( p + 1 ) * b;
                    out.values( k ) = bx( 0, a ) * by( 0, b );
                    if( gradients )
                    {
                        out.refGradients( k, 0 ) = bx( 1, a ) * by( 0, b );
                        out.refGradients( k, 1 ) = bx( 0, a ) * by( 1, b );
                    }
                }
            return out;
        }

        class BezierElementBasis : public ElementBasis
        {
        public:
            explicit BezierElementBasis( ElementRecord rec, int p, int q )
                : mRecord( std::move( rec ) ), mP( p ), mQ( q )
            {
            }

            const std::vector<int>& functions() const override { return mRecord.functions; }

            void eval( double tx, double ty, Eigen::VectorXd& values, Eigen::MatrixXd* gradients ) const override
            {
                const auto b = bernstein_tensor( mP, mQ, tx, ty, gradients != nullptr );
                values = mRecord.C * b.values;
                if( gradients )
                {
                    *gradients = mRecord.C * b.refGradients;
                    gradients->col( 0 ) /= ( mRecord.box[1][0] - mRecord.box[0][0] );
                    gradients->col( 1 ) /= ( mRecord.box[1][1] - mRecord.box[0][1] );
                }
            }

        private:
            ElementRecord mRecord;
            int mP;
            int mQ;
        };

        class DirectElementBasis : public ElementBasis
        {
        public:
            DirectElementBasis( const ThbEvaluator& evaluator, ElementKey key )
                : mEvaluator( evaluator ), mBox( evaluator.hierarchy().elementBox( key ) )
            {
                // Truncated functions are positive inside every element they touch,
                // so the element centre identifies the supported set.
                const auto centre = mEvaluator.eval( physical( 0.5, 0.5 ) );
                for( size_t i = 0; i < centre.ids.size(); ++i )
                    if( centre.values[i] > 0.0 ) mFunctions.push_back( centre.ids[i] );
            }

            const std::vector<int>& functions() const override { return mFunctions; }

            void eval( double tx, double ty, Eigen::VectorXd& values, Eigen::MatrixXd* gradients ) const override
            {
                const auto r = mEvaluator.eval( physical( tx, ty ), gradients != nullptr );
                values = Eigen::VectorXd::Zero( static_cast<Eigen::Index>( mFunctions.size() ) );
                if( gradients ) *gradients = Eigen::MatrixXd::Zero( static_cast<Eigen::Index>( mFunctions.size() ), 2 );
                for( size_t i = 0; i < r.ids.size(); ++i )
                {
                    const auto it = std::lower_bound( mFunctions.begin(), mFunctions.end(), r.ids[i] );
                    if( it == mFunctions.end() or *it != r.ids[i] ) continue;
                    const auto k = it - mFunctions.begin();
                    values( k ) = r.values[i];
                    if( gradients ) gradients->row( k ) = r.gradients.row( static_cast<Eigen::Index>( i ) );
                }
            }

        private:
            Point physical( double tx, double ty ) const
            {
                return { mBox[0][0] + tx * ( mBox[1][0] - mBox[0][0] ), mBox[0][1] + ty * ( mBox[1][1] - mBox[0][1] ) };
            }

            const ThbEvaluator& mEvaluator;
            Box mBox;
            std::vector<int> mFunctions;
        };

        // Batched triplet accumulation; duplicates are summed in insertion order.
        class SparseAccumulator
        {
        public:
            explicit SparseAccumulator( int n ) : mMatrix( n, n ) {}

            void add( const std::vector<int>& ids, const Eigen::MatrixXd& local )
            {
                for( size_t j = 0; j < ids.size(); ++j )
                    for( size_t i = 0; i < ids.size(); ++i )
                        mTriplets.emplace_back( ids[i], ids[j], local( static_cast<Eigen::Index>( i ), static_cast<Eigen::Index>( j ) ) );
                if( mTriplets.size() > kBatch ) flush();
            }

            Eigen::SparseMatrix<double> finish()
            {
                flush();
                return std::move( mMatrix );
            }

        private:
            static constexpr size_t kBatch = 4'000'000;

            void flush()
            {
                if( mTriplets.empty() ) return;
                Eigen::SparseMatrix<double> part( mMatrix.rows(), mMatrix.cols() );
                part.setFromTriplets( mTriplets.begin(), mTriplets.end() );
                mMatrix += part;
                mTriplets.clear();
            }

            Eigen::SparseMatrix<double> mMatrix;
            std::vector<Eigen::Triplet<double>> mTriplets;
        };

        Box element_box( const HierarchicalSpace& h, ElementKey key ) { return h.elementBox( key ); }

        double source( const ExactSolution& u, double x, double y ) { return -u.laplacian( x, y ); }

        // Faces of an element lying on the boundary of the unit square.
        std::vector<Edge> boundary_faces( const Box& box )
        {
            std::vector<Edge> out;
            if( box[0][0] == 0.0 ) out.push_back( Edge::Left );
            if( box[1][0] == 1.0 ) out.push_back( Edge::Right );
            if( box[0][1] == 0.0 ) out.push_back( Edge::Bottom );
            if( box[1][1] == 1.0 ) out.push_back( Edge::Top );
            return out;
        }

        struct FacePoint
        {
            double tx;
            double ty;
            double x;
            double y;
            double weight;  // includes the face length
            std::array<double, 2> normal;
        };

        std::vector<FacePoint> face_points( const Box& box, Edge edge, const QuadratureRule& rule )
        {
            const double hx = box[1][0] - box[0][0];
            const double hy = box[1][1] - box[0][1];
            std::vector<FacePoint> out;
            for( int k = 0; k < rule.size(); ++k )
            {
                const double t = rule.points[k];
                FacePoint fp{};
                switch( edge )
                {
                    case Edge::Left: fp = { 0.0, t, 0.0, 0.0, rule.weights[k] * hy, { -1.0, 0.0 } }; break;
                    case Edge::Right: fp = { 1.0, t, 0.0, 0.0, rule.weights[k] * hy, { 1.0, 0.0 } }; break;
                    case Edge::Bottom: fp = { t, 0.0, 0.0, 0.0, rule.weights[k] * hx, { 0.0, -1.0 } }; break;
                    case Edge::Top: fp = { t, 1.0, 0.0, 0.0, rule.weights[k] * hx, { 0.0, 1.0 } }; break;
                }
                fp.x = box[0][0] + fp.tx * hx;
                fp.y = box[0][1] + fp.ty * hy;
                out.push_back( fp );
            }
            return out;
        }

        QuadratureRule load_rule( const HierarchicalSpace& h, const AssemblyOptions& options )
        {
            return options.loadRule ? *options.loadRule : gauss_rule( default_points( h, 2 ) );
        }

        QuadratureRule stiffness_rule( const HierarchicalSpace& h, const AssemblyOptions& options )
        {
            return options.stiffnessRule ? *options.stiffnessRule : gauss_rule( default_points( h, 1 ) );
        }
    }

    std::unique_ptr<ElementBasis> BezierPath::element( const ElementKey key ) const
    {
        const auto& base = hierarchy().base();
        return std::make_unique<BezierElementBasis>( mExtraction.element( key ), base.degree( 0 ), base.degree( 1 ) );
    }

    std::unique_ptr<ElementBasis> DirectThbPath::element( const ElementKey key ) const
    {
        if( hierarchy().elementState( key ) != ElementState::Active ) throw ArgumentError( "element is not active" );
        return std::make_unique<DirectElementBasis>( mEvaluator, key );
    }

    Eigen::MatrixXd bezier_element_stiffness( const int p, const int q, const QuadratureRule& rule, const double hx,
                                              const double hy )
    {
        if( not( hx > 0.0 and hy > 0.0 ) ) throw ArgumentError( "element sizes must be positive" );
        const int n = ( p + 1 ) * ( q + 1 );
        Eigen::MatrixXd k = Eigen::MatrixXd::Zero( n, n );
        for( int j = 0; j < rule.size(); ++j )
            for( int i = 0; i < rule.size(); ++i )
            {
                const auto b = bernstein_tensor( p, q, rule.points[i], rule.points[j], true );
                Eigen::MatrixXd g = b.refGradients;
                g.col( 0 ) /= hx;
                g.col( 1 ) /= hy;
                k.noalias() += ( rule.weights[i] * rule.weights[j] * hx * hy ) * ( g * g.transpose() );
            }
        // Exact symmetry.
        return 0.5 * ( k + k.transpose() );
    }

    Eigen::VectorXd bezier_element_load( const int p, const int q, const QuadratureRule& rule, const Box& box,
                                         const std::function<double( double, double )>& f )
    {
        const double hx = box[1][0] - box[0][0];
        const double hy = box[1][1] - box[0][1];
        Eigen::VectorXd out = Eigen::VectorXd::Zero( ( p + 1 ) * ( q + 1 ) );
        for( int j = 0; j < rule.size(); ++j )
            for( int i = 0; i < rule.size(); ++i )
            {
                const double x = box[0][0] + rule.points[i] * hx;
                const double y = box[0][1] + rule.points[j] * hy;
                const auto b = bernstein_tensor( p, q, rule.points[i], rule.points[j], false );
                out += ( rule.weights[i] * rule.weights[j] * hx * hy * f( x, y ) ) * b.values;
            }
        return out;
    }

    Eigen::MatrixXd element_stiffness( const ElementRecord& rec, const Eigen::MatrixXd& k_bezier )
    {
        if( rec.C.cols() != k_bezier.rows() or k_bezier.rows() != k_bezier.cols() )
            throw ArgumentError( "element operator and Bezier stiffness sizes disagree" );
        Eigen::MatrixXd k = rec.C * k_bezier * rec.C.transpose();
        return 0.5 * ( k + k.transpose() );
    }

    LinearSystem assemble( const PoissonCase& problem, const MultilevelExtraction& extraction,
                           const AssemblyOptions& options )
    {
        const auto& h = problem.hierarchy;
        require_2d( h );
        const int p = h.base().degree( 0 );
        const int q = h.base().degree( 1 );
        const auto kRule = stiffness_rule( h, options );
        const auto fRule = load_rule( h, options );

        // Reference stiffness per element aspect ratio; dyadic levels of a uniform
        // base share a single one.
        std::map<std::pair<double, double>, Eigen::MatrixXd> reference;
        const auto reference_for = [&]( const Box& box ) -> const Eigen::MatrixXd& {
            const double hx = box[1][0] - box[0][0];
            const double hy = box[1][1] - box[0][1];
            const std::pair<double, double> key{ hx / hy, 0.0 };
            auto it = reference.find( key );
            if( it == reference.end() )
                it = reference.emplace( key, bezier_element_stiffness( p, q, kRule, hx / hy, 1.0 ) ).first;
            return it->second;
        };

        const int n = h.numActiveFunctions();
        SparseAccumulator k( n );
        LinearSystem sys;
        sys.load = Eigen::VectorXd::Zero( n );
        const auto f = [&]( double x, double y ) { return source( problem.exact, x, y ); };
        for( const auto& key : h.activeElements() )
        {
            const auto rec = extraction.element( key );
            k.add( rec.functions, element_stiffness( rec, reference_for( rec.box ) ) );
            const Eigen::VectorXd fe = rec.C * bezier_element_load( p, q, fRule, rec.box, f );
            for( size_t a = 0; a < rec.functions.size(); ++a ) sys.load( rec.functions[a] ) += fe( static_cast<Eigen::Index>( a ) );
        }
        sys.stiffness = k.finish();
        return sys;
    }

    LinearSystem assemble_direct( const PoissonCase& problem, const ThbEvaluator& evaluator,
                                  const AssemblyOptions& options )
    {
        const auto& h = problem.hierarchy;
        require_2d( h );
        const auto kRule = stiffness_rule( h, options );
        const auto fRule = load_rule( h, options );
        const DirectThbPath path( evaluator );

        const int n = h.numActiveFunctions();
        SparseAccumulator k( n );
        LinearSystem sys;
        sys.load = Eigen::VectorXd::Zero( n );
        Eigen::VectorXd values;
        Eigen::MatrixXd grads;
        for( const auto& key : h.activeElements() )
        {
            const auto basis = path.element( key );
            const auto& ids = basis->functions();
            const auto box = element_box( h, key );
            const double hx = box[1][0] - box[0][0];
            const double hy = box[1][1] - box[0][1];
            const auto m = static_cast<Eigen::Index>( ids.size() );

            Eigen::MatrixXd ke = Eigen::MatrixXd::Zero( m, m );
            for( int j = 0; j < kRule.size(); ++j )
                for( int i = 0; i < kRule.size(); ++i )
                {
                    basis->eval( kRule.points[i], kRule.points[j], values, &grads );
                    ke.noalias() += ( kRule.weights[i] * kRule.weights[j] * hx * hy ) * ( grads * grads.transpose() );
                }
            k.add( ids, 0.5 * ( ke + ke.transpose() ) );

            for( int j = 0; j < fRule.size(); ++j )
                for( int i = 0; i < fRule.size(); ++i )
                {
                    basis->eval( fRule.points[i], fRule.points[j], values, nullptr );
                    const double x = box[0][0] + fRule.points[i] * hx;
                    const double y = box[0][1] + fRule.points[j] * hy;
                    const double w = fRule.weights[i] * fRule.weights[j] * hx * hy * source( problem.exact, x, y );
                    for( Eigen::Index a = 0; a < m; ++a ) sys.load( ids[a] ) += w * values( a );
                }
        }
        sys.stiffness = k.finish();
        return sys;
    }

    LinearSystem apply_bcs( LinearSystem system, const PoissonCase& problem, const BasisPath& path,
                            const AssemblyOptions& options )
    {
        const auto& h = problem.hierarchy;
        require_2d( h );
        if( not problem.boundary.hasDirichlet() )
            throw ArgumentError( "at least one edge must carry a Dirichlet condition" );
        const auto rule = load_rule( h, options );
        constexpr double kTraceTol = 1e-14;

        std::map<int, int> local;  // function id -> row of the boundary projection
        std::vector<Eigen::Triplet<double>> massTriplets;
        std::vector<std::pair<int, double>> rhs;
        Eigen::VectorXd values;

        struct FaceEval
        {
            std::vector<int> ids;
            std::vector<Eigen::VectorXd> values;
            std::vector<FacePoint> points;
        };
        std::vector<FaceEval> dirichletFaces;

        for( const auto& key : h.activeElements() )
        {
            const auto box = element_box( h, key );
            const auto faces = boundary_faces( box );
            if( faces.empty() ) continue;
            const auto basis = path.element( key );
            for( const Edge edge : faces )
            {
                FaceEval fe{ basis->functions(), {}, face_points( box, edge, rule ) };
                for( const auto& fp : fe.points )
                {
                    basis->eval( fp.tx, fp.ty, values, nullptr );
                    fe.values.push_back( values );
                }
                if( problem.boundary[edge] == BoundaryKind::Neumann )
                {
                    for( size_t k = 0; k < fe.points.size(); ++k )
                    {
                        const auto& fp = fe.points[k];
                        const auto g = problem.exact.gradient( fp.x, fp.y );
                        const double flux = g[0] * fp.normal[0] + g[1] * fp.normal[1];
                        for( size_t a = 0; a < fe.ids.size(); ++a )
                            system.load( fe.ids[a] ) += fp.weight * flux * fe.values[k]( static_cast<Eigen::Index>( a ) );
                    }
                    continue;
                }
                for( size_t a = 0; a < fe.ids.size(); ++a )
                    for( const auto& v : fe.values )
                        if( std::abs( v( static_cast<Eigen::Index>( a ) ) ) > kTraceTol )
                        {
                            local.emplace( fe.ids[a], 0 );
                            break;
                        }
                dirichletFaces.push_back( std::move( fe ) );
            }
        }

        int row = 0;
        for( auto& [id, r] : local ) r = row++;
        const int nb = row;
        Eigen::VectorXd b = Eigen::VectorXd::Zero( nb );
        for( const auto& fe : dirichletFaces )
        {
            std::vector<int> rows( fe.ids.size(), -1 );
            for( size_t a = 0; a < fe.ids.size(); ++a )
                if( auto it = local.find( fe.ids[a] ); it != local.end() ) rows[a] = it->second;
            const auto m = static_cast<Eigen::Index>( fe.ids.size() );
            Eigen::MatrixXd mass = Eigen::MatrixXd::Zero( m, m );
            Eigen::VectorXd load = Eigen::VectorXd::Zero( m );
            for( size_t k = 0; k < fe.points.size(); ++k )
            {
                const auto& fp = fe.points[k];
                mass.noalias() += fp.weight * fe.values[k] * fe.values[k].transpose();
                load += ( fp.weight * problem.exact.value( fp.x, fp.y ) ) * fe.values[k];
            }
            for( Eigen::Index j = 0; j < m; ++j )
            {
                if( rows[j] < 0 ) continue;
                b( rows[j] ) += load( j );
                for( Eigen::Index i = 0; i < m; ++i )
                    if( rows[i] >= 0 ) massTriplets.emplace_back( rows[i], rows[j], mass( i, j ) );
            }
        }

        Eigen::SparseMatrix<double> mb( nb, nb );
        mb.setFromTriplets( massTriplets.begin(), massTriplets.end() );
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt( mb );
        if( ldlt.info() != Eigen::Success ) throw NumericalError( "singular boundary mass matrix" );
        const Eigen::VectorXd g = ldlt.solve( b );
        if( ldlt.info() != Eigen::Success or not g.allFinite() ) throw NumericalError( "boundary projection failed" );

        system.dirichlet.clear();
        for( const auto& [id, r] : local ) system.dirichlet.emplace_back( id, g( r ) );
        return system;
    }

    Eigen::VectorXd solve( const LinearSystem& system )
    {
        const auto n = system.stiffness.rows();
        if( system.stiffness.cols() != n or system.load.size() != n ) throw ArgumentError( "inconsistent linear system" );

        Eigen::VectorXd u = Eigen::VectorXd::Zero( n );
        std::vector<int> freeIndex( n, 0 );
        for( const auto& [id, value] : system.dirichlet )
        {
            freeIndex[id] = -1;
            u( id ) = value;
        }
        int nf = 0;
        for( auto& f : freeIndex )
            if( f >= 0 ) f = nf++;
        if( nf == 0 ) return u;

        Eigen::VectorXd rhs( nf );
        for( Eigen::Index i = 0; i < n; ++i )
            if( freeIndex[i] >= 0 ) rhs( freeIndex[i] ) = system.load( i );

        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve( system.stiffness.nonZeros() );
        for( int c = 0; c < system.stiffness.outerSize(); ++c )
            for( Eigen::SparseMatrix<double>::InnerIterator it( system.stiffness, c ); it; ++it )
            {
                const int r = freeIndex[it.row()];
                if( r < 0 ) continue;
                if( freeIndex[c] >= 0 )
                    triplets.emplace_back( r, freeIndex[c], it.value() );
                else
                    rhs( r ) -= it.value() * u( c );
            }
        Eigen::SparseMatrix<double> kff( nf, nf );
        kff.setFromTriplets( triplets.begin(), triplets.end() );

        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt( kff );
        if( ldlt.info() != Eigen::Success ) throw NumericalError( "factorization of the reduced stiffness failed" );
        if( ( ldlt.vectorD().array() <= 0.0 ).any() )
            throw NumericalError( "reduced stiffness is not positive definite" );
        const Eigen::VectorXd uf = ldlt.solve( rhs );
        if( ldlt.info() != Eigen::Success or not uf.allFinite() ) throw NumericalError( "sparse solve failed" );

        const double scale = std::max( rhs.norm(), 1e-300 );
        const double residual = ( kff * uf - rhs ).norm() / scale;
        if( rhs.norm() > 0.0 and residual > 1e-10 )
            throw NumericalError( "solve residual " + std::to_string( residual ) + " exceeds 1e-10" );

        for( Eigen::Index i = 0; i < n; ++i )
            if( freeIndex[i] >= 0 ) u( i ) = uf( freeIndex[i] );
        return u;
    }

    double l2_error( const PoissonCase& problem, const BasisPath& path, const Eigen::VectorXd& coefficients,
                     const std::optional<QuadratureRule>& rule )
    {
        const auto& h = problem.hierarchy;
        require_2d( h );
        const auto r = rule ? *rule : gauss_rule( default_points( h, 3 ) );
        double sum = 0.0;
        Eigen::VectorXd values;
        for( const auto& key : h.activeElements() )
        {
            const auto basis = path.element( key );
            const auto& ids = basis->functions();
            const auto box = element_box( h, key );
            const double hx = box[1][0] - box[0][0];
            const double hy = box[1][1] - box[0][1];
            for( int j = 0; j < r.size(); ++j )
                for( int i = 0; i < r.size(); ++i )
                {
                    basis->eval( r.points[i], r.points[j], values, nullptr );
                    double uh = 0.0;
                    for( size_t a = 0; a < ids.size(); ++a ) uh += coefficients( ids[a] ) * values( static_cast<Eigen::Index>( a ) );
                    const double e = uh - problem.exact.value( box[0][0] + r.points[i] * hx, box[0][1] + r.points[j] * hy );
                    sum += r.weights[i] * r.weights[j] * hx * hy * e * e;
                }
        }
        return std::sqrt( sum );
    }

    double boundary_l2_error( const PoissonCase& problem, const BasisPath& path, const Eigen::VectorXd& coefficients )
    {
        const auto& h = problem.hierarchy;
        require_2d( h );
        const auto rule = gauss_rule( default_points( h, 3 ) );
        double sum = 0.0;
        Eigen::VectorXd values;
        for( const auto& key : h.activeElements() )
        {
            const auto box = element_box( h, key );
            const auto faces = boundary_faces( box );
            if( faces.empty() ) continue;
            const auto basis = path.element( key );
            const auto& ids = basis->functions();
            for( const Edge edge : faces )
            {
                if( problem.boundary[edge] != BoundaryKind::Dirichlet ) continue;
                for( const auto& fp : face_points( box, edge, rule ) )
                {
                    basis->eval( fp.tx, fp.ty, values, nullptr );
                    double uh = 0.0;
                    for( size_t a = 0; a < ids.size(); ++a ) uh += coefficients( ids[a] ) * values( static_cast<Eigen::Index>( a ) );
                    const double e = uh - problem.exact.value( fp.x, fp.y );
                    sum += fp.weight * e * e;
                }
            }
        }
        return std::sqrt( sum );
    }

    std::vector<double> gradient_indicator( const BasisPath& path, const Eigen::VectorXd& coefficients )
    {
        const auto& h = path.hierarchy();
        require_2d( h );
        const auto rule = gauss_rule( default_points( h, 1 ) );
        std::vector<double> out;
        out.reserve( h.activeElements().size() );
        Eigen::VectorXd values;
        Eigen::MatrixXd grads;
        for( const auto& key : h.activeElements() )
        {
            const auto basis = path.element( key );
            const auto& ids = basis->functions();
            const auto box = element_box( h, key );
            const double area = ( box[1][0] - box[0][0] ) * ( box[1][1] - box[0][1] );
            Eigen::VectorXd c( static_cast<Eigen::Index>( ids.size() ) );
            for( size_t a = 0; a < ids.size(); ++a ) c( static_cast<Eigen::Index>( a ) ) = coefficients( ids[a] );
            double sum = 0.0;
            for( int j = 0; j < rule.size(); ++j )
                for( int i = 0; i < rule.size(); ++i )
                {
                    basis->eval( rule.points[i], rule.points[j], values, &grads );
                    sum += rule.weights[i] * rule.weights[j] * area * ( grads.transpose() * c ).squaredNorm();
                }
            out.push_back( std::sqrt( sum ) );
        }
        return out;
    }

    std::vector<ElementKey> mark_top_fraction( const HierarchicalSpace& h, const std::vector<double>& indicator,
                                               const double theta )
    {
        const auto& elements = h.activeElements();
        if( indicator.size() != elements.size() ) throw ArgumentError( "indicator size does not match the active elements" );
        if( not( theta > 0.0 and theta <= 1.0 ) ) throw ArgumentError( "marking fraction must lie in (0, 1]" );
        std::vector<size_t> order( elements.size() );
        std::iota( order.begin(), order.end(), 0 );
        std::stable_sort( order.begin(), order.end(), [&]( size_t a, size_t b ) { return indicator[a] > indicator[b]; } );
        const auto count = static_cast<size_t>( std::ceil( theta * static_cast<double>( elements.size() ) - 1e-12 ) );
        std::vector<ElementKey> out;
        for( size_t i = 0; i < std::min( count, order.size() ); ++i ) out.push_back( elements[order[i]] );
        std::sort( out.begin(), out.end() );
        return out;
    }

    double relative_frobenius( const Eigen::SparseMatrix<double>& a, const Eigen::SparseMatrix<double>& b )
    {
        if( a.rows() != b.rows() or a.cols() != b.cols() ) throw ArgumentError( "matrix shapes differ" );
        const Eigen::SparseMatrix<double> diff = a - b;
        return diff.norm() / b.norm();
    }

    PoissonSolution solve_poisson( const PoissonCase& problem, const MultilevelExtraction& extraction,
                                   const AssemblyOptions& options )
    {
        const BezierPath path( extraction );
        PoissonSolution out;
        out.system = apply_bcs( assemble( problem, extraction, options ), problem, path, options );
        out.coefficients = solve( out.system );
        out.l2Error = l2_error( problem, path, out.coefficients );
        return out;
    }

    PoissonSolution solve_poisson( const PoissonCase& problem, const AssemblyOptions& options )
    {
        const MultilevelExtraction extraction( problem.hierarchy );
        return solve_poisson( problem, extraction, options );
    }

    PoissonSolution solve_poisson_direct( const PoissonCase& problem, const ThbEvaluator& evaluator,
                                          const AssemblyOptions& options )
    {
        const DirectThbPath path( evaluator );
        PoissonSolution out;
        out.system = apply_bcs( assemble_direct( problem, evaluator, options ), problem, path, options );
        out.coefficients = solve( out.system );
        out.l2Error = l2_error( problem, path, out.coefficients );
        return out;
    }
}
