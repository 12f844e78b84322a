#pragma once

#include "defeature/assembly.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace defeature {

struct SolverOptions {
    double tol = 1e-10;        // relative residual
    std::size_t max_iter = 0;  // 0 selects 20 times the system size
};

struct SolveReport {
    std::size_t iterations = 0;
    double residual = 0.0;  // true relative residual at exit
    bool converged = false;
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double true_residual(const CsrMatrix& A, const std::vector<double>& b, const std::vector<double>& x,
                            std::vector<double>& r) {
    A.multiply(x, r);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    return std::sqrt(dot(r, r));
}

} // namespace detail

/// Jacobi-preconditioned conjugate gradients. `x` holds the initial guess on entry.
inline SolveReport solve_spd(const CsrMatrix& A, const std::vector<double>& b, std::vector<double>& x,
                             const SolverOptions& opt = {}) {
    const std::size_t n = A.n;
    SolveReport rep;
    x.resize(n, 0.0);
    const double bnorm = std::sqrt(detail::dot(b, b));
    if (n == 0 || bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        rep.converged = true;
        return rep;
    }
    std::vector<double> dinv = A.diagonal();
    for (double& d : dinv) {
        if (!(d > 0.0)) throw Error(ErrorCode::SingularSystem, "non-positive diagonal entry");
        d = 1.0 / d;
    }
    const std::size_t max_iter = opt.max_iter ? opt.max_iter : 20 * n;
    const double target = opt.tol * bnorm;

    std::vector<double> r(n), z(n), p(n), q(n);
    double rnorm = detail::true_residual(A, b, x, r);
    // restarts guard against drift between the recursive and the true residual
    for (int restart = 0; restart < 4 && rnorm > target && rep.iterations < max_iter; ++restart) {
        for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
        p = z;
        double rz = detail::dot(r, z);
        while (rep.iterations < max_iter) {
            A.multiply(p, q);
            const double pq = detail::dot(p, q);
            if (!(pq > 0.0)) throw Error(ErrorCode::SingularSystem, "matrix is not positive definite");
            const double alpha = rz / pq;
            for (std::size_t i = 0; i < n; ++i) {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            ++rep.iterations;
            if (std::sqrt(detail::dot(r, r)) <= target) break;
            for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
            const double rz_new = detail::dot(r, z);
            const double beta = rz_new / rz;
            rz = rz_new;
            for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        }
        rnorm = detail::true_residual(A, b, x, r);
    }
    rep.residual = rnorm / bnorm;
    rep.converged = rnorm <= target;
    if (!rep.converged)
        throw Error(ErrorCode::NotConverged, "CG stopped after " + std::to_string(rep.iterations) +
                                                 " iterations at relative residual " + std::to_string(rep.residual));
    return rep;
}

struct SolveRequest {
    std::shared_ptr<const Mesh> mesh;
    const MaterialField* material = nullptr;
    BoundaryConditions bc;
    std::optional<std::vector<double>> load;           // replaces the load built from `bc`
    std::optional<std::vector<double>> initial_guess;  // full-length nodal values
    std::string label;
};

/// Assembles, lifts and solves; returns the full nodal field.
inline PotentialField solve_potential(const SolveRequest& req, const SolverOptions& opt = {},
                                      SolveReport* report = nullptr) {
    const Mesh& m = *req.mesh;
    const CsrMatrix K = assemble_stiffness(m, *req.material);
    const LinearSystem sys = apply_dirichlet_lifting(K, req.bc, m, req.load);
    std::vector<double> x = req.initial_guess ? sys.restrict_to_free(*req.initial_guess)
                                              : std::vector<double>(sys.free_nodes.size(), 0.0);
    const SolveReport rep = solve_spd(sys.A, sys.rhs, x, opt);
    if (report) *report = rep;
    return PotentialField{req.mesh, sys.expand(x), req.label};
}

} // namespace defeature
