#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <stdexcept>

namespace spingp {

// expm(A) via scaling-and-squaring with Pade-13 (Eigen's MatrixFunctions).
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
    return a.exp();
}

// Frechet derivative of the matrix exponential along dF, over a step dt,
// read off the Van Loan augmented block exponential
//
//   expm( [F  dF] dt ) = [Phi  dPhi]
//        ( [0   F]    )   [0    Phi]
//
// Returns dPhi = d/dtheta expm(F*dt) for dF = dF/dtheta.
inline Eigen::MatrixXd expm_frechet(const Eigen::MatrixXd& f,
                                    const Eigen::MatrixXd& df,
                                    double dt) {
    const Eigen::Index b = f.rows();
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(2 * b, 2 * b);
    aug.topLeftCorner(b, b) = f;
    aug.topRightCorner(b, b) = df;
    aug.bottomRightCorner(b, b) = f;
    Eigen::MatrixXd e = (aug * dt).exp();
    return e.topRightCorner(b, b);
}

// Solves the continuous Lyapunov equation F*P + P*F^T + W = 0 for P by
// vectorization: (I (x) F + F (x) I) vec(P) = -vec(W). Fine for the small
// state dimensions used here (b <= 16).
inline Eigen::MatrixXd solve_continuous_lyapunov(const Eigen::MatrixXd& f,
                                                 const Eigen::MatrixXd& w) {
    const Eigen::Index b = f.rows();
    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(b * b, b * b);
    // vec(F P) = (I (x) F) vec(P); vec(P F^T) = (F (x) I) vec(P)
    for (Eigen::Index j = 0; j < b; ++j) big.block(j * b, j * b, b, b) += f;
    for (Eigen::Index j = 0; j < b; ++j)
        for (Eigen::Index i = 0; i < b; ++i)
            for (Eigen::Index k = 0; k < b; ++k) big(j * b + k, i * b + k) += f(j, i);
    Eigen::VectorXd rhs(b * b);
    for (Eigen::Index j = 0; j < b; ++j) rhs.segment(j * b, b) = -w.col(j);
    Eigen::VectorXd p = big.partialPivLu().solve(rhs);
    Eigen::MatrixXd out(b, b);
    for (Eigen::Index j = 0; j < b; ++j) out.col(j) = p.segment(j * b, b);
    return 0.5 * (out + out.transpose());
}

}  // namespace spingp
