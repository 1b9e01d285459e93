#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "spingp/errors.hpp"
#include "spingp/matexp.hpp"

namespace spingp {

enum class KernelType { Matern12, Matern32, Matern52, EQApprox, Sum };

// A covariance kernel expression. Leaves carry a magnitude (variance) and a
// lengthscale in time units; EQApprox additionally carries the order of its
// spectral approximation. Sum nodes hold two or more children.
struct KernelSpec {
    KernelType type = KernelType::Matern32;
    double var = 1.0;
    double len = 1.0;
    int order = 10;
    std::vector<KernelSpec> children;

    static KernelSpec matern12(double var = 1.0, double len = 1.0) {
        return {KernelType::Matern12, var, len, 0, {}};
    }
    static KernelSpec matern32(double var = 1.0, double len = 1.0) {
        return {KernelType::Matern32, var, len, 0, {}};
    }
    static KernelSpec matern52(double var = 1.0, double len = 1.0) {
        return {KernelType::Matern52, var, len, 0, {}};
    }
    static KernelSpec eq(double var = 1.0, double len = 1.0, int order = 10) {
        return {KernelType::EQApprox, var, len, order, {}};
    }
    static KernelSpec sum(std::vector<KernelSpec> parts) {
        if (parts.size() < 2)
            throw std::invalid_argument("sum kernel needs at least two children");
        KernelSpec s;
        s.type = KernelType::Sum;
        s.children = std::move(parts);
        return s;
    }
};

using HyperparameterSet = std::vector<double>;

namespace detail {

inline void collect_leaves(const KernelSpec& spec, std::vector<const KernelSpec*>& out) {
    if (spec.type == KernelType::Sum) {
        if (spec.children.size() < 2)
            throw std::invalid_argument("sum kernel needs at least two children");
        for (const auto& c : spec.children) collect_leaves(c, out);
    } else {
        out.push_back(&spec);
    }
}

inline const char* type_name(KernelType t) {
    switch (t) {
        case KernelType::Matern12: return "matern12";
        case KernelType::Matern32: return "matern32";
        case KernelType::Matern52: return "matern52";
        case KernelType::EQApprox: return "eq";
        case KernelType::Sum: return "sum";
    }
    return "?";
}

}  // namespace detail

inline std::vector<const KernelSpec*> kernel_leaves(const KernelSpec& spec) {
    std::vector<const KernelSpec*> leaves;
    detail::collect_leaves(spec, leaves);
    return leaves;
}

// Two parameters per leaf, traversal order, (var, len) within a leaf.
inline std::size_t param_count(const KernelSpec& spec) {
    return 2 * kernel_leaves(spec).size();
}

inline HyperparameterSet default_theta(const KernelSpec& spec) {
    HyperparameterSet theta;
    for (const KernelSpec* leaf : kernel_leaves(spec)) {
        theta.push_back(leaf->var);
        theta.push_back(leaf->len);
    }
    return theta;
}

inline std::vector<std::string> hyperparameter_names(const KernelSpec& spec) {
    std::vector<std::string> names;
    const auto leaves = kernel_leaves(spec);
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        const std::string base = "k" + std::to_string(i) + "." + detail::type_name(leaves[i]->type);
        names.push_back(base + ".var");
        names.push_back(base + ".len");
    }
    return names;
}

// One bound hyperparameter of a state-space model together with the
// derivatives of F and Pinf with respect to it. H never depends on theta.
struct ThetaBinding {
    std::string name;
    double value = 0.0;
    Eigen::MatrixXd dF;
    Eigen::MatrixXd dPinf;
    bool f_constant = false;  // dF is identically zero (magnitude parameters)
};

// Continuous-time LTI form dz = F z dt + noise, y = H z, with stationary
// state covariance Pinf used as the prior P0.
struct StateSpaceModel {
    Eigen::MatrixXd F;
    Eigen::RowVectorXd H;
    Eigen::MatrixXd Pinf;
    std::vector<ThetaBinding> theta;

    Eigen::Index dim() const { return F.rows(); }
};

namespace detail {

inline void check_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument(std::string("hyperparameter must be positive: ") + what);
}

inline StateSpaceModel matern12_ss(double var, double len) {
    StateSpaceModel m;
    m.F = Eigen::MatrixXd::Constant(1, 1, -1.0 / len);
    m.H = Eigen::RowVectorXd::Ones(1);
    m.Pinf = Eigen::MatrixXd::Constant(1, 1, var);
    ThetaBinding dv{"var", var, Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Constant(1, 1, 1.0), true};
    ThetaBinding dl{"len", len, Eigen::MatrixXd::Constant(1, 1, 1.0 / (len * len)),
                    Eigen::MatrixXd::Zero(1, 1), false};
    m.theta = {std::move(dv), std::move(dl)};
    return m;
}

inline StateSpaceModel matern32_ss(double var, double len) {
    const double lam = std::numbers::sqrt3 / len;
    StateSpaceModel m;
    m.F.setZero(2, 2);
    m.F(0, 1) = 1.0;
    m.F(1, 0) = -lam * lam;
    m.F(1, 1) = -2.0 * lam;
    m.H.setZero(2);
    m.H(0) = 1.0;
    m.Pinf.setZero(2, 2);
    m.Pinf(0, 0) = var;
    m.Pinf(1, 1) = var * lam * lam;

    ThetaBinding dv{"var", var, Eigen::MatrixXd::Zero(2, 2), m.Pinf / var, true};
    Eigen::MatrixXd dF = Eigen::MatrixXd::Zero(2, 2);
    dF(1, 0) = 2.0 * lam * lam / len;
    dF(1, 1) = 2.0 * lam / len;
    Eigen::MatrixXd dP = Eigen::MatrixXd::Zero(2, 2);
    dP(1, 1) = -2.0 * var * lam * lam / len;
    m.theta = {std::move(dv), ThetaBinding{"len", len, std::move(dF), std::move(dP), false}};
    return m;
}

inline StateSpaceModel matern52_ss(double var, double len) {
    const double lam = std::sqrt(5.0) / len;
    const double kap = lam * lam / 3.0;  // Var(f')/var
    StateSpaceModel m;
    m.F.setZero(3, 3);
    m.F(0, 1) = 1.0;
    m.F(1, 2) = 1.0;
    m.F(2, 0) = -lam * lam * lam;
    m.F(2, 1) = -3.0 * lam * lam;
    m.F(2, 2) = -3.0 * lam;
    m.H.setZero(3);
    m.H(0) = 1.0;
    m.Pinf.setZero(3, 3);
    m.Pinf(0, 0) = var;
    m.Pinf(1, 1) = var * kap;
    m.Pinf(2, 2) = var * lam * lam * lam * lam;
    m.Pinf(0, 2) = m.Pinf(2, 0) = -var * kap;

    ThetaBinding dv{"var", var, Eigen::MatrixXd::Zero(3, 3), m.Pinf / var, true};
    // last-row entries of the companion F scale as len^-(b-k)
    Eigen::MatrixXd dF = Eigen::MatrixXd::Zero(3, 3);
    for (int k = 0; k < 3; ++k) dF(2, k) = -(3.0 - k) / len * m.F(2, k);
    // Pinf entries scale as len^-(i+j)
    Eigen::MatrixXd dP = Eigen::MatrixXd::Zero(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) dP(i, j) = -(i + j) / len * m.Pinf(i, j);
    m.theta = {std::move(dv), ThetaBinding{"len", len, std::move(dF), std::move(dP), false}};
    return m;
}

// Roots of the truncated exponential series T_J(y) = sum_{k<=J} y^k / k!,
// computed from the companion matrix of the rescaled polynomial T_J(J*z)
// (better balanced coefficients) and polished with a few Newton steps.
inline std::vector<std::complex<double>> truncated_exp_roots(int j) {
    using C = std::complex<double>;
    // monic coefficients of T_J(J z) * J! / J^J: c_k = J! / (k! * J^(J-k))
    Eigen::VectorXd c(j);
    for (int k = 0; k < j; ++k) {
        double v = 1.0;
        for (int i = k + 1; i <= j; ++i) v *= static_cast<double>(i);  // J!/k!
        v /= std::pow(static_cast<double>(j), static_cast<double>(j - k));
        c(k) = v;
    }
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(j, j);
    comp.bottomLeftCorner(j - 1, j - 1).setIdentity();
    for (int k = 0; k < j; ++k) comp(k, j - 1) = -c(k);
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("eq kernel: companion eigensolver failed");

    std::vector<C> roots(static_cast<std::size_t>(j));
    for (int k = 0; k < j; ++k) {
        C y = es.eigenvalues()(k) * static_cast<double>(j);
        // Newton polish on T_J; T_J' = T_{J-1}
        for (int it = 0; it < 4; ++it) {
            C t = 1.0, tp = 0.0, term = 1.0;
            for (int i = 1; i <= j; ++i) {
                tp += term;  // running T_{i-1}
                term *= y / static_cast<double>(i);
                t += term;
            }
            if (std::abs(tp) == 0.0) break;
            y -= t / tp;
        }
        roots[static_cast<std::size_t>(k)] = y;
    }
    return roots;
}

}  // namespace detail

// Order-J Taylor-type spectral approximation of the exponentiated-quadratic
// kernel as a stable state-space model of dimension J. The spectral density
// sigma2*sqrt(2*pi)*len*exp(-len^2 w^2 / 2) is approximated by truncating the
// exponential in the denominator at J terms; the resulting even polynomial is
// factored into a stable spectral factor a(s) via root finding. The model is
// realized in modal coordinates: each conjugate root pair of a(s) becomes a
// normal 2x2 rotation block of F, which keeps expm(F dt) accurate at high
// orders where a companion form would not be. The emission row comes from the
// partial-fraction expansion of 1/a(s); Pinf solves the continuous Lyapunov
// equation and is normalized so the implied variance H*Pinf*H^T equals sigma2
// exactly. In these coordinates F = M / len with M lengthscale-free and Pinf
// lengthscale-free, so dF/dlen = -F/len and dPinf/dlen = 0 exactly.
inline StateSpaceModel eq_approx_ss(double sigma2, double lengthscale, int order) {
    detail::check_positive(sigma2, "eq var");
    detail::check_positive(lengthscale, "eq len");
    if (order < 2 || order % 2 != 0)
        throw std::invalid_argument("eq approximation order must be even and >= 2");
    if (order > 16)
        throw std::invalid_argument("eq approximation order above 16 is numerically unusable");

    using C = std::complex<double>;
    const int j = order;
    const auto yroots = detail::truncated_exp_roots(j);

    // stable spectral-factor roots at unit lengthscale: r^2 = -2 y, Re(r) < 0
    std::vector<C> roots;
    roots.reserve(yroots.size());
    for (C y : yroots) {
        C r = std::sqrt(-2.0 * y);
        if (r.real() > 0.0) r = -r;
        if (!(r.real() < 0.0))
            throw std::runtime_error("eq kernel: spectral factor root on the imaginary axis");
        roots.push_back(r);
    }
    // keep one root per conjugate pair, deterministic order
    std::vector<C> upper;
    for (C r : roots)
        if (r.imag() > 0.0) upper.push_back(r);
    if (2 * upper.size() != roots.size())
        throw std::runtime_error("eq kernel: roots did not split into conjugate pairs");
    std::sort(upper.begin(), upper.end(),
              [](C a, C b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });

    StateSpaceModel m;
    m.F.setZero(j, j);
    m.H.setZero(j);
    Eigen::VectorXd noise_gain = Eigen::VectorXd::Zero(j);
    for (std::size_t p = 0; p < upper.size(); ++p) {
        const C r = upper[p];
        // partial-fraction residue of 1/a(s) at r (unit lengthscale)
        C denom(1.0, 0.0);
        for (C other : roots)
            if (other != r) denom *= (r - other);
        if (std::abs(denom) == 0.0) throw std::runtime_error("eq kernel: repeated spectral root");
        const C res = 1.0 / denom;
        const Eigen::Index k = static_cast<Eigen::Index>(2 * p);
        m.F(k, k) = r.real() / lengthscale;
        m.F(k, k + 1) = r.imag() / lengthscale;
        m.F(k + 1, k) = -r.imag() / lengthscale;
        m.F(k + 1, k + 1) = r.real() / lengthscale;
        m.H(k) = 2.0 * res.real();
        m.H(k + 1) = 2.0 * res.imag();
        noise_gain(k) = 1.0;
    }

    // Pinf from the Lyapunov equation with unit noise gain, then scaled so
    // that the implied k(0) is exactly sigma2.
    Eigen::MatrixXd mm = m.F * lengthscale;
    Eigen::MatrixXd p1 = solve_continuous_lyapunov(mm, noise_gain * noise_gain.transpose());
    const double k0 = (m.H * p1 * m.H.transpose()).value();
    if (!(k0 > 0.0) || !std::isfinite(k0))
        throw std::runtime_error("eq kernel: Lyapunov solve produced a non-positive variance");
    m.Pinf = (sigma2 / k0) * p1;

    ThetaBinding dv{"var", sigma2, Eigen::MatrixXd::Zero(j, j), m.Pinf / sigma2, true};
    ThetaBinding dl{"len", lengthscale, -m.F / lengthscale, Eigen::MatrixXd::Zero(j, j), false};
    m.theta = {std::move(dv), std::move(dl)};
    return m;
}

// Converts a kernel expression to state-space form. Sums become the
// block-diagonal concatenation of their children (independent processes),
// with H the horizontal concatenation of the children's emission rows.
inline StateSpaceModel state_space_of(const KernelSpec& spec, const HyperparameterSet& theta) {
    const auto leaves = kernel_leaves(spec);
    if (theta.size() != 2 * leaves.size())
        throw std::invalid_argument("theta size does not match kernel parameter count");
    const auto names = hyperparameter_names(spec);

    std::vector<StateSpaceModel> parts;
    parts.reserve(leaves.size());
    Eigen::Index total = 0;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        const double var = theta[2 * i];
        const double len = theta[2 * i + 1];
        detail::check_positive(var, names[2 * i].c_str());
        detail::check_positive(len, names[2 * i + 1].c_str());
        StateSpaceModel part;
        switch (leaves[i]->type) {
            case KernelType::Matern12: part = detail::matern12_ss(var, len); break;
            case KernelType::Matern32: part = detail::matern32_ss(var, len); break;
            case KernelType::Matern52: part = detail::matern52_ss(var, len); break;
            case KernelType::EQApprox: part = eq_approx_ss(var, len, leaves[i]->order); break;
            default: throw std::invalid_argument("unknown kernel variant");
        }
        total += part.dim();
        parts.push_back(std::move(part));
    }
    if (parts.size() == 1) {
        parts[0].theta[0].name = names[0];
        parts[0].theta[1].name = names[1];
        return std::move(parts[0]);
    }

    StateSpaceModel m;
    m.F = Eigen::MatrixXd::Zero(total, total);
    m.H = Eigen::RowVectorXd::Zero(total);
    m.Pinf = Eigen::MatrixXd::Zero(total, total);
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const Eigen::Index d = parts[i].dim();
        m.F.block(off, off, d, d) = parts[i].F;
        m.H.segment(off, d) = parts[i].H;
        m.Pinf.block(off, off, d, d) = parts[i].Pinf;
        for (std::size_t p = 0; p < 2; ++p) {
            ThetaBinding tb;
            tb.name = names[2 * i + p];
            tb.value = parts[i].theta[p].value;
            tb.f_constant = parts[i].theta[p].f_constant;
            tb.dF = Eigen::MatrixXd::Zero(total, total);
            tb.dF.block(off, off, d, d) = parts[i].theta[p].dF;
            tb.dPinf = Eigen::MatrixXd::Zero(total, total);
            tb.dPinf.block(off, off, d, d) = parts[i].theta[p].dPinf;
            m.theta.push_back(std::move(tb));
        }
        off += d;
    }
    return m;
}

// Transition and process-noise covariance over one time gap,
// Phi = expm(F dt), Q = Pinf - Phi Pinf Phi^T, optionally with derivatives.
struct DiscreteStep {
    Eigen::MatrixXd Phi;
    Eigen::MatrixXd Q;
    std::vector<Eigen::MatrixXd> dPhi;  // per theta binding, empty unless requested
    std::vector<Eigen::MatrixXd> dQ;
};

inline DiscreteStep discretize(const StateSpaceModel& ssm, double dt) {
    const Eigen::Index b = ssm.dim();
    DiscreteStep st;
    if (dt < 0.0 || !std::isfinite(dt)) throw std::invalid_argument("dt must be >= 0");
    if (dt == 0.0) {
        st.Phi = Eigen::MatrixXd::Identity(b, b);
        st.Q = Eigen::MatrixXd::Zero(b, b);
        return st;
    }
    st.Phi = expm(ssm.F * dt);
    Eigen::MatrixXd q = ssm.Pinf - st.Phi * ssm.Pinf * st.Phi.transpose();
    st.Q = 0.5 * (q + q.transpose());
    return st;
}

namespace detail {

inline void append_step_grad(const StateSpaceModel& ssm, double dt, const ThetaBinding& tb,
                             DiscreteStep& st) {
    const Eigen::Index b = ssm.dim();
    if (dt == 0.0) {
        st.dPhi.emplace_back(Eigen::MatrixXd::Zero(b, b));
        st.dQ.emplace_back(Eigen::MatrixXd::Zero(b, b));
        return;
    }
    Eigen::MatrixXd dphi = tb.f_constant ? Eigen::MatrixXd::Zero(b, b)
                                         : expm_frechet(ssm.F, tb.dF, dt);
    Eigen::MatrixXd dq = tb.dPinf - dphi * ssm.Pinf * st.Phi.transpose() -
                         st.Phi * tb.dPinf * st.Phi.transpose() -
                         st.Phi * ssm.Pinf * dphi.transpose();
    st.dPhi.push_back(std::move(dphi));
    st.dQ.emplace_back(0.5 * (dq + dq.transpose()));
}

}  // namespace detail

// Derivatives for a single named hyperparameter.
inline DiscreteStep discretize_with_grad(const StateSpaceModel& ssm, double dt,
                                         std::size_t theta_index) {
    if (theta_index >= ssm.theta.size())
        throw std::invalid_argument("unknown hyperparameter index");
    DiscreteStep st = discretize(ssm, dt);
    detail::append_step_grad(ssm, dt, ssm.theta[theta_index], st);
    return st;
}

// Derivatives for every bound hyperparameter at once (shares Phi, Q).
inline DiscreteStep discretize_with_grad(const StateSpaceModel& ssm, double dt) {
    DiscreteStep st = discretize(ssm, dt);
    for (const auto& tb : ssm.theta) detail::append_step_grad(ssm, dt, tb, st);
    return st;
}

// Covariance implied by a state-space model, H expm(F |tau|) Pinf H^T.
inline double implied_covariance(const StateSpaceModel& ssm, double tau) {
    const double t = std::abs(tau);
    if (t == 0.0) return (ssm.H * ssm.Pinf * ssm.H.transpose()).value();
    return (ssm.H * expm(ssm.F * t) * ssm.Pinf * ssm.H.transpose()).value();
}

// Closed-form covariance for Matern variants and the state-space implied
// covariance for EQApprox. Symmetric in (t1, t2) by construction.
inline double kernel_eval(const KernelSpec& spec, const HyperparameterSet& theta, double t1,
                          double t2) {
    const auto leaves = kernel_leaves(spec);
    if (theta.size() != 2 * leaves.size())
        throw std::invalid_argument("theta size does not match kernel parameter count");
    const double tau = std::abs(t1 - t2);
    double acc = 0.0;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        const double var = theta[2 * i];
        const double len = theta[2 * i + 1];
        detail::check_positive(var, "var");
        detail::check_positive(len, "len");
        switch (leaves[i]->type) {
            case KernelType::Matern12: acc += var * std::exp(-tau / len); break;
            case KernelType::Matern32: {
                const double a = std::numbers::sqrt3 * tau / len;
                acc += var * (1.0 + a) * std::exp(-a);
                break;
            }
            case KernelType::Matern52: {
                const double a = std::sqrt(5.0) * tau / len;
                acc += var * (1.0 + a + a * a / 3.0) * std::exp(-a);
                break;
            }
            case KernelType::EQApprox:
                acc += implied_covariance(eq_approx_ss(var, len, leaves[i]->order), tau);
                break;
            default: throw std::invalid_argument("unknown kernel variant");
        }
    }
    return acc;
}

// Exact exponentiated-quadratic covariance, for approximation-error studies.
inline double eq_exact(double sigma2, double lengthscale, double tau) {
    const double r = tau / lengthscale;
    return sigma2 * std::exp(-0.5 * r * r);
}

}  // namespace spingp
