/**
 * @file polynomial.hpp
 * @brief Least-squares polynomial model of the motion-error contribution.
 *
 * The model is a function of the normalised path parameter t in [0, 1]
 * (n evenly spaced values, 0 at the first sample, 1 at the last). Fitting is
 * carried out in the shifted Legendre basis P_k(2t - 1), which stays well
 * conditioned at degree 20 where monomial normal equations do not; monomial
 * coefficients are available for export only.
 */
#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "volerr/errors.hpp"
#include "volerr/kinematics.hpp"

namespace volerr {

inline constexpr int kDefaultMotionDegree = 20;

/// t_k = k / (n - 1), k = 0..n-1.
inline std::vector<double> normalized_path_parameter(std::size_t n) {
    std::vector<double> t(n, 0.0);
    if (n < 2) return t;
    const double denom = static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k) t[k] = static_cast<double>(k) / denom;
    return t;
}

/// Shifted Legendre polynomials P_0..P_degree evaluated at t.
inline void shifted_legendre(double t, int degree, double* out) {
    const double x = 2.0 * t - 1.0;
    out[0] = 1.0;
    if (degree >= 1) out[1] = x;
    for (int k = 1; k < degree; ++k) {
        out[k + 1] = ((2.0 * k + 1.0) * x * out[k] - k * out[k - 1]) / (k + 1.0);
    }
}

/// Three polynomials P_x, P_y, P_z of a common degree over t in [0, 1].
struct MotionPolynomialModel {
    int degree = kDefaultMotionDegree;
    std::array<std::vector<double>, 3> legendre;  ///< shifted-Legendre coefficients, mm

    static MotionPolynomialModel zero(int degree = kDefaultMotionDegree) {
        MotionPolynomialModel m;
        m.degree = degree;
        for (auto& c : m.legendre) c.assign(static_cast<std::size_t>(degree + 1), 0.0);
        return m;
    }

    void validate() const {
        if (degree < 0) throw DataError("motion polynomial: negative degree");
        for (const auto& c : legendre) {
            if (c.size() != static_cast<std::size_t>(degree + 1)) {
                throw DataError("motion polynomial: coefficient count does not match the degree");
            }
            for (double v : c)
                if (!std::isfinite(v)) throw DataError("motion polynomial: non-finite coefficient");
        }
    }

    Vec3 evaluate(double t) const {
        std::vector<double> basis(static_cast<std::size_t>(degree + 1));
        shifted_legendre(t, degree, basis.data());
        Vec3 out = Vec3::Zero();
        for (int axis = 0; axis < 3; ++axis) {
            double acc = 0.0;
            for (int k = degree; k >= 0; --k) acc += legendre[static_cast<std::size_t>(axis)][static_cast<std::size_t>(k)] * basis[static_cast<std::size_t>(k)];
            out(axis) = acc;
        }
        return out;
    }

    /// Power-basis coefficients c_0..c_degree of each polynomial in t.
    std::array<std::vector<double>, 3> monomial() const {
        const auto d = static_cast<std::size_t>(degree);
        // rows: shifted Legendre polynomials expanded in powers of t
        std::vector<std::vector<long double>> p(d + 1, std::vector<long double>(d + 1, 0.0L));
        p[0][0] = 1.0L;
        if (d >= 1) {
            p[1][0] = -1.0L;
            p[1][1] = 2.0L;
        }
        for (std::size_t k = 1; k < d; ++k) {
            const long double a = (2.0L * k + 1.0L) / (k + 1.0L);
            const long double b = static_cast<long double>(k) / (k + 1.0L);
            for (std::size_t j = 0; j <= d; ++j) {
                long double v = -a * p[k][j] - b * p[k - 1][j];
                if (j > 0) v += 2.0L * a * p[k][j - 1];
                p[k + 1][j] = v;
            }
        }
        std::array<std::vector<double>, 3> out;
        for (std::size_t axis = 0; axis < 3; ++axis) {
            std::vector<long double> acc(d + 1, 0.0L);
            for (std::size_t k = 0; k <= d; ++k)
                for (std::size_t j = 0; j <= d; ++j) acc[j] += static_cast<long double>(legendre[axis][k]) * p[k][j];
            out[axis].assign(acc.begin(), acc.end());
        }
        return out;
    }
};

struct PolynomialFitOptions {
    int degree = kDefaultMotionDegree;
    bool robust = false;          ///< iteratively reweighted fit (Tukey bisquare) to downweight spikes
    int robust_iterations = 10;
    double max_condition = 1e10;  ///< on the Legendre design matrix
};

namespace poly_detail {

inline Eigen::MatrixXd design_matrix(std::size_t n, int degree) {
    const auto t = normalized_path_parameter(n);
    Eigen::MatrixXd v(static_cast<Eigen::Index>(n), degree + 1);
    std::vector<double> basis(static_cast<std::size_t>(degree + 1));
    for (std::size_t k = 0; k < n; ++k) {
        shifted_legendre(t[k], degree, basis.data());
        for (int j = 0; j <= degree; ++j) v(static_cast<Eigen::Index>(k), j) = basis[static_cast<std::size_t>(j)];
    }
    return v;
}

inline Eigen::VectorXd weighted_solve(const Eigen::MatrixXd& v, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
    const Eigen::VectorXd sw = w.array().sqrt();
    const Eigen::MatrixXd a = sw.asDiagonal() * v;
    return a.householderQr().solve(sw.cwiseProduct(y));
}

inline double median(std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

}  // namespace poly_detail

/// Least-squares fit of each residual column against the normalised path parameter.
inline MotionPolynomialModel fit_motion_polynomials(const DeviationMatrix& residual,
                                                    const PolynomialFitOptions& opts = {}) {
    const auto n = static_cast<std::size_t>(residual.rows());
    if (opts.degree < 0) throw DataError("fit_motion_polynomials: degree must be >= 0");
    if (static_cast<std::size_t>(opts.degree) + 1 >= n) {
        throw DataError("fit_motion_polynomials: degree " + std::to_string(opts.degree) + " needs more than " +
                        std::to_string(opts.degree + 1) + " samples, got " + std::to_string(n));
    }
    if (!residual.allFinite()) throw DataError("fit_motion_polynomials: non-finite residual");

    const Eigen::MatrixXd v = poly_detail::design_matrix(n, opts.degree);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(opts.degree + 1).triangularView<Eigen::Upper>();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(r);
    const auto& sv = svd.singularValues();
    const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
    if (!(cond <= opts.max_condition)) {
        throw DataError("fit_motion_polynomials: design matrix condition number " + std::to_string(cond) +
                        " exceeds " + std::to_string(opts.max_condition));
    }

    MotionPolynomialModel model;
    model.degree = opts.degree;
    const Eigen::MatrixXd coeffs = qr.solve(Eigen::MatrixXd(residual));
    for (int axis = 0; axis < 3; ++axis) {
        Eigen::VectorXd c = coeffs.col(axis);
        if (opts.robust) {
            const Eigen::VectorXd y = residual.col(axis);
            for (int it = 0; it < opts.robust_iterations; ++it) {
                const Eigen::VectorXd res = y - v * c;
                std::vector<double> abs_res(n);
                for (std::size_t k = 0; k < n; ++k) abs_res[k] = std::abs(res(static_cast<Eigen::Index>(k)));
                const double scale = 1.4826 * poly_detail::median(abs_res);
                if (!(scale > 0.0)) break;
                const double cut = 4.685 * scale;
                Eigen::VectorXd w(static_cast<Eigen::Index>(n));
                for (std::size_t k = 0; k < n; ++k) {
                    const double u = abs_res[k] / cut;
                    w(static_cast<Eigen::Index>(k)) = u < 1.0 ? (1.0 - u * u) * (1.0 - u * u) : 0.0;
                }
                c = poly_detail::weighted_solve(v, y, w);
            }
        }
        model.legendre[static_cast<std::size_t>(axis)].assign(c.data(), c.data() + c.size());
    }
    return model;
}

/// Evaluates the model on the n-point uniform grid over [0, 1] (delta_m).
inline DeviationMatrix motion_contribution(const MotionPolynomialModel& model, std::size_t n) {
    model.validate();
    if (n < 2) throw DataError("motion_contribution: at least two samples are required");
    const auto t = normalized_path_parameter(n);
    DeviationMatrix out(static_cast<Eigen::Index>(n), 3);
    std::vector<double> basis(static_cast<std::size_t>(model.degree + 1));
    for (std::size_t k = 0; k < n; ++k) {
        shifted_legendre(t[k], model.degree, basis.data());
        for (int axis = 0; axis < 3; ++axis) {
            double acc = 0.0;
            const auto& c = model.legendre[static_cast<std::size_t>(axis)];
            for (int j = model.degree; j >= 0; --j) acc += c[static_cast<std::size_t>(j)] * basis[static_cast<std::size_t>(j)];
            out(static_cast<Eigen::Index>(k), axis) = acc;
        }
    }
    return out;
}

}  // namespace volerr
