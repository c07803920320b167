#pragma once

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

namespace elglm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/**
 * Symmetric positive semidefinite p x p matrix with an explicit structure tag.
 *
 * Each kind keeps the storage needed for its fast paths:
 *   - ScaledIdentity: s * I
 *   - Diagonal:       diag(d), d >= 0
 *   - Banded:         symmetric, lower bands stored as (b+1) x p,
 *                     bands(k, j) = S(j + k, j)
 *   - Circulant:      one- or two-level (block circulant with circulant blocks);
 *                     base is the first column in row-major grid order and the
 *                     spectrum is cached at construction
 *   - Dense:          full matrix, positive definiteness verified by Cholesky
 *   - Kronecker:      F_1 (x) F_2 (x) ... with per-factor eigendecompositions cached
 *
 * Values are immutable after construction, so sharing between threads is safe.
 */
class StructuredMatrix {
public:
    struct ScaledIdentity {
        Index size = 0;
        double scale = 1.0;
    };
    struct Diagonal {
        VectorXd values;
    };
    struct Banded {
        MatrixXd bands;
    };
    struct Circulant {
        std::vector<Index> dims;
        VectorXd base;
        VectorXd eigenvalues;
    };
    struct Dense {
        MatrixXd values;
    };
    struct Kronecker {
        std::vector<StructuredMatrix> factors;
        std::vector<MatrixXd> eigenvectors;
        VectorXd eigenvalues; // of the full product, in Kronecker order
    };
    using Kind = std::variant<ScaledIdentity, Diagonal, Banded, Circulant, Dense, Kronecker>;

    static StructuredMatrix identity(Index p) { return scaled_identity(p, 1.0); }
    static StructuredMatrix scaled_identity(Index p, double scale);
    static StructuredMatrix diagonal(VectorXd values);
    static StructuredMatrix banded(MatrixXd bands);
    static StructuredMatrix circulant(VectorXd first_row);
    static StructuredMatrix circulant_2d(Index rows, Index cols, VectorXd base);
    static StructuredMatrix dense(MatrixXd values);
    static StructuredMatrix kronecker(std::vector<StructuredMatrix> factors);

    /// Symmetric Toeplitz matrix from its first column. Stored as Banded when the
    /// last nonzero lag is <= max_bandwidth, otherwise Dense.
    static StructuredMatrix toeplitz(const VectorXd& first_column, Index max_bandwidth = 8);

    [[nodiscard]] Index size() const;
    [[nodiscard]] const Kind& kind() const { return kind_; }
    [[nodiscard]] std::string_view kind_name() const;

    [[nodiscard]] VectorXd matvec(const VectorXd& v) const;
    [[nodiscard]] MatrixXd to_dense() const;
    [[nodiscard]] VectorXd diagonal_values() const;
    [[nodiscard]] bool is_diagonal() const;

    /// Same structure, every entry multiplied by factor >= 0.
    [[nodiscard]] StructuredMatrix scaled(double factor) const;

    /// Eigenvalues (unordered) when the structure exposes them cheaply:
    /// ScaledIdentity, Diagonal, Circulant, Kronecker of those. Dense/Banded
    /// fall back to a symmetric eigensolver.
    [[nodiscard]] VectorXd eigenvalues() const;

private:
    explicit StructuredMatrix(Kind kind) : kind_(std::move(kind)) {}
    Kind kind_;
};

/// Scalar or diagonal shift added to a StructuredMatrix before solving.
class Shift {
public:
    Shift() = default;
    Shift(double scalar) : value_(scalar) {} // NOLINT(google-explicit-constructor)
    Shift(VectorXd diagonal) : value_(std::move(diagonal)) {} // NOLINT(google-explicit-constructor)

    [[nodiscard]] bool is_scalar() const { return std::holds_alternative<double>(value_); }
    [[nodiscard]] double scalar() const { return std::get<double>(value_); }
    [[nodiscard]] const VectorXd& diagonal() const { return std::get<VectorXd>(value_); }
    /// Scalar shift, or the common value of a constant diagonal shift.
    [[nodiscard]] std::optional<double> as_scalar() const;
    [[nodiscard]] VectorXd as_diagonal(Index p) const;

private:
    std::variant<double, VectorXd> value_ = 0.0;
};

/// (S + shift) v
[[nodiscard]] VectorXd matvec_shifted(const StructuredMatrix& s, const Shift& shift, const VectorXd& v);

/// Solves (S + shift) x = b, throwing NumericalError when the shifted matrix is
/// singular or indefinite.
[[nodiscard]] VectorXd solve_shifted(const StructuredMatrix& s, const Shift& shift, const VectorXd& b);

/// log det(S + shift); NumericalError when not positive definite.
[[nodiscard]] double logdet_shifted(const StructuredMatrix& s, const Shift& shift);

/// Solves (a S + R) x = b where R is optional. Diagonal R becomes a shift; two
/// circulants on the same grid or two banded matrices are summed in structure;
/// any other pairing is densified.
[[nodiscard]] VectorXd solve_scaled_sum(const StructuredMatrix& s, double a,
                                        const StructuredMatrix* r, const VectorXd& b);

/// log det(a S + R), same dispatch as solve_scaled_sum.
[[nodiscard]] double logdet_scaled_sum(const StructuredMatrix& s, double a, const StructuredMatrix* r);

} // namespace elglm
