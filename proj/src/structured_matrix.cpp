#include "elglm/structured_matrix.hpp"

#include "elglm/error.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <functional>
#include <numeric>
#include <string>

namespace elglm {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kCirculantClampTolerance = 1e-10;

using ComplexVector = Eigen::VectorXcd;

// In-place multi-dimensional DFT over a row-major grid.
void fft_grid(ComplexVector& data, const std::vector<Index>& dims, bool inverse) {
    Eigen::FFT<double> fft;
    const Index total = data.size();
    Index stride = total;
    for (Index n : dims) {
        stride /= n;
        const Index outer = total / (n * stride);
        std::vector<std::complex<double>> in(static_cast<std::size_t>(n));
        std::vector<std::complex<double>> out;
        for (Index o = 0; o < outer; ++o) {
            for (Index s = 0; s < stride; ++s) {
                const Index offset = o * n * stride + s;
                for (Index k = 0; k < n; ++k) in[static_cast<std::size_t>(k)] = data[offset + k * stride];
                if (inverse) {
                    fft.inv(out, in);
                } else {
                    fft.fwd(out, in);
                }
                for (Index k = 0; k < n; ++k) data[offset + k * stride] = out[static_cast<std::size_t>(k)];
            }
        }
    }
}

VectorXd circulant_apply(const StructuredMatrix::Circulant& c, const VectorXd& v,
                         const std::function<double(double)>& spectral_map) {
    ComplexVector data = v.cast<std::complex<double>>();
    fft_grid(data, c.dims, false);
    for (Index k = 0; k < data.size(); ++k) data[k] *= spectral_map(c.eigenvalues[k]);
    fft_grid(data, c.dims, true);
    return data.real();
}

// Applies op(k, slice) along every mode k of a row-major tensor with the given dims.
VectorXd apply_modes(const std::vector<Index>& dims, const VectorXd& x,
                     const std::function<VectorXd(std::size_t, const VectorXd&)>& op) {
    VectorXd y = x;
    const Index total = x.size();
    Index right = total;
    for (std::size_t k = 0; k < dims.size(); ++k) {
        const Index n = dims[k];
        right /= n;
        const Index left = total / (n * right);
        VectorXd slice(n);
        for (Index l = 0; l < left; ++l) {
            for (Index r = 0; r < right; ++r) {
                for (Index j = 0; j < n; ++j) slice[j] = y[(l * n + j) * right + r];
                const VectorXd out = op(k, slice);
                for (Index j = 0; j < n; ++j) y[(l * n + j) * right + r] = out[j];
            }
        }
    }
    return y;
}

std::vector<Index> kronecker_dims(const StructuredMatrix::Kronecker& k) {
    std::vector<Index> dims;
    dims.reserve(k.factors.size());
    for (const auto& f : k.factors) dims.push_back(f.size());
    return dims;
}

void check_dimension(Index expected, Index got, const char* what) {
    if (expected != got) {
        throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(expected) +
                             ", got " + std::to_string(got));
    }
}

// Banded Cholesky of S + diag(shift). Returns L in the same band layout.
MatrixXd banded_cholesky(const MatrixXd& bands, const VectorXd& shift) {
    const Index b = bands.rows() - 1;
    const Index p = bands.cols();
    MatrixXd l = MatrixXd::Zero(b + 1, p);
    auto at = [&](Index i, Index j) -> double& { return l(i - j, j); }; // i >= j, i - j <= b
    for (Index j = 0; j < p; ++j) {
        double diag = bands(0, j) + shift[j];
        for (Index k = std::max<Index>(0, j - b); k < j; ++k) diag -= at(j, k) * at(j, k);
        if (!(diag > 0.0) || !std::isfinite(diag)) {
            throw NumericalError("banded Cholesky failed at row " + std::to_string(j) +
                                 ": matrix is singular or not positive definite");
        }
        const double ljj = std::sqrt(diag);
        at(j, j) = ljj;
        for (Index i = j + 1; i <= std::min(p - 1, j + b); ++i) {
            double v = bands(i - j, j);
            for (Index k = std::max<Index>(0, i - b); k < j; ++k) v -= at(i, k) * at(j, k);
            at(i, j) = v / ljj;
        }
    }
    return l;
}

VectorXd banded_cholesky_solve(const MatrixXd& l, const VectorXd& rhs) {
    const Index b = l.rows() - 1;
    const Index p = l.cols();
    VectorXd y = rhs;
    for (Index i = 0; i < p; ++i) {
        double v = y[i];
        for (Index k = std::max<Index>(0, i - b); k < i; ++k) v -= l(i - k, k) * y[k];
        y[i] = v / l(0, i);
    }
    for (Index i = p - 1; i >= 0; --i) {
        double v = y[i];
        for (Index k = i + 1; k <= std::min(p - 1, i + b); ++k) v -= l(k - i, i) * y[k];
        y[i] = v / l(0, i);
    }
    return y;
}

Eigen::LLT<MatrixXd> dense_cholesky(const MatrixXd& m) {
    Eigen::LLT<MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("Cholesky factorization failed: matrix is singular or not positive definite");
    }
    return llt;
}

void require_positive_spectrum(const VectorXd& shifted) {
    const double scale = std::max(1.0, shifted.cwiseAbs().maxCoeff());
    for (Index k = 0; k < shifted.size(); ++k) {
        if (!(shifted[k] > 1e-14 * scale)) {
            throw NumericalError("shifted matrix is singular or indefinite (eigenvalue " +
                                 std::to_string(shifted[k]) + ")");
        }
    }
}

VectorXd circulant_spectrum(const std::vector<Index>& dims, const VectorXd& base) {
    ComplexVector data = base.cast<std::complex<double>>();
    fft_grid(data, dims, false);
    VectorXd eig = data.real();
    const double max_abs = std::max(eig.cwiseAbs().maxCoeff(), 0.0);
    const double imag = data.imag().cwiseAbs().maxCoeff();
    if (imag > 1e-8 * std::max(1.0, max_abs)) {
        throw DomainError("circulant base is not symmetric (spectrum has imaginary part " +
                          std::to_string(imag) + ")");
    }
    for (Index k = 0; k < eig.size(); ++k) {
        if (eig[k] < -kCirculantClampTolerance * max_abs) {
            throw DomainError("circulant matrix is indefinite: eigenvalue " + std::to_string(eig[k]));
        }
        if (eig[k] < 0.0) eig[k] = 0.0;
    }
    return eig;
}

} // namespace

std::optional<double> Shift::as_scalar() const {
    if (is_scalar()) return scalar();
    const VectorXd& d = diagonal();
    if (d.size() == 0) return 0.0;
    if ((d.array() == d[0]).all()) return d[0];
    return std::nullopt;
}

VectorXd Shift::as_diagonal(Index p) const {
    if (is_scalar()) return VectorXd::Constant(p, scalar());
    check_dimension(p, diagonal().size(), "shift");
    return diagonal();
}

StructuredMatrix StructuredMatrix::scaled_identity(Index p, double scale) {
    if (p < 1) throw DimensionError("scaled identity needs p >= 1");
    if (!(scale >= 0.0) || !std::isfinite(scale)) throw DomainError("scaled identity needs a finite scale >= 0");
    return StructuredMatrix(ScaledIdentity{p, scale});
}

StructuredMatrix StructuredMatrix::diagonal(VectorXd values) {
    if (values.size() < 1) throw DimensionError("diagonal matrix needs p >= 1");
    if (!values.allFinite() || (values.array() < 0.0).any()) {
        throw DomainError("diagonal covariance entries must be finite and nonnegative");
    }
    return StructuredMatrix(Diagonal{std::move(values)});
}

StructuredMatrix StructuredMatrix::banded(MatrixXd bands) {
    if (bands.rows() < 1 || bands.cols() < 1) throw DimensionError("banded matrix needs at least one band");
    if (bands.rows() > bands.cols()) throw DimensionError("bandwidth exceeds matrix size");
    if (!bands.allFinite() || (bands.row(0).array() < 0.0).any()) {
        throw DomainError("banded covariance needs finite entries and a nonnegative diagonal");
    }
    const Index p = bands.cols();
    for (Index d = 1; d < bands.rows(); ++d) {
        for (Index j = p - d; j < p; ++j) bands(d, j) = 0.0;
    }
    return StructuredMatrix(Banded{std::move(bands)});
}

StructuredMatrix StructuredMatrix::circulant(VectorXd first_row) {
    const Index p = first_row.size();
    if (p < 1) throw DimensionError("circulant matrix needs p >= 1");
    std::vector<Index> dims{p};
    VectorXd eig = circulant_spectrum(dims, first_row);
    return StructuredMatrix(Circulant{std::move(dims), std::move(first_row), std::move(eig)});
}

StructuredMatrix StructuredMatrix::circulant_2d(Index rows, Index cols, VectorXd base) {
    if (rows < 1 || cols < 1) throw DimensionError("circulant grid needs positive dims");
    check_dimension(rows * cols, base.size(), "circulant_2d base");
    std::vector<Index> dims{rows, cols};
    VectorXd eig = circulant_spectrum(dims, base);
    return StructuredMatrix(Circulant{std::move(dims), std::move(base), std::move(eig)});
}

StructuredMatrix StructuredMatrix::dense(MatrixXd values) {
    if (values.rows() != values.cols() || values.rows() < 1) throw DimensionError("dense matrix must be square");
    if (!values.allFinite()) throw DomainError("dense matrix has non-finite entries");
    const double asym = (values - values.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * std::max(1.0, values.cwiseAbs().maxCoeff())) {
        throw DomainError("dense matrix is not symmetric");
    }
    values = 0.5 * (values + values.transpose());
    dense_cholesky(values);
    return StructuredMatrix(Dense{std::move(values)});
}

StructuredMatrix StructuredMatrix::kronecker(std::vector<StructuredMatrix> factors) {
    if (factors.empty()) throw DimensionError("Kronecker product needs at least one factor");
    Kronecker k;
    VectorXd eig = VectorXd::Ones(1);
    for (const auto& f : factors) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(f.to_dense());
        VectorXd fe = es.eigenvalues().cwiseMax(0.0);
        VectorXd next(eig.size() * fe.size());
        for (Index i = 0; i < eig.size(); ++i) next.segment(i * fe.size(), fe.size()) = eig[i] * fe;
        eig = std::move(next);
        k.eigenvectors.push_back(es.eigenvectors());
    }
    k.factors = std::move(factors);
    k.eigenvalues = std::move(eig);
    return StructuredMatrix(std::move(k));
}

StructuredMatrix StructuredMatrix::toeplitz(const VectorXd& first_column, Index max_bandwidth) {
    const Index p = first_column.size();
    if (p < 1) throw DimensionError("Toeplitz matrix needs p >= 1");
    Index last = 0;
    for (Index k = 0; k < p; ++k) {
        if (first_column[k] != 0.0) last = k;
    }
    if (last <= max_bandwidth) {
        MatrixXd bands = MatrixXd::Zero(last + 1, p);
        for (Index d = 0; d <= last; ++d) bands.row(d).setConstant(first_column[d]);
        return banded(std::move(bands));
    }
    MatrixXd m(p, p);
    for (Index i = 0; i < p; ++i) {
        for (Index j = 0; j < p; ++j) m(i, j) = first_column[std::abs(i - j)];
    }
    return dense(std::move(m));
}

Index StructuredMatrix::size() const {
    return std::visit(Overloaded{
                          [](const ScaledIdentity& s) { return s.size; },
                          [](const Diagonal& d) { return d.values.size(); },
                          [](const Banded& b) { return b.bands.cols(); },
                          [](const Circulant& c) { return c.base.size(); },
                          [](const Dense& d) { return d.values.rows(); },
                          [](const Kronecker& k) { return k.eigenvalues.size(); },
                      },
                      kind_);
}

std::string_view StructuredMatrix::kind_name() const {
    return std::visit(Overloaded{
                          [](const ScaledIdentity&) { return std::string_view("scaled_identity"); },
                          [](const Diagonal&) { return std::string_view("diagonal"); },
                          [](const Banded&) { return std::string_view("banded"); },
                          [](const Circulant&) { return std::string_view("circulant"); },
                          [](const Dense&) { return std::string_view("dense"); },
                          [](const Kronecker&) { return std::string_view("kronecker"); },
                      },
                      kind_);
}

VectorXd StructuredMatrix::matvec(const VectorXd& v) const {
    check_dimension(size(), v.size(), "matvec");
    return std::visit(
        Overloaded{
            [&](const ScaledIdentity& s) -> VectorXd { return s.scale * v; },
            [&](const Diagonal& d) -> VectorXd { return d.values.cwiseProduct(v); },
            [&](const Banded& b) -> VectorXd {
                const Index p = b.bands.cols();
                VectorXd y = b.bands.row(0).transpose().cwiseProduct(v);
                for (Index d = 1; d < b.bands.rows(); ++d) {
                    for (Index j = 0; j + d < p; ++j) {
                        y[j + d] += b.bands(d, j) * v[j];
                        y[j] += b.bands(d, j) * v[j + d];
                    }
                }
                return y;
            },
            [&](const Circulant& c) -> VectorXd {
                return circulant_apply(c, v, [](double lambda) { return lambda; });
            },
            [&](const Dense& d) -> VectorXd { return d.values * v; },
            [&](const Kronecker& k) -> VectorXd {
                return apply_modes(kronecker_dims(k), v, [&](std::size_t i, const VectorXd& slice) {
                    return k.factors[i].matvec(slice);
                });
            },
        },
        kind_);
}

MatrixXd StructuredMatrix::to_dense() const {
    return std::visit(
        Overloaded{
            [](const ScaledIdentity& s) -> MatrixXd { return s.scale * MatrixXd::Identity(s.size, s.size); },
            [](const Diagonal& d) -> MatrixXd { return d.values.asDiagonal(); },
            [](const Banded& b) -> MatrixXd {
                const Index p = b.bands.cols();
                MatrixXd m = MatrixXd::Zero(p, p);
                for (Index d = 0; d < b.bands.rows(); ++d) {
                    for (Index j = 0; j + d < p; ++j) {
                        m(j + d, j) = b.bands(d, j);
                        m(j, j + d) = b.bands(d, j);
                    }
                }
                return m;
            },
            [this](const Circulant& c) -> MatrixXd {
                const Index p = c.base.size();
                MatrixXd m(p, p);
                for (Index j = 0; j < p; ++j) m.col(j) = matvec(VectorXd::Unit(p, j));
                return m;
            },
            [](const Dense& d) -> MatrixXd { return d.values; },
            [](const Kronecker& k) -> MatrixXd {
                MatrixXd m = MatrixXd::Ones(1, 1);
                for (const auto& f : k.factors) {
                    const MatrixXd fd = f.to_dense();
                    MatrixXd next(m.rows() * fd.rows(), m.cols() * fd.cols());
                    for (Index i = 0; i < m.rows(); ++i) {
                        for (Index j = 0; j < m.cols(); ++j) {
                            next.block(i * fd.rows(), j * fd.cols(), fd.rows(), fd.cols()) = m(i, j) * fd;
                        }
                    }
                    m = std::move(next);
                }
                return m;
            },
        },
        kind_);
}

VectorXd StructuredMatrix::diagonal_values() const {
    return std::visit(Overloaded{
                          [](const ScaledIdentity& s) -> VectorXd { return VectorXd::Constant(s.size, s.scale); },
                          [](const Diagonal& d) -> VectorXd { return d.values; },
                          [](const Banded& b) -> VectorXd { return b.bands.row(0).transpose(); },
                          [](const Circulant& c) -> VectorXd { return VectorXd::Constant(c.base.size(), c.base[0]); },
                          [](const Dense& d) -> VectorXd { return d.values.diagonal(); },
                          [](const Kronecker& k) -> VectorXd {
                              VectorXd d = VectorXd::Ones(1);
                              for (const auto& f : k.factors) {
                                  const VectorXd fd = f.diagonal_values();
                                  VectorXd next(d.size() * fd.size());
                                  for (Index i = 0; i < d.size(); ++i) next.segment(i * fd.size(), fd.size()) = d[i] * fd;
                                  d = std::move(next);
                              }
                              return d;
                          },
                      },
                      kind_);
}

bool StructuredMatrix::is_diagonal() const {
    return std::holds_alternative<ScaledIdentity>(kind_) || std::holds_alternative<Diagonal>(kind_);
}

StructuredMatrix StructuredMatrix::scaled(double factor) const {
    if (!(factor >= 0.0) || !std::isfinite(factor)) throw DomainError("scale factor must be finite and >= 0");
    if (factor == 0.0) return scaled_identity(size(), 0.0);
    return std::visit(
        Overloaded{
            [&](const ScaledIdentity& s) { return StructuredMatrix(ScaledIdentity{s.size, s.scale * factor}); },
            [&](const Diagonal& d) { return StructuredMatrix(Diagonal{d.values * factor}); },
            [&](const Banded& b) { return StructuredMatrix(Banded{b.bands * factor}); },
            [&](const Circulant& c) {
                return StructuredMatrix(Circulant{c.dims, c.base * factor, c.eigenvalues * factor});
            },
            [&](const Dense& d) { return StructuredMatrix(Dense{d.values * factor}); },
            [&](const Kronecker& k) {
                Kronecker out = k;
                out.factors.front() = k.factors.front().scaled(factor);
                out.eigenvalues *= factor;
                return StructuredMatrix(std::move(out));
            },
        },
        kind_);
}

VectorXd StructuredMatrix::eigenvalues() const {
    return std::visit(Overloaded{
                          [](const ScaledIdentity& s) -> VectorXd { return VectorXd::Constant(s.size, s.scale); },
                          [](const Diagonal& d) -> VectorXd { return d.values; },
                          [](const Circulant& c) -> VectorXd { return c.eigenvalues; },
                          [](const Kronecker& k) -> VectorXd { return k.eigenvalues; },
                          [this](const auto&) -> VectorXd {
                              Eigen::SelfAdjointEigenSolver<MatrixXd> es(to_dense(), Eigen::EigenvaluesOnly);
                              return es.eigenvalues();
                          },
                      },
                      kind_);
}

VectorXd matvec_shifted(const StructuredMatrix& s, const Shift& shift, const VectorXd& v) {
    VectorXd y = s.matvec(v);
    if (shift.is_scalar()) {
        y += shift.scalar() * v;
    } else {
        check_dimension(s.size(), shift.diagonal().size(), "shift");
        y += shift.diagonal().cwiseProduct(v);
    }
    return y;
}

VectorXd solve_shifted(const StructuredMatrix& s, const Shift& shift, const VectorXd& b) {
    using SM = StructuredMatrix;
    const Index p = s.size();
    check_dimension(p, b.size(), "solve_shifted rhs");
    const std::optional<double> scalar = shift.as_scalar();
    return std::visit(
        Overloaded{
            [&](const SM::ScaledIdentity& m) -> VectorXd {
                const VectorXd d = (shift.as_diagonal(p).array() + m.scale).matrix();
                require_positive_spectrum(d);
                return b.cwiseQuotient(d);
            },
            [&](const SM::Diagonal& m) -> VectorXd {
                const VectorXd d = m.values + shift.as_diagonal(p);
                require_positive_spectrum(d);
                return b.cwiseQuotient(d);
            },
            [&](const SM::Banded& m) -> VectorXd {
                return banded_cholesky_solve(banded_cholesky(m.bands, shift.as_diagonal(p)), b);
            },
            [&](const SM::Circulant& m) -> VectorXd {
                if (!scalar) {
                    MatrixXd dense = s.to_dense();
                    dense.diagonal() += shift.diagonal();
                    return dense_cholesky(dense).solve(b);
                }
                const VectorXd shifted = (m.eigenvalues.array() + *scalar).matrix();
                require_positive_spectrum(shifted);
                return circulant_apply(m, b, [&](double lambda) { return 1.0 / (lambda + *scalar); });
            },
            [&](const SM::Dense& m) -> VectorXd {
                MatrixXd dense = m.values;
                dense.diagonal() += shift.as_diagonal(p);
                return dense_cholesky(dense).solve(b);
            },
            [&](const SM::Kronecker& m) -> VectorXd {
                if (!scalar) {
                    MatrixXd dense = s.to_dense();
                    dense.diagonal() += shift.diagonal();
                    return dense_cholesky(dense).solve(b);
                }
                const VectorXd shifted = (m.eigenvalues.array() + *scalar).matrix();
                require_positive_spectrum(shifted);
                const auto dims = kronecker_dims(m);
                VectorXd z = apply_modes(dims, b, [&](std::size_t i, const VectorXd& slice) -> VectorXd {
                    return m.eigenvectors[i].transpose() * slice;
                });
                z = z.cwiseQuotient(shifted);
                return apply_modes(dims, z, [&](std::size_t i, const VectorXd& slice) -> VectorXd {
                    return m.eigenvectors[i] * slice;
                });
            },
        },
        s.kind());
}

double logdet_shifted(const StructuredMatrix& s, const Shift& shift) {
    using SM = StructuredMatrix;
    const Index p = s.size();
    const std::optional<double> scalar = shift.as_scalar();
    auto spectral = [](const VectorXd& shifted) {
        require_positive_spectrum(shifted);
        return shifted.array().log().sum();
    };
    auto dense_logdet = [&]() {
        MatrixXd dense = s.to_dense();
        dense.diagonal() += shift.as_diagonal(p);
        const auto llt = dense_cholesky(dense);
        return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    };
    return std::visit(Overloaded{
                          [&](const SM::ScaledIdentity& m) {
                              return spectral((shift.as_diagonal(p).array() + m.scale).matrix());
                          },
                          [&](const SM::Diagonal& m) { return spectral(m.values + shift.as_diagonal(p)); },
                          [&](const SM::Banded& m) {
                              const MatrixXd l = banded_cholesky(m.bands, shift.as_diagonal(p));
                              return 2.0 * l.row(0).array().log().sum();
                          },
                          [&](const SM::Circulant& m) {
                              if (!scalar) return dense_logdet();
                              return spectral((m.eigenvalues.array() + *scalar).matrix());
                          },
                          [&](const SM::Dense&) { return dense_logdet(); },
                          [&](const SM::Kronecker& m) {
                              if (!scalar) return dense_logdet();
                              return spectral((m.eigenvalues.array() + *scalar).matrix());
                          },
                      },
                      s.kind());
}

namespace {

// a S + R as a single structured matrix when both share a fast structure.
std::optional<StructuredMatrix> structured_sum(const StructuredMatrix& s, double a, const StructuredMatrix& r) {
    using SM = StructuredMatrix;
    const auto* cs = std::get_if<SM::Circulant>(&s.kind());
    const auto* cr = std::get_if<SM::Circulant>(&r.kind());
    if (cs && cr && cs->dims == cr->dims) {
        VectorXd base = a * cs->base + cr->base;
        if (cs->dims.size() == 1) return SM::circulant(std::move(base));
        return SM::circulant_2d(cs->dims[0], cs->dims[1], std::move(base));
    }
    const auto* bs = std::get_if<SM::Banded>(&s.kind());
    const auto* br = std::get_if<SM::Banded>(&r.kind());
    if (bs && br) {
        const Index rows = std::max(bs->bands.rows(), br->bands.rows());
        MatrixXd bands = MatrixXd::Zero(rows, s.size());
        bands.topRows(bs->bands.rows()) += a * bs->bands;
        bands.topRows(br->bands.rows()) += br->bands;
        return SM::banded(std::move(bands));
    }
    return std::nullopt;
}

} // namespace

VectorXd solve_scaled_sum(const StructuredMatrix& s, double a, const StructuredMatrix* r, const VectorXd& b) {
    if (r == nullptr) return solve_shifted(s.scaled(a), 0.0, b);
    check_dimension(s.size(), r->size(), "penalty");
    if (r->is_diagonal()) return solve_shifted(s.scaled(a), r->diagonal_values(), b);
    if (auto sum = structured_sum(s, a, *r)) return solve_shifted(*sum, 0.0, b);
    return dense_cholesky(a * s.to_dense() + r->to_dense()).solve(b);
}

double logdet_scaled_sum(const StructuredMatrix& s, double a, const StructuredMatrix* r) {
    if (r == nullptr) return logdet_shifted(s.scaled(a), 0.0);
    check_dimension(s.size(), r->size(), "penalty");
    if (r->is_diagonal()) return logdet_shifted(s.scaled(a), r->diagonal_values());
    if (auto sum = structured_sum(s, a, *r)) return logdet_shifted(*sum, 0.0);
    const auto llt = dense_cholesky(a * s.to_dense() + r->to_dense());
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

} // namespace elglm
