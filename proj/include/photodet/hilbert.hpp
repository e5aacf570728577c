// hilbert.hpp: operators and density matrices over tensor products of
// truncated Fock spaces (buffer, qubit, waste).

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace photodet {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// Raised for malformed inputs: unknown modes, mismatched layouts, invalid
// physical parameters. The CLI maps it to the validation exit status.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Raised when a numerical procedure cannot meet its own accuracy contract.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Mode {
    std::string name;
    int dim = 2;

    bool operator==(const Mode&) const = default;
};

// Ordered list of tensor factors. The first mode is the slowest-varying
// index of the composite basis (Kronecker order).
class ModeLayout {
public:
    ModeLayout() = default;
    ModeLayout(std::initializer_list<Mode> modes);
    explicit ModeLayout(std::vector<Mode> modes);

    // Canonical (buffer, qubit, waste) layout.
    static ModeLayout detector(int buffer_dim, int waste_dim);
    // (buffer, qubit) layout of the waste-eliminated models.
    static ModeLayout buffer_qubit(int buffer_dim);
    static ModeLayout single(std::string name, int dim);

    const std::vector<Mode>& modes() const { return modes_; }
    std::size_t size() const { return modes_.size(); }
    Eigen::Index total_dim() const { return total_; }

    bool contains(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;
    int dim_of(std::string_view name) const { return modes_[index_of(name)].dim; }

    // Layout restricted to `names`, in this layout's order.
    ModeLayout subset(const std::vector<std::string>& names) const;

    // Decompose / compose a composite basis index into per-mode digits.
    std::vector<int> digits(Eigen::Index index) const;
    Eigen::Index index(const std::vector<int>& digits) const;

    bool operator==(const ModeLayout& other) const { return modes_ == other.modes_; }
    bool operator!=(const ModeLayout& other) const { return !(*this == other); }

    std::string describe() const;

private:
    std::vector<Mode> modes_;
    Eigen::Index total_ = 1;
};

void require_same_layout(const ModeLayout& a, const ModeLayout& b, std::string_view what);

// Dense operator on a layout. Immutable value type.
class Operator {
public:
    Operator(ModeLayout layout, Matrix matrix);

    static Operator identity(const ModeLayout& layout);
    static Operator zero(const ModeLayout& layout);

    const ModeLayout& layout() const { return layout_; }
    const Matrix& matrix() const { return matrix_; }

    Operator adjoint() const { return {layout_, matrix_.adjoint()}; }

    Operator operator+(const Operator& o) const;
    Operator operator-(const Operator& o) const;
    Operator operator*(const Operator& o) const;
    Operator operator*(cplx s) const { return {layout_, matrix_ * s}; }
    friend Operator operator*(cplx s, const Operator& op) { return op * s; }

private:
    ModeLayout layout_;
    Matrix matrix_;
};

Operator commutator(const Operator& a, const Operator& b);

// Validated density matrix: Hermitian, unit trace, positive semidefinite
// (each to the tolerances below). Construction throws ValidationError.
class DensityMatrix {
public:
    static constexpr double kHermitianTol = 1e-10;
    static constexpr double kTraceTol = 1e-9;
    static constexpr double kPositivityTol = -1e-7;

    DensityMatrix(ModeLayout layout, Matrix matrix);

    // |psi><psi| / <psi|psi>.
    static DensityMatrix pure(const ModeLayout& layout, const Vector& psi);
    // Normalizes the trace of a Hermitian PSD matrix before validating.
    static DensityMatrix normalized(const ModeLayout& layout, const Matrix& m);
    // Product of Fock states, one occupation per mode (in layout order).
    static DensityMatrix fock(const ModeLayout& layout, const std::vector<int>& occupations);

    const ModeLayout& layout() const { return layout_; }
    const Matrix& matrix() const { return matrix_; }

    double purity() const;
    double min_eigenvalue() const;

private:
    ModeLayout layout_;
    Matrix matrix_;
};

// Local lowering operator of dimension `dim`: <n-1|a|n> = sqrt(n).
Matrix lowering(int dim);

// I ⊗ ... ⊗ local ⊗ ... ⊗ I with `local` acting on the named mode.
Operator embed(const ModeLayout& layout, std::string_view mode, const Matrix& local);

Operator annihilation(const ModeLayout& layout, std::string_view mode);
Operator number_operator(const ModeLayout& layout, std::string_view mode);

// Fock amplitudes of a coherent state truncated to `dim` levels (not renormalized).
Vector coherent_amplitudes(cplx amplitude, int dim);

// Coherent state on one mode, vacuum elsewhere, renormalized after truncation.
// Rejects |amplitude|^2 > dim/4.
DensityMatrix coherent_state(const ModeLayout& layout, std::string_view mode, cplx amplitude);

DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b);

DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<std::string>& kept_modes);

cplx expectation(const DensityMatrix& rho, const Operator& op);
cplx expectation(const Matrix& rho, const Operator& op);

// Population of the highest retained Fock level of `mode` (truncation diagnostic).
double top_level_population(const DensityMatrix& rho, std::string_view mode);

inline constexpr double kTruncationWarnLevel = 1e-4;

}  // namespace photodet
