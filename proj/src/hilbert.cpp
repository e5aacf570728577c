#include "photodet/hilbert.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace photodet {

ModeLayout::ModeLayout(std::initializer_list<Mode> modes) : ModeLayout(std::vector<Mode>(modes)) {}

ModeLayout::ModeLayout(std::vector<Mode> modes) : modes_(std::move(modes)) {
    if (modes_.empty()) throw ValidationError("ModeLayout: at least one mode required");
    total_ = 1;
    for (std::size_t i = 0; i < modes_.size(); ++i) {
        if (modes_[i].dim < 2) {
            throw ValidationError("ModeLayout: mode '" + modes_[i].name + "' has dim < 2");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (modes_[j].name == modes_[i].name) {
                throw ValidationError("ModeLayout: duplicate mode '" + modes_[i].name + "'");
            }
        }
        total_ *= modes_[i].dim;
    }
}

ModeLayout ModeLayout::detector(int buffer_dim, int waste_dim) {
    return ModeLayout{{"buffer", buffer_dim}, {"qubit", 2}, {"waste", waste_dim}};
}

ModeLayout ModeLayout::buffer_qubit(int buffer_dim) {
    return ModeLayout{{"buffer", buffer_dim}, {"qubit", 2}};
}

ModeLayout ModeLayout::single(std::string name, int dim) {
    return ModeLayout{{std::move(name), dim}};
}

bool ModeLayout::contains(std::string_view name) const {
    return std::any_of(modes_.begin(), modes_.end(), [&](const Mode& m) { return m.name == name; });
}

std::size_t ModeLayout::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < modes_.size(); ++i) {
        if (modes_[i].name == name) return i;
    }
    throw ValidationError("unknown mode '" + std::string(name) + "' in layout " + describe());
}

ModeLayout ModeLayout::subset(const std::vector<std::string>& names) const {
    if (names.empty()) throw ValidationError("ModeLayout::subset: empty mode list");
    std::vector<bool> keep(modes_.size(), false);
    for (const auto& n : names) {
        const auto i = index_of(n);
        if (keep[i]) throw ValidationError("ModeLayout::subset: mode '" + n + "' listed twice");
        keep[i] = true;
    }
    std::vector<Mode> out;
    for (std::size_t i = 0; i < modes_.size(); ++i) {
        if (keep[i]) out.push_back(modes_[i]);
    }
    return ModeLayout(std::move(out));
}

std::vector<int> ModeLayout::digits(Eigen::Index index) const {
    std::vector<int> d(modes_.size());
    for (std::size_t k = modes_.size(); k-- > 0;) {
        d[k] = static_cast<int>(index % modes_[k].dim);
        index /= modes_[k].dim;
    }
    return d;
}

Eigen::Index ModeLayout::index(const std::vector<int>& digits) const {
    Eigen::Index idx = 0;
    for (std::size_t k = 0; k < modes_.size(); ++k) idx = idx * modes_[k].dim + digits[k];
    return idx;
}

std::string ModeLayout::describe() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < modes_.size(); ++i) {
        if (i) os << ", ";
        os << modes_[i].name << ':' << modes_[i].dim;
    }
    os << ')';
    return os.str();
}

void require_same_layout(const ModeLayout& a, const ModeLayout& b, std::string_view what) {
    if (a != b) {
        throw ValidationError(std::string(what) + ": layout mismatch " + a.describe() + " vs " +
                              b.describe());
    }
}

// --------------------------------------------------------------------------

Operator::Operator(ModeLayout layout, Matrix matrix) : layout_(std::move(layout)), matrix_(std::move(matrix)) {
    const auto n = layout_.total_dim();
    if (matrix_.rows() != n || matrix_.cols() != n) {
        throw ValidationError("Operator: matrix shape does not match layout " + layout_.describe());
    }
}

Operator Operator::identity(const ModeLayout& layout) {
    return {layout, Matrix::Identity(layout.total_dim(), layout.total_dim())};
}

Operator Operator::zero(const ModeLayout& layout) {
    return {layout, Matrix::Zero(layout.total_dim(), layout.total_dim())};
}

Operator Operator::operator+(const Operator& o) const {
    require_same_layout(layout_, o.layout_, "Operator::operator+");
    return {layout_, matrix_ + o.matrix_};
}

Operator Operator::operator-(const Operator& o) const {
    require_same_layout(layout_, o.layout_, "Operator::operator-");
    return {layout_, matrix_ - o.matrix_};
}

Operator Operator::operator*(const Operator& o) const {
    require_same_layout(layout_, o.layout_, "Operator::operator*");
    return {layout_, matrix_ * o.matrix_};
}

Operator commutator(const Operator& a, const Operator& b) { return a * b - b * a; }

// --------------------------------------------------------------------------

DensityMatrix::DensityMatrix(ModeLayout layout, Matrix matrix)
    : layout_(std::move(layout)), matrix_(std::move(matrix)) {
    const auto n = layout_.total_dim();
    if (matrix_.rows() != n || matrix_.cols() != n) {
        throw ValidationError("DensityMatrix: matrix shape does not match layout " + layout_.describe());
    }
    const double herm = (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff();
    if (!(herm <= kHermitianTol)) {
        throw ValidationError("DensityMatrix: not Hermitian (max |rho - rho^dag| = " + std::to_string(herm) + ")");
    }
    const cplx tr = matrix_.trace();
    if (!(std::abs(tr - 1.0) <= kTraceTol)) {
        throw ValidationError("DensityMatrix: trace " + std::to_string(tr.real()) + " != 1");
    }
    const double lmin = min_eigenvalue();
    if (!(lmin >= kPositivityTol)) {
        throw ValidationError("DensityMatrix: negative eigenvalue " + std::to_string(lmin));
    }
}

DensityMatrix DensityMatrix::pure(const ModeLayout& layout, const Vector& psi) {
    if (psi.size() != layout.total_dim()) throw ValidationError("DensityMatrix::pure: state size mismatch");
    const double nrm = psi.squaredNorm();
    if (!(nrm > 0.0)) throw ValidationError("DensityMatrix::pure: zero vector");
    Matrix m = psi * psi.adjoint() / nrm;
    m = 0.5 * (m + m.adjoint()).eval();
    return {layout, std::move(m)};
}

DensityMatrix DensityMatrix::normalized(const ModeLayout& layout, const Matrix& m) {
    const double tr = m.trace().real();
    if (!(tr > 0.0)) throw ValidationError("DensityMatrix::normalized: non-positive trace");
    Matrix h = 0.5 * (m + m.adjoint()) / tr;
    return {layout, std::move(h)};
}

DensityMatrix DensityMatrix::fock(const ModeLayout& layout, const std::vector<int>& occupations) {
    if (occupations.size() != layout.size()) throw ValidationError("DensityMatrix::fock: one occupation per mode required");
    for (std::size_t k = 0; k < occupations.size(); ++k) {
        if (occupations[k] < 0 || occupations[k] >= layout.modes()[k].dim) {
            throw ValidationError("DensityMatrix::fock: occupation out of range for mode '" +
                                  layout.modes()[k].name + "'");
        }
    }
    Vector psi = Vector::Zero(layout.total_dim());
    psi(layout.index(occupations)) = 1.0;
    return pure(layout, psi);
}

double DensityMatrix::purity() const { return (matrix_ * matrix_).trace().real(); }

double DensityMatrix::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(matrix_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// --------------------------------------------------------------------------

Matrix lowering(int dim) {
    if (dim < 2) throw ValidationError("lowering: dim must be >= 2");
    Matrix a = Matrix::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

Operator embed(const ModeLayout& layout, std::string_view mode, const Matrix& local) {
    const auto target = layout.index_of(mode);
    const int d = layout.modes()[target].dim;
    if (local.rows() != d || local.cols() != d) throw ValidationError("embed: local operator dimension mismatch");

    // Kronecker product I_left ⊗ local ⊗ I_right, filled entrywise.
    Eigen::Index left = 1, right = 1;
    for (std::size_t k = 0; k < target; ++k) left *= layout.modes()[k].dim;
    for (std::size_t k = target + 1; k < layout.size(); ++k) right *= layout.modes()[k].dim;

    const auto n = layout.total_dim();
    Matrix m = Matrix::Zero(n, n);
    for (Eigen::Index l = 0; l < left; ++l) {
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) {
                const cplx v = local(i, j);
                if (v == cplx{}) continue;
                for (Eigen::Index r = 0; r < right; ++r) {
                    m((l * d + i) * right + r, (l * d + j) * right + r) = v;
                }
            }
        }
    }
    return {layout, std::move(m)};
}

Operator annihilation(const ModeLayout& layout, std::string_view mode) {
    return embed(layout, mode, lowering(layout.dim_of(mode)));
}

Operator number_operator(const ModeLayout& layout, std::string_view mode) {
    const Matrix a = lowering(layout.dim_of(mode));
    return embed(layout, mode, a.adjoint() * a);
}

Vector coherent_amplitudes(cplx amplitude, int dim) {
    Vector c(dim);
    const double pref = std::exp(-0.5 * std::norm(amplitude));
    cplx term = 1.0;  // amplitude^n / sqrt(n!)
    for (int n = 0; n < dim; ++n) {
        c(n) = pref * term;
        term *= amplitude / std::sqrt(static_cast<double>(n + 1));
    }
    return c;
}

DensityMatrix coherent_state(const ModeLayout& layout, std::string_view mode, cplx amplitude) {
    const auto target = layout.index_of(mode);
    const int d = layout.modes()[target].dim;
    if (std::norm(amplitude) > d / 4.0) {
        throw ValidationError("coherent_state: |amplitude|^2 = " + std::to_string(std::norm(amplitude)) +
                              " too large for dim " + std::to_string(d));
    }
    const Vector local = coherent_amplitudes(amplitude, d);
    Vector psi = Vector::Zero(layout.total_dim());
    std::vector<int> digits(layout.size(), 0);
    for (int n = 0; n < d; ++n) {
        digits[target] = n;
        psi(layout.index(digits)) = local(n);
    }
    return DensityMatrix::pure(layout, psi);
}

DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b) {
    std::vector<Mode> modes = a.layout().modes();
    modes.insert(modes.end(), b.layout().modes().begin(), b.layout().modes().end());
    ModeLayout layout(std::move(modes));
    const auto na = a.matrix().rows(), nb = b.matrix().rows();
    Matrix m(na * nb, na * nb);
    for (Eigen::Index i = 0; i < na; ++i) {
        for (Eigen::Index j = 0; j < na; ++j) m.block(i * nb, j * nb, nb, nb) = a.matrix()(i, j) * b.matrix();
    }
    return DensityMatrix::normalized(layout, m);
}

DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<std::string>& kept_modes) {
    const ModeLayout& full = rho.layout();
    const ModeLayout kept = full.subset(kept_modes);

    std::vector<bool> is_kept(full.size(), false);
    for (const auto& name : kept_modes) is_kept[full.index_of(name)] = true;

    auto reduced_index = [&](const std::vector<int>& d) {
        Eigen::Index idx = 0;
        for (std::size_t k = 0; k < full.size(); ++k) {
            if (is_kept[k]) idx = idx * full.modes()[k].dim + d[k];
        }
        return idx;
    };

    const auto n = full.total_dim();
    Matrix out = Matrix::Zero(kept.total_dim(), kept.total_dim());
    std::vector<std::vector<int>> digits(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) digits[static_cast<std::size_t>(i)] = full.digits(i);

    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& di = digits[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto& dj = digits[static_cast<std::size_t>(j)];
            bool diag_in_traced = true;
            for (std::size_t k = 0; k < full.size(); ++k) {
                if (!is_kept[k] && di[k] != dj[k]) {
                    diag_in_traced = false;
                    break;
                }
            }
            if (diag_in_traced) out(reduced_index(di), reduced_index(dj)) += rho.matrix()(i, j);
        }
    }
    out = 0.5 * (out + out.adjoint()).eval();
    return {kept, std::move(out)};
}

cplx expectation(const Matrix& rho, const Operator& op) {
    if (rho.rows() != op.matrix().rows()) throw ValidationError("expectation: dimension mismatch");
    // Tr(rho O) without forming the product.
    return (rho.transpose().cwiseProduct(op.matrix())).sum();
}

cplx expectation(const DensityMatrix& rho, const Operator& op) {
    require_same_layout(rho.layout(), op.layout(), "expectation");
    return expectation(rho.matrix(), op);
}

double top_level_population(const DensityMatrix& rho, std::string_view mode) {
    const auto k = rho.layout().index_of(mode);
    const int top = rho.layout().modes()[k].dim - 1;
    double p = 0.0;
    for (Eigen::Index i = 0; i < rho.layout().total_dim(); ++i) {
        if (rho.layout().digits(i)[k] == top) p += rho.matrix()(i, i).real();
    }
    return p;
}

}  // namespace photodet
