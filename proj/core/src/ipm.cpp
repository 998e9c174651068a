#include "covsteer/ipm.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace covsteer {
namespace {

using Index = Eigen::Index;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2 = std::numbers::sqrt2;

// Budget (in doubles) for cached Gram matrices of second-order blocks.
constexpr double kGramBudget = 64.0e6;

enum class BlockKind { Linear, Lorentz, Psd };

struct Block {
    BlockKind kind = BlockKind::Linear;
    Index offset = 0;
    Index dim = 0;
    Index order = 0;

    std::vector<Index> rows;  // local rows with a nonzero in G
    std::vector<Index> cols;  // global columns touched by the block
    Matrix g;                 // G restricted to rows × cols
    bool use_gram = false;
    Matrix gram;

    // Nesterov–Todd scaling.  Starts at the identity.
    Vector w;        // Linear: W = diag(w)
    double eta = 1;  // Lorentz: W = η(2vv' − J)
    Vector v;
    Matrix r, rinv;  // Psd: W(X) = R'XR
    Vector lambda;   // W z = W^{-T} s
};

// ---- cone primitives on a single block -----------------------------------

Vector identity_element(const Block& b) {
    Vector e = Vector::Zero(b.dim);
    switch (b.kind) {
        case BlockKind::Linear: e.setOnes(); break;
        case BlockKind::Lorentz: e(0) = 1.0; break;
        case BlockKind::Psd:
            for (Index j = 0; j < b.order; ++j) {
                e(svec_index(b.order, j, j)) = 1.0;
            }
            break;
    }
    return e;
}

// Smallest "eigenvalue" of x with respect to the cone.
double min_eig(const Block& b, const Vector& x) {
    switch (b.kind) {
        case BlockKind::Linear: return x.size() ? x.minCoeff() : kInf;
        case BlockKind::Lorentz: return x(0) - x.tail(b.dim - 1).norm();
        case BlockKind::Psd: {
            Eigen::SelfAdjointEigenSolver<Matrix> es(smat(x, b.order), Eigen::EigenvaluesOnly);
            return es.eigenvalues()(0);
        }
    }
    return 0.0;
}

// Largest α ≥ 0 with x + α d in the cone (∞ when unbounded).
double max_step(const Block& b, const Vector& x, const Vector& d) {
    switch (b.kind) {
        case BlockKind::Linear: {
            double alpha = kInf;
            for (Index i = 0; i < x.size(); ++i) {
                if (d(i) < 0) {
                    alpha = std::min(alpha, -x(i) / d(i));
                }
            }
            return alpha;
        }
        case BlockKind::Lorentz: {
            const double x1 = x.tail(b.dim - 1).norm();
            const double c0 = std::max((x(0) - x1) * (x(0) + x1), 0.0);
            const double a = d(0) * d(0) - d.tail(b.dim - 1).squaredNorm();
            const double hb = x(0) * d(0) - x.tail(b.dim - 1).dot(d.tail(b.dim - 1));
            if (c0 <= 0.0) {
                return 0.0;
            }
            if (a == 0.0) {
                return hb < 0 ? -c0 / (2.0 * hb) : kInf;
            }
            const double disc = hb * hb - a * c0;
            if (disc < 0) {
                return kInf;  // a > 0 and no real root
            }
            const double q = -(hb + std::copysign(std::sqrt(disc), hb));
            double alpha = kInf;
            for (double root : {q / a, q != 0.0 ? c0 / q : kInf}) {
                if (root > 0) {
                    alpha = std::min(alpha, root);
                }
            }
            return alpha;
        }
        case BlockKind::Psd: {
            Eigen::LLT<Matrix> llt(smat(x, b.order));
            if (llt.info() != Eigen::Success) {
                return 0.0;
            }
            Matrix m = llt.matrixL().solve(smat(d, b.order));
            m = llt.matrixL().solve(Matrix(m.transpose()));
            Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
            const double lmin = es.eigenvalues()(0);
            return lmin < 0 ? -1.0 / lmin : kInf;
        }
    }
    return 0.0;
}

Vector jordan_product(const Block& b, const Vector& x, const Vector& y) {
    switch (b.kind) {
        case BlockKind::Linear: return x.cwiseProduct(y);
        case BlockKind::Lorentz: {
            Vector out(b.dim);
            out(0) = x.dot(y);
            out.tail(b.dim - 1) = x(0) * y.tail(b.dim - 1) + y(0) * x.tail(b.dim - 1);
            return out;
        }
        case BlockKind::Psd: {
            const Matrix xm = smat(x, b.order);
            const Matrix ym = smat(y, b.order);
            return svec(0.5 * (xm * ym + ym * xm));
        }
    }
    return {};
}

// Solves λ ∘ u = v for u, with λ = b.lambda.
Vector jordan_divide(const Block& b, const Vector& v) {
    const Vector& l = b.lambda;
    switch (b.kind) {
        case BlockKind::Linear: return v.cwiseQuotient(l);
        case BlockKind::Lorentz: {
            const double det = l(0) * l(0) - l.tail(b.dim - 1).squaredNorm();
            Vector u(b.dim);
            u(0) = (l(0) * v(0) - l.tail(b.dim - 1).dot(v.tail(b.dim - 1))) / det;
            u.tail(b.dim - 1) = (v.tail(b.dim - 1) - u(0) * l.tail(b.dim - 1)) / l(0);
            return u;
        }
        case BlockKind::Psd: {
            // λ is svec of a diagonal matrix.
            Vector u(b.dim);
            for (Index j = 0; j < b.order; ++j) {
                for (Index i = j; i < b.order; ++i) {
                    const Index k = svec_index(b.order, i, j);
                    const double li = l(svec_index(b.order, i, i));
                    const double lj = l(svec_index(b.order, j, j));
                    u(k) = 2.0 * v(k) / (li + lj);
                }
            }
            return u;
        }
    }
    return {};
}

Vector lambda_square(const Block& b) { return jordan_product(b, b.lambda, b.lambda); }

// W x; the Linear and Lorentz scalings are symmetric.
Vector apply_w(const Block& b, const Vector& x, bool transpose) {
    switch (b.kind) {
        case BlockKind::Linear: return b.w.cwiseProduct(x);
        case BlockKind::Lorentz: {
            Vector jx = -x;
            jx(0) = x(0);
            return b.eta * (2.0 * b.v.dot(x) * b.v - jx);
        }
        case BlockKind::Psd: {
            const Matrix xm = smat(x, b.order);
            return transpose ? svec(b.r * xm * b.r.transpose()) : svec(b.r.transpose() * xm * b.r);
        }
    }
    return {};
}

Vector apply_winv(const Block& b, const Vector& x, bool transpose) {
    switch (b.kind) {
        case BlockKind::Linear: return x.cwiseQuotient(b.w);
        case BlockKind::Lorentz: {
            Vector jx = -x;
            jx(0) = x(0);
            Vector jv = -b.v;
            jv(0) = b.v(0);
            return (2.0 * jv.dot(x) * jv - jx) / b.eta;
        }
        case BlockKind::Psd: {
            const Matrix xm = smat(x, b.order);
            return transpose ? svec(b.rinv * xm * b.rinv.transpose())
                             : svec(b.rinv.transpose() * xm * b.rinv);
        }
    }
    return {};
}

void reset_scaling(Block& b) {
    b.w = Vector::Ones(b.kind == BlockKind::Linear ? b.dim : 0);
    b.eta = 1.0;
    if (b.kind == BlockKind::Lorentz) {
        b.v = Vector::Zero(b.dim);
        b.v(0) = 1.0;
    }
    if (b.kind == BlockKind::Psd) {
        b.r = Matrix::Identity(b.order, b.order);
        b.rinv = b.r;
    }
}

bool update_scaling(Block& b, const Vector& s, const Vector& z) {
    switch (b.kind) {
        case BlockKind::Linear:
            if ((s.array() <= 0).any() || (z.array() <= 0).any()) {
                return false;
            }
            b.w = s.cwiseQuotient(z).cwiseSqrt();
            b.lambda = s.cwiseProduct(z).cwiseSqrt();
            return true;
        case BlockKind::Lorentz: {
            const double s1 = s.tail(b.dim - 1).norm();
            const double z1 = z.tail(b.dim - 1).norm();
            const double sdet = (s(0) - s1) * (s(0) + s1);
            const double zdet = (z(0) - z1) * (z(0) + z1);
            if (!(sdet > 0) || !(zdet > 0) || s(0) <= 0 || z(0) <= 0) {
                return false;
            }
            const double snorm = std::sqrt(sdet);
            const double znorm = std::sqrt(zdet);
            const Vector sb = s / snorm;
            const Vector zb = z / znorm;
            const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
            Vector wb(b.dim);
            wb(0) = (sb(0) + zb(0)) / (2.0 * gamma);
            wb.tail(b.dim - 1) = (sb.tail(b.dim - 1) - zb.tail(b.dim - 1)) / (2.0 * gamma);
            b.eta = std::sqrt(snorm / znorm);
            b.v = wb;
            b.v(0) += 1.0;
            b.v /= std::sqrt(2.0 * (wb(0) + 1.0));
            b.lambda = apply_w(b, z, false);
            return true;
        }
        case BlockKind::Psd: {
            Eigen::LLT<Matrix> ls(smat(s, b.order));
            Eigen::LLT<Matrix> lz(smat(z, b.order));
            if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) {
                return false;
            }
            const Matrix lsm = ls.matrixL();
            const Matrix lzm = lz.matrixL();
            Eigen::JacobiSVD<Matrix> svd(lzm.transpose() * lsm, Eigen::ComputeFullU | Eigen::ComputeFullV);
            const Vector sig = svd.singularValues();
            if (!(sig.minCoeff() > 0)) {
                return false;
            }
            const Vector isq = sig.cwiseSqrt().cwiseInverse();
            b.r = lsm * svd.matrixV() * isq.asDiagonal();
            b.rinv = (lzm * svd.matrixU() * isq.asDiagonal()).transpose();
            b.lambda = svec(Matrix(sig.asDiagonal()));
            return true;
        }
    }
    return false;
}

// Dense (W'W)^{-1} restricted to the support rows.
// W^{-2} = (I + cp·pp' + cm·mm')/η² for a Lorentz block.  p and m span
// {e0, Jv} and are its eigenvectors there; writing it this way avoids the
// cancellation of the expanded form when the scaling point nears the boundary.
struct LorentzSplit {
    double cp = 0.0, cm = 0.0;
    Vector p, m;
};

LorentzSplit lorentz_split(const Block& b) {
    LorentzSplit out;
    out.p = Vector::Zero(b.dim);
    out.m = Vector::Zero(b.dim);
    const double a = b.v(0);
    const double bn = b.v.tail(b.dim - 1).norm();
    if (bn == 0.0) {
        return out;
    }
    const double big = std::pow(a + bn, 4);
    out.cp = big - 1.0;
    out.cm = 1.0 / big - 1.0;
    out.p(0) = 1.0 / kSqrt2;
    out.m(0) = 1.0 / kSqrt2;
    out.m.tail(b.dim - 1) = b.v.tail(b.dim - 1) / (bn * kSqrt2);
    out.p.tail(b.dim - 1) = -out.m.tail(b.dim - 1);
    return out;
}

Matrix inverse_scaling_block(const Block& b) {
    const Index k = static_cast<Index>(b.rows.size());
    Matrix d(k, k);
    switch (b.kind) {
        case BlockKind::Linear:
            d.setZero();
            for (Index i = 0; i < k; ++i) {
                const double wi = b.w(b.rows[i]);
                d(i, i) = 1.0 / (wi * wi);
            }
            break;
        case BlockKind::Lorentz: {
            const LorentzSplit ls = lorentz_split(b);
            const double e2 = 1.0 / (b.eta * b.eta);
            for (Index j = 0; j < k; ++j) {
                const Index rj = b.rows[j];
                for (Index i = 0; i < k; ++i) {
                    const Index ri = b.rows[i];
                    d(i, j) = e2 * ((ri == rj ? 1.0 : 0.0) + ls.cp * ls.p(ri) * ls.p(rj) + ls.cm * ls.m(ri) * ls.m(rj));
                }
            }
            break;
        }
        case BlockKind::Psd: {
            const Matrix t = b.rinv.transpose() * b.rinv;
            std::vector<std::pair<Index, Index>> idx(static_cast<std::size_t>(b.dim));
            for (Index j = 0; j < b.order; ++j) {
                for (Index i = j; i < b.order; ++i) {
                    idx[static_cast<std::size_t>(svec_index(b.order, i, j))] = {i, j};
                }
            }
            for (Index q = 0; q < k; ++q) {
                const auto [kk, ll] = idx[static_cast<std::size_t>(b.rows[q])];
                const double ckl = kk == ll ? 1.0 : kSqrt2;
                for (Index p = 0; p < k; ++p) {
                    const auto [ii, jj] = idx[static_cast<std::size_t>(b.rows[p])];
                    const double cij = ii == jj ? 1.0 : kSqrt2;
                    d(p, q) = 0.5 * cij * ckl * (t(ii, kk) * t(jj, ll) + t(ii, ll) * t(jj, kk));
                }
            }
            break;
        }
    }
    return d;
}

// ---- solver engine -----------------------------------------------------------

struct Direction {
    Vector x, y, z;
};

class Engine {
public:
    Engine(const ConicProgram& program, const InteriorPointSettings& settings)
        : program_(program), settings_(settings) {}

    ConicSolution run();

private:
    bool preprocess(ConicSolution& out);
    void build_blocks();
    Vector cone_segment(const Vector& v, const Block& b) const { return v.segment(b.offset, b.dim); }

    Vector apply_all(const Vector& v, Vector (*op)(const Block&, const Vector&, bool), bool transpose) const;
    Vector inverse_scaling(const Vector& v) const;  // (W'W)^{-1} v
    Vector scaling_square(const Vector& v) const;   // W'W v
    bool factor();
    Direction solve_kkt(const Vector& r1, const Vector& r2, const Vector& r3) const;
    Direction solve_once(const Vector& r1, const Vector& r2, const Vector& r3) const;
    double step_to_boundary(const Vector& s, const Vector& ds, const Vector& z, const Vector& dz) const;
    void shift_into_cone(Vector& v) const;
    ConicSolution finish(SolveStatus status, const std::string& message);

    const ConicProgram& program_;
    const InteriorPointSettings& settings_;

    Index n_ = 0, p_ = 0, m_ = 0;
    Matrix a_;  // equality rows (independent)
    Vector b_;
    std::vector<Index> eq_rows_;  // original row of each kept equality
    SparseMatrix g_;
    SparseMatrix gt_;
    Vector h_;
    Vector c_;
    std::vector<Index> conic_rows_;                // original row of each conic row
    std::vector<std::pair<Index, Index>> rsoc_;    // (conic offset) pairs transformed
    std::vector<Block> blocks_;
    double degree_ = 0;

    Matrix hmat_;
    Eigen::LLT<Matrix> hfac_;
    Matrix hinv_at_;  // H^{-1} A'
    double data_scale_ = 1.0;  // largest squared column norm of G
    Eigen::LDLT<Matrix> sfac_;

    // Iterate.
    Vector x_, y_, s_, z_;
    double tau_ = 1, kappa_ = 1;
    int iterations_ = 0;
    double pres_ = kInf, dres_ = kInf, gap_ = kInf, relgap_ = kInf, pcost_ = 0, dcost_ = 0;
};

bool Engine::preprocess(ConicSolution& out) {
    program_.check();
    n_ = program_.num_variables();
    c_ = program_.c;

    std::vector<int> row_kind(static_cast<std::size_t>(program_.num_rows()));
    Index offset = 0;
    for (const auto& cone : program_.cones) {
        for (Index i = 0; i < cone.dim; ++i) {
            row_kind[static_cast<std::size_t>(offset + i)] = cone.kind == ConeKind::Zero ? 0 : 1;
        }
        offset += cone.dim;
    }
    std::vector<Index> eq_index(row_kind.size(), -1), conic_index(row_kind.size(), -1);
    std::vector<Index> all_eq;
    for (Index r = 0; r < program_.num_rows(); ++r) {
        if (row_kind[static_cast<std::size_t>(r)] == 0) {
            eq_index[static_cast<std::size_t>(r)] = static_cast<Index>(all_eq.size());
            all_eq.push_back(r);
        } else {
            conic_index[static_cast<std::size_t>(r)] = static_cast<Index>(conic_rows_.size());
            conic_rows_.push_back(r);
        }
    }
    m_ = static_cast<Index>(conic_rows_.size());
    if (m_ == 0) {
        out.status = SolveStatus::NumericalFailure;
        out.message = "program has no conic rows";
        return false;
    }

    Matrix a_full = Matrix::Zero(static_cast<Index>(all_eq.size()), n_);
    Vector b_full(static_cast<Index>(all_eq.size()));
    for (std::size_t i = 0; i < all_eq.size(); ++i) {
        b_full(static_cast<Index>(i)) = program_.h(all_eq[i]);
    }
    std::vector<Triplet> trip;
    for (Index col = 0; col < program_.G.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(program_.G, col); it; ++it) {
            const auto r = static_cast<std::size_t>(it.row());
            if (row_kind[r] == 0) {
                a_full(eq_index[r], col) += it.value();
            } else {
                trip.emplace_back(conic_index[r], col, it.value());
            }
        }
    }
    g_.resize(m_, n_);
    g_.setFromTriplets(trip.begin(), trip.end());
    h_.resize(m_);
    for (Index i = 0; i < m_; ++i) {
        h_(i) = program_.h(conic_rows_[static_cast<std::size_t>(i)]);
    }

    // Rotated cones become standard second-order cones through the symmetric
    // orthogonal map (u, v) ↦ ((u+v)/√2, (u−v)/√2).
    offset = 0;
    std::vector<Triplet> tt;
    std::vector<char> touched(static_cast<std::size_t>(m_), 0);
    for (const auto& cone : program_.cones) {
        if (cone.kind == ConeKind::Zero) {
            continue;
        }
        if (cone.kind == ConeKind::RotatedSecondOrder) {
            const double k = 1.0 / kSqrt2;
            tt.emplace_back(offset, offset, k);
            tt.emplace_back(offset, offset + 1, k);
            tt.emplace_back(offset + 1, offset, k);
            tt.emplace_back(offset + 1, offset + 1, -k);
            touched[static_cast<std::size_t>(offset)] = touched[static_cast<std::size_t>(offset + 1)] = 1;
            rsoc_.emplace_back(offset, offset + 1);
        }
        offset += cone.dim;
    }
    if (!rsoc_.empty()) {
        for (Index i = 0; i < m_; ++i) {
            if (!touched[static_cast<std::size_t>(i)]) {
                tt.emplace_back(i, i, 1.0);
            }
        }
        SparseMatrix t(m_, m_);
        t.setFromTriplets(tt.begin(), tt.end());
        g_ = (t * g_).pruned();
        h_ = t * h_;
    }
    gt_ = g_.transpose();

    // Equality rows: drop dependent rows, detect inconsistency.
    if (a_full.rows() > 0) {
        Eigen::ColPivHouseholderQR<Matrix> qr(a_full.transpose());
        qr.setThreshold(1e-12);
        const Index rank = qr.rank();
        if (rank < a_full.rows()) {
            const Vector xls = a_full.completeOrthogonalDecomposition().solve(b_full);
            const Vector res = b_full - a_full * xls;
            if (res.norm() > 1e-9 * std::max(1.0, b_full.norm())) {
                out.status = SolveStatus::Infeasible;
                out.message = "equality constraints are inconsistent";
                out.x = Vector::Zero(n_);
                out.s = Vector::Zero(program_.num_rows());
                out.z = Vector::Zero(program_.num_rows());
                for (std::size_t i = 0; i < all_eq.size(); ++i) {
                    out.z(all_eq[i]) = -res(static_cast<Index>(i)) / res.squaredNorm();
                }
                return false;
            }
        }
        const auto& perm = qr.colsPermutation().indices();
        std::vector<Index> keep;
        for (Index i = 0; i < rank; ++i) {
            keep.push_back(perm(i));
        }
        std::sort(keep.begin(), keep.end());
        p_ = rank;
        a_.resize(p_, n_);
        b_.resize(p_);
        for (Index i = 0; i < p_; ++i) {
            a_.row(i) = a_full.row(keep[static_cast<std::size_t>(i)]);
            b_(i) = b_full(keep[static_cast<std::size_t>(i)]);
            eq_rows_.push_back(all_eq[static_cast<std::size_t>(keep[static_cast<std::size_t>(i)])]);
        }
    } else {
        a_.resize(0, n_);
        b_.resize(0);
    }

    build_blocks();
    return true;
}

void Engine::build_blocks() {
    for (Index j = 0; j < g_.outerSize(); ++j) {
        data_scale_ = std::max(data_scale_, g_.col(j).squaredNorm());
    }
    Index offset = 0;
    std::vector<Index> block_of(static_cast<std::size_t>(m_));
    for (const auto& cone : program_.cones) {
        if (cone.kind == ConeKind::Zero) {
            continue;
        }
        Block b;
        b.offset = offset;
        b.dim = cone.dim;
        b.order = cone.order;
        switch (cone.kind) {
            case ConeKind::NonNegative: b.kind = BlockKind::Linear; degree_ += static_cast<double>(cone.dim); break;
            case ConeKind::SecondOrder:
            case ConeKind::RotatedSecondOrder: b.kind = BlockKind::Lorentz; degree_ += 1; break;
            case ConeKind::Semidefinite: b.kind = BlockKind::Psd; degree_ += static_cast<double>(cone.order); break;
            case ConeKind::Zero: break;
        }
        for (Index i = 0; i < cone.dim; ++i) {
            block_of[static_cast<std::size_t>(offset + i)] = static_cast<Index>(blocks_.size());
        }
        reset_scaling(b);
        blocks_.push_back(std::move(b));
        offset += cone.dim;
    }

    // Supports.
    std::vector<std::vector<char>> row_used(blocks_.size());
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        row_used[k].assign(static_cast<std::size_t>(blocks_[k].dim), 0);
    }
    for (Index col = 0; col < g_.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(g_, col); it; ++it) {
            auto& b = blocks_[static_cast<std::size_t>(block_of[static_cast<std::size_t>(it.row())])];
            if (b.cols.empty() || b.cols.back() != col) {
                b.cols.push_back(col);
            }
            row_used[static_cast<std::size_t>(&b - blocks_.data())][static_cast<std::size_t>(it.row() - b.offset)] = 1;
        }
    }
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        auto& b = blocks_[k];
        std::vector<Index> local(static_cast<std::size_t>(b.dim), -1);
        for (Index i = 0; i < b.dim; ++i) {
            if (row_used[k][static_cast<std::size_t>(i)]) {
                local[static_cast<std::size_t>(i)] = static_cast<Index>(b.rows.size());
                b.rows.push_back(i);
            }
        }
        b.g = Matrix::Zero(static_cast<Index>(b.rows.size()), static_cast<Index>(b.cols.size()));
        for (std::size_t j = 0; j < b.cols.size(); ++j) {
            for (SparseMatrix::InnerIterator it(g_, b.cols[j]); it; ++it) {
                if (it.row() >= b.offset && it.row() < b.offset + b.dim) {
                    b.g(local[static_cast<std::size_t>(it.row() - b.offset)], static_cast<Index>(j)) = it.value();
                }
            }
        }
    }

    // Cache Gram matrices for the tallest second-order blocks while the budget lasts.
    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        if (blocks_[k].kind == BlockKind::Lorentz && blocks_[k].rows.size() > 8) {
            order.push_back(k);
        }
    }
    std::sort(order.begin(), order.end(),
              [&](std::size_t l, std::size_t r) { return blocks_[l].rows.size() > blocks_[r].rows.size(); });
    double budget = kGramBudget;
    for (std::size_t k : order) {
        auto& b = blocks_[k];
        const double need = static_cast<double>(b.cols.size()) * static_cast<double>(b.cols.size());
        if (need <= budget) {
            budget -= need;
            b.use_gram = true;
            b.gram.noalias() = b.g.transpose() * b.g;
        }
    }
}

Vector Engine::apply_all(const Vector& v, Vector (*op)(const Block&, const Vector&, bool), bool transpose) const {
    Vector out(v.size());
    for (const auto& b : blocks_) {
        out.segment(b.offset, b.dim) = op(b, cone_segment(v, b), transpose);
    }
    return out;
}

Vector Engine::inverse_scaling(const Vector& v) const {
    Vector out(v.size());
    for (const auto& b : blocks_) {
        out.segment(b.offset, b.dim) = apply_winv(b, apply_winv(b, cone_segment(v, b), true), false);
    }
    return out;
}

Vector Engine::scaling_square(const Vector& v) const {
    Vector out(v.size());
    for (const auto& b : blocks_) {
        out.segment(b.offset, b.dim) = apply_w(b, apply_w(b, cone_segment(v, b), false), true);
    }
    return out;
}

// Only the lower triangle of hmat_ is assembled; the Cholesky factorization reads nothing else.
bool Engine::factor() {
    hmat_.setZero(n_, n_);
    for (const auto& b : blocks_) {
        const auto nc = static_cast<Index>(b.cols.size());
        if (nc == 0) {
            continue;
        }
        if (b.use_gram) {
            const LorentzSplit ls = lorentz_split(b);
            const auto nr = static_cast<Index>(b.rows.size());
            Vector psub(nr), msub(nr);
            for (Index i = 0; i < nr; ++i) {
                psub(i) = ls.p(b.rows[static_cast<std::size_t>(i)]);
                msub(i) = ls.m(b.rows[static_cast<std::size_t>(i)]);
            }
            const double e2 = 1.0 / (b.eta * b.eta);
            const Vector gp = b.g.transpose() * psub;
            const Vector gm = b.g.transpose() * msub;
            const Vector a = (e2 * ls.cp) * gp;
            const Vector c = (e2 * ls.cm) * gm;
            for (Index j = 0; j < nc; ++j) {
                const Index cj = b.cols[static_cast<std::size_t>(j)];
                double* col = hmat_.col(cj).data();
                const double* gcol = b.gram.col(j).data();
                const double pj = gp(j);
                const double mj = gm(j);
                for (Index i = j; i < nc; ++i) {
                    col[b.cols[static_cast<std::size_t>(i)]] += e2 * gcol[i] + a(i) * pj + c(i) * mj;
                }
            }
            continue;
        }
        const Matrix d = inverse_scaling_block(b);
        Matrix dg;
        dg.noalias() = d * b.g;
        Matrix contrib(nc, nc);
        contrib.triangularView<Eigen::Lower>() = b.g.transpose() * dg;
        for (Index j = 0; j < nc; ++j) {
            const Index cj = b.cols[static_cast<std::size_t>(j)];
            for (Index i = j; i < nc; ++i) {
                hmat_(b.cols[static_cast<std::size_t>(i)], cj) += contrib(i, j);
            }
        }
    }
    // Tied to the data rather than to diag(H): near the boundary a few
    // rank-one terms make diag(H) huge without helping the other directions.
    double delta = settings_.regularization * data_scale_;
    for (int attempt = 0; attempt < 6; ++attempt) {
        Matrix reg = hmat_;
        reg.diagonal().array() += delta;
        hfac_.compute(reg);
        if (hfac_.info() == Eigen::Success) {
            break;
        }
        delta *= 100.0;
    }
    if (hfac_.info() != Eigen::Success) {
        return false;
    }
    if (p_ > 0) {
        hinv_at_ = hfac_.solve(a_.transpose());
        sfac_.compute(a_ * hinv_at_);
        if (sfac_.info() != Eigen::Success) {
            return false;
        }
    }
    return true;
}

Direction Engine::solve_once(const Vector& r1, const Vector& r2, const Vector& r3) const {
    Direction d;
    const Vector rhs = r1 + gt_ * inverse_scaling(r3);
    const Vector u = hfac_.solve(rhs);
    if (p_ > 0) {
        d.y = sfac_.solve(a_ * u - r2);
        d.x = u - hinv_at_ * d.y;
    } else {
        d.y.resize(0);
        d.x = u;
    }
    d.z = inverse_scaling(Vector(g_ * d.x - r3));
    return d;
}

Direction Engine::solve_kkt(const Vector& r1, const Vector& r2, const Vector& r3) const {
    Direction d = solve_once(r1, r2, r3);
    auto residual = [&](const Direction& cur, Vector& e1, Vector& e2, Vector& e3) {
        e1 = r1 - (a_.transpose() * cur.y + gt_ * cur.z);
        e2 = r2 - a_ * cur.x;
        e3 = r3 - (g_ * cur.x - scaling_square(cur.z));
        return std::sqrt(e1.squaredNorm() + e2.squaredNorm() + e3.squaredNorm());
    };
    const double target = 1e-14 * std::max(1.0, std::sqrt(r1.squaredNorm() + r2.squaredNorm() + r3.squaredNorm()));
    Vector e1, e2, e3;
    double err = residual(d, e1, e2, e3);
    for (int k = 0; k < settings_.refinement_steps && err > target; ++k) {
        const Direction c = solve_once(e1, e2, e3);
        Direction trial{d.x + c.x, d.y + c.y, d.z + c.z};
        Vector f1, f2, f3;
        const double next = residual(trial, f1, f2, f3);
        if (!(next < 0.5 * err)) {
            if (next < err) {
                d = std::move(trial);
            }
            break;
        }
        d = std::move(trial);
        err = next;
        e1 = std::move(f1);
        e2 = std::move(f2);
        e3 = std::move(f3);
    }
    return d;
}

double Engine::step_to_boundary(const Vector& s, const Vector& ds, const Vector& z, const Vector& dz) const {
    double alpha = kInf;
    for (const auto& b : blocks_) {
        alpha = std::min(alpha, max_step(b, cone_segment(s, b), cone_segment(ds, b)));
        alpha = std::min(alpha, max_step(b, cone_segment(z, b), cone_segment(dz, b)));
    }
    return alpha;
}

void Engine::shift_into_cone(Vector& v) const {
    double lmin = kInf;
    for (const auto& b : blocks_) {
        lmin = std::min(lmin, min_eig(b, cone_segment(v, b)));
    }
    if (lmin <= 1e-8 * std::max(1.0, v.norm())) {
        const double shift = 1.0 - std::min(lmin, 0.0);
        for (const auto& b : blocks_) {
            v.segment(b.offset, b.dim) += shift * identity_element(b);
        }
    }
}

ConicSolution Engine::finish(SolveStatus status, const std::string& message) {
    ConicSolution out;
    out.status = status;
    out.message = message;
    out.iterations = iterations_;
    const Index rows = program_.num_rows();
    out.s = Vector::Zero(rows);
    out.z = Vector::Zero(rows);

    double scale = 1.0;
    if (status == SolveStatus::Optimal || status == SolveStatus::NumericalFailure) {
        scale = 1.0 / tau_;
    } else if (status == SolveStatus::Infeasible) {
        scale = -1.0 / (h_.dot(z_) + b_.dot(y_));
    } else if (status == SolveStatus::Unbounded) {
        scale = -1.0 / c_.dot(x_);
    }
    out.x = x_ * scale;
    Vector s = s_ * scale;
    Vector z = z_ * scale;
    for (const auto& [u, v] : rsoc_) {
        for (Vector* w : {&s, &z}) {
            const double a = (*w)(u), bb = (*w)(v);
            (*w)(u) = (a + bb) / kSqrt2;
            (*w)(v) = (a - bb) / kSqrt2;
        }
    }
    for (Index i = 0; i < m_; ++i) {
        out.s(conic_rows_[static_cast<std::size_t>(i)]) = s(i);
        out.z(conic_rows_[static_cast<std::size_t>(i)]) = z(i);
    }
    for (Index i = 0; i < p_; ++i) {
        out.z(eq_rows_[static_cast<std::size_t>(i)]) = y_(i) * scale;
    }
    out.primal_objective = c_.dot(x_) / tau_ + program_.objective_offset;
    out.dual_objective = -(h_.dot(z_) + b_.dot(y_)) / tau_ + program_.objective_offset;
    out.primal_residual = pres_;
    out.dual_residual = dres_;
    out.gap = gap_;
    out.relative_gap = relgap_;
    return out;
}

ConicSolution Engine::run() {
    ConicSolution early;
    if (!preprocess(early)) {
        return early;
    }
    const auto& st = settings_;

    // Starting point from two least-squares problems under identity scaling.
    if (!factor()) {
        return finish(SolveStatus::NumericalFailure, "initial factorization failed");
    }
    {
        const Direction pd = solve_kkt(Vector::Zero(n_), b_, h_);
        x_ = pd.x;
        s_ = -pd.z;
        const Direction dd = solve_kkt(-c_, Vector::Zero(p_), Vector::Zero(m_));
        y_ = dd.y;
        z_ = dd.z;
        shift_into_cone(s_);
        shift_into_cone(z_);
    }
    tau_ = 1.0;
    kappa_ = 1.0;

    const double resx0 = std::max(1.0, c_.norm());
    const double resy0 = std::max(1.0, b_.norm());
    const double resz0 = std::max(1.0, h_.norm());
    std::ostream* log = st.log;
    if (log) {
        *log << " it      pcost          dcost         gap      pres     dres      k/t     step\n";
    }

    // Best iterate seen so far; restored when the run breaks down late.
    struct Snapshot {
        Vector x, y, z, s;
        double tau = 0, kappa = 0, pres = kInf, dres = kInf, gap = kInf, relgap = kInf, pcost = 0, dcost = 0;
        double merit = kInf;
    } best;
    auto merit = [&] {
        return std::max({pres_ / st.feasibility_tol, dres_ / st.feasibility_tol,
                         std::min(gap_ / st.absolute_gap_tol, relgap_ / st.relative_gap_tol)});
    };
    auto restore_best = [&] {
        if (!std::isfinite(best.merit) || merit() <= best.merit) {
            return;
        }
        x_ = best.x;
        y_ = best.y;
        z_ = best.z;
        s_ = best.s;
        tau_ = best.tau;
        kappa_ = best.kappa;
        pres_ = best.pres;
        dres_ = best.dres;
        gap_ = best.gap;
        relgap_ = best.relgap;
        pcost_ = best.pcost;
        dcost_ = best.dcost;
    };

    double last_step = 1.0;
    int stalls = 0;
    int since_best = 0;
    for (iterations_ = 0; iterations_ <= st.max_iterations; ++iterations_) {
        const Vector rx = a_.transpose() * y_ + gt_ * z_ + c_ * tau_;
        const Vector ry = a_ * x_ - b_ * tau_;
        const Vector rz = s_ + g_ * x_ - h_ * tau_;
        const double cx = c_.dot(x_);
        const double hzby = h_.dot(z_) + b_.dot(y_);
        const double rt = kappa_ + cx + hzby;
        const double sz = s_.dot(z_);
        const double mu = (sz + tau_ * kappa_) / (degree_ + 1.0);

        pcost_ = cx / tau_;
        dcost_ = -hzby / tau_;
        gap_ = sz / (tau_ * tau_);
        relgap_ = gap_ / std::max(1.0, std::min(std::abs(pcost_), std::abs(dcost_)));
        // Residuals relative to the size of the terms they are built from.
        const Vector ax = a_ * x_;
        const Vector gx = g_ * x_;
        const Vector aty_gtz = a_.transpose() * y_ + gt_ * z_;
        pres_ = std::max(ry.norm() / std::max(resy0 * tau_, ax.norm()),
                         rz.norm() / std::max({resz0 * tau_, gx.norm(), s_.norm()}));
        dres_ = rx.norm() / std::max(resx0 * tau_, aty_gtz.norm());
        const double pinf = hzby < 0 ? aty_gtz.norm() / resx0 / -hzby : kInf;
        const double dinf =
            cx < 0 ? std::max((a_ * x_).norm() / resy0, (g_ * x_ + s_).norm() / resz0) / -cx : kInf;

        if (log) {
            *log << std::setw(3) << iterations_ << std::scientific << std::setprecision(6) << std::setw(15) << pcost_
                 << std::setw(15) << dcost_ << std::setprecision(2) << std::setw(10) << gap_ << std::setw(9) << pres_
                 << std::setw(9) << dres_ << std::setw(9) << kappa_ / tau_ << std::setw(9) << last_step << '\n'
                 << std::defaultfloat;
        }

        if (const double m = merit(); m < best.merit) {
            best = Snapshot{x_, y_, z_, s_, tau_, kappa_, pres_, dres_, gap_, relgap_, pcost_, dcost_, m};
            since_best = 0;
        } else {
            ++since_best;
        }

        const bool gap_ok = gap_ <= st.absolute_gap_tol || relgap_ <= st.relative_gap_tol;
        if (pres_ <= st.feasibility_tol && dres_ <= st.feasibility_tol && gap_ok) {
            return finish(SolveStatus::Optimal, "converged");
        }
        if (pinf <= st.feasibility_tol) {
            return finish(SolveStatus::Infeasible, "primal infeasibility certificate found");
        }
        if (dinf <= st.feasibility_tol) {
            return finish(SolveStatus::Unbounded, "dual infeasibility certificate found");
        }
        auto give_up = [&](const std::string& why) {
            const double f = st.inaccurate_factor;
            const double pinf_now = pinf;
            const double dinf_now = dinf;
            restore_best();
            const bool close = pres_ <= f * st.feasibility_tol && dres_ <= f * st.feasibility_tol &&
                               (gap_ <= f * st.absolute_gap_tol || relgap_ <= f * st.relative_gap_tol);
            if (close) {
                return finish(SolveStatus::Optimal, "converged to reduced accuracy (" + why + ")");
            }
            if (pinf_now <= f * st.feasibility_tol) {
                return finish(SolveStatus::Infeasible, "primal infeasibility certificate (reduced accuracy)");
            }
            if (dinf_now <= f * st.feasibility_tol) {
                return finish(SolveStatus::Unbounded, "dual infeasibility certificate (reduced accuracy)");
            }
            return finish(SolveStatus::NumericalFailure, why);
        };
        if (iterations_ == st.max_iterations) {
            return give_up("iteration limit reached");
        }
        if (since_best >= 3 && best.merit <= st.inaccurate_factor) {
            return give_up("no progress in three iterations");
        }

        // Scaling and factorization.
        for (auto& b : blocks_) {
            if (!update_scaling(b, cone_segment(s_, b), cone_segment(z_, b))) {
                return give_up("iterate left the cone");
            }
        }
        if (!factor()) {
            return give_up("reduced KKT factorization failed");
        }
        const Direction d1 = solve_kkt(-c_, b_, h_);
        const double denom_base = kappa_ / tau_ - c_.dot(d1.x) - b_.dot(d1.y) - h_.dot(d1.z);

        Vector lam(m_), lamsq(m_);
        for (const auto& b : blocks_) {
            lam.segment(b.offset, b.dim) = b.lambda;
            lamsq.segment(b.offset, b.dim) = lambda_square(b);
        }

        // Solves the full Newton system for a given ξ (per-block λ-space target) and τκ target.
        struct Step {
            Vector dx, dy, dz, ds;
            double dtau, dkappa;
        };
        auto newton = [&](double sigma, const Vector& xi, double trhs) {
            const double f = 1.0 - sigma;
            const Vector wt_xi = apply_all(xi, apply_w, true);
            const Direction d2 = solve_kkt(-f * rx, -f * ry, -f * rz - wt_xi);
            Step out;
            out.dtau = (f * rt + trhs / tau_ + c_.dot(d2.x) + b_.dot(d2.y) + h_.dot(d2.z)) / denom_base;
            out.dx = d2.x + out.dtau * d1.x;
            out.dy = d2.y + out.dtau * d1.y;
            out.dz = d2.z + out.dtau * d1.z;
            out.ds = apply_all(Vector(xi - apply_all(out.dz, apply_w, false)), apply_w, true);
            out.dkappa = (trhs - kappa_ * out.dtau) / tau_;
            return out;
        };
        auto step_length = [&](const Step& d) {
            double alpha = step_to_boundary(s_, d.ds, z_, d.dz);
            if (d.dtau < 0) {
                alpha = std::min(alpha, -tau_ / d.dtau);
            }
            if (d.dkappa < 0) {
                alpha = std::min(alpha, -kappa_ / d.dkappa);
            }
            return alpha;
        };

        // Predictor.
        const Step aff = newton(0.0, -lam, -tau_ * kappa_);
        const double alpha_aff = std::min(1.0, step_length(aff));
        const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);

        // Corrector.
        Vector xi(m_);
        const Vector ws = apply_all(aff.ds, apply_winv, true);
        const Vector wz = apply_all(aff.dz, apply_w, false);
        for (const auto& b : blocks_) {
            const Vector corr = jordan_product(b, cone_segment(ws, b), cone_segment(wz, b));
            const Vector target = sigma * mu * identity_element(b) - lambda_square(b) - corr;
            xi.segment(b.offset, b.dim) = jordan_divide(b, target);
        }
        const double trhs = sigma * mu - tau_ * kappa_ - aff.dtau * aff.dkappa;
        const Step cc = newton(sigma, xi, trhs);
        const double alpha = std::min(1.0, st.step_fraction * step_length(cc));
        last_step = alpha;

        x_ += alpha * cc.dx;
        y_ += alpha * cc.dy;
        z_ += alpha * cc.dz;
        s_ += alpha * cc.ds;
        tau_ += alpha * cc.dtau;
        kappa_ += alpha * cc.dkappa;

        if (alpha < 1e-8) {
            if (++stalls >= 3) {
                return give_up("step length collapsed");
            }
        } else {
            stalls = 0;
        }
        // Keep the embedding well scaled.
        if (!(tau_ > 0) || !(kappa_ > 0) || !std::isfinite(tau_)) {
            return give_up("homogeneous variables left the positive orthant");
        }
    }
    return finish(SolveStatus::NumericalFailure, "iteration limit reached");
}

}  // namespace

ConicSolution InteriorPointSolver::solve(const ConicProgram& program) const {
    Engine engine(program, settings_);
    return engine.run();
}

}  // namespace covsteer
