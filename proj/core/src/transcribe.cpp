#include "covsteer/transcribe.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "covsteer/normal_quantile.hpp"

namespace covsteer {

using Index = Eigen::Index;

// ---- DecisionLayout ----------------------------------------------------------

DecisionLayout::DecisionLayout(int horizon, Index nx, Index nu, int bandwidth)
    : horizon_(horizon), nx_(nx), nu_(nu), bandwidth_(bandwidth < 0 ? kFull : bandwidth) {
    if (horizon < 1 || nx < 1 || nu < 1) {
        throw DimensionError("DecisionLayout: horizon, n_x and n_u must be positive");
    }
    block_start_.assign(static_cast<std::size_t>(horizon_) * static_cast<std::size_t>(horizon_ + 1), -1);
    Index offset = 0;
    for (int k = 0; k < horizon_; ++k) {
        const auto [lo, hi] = block_range(k);
        for (int i = lo; i <= hi; ++i) {
            blocks_.emplace_back(k, i);
            block_start_[static_cast<std::size_t>(k * (horizon_ + 1) + i)] = offset;
            offset += nu_ * nx_;
        }
    }
    num_feedback_ = offset;
}

std::pair<int, int> DecisionLayout::block_range(int k) const {
    const int lo = bandwidth_ == kFull ? 0 : std::max(0, k - bandwidth_);
    return {lo, k};
}

bool DecisionLayout::has_block(int k, int i) const {
    if (k < 0 || k >= horizon_ || i < 0 || i > horizon_) {
        return false;
    }
    return block_start_[static_cast<std::size_t>(k * (horizon_ + 1) + i)] >= 0;
}

Index DecisionLayout::f_index(Index row, Index col) const {
    const auto k = static_cast<int>(row / nu_);
    const auto i = static_cast<int>(col / nx_);
    if (!has_block(k, i)) {
        return -1;
    }
    return block_start_[static_cast<std::size_t>(k * (horizon_ + 1) + i)] + (row % nu_) * nx_ + (col % nx_);
}

Vector DecisionLayout::pack(const Matrix& F, const Vector& M) const {
    linalg::require_shape(F, f_rows(), f_cols(), "DecisionLayout::pack: F");
    if (M.size() != f_rows()) {
        throw DimensionError("DecisionLayout::pack: M has wrong length");
    }
    Vector x(size());
    for (const auto& [k, i] : blocks_) {
        const Index start = block_start_[static_cast<std::size_t>(k * (horizon_ + 1) + i)];
        for (Index a = 0; a < nu_; ++a) {
            for (Index b = 0; b < nx_; ++b) {
                x(start + a * nx_ + b) = F(k * nu_ + a, i * nx_ + b);
            }
        }
    }
    x.tail(f_rows()) = M;
    return x;
}

void DecisionLayout::unpack(const Vector& x, Matrix& F, Vector& M) const {
    if (x.size() < size()) {
        throw DimensionError("DecisionLayout::unpack: vector too short");
    }
    F = Matrix::Zero(f_rows(), f_cols());
    for (const auto& [k, i] : blocks_) {
        const Index start = block_start_[static_cast<std::size_t>(k * (horizon_ + 1) + i)];
        for (Index a = 0; a < nu_; ++a) {
            for (Index b = 0; b < nx_; ++b) {
                F(k * nu_ + a, i * nx_ + b) = x(start + a * nx_ + b);
            }
        }
    }
    M = x.segment(num_feedback_, f_rows());
}

Matrix DecisionLayout::mask(const Matrix& F) const {
    Matrix out;
    Vector M;
    unpack(pack(F, Vector::Zero(f_rows())), out, M);
    return out;
}

// ---- ConeRows ---------------------------------------------------------------

double ConeRows::margin(const Vector& x) const {
    const Vector s = h - G * x.head(G.cols());
    switch (kind) {
        case ConeKind::SecondOrder: return s(0) - s.tail(s.size() - 1).norm();
        case ConeKind::Semidefinite: return linalg::min_eigenvalue(smat(s, order));
        case ConeKind::NonNegative: return s.minCoeff();
        case ConeKind::RotatedSecondOrder:
            return std::min({s(0), s(1), 2.0 * s(0) * s(1) - s.tail(s.size() - 2).squaredNorm()});
        case ConeKind::Zero: return -s.cwiseAbs().maxCoeff();
    }
    return 0.0;
}

namespace transcribe {
namespace {

// Visits every allowed F(r, c) with its flat index.
template <class Fn>
void for_each_feedback(const DecisionLayout& layout, Fn&& fn) {
    const Index nu = layout.nu();
    const Index nx = layout.nx();
    for (const auto& [k, i] : layout.blocks()) {
        const Index base = layout.f_index(k * nu, i * nx);
        for (Index a = 0; a < nu; ++a) {
            for (Index b = 0; b < nx; ++b) {
                fn(k * nu + a, i * nx + b, base + a * nx + b);
            }
        }
    }
}

void require_layout(const LiftedOperators& ops, const DecisionLayout& layout) {
    if (layout.horizon() != ops.horizon || layout.nx() != ops.nx || layout.nu() != ops.nu) {
        throw DimensionError("decision layout does not match the lifted operators");
    }
}

}  // namespace

Matrix effective_factor(const Matrix& S_half) {
    // R from S_half = QR satisfies R'R = S_half'S_half and is upper trapezoidal,
    // so column c of R touches at most c + 1 rows.
    Eigen::HouseholderQR<Matrix> qr(S_half);
    const Index rank_bound = std::min(S_half.rows(), S_half.cols());
    const Matrix R = qr.matrixQR().topRows(rank_bound).triangularView<Eigen::Upper>();
    const double top = R.size() ? R.rowwise().norm().maxCoeff() : 0.0;
    std::vector<Index> keep;
    for (Index i = 0; i < R.rows(); ++i) {
        if (R.row(i).norm() > 1e-9 * top) {
            keep.push_back(i);
        }
    }
    Matrix out(static_cast<Index>(keep.size()), S_half.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        out.row(static_cast<Index>(i)) = R.row(keep[i]);
    }
    return out;
}

LinearRows mean_constraint(const LiftedOperators& ops, const DecisionLayout& layout, const Vector& prior_mean,
                           const Vector& target_mean) {
    require_layout(ops, layout);
    if (prior_mean.size() != ops.nx || target_mean.size() != ops.nx) {
        throw DimensionError("mean_constraint: mean vectors must have n_x entries");
    }
    const int N = ops.horizon;
    LinearRows rows;
    rows.E = Matrix::Zero(ops.nx, layout.size());
    rows.E.rightCols(layout.num_feedforward()) = ops.select_rows(ops.B, N);
    rows.e = target_mean - ops.select_rows(ops.A, N) * prior_mean;
    return rows;
}

Matrix feedback_null_basis(const LiftedOperators& ops, const DecisionLayout& layout, int k, double tolerance) {
    const auto [lo, hi] = layout.block_range(k);
    const Index c0 = lo * layout.nx();
    const Index width = (hi - lo + 1) * layout.nx();
    Eigen::SelfAdjointEigenSolver<Matrix> es(ops.S.block(c0, c0, width, width));
    const Vector& ev = es.eigenvalues();
    const double top = std::max(ev.maxCoeff(), 0.0);
    Index d = 0;
    while (d < width && ev(d) <= tolerance * top) {
        ++d;
    }
    return es.eigenvectors().leftCols(d);
}

QuadraticObjective objective(const LiftedOperators& ops, const DecisionLayout& layout, const Vector& prior_mean,
                             double null_tolerance) {
    require_layout(ops, layout);
    const Matrix Sh = effective_factor(ops.S_half);
    const Index r = Sh.rows();
    const Index nU = ops.input_dim();

    // P = R + B'QB = Ph'Ph.  Ph = U' with U U' = P upper triangular (Cholesky
    // in reversed order), so Ph(a, r) vanishes for a < r.  Late inputs then
    // touch few rows, which keeps W sparse.
    const Matrix QB = ops.Q * ops.B;
    const Matrix P = linalg::symmetrized(ops.R + ops.B.transpose() * QB);
    Eigen::LLT<Matrix> llt(P.reverse());
    if (llt.info() != Eigen::Success) {
        throw std::invalid_argument("objective: R + B'QB is not positive definite");
    }
    const Matrix U = Matrix(llt.matrixL()).reverse();
    const Matrix Ph = U.transpose();

    // F part: ‖Ph F Sh' + Ph^{-T} B'Q Sh'‖², row (i, a) ↦ i·nU + a.
    // M part: ‖Ph M + Ph^{-T} B'Q A x̄_0‖².
    const auto Ut = U.triangularView<Eigen::Upper>();
    const Matrix Z = Ut.solve(QB.transpose() * Sh.transpose());
    const Vector mean_free = ops.A * prior_mean;
    const Vector zm = Ut.solve(QB.transpose() * mean_free);

    QuadraticObjective obj;
    const Index rows = r * nU + nU;
    obj.W.resize(rows, layout.size());
    obj.w.resize(rows);
    std::vector<Triplet> trip;
    for_each_feedback(layout, [&](Index fr, Index fc, Index idx) {
        for (Index i = 0; i < r; ++i) {
            const double sv = Sh(i, fc);
            if (sv == 0.0) {
                continue;
            }
            for (Index a = fr; a < nU; ++a) {
                const double pv = Ph(a, fr);
                if (pv != 0.0) {
                    trip.emplace_back(i * nU + a, idx, pv * sv);
                }
            }
        }
    });
    for (Index i = 0; i < r; ++i) {
        obj.w.segment(i * nU, nU) = Z.col(i);
    }
    for (Index b = 0; b < nU; ++b) {
        for (Index a = b; a < nU; ++a) {
            if (Ph(a, b) != 0.0) {
                trip.emplace_back(r * nU + a, layout.m_index(b), Ph(a, b));
            }
        }
    }
    obj.w.tail(nU) = zm;
    obj.W.setFromTriplets(trip.begin(), trip.end());

    std::vector<Triplet> null_trip;
    Index null_row = 0;
    for (int k = 0; k < layout.horizon(); ++k) {
        const Matrix Nk = feedback_null_basis(ops, layout, k, null_tolerance);
        const Index c0 = layout.block_range(k).first * layout.nx();
        for (Index a = 0; a < layout.nu(); ++a) {
            const Index fr = k * layout.nu() + a;
            for (Index v = 0; v < Nk.cols(); ++v, ++null_row) {
                for (Index c = 0; c < Nk.rows(); ++c) {
                    if (Nk(c, v) != 0.0) {
                        null_trip.emplace_back(null_row, layout.f_index(fr, c0 + c), Nk(c, v));
                    }
                }
            }
        }
    }
    obj.null_rows.resize(null_row, layout.size());
    obj.null_rows.setFromTriplets(null_trip.begin(), null_trip.end());

    const double trace_qs = (ops.Q.cwiseProduct(ops.S)).sum();
    obj.constant = mean_free.dot(ops.Q * mean_free) + trace_qs - obj.w.squaredNorm();
    return obj;
}

ConeRows terminal_cov_constraint(const LiftedOperators& ops, const DecisionLayout& layout, const Matrix& target_cov_bound,
                                 const Matrix& terminal_error_cov, TerminalNorm norm) {
    require_layout(ops, layout);
    const Index nx = ops.nx;
    linalg::require_shape(target_cov_bound, nx, nx, "terminal_cov_constraint: P_f");
    linalg::require_shape(terminal_error_cov, nx, nx, "terminal_cov_constraint: P~_N");
    const Matrix margin = linalg::symmetrized(target_cov_bound - terminal_error_cov);
    if (!linalg::is_pd(margin)) {
        throw std::invalid_argument("terminal_cov_constraint: P_f - P~_N is not positive definite");
    }
    const Matrix root = linalg::inverse_sqrt(margin);
    const int N = ops.horizon;
    const Matrix Sh = effective_factor(ops.S_half);
    const Index r = Sh.rows();

    // Y = Sh (I + BF)' E_N' Δ^{-1/2} = Y0 + Sh F' H.
    Matrix EN = Matrix::Zero(nx, ops.state_dim());
    EN.middleCols(ops.state_offset(N), nx).setIdentity();
    const Matrix Y0 = Sh * EN.transpose() * root;
    const Matrix H = ops.select_rows(ops.B, N).transpose() * root;

    ConeRows rows;
    rows.label = "terminal covariance";
    std::vector<Triplet> trip;
    auto emit = [&](auto&& row_of, double scale) {
        for_each_feedback(layout, [&](Index fr, Index fc, Index idx) {
            for (Index l = 0; l < nx; ++l) {
                const double hv = H(fr, l);
                if (hv == 0.0) {
                    continue;
                }
                for (Index i = 0; i < r; ++i) {
                    const double sv = Sh(i, fc);
                    if (sv != 0.0) {
                        trip.emplace_back(row_of(i, l), idx, -scale * sv * hv);
                    }
                }
            }
        });
    };

    if (norm == TerminalNorm::Spectral) {
        // [I, Y'; Y, I] ⪰ 0  ⟺  Y'Y ⪯ I.
        const Index p = nx + r;
        rows.kind = ConeKind::Semidefinite;
        rows.order = p;
        rows.h = Vector::Zero(p * (p + 1) / 2);
        for (Index d = 0; d < p; ++d) {
            rows.h(svec_index(p, d, d)) = 1.0;
        }
        const double c = std::numbers::sqrt2;
        auto row_of = [&](Index i, Index l) { return svec_index(p, nx + i, l); };
        for (Index l = 0; l < nx; ++l) {
            for (Index i = 0; i < r; ++i) {
                rows.h(row_of(i, l)) = c * Y0(i, l);
            }
        }
        rows.G.resize(rows.h.size(), layout.size());
        emit(row_of, c);
    } else {
        rows.kind = ConeKind::SecondOrder;
        rows.h.resize(1 + r * nx);
        rows.h(0) = 1.0;
        auto row_of = [&](Index i, Index l) { return 1 + l * r + i; };
        for (Index l = 0; l < nx; ++l) {
            for (Index i = 0; i < r; ++i) {
                rows.h(row_of(i, l)) = Y0(i, l);
            }
        }
        rows.G.resize(rows.h.size(), layout.size());
        emit(row_of, 1.0);
    }
    rows.G.setFromTriplets(trip.begin(), trip.end());
    return rows;
}

ConeRows chance_constraint_rows(const LiftedOperators& ops, const DecisionLayout& layout, const FilterSchedule& schedule,
                                const Vector& prior_mean, const HalfPlaneConstraint& constraint, int k) {
    require_layout(ops, layout);
    if (!(constraint.risk > 0.0 && constraint.risk < 0.5)) {
        throw std::invalid_argument("chance_constraint_rows: risk must lie in (0, 0.5)");
    }
    if (k < 0 || k > ops.horizon) {
        throw std::out_of_range("chance_constraint_rows: step outside 0..N");
    }
    if (constraint.alpha.size() != ops.nx) {
        throw DimensionError("chance_constraint_rows: alpha must have n_x entries");
    }
    const double q = normal_quantile(1.0 - constraint.risk);
    const Matrix Sh = effective_factor(ops.S_half);
    const Index r = Sh.rows();
    const Vector& a = constraint.alpha;

    Vector Eka = Vector::Zero(ops.state_dim());
    Eka.segment(ops.state_offset(k), ops.nx) = a;
    const Vector g = ops.B.transpose() * Eka;  // B'E_k'α
    const Vector err = linalg::psd_factor(schedule.posterior_error_cov[static_cast<std::size_t>(k)]) * a;

    ConeRows rows;
    rows.kind = ConeKind::SecondOrder;
    std::ostringstream label;
    label << "chance constraint " << "j at step " << k;
    rows.label = label.str();
    rows.h.resize(2 + r);
    rows.h(0) = (constraint.beta - a.dot(ops.select(ops.A * prior_mean, k))) / q;
    rows.h.segment(1, r) = Sh * Eka;
    rows.h(1 + r) = err.norm();

    std::vector<Triplet> trip;
    for (Index j = 0; j < ops.input_dim(); ++j) {
        if (g(j) != 0.0) {
            trip.emplace_back(0, layout.m_index(j), g(j) / q);
        }
    }
    for_each_feedback(layout, [&](Index fr, Index fc, Index idx) {
        const double gv = g(fr);
        if (gv == 0.0) {
            return;
        }
        for (Index i = 0; i < r; ++i) {
            const double sv = Sh(i, fc);
            if (sv != 0.0) {
                trip.emplace_back(1 + i, idx, -sv * gv);
            }
        }
    });
    rows.G.resize(rows.h.size(), layout.size());
    rows.G.setFromTriplets(trip.begin(), trip.end());
    return rows;
}

ConicProgram lower_to_conic(const QuadraticObjective& objective, const LinearRows& equalities,
                            const std::vector<ConeRows>& cones, const DecisionLayout& layout) {
    const Index n = layout.size();
    if (objective.W.cols() != n || (objective.null_rows.size() > 0 && objective.null_rows.cols() != n) ||
        equalities.E.cols() != n || equalities.E.rows() != equalities.e.size()) {
        throw DimensionError("lower_to_conic: pieces do not share the decision layout");
    }
    for (const auto& c : cones) {
        if (c.G.cols() != n || c.G.rows() != c.h.size()) {
            throw DimensionError("lower_to_conic: cone '" + c.label + "' does not match the decision layout");
        }
    }
    const Index t = n;  // epigraph variable
    ConicProgram prog;
    prog.c = Vector::Zero(n + 1);
    prog.c(t) = 1.0;
    prog.objective_offset = objective.constant;

    const Index obj_rows = objective.W.rows() + objective.null_rows.rows();
    Index rows = equalities.E.rows() + 2 + obj_rows;
    for (const auto& c : cones) {
        rows += c.h.size();
    }
    prog.h.resize(rows);
    std::vector<Triplet> trip;
    Index offset = 0;

    if (equalities.E.rows() > 0) {
        for (Index i = 0; i < equalities.E.rows(); ++i) {
            for (Index j = 0; j < n; ++j) {
                if (equalities.E(i, j) != 0.0) {
                    trip.emplace_back(offset + i, j, equalities.E(i, j));
                }
            }
        }
        prog.h.segment(offset, equalities.e.size()) = equalities.e;
        prog.cones.push_back(Cone::zero(equalities.E.rows()));
        offset += equalities.E.rows();
    }

    // 2·t·(1/2) ≥ ‖Wx + w‖².
    trip.emplace_back(offset, t, -1.0);
    prog.h(offset) = 0.0;
    prog.h(offset + 1) = 0.5;
    for (Index col = 0; col < objective.W.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(objective.W, col); it; ++it) {
            trip.emplace_back(offset + 2 + it.row(), col, -it.value());
        }
    }
    for (Index col = 0; col < objective.null_rows.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(objective.null_rows, col); it; ++it) {
            trip.emplace_back(offset + 2 + objective.W.rows() + it.row(), col, -it.value());
        }
    }
    prog.h.segment(offset + 2, obj_rows).setZero();
    prog.h.segment(offset + 2, objective.w.size()) = objective.w;
    prog.cones.push_back(Cone::rotated(2 + obj_rows));
    offset += 2 + obj_rows;

    for (const auto& c : cones) {
        for (Index col = 0; col < c.G.outerSize(); ++col) {
            for (SparseMatrix::InnerIterator it(c.G, col); it; ++it) {
                trip.emplace_back(offset + it.row(), col, it.value());
            }
        }
        prog.h.segment(offset, c.h.size()) = c.h;
        switch (c.kind) {
            case ConeKind::Semidefinite: prog.cones.push_back(Cone::semidefinite(c.order)); break;
            case ConeKind::SecondOrder: prog.cones.push_back(Cone::second_order(c.h.size())); break;
            case ConeKind::RotatedSecondOrder: prog.cones.push_back(Cone::rotated(c.h.size())); break;
            case ConeKind::NonNegative: prog.cones.push_back(Cone::nonnegative(c.h.size())); break;
            case ConeKind::Zero: prog.cones.push_back(Cone::zero(c.h.size())); break;
        }
        offset += c.h.size();
    }
    prog.G.resize(rows, n + 1);
    prog.G.setFromTriplets(trip.begin(), trip.end());

    prog.variables.resize(static_cast<std::size_t>(n + 1));
    for_each_feedback(layout, [&](Index fr, Index fc, Index idx) {
        prog.variables[static_cast<std::size_t>(idx)] = {VariableKind::Feedback, fr, fc};
    });
    for (Index j = 0; j < layout.num_feedforward(); ++j) {
        prog.variables[static_cast<std::size_t>(layout.m_index(j))] = {VariableKind::Feedforward, j, 0};
    }
    prog.variables[static_cast<std::size_t>(t)] = {VariableKind::Auxiliary, 0, 0};
    prog.check();
    return prog;
}

}  // namespace transcribe

Transcription transcribe_problem(const SteeringProblem& problem, const FilterSchedule& schedule,
                                 const LiftedOperators& ops, const TranscribeOptions& options) {
    Transcription tr;
    tr.layout = DecisionLayout(ops.horizon, ops.nx, ops.nu, options.bandwidth);
    tr.mean = transcribe::mean_constraint(ops, tr.layout, problem.prior_mean, problem.target_mean);
    tr.objective = transcribe::objective(ops, tr.layout, problem.prior_mean, options.null_tolerance);

    // Reachability of the target mean.
    {
        const Matrix EB = tr.mean.E.rightCols(tr.layout.num_feedforward());
        const Vector m = EB.completeOrthogonalDecomposition().solve(tr.mean.e);
        const double res = (EB * m - tr.mean.e).norm();
        if (res > 1e-9 * std::max(1.0, tr.mean.e.norm())) {
            std::ostringstream msg;
            msg << "target mean is unreachable (least-squares residual " << res << ")";
            tr.infeasibilities.push_back(msg.str());
        }
    }

    const Vector zero = Vector::Zero(tr.layout.size());
    for (std::size_t j = 0; j < problem.constraints.size(); ++j) {
        for (int k = 0; k <= ops.horizon; ++k) {
            ConeRows rows =
                transcribe::chance_constraint_rows(ops, tr.layout, schedule, problem.prior_mean, problem.constraints[j], k);
            rows.label = "chance constraint " + std::to_string(j + 1) + " at step " + std::to_string(k);
            if (rows.constant()) {
                const double margin = rows.margin(zero);
                if (margin < 0.0) {
                    std::ostringstream msg;
                    msg << rows.label << " is violated by the initial distribution (margin " << margin << ")";
                    tr.infeasibilities.push_back(msg.str());
                }
                continue;
            }
            tr.cones.push_back(std::move(rows));
        }
    }

    const PrecheckResult pre = feasibility_precheck(problem, schedule);
    if (!pre.passed) {
        tr.infeasibilities.push_back(pre.message);
    } else {
        tr.cones.push_back(transcribe::terminal_cov_constraint(ops, tr.layout, problem.target_cov_bound,
                                                               schedule.posterior_error_cov.back(),
                                                               options.terminal_norm));
    }
    tr.program = transcribe::lower_to_conic(tr.objective, tr.mean, tr.cones, tr.layout);
    return tr;
}

SolveOutcome solve(const Transcription& tr, const LiftedOperators& ops, const ConicSolver& solver,
                   const TranscribeOptions& options) {
    SolveOutcome out;
    if (!tr.infeasibilities.empty()) {
        out.status = SolveStatus::Infeasible;
        for (const auto& m : tr.infeasibilities) {
            out.message += (out.message.empty() ? "" : "; ") + m;
        }
        return out;
    }
    const ConicSolution sol = solver.solve(tr.program);
    out.status = sol.status;
    out.iterations = sol.iterations;
    out.primal_residual = sol.primal_residual;
    out.dual_residual = sol.dual_residual;
    out.gap = sol.gap;
    out.relative_gap = sol.relative_gap;
    out.message = sol.message;
    if (sol.status != SolveStatus::Optimal) {
        return out;
    }

    Matrix F;
    Vector M;
    tr.layout.unpack(sol.x, F, M);

    // Strip components of each F row block that only act on zero-variance directions.
    const DecisionLayout& layout = tr.layout;
    for (int k = 0; k < layout.horizon(); ++k) {
        const Matrix Nk = transcribe::feedback_null_basis(ops, layout, k, options.null_tolerance);
        const Index c0 = layout.block_range(k).first * layout.nx();
        auto rows = F.block(k * layout.nu(), c0, layout.nu(), Nk.rows());
        rows -= (rows * Nk) * Nk.transpose();
    }
    F = layout.mask(F);
    out.F = F;
    out.M = M;
    out.objective = tr.objective.evaluate(layout.pack(F, M));
    return out;
}

}  // namespace covsteer
