#include "covsteer/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "covsteer/kalman.hpp"

namespace covsteer {

SteeringProblem make_time_invariant(int horizon, const Matrix& A, const Matrix& B, const Matrix& G,
                                    const Matrix& C, const Matrix& D, const Matrix& Q, const Matrix& R) {
    SteeringProblem p;
    p.horizon = horizon;
    const auto n = static_cast<std::size_t>(std::max(horizon, 0));
    p.A.assign(n, A);
    p.B.assign(n, B);
    p.G.assign(n, G);
    p.C.assign(n + 1, C);
    p.D.assign(n + 1, D);
    p.Q.assign(n, Q);
    p.R.assign(n, R);
    return p;
}

bool ValidationReport::ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const ValidationCheck& c) { return c.passed; });
}

std::vector<std::string> ValidationReport::failures() const {
    std::vector<std::string> out;
    for (const auto& c : checks) {
        if (!c.passed) {
            out.push_back(c.message);
        }
    }
    return out;
}

namespace {

class Checker {
public:
    explicit Checker(ValidationReport& report) : report_(report) {}

    bool expect(bool condition, const std::string& name, const std::string& message) {
        report_.checks.push_back({name, condition, condition ? std::string() : message});
        return condition;
    }

private:
    ValidationReport& report_;
};

std::string indexed(const std::string& symbol, std::size_t k) {
    return symbol + "_" + std::to_string(k);
}

bool finite(const Matrix& m) {
    return m.allFinite();
}

bool shape_is(const Matrix& m, Eigen::Index r, Eigen::Index c) {
    return m.rows() == r && m.cols() == c;
}

bool symmetric_enough(const Matrix& m) {
    return linalg::asymmetry(m) <= linalg::kSymmetryTol * std::max(1.0, linalg::max_abs(m));
}

// Shape, finiteness and symmetry; returns whether definiteness can be checked.
bool check_symmetric_input(Checker& chk, const Matrix& m, Eigen::Index n, const std::string& name) {
    if (!chk.expect(shape_is(m, n, n), name + ".shape",
                    name + " has shape " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                        ", expected " + std::to_string(n) + "x" + std::to_string(n))) {
        return false;
    }
    if (!chk.expect(finite(m), name + ".finite", name + " has non-finite entries")) {
        return false;
    }
    return chk.expect(symmetric_enough(m), name + ".symmetric", name + " is not symmetric");
}

void check_psd(Checker& chk, const Matrix& m, Eigen::Index n, const std::string& name) {
    if (check_symmetric_input(chk, m, n, name)) {
        chk.expect(linalg::is_psd(m), name + ".psd", name + " is not positive semidefinite");
    }
}

void check_pd(Checker& chk, const Matrix& m, Eigen::Index n, const std::string& name) {
    if (check_symmetric_input(chk, m, n, name)) {
        chk.expect(linalg::is_pd(m), name + ".pd", name + " is not positive definite");
    }
}

bool check_length(Checker& chk, std::size_t actual, std::size_t expected, const std::string& name) {
    return chk.expect(actual == expected, name + ".length",
                      name + " has " + std::to_string(actual) + " entries, expected " + std::to_string(expected));
}

}  // namespace

ValidationReport validate(const SteeringProblem& p) {
    ValidationReport report;
    Checker chk(report);

    if (!chk.expect(p.horizon >= 1, "horizon", "horizon must be a positive integer")) {
        return report;
    }
    const auto N = static_cast<std::size_t>(p.horizon);
    const Eigen::Index nx = p.nx();
    if (!chk.expect(nx >= 1, "state_dimension", "prior mean must be a non-empty vector")) {
        return report;
    }

    const bool lengths_ok = check_length(chk, p.A.size(), N, "A") & check_length(chk, p.B.size(), N, "B") &
                            check_length(chk, p.G.size(), N, "G") & check_length(chk, p.C.size(), N + 1, "C") &
                            check_length(chk, p.D.size(), N + 1, "D") & check_length(chk, p.Q.size(), N, "Q") &
                            check_length(chk, p.R.size(), N, "R");
    if (lengths_ok) {
        const Eigen::Index nu = p.nu();
        const Eigen::Index nw = p.nw();
        const Eigen::Index ny = p.ny();
        chk.expect(nu >= 1, "input_dimension", "B_0 has no columns");
        chk.expect(ny >= 1, "output_dimension", "C_0 has no rows");
        for (std::size_t k = 0; k < N; ++k) {
            chk.expect(shape_is(p.A[k], nx, nx) && finite(p.A[k]), indexed("A", k) + ".shape",
                       indexed("A", k) + " must be a finite " + std::to_string(nx) + "x" + std::to_string(nx) +
                           " matrix");
            chk.expect(shape_is(p.B[k], nx, nu) && finite(p.B[k]), indexed("B", k) + ".shape",
                       indexed("B", k) + " must be a finite " + std::to_string(nx) + "x" + std::to_string(nu) +
                           " matrix");
            chk.expect(shape_is(p.G[k], nx, nw) && finite(p.G[k]), indexed("G", k) + ".shape",
                       indexed("G", k) + " must be a finite " + std::to_string(nx) + "x" + std::to_string(nw) +
                           " matrix");
            check_psd(chk, p.Q[k], nx, indexed("Q", k));
            check_pd(chk, p.R[k], nu, indexed("R", k));
        }
        for (std::size_t k = 0; k <= N; ++k) {
            chk.expect(shape_is(p.C[k], ny, nx) && finite(p.C[k]), indexed("C", k) + ".shape",
                       indexed("C", k) + " must be a finite " + std::to_string(ny) + "x" + std::to_string(nx) +
                           " matrix");
            const std::string dname = indexed("D", k);
            if (chk.expect(shape_is(p.D[k], ny, ny) && finite(p.D[k]), dname + ".shape",
                           dname + " must be a finite " + std::to_string(ny) + "x" + std::to_string(ny) +
                               " matrix")) {
                Eigen::JacobiSVD<Matrix> svd(p.D[k]);
                const Vector& sv = svd.singularValues();
                const double smallest = sv.size() ? sv.minCoeff() : 0.0;
                const double largest = sv.size() ? sv.maxCoeff() : 0.0;
                chk.expect(sv.size() > 0 && smallest > 1e-12 * std::max(1.0, largest), dname + ".invertible",
                           dname + " not invertible");
            }
        }
    }

    chk.expect(p.prior_mean.allFinite(), "prior_mean.finite", "prior mean has non-finite entries");
    check_psd(chk, p.prior_estimate_cov, nx, "prior_estimate_cov");
    check_psd(chk, p.prior_error_cov, nx, "prior_error_cov");
    chk.expect(p.target_mean.size() == nx && p.target_mean.allFinite(), "target_mean.shape",
               "target mean must be a finite vector of length " + std::to_string(nx));
    check_pd(chk, p.target_cov_bound, nx, "target_cov_bound");

    chk.expect(p.total_risk > 0.0 && p.total_risk < 0.5, "total_risk.range", "p_fail outside (0, 0.5)");
    double risk_sum = 0.0;
    for (std::size_t j = 0; j < p.constraints.size(); ++j) {
        const auto& c = p.constraints[j];
        const std::string name = indexed("alpha", j + 1);
        if (chk.expect(c.alpha.size() == nx && c.alpha.allFinite(), name + ".shape",
                       name + " must be a finite vector of length " + std::to_string(nx))) {
            chk.expect(c.alpha.norm() > 0.0, name + ".nonzero", name + " is zero");
        }
        chk.expect(std::isfinite(c.beta), indexed("beta", j + 1) + ".finite",
                   indexed("beta", j + 1) + " is not finite");
        chk.expect(c.risk > 0.0 && c.risk < 0.5, indexed("p", j + 1) + ".range",
                   indexed("p", j + 1) + " outside (0, 0.5)");
        risk_sum += c.risk;
    }
    if (!p.constraints.empty()) {
        std::ostringstream msg;
        msg << "sum of p_j (" << risk_sum << ") exceeds p_fail (" << p.total_risk << ")";
        chk.expect(risk_sum <= p.total_risk * (1.0 + 1e-12), "risk.budget", msg.str());
    }
    return report;
}

SteeringProblem symmetrized(const SteeringProblem& problem) {
    SteeringProblem p = problem;
    p.prior_estimate_cov = linalg::checked_symmetric(p.prior_estimate_cov, "prior_estimate_cov");
    p.prior_error_cov = linalg::checked_symmetric(p.prior_error_cov, "prior_error_cov");
    p.target_cov_bound = linalg::checked_symmetric(p.target_cov_bound, "target_cov_bound");
    for (std::size_t k = 0; k < p.Q.size(); ++k) {
        p.Q[k] = linalg::checked_symmetric(p.Q[k], indexed("Q", k));
    }
    for (std::size_t k = 0; k < p.R.size(); ++k) {
        p.R[k] = linalg::checked_symmetric(p.R[k], indexed("R", k));
    }
    return p;
}

PrecheckResult feasibility_precheck(const SteeringProblem& problem, const FilterSchedule& schedule,
                                    double tolerance) {
    const Eigen::Index nx = problem.nx();
    if (schedule.horizon() != problem.horizon) {
        throw DimensionError("feasibility_precheck: schedule horizon " + std::to_string(schedule.horizon()) +
                             " does not match problem horizon " + std::to_string(problem.horizon));
    }
    const Matrix& terminal_error = schedule.posterior_error_cov.back();
    linalg::require_shape(terminal_error, nx, nx, "feasibility_precheck: terminal error covariance");
    linalg::require_shape(problem.target_cov_bound, nx, nx, "feasibility_precheck: target covariance bound");

    PrecheckResult result;
    result.tolerance = tolerance;
    const Matrix margin = linalg::symmetrized(problem.target_cov_bound - terminal_error);
    Eigen::SelfAdjointEigenSolver<Matrix> es_margin(margin, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Matrix> es_error(linalg::symmetrized(terminal_error), Eigen::EigenvaluesOnly);
    result.margin_eigenvalues = es_margin.eigenvalues();
    result.error_cov_eigenvalues = es_error.eigenvalues();
    result.min_margin_eigenvalue = result.margin_eigenvalues.minCoeff();
    result.passed = result.min_margin_eigenvalue > tolerance;
    std::ostringstream msg;
    if (result.passed) {
        msg << "P_f - P~_N is positive definite (min eigenvalue " << result.min_margin_eigenvalue << ")";
    } else {
        msg << "terminal covariance bound unattainable: min eigenvalue of P_f - P~_N is "
            << result.min_margin_eigenvalue << " (tolerance " << tolerance << ")";
    }
    result.message = msg.str();
    return result;
}

}  // namespace covsteer
