#include "covsteer/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <boost/math/special_functions/beta.hpp>

#include "covsteer/random.hpp"

namespace covsteer {

using Index = Eigen::Index;

unsigned resolve_threads(unsigned requested) {
    unsigned n = requested > 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("COVSTEER_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap > 0) {
            n = std::min(n, static_cast<unsigned>(cap));
        }
    }
    return std::max(1u, n);
}

std::pair<double, double> clopper_pearson(std::size_t x, std::size_t n, double confidence) {
    if (n == 0) {
        return {0.0, 1.0};
    }
    const double a = 1.0 - confidence;
    const auto xd = static_cast<double>(x);
    const auto nd = static_cast<double>(n);
    const double lower = x == 0 ? 0.0 : boost::math::ibeta_inv(xd, nd - xd + 1.0, a / 2.0);
    const double upper = x == n ? 1.0 : boost::math::ibeta_inv(xd + 1.0, nd - xd, 1.0 - a / 2.0);
    return {lower, upper};
}

namespace {

// Sums over one batch, all deviations taken from analytic means.
struct Accumulator {
    std::vector<std::size_t> violations;
    std::vector<Vector> sum_x;
    std::vector<Matrix> sum_xx;
    std::vector<Vector> sum_e;
    std::vector<Matrix> sum_ee;
    std::vector<Matrix> sum_cross;
    std::vector<Matrix> sum_lag;
    std::vector<std::vector<Vector>> trajectories;

    Accumulator(int N, Index nx, Index ny) {
        const auto steps = static_cast<std::size_t>(N + 1);
        violations.assign(steps, 0);
        sum_x.assign(steps, Vector::Zero(nx));
        sum_xx.assign(steps, Matrix::Zero(nx, nx));
        sum_e.assign(steps, Vector::Zero(nx));
        sum_ee.assign(steps, Matrix::Zero(nx, nx));
        sum_cross.assign(steps, Matrix::Zero(nx, nx));
        sum_lag.assign(static_cast<std::size_t>(N), Matrix::Zero(ny, ny));
    }

    void merge(const Accumulator& o) {
        for (std::size_t k = 0; k < violations.size(); ++k) {
            violations[k] += o.violations[k];
            sum_x[k] += o.sum_x[k];
            sum_xx[k] += o.sum_xx[k];
            sum_e[k] += o.sum_e[k];
            sum_ee[k] += o.sum_ee[k];
            sum_cross[k] += o.sum_cross[k];
        }
        for (std::size_t k = 0; k < sum_lag.size(); ++k) {
            sum_lag[k] += o.sum_lag[k];
        }
        trajectories.insert(trajectories.end(), o.trajectories.begin(), o.trajectories.end());
    }
};

struct Model {
    const SteeringProblem& problem;
    const FilterSchedule& schedule;
    const Policy& policy;
    Matrix estimate_factor;
    Matrix error_factor;
};

void run_batch(const Model& m, std::uint64_t seed, std::size_t first, std::size_t count, std::size_t keep,
               Accumulator& acc) {
    const SteeringProblem& pb = m.problem;
    const int N = pb.horizon;
    const Index nx = pb.nx();
    const Index nu = pb.nu();
    const Index ny = pb.ny();
    const Index nw = pb.nw();
    Rng rng(seed);

    Vector x(nx), xprior(nx), xhat(nx), e(nx), y(ny), innov(ny), prev_innov(ny), u(nu);
    Vector w(nw), v(ny), z(nx);
    Vector dev((N + 1) * nx);  // stacked x̂_i − x̄_i

    for (std::size_t run = 0; run < count; ++run) {
        const bool record = first + run < keep;
        std::vector<Vector> traj;

        rng.fill_normal(z);
        xprior = pb.prior_mean + m.estimate_factor.transpose() * z;
        rng.fill_normal(z);
        x = xprior + m.error_factor.transpose() * z;

        for (int k = 0; k <= N; ++k) {
            const auto ks = static_cast<std::size_t>(k);
            rng.fill_normal(v);
            y.noalias() = pb.C[ks] * x;
            y.noalias() += pb.D[ks] * v;
            innov = y;
            innov.noalias() -= pb.C[ks] * xprior;
            xhat = xprior;
            xhat.noalias() += m.schedule.gains[ks] * innov;

            const Vector& mean = m.policy.mean[ks];
            dev.segment(k * nx, nx) = xhat - mean;
            e = x - xhat;

            bool violated = false;
            for (const auto& c : pb.constraints) {
                violated = violated || c.alpha.dot(x) > c.beta;
            }
            acc.violations[ks] += violated ? 1 : 0;
            const Vector dx = x - mean;
            acc.sum_x[ks] += dx;
            acc.sum_xx[ks].noalias() += dx * dx.transpose();
            acc.sum_e[ks] += e;
            acc.sum_ee[ks].noalias() += e * e.transpose();
            acc.sum_cross[ks].noalias() += dev.segment(k * nx, nx) * e.transpose();
            if (k > 0) {
                acc.sum_lag[ks - 1].noalias() += prev_innov * innov.transpose();
            }
            prev_innov = innov;
            if (record) {
                traj.push_back(x);
            }

            if (k == N) {
                break;
            }
            u = m.policy.feedforward[ks];
            u.noalias() += m.policy.K.block(k * nu, 0, nu, (k + 1) * nx) * dev.head((k + 1) * nx);
            rng.fill_normal(w);
            const Vector bu = pb.B[ks] * u;
            Vector next = pb.A[ks] * x + bu;
            next.noalias() += pb.G[ks] * w;
            x = next;
            xprior = pb.A[ks] * xhat + bu;
        }
        if (record) {
            acc.trajectories.push_back(std::move(traj));
        }
    }
}

// Max over entries of |S − P| / sqrt((P_ii P_jj + P_ij²)/n).
double covariance_z(const Matrix& sample, const Matrix& analytic, double n) {
    double z = 0.0;
    for (Index i = 0; i < sample.rows(); ++i) {
        for (Index j = 0; j < sample.cols(); ++j) {
            const double se =
                std::sqrt((analytic(i, i) * analytic(j, j) + analytic(i, j) * analytic(i, j)) / n);
            const double diff = std::abs(sample(i, j) - analytic(i, j));
            z = std::max(z, diff == 0.0 ? 0.0 : diff / std::max(se, 1e-300));
        }
    }
    return z;
}

// Max over entries of |E| / sqrt(a_ii b_jj / n) for a moment E with zero expectation.
double cross_z(const Matrix& moment, const Matrix& a, const Matrix& b, double n) {
    double z = 0.0;
    for (Index i = 0; i < moment.rows(); ++i) {
        for (Index j = 0; j < moment.cols(); ++j) {
            const double se = std::sqrt(a(i, i) * b(j, j) / n);
            const double diff = std::abs(moment(i, j));
            z = std::max(z, diff == 0.0 ? 0.0 : diff / std::max(se, 1e-300));
        }
    }
    return z;
}

Matrix centered_cov(const Vector& sum, const Matrix& sum_sq, double n) {
    const Vector mean = sum / n;
    if (n < 2) {
        return Matrix::Zero(sum.size(), sum.size());
    }
    return linalg::symmetrized((sum_sq - n * mean * mean.transpose()) / (n - 1.0));
}

}  // namespace

SimulationReport run_closed_loop(const SteeringProblem& problem, const FilterSchedule& schedule, const Policy& policy,
                                 const SimulationOptions& options) {
    if (options.runs < 1) {
        throw std::invalid_argument("run_closed_loop: runs must be at least 1");
    }
    if (policy.horizon != problem.horizon || schedule.horizon() != problem.horizon) {
        throw DimensionError("run_closed_loop: policy, schedule and problem horizons differ");
    }
    const int N = problem.horizon;
    const Index nx = problem.nx();
    const Index ny = problem.ny();
    const Model model{problem, schedule, policy, linalg::psd_factor(problem.prior_estimate_cov),
                      linalg::psd_factor(problem.prior_error_cov)};

    const std::size_t bs = std::max<std::size_t>(1, options.batch_size);
    const std::size_t batches = (options.runs + bs - 1) / bs;
    std::vector<Accumulator> parts(batches, Accumulator(N, nx, ny));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t b = next++; b < batches; b = next++) {
            const std::size_t first = b * bs;
            const std::size_t count = std::min(bs, options.runs - first);
            run_batch(model, derive_seed(options.seed, b), first, count, options.trajectories, parts[b]);
        }
    };
    const unsigned threads = std::min<unsigned>(resolve_threads(options.threads), static_cast<unsigned>(batches));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    Accumulator total(N, nx, ny);
    for (const auto& p : parts) {
        total.merge(p);
    }

    SimulationReport rep;
    rep.runs = options.runs;
    rep.seed = options.seed;
    rep.generator = Rng::kName;
    rep.batch_size = bs;
    rep.confidence = options.confidence;
    rep.p_fail = problem.total_risk;
    rep.trajectories = std::move(total.trajectories);
    const auto n = static_cast<double>(options.runs);

    for (int k = 0; k <= N; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        StepStatistics st;
        st.step = k;
        st.violations = total.violations[ks];
        st.rate = static_cast<double>(st.violations) / n;
        std::tie(st.rate_lower, st.rate_upper) = clopper_pearson(st.violations, options.runs, options.confidence);

        st.sample_mean = policy.mean[ks] + total.sum_x[ks] / n;
        st.sample_cov = centered_cov(total.sum_x[ks], total.sum_xx[ks], n);
        st.cov_z = covariance_z(st.sample_cov, policy.total_cov[ks], n);

        st.error_sample_cov = centered_cov(total.sum_e[ks], total.sum_ee[ks], n);
        st.error_cov_z = covariance_z(st.error_sample_cov, schedule.posterior_error_cov[ks], n);

        st.cross_moment = total.sum_cross[ks] / n;
        st.cross_z = cross_z(st.cross_moment, policy.filtered_cov[ks], schedule.posterior_error_cov[ks], n);

        if (k < N) {
            st.innovation_lag = total.sum_lag[ks] / n;
            const Matrix& a = schedule.innovation_cov[ks];
            const Matrix& b = schedule.innovation_cov[ks + 1];
            st.innovation_z = cross_z(st.innovation_lag, a, b, n);
            for (Index i = 0; i < ny; ++i) {
                for (Index j = 0; j < ny; ++j) {
                    st.innovation_autocorr = std::max(
                        st.innovation_autocorr, std::abs(st.innovation_lag(i, j)) / std::sqrt(a(i, i) * b(j, j)));
                }
            }
        }

        if (k == 0 || st.rate > rep.max_violation_rate) {
            rep.max_violation_rate = st.rate;
            rep.worst_step = k;
        }
        rep.max_cov_z = std::max(rep.max_cov_z, st.cov_z);
        rep.max_error_cov_z = std::max(rep.max_error_cov_z, st.error_cov_z);
        rep.max_cross_z = std::max(rep.max_cross_z, st.cross_z);
        rep.max_innovation_z = std::max(rep.max_innovation_z, st.innovation_z);
        rep.max_innovation_autocorr = std::max(rep.max_innovation_autocorr, st.innovation_autocorr);
        rep.steps.push_back(std::move(st));
    }
    rep.terminal_mean = rep.steps.back().sample_mean;
    rep.terminal_cov = rep.steps.back().sample_cov;
    return rep;
}

}  // namespace covsteer
