#include "covsteer/io.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace covsteer::io {
namespace {

using nlohmann::ordered_json;

ordered_json to_json(const Vector& v) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

ordered_json to_json(const Matrix& m) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        out.push_back(std::move(row));
    }
    return out;
}

Vector vector_from(const ordered_json& j) {
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

Matrix matrix_from(const ordered_json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows ? static_cast<Eigen::Index>(j.front().size()) : 0;
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
        }
    }
    return m;
}

}  // namespace

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::string policy_to_json(const Policy& policy, const ConstraintAudit& audit, const PolicyMetadata& meta) {
    ordered_json j;
    j["format"] = "covsteer-policy";
    j["format_version"] = 1;
    j["tool_version"] = meta.tool_version;
    j["config_sha256"] = meta.config_sha256;
    j["solver"] = {{"name", meta.solver},
                   {"status", meta.status},
                   {"iterations", meta.iterations},
                   {"primal_residual", meta.primal_residual},
                   {"dual_residual", meta.dual_residual},
                   {"gap", meta.gap},
                   {"terminal_norm", meta.terminal_norm}};
    const Eigen::Index nx = policy.nx();
    const Eigen::Index nu = policy.nu();
    j["layout"] = {{"horizon", policy.horizon},
                   {"nx", nx},
                   {"nu", nu},
                   {"bandwidth", policy.bandwidth == DecisionLayout::kFull ? ordered_json(nullptr)
                                                                            : ordered_json(policy.bandwidth)}};
    j["objective"] = policy.objective;

    ordered_json gains = ordered_json::array();
    for (int k = 0; k < policy.horizon; ++k) {
        for (int i = 0; i <= k; ++i) {
            gains.push_back({{"k", k}, {"i", i}, {"K", to_json(policy.gain(k, i))}});
        }
    }
    j["gains"] = std::move(gains);
    ordered_json ff = ordered_json::array();
    for (const auto& m : policy.feedforward) {
        ff.push_back(to_json(m));
    }
    j["feedforward"] = std::move(ff);
    ordered_json mean = ordered_json::array();
    ordered_json filt = ordered_json::array();
    ordered_json tot = ordered_json::array();
    for (std::size_t k = 0; k < policy.mean.size(); ++k) {
        mean.push_back(to_json(policy.mean[k]));
        filt.push_back(to_json(policy.filtered_cov[k]));
        tot.push_back(to_json(policy.total_cov[k]));
    }
    j["mean"] = std::move(mean);
    j["filtered_cov"] = std::move(filt);
    j["total_cov"] = std::move(tot);
    j["F"] = to_json(policy.F);
    j["M"] = to_json(policy.M);

    ordered_json chance = ordered_json::array();
    for (const auto& c : audit.chance) {
        chance.push_back({{"step", c.step}, {"constraint", c.constraint + 1}, {"value", c.value}, {"slack", c.slack}});
    }
    j["audit"] = {{"chance", std::move(chance)},
                  {"terminal_eigen_slack", audit.terminal_eigen_slack},
                  {"terminal_mean_residual", to_json(audit.terminal_mean_residual)}};
    return j.dump(2) + "\n";
}

LoadedPolicy policy_from_json(const std::string& text) {
    LoadedPolicy out;
    try {
        const ordered_json j = ordered_json::parse(text);
        if (j.value("format", "") != "covsteer-policy") {
            throw std::runtime_error("not a covsteer policy file");
        }
        out.config_sha256 = j.value("config_sha256", "");
        Policy& p = out.policy;
        const auto& layout = j.at("layout");
        p.horizon = layout.at("horizon").get<int>();
        const auto nx = layout.at("nx").get<Eigen::Index>();
        const auto nu = layout.at("nu").get<Eigen::Index>();
        p.bandwidth = layout.at("bandwidth").is_null() ? DecisionLayout::kFull : layout.at("bandwidth").get<int>();
        p.objective = j.value("objective", 0.0);
        p.K = Matrix::Zero(p.horizon * nu, (p.horizon + 1) * nx);
        for (const auto& g : j.at("gains")) {
            const int k = g.at("k").get<int>();
            const int i = g.at("i").get<int>();
            if (k < 0 || k >= p.horizon || i < 0 || i > k) {
                throw std::runtime_error("gain block outside the lower triangle");
            }
            const Matrix blk = matrix_from(g.at("K"));
            if (blk.rows() != nu || blk.cols() != nx) {
                throw std::runtime_error("gain block has the wrong shape");
            }
            p.K.block(k * nu, i * nx, nu, nx) = blk;
        }
        for (const auto& m : j.at("feedforward")) {
            p.feedforward.push_back(vector_from(m));
        }
        for (const auto& m : j.at("mean")) {
            p.mean.push_back(vector_from(m));
        }
        for (const auto& m : j.at("filtered_cov")) {
            p.filtered_cov.push_back(matrix_from(m));
        }
        for (const auto& m : j.at("total_cov")) {
            p.total_cov.push_back(matrix_from(m));
        }
        p.F = matrix_from(j.at("F"));
        p.M = vector_from(j.at("M"));
        const auto steps = static_cast<std::size_t>(p.horizon);
        if (p.feedforward.size() != steps || p.mean.size() != steps + 1 || p.filtered_cov.size() != steps + 1 ||
            p.total_cov.size() != steps + 1) {
            throw std::runtime_error("per-step arrays do not match the horizon");
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("malformed policy file: ") + e.what());
    }
    return out;
}

std::string audit_csv(const ConstraintAudit& audit) {
    std::ostringstream os;
    os << "kind,step,constraint,value,slack\n";
    for (const auto& c : audit.chance) {
        os << "chance," << c.step << ',' << c.constraint + 1 << ',' << format_double(c.value) << ','
           << format_double(c.slack) << '\n';
    }
    os << "terminal_cov,,," << format_double(-audit.terminal_eigen_slack) << ','
       << format_double(audit.terminal_eigen_slack) << '\n';
    for (Eigen::Index i = 0; i < audit.terminal_mean_residual.size(); ++i) {
        const double r = audit.terminal_mean_residual(i);
        os << "terminal_mean,," << i << ',' << format_double(r) << ',' << format_double(-std::abs(r)) << '\n';
    }
    return os.str();
}

std::string mean_csv(const Policy& policy) {
    std::ostringstream os;
    os << "step";
    for (Eigen::Index i = 0; i < policy.nx(); ++i) {
        os << ",x" << i;
    }
    os << '\n';
    for (std::size_t k = 0; k < policy.mean.size(); ++k) {
        os << k;
        for (Eigen::Index i = 0; i < policy.nx(); ++i) {
            os << ',' << format_double(policy.mean[k](i));
        }
        os << '\n';
    }
    return os.str();
}

std::string ellipse_csv(const Policy& policy, int i, int j, double sigma, int points) {
    if (i < 0 || j < 0 || i >= policy.nx() || j >= policy.nx() || i == j) {
        throw std::invalid_argument("ellipse_csv: coordinate pair out of range");
    }
    std::ostringstream os;
    os << "step,covariance,point,x" << i << ",x" << j << '\n';
    for (std::size_t k = 0; k < policy.mean.size(); ++k) {
        const Vector mu{{policy.mean[k](i), policy.mean[k](j)}};
        for (const char* kind : {"total", "filtered"}) {
            const Matrix& P = std::string(kind) == "total" ? policy.total_cov[k] : policy.filtered_cov[k];
            Matrix marginal(2, 2);
            marginal << P(i, i), P(i, j), P(j, i), P(j, j);
            const Matrix root = linalg::psd_factor(marginal).transpose();  // root root' = marginal
            for (int m = 0; m < points; ++m) {
                const double th = 2.0 * std::numbers::pi * m / points;
                const Vector z = mu + sigma * root * Vector{{std::cos(th), std::sin(th)}};
                os << k << ',' << kind << ',' << m << ',' << format_double(z(0)) << ',' << format_double(z(1)) << '\n';
            }
        }
    }
    return os.str();
}

std::string schedule_csv(const FilterSchedule& schedule) {
    std::ostringstream os;
    if (schedule.gains.empty()) {
        return "k\n";
    }
    // vec() is column-major: name_r_c varies r fastest.
    auto header = [&](const char* name, const Matrix& m) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                os << ',' << name << '_' << r << '_' << c;
            }
        }
    };
    auto emit = [&](const Matrix& m) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                os << ',' << format_double(m(r, c));
            }
        }
    };
    os << 'k';
    header("L", schedule.gains[0]);
    header("Ptilde", schedule.posterior_error_cov[0]);
    header("Ptilde_prior", schedule.prior_error_cov[0]);
    header("Pinnov", schedule.innovation_cov[0]);
    os << '\n';
    for (std::size_t k = 0; k < schedule.gains.size(); ++k) {
        os << k;
        emit(schedule.gains[k]);
        emit(schedule.posterior_error_cov[k]);
        emit(schedule.prior_error_cov[k]);
        emit(schedule.innovation_cov[k]);
        os << '\n';
    }
    return os.str();
}

std::string report_to_json(const SimulationReport& r, const std::string& config_sha256,
                           const std::string& policy_sha256) {
    ordered_json j;
    j["format"] = "covsteer-simulation";
    j["format_version"] = 1;
    j["config_sha256"] = config_sha256;
    j["policy_sha256"] = policy_sha256;
    j["runs"] = r.runs;
    j["seed"] = r.seed;
    j["generator"] = r.generator;
    j["batch_size"] = r.batch_size;
    j["confidence"] = r.confidence;
    j["p_fail"] = r.p_fail;
    j["max_violation_rate"] = r.max_violation_rate;
    j["worst_step"] = r.worst_step;
    j["terminal_mean"] = to_json(r.terminal_mean);
    j["terminal_cov"] = to_json(r.terminal_cov);
    j["diagnostics"] = {{"max_cov_z", r.max_cov_z},
                        {"max_error_cov_z", r.max_error_cov_z},
                        {"max_cross_z", r.max_cross_z},
                        {"max_innovation_z", r.max_innovation_z},
                        {"max_innovation_autocorr", r.max_innovation_autocorr}};
    ordered_json steps = ordered_json::array();
    for (const auto& s : r.steps) {
        ordered_json e;
        e["step"] = s.step;
        e["violations"] = s.violations;
        e["rate"] = s.rate;
        e["rate_interval"] = {s.rate_lower, s.rate_upper};
        e["sample_mean"] = to_json(s.sample_mean);
        e["sample_cov"] = to_json(s.sample_cov);
        e["cov_z"] = s.cov_z;
        e["error_sample_cov"] = to_json(s.error_sample_cov);
        e["error_cov_z"] = s.error_cov_z;
        e["cross_moment"] = to_json(s.cross_moment);
        e["cross_z"] = s.cross_z;
        if (s.innovation_lag.size() > 0) {
            e["innovation_lag1"] = to_json(s.innovation_lag);
            e["innovation_z"] = s.innovation_z;
            e["innovation_autocorr"] = s.innovation_autocorr;
        }
        steps.push_back(std::move(e));
    }
    j["steps"] = std::move(steps);
    return j.dump(2) + "\n";
}

std::string trajectories_csv(const SimulationReport& report) {
    std::ostringstream os;
    os << "run,step";
    const Eigen::Index nx = report.terminal_mean.size();
    for (Eigen::Index i = 0; i < nx; ++i) {
        os << ",x" << i;
    }
    os << '\n';
    for (std::size_t r = 0; r < report.trajectories.size(); ++r) {
        for (std::size_t k = 0; k < report.trajectories[r].size(); ++k) {
            os << r << ',' << k;
            for (Eigen::Index i = 0; i < nx; ++i) {
                os << ',' << format_double(report.trajectories[r][k](i));
            }
            os << '\n';
        }
    }
    return os.str();
}

}  // namespace covsteer::io
