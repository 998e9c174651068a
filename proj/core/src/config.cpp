#include "covsteer/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace covsteer {
namespace {

using nlohmann::json;

const json& require(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw ConfigError(where + ": missing key '" + key + "'");
    }
    return obj.at(key);
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) {
        throw ConfigError(where + ": expected a number");
    }
    return j.get<double>();
}

Vector vector_of(const json& j, const std::string& where) {
    if (j.is_number()) {
        return Vector::Constant(1, j.get<double>());
    }
    if (!j.is_array()) {
        throw ConfigError(where + ": expected an array of numbers");
    }
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = number(j[i], where + "[" + std::to_string(i) + "]");
    }
    return v;
}

bool is_matrix_array(const json& j) {
    return j.is_array() && !j.empty() && j.front().is_array() && (j.front().empty() || !j.front().front().is_array());
}

Matrix matrix_of(const json& j, const std::string& where) {
    if (j.is_number()) {
        return Matrix::Constant(1, 1, j.get<double>());
    }
    if (j.is_object()) {
        if (j.contains("diag")) {
            return vector_of(j.at("diag"), where + ".diag").asDiagonal();
        }
        if (j.contains("value")) {
            return matrix_of(j.at("value"), where + ".value");
        }
        throw ConfigError(where + ": object matrices need 'diag' or 'value'");
    }
    if (!is_matrix_array(j)) {
        throw ConfigError(where + ": expected a row-major 2-D array");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.front().size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ConfigError(where + ": row " + std::to_string(r) + " has the wrong length");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = number(row[static_cast<std::size_t>(c)], where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
        }
    }
    return m;
}

// A constant matrix repeated `count` times, or one matrix per step.
std::vector<Matrix> sequence_of(const json& section, const std::string& key, std::size_t count,
                                const std::string& where) {
    const std::string path = where + "." + key;
    const json& j = require(section, key, where);
    const bool section_constant = section.value("constant", false);
    const bool per_step = j.is_array() && !j.empty() && j.front().is_array() && !j.front().empty() &&
                          j.front().front().is_array();
    if (per_step) {
        if (section_constant) {
            throw ConfigError(path + ": section is marked constant but holds per-step matrices");
        }
        if (j.size() != count) {
            throw ConfigError(path + ": expected " + std::to_string(count) + " per-step matrices, got " +
                              std::to_string(j.size()));
        }
        std::vector<Matrix> out;
        for (std::size_t k = 0; k < count; ++k) {
            out.push_back(matrix_of(j[k], path + "[" + std::to_string(k) + "]"));
        }
        return out;
    }
    return std::vector<Matrix>(count, matrix_of(j, path));
}

}  // namespace

SteeringProblem parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) {
        throw ConfigError("config: top level must be an object");
    }
    SteeringProblem p;
    const json& horizon = require(root, "horizon", "config");
    if (!horizon.is_number_integer() || horizon.get<long long>() < 1) {
        throw ConfigError("config.horizon: expected a positive integer");
    }
    p.horizon = horizon.get<int>();
    const auto N = static_cast<std::size_t>(p.horizon);

    const json& dyn = require(root, "dynamics", "config");
    p.A = sequence_of(dyn, "A", N, "dynamics");
    p.B = sequence_of(dyn, "B", N, "dynamics");
    p.G = sequence_of(dyn, "G", N, "dynamics");

    const json& obs = require(root, "observation", "config");
    p.C = sequence_of(obs, "C", N + 1, "observation");
    p.D = sequence_of(obs, "D", N + 1, "observation");

    const json& init = require(root, "initial", "config");
    p.prior_mean = vector_of(require(init, "mean", "initial"), "initial.mean");
    p.prior_estimate_cov = matrix_of(require(init, "estimate_cov", "initial"), "initial.estimate_cov");
    p.prior_error_cov = matrix_of(require(init, "error_cov", "initial"), "initial.error_cov");

    const json& term = require(root, "terminal", "config");
    p.target_mean = vector_of(require(term, "mean", "terminal"), "terminal.mean");
    p.target_cov_bound = matrix_of(require(term, "cov_bound", "terminal"), "terminal.cov_bound");

    if (root.contains("cost")) {
        const json& cost = root.at("cost");
        p.Q = sequence_of(cost, "Q", N, "cost");
        p.R = sequence_of(cost, "R", N, "cost");
    } else {
        const Eigen::Index nx = p.prior_mean.size();
        const Eigen::Index nu = p.B.front().cols();
        p.Q.assign(N, Matrix::Identity(nx, nx));
        p.R.assign(N, Matrix::Identity(nu, nu));
    }

    const json& risk = require(root, "risk", "config");
    p.total_risk = number(require(risk, "p_fail", "risk"), "risk.p_fail");

    if (root.contains("constraints")) {
        const json& cons = root.at("constraints");
        if (!cons.is_array()) {
            throw ConfigError("config.constraints: expected an array");
        }
        const double share = cons.empty() ? 0.0 : p.total_risk / static_cast<double>(cons.size());
        for (std::size_t j = 0; j < cons.size(); ++j) {
            const std::string where = "constraints[" + std::to_string(j) + "]";
            HalfPlaneConstraint c;
            c.alpha = vector_of(require(cons[j], "alpha", where), where + ".alpha");
            c.beta = number(require(cons[j], "beta", where), where + ".beta");
            c.risk = cons[j].contains("risk") ? number(cons[j].at("risk"), where + ".risk") : share;
            p.constraints.push_back(std::move(c));
        }
    }
    return p;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SteeringProblem load_config(const std::string& path) {
    return parse_config(read_file(path));
}

}  // namespace covsteer
