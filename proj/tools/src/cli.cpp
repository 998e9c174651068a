#include "covsteer/cli.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "covsteer/config.hpp"
#include "covsteer/io.hpp"
#include "covsteer/ipm.hpp"
#include "covsteer/kalman.hpp"
#include "covsteer/lift.hpp"
#include "covsteer/model.hpp"
#include "covsteer/policy.hpp"
#include "covsteer/simulate.hpp"
#include "covsteer/transcribe.hpp"
#include "json.hpp"

#ifndef COVSTEER_VERSION
#define COVSTEER_VERSION "unknown"
#endif

namespace covsteer::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string sha256_hex(const std::string& bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 computation failed");
    }
    std::ostringstream os;
    os << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i) {
        os << std::setw(2) << static_cast<int>(md[i]);
    }
    return os.str();
}

namespace {

// Exit-code-carrying failure; the message goes to stderr.
struct Failure : std::runtime_error {
    int code;
    Failure(int c, const std::string& what) : std::runtime_error(what), code(c) {}
};

struct SolveFlags {
    std::string config;
    std::string out = ".";
    int bandwidth = -1;
    double solver_tol = 1e-8;
    std::string terminal_norm = "spectral";
    std::string ellipse_coords = "0,1";
    double ellipse_sigma = 3.0;
    std::string export_conic;
};

struct SimulateFlags {
    std::string config;
    std::string policy;
    std::string out = ".";
    std::size_t runs = 100000;
    std::uint64_t seed = 20190610;
    std::size_t trajectories = 0;
    unsigned threads = 0;
};

std::string six(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

// Loads, validates and symmetrizes; every failure maps to exit code 2.
SteeringProblem load_valid(const std::string& path, std::string& bytes) {
    try {
        bytes = read_file(path);
        SteeringProblem p = parse_config(bytes);
        const ValidationReport rep = validate(p);
        if (!rep.ok()) {
            std::string msg = "validation failed:";
            for (const auto& f : rep.failures()) {
                msg += "\n  " + f;
            }
            throw Failure(kValidation, msg);
        }
        return symmetrized(p);
    } catch (const Failure&) {
        throw;
    } catch (const std::exception& e) {
        throw Failure(kValidation, std::string("invalid config: ") + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw Failure(kUsage, "cannot write " + path.string());
    }
    f << text;
}

std::pair<int, int> parse_coords(const std::string& s, Eigen::Index nx) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) {
        throw Failure(kUsage, "--ellipse-coords expects i,j");
    }
    int i = 0;
    int j = 0;
    try {
        i = std::stoi(s.substr(0, comma));
        j = std::stoi(s.substr(comma + 1));
    } catch (const std::exception&) {
        throw Failure(kUsage, "--ellipse-coords expects i,j");
    }
    if (i < 0 || j < 0 || i >= nx || j >= nx || i == j) {
        throw Failure(kUsage, "--ellipse-coords: need two distinct coordinates in [0, " + std::to_string(nx) + ")");
    }
    return {i, j};
}

ordered_json output_list(const fs::path& dir, const std::vector<std::string>& names) {
    ordered_json files = ordered_json::array();
    for (const auto& n : names) {
        files.push_back({{"file", n}, {"sha256", sha256_hex(read_file((dir / n).string()))}});
    }
    return files;
}

int cmd_solve(const SolveFlags& fl, std::ostream& out) {
    std::string bytes;
    const SteeringProblem problem = load_valid(fl.config, bytes);
    const std::string config_sha = sha256_hex(bytes);
    const auto coords = parse_coords(fl.ellipse_coords, problem.nx());
    if (!(fl.ellipse_sigma > 0)) {
        throw Failure(kUsage, "--ellipse-sigma must be positive");
    }
    if (!(fl.solver_tol > 0)) {
        throw Failure(kUsage, "--solver-tol must be positive");
    }

    TranscribeOptions topts;
    topts.bandwidth = fl.bandwidth;
    if (fl.terminal_norm == "spectral") {
        topts.terminal_norm = TerminalNorm::Spectral;
    } else if (fl.terminal_norm == "frobenius") {
        topts.terminal_norm = TerminalNorm::Frobenius;
    } else {
        throw Failure(kUsage, "--terminal-norm must be spectral or frobenius");
    }

    const FilterSchedule schedule = kalman::run_schedule(problem);
    const LiftedOperators ops = lift::build(problem, schedule);
    const Transcription tr = transcribe_problem(problem, schedule, ops, topts);

    if (!fl.export_conic.empty()) {
        std::ofstream f(fl.export_conic, std::ios::binary);
        if (!f) {
            throw Failure(kUsage, "cannot write " + fl.export_conic);
        }
        write_conic_program(f, tr.program);
    }

    InteriorPointSettings settings;
    settings.feasibility_tol = fl.solver_tol;
    settings.absolute_gap_tol = fl.solver_tol;
    settings.relative_gap_tol = fl.solver_tol;
    const InteriorPointSolver solver(settings);
    const SolveOutcome outcome = solve(tr, ops, solver, topts);

    out << "status      " << status_name(outcome.status) << '\n';
    if (outcome.status == SolveStatus::Infeasible) {
        throw Failure(kInfeasible, "infeasible: " + outcome.message);
    }
    if (outcome.status != SolveStatus::Optimal) {
        throw Failure(kNumerical, std::string(status_name(outcome.status)) + ": " + outcome.message);
    }

    Policy pol = policy::propagate_distribution(*outcome.F, *outcome.M, ops, schedule, problem.prior_mean);
    pol.bandwidth = fl.bandwidth;
    pol.objective = outcome.objective;
    const ConstraintAudit audit = policy::audit_constraints(pol, problem);

    io::PolicyMetadata meta;
    meta.config_sha256 = config_sha;
    meta.tool_version = COVSTEER_VERSION;
    meta.solver = solver.name();
    meta.status = status_name(outcome.status);
    meta.iterations = outcome.iterations;
    meta.primal_residual = outcome.primal_residual;
    meta.dual_residual = outcome.dual_residual;
    meta.gap = outcome.gap;
    meta.terminal_norm = fl.terminal_norm;

    const fs::path dir(fl.out);
    fs::create_directories(dir);
    const std::vector<std::string> names = {"policy.json", "audit.csv", "mean_trajectory.csv", "ellipses.csv"};
    write_text(dir / names[0], io::policy_to_json(pol, audit, meta));
    write_text(dir / names[1], io::audit_csv(audit));
    write_text(dir / names[2], io::mean_csv(pol));
    write_text(dir / names[3], io::ellipse_csv(pol, coords.first, coords.second, fl.ellipse_sigma));

    ordered_json manifest;
    manifest["command"] = "solve";
    manifest["config"] = {{"path", fl.config}, {"sha256", config_sha}};
    manifest["tool_version"] = COVSTEER_VERSION;
    manifest["solver"] = {{"name", solver.name()},
                          {"tolerance", fl.solver_tol},
                          {"bandwidth", fl.bandwidth},
                          {"terminal_norm", fl.terminal_norm},
                          {"status", status_name(outcome.status)},
                          {"message", outcome.message},
                          {"iterations", outcome.iterations}};
    manifest["ellipses"] = {{"coords", {coords.first, coords.second}}, {"sigma", fl.ellipse_sigma}};
    manifest["seeds"] = ordered_json::array();
    manifest["outputs"] = output_list(dir, names);
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");

    out << "objective   " << six(outcome.objective) << '\n'
        << "iterations  " << outcome.iterations << '\n'
        << "min chance slack     " << six(audit.min_chance_slack()) << '\n'
        << "terminal eigen slack " << six(audit.terminal_eigen_slack) << '\n'
        << "terminal mean error  " << six(audit.terminal_mean_error()) << '\n'
        << "wrote " << (dir / "policy.json").string() << '\n';
    return kOk;
}

int cmd_simulate(const SimulateFlags& fl, std::ostream& out) {
    std::string bytes;
    const SteeringProblem problem = load_valid(fl.config, bytes);
    const std::string config_sha = sha256_hex(bytes);
    std::string policy_text;
    io::LoadedPolicy loaded;
    try {
        policy_text = read_file(fl.policy);
        loaded = io::policy_from_json(policy_text);
    } catch (const std::exception& e) {
        throw Failure(kValidation, std::string("invalid policy: ") + e.what());
    }
    if (loaded.config_sha256 != config_sha) {
        throw Failure(kHashMismatch, "policy was computed for a different config (sha256 " + loaded.config_sha256 +
                                         ", config is " + config_sha + ")");
    }
    if (fl.runs < 1) {
        throw Failure(kUsage, "--runs must be at least 1");
    }

    const FilterSchedule schedule = kalman::run_schedule(problem);
    SimulationOptions opts;
    opts.runs = fl.runs;
    opts.seed = fl.seed;
    opts.threads = fl.threads;
    opts.trajectories = fl.trajectories;
    const SimulationReport rep = run_closed_loop(problem, schedule, loaded.policy, opts);

    const fs::path dir(fl.out);
    fs::create_directories(dir);
    std::vector<std::string> names = {"simulation.json"};
    write_text(dir / names[0], io::report_to_json(rep, config_sha, sha256_hex(policy_text)));
    if (fl.trajectories > 0) {
        names.emplace_back("trajectories.csv");
        write_text(dir / names[1], io::trajectories_csv(rep));
    }
    ordered_json manifest;
    manifest["command"] = "simulate";
    manifest["config"] = {{"path", fl.config}, {"sha256", config_sha}};
    manifest["policy"] = {{"path", fl.policy}, {"sha256", sha256_hex(policy_text)}};
    manifest["tool_version"] = COVSTEER_VERSION;
    manifest["generator"] = rep.generator;
    manifest["seeds"] = {fl.seed};
    manifest["runs"] = fl.runs;
    manifest["batch_size"] = rep.batch_size;
    manifest["outputs"] = output_list(dir, names);
    write_text(dir / "simulation_manifest.json", manifest.dump(2) + "\n");

    out << "runs " << rep.runs << ", seed " << rep.seed << ", p_fail " << six(rep.p_fail) << '\n';
    out << std::left << std::setw(6) << "step" << std::setw(12) << "violations" << std::setw(14) << "rate"
        << std::setw(28) << "99% interval" << "ok\n";
    for (const auto& st : rep.steps) {
        std::ostringstream ci;
        ci << '[' << six(st.rate_lower) << ", " << six(st.rate_upper) << ']';
        out << std::left << std::setw(6) << st.step << std::setw(12) << st.violations << std::setw(14) << six(st.rate)
            << std::setw(28) << ci.str() << (st.rate <= rep.p_fail ? "yes" : "NO") << '\n';
    }
    out << std::right << "max rate " << six(rep.max_violation_rate) << " at step " << rep.worst_step << '\n';
    return kOk;
}

int cmd_check(const std::string& config, std::ostream& out) {
    std::string bytes;
    const SteeringProblem problem = load_valid(config, bytes);
    const FilterSchedule schedule = kalman::run_schedule(problem);
    const PrecheckResult pre = feasibility_precheck(problem, schedule);
    out << "config sha256 " << sha256_hex(bytes) << '\n'
        << "validation    pass\n"
        << "eig(P~_N)     ";
    for (Eigen::Index i = 0; i < pre.error_cov_eigenvalues.size(); ++i) {
        out << (i ? " " : "") << six(pre.error_cov_eigenvalues(i));
    }
    out << "\neig(P_f-P~_N) ";
    for (Eigen::Index i = 0; i < pre.margin_eigenvalues.size(); ++i) {
        out << (i ? " " : "") << six(pre.margin_eigenvalues(i));
    }
    out << "\nP_f margin    " << six(pre.min_margin_eigenvalue) << '\n';
    if (!pre.passed) {
        throw Failure(kValidation, "precheck failed: " + pre.message);
    }
    out << "precheck      pass\n";
    return kOk;
}

int cmd_schedule(const std::string& config, const std::string& out_dir, std::ostream& out) {
    std::string bytes;
    const SteeringProblem problem = load_valid(config, bytes);
    const FilterSchedule schedule = kalman::run_schedule(problem);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_text(dir / "schedule.csv", io::schedule_csv(schedule));
    out << "wrote " << (dir / "schedule.csv").string() << '\n';
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Output-feedback covariance steering: solve, simulate and inspect problem files"};
    app.name("covsteer");
    app.set_version_flag("--version", COVSTEER_VERSION);
    app.require_subcommand(1);

    SolveFlags sf;
    auto* solve_cmd = app.add_subcommand("solve", "Solve for the optimal policy and write analysis files");
    solve_cmd->add_option("config", sf.config, "Problem file (JSON)")->required();
    solve_cmd->add_option("--out", sf.out, "Output directory")->capture_default_str();
    solve_cmd->add_option("--bandwidth", sf.bandwidth, "Keep F blocks with k - i <= b (-1: full)")->capture_default_str();
    solve_cmd->add_option("--solver-tol", sf.solver_tol, "Interior-point tolerance")->capture_default_str();
    solve_cmd->add_option("--terminal-norm", sf.terminal_norm, "spectral (exact PSD) or frobenius")
        ->capture_default_str();
    solve_cmd->add_option("--ellipse-coords", sf.ellipse_coords, "State pair i,j for ellipses.csv")
        ->capture_default_str();
    solve_cmd->add_option("--ellipse-sigma", sf.ellipse_sigma, "Ellipse level in standard deviations")
        ->capture_default_str();
    solve_cmd->add_option("--export-conic", sf.export_conic, "Also write the conic program to this file");

    SimulateFlags mf;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo closed-loop simulation of a solved policy");
    sim_cmd->add_option("config", mf.config, "Problem file (JSON)")->required();
    sim_cmd->add_option("policy", mf.policy, "policy.json written by solve")->required();
    sim_cmd->add_option("--out", mf.out, "Output directory")->capture_default_str();
    sim_cmd->add_option("--runs", mf.runs, "Number of runs")->capture_default_str();
    sim_cmd->add_option("--seed", mf.seed, "Base seed")->capture_default_str();
    sim_cmd->add_option("--trajectories", mf.trajectories, "Store this many state trajectories")
        ->capture_default_str();
    sim_cmd->add_option("--threads", mf.threads, "Worker threads (0: hardware, capped by COVSTEER_THREADS)")
        ->capture_default_str();

    std::string check_config;
    auto* check_cmd = app.add_subcommand("check", "Validate a problem file and run the terminal precheck");
    check_cmd->add_option("config", check_config, "Problem file (JSON)")->required();

    std::string sched_config;
    std::string sched_out = ".";
    auto* sched_cmd = app.add_subcommand("schedule", "Write the Kalman filter schedule as CSV");
    sched_cmd->add_option("config", sched_config, "Problem file (JSON)")->required();
    sched_cmd->add_option("--out", sched_out, "Output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*solve_cmd) {
            return cmd_solve(sf, out);
        }
        if (*sim_cmd) {
            return cmd_simulate(mf, out);
        }
        if (*check_cmd) {
            return cmd_check(check_config, out);
        }
        if (*sched_cmd) {
            return cmd_schedule(sched_config, sched_out, out);
        }
    } catch (const Failure& f) {
        err << "error: " << f.what() << '\n';
        return f.code;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kNumerical;
    }
    return kUsage;
}

}  // namespace covsteer::cli
