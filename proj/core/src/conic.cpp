#include "covsteer/conic.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace covsteer {

const char* cone_tag(ConeKind kind) {
    switch (kind) {
        case ConeKind::Zero: return "Z";
        case ConeKind::NonNegative: return "L";
        case ConeKind::SecondOrder: return "Q";
        case ConeKind::RotatedSecondOrder: return "R";
        case ConeKind::Semidefinite: return "S";
    }
    return "?";
}

const char* status_name(SolveStatus status) {
    switch (status) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::NumericalFailure: return "numerical-failure";
    }
    return "unknown";
}

Eigen::Index svec_index(Eigen::Index order, Eigen::Index row, Eigen::Index col) {
    if (row < col) {
        std::swap(row, col);
    }
    return col * order - col * (col - 1) / 2 + (row - col);
}

Vector svec(const Matrix& m) {
    const Eigen::Index p = m.rows();
    Vector out(p * (p + 1) / 2);
    Eigen::Index idx = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
        out(idx++) = m(j, j);
        for (Eigen::Index i = j + 1; i < p; ++i) {
            out(idx++) = std::numbers::sqrt2 * 0.5 * (m(i, j) + m(j, i));
        }
    }
    return out;
}

Matrix smat(const Vector& v, Eigen::Index p) {
    if (v.size() != p * (p + 1) / 2) {
        throw DimensionError("smat: packed length does not match order");
    }
    Matrix out(p, p);
    Eigen::Index idx = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
        out(j, j) = v(idx++);
        for (Eigen::Index i = j + 1; i < p; ++i) {
            const double value = v(idx++) / std::numbers::sqrt2;
            out(i, j) = value;
            out(j, i) = value;
        }
    }
    return out;
}

Eigen::Index ConicProgram::cone_rows() const {
    Eigen::Index total = 0;
    for (const auto& k : cones) {
        total += k.dim;
    }
    return total;
}

void ConicProgram::check() const {
    if (G.rows() != h.size() || G.cols() != c.size()) {
        throw DimensionError("ConicProgram: G is " + std::to_string(G.rows()) + "x" + std::to_string(G.cols()) +
                             " but h has " + std::to_string(h.size()) + " rows and c has " +
                             std::to_string(c.size()) + " entries");
    }
    if (cone_rows() != h.size()) {
        throw DimensionError("ConicProgram: cone dimensions sum to " + std::to_string(cone_rows()) +
                             " but there are " + std::to_string(h.size()) + " rows");
    }
    for (const auto& k : cones) {
        if (k.kind == ConeKind::Semidefinite && k.dim != k.order * (k.order + 1) / 2) {
            throw DimensionError("ConicProgram: semidefinite cone dimension does not match its order");
        }
        if ((k.kind == ConeKind::SecondOrder && k.dim < 1) || (k.kind == ConeKind::RotatedSecondOrder && k.dim < 2)) {
            throw DimensionError("ConicProgram: degenerate second-order cone");
        }
    }
    if (!variables.empty() && static_cast<Eigen::Index>(variables.size()) != c.size()) {
        throw DimensionError("ConicProgram: variable map does not cover every variable");
    }
}

namespace {

const char* variable_tag(VariableKind kind) {
    switch (kind) {
        case VariableKind::Feedback: return "F";
        case VariableKind::Feedforward: return "M";
        case VariableKind::Auxiliary: return "T";
    }
    return "?";
}

std::string expect_token(std::istream& is, const std::string& expected) {
    std::string tok;
    if (!(is >> tok) || tok != expected) {
        throw std::runtime_error("read_conic_program: expected '" + expected + "', found '" + tok + "'");
    }
    return tok;
}

}  // namespace

void write_conic_program(std::ostream& os, const ConicProgram& p) {
    p.check();
    std::ostringstream buf;
    buf.precision(17);
    buf << "covsteer-conic 1\n";
    buf << "variables " << p.num_variables() << "\n";
    buf << "rows " << p.num_rows() << "\n";
    buf << "offset " << p.objective_offset << "\n";
    buf << "cones " << p.cones.size() << "\n";
    for (const auto& k : p.cones) {
        buf << cone_tag(k.kind) << ' ' << (k.kind == ConeKind::Semidefinite ? k.order : k.dim) << "\n";
    }
    buf << "c\n";
    for (Eigen::Index i = 0; i < p.c.size(); ++i) {
        buf << p.c(i) << "\n";
    }
    buf << "h\n";
    for (Eigen::Index i = 0; i < p.h.size(); ++i) {
        buf << p.h(i) << "\n";
    }
    buf << "G " << p.G.nonZeros() << "\n";
    for (Eigen::Index col = 0; col < p.G.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(p.G, col); it; ++it) {
            buf << it.row() << ' ' << it.col() << ' ' << it.value() << "\n";
        }
    }
    buf << "map " << p.variables.size() << "\n";
    for (const auto& v : p.variables) {
        buf << variable_tag(v.kind) << ' ' << v.row << ' ' << v.col << "\n";
    }
    buf << "end\n";
    os << buf.str();
}

ConicProgram read_conic_program(std::istream& is) {
    ConicProgram p;
    std::string tok;
    int version = 0;
    expect_token(is, "covsteer-conic");
    is >> version;
    if (version != 1) {
        throw std::runtime_error("read_conic_program: unsupported version");
    }
    Eigen::Index n = 0;
    Eigen::Index m = 0;
    std::size_t ncones = 0;
    expect_token(is, "variables");
    is >> n;
    expect_token(is, "rows");
    is >> m;
    expect_token(is, "offset");
    is >> p.objective_offset;
    expect_token(is, "cones");
    is >> ncones;
    for (std::size_t i = 0; i < ncones; ++i) {
        Eigen::Index size = 0;
        is >> tok >> size;
        if (tok == "Z") p.cones.push_back(Cone::zero(size));
        else if (tok == "L") p.cones.push_back(Cone::nonnegative(size));
        else if (tok == "Q") p.cones.push_back(Cone::second_order(size));
        else if (tok == "R") p.cones.push_back(Cone::rotated(size));
        else if (tok == "S") p.cones.push_back(Cone::semidefinite(size));
        else throw std::runtime_error("read_conic_program: unknown cone tag '" + tok + "'");
    }
    expect_token(is, "c");
    p.c.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        is >> p.c(i);
    }
    expect_token(is, "h");
    p.h.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        is >> p.h(i);
    }
    expect_token(is, "G");
    std::size_t nnz = 0;
    is >> nnz;
    std::vector<Triplet> triplets;
    triplets.reserve(nnz);
    for (std::size_t i = 0; i < nnz; ++i) {
        Eigen::Index r = 0;
        Eigen::Index c = 0;
        double v = 0.0;
        is >> r >> c >> v;
        triplets.emplace_back(r, c, v);
    }
    p.G.resize(m, n);
    p.G.setFromTriplets(triplets.begin(), triplets.end());
    expect_token(is, "map");
    std::size_t nvars = 0;
    is >> nvars;
    for (std::size_t i = 0; i < nvars; ++i) {
        VariableRef v;
        is >> tok >> v.row >> v.col;
        v.kind = tok == "F" ? VariableKind::Feedback : tok == "M" ? VariableKind::Feedforward : VariableKind::Auxiliary;
        p.variables.push_back(v);
    }
    expect_token(is, "end");
    if (!is) {
        throw std::runtime_error("read_conic_program: truncated input");
    }
    p.check();
    return p;
}

}  // namespace covsteer
