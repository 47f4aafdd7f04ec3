#include "evmopf/conic_program.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "evmopf/text_util.hpp"

namespace evmopf {

double AffineExpr::evaluate(const std::vector<double>& x) const {
    double v = constant;
    for (const auto& [i, c] : terms) {
        v += c * x[i];
    }
    return v;
}

std::size_t ConicProgram::add_variable(std::string name, double lower, double upper, double cost) {
    names.push_back(std::move(name));
    lb.push_back(lower);
    ub.push_back(upper);
    objective.push_back(cost);
    return names.size() - 1;
}

double ConicProgram::evaluate_objective(const std::vector<double>& x) const {
    double v = offset;
    for (std::size_t i = 0; i < objective.size(); ++i) {
        v += objective[i] * x[i];
    }
    return v;
}

double ConicProgram::max_violation(const std::vector<double>& x) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        worst = std::max({worst, lb[i] - x[i], x[i] - ub[i]});
    }
    for (const auto& row : rows) {
        double v = 0.0;
        for (const auto& [i, c] : row.terms) {
            v += c * x[i];
        }
        worst = std::max({worst, row.lower - v, v - row.upper});
    }
    for (const auto& cone : cones) {
        std::vector<double> e;
        e.reserve(cone.entries.size());
        for (const auto& entry : cone.entries) {
            e.push_back(entry.evaluate(x));
        }
        double sq = 0.0;
        if (cone.kind == ConeKind::second_order) {
            for (std::size_t k = 1; k < e.size(); ++k) {
                sq += e[k] * e[k];
            }
            worst = std::max(worst, std::sqrt(sq) - e[0]);
        } else {
            for (std::size_t k = 2; k < e.size(); ++k) {
                sq += e[k] * e[k];
            }
            const double a = (e[0] + e[1]) / std::sqrt(2.0);
            const double b = (e[0] - e[1]) / std::sqrt(2.0);
            worst = std::max(worst, std::sqrt(sq + b * b) - a);
        }
    }
    return worst;
}

void ConicProgram::check() const {
    const std::size_t n = names.size();
    if (lb.size() != n || ub.size() != n || objective.size() != n) {
        throw std::invalid_argument("conic program variable arrays differ in length");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isnan(lb[i]) || std::isnan(ub[i]) || lb[i] > ub[i]) {
            throw std::invalid_argument("variable '" + names[i] + "' has invalid bounds");
        }
        if (!std::isfinite(objective[i])) {
            throw std::invalid_argument("variable '" + names[i] + "' has a non-finite cost");
        }
    }
    for (const auto& row : rows) {
        if (std::isnan(row.lower) || std::isnan(row.upper) || row.lower > row.upper) {
            throw std::invalid_argument("row '" + row.name + "' has invalid bounds");
        }
        for (const auto& [i, c] : row.terms) {
            if (i >= n || !std::isfinite(c)) {
                throw std::invalid_argument("row '" + row.name + "' has an invalid term");
            }
        }
    }
    for (const auto& cone : cones) {
        const std::size_t min_size = cone.kind == ConeKind::second_order ? 1 : 2;
        if (cone.entries.size() < min_size) {
            throw std::invalid_argument("cone '" + cone.name + "' has too few entries");
        }
        for (const auto& entry : cone.entries) {
            if (!std::isfinite(entry.constant)) {
                throw std::invalid_argument("cone '" + cone.name + "' has a non-finite constant");
            }
            for (const auto& [i, c] : entry.terms) {
                if (i >= n || !std::isfinite(c)) {
                    throw std::invalid_argument("cone '" + cone.name + "' has an invalid term");
                }
            }
        }
    }
}

namespace {

std::string quote_name(const std::string& name) {
    if (name.empty()) {
        return "_";
    }
    std::string out = name;
    std::replace_if(out.begin(), out.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }, '_');
    return out;
}

}  // namespace

std::string export_conic_program(const ConicProgram& program) {
    std::ostringstream out;
    const auto num = [](double v) { return text::format_double(v); };
    out << "CONIC_PROGRAM " << program.num_variables() << ' ' << program.rows.size() << ' '
        << program.cones.size() << '\n';
    out << "OFFSET " << num(program.offset) << '\n';
    for (std::size_t i = 0; i < program.num_variables(); ++i) {
        out << "v " << i << ' ' << quote_name(program.names[i]) << ' ' << num(program.lb[i]) << ' '
            << num(program.ub[i]) << ' ' << num(program.objective[i]) << '\n';
    }
    for (std::size_t r = 0; r < program.rows.size(); ++r) {
        const auto& row = program.rows[r];
        out << "r " << r << ' ' << num(row.lower) << ' ' << num(row.upper) << ' '
            << quote_name(row.name) << '\n';
        for (const auto& [i, c] : row.terms) {
            out << "A " << r << ' ' << i << ' ' << num(c) << '\n';
        }
    }
    for (std::size_t k = 0; k < program.cones.size(); ++k) {
        const auto& cone = program.cones[k];
        out << "k " << k << ' ' << (cone.kind == ConeKind::second_order ? "SOC" : "RSOC") << ' '
            << cone.entries.size() << ' ' << quote_name(cone.name) << '\n';
        for (std::size_t e = 0; e < cone.entries.size(); ++e) {
            const auto& entry = cone.entries[e];
            for (const auto& [i, c] : entry.terms) {
                out << "K " << k << ' ' << e << ' ' << i << ' ' << num(c) << '\n';
            }
            if (entry.constant != 0.0) {
                out << "K " << k << ' ' << e << " -1 " << num(entry.constant) << '\n';
            }
        }
    }
    return out.str();
}

ConicProgram import_conic_program(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    ConicProgram p;
    bool header = false;
    std::size_t nv = 0;
    std::size_t nr = 0;
    std::size_t nk = 0;
    const auto fail = [&](const std::string& what) {
        throw std::invalid_argument("line " + std::to_string(line_no) + ": " + what);
    };
    const auto number = [&](const std::string& tok) {
        const auto v = text::parse_double(tok);
        if (!v) {
            fail("bad number '" + tok + "'");
        }
        return *v;
    };
    const auto index = [&](const std::string& tok, std::size_t limit) {
        const auto v = text::parse_int(tok);
        if (!v || *v < 0 || static_cast<std::size_t>(*v) >= limit) {
            fail("bad index '" + tok + "'");
        }
        return static_cast<std::size_t>(*v);
    };
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string s; ls >> s;) {
            tok.push_back(s);
        }
        if (tok.empty() || tok[0][0] == '#') {
            continue;
        }
        if (!header) {
            if (tok.size() != 4 || tok[0] != "CONIC_PROGRAM") {
                fail("expected 'CONIC_PROGRAM <variables> <rows> <cones>'");
            }
            nv = index(tok[1], static_cast<std::size_t>(-1));
            nr = index(tok[2], static_cast<std::size_t>(-1));
            nk = index(tok[3], static_cast<std::size_t>(-1));
            p.names.resize(nv);
            p.lb.assign(nv, -kInf);
            p.ub.assign(nv, kInf);
            p.objective.assign(nv, 0.0);
            p.rows.resize(nr);
            p.cones.resize(nk);
            header = true;
            continue;
        }
        const std::string& kind = tok[0];
        if (kind == "OFFSET" && tok.size() == 2) {
            p.offset = number(tok[1]);
        } else if (kind == "v" && tok.size() == 6) {
            const auto i = index(tok[1], nv);
            p.names[i] = tok[2];
            p.lb[i] = number(tok[3]);
            p.ub[i] = number(tok[4]);
            p.objective[i] = number(tok[5]);
        } else if (kind == "r" && tok.size() == 5) {
            const auto r = index(tok[1], nr);
            p.rows[r].lower = number(tok[2]);
            p.rows[r].upper = number(tok[3]);
            p.rows[r].name = tok[4];
        } else if (kind == "A" && tok.size() == 4) {
            const auto r = index(tok[1], nr);
            p.rows[r].terms.emplace_back(index(tok[2], nv), number(tok[3]));
        } else if (kind == "k" && tok.size() == 5) {
            const auto k = index(tok[1], nk);
            if (tok[2] == "SOC") {
                p.cones[k].kind = ConeKind::second_order;
            } else if (tok[2] == "RSOC") {
                p.cones[k].kind = ConeKind::rotated;
            } else {
                fail("unknown cone kind '" + tok[2] + "'");
            }
            p.cones[k].entries.resize(index(tok[3], static_cast<std::size_t>(-1)));
            p.cones[k].name = tok[4];
        } else if (kind == "K" && tok.size() == 5) {
            const auto k = index(tok[1], nk);
            const auto e = index(tok[2], p.cones[k].entries.size());
            const double value = number(tok[4]);
            if (tok[3] == "-1") {
                p.cones[k].entries[e].constant += value;
            } else {
                p.cones[k].entries[e].add(index(tok[3], nv), value);
            }
        } else {
            fail("unrecognized record '" + kind + "'");
        }
    }
    if (!header) {
        throw std::invalid_argument("missing CONIC_PROGRAM header");
    }
    p.check();
    return p;
}

std::string dump_solution(const ConicProgram& program, const std::vector<double>& x) {
    std::ostringstream out;
    for (std::size_t i = 0; i < program.num_variables() && i < x.size(); ++i) {
        out << program.names[i] << ' ' << text::format_double(x[i], 17) << '\n';
    }
    return out.str();
}

}  // namespace evmopf
