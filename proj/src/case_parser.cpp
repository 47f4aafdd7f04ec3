#include "evmopf/case_parser.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "evmopf/text_util.hpp"

namespace evmopf {

CaseParseError::CaseParseError(const std::string& what, std::size_t line, std::size_t column)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ", column " +
                                        std::to_string(column) + ": " + what
                                  : what),
      line_(line),
      column_(column) {}

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Row {
    std::vector<double> values;
    std::size_t line = 0;
};

struct Matrix {
    std::vector<Row> rows;
    std::size_t line = 0;
};

/// Minimal scanner for MATPOWER assignment syntax.
class Scanner {
public:
    explicit Scanner(std::string_view text) : text_(text) {}

    bool at_end() {
        skip_space_and_comments(true);
        return pos_ >= text_.size();
    }

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

    [[noreturn]] void fail(const std::string& message) const {
        throw CaseParseError(message, line_, column_);
    }

    void skip_space_and_comments(bool newlines) {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == '%') {
                while (pos_ < text_.size() && text_[pos_] != '\n') {
                    advance();
                }
            } else if (c == '\n' && !newlines) {
                return;
            } else if (std::isspace(static_cast<unsigned char>(c)) || c == ',' ) {
                if (c == ',' && !newlines) {
                    return;
                }
                advance();
            } else if (c == '.' && pos_ + 2 < text_.size() && text_.substr(pos_, 3) == "...") {
                // line continuation
                while (pos_ < text_.size() && text_[pos_] != '\n') {
                    advance();
                }
                if (pos_ < text_.size()) {
                    advance();
                }
            } else {
                return;
            }
        }
    }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            column_ = 1;
        } else {
            ++column_;
        }
        ++pos_;
    }

    void expect(char c) {
        skip_space_and_comments(true);
        if (peek() != c) {
            fail(std::string("expected '") + c + "'");
        }
        advance();
    }

    std::string identifier() {
        skip_space_and_comments(true);
        std::string out;
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
                out.push_back(c);
                advance();
            } else {
                break;
            }
        }
        if (out.empty()) {
            fail("expected identifier");
        }
        return out;
    }

    void skip_to_end_of_line() {
        while (pos_ < text_.size() && text_[pos_] != '\n') {
            advance();
        }
    }

    std::string rest_of_line() {
        std::string out;
        while (pos_ < text_.size() && text_[pos_] != '\n') {
            out.push_back(text_[pos_]);
            advance();
        }
        return out;
    }

    void skip_string() {
        const char quote = peek();
        const std::size_t l = line_;
        const std::size_t c = column_;
        advance();
        while (pos_ < text_.size()) {
            if (text_[pos_] == quote) {
                advance();
                if (peek() == quote) {  // doubled quote escapes itself
                    advance();
                    continue;
                }
                return;
            }
            if (text_[pos_] == '\n') {
                break;
            }
            advance();
        }
        throw CaseParseError("unterminated string", l, c);
    }

    void skip_cell() {
        const std::size_t l = line_;
        const std::size_t c = column_;
        int depth = 0;
        while (pos_ < text_.size()) {
            const char ch = text_[pos_];
            if (ch == '\'' || ch == '"') {
                skip_string();
                continue;
            }
            if (ch == '%') {
                skip_to_end_of_line();
                continue;
            }
            if (ch == '{') {
                ++depth;
            } else if (ch == '}') {
                --depth;
                if (depth == 0) {
                    advance();
                    return;
                }
            }
            advance();
        }
        throw CaseParseError("unterminated cell array", l, c);
    }

    double number() {
        skip_space_and_comments(false);
        const std::size_t l = line_;
        const std::size_t c = column_;
        std::string token;
        while (pos_ < text_.size()) {
            const char ch = text_[pos_];
            if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '+' ||
                ch == '-') {
                token.push_back(ch);
                advance();
            } else {
                break;
            }
        }
        const auto value = text::parse_double(token);
        if (!value) {
            throw CaseParseError("invalid number '" + token + "'", l, c);
        }
        return *value;
    }

    Matrix matrix() {
        Matrix m;
        m.line = line_;
        const std::size_t open_line = line_;
        const std::size_t open_col = column_;
        advance();  // '['
        Row current;
        current.line = line_;
        auto finish_row = [&]() {
            if (!current.values.empty()) {
                m.rows.push_back(std::move(current));
            }
            current = Row{};
            current.line = line_;
        };
        while (true) {
            skip_space_and_comments(false);
            if (pos_ >= text_.size()) {
                throw CaseParseError("unterminated matrix", open_line, open_col);
            }
            const char ch = peek();
            if (ch == ']') {
                advance();
                finish_row();
                return m;
            }
            if (ch == ';' || ch == '\n') {
                advance();
                finish_row();
                continue;
            }
            if (ch == ',') {
                advance();
                continue;
            }
            if (current.values.empty()) {
                current.line = line_;
            }
            current.values.push_back(number());
        }
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t column_ = 1;
};

struct RawCase {
    std::string name;
    std::optional<double> base_mva;
    std::map<std::string, Matrix> matrices;
};

RawCase scan(std::string_view text) {
    RawCase raw;
    Scanner sc(text);
    while (!sc.at_end()) {
        const std::size_t stmt_line = sc.line();
        const std::size_t stmt_col = sc.column();
        std::string lhs = sc.identifier();
        if (lhs == "function") {
            const std::string rest = sc.rest_of_line();
            const auto eq = rest.find('=');
            raw.name = std::string(text::trim(eq == std::string::npos ? rest : rest.substr(eq + 1)));
            continue;
        }
        if (lhs.rfind("mpc.", 0) == 0) {
            lhs = lhs.substr(4);
        } else {
            throw CaseParseError("unexpected statement '" + lhs + "'", stmt_line, stmt_col);
        }
        sc.expect('=');
        sc.skip_space_and_comments(true);
        const char c = sc.peek();
        if (c == '[') {
            raw.matrices[lhs] = sc.matrix();
        } else if (c == '{') {
            sc.skip_cell();
        } else if (c == '\'' || c == '"') {
            sc.skip_string();
        } else {
            const double value = sc.number();
            if (lhs == "baseMVA") {
                raw.base_mva = value;
            }
        }
        sc.skip_space_and_comments(false);
        if (sc.peek() == ';') {
            sc.advance();
        }
    }
    return raw;
}

const Matrix& require(const RawCase& raw, const std::string& key, std::size_t min_cols) {
    const auto it = raw.matrices.find(key);
    if (it == raw.matrices.end()) {
        throw CaseParseError("missing mpc." + key + " table");
    }
    for (const auto& row : it->second.rows) {
        if (row.values.size() < min_cols) {
            throw CaseParseError("mpc." + key + " row has " + std::to_string(row.values.size()) +
                                     " columns, expected at least " + std::to_string(min_cols),
                                 row.line, 1);
        }
    }
    return it->second;
}

double angle_bound(double angmin_deg, double angmax_deg) {
    auto limited = [](double deg) { return deg != 0.0 && std::abs(deg) < 360.0; };
    double bound = 90.0;
    if (limited(angmin_deg)) {
        bound = std::min(bound, std::abs(angmin_deg));
    }
    if (limited(angmax_deg)) {
        bound = std::min(bound, std::abs(angmax_deg));
    }
    return bound * kDegToRad;
}

CostPolynomial parse_cost(const Row& row, double base_mva) {
    const int model = static_cast<int>(row.values[0]);
    if (model == 1) {
        throw CaseParseError("piecewise-linear generator costs are not supported", row.line, 1);
    }
    if (model != 2) {
        throw CaseParseError("unknown gencost model " + std::to_string(model), row.line, 1);
    }
    const auto ncost = static_cast<std::size_t>(row.values[3]);
    if (row.values.size() < 4 + ncost) {
        throw CaseParseError("gencost row shorter than its NCOST", row.line, 1);
    }
    // Coefficients are listed highest order first.
    std::vector<double> coeff(row.values.begin() + 4, row.values.begin() + 4 + ncost);
    std::reverse(coeff.begin(), coeff.end());
    for (std::size_t k = 3; k < coeff.size(); ++k) {
        if (coeff[k] != 0.0) {
            throw CaseParseError("generator cost polynomial of degree > 2", row.line, 1);
        }
    }
    coeff.resize(std::max<std::size_t>(coeff.size(), 3), 0.0);
    CostPolynomial cost;
    cost.constant = coeff[0];
    cost.linear = coeff[1] * base_mva;
    cost.quadratic = coeff[2] * base_mva * base_mva;
    if (cost.quadratic < 0.0) {
        throw CaseParseError("nonconvex cost polynomial (negative quadratic coefficient)",
                             row.line, 1);
    }
    return cost;
}

}  // namespace

Network parse_case(std::string_view text) {
    const RawCase raw = scan(text);
    if (!raw.base_mva) {
        throw CaseParseError("missing mpc.baseMVA");
    }
    const Matrix& bus_m = require(raw, "bus", 13);
    const Matrix& gen_m = require(raw, "gen", 10);
    const Matrix& branch_m = require(raw, "branch", 11);
    const Matrix& cost_m = require(raw, "gencost", 4);

    Network net;
    net.name = raw.name;
    net.base_mva = *raw.base_mva;
    if (!(net.base_mva > 0.0)) {
        throw CaseParseError("baseMVA must be positive", bus_m.line, 1);
    }
    const double base = net.base_mva;

    std::map<int, std::size_t> index_of;
    for (const auto& row : bus_m.rows) {
        const auto& v = row.values;
        Bus bus;
        bus.id = static_cast<int>(v[0]);
        bus.type = static_cast<int>(v[1]);
        bus.pd = v[2] / base;
        bus.qd = v[3] / base;
        bus.gs = v[4] / base;
        bus.bs = v[5] / base;
        bus.base_kv = v[9];
        bus.v_max = v[11];
        bus.v_min = v[12];
        if (!index_of.emplace(bus.id, net.buses.size()).second) {
            throw CaseParseError("duplicate bus id " + std::to_string(bus.id), row.line, 1);
        }
        net.buses.push_back(bus);
    }

    auto lookup = [&index_of](double id, const Row& row, const char* what) {
        const auto it = index_of.find(static_cast<int>(id));
        if (it == index_of.end()) {
            throw CaseParseError(std::string(what) + " references missing bus " +
                                     std::to_string(static_cast<int>(id)),
                                 row.line, 1);
        }
        return it->second;
    };

    if (cost_m.rows.size() < gen_m.rows.size()) {
        throw CaseParseError("mpc.gencost has fewer rows than mpc.gen", cost_m.line, 1);
    }
    for (std::size_t g = 0; g < gen_m.rows.size(); ++g) {
        const auto& row = gen_m.rows[g];
        const auto& v = row.values;
        const std::size_t bus = lookup(v[0], row, "generator");
        const CostPolynomial cost = parse_cost(cost_m.rows[g], base);
        if (v[7] <= 0.0) {
            continue;  // out of service
        }
        Generator gen;
        gen.bus = bus;
        gen.p_set = v[1] / base;
        gen.q_set = v[2] / base;
        gen.q_max = v[3] / base;
        gen.q_min = v[4] / base;
        gen.v_set = v[5];
        gen.p_max = v[8] / base;
        gen.p_min = v[9] / base;
        gen.cost = cost;
        net.generators.push_back(gen);
    }

    for (const auto& row : branch_m.rows) {
        const auto& v = row.values;
        const std::size_t from = lookup(v[0], row, "branch");
        const std::size_t to = lookup(v[1], row, "branch");
        if (v[10] <= 0.0) {
            continue;
        }
        Line line;
        line.from = from;
        line.to = to;
        line.r = v[2];
        line.x = v[3];
        line.b_charge = v[4];
        line.s_max = v[5] > 0.0 ? v[5] / base : kInf;
        line.tap = v[8] == 0.0 ? 1.0 : v[8];
        line.shift = v[9] * kDegToRad;
        const double angmin = v.size() > 11 ? v[11] : -360.0;
        const double angmax = v.size() > 12 ? v[12] : 360.0;
        line.angle_max = angle_bound(angmin, angmax);
        try {
            line.y = build_admittance(line.r, line.x, line.b_charge, line.tap, line.shift);
        } catch (const std::invalid_argument& e) {
            throw CaseParseError(e.what(), row.line, 1);
        }
        net.lines.push_back(line);
    }
    rebuild_incidence(net);
    return net;
}

Network parse_case_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw CaseParseError("cannot open case file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_case(ss.str());
}

std::string write_case(const Network& net) {
    using text::format_double;
    const double base = net.base_mva;
    std::ostringstream out;
    out << "function mpc = " << (net.name.empty() ? "evmopf_case" : net.name) << "\n";
    out << "mpc.version = '2';\n";
    out << "mpc.baseMVA = " << format_double(base) << ";\n\n";

    out << "%% bus data\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n";
    out << "mpc.bus = [\n";
    for (const auto& b : net.buses) {
        out << '\t' << b.id << '\t' << b.type << '\t' << format_double(b.pd * base) << '\t'
            << format_double(b.qd * base) << '\t' << format_double(b.gs * base) << '\t'
            << format_double(b.bs * base) << "\t1\t1.0\t0.0\t" << format_double(b.base_kv)
            << "\t1\t" << format_double(b.v_max) << '\t' << format_double(b.v_min) << ";\n";
    }
    out << "];\n\n";

    out << "%% generator data\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n";
    out << "mpc.gen = [\n";
    for (const auto& g : net.generators) {
        out << '\t' << net.buses[g.bus].id << '\t' << format_double(g.p_set * base) << '\t'
            << format_double(g.q_set * base) << '\t' << format_double(g.q_max * base) << '\t'
            << format_double(g.q_min * base) << '\t' << format_double(g.v_set) << '\t'
            << format_double(base) << "\t1\t" << format_double(g.p_max * base) << '\t'
            << format_double(g.p_min * base) << ";\n";
    }
    out << "];\n\n";

    out << "%% generator cost data\n%\t2\tstartup\tshutdown\tn\tc(n-1)\t...\tc0\n";
    out << "mpc.gencost = [\n";
    for (const auto& g : net.generators) {
        out << "\t2\t0\t0\t3\t" << format_double(g.cost.quadratic / (base * base)) << '\t'
            << format_double(g.cost.linear / base) << '\t' << format_double(g.cost.constant)
            << ";\n";
    }
    out << "];\n\n";

    out << "%% branch data\n"
        << "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\n";
    out << "mpc.branch = [\n";
    for (const auto& l : net.lines) {
        const double rate = std::isinf(l.s_max) ? 0.0 : l.s_max * base;
        const double ang = l.angle_max / kDegToRad;
        out << '\t' << net.buses[l.from].id << '\t' << net.buses[l.to].id << '\t'
            << format_double(l.r) << '\t' << format_double(l.x) << '\t'
            << format_double(l.b_charge) << '\t' << format_double(rate) << '\t'
            << format_double(rate) << '\t' << format_double(rate) << '\t'
            << format_double(l.tap) << '\t' << format_double(l.shift / kDegToRad) << "\t1\t"
            << format_double(-ang) << '\t' << format_double(ang) << ";\n";
    }
    out << "];\n";
    return out.str();
}

std::string dump_network(const Network& net) {
    auto f = [](double v) { return text::format_double(v, 12); };
    std::ostringstream out;
    out << "network name=" << net.name << " base_mva=" << f(net.base_mva)
        << " buses=" << net.buses.size() << " lines=" << net.lines.size()
        << " generators=" << net.generators.size() << '\n';
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        const auto& b = net.buses[i];
        out << "bus index=" << i << " id=" << b.id << " type=" << b.type << " pd=" << f(b.pd)
            << " qd=" << f(b.qd) << " gs=" << f(b.gs) << " bs=" << f(b.bs)
            << " vmin=" << f(b.v_min) << " vmax=" << f(b.v_max) << " neighbors=";
        for (std::size_t k = 0; k < b.lines.size(); ++k) {
            out << (k ? "," : "") << b.lines[k];
        }
        out << '\n';
    }
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        const auto& gen = net.generators[g];
        out << "gen index=" << g << " bus=" << net.buses[gen.bus].id << " pmin=" << f(gen.p_min)
            << " pmax=" << f(gen.p_max) << " qmin=" << f(gen.q_min) << " qmax=" << f(gen.q_max)
            << " cost2=" << f(gen.cost.quadratic) << " cost1=" << f(gen.cost.linear)
            << " cost0=" << f(gen.cost.constant) << '\n';
    }
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        const auto& line = net.lines[l];
        out << "line index=" << l << " from=" << net.buses[line.from].id
            << " to=" << net.buses[line.to].id << " r=" << f(line.r) << " x=" << f(line.x)
            << " b=" << f(line.b_charge) << " tap=" << f(line.tap) << " shift=" << f(line.shift)
            << " smax=" << f(line.s_max) << " anglemax=" << f(line.angle_max)
            << " g_ij=" << f(line.y.g_ij) << " b_ij=" << f(line.y.b_ij)
            << " g_ji=" << f(line.y.g_ji) << " b_ji=" << f(line.y.b_ji)
            << " g_ff=" << f(line.y.g_ff) << " b_ff=" << f(line.y.b_ff)
            << " g_tt=" << f(line.y.g_tt) << " b_tt=" << f(line.y.b_tt) << '\n';
    }
    return out.str();
}

}  // namespace evmopf
