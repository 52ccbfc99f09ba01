#include "mpqp/io.hpp"

#include "mpqp/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace mpqp {

json matrix_to_json(const MatrixXd& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

MatrixXd matrix_from_json(const json& j, const std::string& field) {
    try {
        const Index rows = j.at("rows").get<Index>();
        const Index cols = j.at("cols").get<Index>();
        const auto data = j.at("data").get<std::vector<double>>();
        if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols)
            throw ParseError(field + ": data length does not match rows x cols");
        MatrixXd m(rows, cols);
        for (Index i = 0; i < rows; ++i)
            for (Index k = 0; k < cols; ++k) m(i, k) = data[static_cast<std::size_t>(i * cols + k)];
        return m;
    } catch (const json::exception& e) {
        throw ParseError(field + ": " + e.what());
    }
}

json vector_to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd vector_from_json(const json& j, const std::string& field) {
    try {
        const auto data = j.get<std::vector<double>>();
        return Eigen::Map<const VectorXd>(data.data(), static_cast<Index>(data.size()));
    } catch (const json::exception& e) {
        throw ParseError(field + ": " + e.what());
    }
}

json problem_to_json(const QpProblem& p) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "mpqp.problem";
    j["n"] = p.n();
    j["m1"] = p.m1();
    j["m2"] = p.m2();
    j["Q"] = matrix_to_json(p.Q);
    j["C"] = vector_to_json(p.C);
    j["C0"] = p.C0;
    j["Ae"] = matrix_to_json(p.Ae);
    j["be"] = vector_to_json(p.be);
    j["Ac"] = matrix_to_json(p.Ac);
    j["bc"] = vector_to_json(p.bc);
    j["varying_mask"] = std::vector<bool>(p.varying.begin(), p.varying.end());
    j["primary_block"] = p.primary_block ? json(*p.primary_block) : json(nullptr);
    return j;
}

QpProblem problem_from_json(const json& j) {
    try {
        if (j.at("schema_version").get<int>() != kSchemaVersion)
            throw ParseError("problem: unsupported schema_version");
        QpProblem p;
        p.Q = matrix_from_json(j.at("Q"), "Q");
        p.C = vector_from_json(j.at("C"), "C");
        p.C0 = j.at("C0").get<double>();
        p.Ae = matrix_from_json(j.at("Ae"), "Ae");
        p.be = vector_from_json(j.at("be"), "be");
        p.Ac = matrix_from_json(j.at("Ac"), "Ac");
        p.bc = vector_from_json(j.at("bc"), "bc");
        p.varying = j.at("varying_mask").get<std::vector<bool>>();
        if (j.contains("primary_block") && !j["primary_block"].is_null())
            p.primary_block = j["primary_block"].get<Index>();
        // Empty constraint blocks still need the right column count.
        if (p.Ae.rows() == 0) p.Ae.resize(0, p.Q.rows());
        if (p.Ac.rows() == 0) p.Ac.resize(0, p.Q.rows());
        if (j.value("n", p.n()) != p.n() || j.value("m1", p.m1()) != p.m1() || j.value("m2", p.m2()) != p.m2())
            throw ParseError("problem: declared dimensions disagree with matrices");
        p.validate();
        return p;
    } catch (const json::exception& e) {
        throw ParseError(std::string("problem: ") + e.what());
    }
}

json solution_to_json(const FullSolution& s) {
    return {{"x", vector_to_json(s.x)}, {"lambda", vector_to_json(s.lambda)}, {"mu", vector_to_json(s.mu)}};
}

FullSolution solution_from_json(const json& j) {
    try {
        return {vector_from_json(j.at("x"), "x"), vector_from_json(j.at("lambda"), "lambda"),
                vector_from_json(j.at("mu"), "mu")};
    } catch (const json::exception& e) {
        throw ParseError(std::string("solution: ") + e.what());
    }
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string fingerprint(const QpProblem& problem) { return fnv1a_hex(problem_to_json(problem).dump()); }

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << text;
}

json read_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

double parse_double(const std::string& text, const std::string& context) {
    std::size_t b = text.find_first_not_of(" \t\r");
    std::size_t e = text.find_last_not_of(" \t\r");
    if (b == std::string::npos) throw ParseError(context + ": empty numeric field");
    std::string_view s(text.data() + b, e - b + 1);
    if (s == "nan") return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError(context + ": not a number: '" + std::string(s) + "'");
    return v;
}

Index CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<Index>(i);
    return -1;
}

std::vector<Index> CsvTable::columns_with_prefix(const std::string& prefix) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i].rfind(prefix, 0) == 0) out.push_back(static_cast<Index>(i));
    return out;
}

CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            if (cells.size() != t.header.size())
                throw ParseError("csv line " + std::to_string(lineno) + ": expected " +
                                 std::to_string(t.header.size()) + " fields, got " + std::to_string(cells.size()));
            t.rows.push_back(std::move(cells));
        }
    }
    if (first) throw ParseError("csv: missing header row");
    return t;
}

std::string write_csv(const CsvTable& table) {
    std::ostringstream os;
    auto emit = [&os](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
        os << '\n';
    };
    emit(table.header);
    for (const auto& r : table.rows) emit(r);
    return os.str();
}

MatrixXd read_matrix_csv(const std::filesystem::path& path, std::vector<std::string>* header) {
    const CsvTable t = parse_csv(read_text(path));
    MatrixXd m(static_cast<Index>(t.rows.size()), static_cast<Index>(t.header.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (std::size_t c = 0; c < t.header.size(); ++c)
            m(static_cast<Index>(r), static_cast<Index>(c)) =
                parse_double(t.rows[r][c], path.string() + " row " + std::to_string(r + 1));
    if (header) *header = t.header;
    return m;
}

void write_matrix_csv(const std::filesystem::path& path, const MatrixXd& m, const std::vector<std::string>& header) {
    CsvTable t{header, {}};
    for (Index r = 0; r < m.rows(); ++r) {
        std::vector<std::string> row;
        for (Index c = 0; c < m.cols(); ++c) row.push_back(format_double(m(r, c)));
        t.rows.push_back(std::move(row));
    }
    write_text(path, write_csv(t));
}

}  // namespace mpqp
