#include "pmflow/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "pmflow/errors.hpp"

namespace pmflow::io {

namespace fs = std::filesystem;

std::string fmt(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
        text.remove_suffix(1);
    double x = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ConfigError("not a number: '" + std::string(text) + "'");
    return x;
}

int CsvTable::column(const std::string& name) const {
    for (size_t k = 0; k < header.size(); ++k) {
        if (header[k] == name) return static_cast<int>(k);
    }
    return -1;
}

std::string to_csv(const CsvTable& t) {
    std::string out;
    for (const std::string& c : t.comments) out += "# " + c + "\n";
    for (size_t k = 0; k < t.header.size(); ++k) out += (k ? "," : "") + t.header[k];
    out += "\n";
    for (const auto& row : t.rows) {
        for (size_t k = 0; k < row.size(); ++k) {
            if (k) out += ',';
            out += fmt(row[k]);
        }
        out += "\n";
    }
    return out;
}

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        const size_t k = line.find(sep, start);
        out.push_back(line.substr(start, k == std::string_view::npos ? k : k - start));
        if (k == std::string_view::npos) break;
        start = k + 1;
    }
    return out;
}

}  // namespace

CsvTable read_csv(const fs::path& path) {
    const std::string text = slurp(path);
    CsvTable t;
    bool have_header = false;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!have_header && line[0] == '#') {
            t.comments.push_back(line.size() > 2 ? line.substr(2) : "");
            continue;
        }
        const auto cells = split(line, ',');
        if (!have_header) {
            for (auto c : cells) t.header.emplace_back(c);
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size())
            throw ConfigError(path.string() + ": row width differs from header");
        std::vector<double> row;
        row.reserve(cells.size());
        for (auto c : cells) row.push_back(parse_double(c));
        t.rows.push_back(std::move(row));
    }
    if (!have_header) throw ConfigError(path.string() + ": empty table");
    return t;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json read_json(const fs::path& path) {
    try {
        return json::parse(slurp(path));
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

json config_to_json(const SolverConfig& c) {
    return {{"ns", c.ns},
            {"nt", c.nt},
            {"tol_pde", c.tol_pde},
            {"tol_shock", c.tol_shock},
            {"tol_pde_path", c.tol_pde_path},
            {"tol_shock_path", c.tol_shock_path},
            {"d_beta0", c.d_beta0},
            {"max_halvings", c.max_halvings},
            {"min_d_beta", c.min_d_beta},
            {"beta_margin", c.beta_margin},
            {"max_newton", c.max_newton},
            {"max_outer", c.max_outer},
            {"sonic_corner_refine", c.sonic_corner_refine},
            {"mu0", c.mu0},
            {"run_verify", c.run_verify}};
}

SolverConfig config_from_json(const json& j) {
    SolverConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("ns", c.ns);
    get("nt", c.nt);
    get("tol_pde", c.tol_pde);
    get("tol_shock", c.tol_shock);
    get("tol_pde_path", c.tol_pde_path);
    get("tol_shock_path", c.tol_shock_path);
    get("d_beta0", c.d_beta0);
    get("max_halvings", c.max_halvings);
    get("min_d_beta", c.min_d_beta);
    get("beta_margin", c.beta_margin);
    get("max_newton", c.max_newton);
    get("max_outer", c.max_outer);
    get("sonic_corner_refine", c.sonic_corner_refine);
    get("mu0", c.mu0);
    get("run_verify", c.run_verify);
    return c;
}

// Wall time is left out so that repeated runs write identical bytes.
json report_to_json(const SolutionField& f, const SolveReport& r, const SolverConfig& c) {
    const MappedDomain dom(f.gamma, f.params.v_inf, f.params.beta);
    json adm = json::object();
    for (const auto& [k, v] : r.admissibility) adm[k] = v;
    return {{"gamma", f.gamma},
            {"v_inf", f.params.v_inf},
            {"beta", f.params.beta},
            {"config", config_to_json(c)},
            {"converged", r.converged},
            {"stalled", r.stalled},
            {"iterations", r.iterations},
            {"total_iterations", r.total_iterations},
            {"newton_iterations", r.newton_iterations},
            {"continuation_steps", r.continuation_steps},
            {"beta_reached", r.beta_reached},
            {"shock_move", r.shock_move},
            {"residual", r.residual},
            {"transversality", r.transversality},
            {"ellipticity_flags", r.ellipticity_flags},
            {"message", r.message},
            {"admissibility", adm},
            {"topology", to_string(dom.geometry().topology)},
            {"shock_left", f.shock.value(0)},
            {"shock_right", f.shock.value(f.grid.ns())}};
}

json admissibility_to_json(const AdmissibilityReport& a) {
    json checks = json::object();
    for (const CheckResult& c : a.checks) {
        json values = json::object();
        for (const auto& [k, v] : c.values) values[k] = v;
        checks[c.name] = {{"pass", c.pass},
                          {"status", c.status},
                          {"worst_margin", c.worst_margin},
                          {"location", {c.location.x, c.location.y}},
                          {"values", values}};
    }
    return {{"pass", a.pass}, {"checks", checks}};
}

CsvTable solution_table(const SolutionField& f) {
    CsvTable t;
    t.header = {"s", "t", "u"};
    t.rows.reserve(f.grid.size());
    for (int i = 0; i <= f.grid.ns(); ++i) {
        for (int j = 0; j <= f.grid.nt(); ++j) t.rows.push_back({f.grid.s[i], f.grid.t[j], f.at(i, j)});
    }
    return t;
}

CsvTable shock_table(const SolutionField& f) {
    const MappedDomain dom(f.gamma, f.params.v_inf, f.params.beta);
    CsvTable t;
    t.header = {"s", "g", "xi1", "xi2"};
    for (int i = 0; i <= f.grid.ns(); ++i) {
        const double s = f.grid.s[i], g = f.shock.value(i);
        const Vec2 x = dom.from_strip({s, g});
        t.rows.push_back({s, g, x.x, x.y});
    }
    return t;
}

void write_solution(const fs::path& dir, const SolutionField& f, const SolveReport& r,
                    const SolverConfig& c) {
    fs::create_directories(dir);
    write_text(dir / "solution.csv", to_csv(solution_table(f)));
    write_text(dir / "shock.csv", to_csv(shock_table(f)));
    write_text(dir / "report.json", dump(report_to_json(f, r, c)));
}

SolutionField read_solution(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("not a solution directory: " + dir.string());
    const json rep = read_json(dir / "report.json");
    SolutionField f;
    try {
        f.gamma = rep.at("gamma").get<double>();
        f.params.v_inf = rep.at("v_inf").get<double>();
        f.params.beta = rep.at("beta").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError((dir / "report.json").string() + ": " + e.what());
    }
    const SolverConfig cfg = config_from_json(rep.value("config", json::object()));
    const int ns = cfg.ns, nt = cfg.nt;

    const CsvTable sol = read_csv(dir / "solution.csv");
    const int cs = sol.column("s"), ct = sol.column("t"), cu = sol.column("u");
    if (cs < 0 || ct < 0 || cu < 0) throw ConfigError("solution.csv needs columns s,t,u");
    if (static_cast<int>(sol.rows.size()) != (ns + 1) * (nt + 1))
        throw ConfigError("solution.csv does not match the grid in report.json");
    f.grid.s.resize(ns + 1);
    f.grid.t.resize(nt + 1);
    f.u.resize(sol.rows.size());
    for (int i = 0; i <= ns; ++i) {
        for (int j = 0; j <= nt; ++j) {
            const auto& row = sol.rows[static_cast<size_t>(i) * (nt + 1) + j];
            f.grid.s[i] = row[cs];
            f.grid.t[j] = row[ct];
            f.u[f.grid.index(i, j)] = row[cu];
        }
    }

    const CsvTable sh = read_csv(dir / "shock.csv");
    const int gs = sh.column("s"), gg = sh.column("g");
    if (gs < 0 || gg < 0 || static_cast<int>(sh.rows.size()) != ns + 1)
        throw ConfigError("shock.csv does not match the grid in report.json");
    std::vector<double> g(ns + 1);
    for (int i = 0; i <= ns; ++i) g[i] = sh.rows[i][gg];
    const MappedDomain dom(f.gamma, f.params.v_inf, f.params.beta);
    f.shock = ShockGraph(f.grid.s, std::move(g), dom.dg_left(), dom.dg_right());
    return f;
}

}  // namespace pmflow::io
