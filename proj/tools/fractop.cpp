// fractop: command-line front end for the analysis library. Loads IFS specs,
// runs the requested pipeline, and emits deterministic JSON reports plus
// optional SVG/DOT renderings.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fractop/automaton.hpp"
#include "fractop/dendrite.hpp"
#include "fractop/gasket.hpp"
#include "fractop/graph.hpp"
#include "fractop/ifs.hpp"
#include "fractop/metric.hpp"

using namespace fractop;
using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Errc::Parse, path + ": " + e.what());
    }
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot open " + path + " for writing");
    out << content;
    if (!out) throw Error(Errc::Io, "failed writing " + path);
}

int env_thread_cap(std::vector<std::string>& warnings) {
    const char* raw = std::getenv("FRACTOP_THREADS");
    if (raw == nullptr) return 1;
    try {
        int v = std::stoi(raw);
        if (v >= 1) return v;
    } catch (const std::exception&) {
    }
    warnings.push_back("ignoring invalid FRACTOP_THREADS value");
    return 1;
}

std::pair<int, int> parse_range(const std::string& s) {
    try {
        auto pos = s.find("..");
        if (pos == std::string::npos) {
            int v = std::stoi(s);
            return {v, v};
        }
        int lo = std::stoi(s.substr(0, pos));
        int hi = std::stoi(s.substr(pos + 2));
        if (lo < 1 || hi < lo) throw Error(Errc::DomainError, "bad level range: " + s);
        return {lo, hi};
    } catch (const std::invalid_argument&) {
        throw Error(Errc::Parse, "cannot parse level range: " + s);
    } catch (const std::out_of_range&) {
        throw Error(Errc::Parse, "level range out of range: " + s);
    }
}

std::string fraction_str(const Rational& q) {
    std::ostringstream os;
    os << q;
    return os.str();
}

// Shared per-command plumbing: spec digest, seed, warnings, timing, and the
// choice between the JSON report and a terse human summary.
struct Emitter {
    std::string command;
    std::string digest;
    unsigned seed = 0;
    bool as_json = false;
    bool timing = false;
    std::vector<std::string> warnings;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    int emit(const json& results, const std::vector<std::string>& human_lines,
             int exit_code = 0) {
        if (as_json) {
            json report;
            report["schema_version"] = kSchemaVersion;
            report["command"] = command;
            report["digest"] = digest;
            report["seed"] = seed;
            report["threads"] = env_thread_cap(warnings);
            report["results"] = results;
            report["warnings"] = warnings;
            long ms = 0;
            if (timing)
                ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - start)
                         .count();
            report["timing_ms"] = ms;
            std::cout << report.dump(2) << "\n";
        } else {
            for (const std::string& line : human_lines) std::cout << line << "\n";
            for (const std::string& w : warnings) std::cout << "warning: " << w << "\n";
        }
        return exit_code;
    }
};

struct LoadedSpec {
    IfsSpec spec;
    std::string digest;
};

LoadedSpec load_spec(const std::string& path) {
    json j = load_json_file(path);
    return {IfsSpec::from_json(j), hex64(fnv1a(j.dump()))};
}

std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(15) << x;
    return os.str();
}

// ---------------------------------------------------------------------------
// validate

int cmd_validate(const std::string& path, int depth, Emitter em) {
    LoadedSpec loaded = load_spec(path);
    em.digest = loaded.digest;
    const IfsSpec& spec = loaded.spec;
    PostCriticalData pcd = compute_post_critical(spec);
    SeparationReport sep = verify_sic_asc(spec, pcd, depth);

    json results;
    results["maps"] = spec.size();
    results["identifications"] = spec.identifications.size();
    results["post_critical_points"] = pcd.points.size();
    json boundary = json::array();
    for (Symbol s : pcd.boundary_symbols) boundary.push_back(s);
    results["boundary_symbols"] = boundary;
    results["sic"] = sep.sic_ok;
    results["asc"] = sep.asc_ok;
    results["xi1"] = sep.xi1;
    results["xi2"] = sep.xi2;
    results["asc_constant"] = sep.asc_constant;
    results["violations"] = sep.violations;

    json shapes = json::array();
    try {
        validate_gasket(spec);
        shapes.push_back("gasket");
    } catch (const Error&) {
    }
    try {
        if (certify_dendrite(spec, pcd)) shapes.push_back("dendrite");
    } catch (const Error&) {
    }
    results["shapes"] = shapes;

    bool clean = sep.sic_ok && sep.asc_ok;
    std::vector<std::string> lines{
        path + ": " + std::to_string(spec.size()) + " maps, " +
            std::to_string(pcd.points.size()) + " post-critical points",
        std::string("single intersections: ") + (sep.sic_ok ? "ok" : "VIOLATED"),
        std::string("angle separation: ") + (sep.asc_ok ? "ok" : "VIOLATED"),
    };
    for (const auto& s : shapes) lines.push_back("shape: " + s.get<std::string>());
    return em.emit(results, lines, clean ? 0 : 2);
}

// ---------------------------------------------------------------------------
// automaton build

int cmd_automaton(const std::string& path, const std::string& dot_path, Emitter em) {
    LoadedSpec loaded = load_spec(path);
    em.digest = loaded.digest;
    PostCriticalData pcd = compute_post_critical(loaded.spec);
    TopologyAutomaton aut = build_automaton(loaded.spec, pcd);

    json results;
    results["states"] = aut.states.size();
    results["alphabet"] = aut.alphabet;
    json labels = json::array();
    for (const AutomatonState& st : aut.states) labels.push_back(st.label);
    results["state_labels"] = labels;
    results["id_state"] = TopologyAutomaton::kId;
    results["exit_state"] = TopologyAutomaton::kExit;
    results["transitions"] = aut.delta;

    std::vector<std::string> lines{path + ": automaton with " +
                                   std::to_string(aut.states.size()) + " states over " +
                                   std::to_string(aut.alphabet * aut.alphabet) +
                                   " ordered letters"};
    if (!dot_path.empty()) {
        write_file(dot_path, aut.dot());
        results["dot"] = dot_path;
        lines.push_back("wrote " + dot_path);
    }
    return em.emit(results, lines);
}

// ---------------------------------------------------------------------------
// classify

int cmd_classify(const std::string& f_path, const std::string& g_path, Emitter em) {
    json fj = load_json_file(f_path);
    json gj = load_json_file(g_path);
    em.digest = hex64(fnv1a(fj.dump() + "\n" + gj.dump()));
    Classification cls = classify_equivalence(IfsSpec::from_json(fj), IfsSpec::from_json(gj));

    json results;
    results["verdict"] = verdict_name(cls.verdict);
    results["isomorphic"] = cls.isomorphic;
    results["asc_first"] = cls.asc_first;
    results["asc_second"] = cls.asc_second;
    if (cls.verdict == EquivalenceVerdict::Quasisymmetric)
        results["qs_exponent"] = cls.qs_exponent;
    results["state_map"] = cls.state_map;
    results["detail"] = cls.detail;

    std::vector<std::string> lines{std::string("verdict: ") + verdict_name(cls.verdict)};
    if (!cls.detail.empty()) lines.push_back(cls.detail);
    return em.emit(results, lines);
}

// ---------------------------------------------------------------------------
// metric check

int cmd_metric(const std::string& path, int samples, int depth, Emitter em) {
    LoadedSpec loaded = load_spec(path);
    em.digest = loaded.digest;
    MetricContext ctx = make_metric_context(loaded.spec, depth);
    ComparabilityResult comp = rho_comparability(ctx, samples, em.seed);
    BoundaryLemmaResult boundary = check_boundary_lemma(ctx, samples, em.seed);

    json results;
    results["xi1"] = ctx.consts.xi1;
    results["xi2"] = ctx.consts.xi2;
    results["c"] = ctx.consts.asc_c;
    results["c1"] = ctx.consts.c1;
    results["c2"] = ctx.consts.c2;
    results["c3"] = ctx.consts.c3;
    results["max_ratio"] = comp.max_ratio;
    results["pairs_checked"] = comp.pairs_checked;
    results["boundary_pairs_with_runs"] = boundary.pairs_with_runs;
    results["violations"] = json::array();

    std::vector<std::string> lines{
        "constants: xi1=" + fmt(ctx.consts.xi1) + " xi2=" + fmt(ctx.consts.xi2) +
            " c=" + fmt(ctx.consts.asc_c),
        "sandwich: c1=" + fmt(ctx.consts.c1) + " c2=" + fmt(ctx.consts.c2) +
            " c3=" + fmt(ctx.consts.c3),
        "worst d/rho ratio over " + std::to_string(comp.pairs_checked) +
            " pairs: " + fmt(comp.max_ratio),
        "no violations"};
    return em.emit(results, lines);
}

// ---------------------------------------------------------------------------
// graph refine

int cmd_graph(const std::string& path, const std::string& assign_path, int n,
              const std::string& svg_path, Emitter em) {
    LoadedSpec loaded = load_spec(path);
    em.digest = loaded.digest;
    const IfsSpec& spec = loaded.spec;
    PostCriticalData pcd = compute_post_critical(spec);

    json aj = load_json_file(assign_path);
    WeightAssignment assign = assignment_from_json(aj);
    validate_assignment(spec, pcd, assign);
    std::optional<ExactAssignment> exact = exact_assignment_from_json(aj);

    RefinedGraph<double> g = refine(spec, pcd, assign, n);

    json results;
    results["n"] = n;
    results["vertices"] = g.size();
    results["edges"] = g.edges.size();
    json dists = json::array();
    std::size_t classes = std::min<std::size_t>(pcd.points.size(), 8);
    for (std::size_t i = 0; i < classes; ++i)
        for (std::size_t j = i + 1; j < classes; ++j) {
            const EvPeriodicWord& x = pcd.points[i].codings.front();
            const EvPeriodicWord& y = pcd.points[j].codings.front();
            MetricDValue<double> d = metric_D(spec, pcd, assign, x, y, n);
            json row;
            row["i"] = i + 1;
            row["j"] = j + 1;
            row["finite"] = d.finite;
            row["distance"] = d.finite ? d.value : 0.0;
            if (exact) {
                MetricDValue<Rational> de = metric_D(spec, pcd, *exact, x, y, n);
                if (de.finite) row["exact"] = fraction_str(de.value);
            }
            dists.push_back(row);
        }
    results["boundary_distances"] = dists;

    std::vector<std::string> lines{"level " + std::to_string(n) + " graph: " +
                                   std::to_string(g.size()) + " vertices, " +
                                   std::to_string(g.edges.size()) + " edges"};
    for (const json& row : dists)
        lines.push_back("D_" + std::to_string(n) + "(p" + row["i"].dump() + ", p" +
                        row["j"].dump() + ") = " +
                        (row["finite"].get<bool>() ? fmt(row["distance"].get<double>())
                                                   : std::string("unreachable")));
    if (!svg_path.empty()) {
        write_file(svg_path, graph_svg(g));
        results["svg"] = svg_path;
        lines.push_back("wrote " + svg_path);
    }
    return em.emit(results, lines);
}

// ---------------------------------------------------------------------------
// dendrite dim

int cmd_dendrite(const std::string& path, const std::string& range, double delta, double c,
                 const std::string& svg_path, Emitter em) {
    LoadedSpec loaded = load_spec(path);
    em.digest = loaded.digest;
    const IfsSpec& spec = loaded.spec;
    PostCriticalData pcd = compute_post_critical(spec);
    DendriteCertificate cert = certify_dendrite(spec, pcd);
    if (!cert)
        throw Error(Errc::NotDendrite, cert.witness.empty()
                                           ? "the incidence graphs are not trees"
                                           : cert.witness);
    PrimaryArcSystem system = build_primary_arc_system(spec, pcd);
    auto [lo, hi] = parse_range(range);
    std::vector<SmSolution> rows = dendrite_dimension_trend(system, spec, pcd, lo, hi, delta, c);

    json results;
    json jrows = json::array();
    std::vector<std::string> lines;
    for (const SmSolution& row : rows) {
        json r;
        r["m"] = row.m;
        r["s_m"] = row.s;
        r["delta_used"] = row.delta_used;
        r["halvings"] = row.halvings;
        jrows.push_back(r);
        lines.push_back("m=" + std::to_string(row.m) + "  s_m=" + fmt(row.s) +
                        "  delta=" + fmt(row.delta_used));
    }
    results["rows"] = jrows;

    if (!svg_path.empty()) {
        write_file(svg_path, dendrite_svg(spec, pcd, system));
        results["svg"] = svg_path;
        lines.push_back("wrote " + svg_path);
    }
    return em.emit(results, lines);
}

// ---------------------------------------------------------------------------
// gasket dim

int cmd_gasket(const std::string& path, const std::string& range, const std::string& scheme,
               double s_factor, const std::string& svg_path, Emitter em) {
    LoadedSpec loaded = load_spec(path);
    em.digest = loaded.digest;
    if (scheme != "uniform" && scheme != "general")
        throw Error(Errc::DomainError, "scheme must be uniform or general");
    GasketSpec g = validate_gasket(loaded.spec);
    auto [lo, hi] = parse_range(range);
    std::vector<DimensionRow> rows =
        conformal_upper_bound(g, lo, hi, scheme == "uniform", s_factor, true);

    json results;
    results["scheme"] = scheme;
    json jrows = json::array();
    std::vector<std::string> lines;
    for (const DimensionRow& row : rows) {
        json r;
        r["m"] = row.m;
        r["s"] = row.s_used;
        r["dim"] = row.dim;
        r["verified"] = row.verified;
        jrows.push_back(r);
        lines.push_back("m=" + std::to_string(row.m) + "  dim<=" + fmt(row.dim));
    }
    results["rows"] = jrows;

    if (!svg_path.empty()) {
        write_file(svg_path, gasket_svg(g, vertex_iteration(g, lo)));
        results["svg"] = svg_path;
        lines.push_back("wrote " + svg_path);
    }
    return em.emit(results, lines);
}

// ---------------------------------------------------------------------------
// render

std::string automaton_svg(const TopologyAutomaton& aut) {
    const double cx = 360.0, cy = 300.0, radius = 230.0, node_r = 34.0;
    const double pi = std::acos(-1.0);
    std::size_t n = aut.states.size();
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"600\" "
          "viewBox=\"0 0 720 600\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

    auto pos = [&](std::size_t k) {
        double a = 2.0 * pi * static_cast<double>(k) / static_cast<double>(n) - pi / 2.0;
        return std::pair<double, double>{cx + radius * std::cos(a), cy + radius * std::sin(a)};
    };

    // Aggregated transitions: one arrow per (source, target) pair, labeled
    // with the number of letters that take it.
    std::map<std::pair<int, int>, int> arrows;
    for (std::size_t s = 0; s < n; ++s)
        for (int t : aut.delta[s]) arrows[{static_cast<int>(s), t}]++;
    for (const auto& [key, count] : arrows) {
        auto [x1, y1] = pos(static_cast<std::size_t>(key.first));
        auto [x2, y2] = pos(static_cast<std::size_t>(key.second));
        if (key.first == key.second) {
            os << "<circle cx=\"" << x1 << "\" cy=\"" << (y1 - node_r - 10.0)
               << "\" r=\"10\" fill=\"none\" stroke=\"#888888\"/>\n";
            continue;
        }
        double dx = x2 - x1, dy = y2 - y1;
        double len = std::sqrt(dx * dx + dy * dy);
        double ux = dx / len, uy = dy / len;
        double sx = x1 + ux * node_r, sy = y1 + uy * node_r;
        double ex = x2 - ux * node_r, ey = y2 - uy * node_r;
        os << "<line x1=\"" << sx << "\" y1=\"" << sy << "\" x2=\"" << ex << "\" y2=\"" << ey
           << "\" stroke=\"#888888\" stroke-width=\"1\"/>\n";
        os << "<circle cx=\"" << ex << "\" cy=\"" << ey << "\" r=\"2.5\" fill=\"#888888\"/>\n";
        os << "<text x=\"" << (sx + ex) / 2.0 << "\" y=\"" << (sy + ey) / 2.0 - 4.0
           << "\" font-size=\"9\" fill=\"#aa5522\" text-anchor=\"middle\">" << count
           << "</text>\n";
    }
    for (std::size_t k = 0; k < n; ++k) {
        auto [x, y] = pos(k);
        const char* fill = k == TopologyAutomaton::kId    ? "#cde8cd"
                           : k == TopologyAutomaton::kExit ? "#e8cdcd"
                                                           : "#e8e8f4";
        os << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"" << node_r << "\" fill=\""
           << fill << "\" stroke=\"#333333\"/>\n";
        os << "<text x=\"" << x << "\" y=\"" << (y + 4.0)
           << "\" font-size=\"11\" text-anchor=\"middle\">" << aut.states[k].label
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

int cmd_render(const std::string& scene, const std::string& path, const std::string& out,
               int m, int n, const std::string& assign_path, Emitter em) {
    LoadedSpec loaded = load_spec(path);
    em.digest = loaded.digest;
    const IfsSpec& spec = loaded.spec;

    std::string svg;
    if (scene == "iteration") {
        GasketSpec g = validate_gasket(spec);
        svg = gasket_svg(g, vertex_iteration(g, m));
    } else if (scene == "graph") {
        if (assign_path.empty())
            throw Error(Errc::DomainError, "the graph scene needs --assign");
        PostCriticalData pcd = compute_post_critical(spec);
        WeightAssignment assign = assignment_from_json(load_json_file(assign_path));
        svg = graph_svg(refine(spec, pcd, assign, n));
    } else if (scene == "main_tree") {
        PostCriticalData pcd = compute_post_critical(spec);
        DendriteCertificate cert = certify_dendrite(spec, pcd);
        if (!cert) throw Error(Errc::NotDendrite, "the spec is not a certified dendrite");
        svg = dendrite_svg(spec, pcd, build_primary_arc_system(spec, pcd));
    } else if (scene == "automaton") {
        PostCriticalData pcd = compute_post_critical(spec);
        svg = automaton_svg(build_automaton(spec, pcd));
    } else {
        throw Error(Errc::DomainError,
                    "unknown scene (expected iteration, graph, main_tree, automaton)");
    }
    write_file(out, svg);

    json results;
    results["scene"] = scene;
    results["out"] = out;
    results["bytes"] = svg.size();
    return em.emit(results, {"wrote " + out + " (" + std::to_string(svg.size()) + " bytes)"});
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Topology automata, refined graph metrics, and conformal dimension bounds "
                 "for self-similar sets"};
    app.require_subcommand(1);

    std::function<int()> action;

    struct CommonFlags {
        bool as_json = false;
        bool timing = false;
        unsigned seed = 0;
    };
    auto add_common = [](CLI::App* cmd, CommonFlags& flags) {
        cmd->add_flag("--json", flags.as_json, "emit the JSON report on stdout");
        cmd->add_flag("--timing", flags.timing,
                      "include wall-clock timing (breaks byte-for-byte determinism)");
        cmd->add_option("--seed", flags.seed, "sampling seed")->capture_default_str();
    };
    auto emitter = [](const char* name, const CommonFlags& flags) {
        Emitter em;
        em.command = name;
        em.seed = flags.seed;
        em.as_json = flags.as_json;
        em.timing = flags.timing;
        return em;
    };

    // validate
    {
        auto* cmd = app.add_subcommand("validate", "check a spec: parse, post-critical "
                                                   "closure, separation conditions");
        auto path = std::make_shared<std::string>();
        auto depth = std::make_shared<int>(6);
        auto flags = std::make_shared<CommonFlags>();
        cmd->add_option("ifs", *path, "IFS spec JSON file")->required();
        cmd->add_option("--depth", *depth, "net depth for the separation checks")
            ->capture_default_str();
        add_common(cmd, *flags);
        cmd->callback([&action, path, depth, flags, emitter] {
            action = [=] { return cmd_validate(*path, *depth, emitter("validate", *flags)); };
        });
    }

    // automaton build
    {
        auto* automaton = app.add_subcommand("automaton", "topology automaton commands");
        automaton->require_subcommand(1);
        auto* cmd = automaton->add_subcommand("build", "build the pair automaton");
        auto path = std::make_shared<std::string>();
        auto dot = std::make_shared<std::string>();
        auto flags = std::make_shared<CommonFlags>();
        cmd->add_option("ifs", *path, "IFS spec JSON file")->required();
        cmd->add_option("--dot", *dot, "write a GraphViz transition diagram here");
        add_common(cmd, *flags);
        cmd->callback([&action, path, dot, flags, emitter] {
            action = [=] { return cmd_automaton(*path, *dot, emitter("automaton build", *flags)); };
        });
    }

    // classify
    {
        auto* cmd = app.add_subcommand("classify", "compare two systems on the equivalence "
                                                   "ladder");
        auto f = std::make_shared<std::string>();
        auto g = std::make_shared<std::string>();
        auto flags = std::make_shared<CommonFlags>();
        cmd->add_option("first", *f, "first IFS spec")->required();
        cmd->add_option("second", *g, "second IFS spec")->required();
        add_common(cmd, *flags);
        cmd->callback([&action, f, g, flags, emitter] {
            action = [=] { return cmd_classify(*f, *g, emitter("classify", *flags)); };
        });
    }

    // metric check
    {
        auto* metric = app.add_subcommand("metric", "symbolic metric commands");
        metric->require_subcommand(1);
        auto* cmd = metric->add_subcommand("check", "derive constants and sample the "
                                                    "comparability bounds");
        auto path = std::make_shared<std::string>();
        auto samples = std::make_shared<int>(500);
        auto depth = std::make_shared<int>(7);
        auto flags = std::make_shared<CommonFlags>();
        cmd->add_option("ifs", *path, "IFS spec JSON file")->required();
        cmd->add_option("--samples", *samples, "coding pairs to sample")->capture_default_str();
        cmd->add_option("--depth", *depth, "net depth for the constants")->capture_default_str();
        add_common(cmd, *flags);
        cmd->callback([&action, path, samples, depth, flags, emitter] {
            action = [=] {
                return cmd_metric(*path, *samples, *depth, emitter("metric check", *flags));
            };
        });
    }

    // graph refine
    {
        auto* graph = app.add_subcommand("graph", "refined graph commands");
        graph->require_subcommand(1);
        auto* cmd = graph->add_subcommand("refine", "build the level-n weighted graph");
        auto path = std::make_shared<std::string>();
        auto assign = std::make_shared<std::string>();
        auto level = std::make_shared<int>(1);
        auto svg = std::make_shared<std::string>();
        auto flags = std::make_shared<CommonFlags>();
        cmd->add_option("ifs", *path, "IFS spec JSON file")->required();
        cmd->add_option("--assign", *assign, "assignment JSON ({\"tau0\": ..., \"R\": ...})")
            ->required();
        cmd->add_option("-n,--level", *level, "refinement level")->capture_default_str();
        cmd->add_option("--svg", *svg, "write an SVG rendering here");
        add_common(cmd, *flags);
        cmd->callback([&action, path, assign, level, svg, flags, emitter] {
            action = [=] {
                return cmd_graph(*path, *assign, *level, *svg, emitter("graph refine", *flags));
            };
        });
    }

    // dendrite dim
    {
        auto* dendrite = app.add_subcommand("dendrite", "dendrite commands");
        dendrite->require_subcommand(1);
        auto* cmd = dendrite->add_subcommand("dim", "conformal dimension upper bounds via "
                                                    "the arc weight scheme");
        auto path = std::make_shared<std::string>();
        auto range = std::make_shared<std::string>("1..6");
        auto delta = std::make_shared<double>(1e-3);
        auto c = std::make_shared<double>(1.0);
        auto svg = std::make_shared<std::string>();
        auto flags = std::make_shared<CommonFlags>();
        cmd->add_option("ifs", *path, "IFS spec JSON file")->required();
        cmd->add_option("-m,--levels", *range, "level range, e.g. 1..6")->capture_default_str();
        cmd->add_option("--delta", *delta, "base flat-arc weight excess")->capture_default_str();
        cmd->add_option("--c", *c, "flat-arc weight scale")->capture_default_str();
        cmd->add_option("--svg", *svg, "write the main-tree SVG here");
        add_common(cmd, *flags);
        cmd->callback([&action, path, range, delta, c, svg, flags, emitter] {
            action = [=] {
                return cmd_dendrite(*path, *range, *delta, *c, *svg,
                                    emitter("dendrite dim", *flags));
            };
        });
    }

    // gasket dim
    {
        auto* gasket = app.add_subcommand("gasket", "gasket commands");
        gasket->require_subcommand(1);
        auto* cmd = gasket->add_subcommand("dim", "conformal dimension upper bounds via "
                                                  "the vertex iteration");
        auto path = std::make_shared<std::string>();
        auto range = std::make_shared<std::string>("1..5");
        auto scheme = std::make_shared<std::string>("uniform");
        auto s_factor = std::make_shared<double>(1.01);
        auto svg = std::make_shared<std::string>();
        auto flags = std::make_shared<CommonFlags>();
        cmd->add_option("ifs", *path, "IFS spec JSON file")->required();
        cmd->add_option("-m,--levels", *range, "level range, e.g. 1..20")->capture_default_str();
        cmd->add_option("--scheme", *scheme, "weight scheme: uniform or general")
            ->capture_default_str();
        cmd->add_option("--s-factor", *s_factor,
                        "exponent as a multiple of the lower bound (general scheme)")
            ->capture_default_str();
        cmd->add_option("--svg", *svg, "write the cell-iteration SVG here");
        add_common(cmd, *flags);
        cmd->callback([&action, path, range, scheme, s_factor, svg, flags, emitter] {
            action = [=] {
                return cmd_gasket(*path, *range, *scheme, *s_factor, *svg,
                                  emitter("gasket dim", *flags));
            };
        });
    }

    // render
    {
        auto* cmd = app.add_subcommand("render", "render a scene to SVG");
        auto scene = std::make_shared<std::string>();
        auto path = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto m = std::make_shared<int>(1);
        auto n = std::make_shared<int>(1);
        auto assign = std::make_shared<std::string>();
        auto flags = std::make_shared<CommonFlags>();
        cmd->add_option("scene", *scene, "iteration | graph | main_tree | automaton")
            ->required();
        cmd->add_option("ifs", *path, "IFS spec JSON file")->required();
        cmd->add_option("--out", *out, "output SVG path")->required();
        cmd->add_option("-m", *m, "iteration level (iteration scene)")->capture_default_str();
        cmd->add_option("-n", *n, "refinement level (graph scene)")->capture_default_str();
        cmd->add_option("--assign", *assign, "assignment JSON (graph scene)");
        add_common(cmd, *flags);
        cmd->callback([&action, scene, path, out, m, n, assign, flags, emitter] {
            action = [=] {
                return cmd_render(*scene, *path, *out, *m, *n, *assign,
                                  emitter("render", *flags));
            };
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        return action ? action() : 0;
    } catch (const Error& e) {
        std::cerr << "fractop: " << e.what() << "\n";
        return errc_exit_code(e.code());
    } catch (const json::exception& e) {
        std::cerr << "fractop: parse: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "fractop: internal: " << e.what() << "\n";
        return 3;
    }
}
