#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spantree/spantree.hpp"

namespace spantree::cli {

using Json = nlohmann::ordered_json;

/// Serializes with numbers at up to 17 significant digits, so payloads are
/// byte-stable and doubles round-trip exactly. Non-finite numbers become
/// null (JSON has no representation for them).
inline std::string dump_g17(const Json& j) {
    switch (j.type()) {
        case Json::value_t::object: {
            std::string out = "{";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ", ";
                first = false;
                out += Json(it.key()).dump();
                out += ": ";
                out += dump_g17(it.value());
            }
            return out + "}";
        }
        case Json::value_t::array: {
            std::string out = "[";
            bool first = true;
            for (const auto& item : j) {
                if (!first) out += ", ";
                first = false;
                out += dump_g17(item);
            }
            return out + "]";
        }
        case Json::value_t::number_float: {
            const double x = j.get<double>();
            if (!std::isfinite(x)) return "null";
            return format_g17(x);
        }
        default:
            return j.dump();
    }
}

namespace detail {

struct Diagnostics {
    std::optional<double> condition_estimate;
    std::optional<double> max_solve_residual;
    std::vector<std::string> warnings;
};

inline Json make_document(const std::string& command, const std::string& digest,
                          std::optional<NodeId> root, Json values, const Diagnostics& diag) {
    Json doc;
    doc["command"] = command;
    doc["input_digest"] = digest;
    if (root)
        doc["root"] = *root;
    else
        doc["root"] = nullptr;
    doc["values"] = std::move(values);
    Json d;
    if (diag.condition_estimate)
        d["condition_estimate"] = *diag.condition_estimate;
    else
        d["condition_estimate"] = nullptr;
    if (diag.max_solve_residual)
        d["max_solve_residual"] = *diag.max_solve_residual;
    else
        d["max_solve_residual"] = nullptr;
    d["warnings"] = diag.warnings;
    doc["diagnostics"] = d;
    return doc;
}

/// Relative error with an absolute floor of 1 (exact zeros compare
/// cleanly); the convention used by every cross-validation identity.
inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

struct LoadedGraph {
    Graph graph;
    std::string digest;
};

inline LoadedGraph load(const std::string& path) {
    const std::string bytes = read_file(path);
    const auto first = bytes.find_first_not_of(" \t\r\n");
    Graph g = (first != std::string::npos && bytes[first] == '{') ? parse_graph_json(bytes)
                                                                  : parse_graph_text(bytes);
    return {std::move(g), fnv1a_hex(bytes)};
}

inline NodeId resolve_cli_root(const Graph& g, std::optional<NodeId> root) {
    if (g.directed()) {
        if (!root) throw RootRequiredError("--root is mandatory for directed graphs");
        g.check_node(*root);
        return *root;
    }
    if (root) {
        g.check_node(*root);
        return *root;
    }
    return default_root(g);
}

/// Factorization diagnostics for the document; probes one solve so the
/// residual field is populated.
inline Diagnostics factorization_diagnostics(const Graph& g, NodeId root) {
    Diagnostics diag;
    SolveOptions opts;
    opts.allow_singular = true;
    ReducedLaplacianSystem sys(build_laplacian(g), root, opts);
    diag.condition_estimate = sys.condition_estimate();
    if (!sys.singular() && sys.dim() > 0) {
        sys.solve(Eigen::VectorXd::Ones(sys.dim()));
        diag.max_solve_residual = sys.max_solve_residual();
    }
    return diag;
}

inline Json distribution_to_json(const DegreeDistribution& dist) {
    Json out = Json::object();
    for (const auto& [k, p] : dist.probability) out[std::to_string(k)] = p;
    return out;
}

struct CheckEntry {
    std::string name;
    double a = 0.0;
    double b = 0.0;
    double tolerance = 0.0;
};

}  // namespace detail

/// Runs one CLI invocation. stdout receives only the result document;
/// logs and error messages go to stderr. Exit codes: 0 success, 2
/// malformed input or arguments, 3 disconnected graph / unreachable root,
/// 4 numerical failure, 5 capability violation (non-integer degree
/// weights, enumeration cap, spectral precondition).
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Degree moments of random spanning trees"};
    app.require_subcommand(1);

    std::string graph_path;
    std::optional<NodeId> root;
    int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    NodeId node = 0;
    std::vector<NodeId> node_pair;
    std::vector<NodeId> edge_pair;
    bool all_edges = false;
    std::optional<NodeId> joint_node;
    bool exact_mode = false;
    bool want_variance = false;
    bool log_only = false;
    long long sample_count = 1;
    std::uint64_t sample_seed = 0;
    std::vector<NodeId> moment_nodes;
    long long cap = kDefaultTreeCap;
    bool with_report = false;
    std::optional<NodeId> check_node;

    const auto add_common = [&](CLI::App* cmd, bool with_root = true) {
        cmd->add_option("--graph", graph_path, "graph file (JSON or text)")->required();
        if (with_root) {
            cmd->add_option("--root", root,
                            "removed node / in-tree root (mandatory for directed graphs)");
        }
        cmd->add_option("--threads", threads, "worker threads for sampling");
    };

    CLI::App* c_exp = app.add_subcommand("expectation", "expected weighted degree of a node");
    add_common(c_exp);
    c_exp->add_option("--node", node, "target node")->required();

    CLI::App* c_var = app.add_subcommand("variance", "variance of the weighted degree");
    add_common(c_var);
    c_var->add_option("--node", node, "target node")->required();

    CLI::App* c_cov = app.add_subcommand("covariance", "covariance of two weighted degrees");
    add_common(c_cov);
    c_cov->add_option("--nodes", node_pair, "two nodes v,u")->required()->delimiter(',');

    CLI::App* c_edge = app.add_subcommand("edge-prob", "edge presence probability");
    add_common(c_edge);
    c_edge->add_option("--edge", edge_pair, "edge endpoints u,v")->delimiter(',');
    c_edge->add_flag("--all", all_edges, "every edge plus the probability sum");

    CLI::App* c_dist = app.add_subcommand("distribution", "exact degree distribution");
    add_common(c_dist);
    c_dist->add_option("--node", node, "target node")->required();
    c_dist->add_option("--joint", joint_node, "second node for the joint distribution");
    c_dist->add_flag("--exact", exact_mode, "exact rational interpolation");

    CLI::App* c_dec = app.add_subcommand("decomposable",
                                         "moments of sum of omega over tree edges");
    add_common(c_dec);
    c_dec->add_flag("--variance", want_variance, "also report the variance");

    CLI::App* c_tw = app.add_subcommand("tree-weight", "total spanning tree weight");
    add_common(c_tw);
    c_tw->add_flag("--log", log_only, "report only the log-scale weight");

    CLI::App* c_sample = app.add_subcommand("sample", "Monte Carlo sampling (Wilson)");
    add_common(c_sample);
    c_sample->add_option("--count", sample_count, "number of samples")->required();
    c_sample->add_option("--seed", sample_seed, "RNG seed")->required();
    c_sample->add_option("--moments", moment_nodes, "nodes for empirical moments")
        ->delimiter(',');

    CLI::App* c_enum = app.add_subcommand("enumerate", "exhaustive enumeration oracle");
    add_common(c_enum);
    c_enum->add_option("--cap", cap, "tree count cap");
    c_enum->add_flag("--report", with_report, "full oracle report");

    CLI::App* c_check = app.add_subcommand("check", "cross-validate all computation paths");
    add_common(c_check);
    c_check->add_option("--node", check_node, "restrict per-node checks to one node");

    std::vector<const char*> argv;
    argv.push_back("spantree");
    for (const std::string& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help() << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return 2;
    }

    const InterpMode mode = exact_mode ? InterpMode::ExactRational : InterpMode::Floating;

    try {
        detail::LoadedGraph in = detail::load(graph_path);
        const Graph& g = in.graph;
        Json values;
        detail::Diagnostics diag;
        std::optional<NodeId> doc_root;
        std::string command;

        if (app.got_subcommand(c_exp)) {
            command = "expectation";
            const NodeId r = detail::resolve_cli_root(g, root);
            doc_root = r;
            diag = detail::factorization_diagnostics(g, r);
            values["node"] = node;
            values["expectation"] = expected_degree(g, node, r);
        } else if (app.got_subcommand(c_var)) {
            command = "variance";
            const NodeId r = detail::resolve_cli_root(g, root);
            doc_root = r;
            diag = detail::factorization_diagnostics(g, r);
            values["node"] = node;
            values["variance"] = degree_variance(g, node, r);
        } else if (app.got_subcommand(c_cov)) {
            command = "covariance";
            if (node_pair.size() != 2) throw ParseError("--nodes expects exactly two nodes");
            const NodeId r = detail::resolve_cli_root(g, root);
            doc_root = r;
            diag = detail::factorization_diagnostics(g, r);
            values["nodes"] = node_pair;
            values["covariance"] = degree_covariance(g, node_pair[0], node_pair[1], r);
        } else if (app.got_subcommand(c_edge)) {
            command = "edge-prob";
            const NodeId r = detail::resolve_cli_root(g, root);
            doc_root = r;
            diag = detail::factorization_diagnostics(g, r);
            if (all_edges && !edge_pair.empty())
                throw ParseError("use either --edge or --all, not both");
            if (!all_edges && edge_pair.empty())
                throw ParseError("edge-prob needs --edge u,v or --all");
            if (all_edges) {
                Json arr = Json::array();
                double sum = 0.0;
                for (const EdgeProbability& p : all_edge_probabilities(g, r)) {
                    Json item;
                    item["u"] = p.u;
                    item["v"] = p.v;
                    item["probability"] = p.probability;
                    arr.push_back(item);
                    sum += p.probability;
                }
                values["edges"] = arr;
                values["sum"] = sum;
            } else {
                if (edge_pair.size() != 2) throw ParseError("--edge expects exactly two nodes");
                values["edge"] = edge_pair;
                values["probability"] = edge_probability(g, edge_pair[0], edge_pair[1], r);
            }
        } else if (app.got_subcommand(c_dist)) {
            command = "distribution";
            const NodeId r = detail::resolve_cli_root(g, root);
            doc_root = r;
            diag = detail::factorization_diagnostics(g, r);
            if (joint_node) {
                values["nodes"] = std::vector<NodeId>{node, *joint_node};
                Json joint = Json::object();
                for (const auto& [kk, p] :
                     joint_degree_distribution(g, node, *joint_node, r, mode, {}, threads))
                    joint[std::to_string(kk.first) + "," + std::to_string(kk.second)] = p;
                values["joint"] = joint;
            } else {
                values["node"] = node;
                values["distribution"] = detail::distribution_to_json(
                    degree_distribution(g, node, r, mode, {}, threads));
            }
        } else if (app.got_subcommand(c_dec)) {
            command = "decomposable";
            const NodeId r = detail::resolve_cli_root(g, root);
            doc_root = r;
            diag = detail::factorization_diagnostics(g, r);
            values["expectation"] = decomposable_expectation(g, r);
            if (want_variance) values["variance"] = decomposable_variance(g, r);
        } else if (app.got_subcommand(c_tw)) {
            command = "tree-weight";
            const NodeId r = detail::resolve_cli_root(g, root);
            doc_root = r;
            SolveOptions opts;
            opts.allow_singular = true;
            ReducedLaplacianSystem sys(build_laplacian(g), r, opts);
            diag.condition_estimate = sys.condition_estimate();
            const auto [log_w, sign] = log_tree_total_weight(sys);
            if (sys.singular())
                diag.warnings.push_back("graph has no spanning tree for this root");
            if (!log_only) {
                const double w = tree_total_weight(sys);
                if (std::isinf(w))
                    diag.warnings.push_back(
                        "tree weight exceeds double range; use the log form");
                values["tree_weight"] = w;  // serialized as null when infinite
            }
            values["log_tree_weight"] = log_w;
            values["sign"] = sign;
        } else if (app.got_subcommand(c_sample)) {
            command = "sample";
            SamplerConfig cfg;
            cfg.count = sample_count;
            cfg.seed = sample_seed;
            cfg.root = root;
            cfg.threads = threads;
            if (!g.directed() && !root) cfg.root = 0;
            doc_root = cfg.root;
            values["count"] = sample_count;
            values["seed"] = sample_seed;
            // Edge presence frequencies in one deterministic pass.
            std::vector<long long> hits(static_cast<std::size_t>(g.edge_count()), 0);
            for (long long i = 0; i < sample_count; ++i) {
                SamplerConfig one = cfg;
                one.seed = derive_substream_seed(cfg.seed, static_cast<std::uint64_t>(i));
                for (int id : wilson_sample(g, one).edge_ids)
                    ++hits[static_cast<std::size_t>(id)];
            }
            Json freqs = Json::array();
            for (int id = 0; id < g.edge_count(); ++id) {
                Json item;
                item["u"] = g.edge(id).u;
                item["v"] = g.edge(id).v;
                item["frequency"] = static_cast<double>(hits[static_cast<std::size_t>(id)]) /
                                    static_cast<double>(sample_count);
                freqs.push_back(item);
            }
            values["edge_frequencies"] = freqs;
            if (!moment_nodes.empty()) {
                const EmpiricalMoments em = monte_carlo_moments(g, moment_nodes, cfg);
                Json arr = Json::array();
                for (std::size_t j = 0; j < moment_nodes.size(); ++j) {
                    Json item;
                    item["node"] = em.nodes[j];
                    item["mean"] = em.mean[j];
                    item["variance"] = em.variance[j];
                    item["std_error"] = em.std_error[j];
                    arr.push_back(item);
                }
                values["moments"] = arr;
            }
        } else if (app.got_subcommand(c_enum)) {
            command = "enumerate";
            std::optional<NodeId> r;
            if (g.directed()) r = detail::resolve_cli_root(g, root);
            else if (root) r = root;
            doc_root = r;
            const ExhaustiveReport rep = brute_report(g, r, cap);
            values["tree_count"] = rep.tree_count;
            values["total_weight"] = rep.total_weight;
            if (with_report) {
                values["expected_degree"] = rep.expected_degree;
                values["degree_variance"] = rep.degree_variance;
                Json eps = Json::array();
                for (int id = 0; id < g.edge_count(); ++id) {
                    Json item;
                    item["u"] = g.edge(id).u;
                    item["v"] = g.edge(id).v;
                    item["probability"] = rep.edge_probability[static_cast<std::size_t>(id)];
                    eps.push_back(item);
                }
                values["edge_probabilities"] = eps;
            }
        } else if (app.got_subcommand(c_check)) {
            command = "check";
            const NodeId r = detail::resolve_cli_root(g, root);
            doc_root = r;
            diag = detail::factorization_diagnostics(g, r);

            std::vector<detail::CheckEntry> checks;
            const int n = g.node_count();
            std::vector<NodeId> targets;
            if (check_node) {
                g.check_node(*check_node);
                targets.push_back(*check_node);
            } else {
                for (NodeId v = 0; v < n; ++v) targets.push_back(v);
            }

            // Oracle when feasible (small graphs only).
            std::optional<ExhaustiveReport> oracle;
            if (n <= 10) {
                try {
                    oracle = brute_report(g, g.directed() ? std::optional<NodeId>(r)
                                                          : std::optional<NodeId>(),
                                          200000);
                } catch (const CapExceededError&) {
                }
            }
            bool integer_omega = true;
            for (const Edge& e : g.edges())
                if (std::abs(e.omega - std::llround(e.omega)) > 1e-9 || e.omega < -1e-9)
                    integer_omega = false;

            for (NodeId v : targets) {
                const double e_trace = expected_degree(g, v, r);
                const double var_trace = degree_variance(g, v, r);
                const double e_edges = expected_degree_via_edges(g, v, r);
                checks.push_back({"expectation_trace_vs_edge_sum[" + std::to_string(v) + "]",
                                  e_trace, e_edges, 1e-10});
                if (integer_omega) {
                    const auto [e_poly, var_poly] =
                        moments_from_polynomial(g, v, r, InterpMode::ExactRational);
                    checks.push_back({"expectation_trace_vs_polynomial[" + std::to_string(v) + "]",
                                      e_trace, e_poly, 1e-8});
                    checks.push_back({"variance_trace_vs_polynomial[" + std::to_string(v) + "]",
                                      var_trace, var_poly, 1e-8});
                }
                if (oracle) {
                    checks.push_back({"expectation_trace_vs_oracle[" + std::to_string(v) + "]",
                                      e_trace,
                                      oracle->expected_degree[static_cast<std::size_t>(v)],
                                      1e-9});
                    checks.push_back({"variance_trace_vs_oracle[" + std::to_string(v) + "]",
                                      var_trace,
                                      oracle->degree_variance[static_cast<std::size_t>(v)],
                                      1e-9});
                }
                if (!g.directed()) {
                    const NodeId r2 = (r + 1) % n;
                    checks.push_back({"expectation_root_invariance[" + std::to_string(v) + "]",
                                      e_trace, expected_degree(g, v, r2), 1e-8});
                }
            }

            // Valid for in-trees too: every spanning (in-)tree has n-1 edges
            // and each tree edge contributes omega to both endpoint degrees.
            double edge_sum = 0.0;
            for (const EdgeProbability& p : all_edge_probabilities(g, r))
                edge_sum += p.probability;
            checks.push_back({"edge_probability_sum_vs_n_minus_1", edge_sum,
                              static_cast<double>(n - 1), 1e-10});

            double half_sum = 0.0;
            for (NodeId v = 0; v < n; ++v) half_sum += expected_degree(g, v, r);
            checks.push_back({"decomposable_vs_half_degree_sum",
                              decomposable_expectation(g, r), 0.5 * half_sum, 1e-10});

            double max_rel = 0.0;
            bool ok = true;
            Json arr = Json::array();
            for (const detail::CheckEntry& c : checks) {
                const double re = detail::rel_err(c.a, c.b);
                max_rel = std::max(max_rel, re);
                if (re > c.tolerance) ok = false;
                Json item;
                item["name"] = c.name;
                item["a"] = c.a;
                item["b"] = c.b;
                item["rel_err"] = re;
                item["tolerance"] = c.tolerance;
                item["pass"] = re <= c.tolerance;
                arr.push_back(item);
            }
            values["checks"] = arr;
            values["max_relative_discrepancy"] = max_rel;
            values["oracle_used"] = oracle.has_value();
            values["all_pass"] = ok;

            Json doc = detail::make_document(command, in.digest, doc_root, values, diag);
            out << dump_g17(doc) << "\n";
            return ok ? 0 : 4;
        }

        Json doc = detail::make_document(command, in.digest, doc_root, values, diag);
        out << dump_g17(doc) << "\n";
        return 0;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const RootRequiredError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const SameNodeError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const EdgeNotFoundError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const NodeOutOfRangeError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const SelfLoopError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const DuplicateEdgeError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const NonPositiveWeightError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const DisconnectedError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const NonIntegerDegreeWeightsError& e) {
        err << "error: " << e.what() << "\n";
        return 5;
    } catch (const CapExceededError& e) {
        err << "error: " << e.what() << "\n";
        return 5;
    } catch (const PreconditionViolatedError& e) {
        err << "error: " << e.what() << "\n";
        return 5;
    } catch (const SingularMatrixError& e) {
        err << "error: " << e.what() << "\n";
        return 4;
    } catch (const IllConditionedInterpolationError& e) {
        err << "error: " << e.what() << "\n";
        return 4;
    } catch (const NumericalFailureError& e) {
        err << "error: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 4;
    }
}

}  // namespace spantree::cli
