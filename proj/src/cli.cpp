#include "mcflow/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mcflow/attention.hpp"
#include "mcflow/canonical.hpp"
#include "mcflow/errors.hpp"
#include "mcflow/flow.hpp"
#include "mcflow/markov.hpp"
#include "mcflow/math.hpp"
#include "mcflow/oracle.hpp"
#include "mcflow/rng.hpp"

namespace mcflow::cli {

namespace {

using json = nlohmann::json;
using canonical::Params2;
using attention::Params3;
using markov::SwitchKernel;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

json jnum(double x) {
    // nlohmann serializes NaN as null, matching the schema.
    return json(x);
}

std::string timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

using Meta = std::vector<std::pair<std::string, std::string>>;

void write_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open output file " + tmp);
        out << content;
        if (!out) throw std::runtime_error("failed writing " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::string join_doubles(const std::vector<double>& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s += ',';
        s += fmt(values[i]);
    }
    return s;
}

std::string join_ints(const std::vector<int>& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(values[i]);
    }
    return s;
}

std::string csv_meta(const Meta& meta) {
    std::string s;
    for (const auto& [key, value] : meta) {
        s += "# " + key + "=" + value + "\n";
    }
    return s;
}

json json_meta(const Meta& meta) {
    json m = json::object();
    for (const auto& [key, value] : meta) m[key] = value;
    return m;
}

// Options shared by every subcommand.
struct CommonOpts {
    double p = 0.5;
    double q = 0.5;
    std::string mode = "canonical2d";
    std::uint64_t seed = 0;
    std::string out;
    std::string format = "csv";
    bool exclude_timestamp = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_kernel = true) {
    if (needs_kernel) {
        cmd->add_option("--p", opts.p, "0 -> 1 switching probability")->required();
        cmd->add_option("--q", opts.q, "1 -> 0 switching probability")->required();
        cmd->add_option("--mode", opts.mode, "canonical2d | attention3d")
            ->check(CLI::IsMember({"canonical2d", "attention3d"}));
    }
    cmd->add_option("--seed", opts.seed, "RNG seed");
    cmd->add_option("--out", opts.out, "output path")->required();
    cmd->add_option("--format", opts.format, "csv | json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_flag("--exclude-timestamp", opts.exclude_timestamp,
                  "omit the timestamp metadata field");
}

Meta base_meta(const std::string& command, const CommonOpts& opts,
               bool with_kernel = true) {
    Meta meta;
    meta.emplace_back("tool", "mcflow");
    meta.emplace_back("version", kVersion);
    meta.emplace_back("command", command);
    if (with_kernel) {
        meta.emplace_back("p", fmt(opts.p));
        meta.emplace_back("q", fmt(opts.q));
        meta.emplace_back("mode", opts.mode);
    }
    meta.emplace_back("seed", std::to_string(opts.seed));
    meta.emplace_back("rng", markov::rng_algorithm());
    if (!opts.exclude_timestamp) meta.emplace_back("generated", timestamp_utc());
    return meta;
}

// ---------------------------------------------------------------------------
// landscape

struct LandscapeOpts {
    CommonOpts common;
    std::vector<double> bounds; // e_min,e_max,w_min,w_max[,a_min,a_max]
    std::vector<int> grid;      // ne,nw[,na]
};

int run_landscape(const LandscapeOpts& opts) {
    const bool three_d = opts.common.mode == "attention3d";
    const std::size_t want_bounds = three_d ? 6 : 4;
    const std::size_t want_grid = three_d ? 3 : 2;
    if (opts.bounds.size() != want_bounds || opts.grid.size() != want_grid) {
        std::cerr << "landscape: --bounds needs " << want_bounds
                  << " values and --grid " << want_grid << " for mode "
                  << opts.common.mode << "\n";
        return kExitConfig;
    }
    for (int n : opts.grid) {
        if (n < 1) {
            std::cerr << "landscape: grid resolution must be >= 1\n";
            return kExitConfig;
        }
    }
    const auto k = SwitchKernel::make(opts.common.p, opts.common.q);
    bool classify_ok = true;
    try {
        markov::require_nondegenerate(k);
    } catch (const DegenerateKernel&) {
        classify_ok = false; // loss/gradients still fine; classes become n/a
    }

    const auto coord = [](double lo, double hi, int n, int i) {
        return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    };

    Meta meta = base_meta("landscape", opts.common);
    meta.emplace_back("bounds", join_doubles(opts.bounds));
    meta.emplace_back("grid", join_ints(opts.grid));
    meta.emplace_back("classify_tol", fmt(1e-7));

    std::ostringstream csv;
    json rows = json::array();
    if (!three_d) {
        csv << "e,w,loss,energy,grad_e,grad_w,critical_class\n";
        for (int i = 0; i < opts.grid[0]; ++i) {
            for (int j = 0; j < opts.grid[1]; ++j) {
                const double e = coord(opts.bounds[0], opts.bounds[1], opts.grid[0], i);
                const double w = coord(opts.bounds[2], opts.bounds[3], opts.grid[1], j);
                const Params2 pt{e, w};
                const double l = canonical::loss(k, pt);
                const double en =
                    w == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                             : canonical::energy(pt);
                const auto g = canonical::grad(k, pt);
                std::string cls = "n/a";
                if (classify_ok) {
                    cls = canonical::to_string(canonical::classify_critical(k, pt));
                }
                if (opts.common.format == "csv") {
                    csv << fmt(e) << ',' << fmt(w) << ',' << fmt(l) << ',' << fmt(en)
                        << ',' << fmt(g.de) << ',' << fmt(g.dw) << ',' << cls << '\n';
                } else {
                    rows.push_back({{"e", jnum(e)},
                                    {"w", jnum(w)},
                                    {"loss", jnum(l)},
                                    {"energy", jnum(en)},
                                    {"grad_e", jnum(g.de)},
                                    {"grad_w", jnum(g.dw)},
                                    {"critical_class", cls}});
                }
            }
        }
    } else {
        csv << "e,w,a,loss,energy,grad_e,grad_w,grad_a,critical_class\n";
        for (int i = 0; i < opts.grid[0]; ++i) {
            for (int j = 0; j < opts.grid[1]; ++j) {
                for (int m = 0; m < opts.grid[2]; ++m) {
                    const double e =
                        coord(opts.bounds[0], opts.bounds[1], opts.grid[0], i);
                    const double w =
                        coord(opts.bounds[2], opts.bounds[3], opts.grid[1], j);
                    const double a =
                        coord(opts.bounds[4], opts.bounds[5], opts.grid[2], m);
                    const double l = attention::attn_loss(k, e, w, a);
                    const double en =
                        w == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                                 : attention::attn_energy(e, w, a);
                    const auto g = attention::attn_grad(k, e, w, a);
                    std::string cls = "n/a";
                    if (classify_ok) {
                        cls = canonical::to_string(
                            attention::attn_classify(k, e, w, a));
                    }
                    if (opts.common.format == "csv") {
                        csv << fmt(e) << ',' << fmt(w) << ',' << fmt(a) << ','
                            << fmt(l) << ',' << fmt(en) << ',' << fmt(g.de) << ','
                            << fmt(g.dw) << ',' << fmt(g.da) << ',' << cls << '\n';
                    } else {
                        rows.push_back({{"e", jnum(e)},
                                        {"w", jnum(w)},
                                        {"a", jnum(a)},
                                        {"loss", jnum(l)},
                                        {"energy", jnum(en)},
                                        {"grad_e", jnum(g.de)},
                                        {"grad_w", jnum(g.dw)},
                                        {"grad_a", jnum(g.da)},
                                        {"critical_class", cls}});
                    }
                }
            }
        }
    }

    if (opts.common.format == "csv") {
        write_atomic(opts.common.out, csv_meta(meta) + csv.str());
    } else {
        json doc = {{"metadata", json_meta(meta)}, {"rows", rows}};
        write_atomic(opts.common.out, doc.dump(2) + "\n");
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// flow

struct FlowOpts {
    CommonOpts common;
    std::vector<std::string> inits; // "e,w" or "e,w,a"
    double gauss_sigma = -1.0;
    int count = 1;
    double tol_grad = 1e-9;
    double t_max = 1e4;
    bool allow_partial = false;
};

std::vector<double> parse_csv_doubles(const std::string& s) {
    std::vector<double> values;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
    return values;
}

std::string indexed_path(const std::string& base, int index, int total) {
    if (total == 1) return base;
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "_%03d", index);
    std::filesystem::path path(base);
    const std::string ext = path.extension().string();
    path.replace_extension();
    return path.string() + suffix + ext;
}

int run_flow(const FlowOpts& opts) {
    const bool three_d = opts.common.mode == "attention3d";
    const std::size_t dim = three_d ? 3 : 2;
    const auto k = SwitchKernel::make(opts.common.p, opts.common.q);

    std::vector<std::array<double, 3>> inits;
    if (!opts.inits.empty()) {
        for (const auto& s : opts.inits) {
            const auto values = parse_csv_doubles(s);
            if (values.size() != dim) {
                std::cerr << "flow: --init needs " << dim << " comma-separated values\n";
                return kExitConfig;
            }
            inits.push_back({values[0], values[1], dim == 3 ? values[2] : 0.0});
        }
    } else if (opts.gauss_sigma > 0.0) {
        Rng rng(opts.common.seed);
        for (int i = 0; i < opts.count; ++i) {
            std::array<double, 3> init{0.0, 0.0, 0.0};
            for (std::size_t d = 0; d < dim; ++d) {
                init[d] = opts.gauss_sigma * normal01(rng);
            }
            inits.push_back(init);
        }
    } else {
        std::cerr << "flow: provide --init or --gauss\n";
        return kExitConfig;
    }

    flow::FlowConfig config;
    config.grad_stop = opts.tol_grad;
    config.t_max = opts.t_max;

    int exit_code = kExitOk;
    for (std::size_t idx = 0; idx < inits.size(); ++idx) {
        const auto& init = inits[idx];
        flow::Trajectory traj =
            three_d ? flow::integrate3d(k, Params3{init[0], init[1], init[2]}, config)
                    : flow::integrate2d(k, Params2{init[0], init[1]}, config);

        if (traj.terminated_by == flow::Termination::StepLimit && !opts.allow_partial) {
            std::cerr << "flow: step limit reached for init " << idx
                      << " (rerun with --allow-partial to keep partial output)\n";
            return kExitNumerical;
        }

        bool have_report = false;
        flow::LimitReport report;
        try {
            report = flow::verify_trajectory(
                traj, k, std::numeric_limits<double>::infinity());
            have_report = true;
        } catch (const std::exception& ex) {
            if (!opts.allow_partial) {
                std::cerr << "flow: trajectory " << idx << " did not converge: "
                          << ex.what() << "\n";
                return kExitNumerical;
            }
        }

        Meta meta = base_meta("flow", opts.common);
        meta.emplace_back("init", fmt(init[0]) + "," + fmt(init[1]) +
                                      (three_d ? "," + fmt(init[2]) : ""));
        if (opts.inits.empty()) {
            meta.emplace_back("gauss_sigma", fmt(opts.gauss_sigma));
            meta.emplace_back("count", std::to_string(opts.count));
        }
        meta.emplace_back("tol_grad", fmt(opts.tol_grad));
        meta.emplace_back("t_max", fmt(opts.t_max));
        meta.emplace_back("rel_tol", fmt(config.rel_tol));
        meta.emplace_back("abs_tol", fmt(config.abs_tol));

        const std::string path =
            indexed_path(opts.common.out, static_cast<int>(idx),
                         static_cast<int>(inits.size()));
        if (opts.common.format == "csv") {
            std::ostringstream csv;
            csv << csv_meta(meta);
            csv << (three_d ? "t,e,w,a,loss,energy,grad_norm\n"
                            : "t,e,w,loss,energy,grad_norm\n");
            for (std::size_t i = 0; i < traj.times.size(); ++i) {
                csv << fmt(traj.times[i]) << ',' << fmt(traj.states[i][0]) << ','
                    << fmt(traj.states[i][1]);
                if (three_d) csv << ',' << fmt(traj.states[i][2]);
                csv << ',' << fmt(traj.losses[i]) << ',' << fmt(traj.energies[i])
                    << ',' << fmt(traj.grad_norms[i]) << '\n';
            }
            csv << "# terminated_by=" << flow::to_string(traj.terminated_by) << "\n";
            if (have_report) {
                csv << "# limit_theta=" << fmt(report.theta_lim[0]) << ","
                    << fmt(report.theta_lim[1]);
                if (three_d) csv << "," << fmt(report.theta_lim[2]);
                csv << "\n# limit_class=" << canonical::to_string(report.critical_class)
                    << "\n# energy_drift=" << fmt(report.energy_drift)
                    << "\n# grad_norm_final=" << fmt(report.grad_norm_final)
                    << "\n# loss_final=" << fmt(report.loss_final)
                    << "\n# saddle_suspect=" << (report.saddle_suspect ? "1" : "0")
                    << "\n";
            }
            write_atomic(path, csv.str());
        } else {
            json rows = json::array();
            for (std::size_t i = 0; i < traj.times.size(); ++i) {
                json row = {{"t", jnum(traj.times[i])},
                            {"e", jnum(traj.states[i][0])},
                            {"w", jnum(traj.states[i][1])},
                            {"loss", jnum(traj.losses[i])},
                            {"energy", jnum(traj.energies[i])},
                            {"grad_norm", jnum(traj.grad_norms[i])}};
                if (three_d) row["a"] = jnum(traj.states[i][2]);
                rows.push_back(row);
            }
            json doc = {{"metadata", json_meta(meta)},
                        {"rows", rows},
                        {"terminated_by", flow::to_string(traj.terminated_by)}};
            if (have_report) {
                json lim = {{"class", canonical::to_string(report.critical_class)},
                            {"energy_drift", jnum(report.energy_drift)},
                            {"grad_norm_final", jnum(report.grad_norm_final)},
                            {"loss_final", jnum(report.loss_final)},
                            {"saddle_suspect", report.saddle_suspect},
                            {"theta", json::array({jnum(report.theta_lim[0]),
                                                   jnum(report.theta_lim[1])})}};
                if (three_d) lim["theta"].push_back(jnum(report.theta_lim[2]));
                doc["limit_report"] = lim;
            }
            write_atomic(path, doc.dump(2) + "\n");
        }
    }
    return exit_code;
}

// ---------------------------------------------------------------------------
// basin

struct BasinOpts {
    CommonOpts common;
    std::vector<double> bounds;
    std::vector<int> grid;
    double tol_grad = 1e-9;
    double t_max = 1e4;
    bool predicted_only = false;
};

int run_basin(const BasinOpts& opts) {
    const bool three_d = opts.common.mode == "attention3d";
    const std::size_t want_bounds = three_d ? 6 : 4;
    const std::size_t want_grid = three_d ? 3 : 2;
    if (opts.bounds.size() != want_bounds || opts.grid.size() != want_grid) {
        std::cerr << "basin: --bounds needs " << want_bounds << " values and --grid "
                  << want_grid << " for mode " << opts.common.mode << "\n";
        return kExitConfig;
    }
    if (three_d && opts.predicted_only) {
        std::cerr << "basin: no closed-form prediction exists in 3-D\n";
        return kExitConfig;
    }
    const auto k = SwitchKernel::make(opts.common.p, opts.common.q);
    markov::require_nondegenerate(k); // -> exit 2 via the DegenerateKernel handler

    flow::GridSpec grid;
    grid.e_min = opts.bounds[0];
    grid.e_max = opts.bounds[1];
    grid.w_min = opts.bounds[2];
    grid.w_max = opts.bounds[3];
    grid.ne = opts.grid[0];
    grid.nw = opts.grid[1];
    if (three_d) {
        grid.a_min = opts.bounds[4];
        grid.a_max = opts.bounds[5];
        grid.na = opts.grid[2];
        grid.dim = 3;
    }

    Meta meta = base_meta("basin", opts.common);
    meta.emplace_back("bounds", join_doubles(opts.bounds));
    meta.emplace_back("grid", join_ints(opts.grid));
    meta.emplace_back("boundary_band", fmt(grid.boundary_band));
    meta.emplace_back("tol_grad", fmt(opts.tol_grad));
    meta.emplace_back("t_max", fmt(opts.t_max));

    std::ostringstream csv;
    json rows = json::array();

    if (opts.predicted_only) {
        csv << "e,w,predicted\n";
        const auto coord = [](double lo, double hi, int n, int i) {
            return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
        };
        for (int i = 0; i < grid.ne; ++i) {
            for (int j = 0; j < grid.nw; ++j) {
                const double e = coord(grid.e_min, grid.e_max, grid.ne, i);
                const double w = coord(grid.w_min, grid.w_max, grid.nw, j);
                const std::string pred =
                    canonical::to_string(canonical::basin(k, Params2{e, w}));
                if (opts.common.format == "csv") {
                    csv << fmt(e) << ',' << fmt(w) << ',' << pred << '\n';
                } else {
                    rows.push_back({{"e", jnum(e)}, {"w", jnum(w)}, {"predicted", pred}});
                }
            }
        }
        if (opts.common.format == "csv") {
            write_atomic(opts.common.out, csv_meta(meta) + csv.str());
        } else {
            json doc = {{"metadata", json_meta(meta)}, {"rows", rows}};
            write_atomic(opts.common.out, doc.dump(2) + "\n");
        }
        return kExitOk;
    }

    flow::FlowConfig config;
    config.grad_stop = opts.tol_grad;
    config.t_max = opts.t_max;
    const auto result = flow::basin_sweep(k, grid, config);

    csv << (three_d ? "e,w,a,predicted,integrated,agree\n"
                    : "e,w,predicted,integrated,agree\n");
    for (const auto& cell : result.cells) {
        if (cell.excluded) continue;
        const std::string pred =
            cell.has_prediction ? canonical::to_string(cell.predicted) : "n/a";
        const std::string integ = canonical::to_string(cell.integrated);
        if (opts.common.format == "csv") {
            csv << fmt(cell.init[0]) << ',' << fmt(cell.init[1]);
            if (three_d) csv << ',' << fmt(cell.init[2]);
            csv << ',' << pred << ',' << integ << ','
                << (cell.has_prediction ? (cell.agree ? "1" : "0") : "n/a") << '\n';
        } else {
            json row = {{"e", jnum(cell.init[0])},
                        {"w", jnum(cell.init[1])},
                        {"predicted", pred},
                        {"integrated", integ}};
            if (three_d) row["a"] = jnum(cell.init[2]);
            if (cell.has_prediction) row["agree"] = cell.agree;
            rows.push_back(row);
        }
    }

    if (opts.common.format == "csv") {
        std::ostringstream tail;
        tail << "# compared=" << result.compared << "\n# agreed=" << result.agreed
             << "\n# agreement_rate=" << fmt(result.agreement_rate) << "\n";
        write_atomic(opts.common.out, csv_meta(meta) + csv.str() + tail.str());
    } else {
        json doc = {{"metadata", json_meta(meta)},
                    {"rows", rows},
                    {"compared", result.compared},
                    {"agreed", result.agreed},
                    {"agreement_rate", jnum(result.agreement_rate)}};
        write_atomic(opts.common.out, doc.dump(2) + "\n");
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyOpts {
    CommonOpts common;
    double fd_h = -1.0; // <0: per-oracle defaults (1e-5 grad, 1e-4 hess)
};

struct CheckResult {
    std::string name;
    bool pass;
    std::string detail;
};

SwitchKernel verify_kernel(Rng& rng, double min_gap = 0.02) {
    for (;;) {
        const double p = uniform(rng, 0.05, 0.95);
        const double q = uniform(rng, 0.05, 0.95);
        if (std::abs(p + q - 1.0) > min_gap) return SwitchKernel::make(p, q);
    }
}

double vec_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-3});
}

std::vector<CheckResult> run_verify_battery(std::uint64_t seed, double fd_h) {
    const double h_grad = fd_h > 0.0 ? fd_h : 1e-5;
    const double h_hess = fd_h > 0.0 ? fd_h : 1e-4;
    std::vector<CheckResult> results;
    char detail[160];

    { // gradient oracles, three forms
        Rng rng(seed + 1);
        double worst2b = 0.0, worst2 = 0.0, worst3 = 0.0;
        int n = 0;
        while (n < 100) {
            const auto k = verify_kernel(rng);
            const double e = uniform(rng, -2.0, 2.0);
            const double w = uniform(rng, -2.0, 2.0);
            const double b = uniform(rng, -1.5, 1.5);
            const double a = uniform(rng, -1.5, 1.5);
            if (std::abs(w) < 1e-3) continue;
            ++n;
            const auto g3 = canonical::grad_with_bias(k, {e, w, b});
            const auto fd3 = oracle::fd_gradient(
                [&](const std::vector<double>& x) {
                    return canonical::loss_with_bias(k, {x[0], x[1], x[2]});
                },
                {e, w, b}, h_grad);
            worst2b = std::max(worst2b, vec_rel_err({g3.de, g3.dw, g3.db}, fd3));

            const auto g2 = canonical::grad(k, {e, w});
            const auto fd2 = oracle::fd_gradient(
                [&](const std::vector<double>& x) {
                    return canonical::loss(k, {x[0], x[1]});
                },
                {e, w}, h_grad);
            worst2 = std::max(worst2, vec_rel_err({g2.de, g2.dw}, fd2));

            const auto ga = attention::attn_grad(k, e, w, a);
            const auto fda = oracle::fd_gradient(
                [&](const std::vector<double>& x) {
                    return attention::attn_loss(k, x[0], x[1], x[2]);
                },
                {e, w, a}, h_grad);
            worst3 = std::max(worst3, vec_rel_err({ga.de, ga.dw, ga.da}, fda));
        }
        const double worst = std::max({worst2b, worst2, worst3});
        std::snprintf(detail, sizeof(detail),
                      "max rel err: bias=%.3g optbias=%.3g attn=%.3g (tol 1e-5)",
                      worst2b, worst2, worst3);
        results.push_back({"fd_gradients", worst < 1e-5, detail});
    }

    { // axis Hessians vs finite differences
        Rng rng(seed + 2);
        double worst = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            const auto k = verify_kernel(rng);
            const double w = uniform(rng, -1.5, 1.5);
            const double a = uniform(rng, -1.5, 1.5);
            const double b = std::log(k.p / k.q);
            const auto fd3 = oracle::fd_hessian(
                [&](const std::vector<double>& x) {
                    return canonical::loss_with_bias(k, {x[1], x[2], x[0]});
                },
                {b, 0.0, w}, h_hess);
            const auto h3 = canonical::hessian_with_bias_on_axis(k, w);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    worst = std::max(worst, std::abs(fd3[i][j] - h3[i][j]));
            const auto fd2 = oracle::fd_hessian(
                [&](const std::vector<double>& x) {
                    return canonical::loss(k, {x[0], x[1]});
                },
                {0.0, w}, h_hess);
            const auto h2 = canonical::reduced_hessian_on_axis(k, w);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    worst = std::max(worst, std::abs(fd2[i][j] - h2[i][j]));
            const auto fd4 = oracle::fd_hessian(
                [&](const std::vector<double>& x) {
                    return attention::attn_loss_with_bias(k, x[1], x[2], x[3], x[0]);
                },
                {b, 0.0, w, a}, h_hess);
            const auto h4 = attention::attn_hessian_on_axis(k, w, a);
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    worst = std::max(worst, std::abs(fd4[i][j] - h4[i][j]));
        }
        std::snprintf(detail, sizeof(detail), "max abs err %.3g (tol 1e-4)", worst);
        results.push_back({"fd_hessians_axis", worst < 1e-4, detail});
    }

    { // energy conservation along integrated trajectories
        Rng rng(seed + 3);
        double worst = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            const auto k = verify_kernel(rng, 0.05);
            double w0 = uniform(rng, -1.5, 1.5);
            if (std::abs(w0) < 0.01) w0 = 0.05;
            const Params2 init2{uniform(rng, -1.5, 1.5), w0};
            const auto t2 = flow::integrate2d(k, init2);
            for (double en : t2.energies)
                worst = std::max(worst, std::abs(en - t2.energies.front()));
            const Params3 init3{uniform(rng, -1.5, 1.5), w0, uniform(rng, -1.0, 1.0)};
            const auto t3 = flow::integrate3d(k, init3);
            for (double en : t3.energies)
                worst = std::max(worst, std::abs(en - t3.energies.front()));
        }
        std::snprintf(detail, sizeof(detail), "max drift %.3g (tol 1e-6)", worst);
        results.push_back({"energy_conservation", worst < 1e-6, detail});
    }

    { // full-model collapse
        Rng rng(seed + 4);
        double worst = 0.0;
        for (int d : {4, 8, 16}) {
            for (int trial = 0; trial < 10; ++trial) {
                const double e = uniform(rng, -1.5, 1.5);
                const double w = uniform(rng, -1.5, 1.5);
                const double b = uniform(rng, -1.0, 1.0);
                const double a = trial % 2 == 0 ? 0.0 : uniform(rng, -1.0, 1.0);
                const auto spec = oracle::FullModelSpec::make(d, rng(), e, w, b, a);
                const auto bits = markov::sample_sequence(
                    SwitchKernel::make(0.35, 0.65 + 0.01), 32, rng());
                for (std::size_t n = 1; n <= bits.bits.size(); ++n) {
                    const double got = oracle::full_forward(spec, bits, n);
                    const double want =
                        attention::attn_logit(bits.bits[n - 1], e, w, a, b);
                    worst = std::max(worst, std::abs(got - want));
                }
            }
        }
        std::snprintf(detail, sizeof(detail), "max |logit diff| %.3g (tol 1e-10)",
                      worst);
        results.push_back({"full_model_collapse", worst < 1e-10, detail});
    }

    { // Monte-Carlo consistency
        Rng rng(seed + 5);
        bool pass = true;
        double worst_sigmas = 0.0;
        for (int trial = 0; trial < 3; ++trial) {
            const auto k = verify_kernel(rng);
            const Params2 params{uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5)};
            const double b = canonical::optimal_bias(k, params);
            const auto predictor = [&](int x) {
                return sigmoid(canonical::logit(x, {params.e, params.w, b}));
            };
            const auto mc = oracle::mc_loss(k, predictor, 1000000, rng());
            const double sigmas =
                std::abs(mc.estimate - canonical::loss(k, params)) / mc.std_error;
            worst_sigmas = std::max(worst_sigmas, sigmas);
            pass = pass && sigmas < 3.0;
        }
        std::snprintf(detail, sizeof(detail), "worst deviation %.2f sigma (tol 3)",
                      worst_sigmas);
        results.push_back({"mc_consistency", pass, detail});
    }

    { // f-identity at the optimal bias, both parameterizations
        Rng rng(seed + 6);
        double worst = 0.0;
        for (int trial = 0; trial < 200; ++trial) {
            const auto k = verify_kernel(rng);
            const auto pi = markov::stationary(k);
            const double e = uniform(rng, -2.0, 2.0);
            const double w = uniform(rng, -2.0, 2.0);
            const double a = uniform(rng, -1.5, 1.5);
            const auto f2d =
                canonical::f12_terms(k, {e, w, canonical::optimal_bias(k, {e, w})});
            worst = std::max(worst, std::abs(pi.pi1 * f2d.f1 + f2d.f2));
            const auto f3d = attention::attn_terms(
                k, e, w, a, attention::attn_optimal_bias(k, e, w, a));
            worst = std::max(worst, std::abs(pi.pi1 * f3d.f1 + f3d.f2));
        }
        std::snprintf(detail, sizeof(detail), "max |pi1 f1 + f2| %.3g (tol 1e-10)",
                      worst);
        results.push_back({"f_identity", worst < 1e-10, detail});
    }

    { // loss ordering
        Rng rng(seed + 7);
        bool pass = true;
        double worst_star = 0.0, worst_axis = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            const auto k = verify_kernel(rng, 0.05);
            const double c = std::log((1.0 - k.p) * (1.0 - k.q) / (k.p * k.q));
            const double w = c > 0.0 ? uniform(rng, -kInvSqrt2 + 0.05, 1.5)
                                     : uniform(rng, -2.5, -kInvSqrt2 - 0.05);
            const double e = std::sqrt(c / (1.0 + 2.0 * w * std::abs(w)));
            worst_star = std::max(
                worst_star,
                std::abs(canonical::loss(k, {e, w}) - markov::entropy_rate(k)));
            worst_axis = std::max(
                worst_axis, std::abs(canonical::loss(k, {0.0, uniform(rng, -2.0, 2.0)}) -
                                     markov::marginal_entropy(k)));
            pass = pass && markov::entropy_rate(k) < markov::marginal_entropy(k);
        }
        pass = pass && worst_star < 1e-9 && worst_axis < 1e-12;
        std::snprintf(detail, sizeof(detail),
                      "global-set err %.3g (tol 1e-9), axis err %.3g (tol 1e-12)",
                      worst_star, worst_axis);
        results.push_back({"loss_ordering", pass, detail});
    }

    return results;
}

int run_verify(const VerifyOpts& opts) {
    const auto results = run_verify_battery(opts.common.seed, opts.fd_h);
    Meta meta = base_meta("verify", opts.common, /*with_kernel=*/false);
    meta.emplace_back("fd_h", opts.fd_h > 0.0 ? fmt(opts.fd_h) : "default");

    bool all_pass = true;
    std::ostringstream csv;
    csv << "check,status,detail\n";
    json rows = json::array();
    for (const auto& r : results) {
        all_pass = all_pass && r.pass;
        if (opts.common.format == "csv") {
            csv << r.name << ',' << (r.pass ? "pass" : "fail") << ",\"" << r.detail
                << "\"\n";
        } else {
            rows.push_back({{"check", r.name},
                            {"status", r.pass ? "pass" : "fail"},
                            {"detail", r.detail}});
        }
    }

    if (opts.common.format == "csv") {
        csv << "# overall=" << (all_pass ? "pass" : "fail") << "\n";
        write_atomic(opts.common.out, csv_meta(meta) + csv.str());
    } else {
        json doc = {{"metadata", json_meta(meta)},
                    {"checks", rows},
                    {"overall", all_pass ? "pass" : "fail"}};
        write_atomic(opts.common.out, doc.dump(2) + "\n");
    }
    std::cout << (all_pass ? "verify: all checks passed\n"
                           : "verify: FAILURES present\n");
    return all_pass ? kExitOk : kExitVerifyFail;
}

// ---------------------------------------------------------------------------
// sample

struct SampleOpts {
    CommonOpts common;
    std::size_t n = 0;
};

int run_sample(const SampleOpts& opts) {
    if (opts.n < 1) {
        std::cerr << "sample: --n must be >= 1\n";
        return kExitConfig;
    }
    const auto k = SwitchKernel::make(opts.common.p, opts.common.q);
    const auto seq = markov::sample_sequence(k, opts.n, opts.common.seed);

    Meta meta = base_meta("sample", opts.common);
    meta.emplace_back("n", std::to_string(opts.n));

    if (opts.common.format == "csv") {
        std::string line;
        line.reserve(seq.bits.size() + 1);
        for (auto bit : seq.bits) line += bit ? '1' : '0';
        line += '\n';
        write_atomic(opts.common.out, csv_meta(meta) + line);
    } else {
        std::string line;
        line.reserve(seq.bits.size());
        for (auto bit : seq.bits) line += bit ? '1' : '0';
        json doc = {{"metadata", json_meta(meta)}, {"bits", line}};
        write_atomic(opts.common.out, doc.dump(2) + "\n");
    }
    return kExitOk;
}

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"mcflow: loss landscape and gradient-flow toolkit for the "
                 "canonical low-rank transformer on binary Markov chains"};
    app.require_subcommand(1);

    LandscapeOpts landscape;
    auto* cmd_landscape = app.add_subcommand(
        "landscape", "evaluate loss/energy/gradients/classes on a grid");
    add_common(cmd_landscape, landscape.common);
    cmd_landscape->add_option("--bounds", landscape.bounds,
                              "e_min,e_max,w_min,w_max[,a_min,a_max]")
        ->required()
        ->delimiter(',');
    cmd_landscape->add_option("--grid", landscape.grid, "ne,nw[,na]")
        ->required()
        ->delimiter(',');

    FlowOpts flow_opts;
    auto* cmd_flow = app.add_subcommand("flow", "integrate gradient-flow trajectories");
    add_common(cmd_flow, flow_opts.common);
    cmd_flow->add_option("--init", flow_opts.inits,
                         "initial point e,w or e,w,a (repeatable)");
    cmd_flow->add_option("--gauss", flow_opts.gauss_sigma,
                         "draw inits from N(0, sigma^2 I)");
    cmd_flow->add_option("--count", flow_opts.count, "number of Gaussian inits")
        ->check(CLI::PositiveNumber);
    cmd_flow->add_option("--tol-grad", flow_opts.tol_grad, "gradient-norm stop");
    cmd_flow->add_option("--t-max", flow_opts.t_max, "time horizon");
    cmd_flow->add_flag("--allow-partial", flow_opts.allow_partial,
                       "keep non-converged trajectories instead of failing");

    BasinOpts basin_opts;
    auto* cmd_basin = app.add_subcommand(
        "basin", "predicted vs integrated convergence classes on a grid");
    add_common(cmd_basin, basin_opts.common);
    cmd_basin->add_option("--bounds", basin_opts.bounds,
                          "e_min,e_max,w_min,w_max[,a_min,a_max]")
        ->required()
        ->delimiter(',');
    cmd_basin->add_option("--grid", basin_opts.grid, "ne,nw[,na]")
        ->required()
        ->delimiter(',');
    cmd_basin->add_option("--tol-grad", basin_opts.tol_grad, "gradient-norm stop");
    cmd_basin->add_option("--t-max", basin_opts.t_max, "time horizon");
    cmd_basin->add_flag("--predicted-only", basin_opts.predicted_only,
                        "emit predictions without integrating");

    VerifyOpts verify_opts;
    auto* cmd_verify =
        app.add_subcommand("verify", "run the self-verification battery");
    add_common(cmd_verify, verify_opts.common, /*needs_kernel=*/false);
    cmd_verify->add_option("--fd-h", verify_opts.fd_h,
                           "finite-difference step override");

    SampleOpts sample_opts;
    auto* cmd_sample = app.add_subcommand("sample", "draw a Markov bit sequence");
    add_common(cmd_sample, sample_opts.common);
    cmd_sample->add_option("--n", sample_opts.n, "sequence length")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (cmd_landscape->parsed()) return run_landscape(landscape);
        if (cmd_flow->parsed()) return run_flow(flow_opts);
        if (cmd_basin->parsed()) return run_basin(basin_opts);
        if (cmd_verify->parsed()) return run_verify(verify_opts);
        if (cmd_sample->parsed()) return run_sample(sample_opts);
    } catch (const DegenerateKernel& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitNumerical;
    }
    return kExitConfig;
}

} // namespace mcflow::cli
