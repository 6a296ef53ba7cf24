#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <toml.hpp>

#include "gperm/acceptance.hpp"
#include "gperm/configuration.hpp"
#include "gperm/estimators.hpp"
#include "gperm/parallel.hpp"
#include "gperm/serialize.hpp"
#include "run_config.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { ok = 0, usage = 1, validation = 2, numeric = 3, acceptance = 4 };

struct AcceptanceFailure {};

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw gperm::ParameterError("cannot write " + path.string());
        f << text;
        if (!f) throw gperm::ParameterError("cannot write " + path.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw gperm::ParameterError("cannot read " + path.string());
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

std::string replica_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "replica_%06zu", i);
    return buf;
}

class Sidecar {
public:
    Sidecar(fs::path out, std::string mode) : path_(std::move(out) / "metadata.json"), mode_(std::move(mode)), start_(std::chrono::steady_clock::now()) {
        entry_["started_utc"] = utc_now();
    }
    json& entry() { return entry_; }
    void finish(int status) {
        entry_["finished_utc"] = utc_now();
        entry_["runtime_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        entry_["exit_status"] = status;
        json doc = json::object();
        if (fs::exists(path_)) {
            try {
                doc = json::parse(read_file(path_));
            } catch (const std::exception&) {
                doc = json::object();
            }
        }
        doc[mode_] = entry_;
        write_file(path_, doc.dump(2) + "\n");
    }

private:
    fs::path path_;
    std::string mode_;
    std::chrono::steady_clock::time_point start_;
    json entry_ = json::object();
};

std::vector<gperm::Configuration> load_ensemble(const fs::path& out) {
    const fs::path dir = out / "ensemble";
    std::vector<fs::path> files;
    if (fs::is_directory(dir))
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    if (files.empty()) throw gperm::InsufficientDataError("no ensembles found in " + dir.string());
    std::sort(files.begin(), files.end());
    std::vector<gperm::Configuration> cs;
    for (const auto& f : files) {
        try {
            cs.push_back(gperm::deserialize(read_file(f)));
        } catch (const gperm::ParseError& e) {
            throw gperm::ParseError(std::string(e.what()) + " in " + f.filename().string(), "");
        }
        const auto& a = cs.front();
        const auto& b = cs.back();
        if (!(a.params == b.params) || !(a.window == b.window) || a.rho != b.rho)
            throw gperm::ParameterError("ensemble files disagree on model or window: " + f.filename().string());
    }
    return cs;
}

json bias_bounds(const std::vector<gperm::Configuration>& cs) {
    double tail = 0.0, ret = 0.0;
    std::uint64_t truncated = 0;
    for (const auto& c : cs) {
        tail = std::max(tail, c.provenance.loop_tail_density);
        ret = std::max(ret, c.provenance.return_bound);
        truncated += c.provenance.truncated_trajectories;
    }
    return {{"loop_tail_density", tail}, {"return_bound", ret}, {"truncated_trajectories", truncated}};
}

int run_sample(const grp::RunConfig& cfg, Sidecar& side) {
    const fs::path out(cfg.out);
    const double rho = cfg.total_density();
    std::vector<double> runtimes(cfg.replicas, 0.0);
    gperm::parallel_for(cfg.replicas, cfg.threads, [&](std::size_t i) {
        const auto start = std::chrono::steady_clock::now();
        const gperm::RngStream rng(cfg.seed, gperm::stream_id({static_cast<std::uint64_t>(i)}));
        const auto c = gperm::assemble_grp(rng, cfg.window, rho, cfg.params, cfg.grp);
        write_file(out / "ensemble" / (replica_name(i) + ".json"), gperm::serialize(c));
        runtimes[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });
    side.entry()["replica_runtimes_s"] = runtimes;
    std::printf("wrote %zu configurations to %s\n", cfg.replicas, (out / "ensemble").string().c_str());
    return ok;
}

int run_estimate(const grp::RunConfig& cfg, Sidecar&) {
    const fs::path out(cfg.out);
    const auto cs = load_ensemble(out);
    const auto& h = cs.front();
    const auto& W = h.window;
    const auto params = h.params;
    const double beta = h.beta;
    const auto bounds = bias_bounds(cs);
    const double tail = bounds["loop_tail_density"].get<double>();
    const double ret = bounds["return_bound"].get<double>();
    const auto ens = gperm::ensemble_points(cs);
    std::vector<gperm::EstimateReport> reports;
    json notes = json::array();

    reports.push_back(gperm::density_estimate(ens, W, h.rho, tail + beta * ret, "density"));

    const auto& es = cfg.estimate;
    std::vector<double> lo(W.lower), hi(W.lower);
    for (auto& v : hi) v += es.pair_side;
    const gperm::Box B1(lo, hi);
    auto lo2 = lo, hi2 = hi;
    lo2[0] += es.pair_separation;
    hi2[0] += es.pair_separation;
    const gperm::Box B2(lo2, hi2);
    try {
        gperm::translation_range({B1, B2}, W);
        double target = 0.0, tol = 0.0;
        double rho_loops = 0.0;
        if (params.lambda > 0.0) {
            const auto lt = gperm::loop_pair_target(B1, B2, params);
            rho_loops = gperm::total_density(params).value;
            target += lt.value;
            tol += lt.error + 4.0 * rho_loops * tail;
        }
        if (beta > 0.0) {
            const auto it = gperm::interlacement_pair_target(B1, B2, beta, params);
            target += it.value + 2.0 * rho_loops * beta;
            tol += it.error + 2.0 * ret * it.value;
        }
        reports.push_back(gperm::correlation_estimate(ens, {B1, B2}, target, tol, &W, "pair_correlation"));
    } catch (const gperm::ParameterError& e) {
        notes.push_back(std::string("pair correlation skipped: ") + e.what());
    }

    if (params.d == 1 && beta == 0.0) {
        std::vector<double> bhi(W.lower);
        bhi[0] = std::min(W.upper[0], W.lower[0] + 1.0);
        const gperm::Box B(W.lower, bhi);
        try {
            const auto s = gperm::laplace_series_loops(B, es.laplace_height, params);
            const double length_bias = tail * B.volume() * -std::expm1(-es.laplace_height);
            reports.push_back(gperm::laplace_mc(ens, B, es.laplace_height, s.value, s.truncation_bound + s.quadrature_error + length_bias, "laplace"));
        } catch (const gperm::DomainError& e) {
            notes.push_back(std::string("Laplace functional skipped: ") + e.what());
        }
    } else {
        notes.push_back("Laplace functional target available for d = 1 loop ensembles only");
    }

    if (params.lambda > 0.0) {
        const double rho_loops = gperm::total_density(params).value;
        const auto kmax = static_cast<std::size_t>(es.spectrum_k_max);
        std::vector<std::vector<double>> per_k(kmax + 1, std::vector<double>(cs.size(), 0.0));
        std::vector<double> total(cs.size(), 0.0);
        for (std::size_t i = 0; i < cs.size(); ++i)
            for (const auto& l : cs[i].loops) {
                const auto v = static_cast<double>(gperm::visits_in(l, W));
                total[i] += v;
                if (l.length() <= kmax) per_k[l.length()][i] += v;
            }
        for (std::size_t k = 1; k <= kmax; ++k) {
            if (std::all_of(per_k[k].begin(), per_k[k].end(), [](double v) { return v == 0.0; })) {
                notes.push_back("loop_fraction_k" + std::to_string(k) + " skipped: no points of " + std::to_string(k) + "-loops in the window");
                continue;
            }
            const double frac = gperm::loop_density(static_cast<int>(k), params) / rho_loops;
            reports.push_back(gperm::make_report("loop_fraction_k" + std::to_string(k), gperm::detail::ratio_of_means(per_k[k], total), frac,
                                                 frac * tail / rho_loops));
        }
    }

    json doc = gperm::compare_report(reports);
    doc["bias_bounds"] = bounds;
    doc["notes"] = notes;
    doc["ensemble"] = {{"replicas", cs.size()}, {"seed", h.provenance.seed}};
    write_file(out / "reports" / "estimates.json", doc.dump(2) + "\n");
    write_file(out / "reports" / "estimates.csv", gperm::compare_report_csv(reports));
    for (const auto& r : reports) std::printf("%s %s\n", r.flagged() ? "[FLAG]" : "[ OK ]", gperm::detail::describe(r).c_str());
    return ok;
}

int run_report(const grp::RunConfig& cfg, Sidecar&) {
    const fs::path out(cfg.out);
    const auto cs = load_ensemble(out);
    const auto& h = cs.front();
    const auto& W = h.window;
    const auto bounds = bias_bounds(cs);
    std::ostringstream s;
    char buf[256];
    s << "Gaussian random permutation ensemble\n";
    std::snprintf(buf, sizeof buf, "d = %d, alpha = %.6g, rho = %.6g, lambda = %.10g, beta = %.6g\n", h.params.d, h.params.alpha, h.rho, h.params.lambda, h.beta);
    s << buf;
    s << "window:";
    for (std::size_t c = 0; c < W.lower.size(); ++c) {
        std::snprintf(buf, sizeof buf, " [%.6g, %.6g]", W.lower[c], W.upper[c]);
        s << buf;
    }
    s << "\nreplicas: " << cs.size() << ", master seed " << h.provenance.seed << "\n";
    std::snprintf(buf, sizeof buf, "bias bounds: loop tail density %.3g (k_max %lld), return bound %.3g, truncated trajectories %llu\n",
                  bounds["loop_tail_density"].get<double>(), static_cast<long long>(h.provenance.k_max), bounds["return_bound"].get<double>(),
                  static_cast<unsigned long long>(bounds["truncated_trajectories"].get<std::uint64_t>()));
    s << buf << "\nreplica  loops  trajectories  points_in_window\n";
    std::map<std::int64_t, gperm::CycleCount> spectrum;
    double points = 0.0;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        const auto n = gperm::points_in(cs[i], W);
        points += static_cast<double>(n);
        std::snprintf(buf, sizeof buf, "%7zu  %5zu  %12zu  %16lld\n", i, cs[i].loops.size(), cs[i].trajectories.size(), static_cast<long long>(n));
        s << buf;
        for (const auto& [k, c] : gperm::cycle_spectrum(cs[i].loops)) {
            spectrum[k].loops += c.loops;
            spectrum[k].points += c.points;
        }
    }
    std::snprintf(buf, sizeof buf, "\nmean density in window: %.6g (configured %.6g)\n", points / (static_cast<double>(cs.size()) * W.volume()), h.rho);
    s << buf << "\nloop length  loops  points\n";
    for (const auto& [k, c] : spectrum) {
        if (k > 20) break;
        std::snprintf(buf, sizeof buf, "%11lld  %5lld  %6lld\n", static_cast<long long>(k), static_cast<long long>(c.loops), static_cast<long long>(c.points));
        s << buf;
    }
    std::int64_t long_loops = 0;
    for (const auto& [k, c] : spectrum)
        if (k > 20) long_loops += c.loops;
    s << "longer than 20: " << long_loops << " loops\n";
    write_file(out / "reports" / "summary.txt", s.str());
    const std::size_t nfig = std::min(cfg.figures, cs.size());
    for (std::size_t i = 0; i < nfig; ++i) {
        std::snprintf(buf, sizeof buf, "GRP sample %zu: rho = %.4g, d = %d", i, h.rho, h.params.d);
        write_file(out / "figures" / (replica_name(i) + ".svg"), grp::configuration_svg(cs[i], buf));
    }
    std::cout << s.str();
    std::printf("wrote %zu figures to %s\n", nfig, (out / "figures").string().c_str());
    return ok;
}

int run_verify(const grp::RunConfig& cfg, Sidecar& side, const gperm::AcceptanceOptions& opt) {
    const fs::path out(cfg.out);
    json criteria = json::array();
    std::vector<gperm::EstimateReport> all;
    json runtimes = json::object();
    bool passed = true;
    gperm::run_acceptance(opt, [&](const gperm::CriterionResult& r) {
        std::printf("%s\n", gperm::format_result(r).c_str());
        std::fflush(stdout);
        json reps = json::array();
        for (const auto& rep : r.reports) reps.push_back(gperm::report_to_json(rep));
        criteria.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"detail", r.detail}, {"reports", reps}});
        runtimes[std::to_string(r.id)] = r.runtime_s;
        all.insert(all.end(), r.reports.begin(), r.reports.end());
        passed = passed && r.passed;
    });
    side.entry()["criterion_runtimes_s"] = runtimes;
    json doc = {{"seed", opt.seed}, {"replicas", opt.replicas}, {"passed", passed}, {"criteria", criteria}};
    write_file(out / "reports" / "acceptance.json", doc.dump(2) + "\n");
    write_file(out / "reports" / "acceptance.csv", gperm::compare_report_csv(all));
    std::printf("%s\n", passed ? "all criteria passed" : "acceptance failure");
    if (!passed) throw AcceptanceFailure{};
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian random permutations: sampling, estimation and verification"};
    app.require_subcommand(1);
    std::string config_path;
    std::uint64_t seed = 0;
    std::size_t replicas = 0;
    std::string out_dir;
    unsigned threads = 0;
    std::map<std::string, CLI::App*> subs;
    for (const auto* name : {"sample", "estimate", "verify", "report"}) {
        static const std::map<std::string, std::string> help = {{"sample", "sample configurations into DIR/ensemble"},
                                                                {"estimate", "estimate densities and correlations from DIR/ensemble"},
                                                                {"verify", "run the acceptance battery"},
                                                                {"report", "write a summary and SVG figures for DIR/ensemble"}};
        auto* s = app.add_subcommand(name, help.at(name));
        auto* c = s->add_option("--config", config_path, "TOML run configuration")->check(CLI::ExistingFile);
        if (std::string(name) != "verify") c->required();
        s->add_option("--seed", seed, "master seed (overrides run.seed)");
        s->add_option("--replicas", replicas, "replica count (overrides run.replicas)")->check(CLI::PositiveNumber);
        s->add_option("--out", out_dir, "output directory (overrides run.out)");
        s->add_option("--threads", threads, "worker threads, 0 for all cores (overrides run.threads)");
        subs[name] = s;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage;
    }
    std::string mode;
    for (const auto& [name, s] : subs)
        if (s->parsed()) mode = name;

    std::optional<Sidecar> side;
    auto fail = [&](int code, const std::string& what) {
        std::fprintf(stderr, "grp %s: %s\n", mode.c_str(), what.c_str());
        if (side) {
            try {
                side->finish(code);
            } catch (...) {
            }
        }
        return code;
    };
    try {
        grp::RunConfig cfg;
        const bool have_config = !config_path.empty();
        if (have_config) {
            toml::table root;
            try {
                root = toml::parse_file(config_path);
            } catch (const toml::parse_error& e) {
                std::ostringstream m;
                m << "invalid TOML in " << config_path << " at line " << e.source().begin.line << ", column " << e.source().begin.column << ": "
                  << e.description();
                throw gperm::ParameterError(m.str());
            }
            cfg = grp::parse_config(root);
        } else {
            cfg.out = "grp_verify";
        }
        const auto* s = subs.at(mode);
        if (s->count("--seed")) cfg.seed = seed;
        if (s->count("--replicas")) cfg.replicas = replicas;
        if (s->count("--out")) cfg.out = out_dir;
        if (s->count("--threads")) cfg.threads = threads;
        grp::validate(cfg);
        fs::create_directories(cfg.out);
        side.emplace(cfg.out, mode);
        side->entry()["threads"] = gperm::resolve_threads(cfg.threads);
        {
            std::ostringstream o;
            o << grp::to_toml(cfg) << "\n";
            write_file(fs::path(cfg.out) / "config_used.toml", o.str());
        }
        int code = ok;
        if (mode == "sample") code = run_sample(cfg, *side);
        if (mode == "estimate") code = run_estimate(cfg, *side);
        if (mode == "report") code = run_report(cfg, *side);
        if (mode == "verify") {
            gperm::AcceptanceOptions opt;
            if (s->count("--seed")) opt.seed = seed;
            if (s->count("--replicas")) opt.replicas = replicas;
            opt.threads = cfg.threads;
            code = run_verify(cfg, *side, opt);
        }
        side->finish(code);
        return code;
    } catch (const AcceptanceFailure&) {
        return fail(acceptance, "one or more acceptance criteria failed");
    } catch (const gperm::NumericError& e) {
        return fail(numeric, e.what());
    } catch (const gperm::DomainError& e) {
        return fail(numeric, e.what());
    } catch (const gperm::Error& e) {
        return fail(validation, e.what());
    } catch (const fs::filesystem_error& e) {
        return fail(validation, e.what());
    } catch (const std::exception& e) {
        return fail(numeric, e.what());
    }
}
