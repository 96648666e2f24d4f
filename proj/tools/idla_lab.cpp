// Command-line front end: run experiments, print theory values, or run the
// acceptance suite. Exit code 0 iff every verdict embedded in the output
// passes.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "idla/acceptance.hpp"
#include "idla/harness.hpp"

namespace {

struct OutputOptions {
    std::string out;
    std::string format = "json";
};

void add_output_flags(CLI::App* cmd, OutputOptions& opts) {
    cmd->add_option("--out", opts.out, "output path (default: stdout)");
    cmd->add_option("--format", opts.format, "output format: csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
}

void emit(const OutputOptions& opts, const nlohmann::json& doc, const std::string& csv,
          const std::vector<std::pair<std::string, std::string>>& extra_csv = {}) {
    if (opts.out.empty()) {
        if (opts.format == "json")
            std::cout << doc.dump(2) << '\n';
        else
            std::cout << csv;
        return;
    }
    std::ofstream out(opts.out);
    if (!out) throw std::runtime_error("cannot open output path " + opts.out);
    if (opts.format == "json")
        out << doc.dump(2) << '\n';
    else
        out << csv;
    for (const auto& [suffix, body] : extra_csv) {
        std::ofstream sibling(opts.out + suffix);
        if (!sibling) throw std::runtime_error("cannot open output path " + opts.out + suffix);
        sibling << body;
    }
}

bool doc_verdicts_pass(const nlohmann::json& doc) {
    bool pass = true;
    if (doc.contains("results") && doc["results"].contains("verdicts"))
        for (const auto& v : doc["results"]["verdicts"]) pass = pass && v["pass"].get<bool>();
    if (doc.contains("results") && doc["results"].contains("tails"))
        for (const auto& row : doc["results"]["tails"])
            pass = pass && row["verdict"]["pass"].get<bool>();
    return pass;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"idla-lab: one-dimensional long-range internal DLA simulation laboratory"};
    app.require_subcommand(1);

    std::string law_spec = "simple";
    std::uint64_t seed = 1;
    std::uint64_t max_steps = idla::kDefaultStepCap;
    unsigned threads = idla::default_thread_count();
    app.add_option("--law", law_spec,
                   "law preset (simple|twostep|skipfree|stable15|stable:<alpha>) or JSON file path")
        ->capture_default_str();
    app.add_option("--seed", seed, "master seed")->capture_default_str();
    app.add_option("--max-steps", max_steps, "per-walk step cap")->capture_default_str();
    app.add_option("--threads", threads, "worker threads")->capture_default_str();

    // idla
    auto* idla_cmd = app.add_subcommand("idla", "grow IDLA clusters and record r_m / sigma_x");
    long long m = 2000;
    std::uint64_t replicas = 20;
    std::vector<long long> checkpoints;
    OutputOptions idla_out;
    idla_cmd->add_option("--m", m, "walkers per replica")->capture_default_str();
    idla_cmd->add_option("--replicas", replicas, "independent replicas")->capture_default_str();
    idla_cmd->add_option("--checkpoint", checkpoints, "checkpoint walker counts (repeatable)");
    add_output_flags(idla_cmd, idla_out);

    // gambler
    auto* gam_cmd = app.add_subcommand("gambler", "interval exit-side frequencies vs the limit");
    long long N = 500;
    double c = 1.0;
    double slack = 0.0;
    OutputOptions gam_out;
    gam_cmd->add_option("--N", N, "interval scale: exit from [-cN, N]")->capture_default_str();
    gam_cmd->add_option("--c", c, "left endpoint factor")->capture_default_str();
    gam_cmd->add_option("--replicas", replicas, "replicas")->capture_default_str();
    gam_cmd->add_option("--slack", slack, "absolute comparison slack")->capture_default_str();
    add_output_flags(gam_cmd, gam_out);

    // hitprob
    auto* hit_cmd = app.add_subcommand("hitprob", "hit target before exiting [-cN, N]");
    std::optional<long long> start;
    long long target = 0;
    double hit_slack = 0.02;
    OutputOptions hit_out;
    hit_cmd->add_option("--N", N, "interval scale")->capture_default_str();
    hit_cmd->add_option("--c", c, "left endpoint factor")->capture_default_str();
    hit_cmd->add_option("--start", start, "start site (default floor(N/2))");
    hit_cmd->add_option("--target", target, "target site")->capture_default_str();
    hit_cmd->add_option("--replicas", replicas, "replicas")->capture_default_str();
    hit_cmd->add_option("--slack", hit_slack, "finite-size slack")->capture_default_str();
    add_output_flags(hit_cmd, hit_out);

    // overshoot
    auto* ov_cmd = app.add_subcommand("overshoot", "first-passage overshoots over a level window");
    long long y = 10000;
    double window_factor = 2.0;
    std::size_t levels = 256, paths = 64;
    std::vector<double> u_grid;
    double ov_slack = 0.01;
    OutputOptions ov_out;
    ov_cmd->add_option("--y", y, "base level")->capture_default_str();
    ov_cmd->add_option("--window", window_factor, "window factor (levels span [y, wy])")
        ->capture_default_str();
    ov_cmd->add_option("--levels", levels, "levels per window")->capture_default_str();
    ov_cmd->add_option("--paths", paths, "independent paths")->capture_default_str();
    ov_cmd->add_option("--u", u_grid, "tail thresholds for P(Z/y > u) (repeatable)");
    ov_cmd->add_option("--slack", ov_slack, "finite-size slack")->capture_default_str();
    add_output_flags(ov_cmd, ov_out);

    // ladder
    auto* lad_cmd = app.add_subcommand("ladder", "ladder heights, stationary laws, Spitzer series");
    std::size_t samples = 20000;
    int n_max = 4000;
    OutputOptions lad_out;
    lad_cmd->add_option("--samples", samples, "ladder height samples")->capture_default_str();
    lad_cmd->add_option("--n-max", n_max, "Spitzer series length")->capture_default_str();
    add_output_flags(lad_cmd, lad_out);

    // theory
    auto* th_cmd = app.add_subcommand("theory", "evaluate limit functions and constants");
    std::string fn = "growth";
    double alpha = 1.5, th_y = 0.5, th_c = 1.0, th_u = 1.5, th_s = 2.0, th_w = 3.0, delta = 0.25;
    th_cmd->add_option("--fn", fn,
                       "one of q2|q_alpha|gambler|dynkin_tail|dynkin_density|q_lower|u_alpha|"
                       "q_upper|growth|beta")
        ->capture_default_str();
    th_cmd->add_option("--alpha", alpha, "stability index")->capture_default_str();
    th_cmd->add_option("--y", th_y, "relative position in [0,1]")->capture_default_str();
    th_cmd->add_option("--c", th_c, "interval asymmetry factor")->capture_default_str();
    th_cmd->add_option("--u", th_u, "threshold / inner factor")->capture_default_str();
    th_cmd->add_option("--s", th_s, "outer factor")->capture_default_str();
    th_cmd->add_option("--w", th_w, "argument of u_alpha")->capture_default_str();
    th_cmd->add_option("--delta", delta, "lower cutoff for the strict upper bound")
        ->capture_default_str();

    // accept
    auto* acc_cmd = app.add_subcommand("accept", "run the acceptance suite");
    std::uint64_t acc_seed = 97531;
    acc_cmd->add_option("--seed", acc_seed, "acceptance suite seed")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        const idla::IncrementLaw law = idla::law_from_spec(law_spec);
        bool pass = true;

        if (idla_cmd->parsed()) {
            idla::IdlaConfig cfg;
            cfg.m = m;
            cfg.checkpoints = checkpoints;
            cfg.replicas = replicas;
            cfg.seed = seed;
            cfg.limits.per_walk_step_cap = max_steps;
            cfg.threads = threads;
            const auto res = idla::idla_experiment(law, cfg);
            std::string csv = "replica,m,r_m\n";
            for (std::size_t i = 0; i < res.per_replica.size(); ++i)
                for (const auto& cp : res.per_replica[i].checkpoints)
                    csv += std::to_string(i) + "," + std::to_string(cp.m) + "," +
                           std::to_string(cp.r) + "\n";
            std::string cov = "replica,x,sigma_x\n";
            for (std::size_t i = 0; i < res.per_replica.size(); ++i)
                for (const auto& [x, sx] : res.per_replica[i].coverage)
                    cov += std::to_string(i) + "," + std::to_string(x) + "," +
                           std::to_string(sx) + "\n";
            emit(idla_out, res.document, csv, {{".coverage.csv", cov}});
        } else if (gam_cmd->parsed()) {
            idla::GamblerConfig cfg;
            cfg.N = N;
            cfg.c = c;
            cfg.replicas = replicas;
            cfg.seed = seed;
            cfg.step_cap = max_steps;
            cfg.threads = threads;
            cfg.slack = slack;
            const auto res = idla::gambler_experiment(law, cfg);
            std::string csv = "point,se,replicas,theory,pass\n";
            csv += std::to_string(res.exit_right.point) + "," + std::to_string(res.exit_right.se) +
                   "," + std::to_string(res.exit_right.replicas) + "," +
                   std::to_string(res.verdict.theory) + "," + (res.verdict.pass ? "1" : "0") + "\n";
            emit(gam_out, res.document, csv);
            pass = res.verdict.pass;
        } else if (hit_cmd->parsed()) {
            idla::HitProbConfig cfg;
            cfg.N = N;
            cfg.c = c;
            cfg.start = start;
            cfg.target = target;
            cfg.replicas = replicas;
            cfg.seed = seed;
            cfg.step_cap = max_steps;
            cfg.threads = threads;
            cfg.slack = hit_slack;
            const auto res = idla::hitprob_experiment(law, cfg);
            std::string csv = "point,se,replicas,theory,pass\n";
            csv += std::to_string(res.hit.point) + "," + std::to_string(res.hit.se) + "," +
                   std::to_string(res.hit.replicas) + "," + std::to_string(res.verdict.theory) +
                   "," + (res.verdict.pass ? "1" : "0") + "\n";
            emit(hit_out, res.document, csv);
            pass = res.verdict.pass;
        } else if (ov_cmd->parsed()) {
            idla::OvershootConfig cfg;
            cfg.y = y;
            cfg.window_factor = window_factor;
            cfg.levels = levels;
            cfg.paths = paths;
            if (!u_grid.empty()) cfg.u_grid = u_grid;
            cfg.seed = seed;
            cfg.step_cap = max_steps;
            cfg.threads = threads;
            cfg.slack = ov_slack;
            const auto res = idla::overshoot_experiment(law, cfg);
            std::string csv = "u,prob,se\n";
            for (const auto& row : res.tails)
                csv += std::to_string(row.u) + "," + std::to_string(row.prob.point) + "," +
                       std::to_string(row.prob.se) + "\n";
            std::string zpmf = "z,prob\n";
            for (const auto& [z, p] : res.z_pmf)
                zpmf += std::to_string(z) + "," + std::to_string(p) + "\n";
            emit(ov_out, res.document, csv, {{".zpmf.csv", zpmf}});
            pass = doc_verdicts_pass(res.document);
        } else if (lad_cmd->parsed()) {
            idla::LadderConfig cfg;
            cfg.samples = samples;
            cfg.spitzer_n_max = n_max;
            cfg.seed = seed;
            cfg.step_cap = max_steps;
            const auto res = idla::ladder_experiment(law, cfg);
            std::string csv = "y,prob\n";
            for (const auto& [v, p] : res.stats.ladder_heights)
                csv += std::to_string(v) + "," + std::to_string(p) + "\n";
            std::string sp = "n,partial\n";
            if (res.stats.has_spitzer)
                for (std::size_t n = 0; n < res.stats.spitzer.partials.size(); ++n)
                    sp += std::to_string(n + 1) + "," +
                          std::to_string(res.stats.spitzer.partials[n]) + "\n";
            emit(lad_out, res.document, csv, {{".spitzer.csv", sp}});
        } else if (th_cmd->parsed()) {
            nlohmann::json j;
            j["fn"] = fn;
            j["quadrature_tolerance"] = idla::theory::kDefaultQuadTol;
            if (fn == "q2") {
                j["args"] = {{"y", th_y}, {"c", th_c}};
                j["value"] = idla::theory::q2(th_y, th_c);
            } else if (fn == "q_alpha") {
                j["args"] = {{"alpha", alpha}, {"y", th_y}, {"c", th_c}};
                j["value"] = idla::theory::q_alpha(alpha, th_y, th_c);
            } else if (fn == "gambler") {
                j["args"] = {{"alpha", alpha}, {"c", th_c}};
                j["value"] = idla::theory::gambler_limit(alpha, th_c);
            } else if (fn == "dynkin_tail") {
                j["args"] = {{"alpha", alpha}, {"u", th_u}};
                j["value"] = idla::theory::dynkin_lamperti_tail(alpha, th_u);
            } else if (fn == "dynkin_density") {
                j["args"] = {{"alpha", alpha}, {"v", th_u}};
                j["value"] = idla::theory::dynkin_lamperti_density(alpha, th_u);
            } else if (fn == "q_lower") {
                j["args"] = {{"alpha", alpha}, {"u", th_u}, {"s", th_s}};
                j["value"] = idla::theory::q_lower_envelope(alpha, th_u, th_s);
            } else if (fn == "u_alpha") {
                j["args"] = {{"alpha", alpha}, {"w", th_w}};
                j["value"] = idla::theory::u_alpha_w(alpha, th_w);
            } else if (fn == "q_upper") {
                const auto up = idla::theory::q_upper_strict(alpha, delta, th_c);
                j["args"] = {{"alpha", alpha}, {"delta", delta}, {"c", th_c}};
                j["value"] = up.bound;
                j["dominates_on_grid"] = up.dominates;
            } else if (fn == "growth") {
                const auto gc = idla::theory::growth_constants(alpha);
                j["args"] = {{"alpha", alpha}};
                j["value"] = {{"c_alpha", gc.c_alpha},
                              {"C_alpha_prime", gc.C_prime},
                              {"C_alpha_double_prime", gc.C_double_prime},
                              {"c_alpha_prime", gc.c_prime}};
            } else if (fn == "beta") {
                j["args"] = {{"alpha", alpha}};
                j["value"] = idla::theory::symmetric_beta_integral(alpha);
                j["gamma_identity"] = std::exp(2.0 * std::lgamma(alpha / 2.0) - std::lgamma(alpha));
            } else {
                throw std::invalid_argument("unknown theory function: " + fn);
            }
            std::cout << j.dump(2) << '\n';
        } else if (acc_cmd->parsed()) {
            const auto results = idla::accept::run_all(acc_seed, threads);
            pass = idla::accept::report(std::cout, results);
        }
        return pass ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
