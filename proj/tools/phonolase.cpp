#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "phonolase/scan.hpp"

namespace pl = phonolase;

namespace {

struct Options {
    std::string params;
    std::vector<std::string> sweeps;
    std::string out;
    std::vector<std::string> overrides;
    std::string branch = "continuation";
    std::string unstable = "na";
    std::string eps3 = "corrected";
    double phase = 0.0;
    double tolerance = 1e-10;
    std::optional<long> threads;
    std::string meta;
};

void add_common(CLI::App* sub, Options& o, bool needs_sweep) {
    sub->add_option("--params", o.params, "parameter file (key = value lines)")->required();
    auto* sw = sub->add_option("--sweep", o.sweeps, "key:min:max:n (repeat for u1 and u2 grids)");
    if (needs_sweep) sw->required();
    sub->add_option("--out", o.out, "output path")->required();
    sub->add_option("--override", o.overrides, "key=value applied after the file");
    sub->add_option("--branch", o.branch, "continuation or all")->check(CLI::IsMember({"continuation", "all"}));
    sub->add_option("--unstable", o.unstable, "na or formal: g2/spectra on unstable branches")
        ->check(CLI::IsMember({"na", "formal"}));
    sub->add_option("--eps3", o.eps3, "corrected or uncorrected")->check(CLI::IsMember({"corrected", "uncorrected"}));
    sub->add_option("--phase", o.phase, "drive phase in rad");
    sub->add_option("--tol", o.tolerance, "integrator tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--threads", o.threads, "worker threads (default: PHONOLASE_THREADS or all cores)");
}

pl::SweepSpec build_spec(const std::string& sub, const Options& o) {
    pl::SweepSpec s;
    s.subcommand = sub;
    std::vector<pl::KeyValue> ov;
    for (const auto& t : o.overrides) ov.push_back(pl::parse_override(t));
    s.params = pl::apply_overrides(pl::read_key_value_file(o.params), ov);
    for (const auto& t : o.sweeps) s.sweeps.push_back(pl::parse_sweep(t));
    s.output_path = o.out;
    s.branch = pl::parse_branch_policy(o.branch);
    s.unstable = pl::parse_unstable_policy(o.unstable);
    s.eps3 = pl::parse_eps3_form(o.eps3);
    s.phase = o.phase;
    s.tolerance = o.tolerance;
    s.threads = pl::resolve_threads(o.threads);
    return s;
}

int report(const pl::RunResult& r, const std::string& out) {
    if (r.status == 2)
        std::cerr << "phonolase: partial result, " << r.gaps.size() << " grid point(s) without a value; see "
                  << pl::metadata_path(out) << '\n';
    return r.status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Phonon laser steady states, stability, gain, potentials and coherence"};
    app.set_version_flag("--version", pl::kVersion);
    app.require_subcommand(1);

    Options o;
    std::vector<CLI::App*> subs;
    for (const auto& name : pl::subcommands()) {
        auto* sub = app.add_subcommand(name);
        add_common(sub, o, name != "coefficients");
        subs.push_back(sub);
    }
    auto* replay = app.add_subcommand("replay", "rerun from a sidecar metadata file");
    replay->add_option("--meta", o.meta, "metadata file")->required();
    replay->add_option("--out", o.out, "output path (default: the recorded one)");
    replay->add_option("--threads", o.threads, "worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (replay->parsed()) {
            auto spec = pl::spec_from_metadata(o.meta);
            if (!o.out.empty()) spec.output_path = o.out;
            spec.threads = pl::resolve_threads(o.threads);
            return report(pl::run(spec), spec.output_path);
        }
        for (auto* sub : subs)
            if (sub->parsed()) {
                const auto spec = build_spec(sub->get_name(), o);
                return report(pl::run(spec), spec.output_path);
            }
    } catch (const pl::ConfigError& e) {
        std::cerr << "phonolase: config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "phonolase: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
