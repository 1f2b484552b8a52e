#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "phonolase/scan.hpp"
#include "support.hpp"

using namespace phonolase;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

SweepSpec spec_for(const std::string& sub, const std::string& file, std::vector<std::string> sweeps) {
    SweepSpec s;
    s.subcommand = sub;
    s.params = read_key_value_file(testsupport::params_path(file));
    for (const auto& t : sweeps) s.sweeps.push_back(parse_sweep(t));
    return s;
}

std::string table(const SweepSpec& s) {
    std::ostringstream os;
    run_to_stream(s, os);
    return os.str();
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

fs::path scratch_dir() {
    const auto d = fs::temp_directory_path() / ("phonolase_scan_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
}

int run_cli(const std::string& args, const fs::path& err = {}) {
    std::string cmd = std::string(PHONOLASE_CLI) + " " + args;
    cmd += err.empty() ? " 2>/dev/null" : " 2>" + err.string();
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(SweepArgument, ParsesAndValidates) {
    const auto a = parse_sweep("omega_drive_hz:0:40e6:400");
    EXPECT_EQ(a.key, "omega_drive_hz");
    EXPECT_EQ(a.max, 40e6);
    EXPECT_EQ(a.n, 400u);
    EXPECT_EQ(a.at(399), 40e6);
    EXPECT_THROW(parse_sweep("omega_drive_hz:0:40e6"), ConfigError);
    EXPECT_THROW(parse_sweep("x:1:1:10"), ConfigError);
    EXPECT_THROW(parse_sweep("x:0:1:1"), ConfigError);
    EXPECT_THROW(parse_sweep("x:0:1:2.5"), ConfigError);
}

TEST(Csv, SeventeenDigitLowercaseScientific) {
    EXPECT_EQ(fmt17(1.0), "1.0000000000000000e+00");
    EXPECT_EQ(fmt17(-0.25), "-2.5000000000000000e-01");
    EXPECT_EQ(fmt17(-2.5e-7), "-2.4999999999999999e-07");
    EXPECT_EQ(fmt17(std::nan("")), "nan");
    testsupport::Gen gen(91);
    for (int i = 0; i < 1000; ++i) {
        const double v = gen.uniform(-1, 1) * std::pow(10.0, gen.integer(-300, 300));
        EXPECT_EQ(std::strtod(fmt17(v).c_str(), nullptr), v);
    }
}

TEST(Overrides, ReplaceOrAppend) {
    const auto kvs = apply_overrides(parse_key_values_text("a_hz = 1\nb_hz = 2\n"), {{"b_hz", 5, 0}, {"c_hz", 7, 0}});
    ASSERT_EQ(kvs.size(), 3u);
    EXPECT_EQ(kvs[1].value, 5.0);
    EXPECT_EQ(kvs[2].key, "c_hz");
}

TEST(Threads, FlagEnvironmentAndDefault) {
    EXPECT_EQ(resolve_threads(3L), 3u);
    EXPECT_THROW(resolve_threads(0L), ConfigError);
    ::setenv("PHONOLASE_THREADS", "5", 1);
    EXPECT_EQ(resolve_threads(std::nullopt), 5u);
    ::setenv("PHONOLASE_THREADS", "many", 1);
    EXPECT_THROW(resolve_threads(std::nullopt), ConfigError);
    ::unsetenv("PHONOLASE_THREADS");
    EXPECT_GE(resolve_threads(std::nullopt), 1u);
}

TEST(Run, HeadersPerSubcommand) {
    EXPECT_EQ(first_line(table(spec_for("steady", "baseline.txt", {"omega_drive_hz:0:1e9:3"}))),
              "omega_drive_hz,branch_index,re_a1,im_a1,re_a2,im_a2,re_b0,im_b0,abs_b0,residual,stable");
    EXPECT_EQ(first_line(table(spec_for("stability", "baseline.txt", {"omega_drive_hz:0:1e9:3"}))),
              "omega_drive_hz,max_re_hz,stable,re_lambda1_hz,im_lambda1_hz,re_lambda2_hz,im_lambda2_hz,re_lambda3_hz,"
              "im_lambda3_hz,re_lambda4_hz,im_lambda4_hz,re_lambda5_hz,im_lambda5_hz,re_lambda6_hz,im_lambda6_hz");
    EXPECT_EQ(first_line(table(spec_for("gain", "baseline.txt", {"omega_drive_hz:0:1e9:3"}))),
              "omega_drive_hz,alpha_prime_hz,gprime_hz,g_hz,threshold_flag");
    EXPECT_EQ(first_line(table(spec_for("g2", "baseline.txt", {"omega_drive_hz:0:1e9:3"}))),
              "omega_drive_hz,g2_zero,y_nb,re_y_bb,im_y_bb,b0_abs2");
    EXPECT_EQ(first_line(table(spec_for("spectra", "baseline.txt", {"omega_hz:-50e6:50e6:5"}))),
              "omega_hz,re_gamma_bb,im_gamma_bb,gamma_nb");
    EXPECT_EQ(first_line(table(spec_for("integrate", "baseline.txt", {"t:0:1e-7:3"}))),
              "t,re_a1,im_a1,re_a2,im_a2,re_b,im_b");
    EXPECT_EQ(first_line(table(spec_for("potential", "planar_a.txt", {"u1:-1:1:3"}))), "u1,u2,V");
    EXPECT_EQ(first_line(table(spec_for("potential1d", "line_a.txt", {"u1:-1:1:3"}))), "u1,V");
    EXPECT_EQ(first_line(table(spec_for("flow", "planar_a.txt", {"u1:-1:1:3"}))),
              "u1,u2,du1,du2,du1_reduced,du2_reduced");
}

TEST(Run, RowCounts) {
    const auto t = table(spec_for("potential", "planar_a.txt", {"u1:-1:1:4", "u2:-2:2:3"}));
    EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 1 + 12);
}

TEST(Run, NonDriveSweepAddsLeadingColumn) {
    const auto t = table(spec_for("gain", "baseline.txt", {"delta_hz:0:11.7e6:3"}));
    EXPECT_EQ(first_line(t), "delta_hz,omega_drive_hz,alpha_prime_hz,gprime_hz,g_hz,threshold_flag");
}

TEST(Run, UnstablePointsAreNotApplicable) {
    const auto t = table(spec_for("g2", "baseline.txt", {"omega_drive_hz:7.9e9:8.1e9:2"}));
    std::istringstream in(t);
    std::string header, a, b;
    std::getline(in, header);
    std::getline(in, a);
    std::getline(in, b);
    EXPECT_EQ(a.find("nan"), std::string::npos);
    EXPECT_NE(b.find("nan"), std::string::npos);
    auto formal = spec_for("g2", "baseline.txt", {"omega_drive_hz:7.9e9:8.1e9:2"});
    formal.unstable = UnstablePolicy::formal;
    EXPECT_EQ(table(formal).find("nan"), std::string::npos);
}

TEST(Run, AllBranchesGivesOneRowPerFixedPoint) {
    auto s = spec_for("steady", "baseline.txt", {"omega_drive_hz:1.06e12:1.08e12:3"});
    s.branch = BranchPolicy::all;
    const auto t = table(s);
    EXPECT_GE(std::count(t.begin(), t.end(), '\n'), 1 + 3 * 3);
}

TEST(Run, CoefficientDumpReloads) {
    const auto text = table(spec_for("coefficients", "offset1mhz_half.txt", {}));
    const auto kvs = parse_key_values_text(text);
    EXPECT_TRUE(is_coefficient_file(kvs));
    const auto c = coefficients_from(kvs);
    SystemParams p = system_params_from(read_key_value_file(testsupport::params_path("offset1mhz_half.txt")));
    EXPECT_NEAR(c.alpha_prime, cubic_coefficients(p).alpha_prime, 1e-9 * std::abs(c.alpha_prime) + 1e-12);
}

TEST(Run, UnknownSubcommandAndBadAxes) {
    EXPECT_THROW(table(spec_for("nope", "baseline.txt", {"omega_drive_hz:0:1:2"})), ConfigError);
    EXPECT_THROW(table(spec_for("steady", "baseline.txt", {"u1:0:1:2"})), ConfigError);
    EXPECT_THROW(table(spec_for("potential", "planar_a.txt", {"chi_hz:0:1:2"})), ConfigError);
    EXPECT_THROW(table(spec_for("steady", "baseline.txt", {"omega_drive_hz:-1:1:2"})), ConfigError);
}

TEST(Run, ThreadCountDoesNotChangeOutput) {
    for (auto s : {spec_for("g2", "baseline.txt", {"omega_drive_hz:0:8e9:17"}),
                   spec_for("bistability", "baseline.txt", {"omega_drive_hz:1.0e12:1.1e12:9"}),
                   spec_for("stability", "baseline.txt", {"delta_hz:-10e6:10e6:9"})}) {
        s.threads = 1;
        const auto a = table(s);
        s.threads = 6;
        EXPECT_EQ(a, table(s)) << s.subcommand;
    }
}

TEST(Run, SidecarReplaysTheRun) {
    const auto dir = scratch_dir();
    auto s = spec_for("g2", "baseline.txt", {"omega_drive_hz:0:6e9:7"});
    s.params = apply_overrides(s.params, {{"temperature_k", 2e-3, 0}});
    s.phase = 0.3;
    s.output_path = (dir / "g2.csv").string();
    EXPECT_EQ(run(s).status, 0);
    auto r = spec_from_metadata(metadata_path(s.output_path));
    r.output_path = (dir / "g2_replay.csv").string();
    r.threads = 3;
    run(r);
    EXPECT_EQ(slurp(dir / "g2.csv"), slurp(dir / "g2_replay.csv"));
    fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch_dir();
    const std::string base = testsupport::params_path("baseline.txt");
    EXPECT_EQ(run_cli("steady --params " + base + " --sweep omega_drive_hz:0:1e9:3 --out " + (dir / "a.csv").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "a.csv.meta.json"));
    // spectrum of an unstable followed branch is not applicable: partial
    EXPECT_EQ(run_cli("spectra --params " + base + " --override omega_drive_hz=1e10 --sweep omega_hz:-50e6:50e6:5 --out " +
                      (dir / "b.csv").string()),
              2);
    EXPECT_EQ(run_cli("steady --params " + base + " --override nonsense=1 --sweep omega_drive_hz:0:1:3 --out " +
                      (dir / "c.csv").string()),
              1);
    EXPECT_EQ(run_cli("steady --params /nonexistent --sweep omega_drive_hz:0:1:3 --out " + (dir / "d.csv").string()), 1);
    EXPECT_EQ(run_cli("frobnicate"), 1);
    fs::remove_all(dir);
}

TEST(Cli, ConfigErrorReportsLine) {
    const auto dir = scratch_dir();
    {
        std::ofstream f(dir / "bad.txt");
        f << "omega_m_hz = 23.4e6\nchi_hz 1570\n";
    }
    EXPECT_EQ(run_cli("steady --params " + (dir / "bad.txt").string() + " --sweep omega_drive_hz:0:1:3 --out " +
                          (dir / "e.csv").string(),
                      dir / "err.txt"),
              1);
    EXPECT_NE(slurp(dir / "err.txt").find("line 2"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Cli, ThreadEnvironmentFallbackIsDeterministic) {
    const auto dir = scratch_dir();
    const std::string base = testsupport::params_path("baseline.txt");
    const std::string args = "g2 --params " + base + " --sweep omega_drive_hz:0:7e9:8 --out ";
    ::setenv("PHONOLASE_THREADS", "1", 1);
    ASSERT_EQ(run_cli(args + (dir / "one.csv").string()), 0);
    ::setenv("PHONOLASE_THREADS", "4", 1);
    ASSERT_EQ(run_cli(args + (dir / "four.csv").string()), 0);
    ::unsetenv("PHONOLASE_THREADS");
    EXPECT_EQ(slurp(dir / "one.csv"), slurp(dir / "four.csv"));
    fs::remove_all(dir);
}
