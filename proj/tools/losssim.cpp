// losssim: simulate a finite packet buffer and compare its loss statistics
// with the drift-diffusion theory.
//
// Exit codes: 0 success (and, for compare, every row passes), 1 runtime or
// comparison failure, 2 invalid input. Errors are one line on stderr:
//   error: kind=<config|invalid-argument|convergence|runtime|usage> field=<json pointer> message="..."

#include "losssim/harness/compare.hpp"
#include "losssim/harness/config.hpp"
#include "losssim/harness/report.hpp"
#include "losssim/loss_stats.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

using namespace losssim;
using namespace losssim::harness;

namespace
{

struct Failure
{
    int code;
    std::string kind;
    std::string field;
    std::string message;
};

[[noreturn]] void fail(int code, std::string kind, std::string message, std::string field = "")
{
    throw Failure{code, std::move(kind), std::move(field), std::move(message)};
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s)
    {
        if (c == '"' || c == '\\')
        {
            out += '\\';
        }
        out += c == '\n' ? ' ' : c;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Configuration loading shared by simulate, compare and correlate
// ---------------------------------------------------------------------------

struct ConfigArgs
{
    std::string path;
    std::vector<std::string> set;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;

    void add_to(CLI::App* cmd)
    {
        cmd->add_option("config", path, "experiment configuration (JSON)")->required();
        cmd->add_option("--set", set, "override: /json/pointer=value (value parsed as JSON)");
        cmd->add_option("--output-dir", output_dir, "output directory");
        cmd->add_option("--seed", seed, "base seed");
    }

    ExperimentConfig load() const
    {
        json doc = read_document(path);
        apply_environment(doc);
        for (const std::string& s : set)
        {
            const auto eq = s.find('=');
            if (eq == std::string::npos || s.empty() || s[0] != '/')
            {
                fail(2, "usage", "--set expects /json/pointer=value, got '" + s + "'");
            }
            const std::string ptr = s.substr(0, eq);
            const std::string text = s.substr(eq + 1);
            json value = json::parse(text, nullptr, false);
            if (value.is_discarded())
            {
                value = text;
            }
            set_pointer(doc, ptr, value);
        }
        if (output_dir)
        {
            set_pointer(doc, "/output_dir", *output_dir);
        }
        if (seed)
        {
            set_pointer(doc, "/run/base_seed", *seed);
        }
        return parse_config(doc);
    }
};

void print_warnings(const ExperimentConfig& c)
{
    for (const auto& w : c.traffic.validate())
    {
        std::cerr << "warning: " << w << '\n';
    }
    try
    {
        const auto diag = check_critical_regime(derive_fp_params(c.traffic));
        if (!diag.ok)
        {
            std::cerr << "warning: |r_in eta0 - 1| = " << diag.distance
                      << " is outside the near-critical regime of the diffusion approximation\n";
        }
    }
    catch (const InvalidArgument&)
    {
    }
}

void write_config_copy(const std::filesystem::path& dir, const ExperimentConfig& c)
{
    auto out = open_output(dir / "config.json");
    out << c.document.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const ConfigArgs& args, std::uint64_t stream)
{
    const ExperimentConfig c = args.load();
    print_warnings(c);
    const RunOutput out = run(c.run_config(stream));
    const std::filesystem::path dir = c.output_dir;
    {
        auto f = open_output(dir / "summary.csv");
        write_summary(f, out.summary, c);
    }
    {
        auto f = open_output(dir / "windows.csv");
        write_windows(f, out.windows);
    }
    {
        auto f = open_output(dir / "occupancy.csv");
        write_occupancy(f, out.summary);
    }
    write_config_copy(dir, c);
    std::cout << "wrote " << (dir / "summary.csv").string() << ", windows.csv, occupancy.csv (" << out.windows.size()
              << " windows, conservation residual " << out.summary.conservation_residual << ")\n";
    return out.summary.conservation_residual == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// compare / correlate
// ---------------------------------------------------------------------------

int cmd_compare(const ConfigArgs& args)
{
    const ExperimentConfig c = args.load();
    if (!c.compare || c.compare->empty())
    {
        fail(2, "config", "comparison plan is empty", "/compare");
    }
    print_warnings(c);
    const ComparisonReport report = compare(c);
    const std::filesystem::path dir = c.output_dir;
    {
        auto f = open_output(dir / "report.csv");
        write_report_csv(f, report);
    }
    {
        auto f = open_output(dir / "report.txt");
        write_report_text(f, report);
    }
    write_config_copy(dir, c);
    write_report_text(std::cout, report);
    return report.all_pass() ? 0 : 1;
}

int cmd_correlate(const ConfigArgs& args)
{
    const ExperimentConfig c = args.load();
    print_warnings(c);
    const CorrelationSweep sweep = correlate(c);
    const std::filesystem::path dir = c.output_dir;
    {
        auto f = open_output(dir / "correlation.csv");
        write_correlation_csv(f, sweep);
    }
    write_config_copy(dir, c);
    write_correlation_csv(std::cout, sweep);
    return 0;
}

// ---------------------------------------------------------------------------
// analytic
// ---------------------------------------------------------------------------

struct AnalyticArgs
{
    std::string statistic;
    std::map<std::string, double> values;
    std::string which = "full";
    std::string method;
    int k = 1;
    bool list = false;

    double get(const std::string& name) const
    {
        auto it = values.find(name);
        if (it == values.end())
        {
            fail(2, "usage", "statistic '" + statistic + "' needs --" + name, name);
        }
        return it->second;
    }
};

struct AnalyticResult
{
    AnalyticResult(double value_, double error_, std::string method_)
        : value(value_), error(error_), method(std::move(method_))
    {
    }

    double value = 0.0;
    double error = 0.0;
    std::string method;
    std::optional<double> imag;
    std::optional<Atom> atom;
};

using Evaluator = std::function<AnalyticResult(const AnalyticArgs&)>;

MomentMethod moment_method(const std::string& m)
{
    if (m.empty() || m == "convolution")
    {
        return MomentMethod::convolution;
    }
    if (m == "laplace-inversion")
    {
        return MomentMethod::laplace_inversion;
    }
    if (m == "asymptotic")
    {
        return MomentMethod::asymptotic;
    }
    fail(2, "usage", "moment method must be convolution, laplace-inversion or asymptotic", "method");
}

PdfMethod pdf_method(const std::string& m)
{
    if (m.empty() || m == "inversion")
    {
        return PdfMethod::inversion;
    }
    if (m == "asymptotic")
    {
        return PdfMethod::asymptotic;
    }
    fail(2, "usage", "method must be inversion or asymptotic", "method");
}

CorrelatorMethod correlator_method(const std::string& m)
{
    if (m.empty() || m == "quadrature")
    {
        return CorrelatorMethod::quadrature;
    }
    if (m == "asymptotic")
    {
        return CorrelatorMethod::asymptotic;
    }
    fail(2, "usage", "method must be quadrature or asymptotic", "method");
}

const std::map<std::string, Evaluator>& registry()
{
    static const std::map<std::string, Evaluator> r = {
        {"stationary-density",
         [](const AnalyticArgs& a) {
             return AnalyticResult{stationary_density(a.get("ell"), a.get("v")), 0.0, "closed-form"};
         }},
        {"stationary-cdf",
         [](const AnalyticArgs& a) {
             return AnalyticResult{stationary_cdf(a.get("ell"), a.get("v")), 0.0, "closed-form"};
         }},
        {"propagator",
         [](const AnalyticArgs& a) {
             const double tau = a.get("tau");
             const PropagatorParams p{a.get("v")};
             const bool images = tau < p.tau_crossover;
             return AnalyticResult{propagator(a.get("ell-to"), tau, a.get("ell-from"), p), 0.0,
                                   images ? "images" : "eigenseries"};
         }},
        {"probability-current",
         [](const AnalyticArgs& a) {
             return AnalyticResult{
                 probability_current(a.get("ell-to"), a.get("tau"), a.get("ell-from"), a.get("v"), a.get("sigma2")),
                 0.0, "series"};
         }},
        {"boundary-return",
         [](const AnalyticArgs& a) {
             Boundary b = Boundary::full;
             if (a.which == "empty")
             {
                 b = Boundary::empty;
             }
             else if (a.which != "full")
             {
                 fail(2, "usage", "--which must be full or empty", "which");
             }
             const double im = a.values.count("eps-im") ? a.values.at("eps-im") : 0.0;
             const complex w = boundary_return(b, complex(a.get("eps"), im), a.get("v"));
             AnalyticResult out{w.real(), 0.0, "closed-form"};
             out.imag = w.imag();
             return out;
         }},
        {"half-space-propagator",
         [](const AnalyticArgs& a) {
             return AnalyticResult{half_space_propagator(a.get("ell-to"), a.get("t"), a.get("ell-from"), a.get("a"),
                                                         a.get("sigma2")),
                                   0.0, "closed-form"};
         }},
        {"loss-rate",
         [](const AnalyticArgs& a) { return AnalyticResult{loss_rate_density(a.get("sigma2")), 0.0, "closed-form"}; }},
        {"mean-loss",
         [](const AnalyticArgs& a) { return AnalyticResult{mean_loss(a.get("tau"), a.get("v")), 0.0, "closed-form"}; }},
        {"mean-idle",
         [](const AnalyticArgs& a) { return AnalyticResult{mean_idle(a.get("tau"), a.get("v")), 0.0, "closed-form"}; }},
        {"loss-moment",
         [](const AnalyticArgs& a) {
             const auto e = loss_moment({a.k, a.get("tau"), a.get("v"), moment_method(a.method)});
             return AnalyticResult{e.value, e.error, a.method.empty() ? "convolution" : a.method};
         }},
        {"idle-moment",
         [](const AnalyticArgs& a) {
             const auto e = idleness_dual(LossMomentRequest{a.k, a.get("tau"), a.get("v"), moment_method(a.method)});
             return AnalyticResult{e.value, e.error, a.method.empty() ? "convolution" : a.method};
         }},
        {"conditional-loss-moment",
         [](const AnalyticArgs& a) {
             const auto e = conditional_loss_moment(a.k, a.get("tau"), a.get("ell"), a.get("v"));
             return AnalyticResult{e.value, e.error, "convolution"};
         }},
        {"loss-pdf",
         [](const AnalyticArgs& a) {
             const auto r = loss_pdf({a.get("x"), a.get("tau"), a.get("v")}, pdf_method(a.method));
             AnalyticResult out{r.density, r.error, a.method.empty() ? "inversion" : a.method};
             out.atom = r.atom;
             return out;
         }},
        {"idle-pdf",
         [](const AnalyticArgs& a) {
             const auto r = idleness_dual(LossPdfPoint{a.get("x"), a.get("tau"), a.get("v")}, pdf_method(a.method));
             AnalyticResult out{r.density, r.error, a.method.empty() ? "inversion" : a.method};
             out.atom = r.atom;
             return out;
         }},
        {"conditional-loss-pdf",
         [](const AnalyticArgs& a) {
             const auto r = conditional_loss_pdf({a.get("x"), a.get("tau"), a.get("v")}, pdf_method(a.method));
             AnalyticResult out{r.density, r.error, a.method.empty() ? "inversion" : a.method};
             out.atom = r.atom;
             return out;
         }},
        {"prob-any-loss",
         [](const AnalyticArgs& a) {
             const auto m = a.method == "asymptotic" ? ProbabilityMethod::asymptotic : ProbabilityMethod::inversion;
             if (!a.method.empty() && a.method != "asymptotic" && a.method != "inversion")
             {
                 fail(2, "usage", "method must be inversion or asymptotic", "method");
             }
             const auto e = prob_any_loss(a.get("tau"), a.get("v"), m);
             return AnalyticResult{e.value, e.error, a.method.empty() ? "inversion" : a.method};
         }},
        {"variance-bracket",
         [](const AnalyticArgs& a) { return AnalyticResult{variance_bracket(a.get("v")), 0.0, "closed-form"}; }},
        {"loss-variance",
         [](const AnalyticArgs& a) {
             return AnalyticResult{loss_variance_longtime(a.get("tau"), a.get("v")), 0.0, "long-time"};
         }},
        {"idle-variance",
         [](const AnalyticArgs& a) {
             return AnalyticResult{idle_variance_longtime(a.get("tau"), a.get("v")), 0.0, "long-time"};
         }},
        {"correlator",
         [](const AnalyticArgs& a) {
             const auto r = loss_correlator({a.get("t1"), a.get("t2"), a.get("T"), a.get("sigma2"), a.get("v")},
                                            correlator_method(a.method));
             return AnalyticResult{r.value, std::max(r.error, r.bound),
                                   std::string(a.method.empty() ? "quadrature" : a.method) + "/" + to_string(r.regime)};
         }},
        {"idle-correlator",
         [](const AnalyticArgs& a) {
             const auto r = idleness_dual(CorrelatorRequest{a.get("t1"), a.get("t2"), a.get("T"), a.get("sigma2"),
                                                            a.get("v")},
                                          correlator_method(a.method));
             return AnalyticResult{r.value, std::max(r.error, r.bound),
                                   std::string(a.method.empty() ? "quadrature" : a.method) + "/" + to_string(r.regime)};
         }},
    };
    return r;
}

int cmd_analytic(const AnalyticArgs& a)
{
    if (a.list || a.statistic.empty())
    {
        for (const auto& [name, f] : registry())
        {
            std::cout << name << '\n';
        }
        return 0;
    }
    const auto it = registry().find(a.statistic);
    if (it == registry().end())
    {
        fail(2, "usage", "unknown statistic '" + a.statistic + "' (see 'losssim analytic --list')", "statistic");
    }
    const AnalyticResult r = it->second(a);
    std::cout << "statistic=" << a.statistic << '\n';
    std::cout << "value=" << num(r.value) << '\n';
    if (r.imag)
    {
        std::cout << "imag=" << num(*r.imag) << '\n';
    }
    if (r.atom)
    {
        std::cout << "atom_location=" << num(r.atom->location) << '\n';
        std::cout << "atom_mass=" << num(r.atom->mass) << '\n';
    }
    std::cout << "error=" << num(r.error) << '\n';
    std::cout << "method=" << r.method << '\n';
    return 0;
}

int cmd_version()
{
    std::cout << "losssim " << kVersion << '\n';
    std::cout << "csv_schema " << kCsvSchemaVersion << '\n';
    std::cout << "generator " << kGeneratorName << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Packet loss in a finite buffer: simulation and drift-diffusion theory"};
    app.require_subcommand(1);

    ConfigArgs sim_args, cmp_args, cor_args;
    std::uint64_t stream = 0;
    auto* sim = app.add_subcommand("simulate", "run one stream and write summary.csv, windows.csv, occupancy.csv");
    sim_args.add_to(sim);
    sim->add_option("--stream", stream, "substream of the base seed");

    auto* cmp = app.add_subcommand("compare", "run the ensemble and score the comparison plan");
    cmp_args.add_to(cmp);

    auto* cor = app.add_subcommand("correlate", "loss covariance across a lag grid");
    cor_args.add_to(cor);

    AnalyticArgs an;
    auto* ana = app.add_subcommand("analytic", "evaluate one analytic statistic");
    ana->add_option("statistic", an.statistic, "statistic name");
    ana->add_flag("--list", an.list, "list statistics");
    ana->add_option("--which", an.which, "boundary: full or empty");
    ana->add_option("--method", an.method, "evaluation method");
    ana->add_option("--k", an.k, "moment order");
    static const char* numeric[] = {"v", "tau", "ell", "ell-to", "ell-from", "eps", "eps-im", "x",
                                    "t", "t1", "t2", "T", "sigma2", "a"};
    for (const char* name : numeric)
    {
        ana->add_option_function<double>(std::string("--") + name, [&an, name](double x) { an.values[name] = x; });
    }

    app.add_subcommand("version", "print version information");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::Success& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        std::cerr << "error: kind=usage field= message=\"" << escape(e.what()) << "\"\n";
        return 2;
    }

    try
    {
        if (*sim)
        {
            return cmd_simulate(sim_args, stream);
        }
        if (*cmp)
        {
            return cmd_compare(cmp_args);
        }
        if (*cor)
        {
            return cmd_correlate(cor_args);
        }
        if (*ana)
        {
            return cmd_analytic(an);
        }
        return cmd_version();
    }
    catch (const Failure& f)
    {
        std::cerr << "error: kind=" << f.kind << " field=" << f.field << " message=\"" << escape(f.message) << "\"\n";
        return f.code;
    }
    catch (const ConfigError& e)
    {
        std::cerr << "error: kind=config field=" << e.field() << " message=\"" << escape(e.what()) << "\"\n";
        return 2;
    }
    catch (const InvalidArgument& e)
    {
        std::cerr << "error: kind=invalid-argument field= message=\"" << escape(e.what()) << "\"\n";
        return 2;
    }
    catch (const ConvergenceFailure& e)
    {
        std::cerr << "error: kind=convergence field= message=\"" << escape(e.what()) << "\"\n";
        return 1;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: kind=runtime field= message=\"" << escape(e.what()) << "\"\n";
        return 1;
    }
}
