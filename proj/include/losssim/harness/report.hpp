#pragma once

// CSV and text output. Floating-point values are written with 17 significant
// digits so every double round-trips exactly.

#include "losssim/harness/compare.hpp"
#include "losssim/harness/config.hpp"
#include "losssim/simulator.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

namespace losssim::harness
{

inline std::string num(double x)
{
    if (std::isnan(x))
    {
        return "nan";
    }
    if (std::isinf(x))
    {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string quote(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
    {
        return s;
    }
    std::string out = "\"";
    for (char c : s)
    {
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    }
    return out + "\"";
}

inline std::ofstream open_output(const std::filesystem::path& path)
{
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
    {
        throw std::runtime_error("cannot write " + path.string());
    }
    return out;
}

/// quantity,value,unit rows describing one run.
inline void write_summary(std::ostream& out, const RunSummary& s, const ExperimentConfig& c)
{
    const FpParams* derived = nullptr;
    FpParams p;
    try
    {
        p = derive_fp_params(c.traffic);
        derived = &p;
    }
    catch (const InvalidArgument&)
    {
    }
    out << "quantity,value,unit\n";
    auto row = [&](const std::string& q, const std::string& v, const char* unit) {
        out << q << ',' << quote(v) << ',' << unit << '\n';
    };
    row("schema_version", std::to_string(kCsvSchemaVersion), "");
    row("losssim_version", kVersion, "");
    row("config_hash", hex(c.hash), "fnv1a64");
    row("generator", s.generator, "");
    row("seed", std::to_string(s.seed), "");
    row("stream_id", std::to_string(s.stream_id), "");
    row("warmup", num(s.warmup), "time");
    row("measured_time", num(s.elapsed_time), "time");
    row("window_length", num(c.window_length), "time");
    row("packets_arrived", std::to_string(s.packets_arrived), "packets");
    row("packets_dropped", std::to_string(s.packets_dropped), "packets");
    row("arrived_traffic", num(s.arrived_traffic), "buffer");
    row("lost_traffic", num(s.lost_traffic), "buffer");
    row("served_traffic", num(s.served_traffic), "buffer");
    row("idle_deficit", num(s.idle_deficit), "buffer");
    row("initial_occupancy", num(s.initial_occupancy), "buffer");
    row("final_occupancy", num(s.final_occupancy), "buffer");
    row("conservation_residual", std::to_string(s.conservation_residual), "quanta");
    row("loss_rate", num(s.lost_traffic / s.elapsed_time), "buffer/time");
    if (derived)
    {
        row("derived_a", num(p.a), "buffer/time");
        row("derived_sigma2", num(p.sigma2), "buffer^2/time");
        row("derived_v", num(p.v), "");
    }
    for (const auto source : {IncrementSource::free, IncrementSource::banded})
    {
        const char* tag = source == IncrementSource::free ? "free" : "banded";
        try
        {
            const FpEstimate e = estimate_fp_params_detailed(s, source);
            row(std::string("estimated_a_") + tag, num(e.params.a), "buffer/time");
            row(std::string("estimated_a_se_") + tag, num(e.a_se), "buffer/time");
            row(std::string("estimated_sigma2_") + tag, num(e.params.sigma2), "buffer^2/time");
            row(std::string("estimated_v_") + tag, num(e.params.v), "");
        }
        catch (const InvalidArgument&)
        {
            // too few increments in this run
        }
    }
}

inline void write_windows(std::ostream& out, const WindowSeries& w)
{
    out << "window_index,t_start,t_end,lost_traffic,idle_deficit,packets_arrived,packets_dropped,end_occupancy\n";
    std::string line;
    for (std::size_t i = 0; i < w.size(); ++i)
    {
        const WindowRecord& r = w.records()[i];
        line.clear();
        line += std::to_string(i);
        line += ',' + num(w.t_start(i)) + ',' + num(w.t_end(i)) + ',' + num(w.lost_traffic(i)) + ',' +
                num(w.idle_deficit(i)) + ',' + std::to_string(r.arrived) + ',' + std::to_string(r.dropped) + ',' +
                num(w.end_occupancy(i)) + '\n';
        out << line;
    }
}

inline void write_occupancy(std::ostream& out, const RunSummary& s)
{
    out << "bin,ell_low,ell_high,time_fraction\n";
    for (int b = 0; b < kHistogramBins; ++b)
    {
        out << b << ',' << num(static_cast<double>(b) / kHistogramBins) << ','
            << num(static_cast<double>(b + 1) / kHistogramBins) << ',' << num(s.occupancy_histogram[b]) << '\n';
    }
}

inline void write_report_csv(std::ostream& out, const ComparisonReport& r)
{
    const Provenance& p = r.provenance;
    out << "statistic,parameters,analytic,simulated,se,score_kind,score,tolerance,relative_error,"
           "relative_tolerance,pass,config_hash,base_seed,streams,parameter_source,v,sigma2,version\n";
    for (const auto& row : r.rows)
    {
        out << row.name << ',' << quote(row.parameters) << ',' << num(row.analytic) << ',' << num(row.simulated)
            << ',' << num(row.se) << ',' << to_string(row.tolerance.kind) << ',' << num(row.score) << ','
            << num(row.tolerance.value) << ',' << num(row.relative_error) << ','
            << (row.tolerance.relative ? num(*row.tolerance.relative) : std::string()) << ','
            << (row.pass ? "pass" : "fail") << ',' << hex(p.config_hash) << ',' << p.base_seed << ',' << p.streams
            << ',' << (p.source == ParameterSource::derived ? "derived" : "measured") << ',' << num(p.params.v)
            << ',' << num(p.params.sigma2) << ',' << p.version << '\n';
    }
}

inline void write_report_text(std::ostream& out, const ComparisonReport& r)
{
    const Provenance& p = r.provenance;
    out << "comparison report  config " << hex(p.config_hash) << "  seed " << p.base_seed << "  streams "
        << p.streams << "\n";
    out << "parameters (" << (p.source == ParameterSource::derived ? "derived" : "measured")
        << "): a=" << num(p.params.a) << " sigma2=" << num(p.params.sigma2) << " v=" << num(p.params.v) << "\n\n";
    for (const auto& row : r.rows)
    {
        char line[512];
        std::snprintf(line, sizeof line, "%-4s %-15s %-34s analytic %-12.6g simulated %-12.6g se %-10.3g %s %.3g (tol %.3g",
                      row.pass ? "PASS" : "FAIL", row.name.c_str(), row.parameters.c_str(), row.analytic,
                      row.simulated, row.se, to_string(row.tolerance.kind), row.score, row.tolerance.value);
        out << line;
        if (row.tolerance.relative)
        {
            std::snprintf(line, sizeof line, ", relative %.3g <= %.3g", row.relative_error, *row.tolerance.relative);
            out << line;
        }
        out << ")\n";
    }
    out << '\n' << (r.all_pass() ? "all rows pass" : "some rows fail") << '\n';
}

inline void write_correlation_csv(std::ostream& out, const CorrelationSweep& s)
{
    out << "T,separation_tau,regime,corr,se,ci_low,ci_high,analytic,asymptotic";
    if (s.slope)
    {
        out << ",slope,slope_se";
    }
    out << ",config_hash\n";
    for (const auto& row : s.rows)
    {
        out << num(row.T) << ',' << num(row.separation_tau) << ',' << to_string(row.regime) << ',' << num(row.corr)
            << ',' << num(row.se) << ',' << num(row.ci_low) << ',' << num(row.ci_high) << ',' << num(row.analytic)
            << ',' << (row.asymptotic ? num(*row.asymptotic) : std::string());
        if (s.slope)
        {
            out << ',' << num(s.slope->slope) << ',' << num(s.slope->se);
        }
        out << ',' << hex(s.provenance.config_hash) << '\n';
    }
}

} // namespace losssim::harness
