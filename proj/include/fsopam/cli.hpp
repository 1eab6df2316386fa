/*
   Copyright 2026 The fsopam Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

// Experiment files and the four CSV-producing commands behind the fsopam
// tool. Experiment files are line oriented:
//
//   # comment
//   [section]
//   key = value
//
// Every key is checked against a fixed schema before anything runs. Flag
// overrides are applied with ExperimentSpec::set and show up in the CSV
// comment header like file values. The thread count never appears in the
// output, so results are byte-identical for any --threads.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "fsopam/analytics.hpp"
#include "fsopam/channel.hpp"
#include "fsopam/simcore.hpp"

namespace fsopam::cli {

class config_error : public usage_error {
public:
    using usage_error::usage_error;
};

struct KeyInfo {
    std::string_view key;
    std::string_view fallback; // empty: no default
};

// Recognised keys and their defaults.
inline const std::vector<KeyInfo>& schema()
{
    static const std::vector<KeyInfo> keys = {
        {"system.order", "2"},
        {"system.data_rate_bps", "10e9"},
        {"system.responsivity", "1"},
        {"system.n0", "1.59e-22"},
        {"system.noise_psd_dbm_hz", ""},
        {"system.load_ohm", "50"},
        {"channel.turbulence", "weak"},
        {"channel.alpha", ""},
        {"channel.beta", ""},
        {"channel.pointing", "on"},
        {"channel.a0", "0.0198"},
        {"channel.gamma", "2.8071"},
        {"channel.normalize_mean", "true"},
        {"channel.coherence_length", "10000"},
        {"receiver.list", "dfb(12)"},
        {"receiver.pilots", "block"},
        {"receiver.genie_feedback", "false"},
        {"receiver.streams", "8"},
        {"sweep.power_dbm", ""},
        {"sweep.power_w", ""},
        {"sweep.start_dbm", ""},
        {"sweep.stop_dbm", ""},
        {"sweep.step_dbm", ""},
        {"run.seed", "1"},
        {"run.min_errors", "100"},
        {"run.max_bits", "1e8"},
        {"trace.symbols", "10000"},
        {"trace.a2_over_n0_db", ""},
        {"trace.power_dbm", ""},
        {"stats.samples", "1e6"},
        {"stats.ks_samples", "1e5"},
    };
    return keys;
}

inline bool known_key(std::string_view key)
{
    const auto& s = schema();
    return std::any_of(s.begin(), s.end(), [&](const KeyInfo& k) { return k.key == key; });
}

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

// Split on commas that are not inside parentheses.
inline std::vector<std::string> split_list(std::string_view s)
{
    std::vector<std::string> out;
    int depth = 0;
    std::string cur;
    for (char c : s) {
        if (c == '(')
            ++depth;
        if (c == ')')
            --depth;
        if (c == ',' && depth == 0) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty() || !out.empty())
        out.push_back(trim(cur));
    return out;
}

} // namespace detail

class ExperimentSpec {
public:
    struct Entry {
        std::string value;
        int line = 0; // 0: set by a flag
    };

    static ExperimentSpec parse(std::istream& in, std::string source = "<config>")
    {
        ExperimentSpec spec;
        spec.source_ = std::move(source);
        std::string section;
        std::string raw;
        int line_no = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            const auto hash = raw.find('#');
            const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
            if (line.empty())
                continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw config_error(spec.where(line_no) + ": malformed section header '" + line + "'");
                section = detail::lower(detail::trim(line.substr(1, line.size() - 2)));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw config_error(spec.where(line_no) + ": expected 'key = value', got '" + line + "'");
            const std::string name = detail::lower(detail::trim(line.substr(0, eq)));
            const std::string value = detail::trim(line.substr(eq + 1));
            if (section.empty())
                throw config_error(spec.where(line_no) + ": field '" + name + "' appears before any [section]");
            const std::string key = section + "." + name;
            if (!known_key(key))
                throw config_error(spec.where(line_no) + ": field '" + key + "': unknown key");
            if (spec.entries_.count(key))
                throw config_error(spec.where(line_no) + ": field '" + key + "': duplicate key (first set on line " +
                                   std::to_string(spec.entries_[key].line) + ")");
            spec.entries_[key] = {value, line_no};
        }
        return spec;
    }

    static ExperimentSpec load(const std::string& path)
    {
        std::ifstream in(path);
        if (!in)
            throw config_error(path + ": cannot open experiment file");
        return parse(in, path);
    }

    static ExperimentSpec from_string(const std::string& text, std::string source = "<config>")
    {
        std::istringstream in(text);
        return parse(in, std::move(source));
    }

    void set(const std::string& key, const std::string& value)
    {
        if (!known_key(key))
            throw config_error("flag override: field '" + key + "': unknown key");
        entries_[key] = {value, 0};
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    std::optional<std::string> raw(const std::string& key) const
    {
        if (auto it = entries_.find(key); it != entries_.end())
            return it->second.value;
        for (const auto& k : schema())
            if (k.key == key && !k.fallback.empty())
                return std::string(k.fallback);
        return std::nullopt;
    }

    std::string where(int line) const
    {
        return line > 0 ? source_ + ":" + std::to_string(line) : source_ + ":flag";
    }

    std::string where_key(const std::string& key) const
    {
        if (auto it = entries_.find(key); it != entries_.end())
            return where(it->second.line);
        return source_ + ":default";
    }

    [[noreturn]] void fail(const std::string& key, const std::string& message) const
    {
        throw config_error(where_key(key) + ": field '" + key + "': " + message);
    }

    std::string get_string(const std::string& key) const
    {
        auto v = raw(key);
        if (!v)
            fail(key, "required value missing");
        return *v;
    }

    double get_double(const std::string& key) const
    {
        const std::string s = get_string(key);
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
            fail(key, "expected a number, got '" + s + "'");
        return v;
    }

    // Counts accept scientific notation (1e6) but must be whole.
    std::uint64_t get_count(const std::string& key) const
    {
        const std::string s = get_string(key);
        std::uint64_t u = 0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), u);
        if (res.ec == std::errc() && res.ptr == s.data() + s.size())
            return u;
        const double v = get_double(key);
        if (v < 0.0 || v != std::floor(v) || v > 1.8e19)
            fail(key, "expected a non-negative whole number, got '" + s + "'");
        return static_cast<std::uint64_t>(v);
    }

    bool get_bool(const std::string& key) const
    {
        const std::string s = detail::lower(get_string(key));
        if (s == "true" || s == "on" || s == "yes" || s == "1")
            return true;
        if (s == "false" || s == "off" || s == "no" || s == "0")
            return false;
        fail(key, "expected a boolean (true/false/on/off), got '" + s + "'");
    }

    std::vector<double> get_doubles(const std::string& key) const
    {
        std::vector<double> out;
        for (const auto& item : detail::split_list(get_string(key))) {
            double v = 0.0;
            const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
            if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size())
                fail(key, "expected a comma-separated list of numbers, bad item '" + item + "'");
            out.push_back(v);
        }
        if (out.empty())
            fail(key, "empty list");
        return out;
    }

    // All resolved key/value pairs (explicit values and defaults), sorted.
    std::vector<std::pair<std::string, std::string>> resolved() const
    {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& k : schema()) {
            const std::string key(k.key);
            if (auto v = raw(key))
                out.emplace_back(key, *v);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    const std::string& source() const noexcept { return source_; }

private:
    std::string source_ = "<config>";
    std::map<std::string, Entry> entries_;
};

inline ReceiverSpec parse_receiver(const std::string& text)
{
    const std::string s = detail::lower(detail::trim(text));
    if (s == "pcsi")
        return ReceiverSpec::pcsi();
    const auto open = s.find('(');
    if (open == std::string::npos || s.back() != ')')
        throw usage_error("unknown receiver '" + text + "' (expected pcsi, dfb(L_m[,alpha]) or mlsd(L))");
    const std::string name = detail::trim(s.substr(0, open));
    const auto args = detail::split_list(s.substr(open + 1, s.size() - open - 2));
    std::vector<std::uint64_t> nums;
    for (const auto& a : args) {
        std::uint64_t v = 0;
        const auto res = std::from_chars(a.data(), a.data() + a.size(), v);
        if (a.empty() || res.ec != std::errc() || res.ptr != a.data() + a.size())
            throw usage_error("receiver '" + text + "': bad argument '" + a + "'");
        nums.push_back(v);
    }
    if (name == "dfb" && (nums.size() == 1 || nums.size() == 2))
        return ReceiverSpec::dfb(nums[0], nums.size() == 2 ? static_cast<unsigned>(nums[1]) : 0);
    if (name == "mlsd" && nums.size() == 1)
        return ReceiverSpec::mlsd(nums[0]);
    throw usage_error("unknown receiver '" + text + "' (expected pcsi, dfb(L_m[,alpha]) or mlsd(L))");
}

// Everything an experiment file resolves to.
struct Experiment {
    SimConfig base;
    std::vector<ReceiverSpec> receivers;
    std::uint64_t trace_symbols = 10000;
    std::optional<double> trace_a2_over_n0_db;
    std::optional<double> trace_power_dbm;
    std::uint64_t stats_samples = 1'000'000;
    std::uint64_t stats_ks_samples = 100'000;
    std::vector<std::string> warnings;
};

inline ChannelModel resolve_channel(const ExperimentSpec& spec)
{
    ChannelModel ch;
    const std::string turb = detail::lower(spec.get_string("channel.turbulence"));
    const bool custom_params = spec.has("channel.alpha") || spec.has("channel.beta");
    if (turb == "weak" || turb == "strong") {
        if (custom_params)
            spec.fail(spec.has("channel.alpha") ? "channel.alpha" : "channel.beta",
                      "only allowed with turbulence = custom");
        ch.turbulence = turb == "weak" ? GammaGammaParams::weak() : GammaGammaParams::strong();
    } else if (turb == "custom") {
        ch.turbulence = GammaGammaParams{spec.get_double("channel.alpha"), spec.get_double("channel.beta")};
    } else if (turb == "none") {
        if (custom_params)
            spec.fail(spec.has("channel.alpha") ? "channel.alpha" : "channel.beta",
                      "only allowed with turbulence = custom");
    } else {
        spec.fail("channel.turbulence", "expected none, weak, strong or custom, got '" + turb + "'");
    }
    if (spec.get_bool("channel.pointing"))
        ch.pointing = PointingParams{spec.get_double("channel.a0"), spec.get_double("channel.gamma")};
    ch.normalize_mean = spec.get_bool("channel.normalize_mean");
    ch.coherence_length = spec.get_count("channel.coherence_length");
    try {
        ch.validate();
    } catch (const std::domain_error& e) {
        throw config_error(spec.source() + ": [channel]: " + e.what());
    }
    return ch;
}

inline std::vector<double> resolve_sweep(const ExperimentSpec& spec)
{
    const bool dbm = spec.has("sweep.power_dbm");
    const bool watts = spec.has("sweep.power_w");
    const bool range = spec.has("sweep.start_dbm") || spec.has("sweep.stop_dbm") || spec.has("sweep.step_dbm");
    if (int(dbm) + int(watts) + int(range) > 1)
        spec.fail(dbm ? "sweep.power_dbm" : "sweep.power_w",
                  "give exactly one of power_dbm, power_w or start/stop/step_dbm");
    std::vector<double> out;
    if (dbm) {
        out = spec.get_doubles("sweep.power_dbm");
    } else if (watts) {
        for (double w : spec.get_doubles("sweep.power_w")) {
            if (!(w > 0.0))
                spec.fail("sweep.power_w", "powers must be positive");
            out.push_back(watts_to_dbm(w));
        }
    } else if (range) {
        const double start = spec.get_double("sweep.start_dbm");
        const double stop = spec.get_double("sweep.stop_dbm");
        const double step = spec.get_double("sweep.step_dbm");
        if (!(step > 0.0) || stop < start)
            spec.fail("sweep.step_dbm", "need step > 0 and stop >= start");
        const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < n; ++i)
            out.push_back(start + step * static_cast<double>(i));
    }
    for (std::size_t i = 1; i < out.size(); ++i)
        if (!(out[i] > out[i - 1]))
            spec.fail(dbm ? "sweep.power_dbm" : watts ? "sweep.power_w" : "sweep.step_dbm",
                      "power sweep must be strictly increasing");
    return out;
}

inline Experiment resolve(const ExperimentSpec& spec)
{
    Experiment ex;
    SimConfig& cfg = ex.base;
    cfg.order = static_cast<unsigned>(spec.get_count("system.order"));
    try {
        bits_per_symbol(cfg.order);
    } catch (const std::domain_error& e) {
        spec.fail("system.order", e.what());
    }
    cfg.data_rate = spec.get_double("system.data_rate_bps");
    if (!(cfg.data_rate > 0.0))
        spec.fail("system.data_rate_bps", "must be positive");
    cfg.responsivity = spec.get_double("system.responsivity");
    if (!(cfg.responsivity > 0.0))
        spec.fail("system.responsivity", "must be positive");
    if (spec.has("system.noise_psd_dbm_hz")) {
        if (spec.has("system.n0"))
            spec.fail("system.n0", "give either n0 or noise_psd_dbm_hz, not both");
        const double ohm = spec.get_double("system.load_ohm");
        if (!(ohm > 0.0))
            spec.fail("system.load_ohm", "must be positive");
        cfg.n0 = n0_from_thermal_noise(spec.get_double("system.noise_psd_dbm_hz"), ohm);
    } else {
        cfg.n0 = spec.get_double("system.n0");
        if (!(cfg.n0 >= 0.0))
            spec.fail("system.n0", "must be non-negative");
    }
    cfg.channel = resolve_channel(spec);

    for (const auto& item : detail::split_list(spec.get_string("receiver.list"))) {
        try {
            ex.receivers.push_back(parse_receiver(item));
        } catch (const usage_error& e) {
            spec.fail("receiver.list", e.what());
        }
    }
    if (ex.receivers.empty())
        spec.fail("receiver.list", "no receivers given");
    const std::string pilots = detail::lower(spec.get_string("receiver.pilots"));
    if (pilots == "block")
        cfg.pilots = PilotPolicy::every_block;
    else if (pilots == "stream")
        cfg.pilots = PilotPolicy::stream_start;
    else
        spec.fail("receiver.pilots", "expected block or stream, got '" + pilots + "'");
    cfg.genie_feedback = spec.get_bool("receiver.genie_feedback");
    const auto streams = spec.get_count("receiver.streams");
    if (streams < 1 || streams > 4096)
        spec.fail("receiver.streams", "must lie in [1, 4096]");
    cfg.streams = static_cast<unsigned>(streams);

    cfg.power_dbm = resolve_sweep(spec);
    cfg.seed = spec.get_count("run.seed");
    cfg.stop.min_errors = spec.get_count("run.min_errors");
    cfg.stop.max_bits = spec.get_count("run.max_bits");
    if (cfg.stop.min_errors < 1)
        spec.fail("run.min_errors", "must be at least 1");
    if (cfg.stop.max_bits < 1)
        spec.fail("run.max_bits", "must be at least 1");

    ex.trace_symbols = spec.get_count("trace.symbols");
    if (spec.has("trace.a2_over_n0_db"))
        ex.trace_a2_over_n0_db = spec.get_double("trace.a2_over_n0_db");
    if (spec.has("trace.power_dbm"))
        ex.trace_power_dbm = spec.get_double("trace.power_dbm");
    if (ex.trace_a2_over_n0_db && ex.trace_power_dbm)
        spec.fail("trace.power_dbm", "give either power_dbm or a2_over_n0_db, not both");
    ex.stats_samples = spec.get_count("stats.samples");
    ex.stats_ks_samples = spec.get_count("stats.ks_samples");
    if (ex.stats_samples < 2)
        spec.fail("stats.samples", "must be at least 2");

    for (const auto& rx : ex.receivers) {
        SimConfig probe = cfg;
        probe.receiver = rx;
        try {
            for (auto& w : probe.validate())
                ex.warnings.push_back(rx.label() + ": " + w);
        } catch (const usage_error& e) {
            spec.fail("receiver.list", rx.label() + ": " + e.what());
        }
    }
    return ex;
}

struct RunOptions {
    unsigned threads = 1;
    bool genie_rows = false; // ber-sweep --genie-bound
};

namespace detail {

inline void write_header(std::ostream& out, const std::string& command, const ExperimentSpec& spec)
{
    fmt::print(out, "# fsopam {}\n", command);
    for (const auto& [k, v] : spec.resolved())
        fmt::print(out, "# {} = {}\n", k, v);
}

// RFC 4180 quoting for fields that contain a comma or quote.
inline std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string channel_label(const ChannelModel& ch)
{
    std::string s;
    if (ch.turbulence)
        s += fmt::format("gamma-gamma({},{})", ch.turbulence->alpha, ch.turbulence->beta);
    if (ch.pointing)
        s += fmt::format("{}pointing({},{})", s.empty() ? "" : "+", ch.pointing->a0, ch.pointing->gamma);
    if (s.empty())
        s = "static";
    else if (ch.normalize_mean)
        s += "/normalized";
    return s;
}

inline double d2_over_n0_at(const SimConfig& cfg, double power_dbm)
{
    const auto c = cfg.constellation_for_rx_power(dbm_to_watts(power_dbm));
    return cfg.n0 > 0.0 ? c.two_d() * c.two_d() / cfg.n0 : kInfinity;
}

inline void report_warnings(const Experiment& ex, std::ostream& err)
{
    for (const auto& w : ex.warnings)
        fmt::print(err, "warning: {}\n", w);
}

} // namespace detail

// power_dbm,receiver,M,L_m,data_rate_bps,si,ber,ci95,bits,errors,seed
inline int cmd_ber_sweep(const ExperimentSpec& spec, const RunOptions& opts, std::ostream& out,
                         std::ostream& err)
{
    const Experiment ex = resolve(spec);
    if (ex.base.power_dbm.empty())
        spec.fail("sweep.power_dbm", "ber-sweep needs a power sweep");
    detail::report_warnings(ex, err);
    detail::write_header(out, "ber-sweep", spec);
    fmt::print(out, "power_dbm,receiver,M,L_m,data_rate_bps,si,ber,ci95,bits,errors,seed\n");
    const double si = ex.base.channel.scintillation_index();
    std::vector<std::string> failed;
    for (double p : ex.base.power_dbm) {
        for (const auto& rx : ex.receivers) {
            SimConfig cfg = ex.base;
            cfg.receiver = rx;
            cfg.threads = opts.threads;
            try {
                const auto e = run_ber_point(cfg, dbm_to_watts(p));
                const std::string lm = rx.kind == ReceiverKind::pcsi ? "" : std::to_string(rx.memory);
                fmt::print(out, "{},{},{},{},{},{:.6e},{:.6e},{:.6e},{},{},{}\n", p, detail::csv_field(rx.label()), cfg.order, lm,
                           cfg.data_rate, si, e.ber, e.ci95, e.bits, e.errors, cfg.seed);
            } catch (const std::exception& e) {
                failed.push_back(fmt::format("power_dbm={} receiver={}: {}", p, rx.label(), e.what()));
            }
        }
        if (opts.genie_rows) {
            try {
                const auto g =
                    genie_bound_quadrature({detail::d2_over_n0_at(ex.base, p), ex.base.order}, ex.base.channel);
                fmt::print(out, "{},genie,{},,{},{:.6e},{:.6e},{:.6e},0,0,{}\n", p, ex.base.order,
                           ex.base.data_rate, si, g.value, g.error, ex.base.seed);
            } catch (const std::exception& e) {
                failed.push_back(fmt::format("power_dbm={} receiver=genie: {}", p, e.what()));
            }
        }
    }
    for (const auto& f : failed)
        fmt::print(err, "failed: {}\n", f);
    return failed.empty() ? 0 : 1;
}

// power_dbm,M,data_rate_bps,si,d2_over_n0_db,genie_ber,abs_error
inline int cmd_genie_bound(const ExperimentSpec& spec, const RunOptions&, std::ostream& out, std::ostream& err)
{
    const Experiment ex = resolve(spec);
    if (ex.base.power_dbm.empty())
        spec.fail("sweep.power_dbm", "genie-bound needs a power sweep");
    detail::write_header(out, "genie-bound", spec);
    fmt::print(out, "power_dbm,M,data_rate_bps,si,d2_over_n0_db,genie_ber,abs_error\n");
    const double si = ex.base.channel.scintillation_index();
    std::vector<std::string> failed;
    for (double p : ex.base.power_dbm) {
        const double snr = detail::d2_over_n0_at(ex.base, p);
        try {
            const auto g = genie_bound_quadrature({snr, ex.base.order}, ex.base.channel);
            fmt::print(out, "{},{},{},{:.6e},{:.6f},{:.6e},{:.3e}\n", p, ex.base.order, ex.base.data_rate, si,
                       10.0 * std::log10(snr), g.value, g.error);
        } catch (const std::exception& e) {
            failed.push_back(fmt::format("power_dbm={}: {}", p, e.what()));
        }
    }
    for (const auto& f : failed)
        fmt::print(err, "failed: {}\n", f);
    return failed.empty() ? 0 : 1;
}

// model,samples,mean,si,si_analytic,ks_stat,ks_crit_1pct,pdf_norm_residual,min,max
inline int cmd_channel_stats(const ExperimentSpec& spec, const RunOptions&, std::ostream& out, std::ostream& err)
{
    const Experiment ex = resolve(spec);
    const ChannelModel& ch = ex.base.channel;
    detail::write_header(out, "channel-stats", spec);
    fmt::print(out, "model,samples,mean,si,si_analytic,ks_stat,ks_crit_1pct,pdf_norm_residual,min,max\n");

    Philox4x32 rng(ex.base.seed, stream_id(0, 0x63686e6c)); // "chnl"
    const std::size_t n = ex.stats_samples;
    std::vector<double> ks_sample;
    ks_sample.reserve(std::min<std::uint64_t>(n, ex.stats_ks_samples));
    double sum = 0.0;
    double sum2 = 0.0;
    double lo = kInfinity;
    double hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double h = sample_gain(ch, rng);
        sum += h;
        sum2 += h * h;
        lo = std::min(lo, h);
        hi = std::max(hi, h);
        if (ks_sample.size() < ex.stats_ks_samples)
            ks_sample.push_back(h);
    }
    const double mean = sum / n;
    const double si = (sum2 / n) / (mean * mean) - 1.0;

    std::string ks = "nan";
    std::string crit = "nan";
    std::string residual = "nan";
    int status = 0;
    if (!ch.is_static()) {
        try {
            auto pdf = [&](double h) { return h > 0.0 ? pdf_composite(ch, h) : 0.0; };
            QuadratureOptions q;
            q.abs_tol = 1e-10;
            q.rel_tol = 1e-10;
            const double upper = support_upper(ch);
            const double norm = integrate(pdf, 0.0, upper, q, "pdf normalisation").value;
            residual = fmt::format("{:.3e}", std::abs(norm - 1.0));
            if (!ks_sample.empty()) {
                ks = fmt::format("{:.6e}", ks_statistic(ch, ks_sample));
                crit = fmt::format("{:.6e}", ks_critical_1pct(ks_sample.size()));
            }
        } catch (const std::exception& e) {
            fmt::print(err, "failed: analytic comparison: {}\n", e.what());
            status = 1;
        }
    } else {
        residual = "0";
    }
    fmt::print(out, "{},{},{:.6e},{:.6e},{:.6e},{},{},{},{:.6e},{:.6e}\n", detail::csv_field(detail::channel_label(ch)), n, mean, si,
               ch.scintillation_index(), ks, crit, residual, lo, hi);
    return status;
}

// k,a_true,a_hat,detected_level,fed_back_error_flag
inline int cmd_estimator_trace(const ExperimentSpec& spec, const RunOptions& opts, std::ostream& out,
                               std::ostream& err)
{
    const Experiment ex = resolve(spec);
    const auto rx = std::find_if(ex.receivers.begin(), ex.receivers.end(),
                                 [](const ReceiverSpec& r) { return r.kind == ReceiverKind::dfb; });
    if (rx == ex.receivers.end())
        spec.fail("receiver.list", "estimator-trace needs a dfb receiver");
    SimConfig cfg = ex.base;
    cfg.receiver = *rx;
    cfg.threads = opts.threads;
    double power_w = 0.0;
    if (ex.trace_a2_over_n0_db)
        power_w = cfg.rx_power_for_snr(std::pow(10.0, *ex.trace_a2_over_n0_db / 10.0));
    else if (ex.trace_power_dbm)
        power_w = dbm_to_watts(*ex.trace_power_dbm);
    else if (!cfg.power_dbm.empty())
        power_w = dbm_to_watts(cfg.power_dbm.front());
    else
        spec.fail("trace.power_dbm", "estimator-trace needs trace.power_dbm, trace.a2_over_n0_db or a sweep");
    if (!(power_w > 0.0))
        spec.fail("trace.a2_over_n0_db", "resolves to a non-positive power (is N0 zero?)");
    detail::report_warnings(ex, err);
    detail::write_header(out, "estimator-trace", spec);
    fmt::print(out, "# receiver = {}\n# rx_power_dbm = {}\n", rx->label(), watts_to_dbm(power_w));
    fmt::print(out, "k,a_true,a_hat,detected_level,fed_back_error_flag\n");
    for (const auto& s : run_estimator_trace(cfg, power_w, ex.trace_symbols))
        fmt::print(out, "{},{:.9e},{:.9e},{},{}\n", s.k, s.a_true, s.a_hat, s.detected_level,
                   s.feedback_error ? 1 : 0);
    return 0;
}

} // namespace fsopam::cli
