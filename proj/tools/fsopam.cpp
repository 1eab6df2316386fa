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

// fsopam: BER sweeps, genie bounds, channel statistics and estimator traces
// for M-PAM over turbulence and pointing-error channels.
//
// Exit status: 0 on success, 1 if any sweep point failed, 2 on a usage or
// experiment-file error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "fsopam/cli.hpp"

namespace {

unsigned default_threads()
{
    if (const char* env = std::getenv("FSOPAM_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1)
                return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring FSOPAM_THREADS='" << env << "'\n";
    }
    return 1;
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    // counts stay text so 1e8 style values get the same checks as the file
    std::optional<std::string> max_bits;
    std::optional<std::string> min_errors;
    std::string out;
    unsigned threads = 1;
};

void add_common(CLI::App* sub, Common& c)
{
    sub->add_option("--config", c.config, "Experiment file")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "Override run.seed");
    sub->add_option("--out", c.out, "Write CSV here instead of stdout");
    sub->add_option("--threads", c.threads, "Worker threads (default: FSOPAM_THREADS or 1)")
        ->check(CLI::Range(1u, 1024u));
    sub->add_option("--max-bits", c.max_bits, "Override run.max_bits");
    sub->add_option("--min-errors", c.min_errors, "Override run.min_errors");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"M-PAM free-space optical link simulator"};
    app.require_subcommand(1);

    Common common;
    common.threads = default_threads();
    bool genie_rows = false;

    auto* sweep = app.add_subcommand("ber-sweep", "Simulated BER against receive power for each receiver");
    add_common(sweep, common);
    sweep->add_flag("--genie-bound", genie_rows, "Add genie-bound rows to the sweep");
    auto* genie = app.add_subcommand("genie-bound", "Perfect-CSI average BER by numerical integration");
    add_common(genie, common);
    auto* stats = app.add_subcommand("channel-stats", "Sampled channel moments against the analytic model");
    add_common(stats, common);
    auto* trace = app.add_subcommand("estimator-trace", "Per-symbol amplitude estimates of the DFB receiver");
    add_common(trace, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        auto spec = common.config.empty() ? fsopam::cli::ExperimentSpec{}
                                          : fsopam::cli::ExperimentSpec::load(common.config);
        if (common.seed)
            spec.set("run.seed", std::to_string(*common.seed));
        if (common.max_bits)
            spec.set("run.max_bits", *common.max_bits);
        if (common.min_errors)
            spec.set("run.min_errors", *common.min_errors);

        fsopam::cli::RunOptions opts;
        opts.threads = common.threads;
        opts.genie_rows = genie_rows;

        std::ofstream file;
        if (!common.out.empty()) {
            file.open(common.out);
            if (!file) {
                std::cerr << "error: cannot write '" << common.out << "'\n";
                return 2;
            }
        }
        std::ostream& out = common.out.empty() ? std::cout : file;

        int rc = 0;
        if (*sweep)
            rc = fsopam::cli::cmd_ber_sweep(spec, opts, out, std::cerr);
        else if (*genie)
            rc = fsopam::cli::cmd_genie_bound(spec, opts, out, std::cerr);
        else if (*stats)
            rc = fsopam::cli::cmd_channel_stats(spec, opts, out, std::cerr);
        else
            rc = fsopam::cli::cmd_estimator_trace(spec, opts, out, std::cerr);
        out.flush();
        return rc;
    } catch (const fsopam::usage_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
