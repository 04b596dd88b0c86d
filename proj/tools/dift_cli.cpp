// dift: trace-driven taint tracking pipeline driver.
//
// Subcommands: asm, trace, decode, run, verify, bench.
// Exit codes: 0 no violation, 1 violations found, 2 input error,
// 3 trace unrecoverable, 4 internal desync.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dift/assembler.hpp"
#include "dift/cpu.hpp"
#include "dift/engine.hpp"
#include "dift/error.hpp"
#include "dift/pipeline.hpp"
#include "dift/randprog.hpp"

namespace {

using namespace dift;

int exit_code_for(const Error &e) {
    switch (e.kind()) {
    case ErrorKind::InputError: return 2;
    case ErrorKind::TraceUnrecoverable: return 3;
    case ErrorKind::InternalDesync: return 4;
    }
    return 2;
}

std::string read_text_file(const std::string &path) {
    std::ifstream f(path);
    if (!f)
        throw Error(ErrorKind::InputError, "cannot open: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

bool has_suffix(const std::string &s, const std::string &suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

struct Options {
    std::uint32_t width = 4;
    std::uint32_t granularity = 4;
    std::uint32_t context = 1;
    std::size_t queue = 1024;
    std::string mode = "batch";
    std::string policy_path;
    std::uint64_t seed = 1;
    bool stop_on_first = false;

    Policy policy() const {
        Policy p = policy_path.empty() ? default_policy()
                                       : load_policy_file(policy_path, width);
        p.stop_on_first = stop_on_first;
        return p;
    }
};

std::vector<std::uint32_t> parse_inputs(const std::string &list) {
    std::vector<std::uint32_t> v;
    std::istringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty())
            continue;
        v.push_back(static_cast<std::uint32_t>(std::stoul(tok, nullptr, 0)));
    }
    return v;
}

// Reads a .pft directly or linearizes a .etb capture. Returns true when the
// source was an ETB snapshot (trace may start mid-stream).
bool load_trace(const std::string &path, std::vector<std::uint8_t> &bytes) {
    if (has_suffix(path, ".etb")) {
        bytes = pft::linearize_etb(pft::read_etb_file(path));
        return true;
    }
    bytes = pft::read_pft_file(path);
    return false;
}

int cmd_asm(const std::string &in, const std::string &out) {
    auto img = isa::assemble(read_text_file(in));
    isa::write_image_file(out, img);
    std::cout << "assembled " << img.instructions.size() << " instructions at 0x"
              << std::hex << img.base << std::dec << "\n";
    return 0;
}

int cmd_trace(const Options &opt, const std::string &img_path,
              const std::string &inputs, const std::string &out_prefix) {
    auto img = isa::read_image_file(img_path);
    cpu::TraceConfig cfg;
    cfg.context = opt.context;
    auto art = cpu::run(img, parse_inputs(inputs), cfg, opt.policy(), opt.width);
    pft::write_pft_file(out_prefix + ".pft", art.trace);
    write_memlog_file(out_prefix + ".memlog", art.memlog);
    pft::write_etb_file(out_prefix + ".etb", art.etb);
    {
        std::ofstream f(out_prefix + ".oracle.txt");
        f << engine::format_report({art.oracle.state, art.oracle.violations});
    }
    std::cout << "trace: " << art.trace.size() << " bytes ("
              << (art.etb.wrapped ? "ETB wrapped" : "ETB not wrapped")
              << "), memlog: " << art.memlog.size() << " records, oracle: "
              << art.oracle.violations.size() << " violation(s)\n";
    return 0;
}

int cmd_decode(const Options &opt, const std::string &trace_path,
               const std::string &img_path) {
    std::vector<std::uint8_t> bytes;
    bool partial = load_trace(trace_path, bytes);
    auto [packets, diag] = pft::decode_stream(bytes, partial);
    std::cout << "decoded " << packets.size() << " packets, skipped "
              << diag.skipped_bytes << " byte(s)"
              << (diag.truncated_tail ? ", truncated tail" : "") << "\n";
    for (const auto &p : packets) {
        std::visit(
            [](const auto &pkt) {
                using T = std::decay_t<decltype(pkt)>;
                char b[64];
                if constexpr (std::is_same_v<T, pft::ASync>)
                    std::snprintf(b, sizeof b, "a-sync");
                else if constexpr (std::is_same_v<T, pft::ISync>)
                    std::snprintf(b, sizeof b, "i-sync addr=0x%08x ctx=%u",
                                  pkt.address, pkt.context);
                else if constexpr (std::is_same_v<T, pft::Atom>)
                    std::snprintf(b, sizeof b, "atom %c", pkt.taken ? 'E' : 'N');
                else if constexpr (std::is_same_v<T, pft::BranchAddr>)
                    std::snprintf(b, sizeof b, "branch-addr 0x%08x%s", pkt.address,
                                  pkt.exception ? " exc" : "");
                else
                    std::snprintf(b, sizeof b, "context-id %u", pkt.context);
                std::cout << b << "\n";
            },
            p);
    }
    if (!img_path.empty()) {
        auto img = isa::read_image_file(img_path);
        auto map = flow::WaypointMap::build(img);
        auto events = partial
                          ? flow::resume_from_partial(packets, map, img, opt.context)
                          : flow::reconstruct(packets, map, img, opt.context);
        for (const auto &e : events)
            std::cout << flow::format_event(e) << "\n";
    }
    return 0;
}

int cmd_run(const Options &opt, const std::string &img_path,
            const std::string &trace_path, const std::string &memlog_path) {
    auto img = isa::read_image_file(img_path);
    std::vector<std::uint8_t> bytes;
    bool partial = load_trace(trace_path, bytes);
    auto memlog = read_memlog_file(memlog_path);
    auto map = flow::WaypointMap::build(img);
    auto prog = taggrid::compile_program(img, taggrid::Ruleset{}, opt.width);
    Policy policy = opt.policy();

    engine::RunReport report;
    if (opt.mode == "stream")
        report = pipeline::run_stream(bytes, partial, img, map, prog, memlog,
                                      policy, opt.width, opt.granularity,
                                      opt.context, opt.queue);
    else if (opt.mode == "batch")
        report = pipeline::run_batch(bytes, partial, img, map, prog, memlog,
                                     policy, opt.width, opt.granularity,
                                     opt.context);
    else
        throw Error(ErrorKind::InputError, "mode must be batch or stream");
    std::cout << engine::format_report(report);
    return report.violations.empty() ? 0 : 1;
}

int cmd_verify(int n, std::uint64_t seed, std::uint32_t width) {
    auto sum = randprog::verify_corpus(n, seed, width);
    std::cout << "verify: " << sum.cases - sum.failures << "/" << sum.cases
              << " programs match the oracle\n";
    if (sum.failures > 0) {
        std::cout << "first divergence: " << sum.first_divergence << "\n";
        return 1;
    }
    return 0;
}

int cmd_bench(const Options &opt, const std::string &trace_path,
              const std::string &img_path, int iterations) {
    std::vector<std::uint8_t> bytes;
    bool partial = load_trace(trace_path, bytes);
    if (bytes.empty() || iterations < 1)
        throw Error(ErrorKind::InputError, "nothing to benchmark");

    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    std::size_t total_packets = 0;
    for (int i = 0; i < iterations; ++i) {
        auto [packets, diag] = pft::decode_stream(bytes, partial);
        total_packets += packets.size();
    }
    double secs = std::chrono::duration<double>(clock::now() - t0).count();
    double bytes_per_s = static_cast<double>(bytes.size()) * iterations /
                         (secs > 0 ? secs : 1e-9);
    std::cout << "decode: " << bytes.size() << " bytes x " << iterations
              << " iterations in " << secs << " s = " << bytes_per_s
              << " bytes/s (" << total_packets << " packets)\n";

    if (!img_path.empty()) {
        auto img = isa::read_image_file(img_path);
        auto map = flow::WaypointMap::build(img);
        auto t1 = clock::now();
        std::size_t total_events = 0;
        for (int i = 0; i < iterations; ++i) {
            auto [packets, diag] = pft::decode_stream(bytes, partial);
            auto events =
                partial ? flow::resume_from_partial(packets, map, img, opt.context)
                        : flow::reconstruct(packets, map, img, opt.context);
            total_events += events.size();
        }
        double secs2 = std::chrono::duration<double>(clock::now() - t1).count();
        std::cout << "decode+rebuild: " << total_events << " events in " << secs2
                  << " s = "
                  << static_cast<double>(total_events) / (secs2 > 0 ? secs2 : 1e-9)
                  << " events/s\n";
    }
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"PFT-subset trace decoding and DIFT tag propagation"};
    app.require_subcommand(1);
    app.fallthrough(); // let global flags appear after the subcommand

    Options opt;
    app.add_option("--width", opt.width, "tag vector width W (1..32)");
    app.add_option("--granularity", opt.granularity,
                   "memory tag granularity G in bytes (power of two, 1..4096)");
    app.add_option("--context", opt.context, "traced context id");
    app.add_option("--queue", opt.queue, "pipeline queue capacity (packets)");
    app.add_option("--mode", opt.mode, "batch | stream");
    app.add_option("--policy", opt.policy_path, "policy file");
    app.add_option("--seed", opt.seed, "random seed");
    app.add_flag("--stop-on-first", opt.stop_on_first,
                 "halt at the first violation");

    std::string in, out = "a.img", inputs, img_path, trace_path, memlog_path,
                out_prefix = "out";
    int n_programs = 100, iterations = 10;

    auto *c_asm = app.add_subcommand("asm", "assemble a source file");
    c_asm->add_option("source", in)->required();
    c_asm->add_option("-o,--output", out);

    auto *c_trace = app.add_subcommand(
        "trace", "execute a program; emit .pft/.memlog/.etb and oracle report");
    c_trace->add_option("image", img_path)->required();
    c_trace->add_option("--inputs", inputs, "comma-separated input words");
    c_trace->add_option("-o,--output", out_prefix, "output path prefix");

    auto *c_decode =
        app.add_subcommand("decode", "decode a .pft/.etb; list packets and flow");
    c_decode->add_option("trace", trace_path)->required();
    c_decode->add_option("--image", img_path, "program image (enables flow listing)");

    auto *c_run = app.add_subcommand("run", "full DIFT pipeline over a trace");
    c_run->add_option("image", img_path)->required();
    c_run->add_option("trace", trace_path)->required();
    c_run->add_option("memlog", memlog_path)->required();

    auto *c_verify =
        app.add_subcommand("verify", "randomized pipeline-vs-oracle check");
    c_verify->add_option("-n,--programs", n_programs);

    auto *c_bench = app.add_subcommand("bench", "decode throughput measurement");
    c_bench->add_option("trace", trace_path)->required();
    c_bench->add_option("--image", img_path, "adds decode+rebuild events/s");
    c_bench->add_option("-i,--iterations", iterations);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_asm->parsed())
            return cmd_asm(in, out);
        if (c_trace->parsed())
            return cmd_trace(opt, img_path, inputs, out_prefix);
        if (c_decode->parsed())
            return cmd_decode(opt, trace_path, img_path);
        if (c_run->parsed())
            return cmd_run(opt, img_path, trace_path, memlog_path);
        if (c_verify->parsed())
            return cmd_verify(n_programs, opt.seed, opt.width);
        if (c_bench->parsed())
            return cmd_bench(opt, trace_path, img_path, iterations);
    } catch (const dift::Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
