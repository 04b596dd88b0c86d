#include "dift/randprog.hpp"

#include <sstream>

#include "dift/assembler.hpp"
#include "dift/engine.hpp"
#include "dift/error.hpp"
#include "dift/flow.hpp"
#include "dift/pft.hpp"
#include "dift/taggrid.hpp"

namespace dift::randprog {

namespace {

// Register convention for generated code:
//   r0..r5   data (may carry taint; SVC 0 writes r0)
//   r8       data segment base (0x10000)
//   r9       constant 1
//   r10..r12 loop counters, one per nesting level
//   r13      computed-jump scratch
//   r14      link register
class Generator {
public:
    Generator(std::mt19937 &rng, const GenOptions &opts)
        : rng_(rng), opts_(opts) {}

    std::string generate() {
        body_.str("");
        n_subs_ = pick(0, 2);
        emit("B main");
        for (int s = 0; s < n_subs_; ++s) {
            emit("sub" + std::to_string(s) + ":");
            int len = pick(2, 5);
            for (int i = 0; i < len; ++i)
                emit_alu_or_mem();
            emit("BX r14");
        }
        emit("main:");
        emit("MOVI r8, 0x8000");
        emit("ADD r8, r8, r8");
        emit("MOVI r9, 1");
        if (opts_.big_trace) {
            // Enough atoms to overflow the 4KB capture window several
            // times over.
            std::string lc = counter_reg(0);
            std::string top = fresh_label();
            emit("MOVI " + lc + ", " + std::to_string(pick(4800, 6000)));
            emit(top + ":");
            emit_stmt(1);
            emit("SUB " + lc + ", " + lc + ", r9");
            emit("BNZ " + lc + ", " + top);
        }
        int stmts = pick(4, 12);
        for (int i = 0; i < stmts && budget_left(); ++i)
            emit_stmt(0);
        emit("HALT");
        return body_.str();
    }

private:
    int pick(int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(rng_);
    }
    std::string data_reg() { return "r" + std::to_string(pick(0, 5)); }
    std::string counter_reg(int depth) {
        return "r" + std::to_string(10 + std::min(depth, 2));
    }
    std::string fresh_label() { return "L" + std::to_string(label_seq_++); }
    bool budget_left() const { return emitted_ < opts_.max_instructions - 12; }
    void emit(const std::string &line) {
        body_ << line << '\n';
        if (line.back() != ':')
            ++emitted_;
    }

    void emit_alu_or_mem() {
        switch (pick(0, 6)) {
        case 0:
            emit("MOVI " + data_reg() + ", " + std::to_string(pick(0, 1000)));
            break;
        case 1:
            emit("MOV " + data_reg() + ", " + data_reg());
            break;
        case 2:
            emit("ADD " + data_reg() + ", " + data_reg() + ", " + data_reg());
            break;
        case 3:
            emit("SUB " + data_reg() + ", " + data_reg() + ", " + data_reg());
            break;
        case 4:
            emit("LDR " + data_reg() + ", [r8+" + std::to_string(4 * pick(0, 62)) + "]");
            break;
        default:
            emit("STR " + data_reg() + ", [r8+" + std::to_string(4 * pick(0, 62)) + "]");
            break;
        }
    }

    void emit_stmt(int depth) {
        if (!budget_left()) {
            emit_alu_or_mem();
            return;
        }
        switch (pick(0, 9)) {
        case 0: // taint source
            emit("SVC 0");
            break;
        case 1: // taint sink
            emit("SVC 1");
            break;
        case 2: // forward conditional
        case 3: {
            if (depth >= opts_.max_nesting) {
                emit_alu_or_mem();
                break;
            }
            std::string skip = fresh_label();
            emit("BNZ " + data_reg() + ", " + skip);
            int n = pick(1, 3);
            for (int i = 0; i < n; ++i)
                emit_stmt(depth + 1);
            emit(skip + ":");
            break;
        }
        case 4: { // bounded loop
            if (depth >= std::min(opts_.max_nesting, 3)) {
                emit_alu_or_mem();
                break;
            }
            std::string lc = counter_reg(depth);
            std::string top = fresh_label();
            emit("MOVI " + lc + ", " + std::to_string(pick(1, 6)));
            emit(top + ":");
            int n = pick(1, 3);
            for (int i = 0; i < n; ++i)
                emit_stmt(depth + 1);
            emit("SUB " + lc + ", " + lc + ", r9");
            emit("BNZ " + lc + ", " + top);
            break;
        }
        case 5: { // subroutine call
            if (n_subs_ == 0 || depth >= opts_.max_nesting) {
                emit_alu_or_mem();
                break;
            }
            emit("BL sub" + std::to_string(pick(0, n_subs_ - 1)));
            break;
        }
        case 6: { // computed jump through a register
            std::string join = fresh_label();
            emit("MOVI r13, " + join);
            emit("BX r13");
            emit(join + ":");
            break;
        }
        default:
            emit_alu_or_mem();
            break;
        }
    }

    std::mt19937 &rng_;
    const GenOptions &opts_;
    std::ostringstream body_;
    int label_seq_ = 0;
    int emitted_ = 0;
    int n_subs_ = 0;
};

} // namespace

std::string generate_program(std::mt19937 &rng, const GenOptions &opts) {
    return Generator(rng, opts).generate();
}

std::vector<std::uint32_t> generate_inputs(std::mt19937 &rng, std::size_t n) {
    std::vector<std::uint32_t> v(n);
    for (auto &x : v)
        x = rng();
    return v;
}

Policy generate_policy(std::mt19937 &rng, std::uint32_t width) {
    Policy p;
    p.source_mask = 0x1;
    p.sink_masks.fill(0);
    p.sink_masks[static_cast<std::size_t>(SinkKind::DataSink)] = 0x1;
    std::uniform_int_distribution<int> coin(0, 3);
    for (std::uint32_t b = 1; b < width; ++b)
        if (coin(rng) != 0)
            p.source_mask |= 1u << b;
    for (std::size_t k = 0; k < kSinkKindCount; ++k)
        for (std::uint32_t b = 0; b < width; ++b)
            if (coin(rng) == 0)
                p.sink_masks[k] |= 1u << b;
    return p;
}

CaseResult verify_one(std::uint64_t seed, const GenOptions &opts,
                      std::uint32_t width) {
    auto fail = [&](const std::string &what) {
        return CaseResult{false, what + " (seed " + std::to_string(seed) + ")"};
    };
    try {
        std::mt19937 rng(static_cast<std::uint32_t>(seed ^ (seed >> 32)));
        std::string src = generate_program(rng, opts);
        auto inputs = generate_inputs(rng, 8);
        Policy policy = generate_policy(rng, width);

        auto img = isa::assemble(src);
        cpu::TraceConfig cfg;
        auto art = cpu::run(img, inputs, cfg, policy, width);

        auto [packets, diag] = pft::decode_stream(art.trace, false);
        if (diag.skipped_bytes != 0 || diag.truncated_tail)
            return fail("clean trace decoded with skips/truncation");

        auto map = flow::WaypointMap::build(img);
        auto events = flow::reconstruct(packets, map, img, cfg.context);
        if (events.size() != art.block_sequence.size())
            return fail("flow event count " + std::to_string(events.size()) +
                        " != executed block count " +
                        std::to_string(art.block_sequence.size()));
        for (std::size_t i = 0; i < events.size(); ++i)
            if (events[i].block_start != art.block_sequence[i])
                return fail("block " + std::to_string(i) +
                            " reconstructed start diverges");

        auto prog = taggrid::compile_program(img, taggrid::Ruleset{}, width);
        auto report = engine::run(events, prog, art.memlog, policy, width, 1);

        if (report.violations != art.oracle.violations)
            return fail("violation list diverges: pipeline " +
                        std::to_string(report.violations.size()) +
                        " vs oracle " +
                        std::to_string(art.oracle.violations.size()));
        if (!(report.state == art.oracle.state))
            return fail("final tag state diverges");
        return {};
    } catch (const Error &e) {
        return fail(std::string("error: ") + e.what());
    }
}

VerifySummary verify_corpus(int n_programs, std::uint64_t seed,
                            std::uint32_t width) {
    VerifySummary sum;
    GenOptions opts;
    for (int i = 0; i < n_programs; ++i) {
        auto r = verify_one(seed + static_cast<std::uint64_t>(i), opts, width);
        ++sum.cases;
        if (!r.ok) {
            ++sum.failures;
            if (sum.first_divergence.empty())
                sum.first_divergence = r.detail;
        }
    }
    return sum;
}

} // namespace dift::randprog
