#include <doctest.h>

#include <random>

#include "dift/assembler.hpp"
#include "dift/cpu.hpp"
#include "dift/error.hpp"
#include "dift/randprog.hpp"

using namespace dift;

namespace {

const char *kTaintChain = R"(
    MOVI r2, 0x8000
    ADD r2, r2, r2
    SVC 0          ; r0 <- tainted input
    MOV r1, r0
    STR r1, [r2+0]
    LDR r3, [r2+0]
    MOV r0, r3
    SVC 1          ; tainted data reaches the sink
    HALT
)";

cpu::RunArtifacts run_src(const std::string &src,
                          std::vector<std::uint32_t> inputs = {},
                          std::uint32_t width = 4) {
    auto img = isa::assemble(src);
    return cpu::run(img, inputs, cpu::TraceConfig{}, default_policy(), width);
}

} // namespace

TEST_CASE("assembler lays out instructions from the base address") {
    auto img = isa::assemble("MOVI r1, 5\nHALT\n");
    REQUIRE(img.instructions.size() == 2);
    CHECK(img.base == 0x100);
    CHECK(img.at(0x100).op == isa::Op::Movi);
    CHECK(img.at(0x104).op == isa::Op::Halt);
}

TEST_CASE("forward branch resolves to the HALT address") {
    auto img = isa::assemble("B end\nMOVI r0, 1\nend: HALT\n");
    CHECK(img.instructions[0].target(0x100) == 0x108);
    CHECK(img.labels.at("end") == 0x108);
}

TEST_CASE("assembly errors carry line numbers") {
    try {
        isa::assemble("MOVI r1, 5\nFROB r2\nHALT\n");
        FAIL("expected AsmError");
    } catch (const AsmError &e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(isa::assemble("B nowhere\nHALT\n"), AsmError);
    CHECK_THROWS_AS(isa::assemble("MOVI r1, 70000\nHALT\n"), AsmError);
    CHECK_THROWS_AS(isa::assemble("MOVI r15, 0\nHALT\n"), AsmError);
    CHECK_THROWS_AS(isa::assemble("MOVI r0, 1\n"), AsmError); // no HALT
}

TEST_CASE("reassembling disassembled output yields identical instructions") {
    std::mt19937 rng(11);
    randprog::GenOptions opts;
    for (int i = 0; i < 20; ++i) {
        auto img = isa::assemble(randprog::generate_program(rng, opts));
        auto img2 = isa::assemble(isa::disassemble(img));
        CHECK(img.base == img2.base);
        REQUIRE(img.instructions == img2.instructions);
    }
}

TEST_CASE("HALT-only program traces sync packets only") {
    auto art = run_src("HALT\n");
    CHECK(art.trace.size() == 15); // A-sync (6) + I-sync (9)
    CHECK(art.memlog.empty());
    CHECK(art.oracle.violations.empty());
    CHECK(art.block_sequence == std::vector<std::uint32_t>{0x100});
}

TEST_CASE("not-taken BNZ emits a single N-atom") {
    auto art = run_src("BNZ r0, skip\nskip: HALT\n");
    auto [packets, diag] = pft::decode_stream(art.trace, false);
    REQUIRE(packets.size() == 3);
    CHECK(packets[2] == pft::TracePacket{pft::Atom{false}});
}

TEST_CASE("taint chain raises exactly one data-sink violation") {
    auto art = run_src(kTaintChain, {0xDEAD});
    REQUIRE(art.oracle.violations.size() == 1);
    const auto &v = art.oracle.violations[0];
    CHECK(v.sink == SinkKind::DataSink);
    CHECK(v.bits == 0b1);
    CHECK(v.reg == 0);
    CHECK(v.pc == 0x100 + 7 * 4);
    CHECK(v.event_index == 0);
}

TEST_CASE("identical runs are bit-identical") {
    std::mt19937 rng(3);
    auto src = randprog::generate_program(rng, randprog::GenOptions{});
    auto a = run_src(src, {1, 2, 3});
    auto b = run_src(src, {1, 2, 3});
    CHECK(a.trace == b.trace);
    CHECK(a.memlog == b.memlog);
    CHECK(a.block_sequence == b.block_sequence);
    CHECK(a.oracle.violations == b.oracle.violations);
    CHECK(a.oracle.state == b.oracle.state);
}

TEST_CASE("memlog is complete and strictly sequenced") {
    std::mt19937 rng(5);
    for (int i = 0; i < 10; ++i) {
        auto src = randprog::generate_program(rng, randprog::GenOptions{});
        auto art = run_src(src, randprog::generate_inputs(rng, 4));
        for (std::size_t k = 0; k < art.memlog.size(); ++k) {
            CHECK(art.memlog[k].seq == k);
            CHECK(art.memlog[k].size == 4);
        }
    }
}

TEST_CASE("straight-line oracle equals direct rule evaluation") {
    auto art = run_src("MOVI r1, 2\nSVC 0\nMOV r2, r0\nADD r3, r2, r1\nHALT\n",
                       {7});
    CHECK(art.oracle.state.trf[0] == 0b1);
    CHECK(art.oracle.state.trf[1] == 0);
    CHECK(art.oracle.state.trf[2] == 0b1);
    CHECK(art.oracle.state.trf[3] == 0b1); // merge of r2|r1
}

TEST_CASE("nontermination hits the step budget") {
    auto img = isa::assemble("loop: B loop\nHALT\n");
    CHECK_THROWS_AS(
        cpu::run(img, {}, cpu::TraceConfig{}, default_policy(), 4, 1000),
        Error);
}

TEST_CASE("out-of-segment access faults") {
    CHECK_THROWS_AS(run_src("LDR r0, [r1+0]\nHALT\n"), Error); // r1 = 0
}

TEST_CASE("context noise grows the packet count by markers plus noise") {
    auto art = run_src("BNZ r0, skip\nskip: HALT\n");
    auto [orig, d0] = pft::decode_stream(art.trace, false);

    auto noised0 = cpu::inject_context_noise(art.trace, 9, {}, 1);
    auto [p0, d1] = pft::decode_stream(noised0, false);
    CHECK(p0.size() == orig.size() + 2);

    std::vector<pft::TracePacket> atoms(3, pft::Atom{true});
    auto noised3 = cpu::inject_context_noise(art.trace, 9, atoms, 1);
    auto [p3, d2] = pft::decode_stream(noised3, false);
    CHECK(p3.size() == orig.size() + 5);
}

TEST_CASE("noise injection rejects bad arguments") {
    auto art = run_src("HALT\n");
    CHECK_THROWS_AS(cpu::inject_context_noise(art.trace, 1, {}, 0),
                    Error); // foreign == traced context
    CHECK_THROWS_AS(cpu::inject_context_noise(art.trace, 9, {}, 99),
                    Error); // not a packet boundary
}

TEST_CASE("memlog file roundtrip") {
    auto art = run_src(kTaintChain, {1});
    write_memlog_file("t.memlog", art.memlog);
    CHECK(read_memlog_file("t.memlog") == art.memlog);
}
