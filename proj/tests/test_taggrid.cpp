#include <doctest.h>

#include <random>
#include <set>

#include "dift/assembler.hpp"
#include "dift/cpu.hpp"
#include "dift/error.hpp"
#include "dift/flow.hpp"
#include "dift/randprog.hpp"
#include "dift/taggrid.hpp"

using namespace dift;
using taggrid::TagOp;

TEST_CASE("straight-line program is a single block") {
    auto img = isa::assemble("MOVI r0, 1\nADD r1, r0, r0\nHALT\n");
    auto blocks = taggrid::extract_blocks(img);
    REQUIRE(blocks.size() == 1);
    CHECK(blocks[0].start == 0x100);
    CHECK(blocks[0].end == 0x108);
    CHECK(blocks[0].kind == taggrid::BlockKind::Halt);
}

TEST_CASE("BNZ makes leaders at target and fallthrough") {
    auto img = isa::assemble("BNZ r0, L\nMOVI r1, 1\nL: HALT\n");
    auto blocks = taggrid::extract_blocks(img);
    std::set<std::uint32_t> starts;
    for (const auto &b : blocks)
        starts.insert(b.start);
    CHECK(starts == std::set<std::uint32_t>{0x100, 0x104, 0x108});
}

TEST_CASE("blocks partition the image with no interior waypoint") {
    std::mt19937 rng(61);
    randprog::GenOptions opts;
    for (int i = 0; i < 20; ++i) {
        auto img = isa::assemble(randprog::generate_program(rng, opts));
        auto blocks = taggrid::extract_blocks(img);

        // independent leader-set computation
        std::set<std::uint32_t> leaders = {img.base};
        for (std::uint32_t a = img.base; a < img.end(); a += 4) {
            const auto &inst = img.at(a);
            if (!inst.is_branch())
                continue;
            if (inst.is_direct_branch())
                leaders.insert(inst.target(a));
            if (a + 4 < img.end())
                leaders.insert(a + 4);
        }
        std::set<std::uint32_t> starts;
        for (const auto &b : blocks)
            starts.insert(b.start);
        for (std::uint32_t l : leaders)
            REQUIRE(starts.count(l) == 1);

        // contiguous partition, sorted by start
        std::uint32_t expect = img.base;
        for (const auto &b : blocks) {
            REQUIRE(b.start == expect);
            REQUIRE(b.end >= b.start);
            for (std::uint32_t a = b.start; a < b.end; a += 4) {
                const auto &inst = img.at(a);
                REQUIRE_FALSE(inst.is_branch());
                REQUIRE(inst.op != isa::Op::Halt);
            }
            expect = b.end + 4;
        }
        REQUIRE(expect == img.end());
    }
}

TEST_CASE("table lowering of single instructions") {
    auto img = isa::assemble("MOV r1, r0\nADD r2, r0, r1\nHALT\n");
    auto ops = taggrid::compile_tagops({0x100, 0x108, taggrid::BlockKind::Halt},
                                       img, taggrid::Ruleset{}, 4);
    REQUIRE(ops.size() == 2);
    CHECK(ops[0].kind == TagOp::Kind::CopyReg);
    CHECK(ops[0].rd == 1);
    CHECK(ops[0].ra == 0);
    CHECK(ops[0].pc == 0x100);
    CHECK(ops[1].kind == TagOp::Kind::MergeRegs);
    CHECK(ops[1].rd == 2);
    CHECK(ops[1].ra == 0);
    CHECK(ops[1].rb == 1);
}

TEST_CASE("sink checks come before the data-moving op") {
    auto img = isa::assemble("MOVI r2, 0x100\nLDR r3, [r2+4]\nHALT\n");
    auto blocks = taggrid::extract_blocks(img);
    auto ops = taggrid::compile_tagops(blocks[0], img, taggrid::Ruleset{}, 4);
    REQUIRE(ops.size() == 3);
    CHECK(ops[0].kind == TagOp::Kind::SetZero);
    CHECK(ops[1].kind == TagOp::Kind::SinkCheck);
    CHECK(ops[1].sink == SinkKind::LoadAddr);
    CHECK(ops[1].rd == 2);
    CHECK(ops[2].kind == TagOp::Kind::LoadTag);
    CHECK(ops[2].rd == 3);
}

TEST_CASE("ruleset gates drop sink checks as data") {
    auto img = isa::assemble("MOVI r2, 0x100\nLDR r3, [r2+4]\nHALT\n");
    taggrid::Ruleset rules;
    rules.emit_load_addr_sink = false;
    auto blocks = taggrid::extract_blocks(img);
    auto ops = taggrid::compile_tagops(blocks[0], img, rules, 4);
    REQUIRE(ops.size() == 2);
    CHECK(ops[1].kind == TagOp::Kind::LoadTag);
}

TEST_CASE("compile_program keys equal the block start set") {
    std::mt19937 rng(71);
    auto img =
        isa::assemble(randprog::generate_program(rng, randprog::GenOptions{}));
    auto blocks = taggrid::extract_blocks(img);
    auto prog = taggrid::compile_program(img, taggrid::Ruleset{}, 4);
    REQUIRE(prog.blocks.size() == blocks.size());
    for (const auto &b : blocks) {
        REQUIRE(prog.has_block(b.start));
        CHECK(prog.blocks.at(b.start).block == b);
    }

    auto single = isa::assemble("MOVI r0, 1\nHALT\n");
    CHECK(taggrid::compile_program(single, taggrid::Ruleset{}, 4).blocks.size() == 1);
}

TEST_CASE("compilation is deterministic") {
    std::mt19937 rng(81);
    auto img =
        isa::assemble(randprog::generate_program(rng, randprog::GenOptions{}));
    auto a = taggrid::compile_program(img, taggrid::Ruleset{}, 4);
    auto b = taggrid::compile_program(img, taggrid::Ruleset{}, 4);
    CHECK(a.blocks == b.blocks);
}

TEST_CASE("coverage: every executed flow block is compiled") {
    std::mt19937 rng(91);
    randprog::GenOptions opts;
    for (int i = 0; i < 10; ++i) {
        auto img = isa::assemble(randprog::generate_program(rng, opts));
        auto art = cpu::run(img, randprog::generate_inputs(rng, 8),
                            cpu::TraceConfig{}, default_policy(), 4);
        auto prog = taggrid::compile_program(img, taggrid::Ruleset{}, 4);
        for (std::uint32_t start : art.block_sequence)
            REQUIRE(prog.has_block(start));
    }
}

TEST_CASE("tag program dump is line oriented") {
    auto img = isa::assemble("MOV r1, r0\nHALT\n");
    auto prog = taggrid::compile_program(img, taggrid::Ruleset{}, 4);
    CHECK(taggrid::format_program(prog) == "block 0x100: copy r1<-r0\n");
}
