#include <doctest.h>

#include <random>

#include "dift/assembler.hpp"
#include "dift/cpu.hpp"
#include "dift/error.hpp"
#include "dift/flow.hpp"
#include "dift/randprog.hpp"

using namespace dift;
using flow::FlowEvent;

namespace {

// Brute-force per-address scan used as the map oracle.
flow::Waypoint scan_next_branch(const isa::ProgramImage &img, std::uint32_t addr) {
    for (std::uint32_t a = addr; a < img.end(); a += 4) {
        const auto &inst = img.at(a);
        if (inst.op == isa::Op::Halt)
            return {a, flow::WaypointKind::Halt, 0};
        if (inst.is_branch()) {
            flow::WaypointKind k = inst.op == isa::Op::Bx ? flow::WaypointKind::Indirect
                                   : inst.op == isa::Op::Bl ? flow::WaypointKind::Call
                                                            : flow::WaypointKind::Direct;
            return {a, k, inst.is_direct_branch() ? inst.target(a) : 0};
        }
    }
    FAIL("no waypoint ahead");
    return {};
}

std::vector<FlowEvent> rebuild(const cpu::RunArtifacts &art,
                               const isa::ProgramImage &img,
                               std::uint32_t ctx = 1) {
    auto [packets, diag] = pft::decode_stream(art.trace, false);
    auto map = flow::WaypointMap::build(img);
    return flow::reconstruct(packets, map, img, ctx);
}

} // namespace

TEST_CASE("waypoint map follows the scan rule") {
    auto img = isa::assemble("MOVI r0, 1\nADD r1, r0, r0\nB x\nx: HALT\n");
    auto map = flow::WaypointMap::build(img);
    CHECK(map.next_branch(0x100).addr == 0x108);
    CHECK(map.next_branch(0x100).kind == flow::WaypointKind::Direct);
    CHECK(map.next_branch(0x108).addr == 0x108);

    auto halt_only = isa::assemble("HALT\n");
    auto hmap = flow::WaypointMap::build(halt_only);
    CHECK(hmap.next_branch(0x100).addr == 0x100);
    CHECK(hmap.next_branch(0x100).kind == flow::WaypointKind::Halt);
}

TEST_CASE("waypoint map agrees with the brute-force oracle") {
    std::mt19937 rng(21);
    randprog::GenOptions opts;
    for (int i = 0; i < 15; ++i) {
        auto img = isa::assemble(randprog::generate_program(rng, opts));
        auto map = flow::WaypointMap::build(img);
        for (std::uint32_t a = img.base; a < img.end(); a += 4) {
            auto expect = scan_next_branch(img, a);
            const auto &got = map.next_branch(a);
            REQUIRE(got.addr == expect.addr);
            REQUIRE(got.kind == expect.kind);
            REQUIRE(got.static_target == expect.static_target);
        }
    }
}

TEST_CASE("sync-only trace reconstructs the halt block") {
    auto img = isa::assemble("HALT\n");
    auto map = flow::WaypointMap::build(img);
    std::vector<pft::TracePacket> packets = {pft::ASync{}, pft::ISync{0x100, 1}};
    auto events = flow::reconstruct(packets, map, img, 1);
    REQUIRE(events.size() == 1);
    CHECK(events[0] ==
          FlowEvent{0x100, 0x100, FlowEvent::Outcome::Halt, 0});
}

TEST_CASE("N-atom yields fallthrough then halt") {
    auto img = isa::assemble("BNZ r0, L\nL: HALT\n");
    auto art = cpu::run(img, {}, cpu::TraceConfig{}, default_policy(), 4);
    auto events = rebuild(art, img);
    REQUIRE(events.size() == 2);
    CHECK(events[0].outcome == FlowEvent::Outcome::Fallthrough);
    CHECK(events[0].block_end == 0x100);
    CHECK(events[1].outcome == FlowEvent::Outcome::Halt);
}

TEST_CASE("reconstruction matches the simulator block sequence") {
    std::mt19937 rng(31);
    randprog::GenOptions opts;
    for (int i = 0; i < 30; ++i) {
        auto img = isa::assemble(randprog::generate_program(rng, opts));
        auto art = cpu::run(img, randprog::generate_inputs(rng, 8),
                            cpu::TraceConfig{}, default_policy(), 4);
        auto events = rebuild(art, img);
        REQUIRE(events.size() == art.block_sequence.size());
        std::size_t atoms = 0;
        for (std::size_t k = 0; k < events.size(); ++k) {
            REQUIRE(events[k].block_start == art.block_sequence[k]);
            if (events[k].outcome != FlowEvent::Outcome::Halt)
                ++atoms;
        }
        // atom conservation: one taken/fallthrough event per atom
        auto [packets, diag] = pft::decode_stream(art.trace, false);
        std::size_t atom_packets = 0;
        for (const auto &p : packets)
            atom_packets += std::holds_alternative<pft::Atom>(p);
        CHECK(atoms == atom_packets);
    }
}

TEST_CASE("foreign-context noise never changes the reconstruction") {
    std::mt19937 rng(41);
    randprog::GenOptions opts;
    for (int i = 0; i < 15; ++i) {
        auto img = isa::assemble(randprog::generate_program(rng, opts));
        auto art = cpu::run(img, randprog::generate_inputs(rng, 8),
                            cpu::TraceConfig{}, default_policy(), 4);
        auto clean = rebuild(art, img);

        auto [packets, diag] = pft::decode_stream(art.trace, false);
        std::uniform_int_distribution<std::size_t> at(0, packets.size());
        std::uniform_int_distribution<int> n_noise(0, 8);
        std::vector<cpu::NoiseInsertion> ins;
        for (int k = 0; k < 4; ++k) {
            cpu::NoiseInsertion one;
            one.packet_index = at(rng);
            int n = n_noise(rng);
            for (int j = 0; j < n; ++j) {
                if (rng() % 4 == 0)
                    one.packets.emplace_back(pft::BranchAddr{static_cast<std::uint32_t>((rng() & 0xFFFF) * 4), false});
                else
                    one.packets.emplace_back(pft::Atom{(rng() & 1) != 0});
            }
            ins.push_back(std::move(one));
        }
        auto noised = cpu::inject_context_noise(art.trace, 0xBEEF, ins);
        auto [np, nd] = pft::decode_stream(noised, false);
        auto map = flow::WaypointMap::build(img);
        auto got = flow::reconstruct(np, map, img, 1);
        REQUIRE(got == clean);
    }
}

TEST_CASE("resume from an ETB snapshot yields an I-sync-aligned suffix") {
    std::mt19937 rng(51);
    randprog::GenOptions opts;
    opts.big_trace = true;
    auto img = isa::assemble(randprog::generate_program(rng, opts));
    auto art = cpu::run(img, randprog::generate_inputs(rng, 8),
                        cpu::TraceConfig{}, default_policy(), 4);
    REQUIRE(art.trace.size() > pft::kEtbPayloadSize);
    REQUIRE(art.etb.wrapped);

    auto full = rebuild(art, img);
    auto lin = pft::linearize_etb(art.etb);
    auto [packets, diag] = pft::decode_stream(lin, true);
    auto map = flow::WaypointMap::build(img);
    auto partial = flow::resume_from_partial(packets, map, img, 1);

    REQUIRE(partial.size() <= full.size());
    REQUIRE(!partial.empty());
    std::vector<FlowEvent> tail(full.end() - partial.size(), full.end());
    CHECK(partial == tail);
}

TEST_CASE("resume without a target-context I-sync is unrecoverable") {
    auto img = isa::assemble("HALT\n");
    auto map = flow::WaypointMap::build(img);

    std::vector<pft::TracePacket> foreign = {pft::ASync{}, pft::ISync{0x100, 7}};
    CHECK_THROWS_AS(flow::resume_from_partial(foreign, map, img, 1), Error);
    CHECK_THROWS_AS(
        flow::resume_from_partial(std::vector<pft::TracePacket>{}, map, img, 1),
        Error);
    try {
        flow::resume_from_partial(foreign, map, img, 1);
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::TraceUnrecoverable);
    }
}

TEST_CASE("desync and protocol errors are hard failures") {
    auto img = isa::assemble("B L\nL: HALT\n");
    auto map = flow::WaypointMap::build(img);

    // mid-stream I-sync that contradicts the cursor
    std::vector<pft::TracePacket> bad = {pft::ASync{}, pft::ISync{0x100, 1},
                                         pft::Atom{true}, pft::ASync{},
                                         pft::ISync{0x100, 1}};
    CHECK_THROWS_AS(flow::reconstruct(bad, map, img, 1), Error);

    // atom before any I-sync
    std::vector<pft::TracePacket> early = {pft::Atom{true}};
    CHECK_THROWS_AS(flow::reconstruct(early, map, img, 1), Error);

    // E-atom on an indirect branch with no following branch address
    auto bx = isa::assemble("MOVI r1, done\nBX r1\ndone: HALT\n");
    auto bxmap = flow::WaypointMap::build(bx);
    std::vector<pft::TracePacket> noaddr = {pft::ASync{}, pft::ISync{0x100, 1},
                                            pft::Atom{true}};
    CHECK_THROWS_AS(flow::reconstruct(noaddr, bxmap, bx, 1), Error);
}
