#include <doctest.h>

#include <random>

#include "dift/assembler.hpp"
#include "dift/cpu.hpp"
#include "dift/error.hpp"
#include "dift/pipeline.hpp"
#include "dift/randprog.hpp"

using namespace dift;

namespace {

struct Prepared {
    isa::ProgramImage img;
    cpu::RunArtifacts art;
    flow::WaypointMap map;
    taggrid::TagOpProgram prog;
    Policy policy;
};

Prepared prepare(std::mt19937 &rng, std::uint32_t width,
                 randprog::GenOptions opts = {}) {
    auto img = isa::assemble(randprog::generate_program(rng, opts));
    auto inputs = randprog::generate_inputs(rng, 8);
    Policy policy = randprog::generate_policy(rng, width);
    auto art = cpu::run(img, inputs, cpu::TraceConfig{}, policy, width);
    auto map = flow::WaypointMap::build(img);
    auto prog = taggrid::compile_program(img, taggrid::Ruleset{}, width);
    return {std::move(img), std::move(art), std::move(map), std::move(prog),
            policy};
}

} // namespace

TEST_CASE("stream output is bit-identical to batch for any capacity") {
    std::mt19937 rng(101);
    for (int i = 0; i < 15; ++i) {
        auto p = prepare(rng, 4);
        auto batch = pipeline::run_batch(p.art.trace, false, p.img, p.map,
                                         p.prog, p.art.memlog, p.policy, 4, 1, 1);
        for (std::size_t cap : {std::size_t{1}, std::size_t{3}, std::size_t{1024}}) {
            auto stream =
                pipeline::run_stream(p.art.trace, false, p.img, p.map, p.prog,
                                     p.art.memlog, p.policy, 4, 1, 1, cap);
            REQUIRE(stream == batch);
        }
    }
}

TEST_CASE("capacity-one pipeline terminates under backpressure") {
    std::mt19937 rng(103);
    randprog::GenOptions opts;
    opts.big_trace = true;
    auto p = prepare(rng, 4, opts);
    REQUIRE(p.art.trace.size() > 4096);
    auto batch = pipeline::run_batch(p.art.trace, false, p.img, p.map, p.prog,
                                     p.art.memlog, p.policy, 4, 1, 1);
    auto stream = pipeline::run_stream(p.art.trace, false, p.img, p.map, p.prog,
                                       p.art.memlog, p.policy, 4, 1, 1, 1);
    CHECK(stream == batch);
}

TEST_CASE("queue capacity zero is a configuration error") {
    std::mt19937 rng(105);
    auto p = prepare(rng, 4);
    CHECK_THROWS_AS(pipeline::run_stream(p.art.trace, false, p.img, p.map,
                                         p.prog, p.art.memlog, p.policy, 4, 1,
                                         1, 0),
                    Error);
}

TEST_CASE("stream mode propagates stage errors") {
    std::mt19937 rng(107);
    auto p = prepare(rng, 4);
    auto bad = p.art.trace;
    bad.push_back(0xEE); // unknown header at the tail
    CHECK_THROWS_AS(pipeline::run_stream(bad, false, p.img, p.map, p.prog,
                                         p.art.memlog, p.policy, 4, 1, 1, 8),
                    Error);
}

TEST_CASE("ETB resumption path works through both pipeline modes") {
    std::mt19937 rng(109);
    randprog::GenOptions opts;
    opts.big_trace = true;
    auto p = prepare(rng, 4, opts);
    REQUIRE(p.art.etb.wrapped);
    auto lin = pft::linearize_etb(p.art.etb);
    auto batch = pipeline::run_batch(lin, true, p.img, p.map, p.prog,
                                     p.art.memlog, p.policy, 4, 1, 1);
    auto stream = pipeline::run_stream(lin, true, p.img, p.map, p.prog,
                                       p.art.memlog, p.policy, 4, 1, 1, 4);
    CHECK(stream == batch);
}

TEST_CASE("a single flipped atom is caught, not absorbed") {
    // Mutation check: flipping one atom makes the reconstruction diverge
    // from the clean flow events or fail outright.
    std::mt19937 rng(111);
    int exercised = 0;
    for (int i = 0; i < 10; ++i) {
        auto p = prepare(rng, 4);
        auto [clean_pk, clean_diag] = pft::decode_stream(p.art.trace, false);
        auto clean = flow::reconstruct(clean_pk, p.map, p.img, 1);
        auto mutated = p.art.trace;
        std::size_t flip = std::string::npos;
        for (std::size_t k = 0; k < mutated.size(); ++k)
            if (mutated[k] == 0xA1 || mutated[k] == 0xA0) {
                flip = k;
                break;
            }
        if (flip == std::string::npos)
            continue;
        mutated[flip] ^= 0x01;
        ++exercised;
        bool diverged = false;
        try {
            auto [packets, diag] = pft::decode_stream(mutated, false);
            auto events = flow::reconstruct(packets, p.map, p.img, 1);
            diverged = !(events == clean);
        } catch (const Error &) {
            diverged = true;
        }
        REQUIRE(diverged);
    }
    CHECK(exercised > 0);
}

TEST_CASE("verify harness: empty corpus passes, smoke corpus passes") {
    auto empty = randprog::verify_corpus(0, 1, 4);
    CHECK(empty.failures == 0);
    auto smoke = randprog::verify_corpus(5, 12345, 4);
    INFO(smoke.first_divergence);
    CHECK(smoke.failures == 0);
}

TEST_CASE("verify verdict is deterministic for a fixed seed") {
    auto a = randprog::verify_corpus(3, 777, 4);
    auto b = randprog::verify_corpus(3, 777, 4);
    CHECK(a.failures == b.failures);
    CHECK(a.first_divergence == b.first_divergence);
}
