#include "dift/pipeline.hpp"

#include <exception>
#include <thread>

#include "dift/error.hpp"

namespace dift::pipeline {

engine::RunReport
run_batch(std::span<const std::uint8_t> trace_bytes, bool require_alignment,
          const isa::ProgramImage &program, const flow::WaypointMap &map,
          const taggrid::TagOpProgram &prog,
          std::span<const MemAccessRecord> memlog, const Policy &policy,
          std::uint32_t width, std::uint32_t granularity,
          std::uint32_t target_context) {
    auto [packets, diag] = pft::decode_stream(trace_bytes, require_alignment);
    auto events = require_alignment
                      ? flow::resume_from_partial(packets, map, program,
                                                  target_context)
                      : flow::reconstruct(packets, map, program, target_context);
    return engine::run(events, prog, memlog, policy, width, granularity);
}

engine::RunReport
run_stream(std::span<const std::uint8_t> trace_bytes, bool require_alignment,
           const isa::ProgramImage &program, const flow::WaypointMap &map,
           const taggrid::TagOpProgram &prog,
           std::span<const MemAccessRecord> memlog, const Policy &policy,
           std::uint32_t width, std::uint32_t granularity,
           std::uint32_t target_context, std::size_t queue_capacity) {
    if (queue_capacity < 1)
        throw Error(ErrorKind::InputError, "queue capacity must be >= 1");

    BoundedQueue<pft::TracePacket> packet_q(queue_capacity);
    BoundedQueue<flow::FlowEvent> event_q(queue_capacity);
    std::exception_ptr decode_err, rebuild_err, engine_err;

    std::thread decoder([&] {
        try {
            // The codec is batch over the byte window; stream delivery to
            // the reconstructor is packet-at-a-time through the queue.
            auto [packets, diag] =
                pft::decode_stream(trace_bytes, require_alignment);
            for (auto &p : packets)
                if (!packet_q.push(std::move(p)))
                    return; // downstream aborted
            packet_q.finish();
        } catch (...) {
            decode_err = std::current_exception();
            packet_q.finish();
        }
    });

    std::thread rebuilder([&] {
        flow::FlowReconstructor rec(map, program, target_context,
                                    require_alignment);
        std::vector<flow::FlowEvent> out;
        try {
            while (auto p = packet_q.pop()) {
                out.clear();
                rec.feed(*p, out);
                for (auto &e : out)
                    if (!event_q.push(e))
                        return;
            }
            if (!decode_err) {
                out.clear();
                rec.finish(out);
                for (auto &e : out)
                    if (!event_q.push(e))
                        return;
            }
            event_q.finish();
        } catch (...) {
            rebuild_err = std::current_exception();
            packet_q.close(); // release the decoder if it is blocked
            event_q.finish();
        }
    });

    engine::Engine eng(prog, memlog, policy, width, granularity);
    try {
        while (auto e = event_q.pop())
            if (!eng.on_event(*e)) {
                // stop_on_first tripped; drain upstream
                event_q.close();
                packet_q.close();
                break;
            }
    } catch (...) {
        engine_err = std::current_exception();
        event_q.close();
        packet_q.close();
    }

    decoder.join();
    rebuilder.join();
    if (decode_err)
        std::rethrow_exception(decode_err);
    if (rebuild_err)
        std::rethrow_exception(rebuild_err);
    if (engine_err)
        std::rethrow_exception(engine_err);
    return eng.take_report();
}

} // namespace dift::pipeline
