#pragma once

// Decoupled three-stage pipeline: decode -> flow rebuild -> DIFT engine,
// connected by bounded single-producer/single-consumer queues. Output is
// bit-identical to the batch path for any queue capacity >= 1.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <span>

#include "dift/engine.hpp"

namespace dift::pipeline {

template <typename T> class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

    // Blocks while full. Returns false if the consumer closed the queue.
    bool push(T item) {
        std::unique_lock lk(mu_);
        cv_pop_.wait(lk, [&] { return items_.size() < capacity_ || closed_; });
        if (closed_)
            return false;
        items_.push_back(std::move(item));
        cv_push_.notify_one();
        return true;
    }

    // Blocks while empty; nullopt once the producer finished (or closed).
    std::optional<T> pop() {
        std::unique_lock lk(mu_);
        cv_push_.wait(lk, [&] { return !items_.empty() || done_ || closed_; });
        if (items_.empty())
            return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        cv_pop_.notify_one();
        return item;
    }

    // Producer side: end of stream.
    void finish() {
        std::lock_guard lk(mu_);
        done_ = true;
        cv_push_.notify_all();
    }

    // Consumer side: abort upstream producers (error path).
    void close() {
        std::lock_guard lk(mu_);
        closed_ = true;
        cv_push_.notify_all();
        cv_pop_.notify_all();
    }

private:
    std::size_t capacity_;
    std::mutex mu_;
    std::condition_variable cv_push_, cv_pop_;
    std::deque<T> items_;
    bool done_ = false;
    bool closed_ = false;
};

// Runs the full pipeline over one raw trace, each stage on its own thread.
// require_alignment selects the ETB resumption path (skip to the first
// target-context I-sync). The first stage error, in pipeline order, is
// rethrown.
engine::RunReport
run_stream(std::span<const std::uint8_t> trace_bytes, bool require_alignment,
           const isa::ProgramImage &program, const flow::WaypointMap &map,
           const taggrid::TagOpProgram &prog,
           std::span<const MemAccessRecord> memlog, const Policy &policy,
           std::uint32_t width, std::uint32_t granularity,
           std::uint32_t target_context, std::size_t queue_capacity);

// Same inputs through the sequential batch path.
engine::RunReport
run_batch(std::span<const std::uint8_t> trace_bytes, bool require_alignment,
          const isa::ProgramImage &program, const flow::WaypointMap &map,
          const taggrid::TagOpProgram &prog,
          std::span<const MemAccessRecord> memlog, const Policy &policy,
          std::uint32_t width, std::uint32_t granularity,
          std::uint32_t target_context);

} // namespace dift::pipeline
