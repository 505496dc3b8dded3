#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "spherebev/detail/rng.hpp"

namespace spherebev {

enum class StreamId { lidar = 0, camera = 1, gnss = 2 };

inline const char* to_string(StreamId id) {
  switch (id) {
    case StreamId::lidar: return "lidar";
    case StreamId::camera: return "camera";
    case StreamId::gnss: return "gnss";
  }
  return "lidar";
}

inline std::optional<StreamId> stream_from_string(std::string_view s) {
  if (s == "lidar") return StreamId::lidar;
  if (s == "camera") return StreamId::camera;
  if (s == "gnss") return StreamId::gnss;
  return std::nullopt;
}

struct StampedMessage {
  StreamId stream = StreamId::lidar;
  double timestamp = 0.0;  ///< seconds; strictly increasing within a stream
  std::uint64_t payload_ref = 0;

  friend bool operator==(const StampedMessage&, const StampedMessage&) = default;
};

struct SyncConfig {
  StreamId reference = StreamId::lidar;
  std::size_t queue_size = 20;
  double slop = 0.03;  ///< max |member time - frame time|, seconds

  void validate() const {
    if (queue_size < 1) throw std::invalid_argument("SyncConfig: queue_size must be >= 1");
    if (!(slop >= 0.0)) throw std::invalid_argument("SyncConfig: slop must be >= 0");
  }
};

/// One message per participating stream, members ordered as the streams were
/// configured. frame_time is the reference member's timestamp and every
/// member lies within slop of it.
struct SyncedFrame {
  double frame_time = 0.0;
  std::vector<StampedMessage> members;

  friend bool operator==(const SyncedFrame&, const SyncedFrame&) = default;
};

/// Approximate-time synchronizer anchored on a reference stream.
///
/// Messages are queued per stream (bounded, oldest evicted). A queued
/// reference message emits a frame once every other stream holds an in-slop
/// candidate AND the nearest candidate is provably final, i.e. the stream has
/// already seen a message at or past the reference time so nothing closer can
/// still arrive. Emission pairs the reference with the nearest-in-time
/// candidate per stream (ties to the earlier message) and drops the consumed
/// messages together with everything older in their queues, which also keeps
/// frame times strictly increasing. flush() relaxes the finality requirement
/// for end-of-stream draining.
///
/// Single-writer contract: push calls must be externally serialized.
class Synchronizer {
 public:
  Synchronizer(std::vector<StreamId> streams, SyncConfig cfg)
      : cfg_(cfg), streams_(std::move(streams)), queues_(streams_.size()),
        last_seen_(streams_.size(), -std::numeric_limits<double>::infinity()) {
    cfg_.validate();
    if (streams_.empty()) throw std::invalid_argument("Synchronizer: no streams");
    for (std::size_t i = 0; i < streams_.size(); ++i) {
      for (std::size_t j = i + 1; j < streams_.size(); ++j) {
        if (streams_[i] == streams_[j]) {
          throw std::invalid_argument("Synchronizer: duplicate stream");
        }
      }
    }
    reference_index_ = index_of(cfg_.reference);
  }

  const SyncConfig& config() const { return cfg_; }
  const std::vector<StreamId>& streams() const { return streams_; }
  std::size_t queue_depth(StreamId id) const { return queues_[index_of(id)].size(); }

  /// Enqueues one message and returns any frames it completes. Rejects
  /// timestamps that do not strictly increase within their stream.
  std::vector<SyncedFrame> push(const StampedMessage& msg) {
    const std::size_t idx = index_of(msg.stream);
    if (!(msg.timestamp > last_seen_[idx])) {
      throw std::invalid_argument("Synchronizer: out-of-order timestamp");
    }
    last_seen_[idx] = msg.timestamp;
    queues_[idx].push_back(msg);
    if (queues_[idx].size() > cfg_.queue_size) queues_[idx].pop_front();
    return drain(false);
  }

  /// End-of-input: emits frames for reference messages that are satisfiable
  /// with the queues as they stand.
  std::vector<SyncedFrame> flush() { return drain(true); }

 private:
  std::size_t index_of(StreamId id) const {
    for (std::size_t i = 0; i < streams_.size(); ++i) {
      if (streams_[i] == id) return i;
    }
    throw std::invalid_argument("Synchronizer: unknown stream");
  }

  /// Nearest-in-time queue position to t; earlier message wins ties.
  static std::size_t nearest_position(const std::deque<StampedMessage>& queue, double t) {
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < queue.size(); ++i) {
      const double dist = std::abs(queue[i].timestamp - t);
      if (dist < best_dist) {
        best_dist = dist;
        best = i;
      }
    }
    return best;
  }

  std::vector<SyncedFrame> drain(bool final) {
    std::vector<SyncedFrame> emitted;
    bool progressed = true;
    while (progressed) {
      progressed = false;
      std::deque<StampedMessage>& refs = queues_[reference_index_];
      for (std::size_t ri = 0; ri < refs.size(); ++ri) {
        const double t = refs[ri].timestamp;
        std::vector<std::size_t> chosen(streams_.size());
        chosen[reference_index_] = ri;
        bool ok = true;
        for (std::size_t s = 0; s < streams_.size() && ok; ++s) {
          if (s == reference_index_) continue;
          const auto& queue = queues_[s];
          if (queue.empty()) {
            ok = false;
            break;
          }
          const std::size_t pos = nearest_position(queue, t);
          if (std::abs(queue[pos].timestamp - t) > cfg_.slop) {
            ok = false;
            break;
          }
          // Finality: a message at or past t proves the nearest candidate
          // cannot be beaten by anything still in flight.
          if (!final && queue.back().timestamp < t) {
            ok = false;
            break;
          }
          chosen[s] = pos;
        }
        if (!ok) continue;

        SyncedFrame frame;
        frame.frame_time = t;
        frame.members.reserve(streams_.size());
        for (std::size_t s = 0; s < streams_.size(); ++s) {
          frame.members.push_back(queues_[s][chosen[s]]);
        }
        for (std::size_t s = 0; s < streams_.size(); ++s) {
          auto& queue = queues_[s];
          queue.erase(queue.begin(), queue.begin() + static_cast<std::ptrdiff_t>(chosen[s] + 1));
        }
        emitted.push_back(std::move(frame));
        progressed = true;
        break;  // queues changed; rescan from the oldest reference
      }
    }
    return emitted;
  }

  SyncConfig cfg_;
  std::vector<StreamId> streams_;
  std::vector<std::deque<StampedMessage>> queues_;
  std::vector<double> last_seen_;
  std::size_t reference_index_ = 0;
};

struct StreamRate {
  StreamId stream = StreamId::lidar;
  double hz = 10.0;
};

struct SyncStats {
  std::size_t frames_emitted = 0;
  std::size_t reference_messages = 0;
  double match_rate = 0.0;
  std::vector<std::pair<StreamId, double>> mean_abs_dt;  ///< per participating stream
};

struct SimulationResult {
  std::vector<StampedMessage> trace;  ///< global feed order: (timestamp, stream)
  std::vector<SyncedFrame> frames;
  SyncStats stats;
};

/// Frame statistics for a trace that was fed through a synchronizer.
inline SyncStats compute_stats(std::span<const SyncedFrame> frames,
                               std::span<const StampedMessage> trace,
                               std::span<const StreamId> streams, const SyncConfig& cfg) {
  SyncStats stats;
  stats.frames_emitted = frames.size();
  for (const StampedMessage& msg : trace) {
    if (msg.stream == cfg.reference) ++stats.reference_messages;
  }
  stats.match_rate = stats.reference_messages == 0
      ? 0.0
      : static_cast<double>(frames.size()) / static_cast<double>(stats.reference_messages);
  for (std::size_t s = 0; s < streams.size(); ++s) {
    double sum = 0.0;
    for (const SyncedFrame& frame : frames) {
      sum += std::abs(frame.members[s].timestamp - frame.frame_time);
    }
    stats.mean_abs_dt.emplace_back(
        streams[s], frames.empty() ? 0.0 : sum / static_cast<double>(frames.size()));
  }
  return stats;
}

/// Generates multi-rate streams (phases aligned at t = 0, optional Gaussian
/// timestamp jitter), feeds them through a Synchronizer in global
/// (timestamp, stream) order and reports the emitted frames plus statistics.
/// Deterministic for a fixed seed.
inline SimulationResult run_simulation(std::span<const StreamRate> rates, double jitter_std,
                                       double duration, const SyncConfig& cfg,
                                       std::uint64_t seed) {
  if (rates.empty()) throw std::invalid_argument("run_simulation: no streams");
  if (!(duration >= 0.0) || !(jitter_std >= 0.0)) {
    throw std::invalid_argument("run_simulation: duration and jitter must be >= 0");
  }
  std::vector<StreamId> streams;
  for (const StreamRate& rate : rates) {
    if (!(rate.hz > 0.0)) throw std::invalid_argument("run_simulation: rates must be positive");
    streams.push_back(rate.stream);
  }

  detail::Rng rng(seed);
  SimulationResult result;
  for (const StreamRate& rate : rates) {
    std::vector<double> times;
    const double period = 1.0 / rate.hz;
    for (std::size_t k = 0;; ++k) {
      const double nominal = static_cast<double>(k) * period;
      if (nominal > duration + 1e-12) break;
      times.push_back(jitter_std > 0.0 ? nominal + jitter_std * rng.gaussian() : nominal);
    }
    std::sort(times.begin(), times.end());
    for (std::size_t i = 1; i < times.size(); ++i) {  // enforce strict monotonicity
      times[i] = std::max(times[i], times[i - 1] + 1e-9);
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
      result.trace.push_back({rate.stream, times[i], i});
    }
  }
  std::stable_sort(result.trace.begin(), result.trace.end(),
                   [](const StampedMessage& a, const StampedMessage& b) {
                     if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                     return static_cast<int>(a.stream) < static_cast<int>(b.stream);
                   });

  Synchronizer sync(streams, cfg);
  for (const StampedMessage& msg : result.trace) {
    auto frames = sync.push(msg);
    result.frames.insert(result.frames.end(), frames.begin(), frames.end());
  }
  auto tail = sync.flush();
  result.frames.insert(result.frames.end(), tail.begin(), tail.end());
  result.stats = compute_stats(result.frames, result.trace, streams, cfg);
  return result;
}

}  // namespace spherebev
