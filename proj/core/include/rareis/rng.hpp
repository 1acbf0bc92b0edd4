#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace rareis {

/// Philox4x32-10 block function (Salmon et al., SC'11). Pure: the output
/// depends only on (counter, key).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Counter-based random stream. Draw i of stream (seed, stream_id) is a pure
/// function of those three numbers, so a stream can be copied, handed to
/// another worker or rebuilt from scratch and it yields the same sequence.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Number of 64-bit words consumed so far.
  std::uint64_t position() const noexcept { return 2 * block_ - buffered_; }

  std::uint64_t next_u64() noexcept;

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;

  /// Standard normal variate (Box-Muller).
  double normal() noexcept;

  void fill_normal(std::span<double> out) noexcept;

  /// Independent child stream, keyed by (seed, hash(stream_id, index)).
  RngStream substream(std::uint64_t index) const noexcept;

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  unsigned buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// Stream identifiers of the pipeline phases. Exploration and final phases
/// must never share a stream.
enum class StreamTag : std::uint64_t {
  kLadder = 1,
  kFinal = 2,
  kStrata = 3,
  kPilot = 4,
  kQuantile = 5,
  kUser = 100,
};

inline RngStream make_stream(std::uint64_t seed, StreamTag tag) noexcept {
  return RngStream(seed, static_cast<std::uint64_t>(tag));
}

}  // namespace rareis
