#ifndef LEVY_CONTRACT_NOISE_HPP
#define LEVY_CONTRACT_NOISE_HPP

#include "levy_contract/common.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <variant>
#include <vector>

namespace levy_contract {

/// Philox4x32-10 counter-based generator (Salmon et al. 2011).
///
/// The 128-bit counter is laid out as (block, lane, stream_lo, stream_hi) and
/// the 64-bit key is the seed, so every (seed, stream, lane) triple addresses
/// an independent sequence of 2^34 32-bit outputs without shared state.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;

  Philox4x32(std::uint64_t seed, std::uint64_t stream, std::uint32_t lane);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// One raw Philox4x32-10 block; exposed for known-answer tests.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key);

 private:
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> buffer_{};
  int index_ = 4;
};

/// Reproducible random stream owned by a single sample path.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id, std::uint32_t lane = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint32_t lane() const { return lane_; }

  /// Fresh stream with the same (seed, stream_id) on another lane.
  RandomStream substream(std::uint32_t lane) const { return {seed_, stream_id_, lane}; }

  /// Uniform on the open interval (0, 1) with 53-bit resolution.
  double uniform();
  double normal();
  double exponential(double rate);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint32_t lane_;
  Philox4x32 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct NoiseBounds {
  double gamma = 0.0;   // sup ||sigma(t,x)||_F
  double eta = 0.0;     // sup ||xi(t,x)||
  double lambda = 1.0;  // Poisson intensity, jumps per second

  void validate() const;
};

struct JumpRecord {
  std::vector<double> times;
  std::vector<Vector> marks;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  /// Number of jump times inside (w.start, w.end].
  int count_in(const Window& w) const;
  /// Throws InvalidInput on unsorted times, size mismatch or ||mark|| > eta.
  void validate(double eta) const;
};

// Mark laws. Every law must produce ||mark|| <= eta.
struct ConstantMark {
  Vector value;
};

struct UniformBallMark {
  int dim = 1;
  double radius = 1.0;
};

/// Isotropic N(0, sigma^2 I) conditioned on ||z|| <= eta.
struct TruncatedGaussianMark {
  int dim = 1;
  double sigma = 1.0;
};

/// User-supplied sampler. Only accepted with truncate_to_bound set, in which
/// case draws are radially clipped to the ball of radius eta.
struct CustomMark {
  std::function<Vector(RandomStream&)> sampler;
  bool truncate_to_bound = false;
};

using MarkLaw = std::variant<ConstantMark, UniformBallMark, TruncatedGaussianMark, CustomMark>;

/// Throws InvalidInput if the law can produce marks outside the eta-ball.
void validate_mark_law(const MarkLaw& law, double eta);
int mark_dimension(const MarkLaw& law);

Vector sample_mark(RandomStream& stream, const MarkLaw& law, double eta);
std::vector<Vector> sample_marks(RandomStream& stream, int k, const MarkLaw& law, double eta);

/// Arrival times of a rate-lambda Poisson process on (s, t], built from
/// cumulative exponential interarrivals.
std::vector<double> sample_poisson_times(RandomStream& stream, double lambda, const Window& window);

/// Exactly k arrival times: sorted i.i.d. uniforms on the window, i.e. the law of
/// a homogeneous Poisson process conditioned on k arrivals.
std::vector<double> sample_conditional_times(RandomStream& stream, int k, const Window& window);

/// Increments W(t_{i+1}) - W(t_i) ~ N(0, (t_{i+1} - t_i) I_dim), one per grid step.
std::vector<Vector> sample_brownian_increments(RandomStream& stream, std::span<const double> grid,
                                               int dim);

}  // namespace levy_contract

#endif  // LEVY_CONTRACT_NOISE_HPP
