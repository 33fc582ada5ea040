#include "levy_contract/noise.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace levy_contract {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

Vector random_direction(RandomStream& stream, int dim) {
  Vector v(dim);
  double norm = 0.0;
  do {
    for (int i = 0; i < dim; ++i) v[i] = stream.normal();
    norm = v.norm();
  } while (norm == 0.0);
  return v / norm;
}

}  // namespace

Philox4x32::Philox4x32(std::uint64_t seed, std::uint64_t stream, std::uint32_t lane)
    : counter_{0u, lane, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
      key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

std::array<std::uint32_t, 4> Philox4x32::block(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

Philox4x32::result_type Philox4x32::operator()() {
  if (index_ == 4) {
    if (counter_[0] == std::numeric_limits<std::uint32_t>::max()) {
      throw std::length_error("Philox4x32: block counter exhausted for this lane");
    }
    buffer_ = block(counter_, key_);
    ++counter_[0];
    index_ = 0;
  }
  return buffer_[index_++];
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id, std::uint32_t lane)
    : seed_(seed), stream_id_(stream_id), lane_(lane), engine_(seed, stream_id, lane) {}

double RandomStream::uniform() {
  const std::uint64_t a = engine_() >> 5;  // 27 bits
  const std::uint64_t b = engine_() >> 6;  // 26 bits
  const std::uint64_t bits = (a << 26) | b;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() { return normal_(engine_); }

double RandomStream::exponential(double rate) { return -std::log(uniform()) / rate; }

void NoiseBounds::validate() const {
  if (!(gamma >= 0.0)) throw InvalidInput("noise bound gamma must be >= 0");
  if (!(eta >= 0.0)) throw InvalidInput("noise bound eta must be >= 0");
  if (!(lambda > 0.0)) throw InvalidInput("Poisson intensity lambda must be > 0");
}

int JumpRecord::count_in(const Window& w) const {
  return static_cast<int>(std::count_if(times.begin(), times.end(),
                                        [&](double t) { return t > w.start && t <= w.end; }));
}

void JumpRecord::validate(double eta) const {
  if (times.size() != marks.size()) {
    throw InvalidInput("jump record has " + std::to_string(times.size()) + " times but " +
                       std::to_string(marks.size()) + " marks");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw InvalidInput("jump times must be strictly increasing");
  }
  const double slack = 1e-12 * std::max(1.0, eta);
  for (const auto& m : marks) {
    if (m.norm() > eta + slack) {
      throw InvalidInput("jump mark norm " + std::to_string(m.norm()) + " exceeds eta " +
                         std::to_string(eta));
    }
  }
}

int mark_dimension(const MarkLaw& law) {
  return std::visit(
      [](const auto& l) -> int {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, ConstantMark>) {
          return static_cast<int>(l.value.size());
        } else if constexpr (std::is_same_v<T, CustomMark>) {
          return -1;
        } else {
          return l.dim;
        }
      },
      law);
}

void validate_mark_law(const MarkLaw& law, double eta) {
  if (!(eta > 0.0)) throw InvalidInput("mark law requires eta > 0");
  std::visit(
      [eta](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, ConstantMark>) {
          if (l.value.size() == 0) throw InvalidInput("constant mark is empty");
          if (l.value.norm() > eta * (1.0 + 1e-12)) {
            throw InvalidInput("constant mark norm exceeds eta");
          }
        } else if constexpr (std::is_same_v<T, UniformBallMark>) {
          if (l.dim < 1) throw InvalidInput("uniform-ball mark needs dim >= 1");
          if (!(l.radius > 0.0) || l.radius > eta) {
            throw InvalidInput("uniform-ball radius must lie in (0, eta]");
          }
        } else if constexpr (std::is_same_v<T, TruncatedGaussianMark>) {
          if (l.dim < 1) throw InvalidInput("truncated-Gaussian mark needs dim >= 1");
          if (!(l.sigma > 0.0)) throw InvalidInput("truncated-Gaussian sigma must be > 0");
        } else {
          if (!l.sampler) throw InvalidInput("custom mark law has no sampler");
          if (!l.truncate_to_bound) {
            throw InvalidInput(
                "custom mark law must enable truncate_to_bound; unbounded marks break every bound");
          }
        }
      },
      law);
}

Vector sample_mark(RandomStream& stream, const MarkLaw& law, double eta) {
  return std::visit(
      [&](const auto& l) -> Vector {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, ConstantMark>) {
          return l.value;
        } else if constexpr (std::is_same_v<T, UniformBallMark>) {
          const double r = l.radius * std::pow(stream.uniform(), 1.0 / l.dim);
          return r * random_direction(stream, l.dim);
        } else if constexpr (std::is_same_v<T, TruncatedGaussianMark>) {
          // ||z||^2 / (2 sigma^2) ~ Gamma(dim/2), truncated at eta^2 / (2 sigma^2).
          const double shape = 0.5 * l.dim;
          const double cap = boost::math::gamma_p(shape, eta * eta / (2.0 * l.sigma * l.sigma));
          const double g = boost::math::gamma_p_inv(shape, stream.uniform() * cap);
          const double r = std::min(eta, l.sigma * std::sqrt(2.0 * g));
          return r * random_direction(stream, l.dim);
        } else {
          Vector v = l.sampler(stream);
          const double n = v.norm();
          if (n > eta) v *= eta / n;
          return v;
        }
      },
      law);
}

std::vector<Vector> sample_marks(RandomStream& stream, int k, const MarkLaw& law, double eta) {
  if (k < 0) throw InvalidInput("mark count must be >= 0");
  validate_mark_law(law, eta);
  std::vector<Vector> marks;
  marks.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) marks.push_back(sample_mark(stream, law, eta));
  return marks;
}

std::vector<double> sample_poisson_times(RandomStream& stream, double lambda, const Window& window) {
  if (!(window.start < window.end)) throw InvalidInput("Poisson window requires s < t");
  if (!(lambda > 0.0)) throw InvalidInput("Poisson intensity must be > 0");
  std::vector<double> times;
  double t = window.start;
  while (true) {
    t += stream.exponential(lambda);
    if (t > window.end) break;
    times.push_back(t);
  }
  return times;
}

std::vector<double> sample_conditional_times(RandomStream& stream, int k, const Window& window) {
  if (k < 0) throw InvalidInput("conditional jump count must be >= 0");
  if (!(window.start < window.end)) throw InvalidInput("conditional window requires s < t");
  std::vector<double> times(static_cast<std::size_t>(k));
  for (auto& t : times) t = window.start + window.length() * stream.uniform();
  std::sort(times.begin(), times.end());
  return times;
}

std::vector<Vector> sample_brownian_increments(RandomStream& stream, std::span<const double> grid,
                                               int dim) {
  if (dim < 1) throw InvalidInput("Brownian dimension must be >= 1");
  std::vector<Vector> increments;
  if (grid.size() < 2) return increments;
  increments.reserve(grid.size() - 1);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double h = grid[i + 1] - grid[i];
    if (h < 0.0) throw InvalidInput("Brownian grid must be nondecreasing");
    Vector dw(dim);
    const double scale = std::sqrt(h);
    for (int j = 0; j < dim; ++j) dw[j] = scale * stream.normal();
    increments.push_back(std::move(dw));
  }
  return increments;
}

}  // namespace levy_contract
