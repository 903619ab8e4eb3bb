#include "olia/signal.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "olia/error.hpp"
#include "olia/timing.hpp"

namespace olia::signal {

namespace {

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

// SplitMix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double to_open_unit(std::uint64_t x) noexcept {
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

void require_non_negative(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be finite and non-negative");
  }
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be finite and positive");
  }
}

// Exactly on an edge the value is the midpoint, 0, as in the Fourier series.
inline double square_value(double amplitude, double frequency, double t) noexcept {
  const double cycles = frequency * t;
  const double frac = cycles - std::floor(cycles);
  constexpr double kEdge = 1e-9;
  if (frac < kEdge || frac > 1.0 - kEdge || std::abs(frac - 0.5) < kEdge) return 0.0;
  return frac < 0.5 ? amplitude : -amplitude;
}

inline double sine_value(const Sine& s, double t) noexcept {
  const double cycles = s.frequency * t;
  const double frac = cycles - std::floor(cycles);
  return s.amplitude * std::sin(2.0 * std::numbers::pi * frac + s.phase);
}

inline std::int64_t draw_index(double rate, double t) noexcept {
  return static_cast<std::int64_t>(std::floor(t * rate));
}

} // namespace

SignalSpec::SignalSpec(Sine v) : node_(v) {
  require_non_negative(v.amplitude, "sine amplitude");
  require_positive(v.frequency, "sine frequency");
  if (!std::isfinite(v.phase)) throw Error(ErrorCode::InvalidArgument, "sine phase must be finite");
}

SignalSpec::SignalSpec(Square v) : node_(v) {
  require_non_negative(v.amplitude, "square amplitude");
  require_positive(v.frequency, "square frequency");
}

SignalSpec::SignalSpec(WhiteNoise v) : node_(v) {
  require_non_negative(v.rms, "noise rms");
  require_positive(v.rate, "noise draw rate");
}

SignalSpec::SignalSpec(ReferenceDriven v) : node_(v) {
  require_non_negative(v.amplitude, "reference-driven amplitude");
}

SignalSpec SignalSpec::step(SignalSpec inner, double t_on) {
  if (!std::isfinite(t_on)) throw Error(ErrorCode::InvalidArgument, "step onset must be finite");
  return SignalSpec(StepEnvelope{std::make_shared<const SignalSpec>(std::move(inner)), t_on});
}

SignalSpec SignalSpec::reseeded(std::uint64_t global_seed) const {
  if (global_seed == 0) return *this;
  return std::visit(
      [&](const auto& v) -> SignalSpec {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, WhiteNoise>) {
          WhiteNoise copy = v;
          copy.seed = mix64(v.seed ^ mix64(global_seed + kGoldenGamma));
          return SignalSpec(copy);
        } else if constexpr (std::is_same_v<T, Sum>) {
          Sum copy;
          for (const auto& p : v.parts) copy.parts.push_back(p.reseeded(global_seed));
          return SignalSpec(std::move(copy));
        } else if constexpr (std::is_same_v<T, StepEnvelope>) {
          return SignalSpec::step(v.inner->reseeded(global_seed), v.t_on);
        } else {
          return SignalSpec(v);
        }
      },
      node_);
}

SignalSpec operator+(SignalSpec a, SignalSpec b) {
  std::vector<SignalSpec> parts;
  for (auto* s : {&a, &b}) {
    if (const auto* sum = std::get_if<Sum>(&s->node())) {
      parts.insert(parts.end(), sum->parts.begin(), sum->parts.end());
    } else {
      parts.push_back(std::move(*s));
    }
  }
  return SignalSpec::sum(std::move(parts));
}

double ReferenceContext::level(double t) const noexcept {
  if (!active) return 0.0;
  const double ticks = (t - origin) / tick_period;
  const double nearest = std::round(ticks);
  auto high = [this](double k) {
    return k >= 0.0 && 2 * (static_cast<std::uint64_t>(k) % samples_per_period) < samples_per_period;
  };
  if (std::abs(ticks - nearest) < 1e-6) {
    const bool before = high(nearest - 1.0);
    const bool after = high(nearest);
    if (before != after) return 0.5;
    return after ? 1.0 : 0.0;
  }
  return high(std::floor(ticks)) ? 1.0 : 0.0;
}

namespace {

// Both Box-Muller outputs of counter pair `pair`: draws 2*pair and 2*pair + 1.
std::pair<double, double> gaussian_pair(std::uint64_t seed, std::uint64_t pair) noexcept {
  const std::uint64_t key = mix64(seed);
  const double u1 = to_open_unit(mix64(key + (2 * pair + 1) * kGoldenGamma));
  const double u2 = to_open_unit(mix64(key + (2 * pair + 2) * kGoldenGamma));
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(angle), r * std::sin(angle)};
}

} // namespace

double gaussian_draw(std::uint64_t seed, std::uint64_t index) noexcept {
  const auto [even, odd] = gaussian_pair(seed, index >> 1);
  return (index & 1) != 0 ? odd : even;
}

double generate(const SignalSpec& spec, double t, const ReferenceContext* ref) {
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Sine>) {
          return sine_value(v, t);
        } else if constexpr (std::is_same_v<T, Square>) {
          return square_value(v.amplitude, v.frequency, t);
        } else if constexpr (std::is_same_v<T, WhiteNoise>) {
          return v.rms * gaussian_draw(v.seed, static_cast<std::uint64_t>(draw_index(v.rate, t)));
        } else if constexpr (std::is_same_v<T, Sum>) {
          double acc = 0.0;
          for (const auto& p : v.parts) acc += generate(p, t, ref);
          return acc;
        } else if constexpr (std::is_same_v<T, StepEnvelope>) {
          return t < v.t_on ? 0.0 : generate(*v.inner, t, ref);
        } else {
          return ref != nullptr ? v.amplitude * ref->level(t) : 0.0;
        }
      },
      spec.node());
}

// ---------------------------------------------------------------------------

struct SignalSource::Compiled {
  enum class Kind { Sine, Square, Noise, Sum, Step, Reference } kind = Kind::Sum;
  Sine sine;
  double amplitude = 0.0;
  double frequency = 0.0;
  double t_on = 0.0;
  std::uint64_t seed = 0;
  std::int64_t cached_pair = std::numeric_limits<std::int64_t>::min();
  double cached_even = 0.0;
  double cached_odd = 0.0;
  std::vector<Compiled> children;
  // rotation per block step for sines, cached for the last step size
  double rot_h = -1.0;
  double rot_cos = 1.0;
  double rot_sin = 0.0;

  static Compiled from(const SignalSpec& spec) {
    Compiled c;
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Sine>) {
            c.kind = Kind::Sine;
            c.sine = v;
          } else if constexpr (std::is_same_v<T, Square>) {
            c.kind = Kind::Square;
            c.amplitude = v.amplitude;
            c.frequency = v.frequency;
          } else if constexpr (std::is_same_v<T, WhiteNoise>) {
            c.kind = Kind::Noise;
            c.amplitude = v.rms;
            c.frequency = v.rate;
            c.seed = v.seed;
          } else if constexpr (std::is_same_v<T, Sum>) {
            c.kind = Kind::Sum;
            for (const auto& p : v.parts) c.children.push_back(from(p));
          } else if constexpr (std::is_same_v<T, StepEnvelope>) {
            c.kind = Kind::Step;
            c.t_on = v.t_on;
            c.children.push_back(from(*v.inner));
          } else {
            c.kind = Kind::Reference;
            c.amplitude = v.amplitude;
          }
        },
        spec.node());
    return c;
  }

  double noise_value(std::int64_t index) {
    const auto u = static_cast<std::uint64_t>(index);
    const auto pair = static_cast<std::int64_t>(u >> 1);
    if (pair != cached_pair) {
      cached_pair = pair;
      const auto [even, odd] = gaussian_pair(seed, u >> 1);
      cached_even = amplitude * even;
      cached_odd = amplitude * odd;
    }
    return (u & 1) != 0 ? cached_odd : cached_even;
  }

  double eval(double t, const ReferenceContext* ref) {
    switch (kind) {
      case Kind::Sine: return sine_value(sine, t);
      case Kind::Square: return square_value(amplitude, frequency, t);
      case Kind::Noise: return noise_value(draw_index(frequency, t));
      case Kind::Sum: {
        double acc = 0.0;
        for (auto& ch : children) acc += ch.eval(t, ref);
        return acc;
      }
      case Kind::Step: return t < t_on ? 0.0 : children.front().eval(t, ref);
      case Kind::Reference: return ref != nullptr ? amplitude * ref->level(t) : 0.0;
    }
    return 0.0;
  }

  // Adds this node's values at t0 + j*h to out[j].
  void accumulate(double t0, double h, std::span<double> out, const ReferenceContext* ref) {
    const std::size_t n = out.size();
    switch (kind) {
      case Kind::Sine: {
        if (h != rot_h) {
          rot_h = h;
          const double step = 2.0 * std::numbers::pi * std::fmod(sine.frequency * h, 1.0);
          rot_cos = std::cos(step);
          rot_sin = std::sin(step);
        }
        const double cycles = sine.frequency * t0;
        const double angle = 2.0 * std::numbers::pi * (cycles - std::floor(cycles)) + sine.phase;
        double s = std::sin(angle);
        double c = std::cos(angle);
        for (std::size_t j = 0; j < n; ++j) {
          out[j] += sine.amplitude * s;
          const double s_next = s * rot_cos + c * rot_sin;
          c = c * rot_cos - s * rot_sin;
          s = s_next;
        }
        return;
      }
      case Kind::Sum:
        for (auto& ch : children) ch.accumulate(t0, h, out, ref);
        return;
      case Kind::Noise: {
        const auto first = draw_index(frequency, t0);
        if (first == draw_index(frequency, t0 + static_cast<double>(n - 1) * h)) {
          const double v = noise_value(first);
          for (auto& o : out) o += v;
          return;
        }
        for (std::size_t j = 0; j < n; ++j) out[j] += noise_value(draw_index(frequency, t0 + static_cast<double>(j) * h));
        return;
      }
      case Kind::Step: {
        std::size_t first = 0;
        while (first < n && t0 + static_cast<double>(first) * h < t_on) ++first;
        if (first < n) children.front().accumulate(t0 + static_cast<double>(first) * h, h, out.subspan(first), ref);
        return;
      }
      default:
        for (std::size_t j = 0; j < n; ++j) out[j] += eval(t0 + static_cast<double>(j) * h, ref);
        return;
    }
  }
};

SignalSource::SignalSource() : root_(std::make_unique<Compiled>()) {}
SignalSource::SignalSource(const SignalSpec& spec)
    : root_(std::make_unique<Compiled>(Compiled::from(spec))) {}
SignalSource::~SignalSource() = default;
SignalSource::SignalSource(SignalSource&&) noexcept = default;
SignalSource& SignalSource::operator=(SignalSource&&) noexcept = default;

double SignalSource::sample(double t, const ReferenceContext* ref) { return root_->eval(t, ref); }

void SignalSource::sample_block(double t0, double h, std::span<double> out, const ReferenceContext* ref) {
  std::fill(out.begin(), out.end(), 0.0);
  root_->accumulate(t0, h, out, ref);
}

// ---------------------------------------------------------------------------

namespace {

class Parser {
public:
  explicit Parser(std::string_view text) : text_(text) {}

  SignalSpec parse_all() {
    auto spec = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return spec;
  }

private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::Parse, "signal: " + msg + " at offset " + std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!consume(c)) fail(std::string("expected '") + c + "'");
  }

  std::string_view ident() {
    skip_ws();
    const auto start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("expected a signal name");
    return text_.substr(start, pos_ - start);
  }

  double number() {
    skip_ws();
    double v = 0.0;
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{}) fail("expected a number");
    pos_ += static_cast<std::size_t>(ptr - first);
    return v;
  }

  std::uint64_t integer() {
    skip_ws();
    std::uint64_t v = 0;
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{}) fail("expected a non-negative integer");
    pos_ += static_cast<std::size_t>(ptr - first);
    return v;
  }

  SignalSpec parse_expr() {
    std::vector<SignalSpec> terms;
    terms.push_back(parse_term());
    while (consume('+')) terms.push_back(parse_term());
    if (terms.size() == 1) return std::move(terms.front());
    return SignalSpec::sum(std::move(terms));
  }

  SignalSpec parse_term() {
    const auto name = ident();
    if (name == "zero") return SignalSpec{};
    expect('(');
    SignalSpec out;
    try {
      if (name == "sine") {
        Sine s;
        s.amplitude = number();
        expect(',');
        s.frequency = number();
        if (consume(',')) s.phase = number();
        out = SignalSpec(s);
      } else if (name == "square") {
        Square s;
        s.amplitude = number();
        expect(',');
        s.frequency = number();
        out = SignalSpec(s);
      } else if (name == "noise") {
        WhiteNoise n;
        n.rms = number();
        expect(',');
        n.seed = integer();
        if (consume(',')) n.rate = number();
        out = SignalSpec(n);
      } else if (name == "ref") {
        out = SignalSpec(ReferenceDriven{number()});
      } else if (name == "step") {
        auto inner = parse_expr();
        expect(',');
        out = SignalSpec::step(std::move(inner), number());
      } else if (name == "sum") {
        std::vector<SignalSpec> parts;
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] != ')') {
          parts.push_back(parse_expr());
          while (consume(',')) parts.push_back(parse_expr());
        }
        out = SignalSpec::sum(std::move(parts));
      } else {
        fail("unknown signal '" + std::string(name) + "'");
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Parse) throw;
      throw Error(ErrorCode::Parse, std::string("signal: ") + e.what());
    }
    expect(')');
    return out;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string num(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

} // namespace

SignalSpec parse_signal(std::string_view text) { return Parser(text).parse_all(); }

std::string to_string(const SignalSpec& spec) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Sine>) {
          return "sine(" + num(v.amplitude) + ", " + num(v.frequency) + ", " + num(v.phase) + ")";
        } else if constexpr (std::is_same_v<T, Square>) {
          return "square(" + num(v.amplitude) + ", " + num(v.frequency) + ")";
        } else if constexpr (std::is_same_v<T, WhiteNoise>) {
          return "noise(" + num(v.rms) + ", " + std::to_string(v.seed) + ", " + num(v.rate) + ")";
        } else if constexpr (std::is_same_v<T, Sum>) {
          if (v.parts.empty()) return "zero";
          std::string out = "sum(";
          for (std::size_t i = 0; i < v.parts.size(); ++i) {
            if (i) out += ", ";
            out += to_string(v.parts[i]);
          }
          return out + ")";
        } else if constexpr (std::is_same_v<T, StepEnvelope>) {
          return "step(" + to_string(*v.inner) + ", " + num(v.t_on) + ")";
        } else {
          return "ref(" + num(v.amplitude) + ")";
        }
      },
      spec.node());
}

std::vector<double> TtlReference::rising_edges(double t_begin, double t_end) const {
  std::vector<double> edges;
  if (!(frequency > 0.0) || !(t_end > t_begin)) return edges;
  const double offset = phase / (2.0 * std::numbers::pi);
  for (double j = std::ceil(t_begin * frequency + offset);; j += 1.0) {
    const double t = (j - offset) / frequency;
    if (t < t_begin) continue;
    if (t >= t_end) break;
    edges.push_back(t);
  }
  return edges;
}

double TtlReference::next_rising_edge(double t) const {
  const double offset = phase / (2.0 * std::numbers::pi);
  double j = std::ceil(t * frequency + offset);
  double edge = (j - offset) / frequency;
  while (edge < t) {
    j += 1.0;
    edge = (j - offset) / frequency;
  }
  return edge;
}

} // namespace olia::signal
