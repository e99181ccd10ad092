#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace novelbench {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

class DataError : public Error {
  public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Research fields
// ---------------------------------------------------------------------------

enum class Field : std::uint8_t { Cs, Math, Physics, QBio, QFin, Stat };

inline constexpr std::array<Field, 6> kAllFields = {Field::Cs,   Field::Math, Field::Physics,
                                                    Field::QBio, Field::QFin, Field::Stat};

/// Short arXiv-style name: "cs", "math", "physics", "q-bio", "q-fin", "stat".
std::string_view to_string(Field field);

/// Human-readable name used in prompts ("Computer Science", ...).
std::string_view display_name(Field field);

std::optional<Field> parse_field(std::string_view name);

/// Maps an arXiv category token ("cs.CL", "hep-th", "q-bio.NC") to one of the
/// six fields using the archive-to-group taxonomy. Returns nullopt for
/// categories outside the six (econ, eess, unknown).
std::optional<Field> field_from_category(std::string_view category);

// ---------------------------------------------------------------------------
// Calendar dates
// ---------------------------------------------------------------------------

/// A calendar day. Stored as days since 1970-01-01.
class Date {
  public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}
    Date(int year, unsigned month, unsigned day);

    static constexpr Date from_days(std::int64_t days_since_epoch) {
        return Date(std::chrono::sys_days(std::chrono::days(days_since_epoch)));
    }

    /// Accepts "YYYY-MM-DD" (optionally followed by a time part) and the
    /// RFC 1123 form used by arXiv version stamps ("Mon, 2 Apr 2007 19:18:42 GMT").
    static std::optional<Date> parse(std::string_view text);

    [[nodiscard]] constexpr std::int64_t days_since_epoch() const {
        return days_.time_since_epoch().count();
    }
    [[nodiscard]] int year() const;
    [[nodiscard]] std::string iso() const;

    friend constexpr auto operator<=>(const Date&, const Date&) = default;

  private:
    std::chrono::sys_days days_{};
};

// ---------------------------------------------------------------------------
// Text and hashing helpers
// ---------------------------------------------------------------------------

/// Collapses runs of whitespace to a single space and trims both ends.
std::string normalize_whitespace(std::string_view text);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// SplitMix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic across platforms: std::uniform_int_distribution is
/// implementation-defined, so bounded draws use rejection on the raw 64-bit
/// output of a SplitMix64 stream.
class SeededRng {
  public:
    explicit SeededRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  private:
    std::uint64_t state_;
};

}  // namespace novelbench
