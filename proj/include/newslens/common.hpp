#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace newslens {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Input that violates a documented schema or invariant.
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// A pipeline stage was asked to run before its upstream artifact exists
/// (or the upstream artifact is stale).
class DependencyError : public Error {
  public:
    using Error::Error;
};

// Calendar date in the proleptic Gregorian calendar.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    static Date parse(std::string_view iso);  // YYYY-MM-DD, throws ValidationError
    static Date from_days(std::int64_t days);
    std::int64_t days() const;  // days since 1970-01-01
    std::string str() const;
    Date add_days(std::int64_t n) const { return from_days(days() + n); }

    auto operator<=>(const Date&) const = default;
};

struct TimeOfDay {
    int hour = 0;
    int minute = 0;

    static TimeOfDay parse(std::string_view hhmm);  // HH:MM 24h
    std::string str() const;

    auto operator<=>(const TimeOfDay&) const = default;
};

// Calendar month, "YYYY-MM".
struct YearMonth {
    int year = 1970;
    int month = 1;

    static YearMonth parse(std::string_view text);
    std::string str() const;

    auto operator<=>(const YearMonth&) const = default;
};

// 64-bit FNV-1a. Used for content and config hashes that must be stable
// across platforms and standard library implementations.
class Fnv1a {
  public:
    Fnv1a& update(std::string_view bytes);
    Fnv1a& update_u64(std::uint64_t v);
    std::uint64_t digest() const { return state_; }
    std::string hex() const;

  private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

std::uint64_t splitmix64(std::uint64_t x);

/// Uniform integer in [0, n) from a standardized engine; unlike
/// std::uniform_int_distribution the sequence is identical across
/// standard library implementations.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n);
double uniform_unit(std::mt19937_64& rng);  // [0, 1)

template <class T>
void portable_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = uniform_index(rng, i);
        std::swap(v[i - 1], v[j]);
    }
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads with static chunking.
/// Callers write results into pre-sized slots so output order never depends
/// on scheduling.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

std::string to_lower_ascii(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);
std::string join(std::span<const std::string> parts, std::string_view sep);

// Reads a whole file; throws Error if it cannot be opened.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace newslens
