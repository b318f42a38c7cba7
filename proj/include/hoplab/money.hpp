#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace hoplab {

/// Exact decimal currency amount, stored as an integer count of 1e-15
/// currency units. Covers per-token prices down to 1e-12 per 1k tokens and
/// run totals far beyond any evaluation budget without rounding.
class Money {
public:
    Money() = default;

    /// Parses a non-negative decimal like "0.01" or "12.5" (up to 15
    /// fractional digits). Throws ConfigError on malformed input.
    static Money parse(std::string_view decimal);

    static Money from_femto(__int128 femto);

    /// price is per 1k tokens; the product is exact.
    static Money token_cost(long long tokens, const Money& price_per_1k);

    Money& operator+=(const Money& other);
    friend Money operator+(Money a, const Money& b) { return a += b; }
    auto operator<=>(const Money&) const = default;

    bool is_zero() const { return femto_ == 0; }
    double to_double() const;

    /// Canonical decimal rendering, trailing zeros trimmed ("0.07", "0", "1.25").
    std::string to_string() const;

private:
    __int128 femto_ = 0;
};

} // namespace hoplab
