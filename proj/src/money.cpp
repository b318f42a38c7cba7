#include "hoplab/money.hpp"

#include <algorithm>
#include <cctype>

#include "hoplab/errors.hpp"

namespace hoplab {

namespace {
constexpr int kFracDigits = 15;

__int128 pow10_128(int n) {
    __int128 v = 1;
    for (int i = 0; i < n; ++i) v *= 10;
    return v;
}
} // namespace

Money Money::parse(std::string_view decimal) {
    if (decimal.empty()) throw ConfigError("empty money literal");
    std::size_t i = 0;
    __int128 whole = 0;
    bool any_digit = false;
    while (i < decimal.size() && std::isdigit(static_cast<unsigned char>(decimal[i]))) {
        whole = whole * 10 + (decimal[i] - '0');
        any_digit = true;
        ++i;
    }
    __int128 frac = 0;
    int frac_digits = 0;
    if (i < decimal.size() && decimal[i] == '.') {
        ++i;
        while (i < decimal.size() && std::isdigit(static_cast<unsigned char>(decimal[i]))) {
            if (frac_digits >= kFracDigits) {
                throw ConfigError("money literal has more than 15 fractional digits: " +
                                  std::string(decimal));
            }
            frac = frac * 10 + (decimal[i] - '0');
            ++frac_digits;
            any_digit = true;
            ++i;
        }
    }
    if (!any_digit || i != decimal.size()) {
        throw ConfigError("malformed money literal: " + std::string(decimal));
    }
    Money m;
    m.femto_ = whole * pow10_128(kFracDigits) + frac * pow10_128(kFracDigits - frac_digits);
    return m;
}

Money Money::from_femto(__int128 femto) {
    Money m;
    m.femto_ = femto;
    return m;
}

Money Money::token_cost(long long tokens, const Money& price_per_1k) {
    // tokens/1000 * price: the femto representation keeps three spare decimal
    // digits relative to a picodigit price, so dividing by 1000 stays exact.
    Money m;
    m.femto_ = price_per_1k.femto_ * tokens / 1000;
    if ((price_per_1k.femto_ * tokens) % 1000 != 0) {
        throw ConfigError("price precision exceeds exact range; use <= 12 fractional digits");
    }
    return m;
}

Money& Money::operator+=(const Money& other) {
    femto_ += other.femto_;
    return *this;
}

double Money::to_double() const { return static_cast<double>(femto_) / 1e15; }

std::string Money::to_string() const {
    __int128 v = femto_;
    bool neg = v < 0;
    if (neg) v = -v;
    const __int128 scale = pow10_128(kFracDigits);
    __int128 whole = v / scale;
    __int128 frac = v % scale;

    std::string whole_str;
    if (whole == 0) whole_str = "0";
    while (whole > 0) {
        whole_str.insert(whole_str.begin(), static_cast<char>('0' + static_cast<int>(whole % 10)));
        whole /= 10;
    }

    std::string out = (neg ? "-" : "") + whole_str;
    if (frac != 0) {
        std::string frac_str(kFracDigits, '0');
        for (int i = kFracDigits - 1; i >= 0; --i) {
            frac_str[static_cast<std::size_t>(i)] =
                static_cast<char>('0' + static_cast<int>(frac % 10));
            frac /= 10;
        }
        while (!frac_str.empty() && frac_str.back() == '0') frac_str.pop_back();
        out += "." + frac_str;
    }
    return out;
}

} // namespace hoplab
