#pragma once

#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_dec_float.hpp>

namespace solphish {

/// USD amounts and prices: 50 significant decimal digits, so prices read
/// from text ("0.9998") multiply without binary rounding.
using Usd = boost::multiprecision::cpp_dec_float_50;

/// Parses a non-negative decimal ("12", "0.9998", "1e-3"). Throws
/// std::invalid_argument otherwise.
Usd parse_usd(std::string_view text);

/// Fixed-point rendering, rounded half away from zero.
std::string format_usd(const Usd& value, int places = 2);

/// Lossless-enough text form for machine outputs (up to 18 places,
/// trailing zeros trimmed).
std::string usd_to_string(const Usd& value);

/// amount / 10^decimals as an exact decimal.
Usd scale_amount(std::uint64_t amount, std::uint8_t decimals);

}  // namespace solphish
