#include "solphish/usd.hpp"

#include <regex>
#include <stdexcept>

namespace solphish {

Usd parse_usd(std::string_view text) {
  static const std::regex kDecimal(R"(\+?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?)");
  const std::string s(text);
  if (!std::regex_match(s, kDecimal)) throw std::invalid_argument("not a non-negative decimal: '" + s + "'");
  return Usd(s.c_str());
}

std::string format_usd(const Usd& value, int places) {
  Usd scale = boost::multiprecision::pow(Usd(10), places);
  Usd scaled = value * scale;
  scaled = scaled < 0 ? -boost::multiprecision::floor(-scaled + Usd("0.5"))
                      : boost::multiprecision::floor(scaled + Usd("0.5"));
  auto s = Usd(scaled / scale).str(places, std::ios_base::fixed);
  if (s.starts_with('-') && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string usd_to_string(const Usd& value) {
  auto s = value.str(18, std::ios_base::fixed);
  if (s.find('.') != std::string::npos) {
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

Usd scale_amount(std::uint64_t amount, std::uint8_t decimals) {
  return Usd(amount) / boost::multiprecision::pow(Usd(10), decimals);
}

}  // namespace solphish
